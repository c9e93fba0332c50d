#include <gtest/gtest.h>

#include <zlib.h>

#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "hgpsl/graph_data.hpp"
#include "hgpsl/zip_archive.hpp"
#include "test_support.hpp"

// Same configuration as the library's translation unit.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace hgpsl {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hgpsl_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

// Triangle (graph label 1) and a single edge (graph label -1), TU layout.
fs::path write_fixture(const fs::path& root, const std::string& name = "FIX") {
  const fs::path dir = root / name;
  write_file(dir / (name + "_A.txt"), "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n");
  write_file(dir / (name + "_graph_indicator.txt"), "1\n1\n1\n2\n2\n");
  write_file(dir / (name + "_graph_labels.txt"), "1\n-1\n");
  return dir;
}

std::set<std::pair<Index, Index>> edge_set(const SparseMatrix& a) {
  std::set<std::pair<Index, Index>> out;
  for (Index r = 0; r < a.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(a, r); it; ++it) {
      if (r < it.col()) out.emplace(r, it.col());
    }
  }
  return out;
}

bool symmetric_loop_free(const SparseMatrix& a) {
  const Tensor d = testing::dense(a);
  return d == d.transpose() && d.diagonal().isZero(0.0);
}

TEST(ParseTu, TwoGraphFixture) {
  const auto dir = write_fixture(scratch_dir("fixture"));
  const Dataset ds = parse_tu_dataset(dir);
  ASSERT_EQ(ds.graphs.size(), 2u);
  EXPECT_EQ(ds.name, "FIX");
  EXPECT_EQ(ds.graphs[0].num_nodes(), 3);
  EXPECT_EQ(ds.graphs[1].num_nodes(), 2);
  const std::set<std::pair<Index, Index>> triangle = {{0, 1}, {1, 2}, {0, 2}};
  const std::set<std::pair<Index, Index>> single = {{0, 1}};
  EXPECT_EQ(edge_set(ds.graphs[0].adjacency), triangle);
  EXPECT_EQ(edge_set(ds.graphs[1].adjacency), single);
  for (const auto& g : ds.graphs) EXPECT_TRUE(symmetric_loop_free(g.adjacency));
  EXPECT_EQ(ds.num_classes, 2);
  EXPECT_EQ(ds.graphs[0].label, 1);
  EXPECT_EQ(ds.graphs[1].label, 0);
  EXPECT_EQ(ds.feature_dim, 1);
  EXPECT_EQ(ds.graphs[0].features, Tensor::Ones(3, 1));

  const DatasetStats s = compute_stats(ds);
  EXPECT_EQ(s.num_graphs, 2);
  EXPECT_EQ(s.num_nodes, 5);
  EXPECT_DOUBLE_EQ(s.avg_nodes, 2.5);
  EXPECT_DOUBLE_EQ(s.avg_edges_undirected, 2.0);
  EXPECT_DOUBLE_EQ(s.avg_edges_directed, 4.0);
}

TEST(ParseTu, DuplicateOneDirectionalAndSelfLoopEdges) {
  const fs::path dir = scratch_dir("dups") / "D";
  write_file(dir / "D_A.txt", "1, 2\n1, 2\n3, 2\n3, 3\n");
  write_file(dir / "D_graph_indicator.txt", "1\n1\n1\n");
  write_file(dir / "D_graph_labels.txt", "0\n");
  const Dataset ds = parse_tu_dataset(dir);
  const std::set<std::pair<Index, Index>> expected = {{0, 1}, {1, 2}};
  EXPECT_EQ(edge_set(ds.graphs[0].adjacency), expected);
  EXPECT_TRUE(symmetric_loop_free(ds.graphs[0].adjacency));
  EXPECT_EQ(ds.graphs[0].adjacency.nonZeros(), 4);
}

TEST(ParseTu, NodeLabelsAndAttributes) {
  const fs::path dir = write_fixture(scratch_dir("attrs"));
  write_file(dir / "FIX_node_labels.txt", "3\n5\n3\n7\n5\n");
  write_file(dir / "FIX_node_attributes.txt", "0.5, 1\n-1, 2\n0, 0\n1.5, 3\n2, 4\n");
  const Dataset ds = parse_tu_dataset(dir);
  EXPECT_EQ(ds.feature_dim, 5);
  Tensor row1(1, 5);
  row1 << 0, 1, 0, -1, 2;
  EXPECT_EQ(Tensor(ds.graphs[0].features.row(1)), row1);
  Tensor row3(1, 5);
  row3 << 0, 0, 1, 1.5, 3;
  EXPECT_EQ(Tensor(ds.graphs[1].features.row(0)), row3);

  const Dataset onehot = parse_tu_dataset(dir, FeatureScheme::OneHotLabel);
  EXPECT_EQ(onehot.feature_dim, 3);
}

TEST(ParseTu, MissingFileNamesTheFile) {
  const fs::path dir = write_fixture(scratch_dir("missing"));
  fs::remove(dir / "FIX_graph_labels.txt");
  try {
    parse_tu_dataset(dir);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("FIX_graph_labels.txt"), std::string::npos) << e.what();
  }
}

TEST(ParseTu, DanglingReferenceNamesTheLine) {
  const fs::path dir = write_fixture(scratch_dir("dangling"));
  write_file(dir / "FIX_A.txt", "1, 2\n2, 1\n2, 9\n");
  try {
    parse_tu_dataset(dir);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(ParseTu, SchemeWithoutDataIsConfigError) {
  const fs::path dir = write_fixture(scratch_dir("scheme"));
  EXPECT_THROW(parse_tu_dataset(dir, FeatureScheme::Attributes), ConfigError);
}

TEST(EncodeFeatures, OneHot) {
  NodeData nodes;
  nodes.num_nodes = 3;
  nodes.labels = std::vector<long>{0, 1, 2};
  const Tensor f = encode_features(nodes, FeatureScheme::OneHotLabel);
  Tensor expected(1, 3);
  expected << 0, 1, 0;
  EXPECT_EQ(Tensor(f.row(1)), expected);
}

TEST(EncodeFeatures, Constant) {
  NodeData nodes;
  nodes.num_nodes = 4;
  EXPECT_EQ(encode_features(nodes, FeatureScheme::Constant), Tensor::Ones(4, 1));
}

TEST(EncodeFeatures, OneHotPlusAttributes) {
  NodeData nodes;
  nodes.num_nodes = 2;
  nodes.labels = std::vector<long>{0, 1};
  Tensor attrs(2, 1);
  attrs << 0.25, 0.5;
  nodes.attributes = attrs;
  const Tensor f = encode_features(nodes, FeatureScheme::OneHotPlusAttributes);
  Tensor expected(1, 3);
  expected << 0, 1, 0.5;
  EXPECT_EQ(Tensor(f.row(1)), expected);
  EXPECT_EQ(default_feature_scheme(nodes), FeatureScheme::OneHotPlusAttributes);
}

TEST(FeatureScheme, RoundTrip) {
  for (const char* name : {"onehot-label", "attributes", "onehot-plus-attributes", "constant"}) {
    EXPECT_EQ(to_string(parse_feature_scheme(name)), name);
  }
  EXPECT_THROW(parse_feature_scheme("bag-of-words"), ConfigError);
}

TEST(Split, Sizes) {
  const SplitSpec ten = split(10, 3);
  EXPECT_EQ(ten.train_idx.size(), 8u);
  EXPECT_EQ(ten.valid_idx.size(), 1u);
  EXPECT_EQ(ten.test_idx.size(), 1u);
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const SplitSpec s = split(1113, seed);
    EXPECT_EQ(s.train_idx.size(), 890u);
    EXPECT_EQ(s.valid_idx.size(), 111u);
    EXPECT_EQ(s.test_idx.size(), 112u);
  }
}

TEST(Split, PartitionAndDeterminism) {
  const SplitSpec a = split(137, 42);
  const SplitSpec b = split(137, 42);
  EXPECT_EQ(a.train_idx, b.train_idx);
  EXPECT_EQ(a.valid_idx, b.valid_idx);
  EXPECT_EQ(a.test_idx, b.test_idx);
  std::set<Index> all;
  for (const auto* part : {&a.train_idx, &a.valid_idx, &a.test_idx}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), 137u);
  EXPECT_EQ(*all.begin(), 0);
  EXPECT_EQ(*all.rbegin(), 136);
  EXPECT_NE(split(137, 43).train_idx, a.train_idx);
}

TEST(Split, TooSmall) { EXPECT_THROW(split(9, 0), SizeError); }

TEST(Synth, BalancedCyclesAndCliquePairs) {
  const Dataset ds = synth_dataset(SynthKind::CyclesVsCliquePairs, 4, 8, 20, 5);
  ASSERT_EQ(ds.graphs.size(), 4u);
  int cycles = 0, pairs = 0;
  for (const auto& g : ds.graphs) {
    const Vec degree = testing::dense(g.adjacency).rowwise().sum();
    const Index n = g.num_nodes();
    if (g.label == 0) {
      ++cycles;
      EXPECT_EQ(g.adjacency.nonZeros(), 2 * n);
      EXPECT_TRUE((degree.array() == 2.0).all());
    } else {
      ++pairs;
      const Index a = n / 2, b = n - n / 2;
      EXPECT_EQ(g.adjacency.nonZeros() / 2, a * (a - 1) / 2 + b * (b - 1) / 2 + 1);
    }
    EXPECT_TRUE(symmetric_loop_free(g.adjacency));
    EXPECT_EQ(g.features, Tensor::Ones(n, 1));
  }
  EXPECT_EQ(cycles, 2);
  EXPECT_EQ(pairs, 2);
}

TEST(Synth, CycleOfFive) {
  const Dataset ds = synth_dataset(SynthKind::CyclesVsCliquePairs, 1, 5, 5, 0);
  const auto& g = ds.graphs[0];
  EXPECT_EQ(g.num_nodes(), 5);
  EXPECT_EQ(g.adjacency.nonZeros() / 2, 5);
  EXPECT_TRUE((testing::dense(g.adjacency).rowwise().sum().array() == 2.0).all());
}

TEST(Synth, Deterministic) {
  for (auto kind : {SynthKind::CyclesVsCliquePairs, SynthKind::TreesVsCycles}) {
    const Dataset a = synth_dataset(kind, 30, 6, 12, 9);
    const Dataset b = synth_dataset(kind, 30, 6, 12, 9);
    ASSERT_EQ(a.graphs.size(), b.graphs.size());
    for (std::size_t i = 0; i < a.graphs.size(); ++i) {
      EXPECT_EQ(testing::dense(a.graphs[i].adjacency), testing::dense(b.graphs[i].adjacency));
      EXPECT_EQ(a.graphs[i].label, b.graphs[i].label);
    }
  }
}

TEST(Synth, TreesHaveNMinusOneEdges) {
  const Dataset ds = synth_dataset(SynthKind::TreesVsCycles, 20, 5, 15, 1);
  for (const auto& g : ds.graphs) {
    const Index edges = g.adjacency.nonZeros() / 2;
    EXPECT_EQ(edges, g.label == 0 ? g.num_nodes() - 1 : g.num_nodes());
  }
  EXPECT_THROW(parse_synth_kind("stars"), ConfigError);
}

// ---------------------------------------------------------------------------
// Zip archives and the fetcher, served from a local HTTP server.

void put16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char(v >> 8));
}
void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::string raw_deflate(const std::string& data) {
  z_stream zs{};
  deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY);
  std::string out(deflateBound(&zs, data.size()), '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  return out;
}

// Minimal PKZIP writer: alternates stored and deflated entries.
std::string make_zip(const std::vector<std::pair<std::string, std::string>>& files) {
  std::string body, central;
  std::uint16_t count = 0;
  for (const auto& [name, data] : files) {
    const bool deflated = count % 2 == 1;
    const std::string payload = deflated ? raw_deflate(data) : data;
    const auto crc = static_cast<std::uint32_t>(crc32(0, reinterpret_cast<const Bytef*>(data.data()), uInt(data.size())));
    const auto offset = static_cast<std::uint32_t>(body.size());
    put32(body, 0x04034b50);
    put16(body, 20);
    put16(body, 0);
    put16(body, deflated ? 8 : 0);
    put16(body, 0);
    put16(body, 0);
    put32(body, crc);
    put32(body, std::uint32_t(payload.size()));
    put32(body, std::uint32_t(data.size()));
    put16(body, std::uint16_t(name.size()));
    put16(body, 0);
    body += name + payload;

    put32(central, 0x02014b50);
    put16(central, 20);
    put16(central, 20);
    put16(central, 0);
    put16(central, deflated ? 8 : 0);
    put16(central, 0);
    put16(central, 0);
    put32(central, crc);
    put32(central, std::uint32_t(payload.size()));
    put32(central, std::uint32_t(data.size()));
    put16(central, std::uint16_t(name.size()));
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put32(central, 0);
    put32(central, offset);
    central += name;
    ++count;
  }
  std::string out = body + central;
  put32(out, 0x06054b50);
  put16(out, 0);
  put16(out, 0);
  put16(out, count);
  put16(out, count);
  put32(out, std::uint32_t(central.size()));
  put32(out, std::uint32_t(body.size()));
  put16(out, 0);
  return out;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

std::vector<std::pair<std::string, std::string>> enzymes_like_files(bool complete) {
  std::vector<std::pair<std::string, std::string>> files = {
      {"ENZYMES/ENZYMES_A.txt", "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n"},
      {"ENZYMES/ENZYMES_graph_indicator.txt", "1\n1\n1\n2\n2\n"},
      {"ENZYMES/README.txt", std::string(2000, 'x')},
  };
  if (complete) files.push_back({"ENZYMES/ENZYMES_graph_labels.txt", "3\n5\n"});
  return files;
}

TEST(Zip, ReadsStoredAndDeflatedEntries) {
  const auto files = enzymes_like_files(true);
  const auto entries = read_zip(bytes_of(make_zip(files)));
  ASSERT_EQ(entries.size(), files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    EXPECT_EQ(entries[i].name, files[i].first);
    EXPECT_EQ(std::string(entries[i].data.begin(), entries[i].data.end()), files[i].second);
  }
}

TEST(Zip, RejectsGarbageAndEscapingPaths) {
  EXPECT_THROW(read_zip(bytes_of("not a zip archive at all")), FormatError);
  const fs::path dest = scratch_dir("zipslip");
  EXPECT_THROW(extract_zip(bytes_of(make_zip({{"../evil.txt", "x"}})), dest), FormatError);
  EXPECT_FALSE(fs::exists(dest.parent_path() / "evil.txt"));
}

class LocalHost : public ::testing::Test {
 protected:
  void SetUp() override {
    complete_ = make_zip(enzymes_like_files(true));
    incomplete_ = make_zip(enzymes_like_files(false));
    server_.Get("/data/ENZYMES.zip", [this](const httplib::Request&, httplib::Response& res) {
      ++hits_;
      res.set_content(complete_, "application/zip");
    });
    server_.Get("/data/PROTEINS.zip", [this](const httplib::Request&, httplib::Response& res) {
      ++hits_;
      res.set_content(incomplete_, "application/zip");
    });
    server_.Get("/moved/ENZYMES.zip", [](const httplib::Request&, httplib::Response& res) {
      res.set_redirect("/data/ENZYMES.zip");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  std::string complete_, incomplete_;
};

TEST_F(LocalHost, FetchUnpacksThenHitsCache) {
  const fs::path cache = scratch_dir("cache");
  const auto first = fetch_dataset("ENZYMES", url("/data"), cache);
  EXPECT_FALSE(first.cache_hit);
  EXPECT_EQ(first.directory, cache / "ENZYMES");
  EXPECT_EQ(parse_tu_dataset(first.directory).graphs.size(), 2u);
  EXPECT_EQ(hits_.load(), 1);

  const auto second = fetch_dataset("ENZYMES", "http://127.0.0.1:1/unreachable", cache);
  EXPECT_TRUE(second.cache_hit);
  EXPECT_EQ(second.directory, first.directory);
  EXPECT_EQ(hits_.load(), 1);
}

TEST_F(LocalHost, FollowsRedirects) {
  const auto r = fetch_dataset("ENZYMES", url("/moved/"), scratch_dir("redirect"));
  EXPECT_TRUE(has_tu_manifest(r.directory, "ENZYMES"));
}

TEST_F(LocalHost, IncompleteManifestIsFormatError) {
  EXPECT_THROW(fetch_dataset("PROTEINS", url("/data"), scratch_dir("incomplete")), FormatError);
}

TEST_F(LocalHost, MissingArchiveIsTransportError) {
  EXPECT_THROW(fetch_dataset("MUTAG", url("/data"), scratch_dir("missing404")), TransportError);
}

TEST(Fetch, UnknownNameIsLookupError) {
  EXPECT_THROW(fetch_dataset("NOT_A_DATASET", "http://127.0.0.1:1", scratch_dir("unknown")), LookupError);
}

TEST(Fetch, UnreachableHostIsTransportError) {
  EXPECT_THROW(fetch_dataset("NCI1", "http://127.0.0.1:1", scratch_dir("unreachable")), TransportError);
}

TEST(Fetch, CacheDirectoryFromEnvironment) {
  ::setenv("HGPSL_CACHE", "/tmp/some-cache", 1);
  EXPECT_EQ(default_cache_dir(), fs::path("/tmp/some-cache"));
  ::unsetenv("HGPSL_CACHE");
  EXPECT_EQ(default_cache_dir().filename(), "hgpsl");
}

}  // namespace
}  // namespace hgpsl
