#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "edin/ann_index.hpp"
#include "edin/error.hpp"
#include "edin/io.hpp"
#include "edin/rng.hpp"

using namespace edin;
namespace fs = std::filesystem;

namespace {

std::vector<std::pair<std::string, VecF>> random_entries(std::size_t n,
                                                         Eigen::Index dim,
                                                         SplitMix64& rng) {
  std::vector<std::pair<std::string, VecF>> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    VecF v(dim);
    for (Eigen::Index d = 0; d < dim; ++d) {
      v[d] = static_cast<float>(rng.next_gaussian());
    }
    char id[16];
    std::snprintf(id, sizeof(id), "e%05zu", i);
    entries.emplace_back(id, v);
  }
  return entries;
}

// Independent oracle: score everything, full sort, cut at k.
std::vector<Neighbor> linear_scan_oracle(
    const std::vector<std::pair<std::string, VecF>>& entries, Metric metric,
    const VecF& query, std::size_t k) {
  std::vector<Neighbor> all;
  for (const auto& [id, vec] : entries) {
    all.push_back({id, similarity(metric, query, vec)});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity_id < b.entity_id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace

TEST_CASE("single entry index and duplicate rejection") {
  VecF v(2);
  v << 1.0f, 0.0f;
  const auto index =
      DenseIndex::build({{"a", v}}, Metric::cosine, IndexMode::exact);
  CHECK(index.size() == 1);

  try {
    DenseIndex::build({{"a", v}, {"a", v}}, Metric::cosine, IndexMode::exact);
    FAIL("expected DuplicateId");
  } catch (const Error& e) {
    CHECK(e.kind() == Err::DuplicateId);
  }
}

TEST_CASE("knn arithmetic on axis vectors") {
  VecF e1(2), e2(2), q(2);
  e1 << 1.0f, 0.0f;
  e2 << 0.0f, 1.0f;
  q << 0.9f, 0.1f;
  const auto index = DenseIndex::build({{"e1", e1}, {"e2", e2}},
                                       Metric::inner_product, IndexMode::exact);
  const auto result = index.knn(q, 1);
  REQUIRE(result.size() == 1);
  CHECK(result[0].entity_id == "e1");
  CHECK(result[0].score == doctest::Approx(0.9).epsilon(1e-12));

  // k beyond the index size returns everything, sorted.
  const auto all = index.knn(q, 10);
  REQUIRE(all.size() == 2);
  CHECK(all[0].entity_id == "e1");
  CHECK(all[1].entity_id == "e2");
  CHECK(all[0].score >= all[1].score);
}

TEST_CASE("cosine self-similarity is 1 within 1e-6") {
  SplitMix64 rng(5);
  const auto entries = random_entries(50, 16, rng);
  const auto index = DenseIndex::build(entries, Metric::cosine, IndexMode::exact);
  for (int i = 0; i < 10; ++i) {
    const auto& [id, vec] = entries[static_cast<std::size_t>(i) * 3];
    const auto result = index.knn(vec, 1);
    CHECK(result[0].entity_id == id);
    CHECK(result[0].score == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("exact knn equals the linear-scan oracle") {
  SplitMix64 rng(17);
  const auto entries = random_entries(1000, 32, rng);
  const auto index =
      DenseIndex::build(entries, Metric::inner_product, IndexMode::exact);
  for (int qi = 0; qi < 100; ++qi) {
    VecF q(32);
    for (Eigen::Index d = 0; d < 32; ++d) {
      q[d] = static_cast<float>(rng.next_gaussian());
    }
    const auto got = index.knn(q, 10);
    const auto want = linear_scan_oracle(entries, Metric::inner_product, q, 10);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].entity_id == want[i].entity_id);
      CHECK(got[i].score == want[i].score);
    }
  }
}

TEST_CASE("ties break by ascending entity id") {
  VecF v(2);
  v << 1.0f, 0.0f;
  const auto index = DenseIndex::build({{"zed", v}, {"abc", v}},
                                       Metric::cosine, IndexMode::exact);
  const auto result = index.knn(v, 2);
  CHECK(result[0].entity_id == "abc");
  CHECK(result[1].entity_id == "zed");
}

TEST_CASE("scores are non-increasing") {
  SplitMix64 rng(23);
  const auto entries = random_entries(200, 8, rng);
  const auto index =
      DenseIndex::build(entries, Metric::inner_product, IndexMode::exact);
  VecF q(8);
  for (Eigen::Index d = 0; d < 8; ++d) {
    q[d] = static_cast<float>(rng.next_gaussian());
  }
  const auto result = index.knn(q, 50);
  for (std::size_t i = 1; i < result.size(); ++i) {
    CHECK(result[i - 1].score >= result[i].score);
  }
}

TEST_CASE("insert matches a rebuilt-from-scratch index (exact mode)") {
  SplitMix64 rng(31);
  auto initial = random_entries(100, 16, rng);
  auto extra = random_entries(40, 16, rng);
  for (auto& [id, vec] : extra) id = "x" + id;

  auto incremental =
      DenseIndex::build(initial, Metric::cosine, IndexMode::exact);
  incremental.insert(extra);

  auto combined = initial;
  combined.insert(combined.end(), extra.begin(), extra.end());
  const auto rebuilt =
      DenseIndex::build(combined, Metric::cosine, IndexMode::exact);

  CHECK(incremental.size() == rebuilt.size());
  for (int qi = 0; qi < 20; ++qi) {
    VecF q(16);
    for (Eigen::Index d = 0; d < 16; ++d) {
      q[d] = static_cast<float>(rng.next_gaussian());
    }
    const auto a = incremental.knn(q, 10);
    const auto b = rebuilt.knn(q, 10);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].entity_id == b[i].entity_id);
      CHECK(a[i].score == b[i].score);
    }
  }
}

TEST_CASE("insert of an empty list leaves the index unchanged") {
  VecF v(2);
  v << 1.0f, 2.0f;
  auto index = DenseIndex::build({{"a", v}}, Metric::cosine, IndexMode::exact);
  index.insert({});
  CHECK(index.size() == 1);
}

TEST_CASE("inserted entries are immediately searchable") {
  SplitMix64 rng(37);
  const auto entries = random_entries(50, 8, rng);
  auto index = DenseIndex::build(entries, Metric::cosine, IndexMode::exact);
  VecF nv(8);
  for (Eigen::Index d = 0; d < 8; ++d) {
    nv[d] = static_cast<float>(rng.next_gaussian());
  }
  index.insert({{"new-entry", nv}});
  const auto result = index.knn(nv, 1);
  CHECK(result[0].entity_id == "new-entry");
}

TEST_CASE("dimension mismatches are rejected") {
  VecF v2(2), v3(3);
  v2 << 1.0f, 0.0f;
  v3 << 1.0f, 0.0f, 0.0f;
  auto index = DenseIndex::build({{"a", v2}}, Metric::cosine, IndexMode::exact);
  CHECK_THROWS_AS(index.insert({{"b", v3}}), Error);
  CHECK_THROWS_AS(index.knn(v3, 1), Error);
}

TEST_CASE("save/load round-trip answers queries bit-exactly") {
  const std::string path =
      (fs::temp_directory_path() / "edin_index_roundtrip.edix").string();
  SplitMix64 rng(41);
  const auto entries = random_entries(100, 16, rng);
  const auto index =
      DenseIndex::build(entries, Metric::inner_product, IndexMode::exact);
  index.save(path);
  const DenseIndex loaded = DenseIndex::load(path);

  for (int qi = 0; qi < 50; ++qi) {
    VecF q(16);
    for (Eigen::Index d = 0; d < 16; ++d) {
      q[d] = static_cast<float>(rng.next_gaussian());
    }
    const auto a = index.knn(q, 10);
    const auto b = loaded.knn(q, 10);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].entity_id == b[i].entity_id);
      CHECK(a[i].score == b[i].score);  // bit-exact
    }
  }
  fs::remove(path);
}

TEST_CASE("two saves of the same index are byte-identical") {
  const std::string p1 = (fs::temp_directory_path() / "edin_idx_a.edix").string();
  const std::string p2 = (fs::temp_directory_path() / "edin_idx_b.edix").string();
  SplitMix64 rng(43);
  const auto entries = random_entries(30, 8, rng);
  const auto index = DenseIndex::build(entries, Metric::cosine, IndexMode::exact);
  index.save(p1);
  index.save(p2);
  CHECK(io::read_text_file(p1) == io::read_text_file(p2));
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("truncated index file raises CorruptIndex") {
  const std::string path =
      (fs::temp_directory_path() / "edin_idx_trunc.edix").string();
  SplitMix64 rng(47);
  const auto entries = random_entries(10, 4, rng);
  DenseIndex::build(entries, Metric::cosine, IndexMode::exact).save(path);
  const std::string bytes = io::read_text_file(path);
  io::write_text_file(path, bytes.substr(0, bytes.size() / 2));
  try {
    DenseIndex::load(path);
    FAIL("expected CorruptIndex");
  } catch (const Error& e) {
    CHECK(e.kind() == Err::CorruptIndex);
  }
  fs::remove(path);
}

TEST_CASE("hnsw search reaches high recall against exact mode") {
  SplitMix64 rng(53);
  const auto entries = random_entries(2000, 32, rng);
  const auto exact =
      DenseIndex::build(entries, Metric::inner_product, IndexMode::exact);
  const auto graph = DenseIndex::build(entries, Metric::inner_product,
                                       IndexMode::approximate, HnswParams{});

  std::size_t hits = 0, total = 0;
  for (int qi = 0; qi < 50; ++qi) {
    VecF q(32);
    for (Eigen::Index d = 0; d < 32; ++d) {
      q[d] = static_cast<float>(rng.next_gaussian());
    }
    const auto want = exact.knn(q, 10);
    const auto got = graph.knn(q, 10);
    for (const Neighbor& w : want) {
      ++total;
      for (const Neighbor& g : got) {
        if (g.entity_id == w.entity_id) {
          ++hits;
          break;
        }
      }
    }
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(total) >= 0.9);
}

TEST_CASE("hnsw build and save/load reproduce the same answers") {
  const std::string path =
      (fs::temp_directory_path() / "edin_idx_hnsw.edix").string();
  SplitMix64 rng(59);
  const auto entries = random_entries(500, 16, rng);
  HnswParams params;
  params.level_seed = 7;
  const auto graph = DenseIndex::build(entries, Metric::cosine,
                                       IndexMode::approximate, params);
  graph.save(path);
  const DenseIndex loaded = DenseIndex::load(path);
  CHECK(loaded.mode() == IndexMode::approximate);
  for (int qi = 0; qi < 20; ++qi) {
    VecF q(16);
    for (Eigen::Index d = 0; d < 16; ++d) {
      q[d] = static_cast<float>(rng.next_gaussian());
    }
    const auto a = graph.knn(q, 5);
    const auto b = loaded.knn(q, 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].entity_id == b[i].entity_id);
      CHECK(a[i].score == b[i].score);
    }
  }
  fs::remove(path);
}
