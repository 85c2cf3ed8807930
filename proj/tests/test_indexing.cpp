#include <doctest.h>

#include <cmath>
#include <set>
#include <tuple>

#include "edin/embedding.hpp"
#include "edin/error.hpp"
#include "edin/indexing.hpp"
#include "edin/rng.hpp"

using namespace edin;

namespace {

Document make_doc(std::string id, std::string text) {
  Document doc;
  doc.id = std::move(id);
  doc.text = std::move(text);
  doc.timestamp = 1500;
  return doc;
}

MentionPool pool_with(const std::vector<std::tuple<std::string, Span,
                                                   std::string>>& mentions) {
  MentionPool pool;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    PooledMention m;
    m.mention_id = static_cast<int>(i);
    m.doc_id = std::get<0>(mentions[i]);
    m.span = std::get<1>(mentions[i]);
    m.surface = std::get<2>(mentions[i]);
    m.vector = VecF::Zero(4);
    pool.mentions.push_back(std::move(m));
  }
  return pool;
}

Cluster cluster_of(std::vector<int> members) {
  Cluster c;
  c.id = 0;
  c.member_ids = std::move(members);
  c.status = ClusterStatus::unknown;
  return c;
}

}  // namespace

TEST_CASE("extract_context finds the containing sentence") {
  const Document doc = make_doc("d1", "A. B mention C. D.");
  // Span of "mention": chars 5..12.
  const ContextWindow window = extract_context(doc, {5, 12});
  CHECK(window.sentence == "B mention C.");
  CHECK(window.span == Span{2, 9});
}

TEST_CASE("single-sentence documents return the whole text") {
  const Document doc = make_doc("d1", "just one sentence here");
  const ContextWindow window = extract_context(doc, {5, 8});
  CHECK(window.sentence == doc.text);
  CHECK(window.span == Span{5, 8});
}

TEST_CASE("spans crossing a sentence boundary fall back to the whole text") {
  const Document doc = make_doc("d1", "One end. Two start");
  const ContextWindow window = extract_context(doc, {4, 13});
  CHECK(window.sentence == doc.text);
  CHECK(window.span == Span{4, 13});
}

TEST_CASE("cluster titles use majority surfaces with documented ties") {
  SUBCASE("majority wins") {
    const auto pool = pool_with({{"d1", {0, 1}, "BioNTech"},
                                 {"d2", {0, 1}, "BioNTech"},
                                 {"d3", {0, 1}, "BionTech"}});
    CHECK(cluster_title(cluster_of({0, 1, 2}), pool) == "BioNTech");
  }
  SUBCASE("single mention returns its surface") {
    const auto pool = pool_with({{"d1", {0, 1}, "Solo"}});
    CHECK(cluster_title(cluster_of({0}), pool) == "Solo");
  }
  SUBCASE("case-insensitive tie resolves lexicographically") {
    const auto pool = pool_with({{"d1", {0, 1}, "Ab"}, {"d2", {0, 1}, "ab"}});
    CHECK(cluster_title(cluster_of({0, 1}), pool) == "Ab");
  }
  SUBCASE("empty clusters are rejected") {
    const auto pool = pool_with({{"d1", {0, 1}, "x"}});
    CHECK_THROWS_AS(cluster_title(cluster_of({}), pool), Error);
  }
}

TEST_CASE("index_cluster concatenates member sentences under the title") {
  const HashFeaturizer provider(128);
  DocumentSet docs;
  docs.docs.push_back(make_doc("d1", "acme rises fast"));
  docs.docs.push_back(make_doc("d2", "acme falls slowly"));
  const auto pool =
      pool_with({{"d1", {0, 4}, "acme"}, {"d2", {0, 4}, "acme"}});

  const IndexEntryDraft draft =
      index_cluster(cluster_of({0, 1}), pool, docs, provider, 2000);
  CHECK(draft.synthetic_entity_id == "EU:0");
  CHECK(draft.title == "acme");
  CHECK(draft.member_count == 2);
  const VecF expected = encode_entity(
      provider, "acme", "acme rises fast [SEP] acme falls slowly");
  CHECK(draft.vector == expected);

  SUBCASE("a singleton cluster encodes its one sentence") {
    const IndexEntryDraft solo =
        index_cluster(cluster_of({0}), pool, docs, provider, 2000);
    CHECK(solo.vector == encode_entity(provider, "acme", "acme rises fast"));
  }

  SUBCASE("truncation keeps whole windows, earliest first") {
    const IndexEntryDraft capped =
        index_cluster(cluster_of({0, 1}), pool, docs, provider, 20);
    CHECK(capped.vector == encode_entity(provider, "acme", "acme rises fast"));
  }

  SUBCASE("deterministic across repeated builds") {
    const IndexEntryDraft again =
        index_cluster(cluster_of({0, 1}), pool, docs, provider, 2000);
    CHECK(again.vector == draft.vector);
  }
}

TEST_CASE("index_mentions drafts one entry per member") {
  const HashFeaturizer provider(128);
  DocumentSet docs;
  docs.docs.push_back(make_doc("d1", "acme rises fast"));
  docs.docs.push_back(make_doc("d2", "acme falls slowly"));
  docs.docs.push_back(make_doc("d3", "acme holds steady"));
  const auto pool = pool_with({{"d1", {0, 4}, "acme"},
                               {"d2", {0, 4}, "acme"},
                               {"d3", {0, 4}, "Acme"}});

  const auto drafts = index_mentions(cluster_of({0, 1, 2}), pool, docs, provider);
  REQUIRE(drafts.size() == 3);
  std::set<std::string> ids;
  std::multiset<std::string> titles;
  for (const IndexEntryDraft& d : drafts) {
    ids.insert(d.synthetic_entity_id);
    titles.insert(d.title);
    CHECK(d.member_count == 1);
  }
  CHECK(ids.size() == 3);  // distinct synthetic ids
  CHECK(titles == std::multiset<std::string>{"Acme", "acme", "acme"});
  CHECK(drafts[0].vector ==
        encode_entity(provider, "acme", "acme rises fast"));
}

TEST_CASE("merge_drafts inserts vectors and appends catalog records") {
  const HashFeaturizer provider(32);
  VecF known = provider.encode_text("known [SEP] entity");
  auto index =
      DenseIndex::build({{"K1", known}}, Metric::cosine, IndexMode::exact);
  EntityCatalog catalog;
  catalog.by_id.emplace("K1", 0);
  catalog.entities.push_back({"K1", "known", "entity", 10});

  SUBCASE("zero drafts change nothing") {
    merge_drafts(index, {}, catalog, 2000);
    CHECK(index.size() == 1);
    CHECK(catalog.entities.size() == 1);
  }

  SUBCASE("drafts become searchable and catalogued") {
    IndexEntryDraft draft;
    draft.synthetic_entity_id = "EU:0";
    draft.title = "nova";
    draft.source_cluster = 0;
    draft.member_count = 2;
    draft.vector = provider.encode_text("nova [SEP] context");
    merge_drafts(index, {draft}, catalog, 2000);

    CHECK(index.size() == 2);
    CHECK(catalog.entities.size() == 2);
    CHECK(catalog.find("EU:0")->added_at == 2000);
    CHECK(catalog.find("EU:0")->description.empty());

    const auto result = index.knn(draft.vector, 1);
    CHECK(result[0].entity_id == "EU:0");
  }

  SUBCASE("synthetic ids must not collide with the catalog") {
    IndexEntryDraft draft;
    draft.synthetic_entity_id = "K1";
    draft.vector = known;
    try {
      merge_drafts(index, {draft}, catalog, 2000);
      FAIL("expected DuplicateId");
    } catch (const Error& e) {
      CHECK(e.kind() == Err::DuplicateId);
    }
  }
}

TEST_CASE("cluster vectors average out per-mention noise") {
  // Mean-style provider oracle: entity text tokens map to planted
  // "centroid + noise" vectors, so a concatenated-context encoding is the
  // mean of more noisy draws than any single-mention encoding.
  SplitMix64 rng(777);
  const Eigen::Index dim = 8;
  VecF centroid(dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    centroid[d] = static_cast<float>(rng.next_gaussian());
  }
  centroid.normalize();

  int cluster_wins = 0;
  const int trials = 100;
  const int k = 6;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<VecF> noisy;
    for (int i = 0; i < k; ++i) {
      VecF v = centroid;
      for (Eigen::Index d = 0; d < dim; ++d) {
        v[d] += static_cast<float>(rng.next_gaussian() * 0.6);
      }
      noisy.push_back(v);
    }
    // Cluster-style vector: mean of all noisy mentions.
    VecF cluster_vec = VecF::Zero(dim);
    for (const VecF& v : noisy) cluster_vec += v;
    cluster_vec /= static_cast<float>(k);

    const double cluster_sim = cosine64(cluster_vec, centroid);
    double mention_sim_sum = 0.0;
    for (const VecF& v : noisy) mention_sim_sum += cosine64(v, centroid);
    if (cluster_sim > mention_sim_sum / k) ++cluster_wins;
  }
  CHECK(cluster_wins >= 90);
}
