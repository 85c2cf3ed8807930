#include <doctest.h>

#include <filesystem>
#include <set>

#include "edin/corpus.hpp"
#include "edin/error.hpp"
#include "edin/io.hpp"

using namespace edin;
namespace fs = std::filesystem;

namespace {

const std::string kDocs = std::string(EDIN_FIXTURES) + "/docs_small.jsonl";
const std::string kCatalog = std::string(EDIN_FIXTURES) + "/catalog_small.jsonl";

std::string temp_file(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

Document make_doc(std::string id, std::int64_t ts,
                  std::vector<GoldMention> mentions = {}) {
  Document doc;
  doc.id = std::move(id);
  doc.text = "word another word";
  doc.timestamp = ts;
  doc.gold_mentions = std::move(mentions);
  return doc;
}

}  // namespace

TEST_CASE("fixture corpus loads 3 documents with 5 mentions") {
  const auto [docs, catalog] = load_corpus(kDocs, kCatalog);
  REQUIRE(docs.size() == 3);
  std::size_t mentions = 0;
  for (const Document& doc : docs.docs) mentions += doc.gold_mentions.size();
  CHECK(mentions == 5);
  CHECK(catalog.entities.size() == 3);
  CHECK(catalog.find("Q2")->title == "Berlin");
}

TEST_CASE("empty documents file gives an empty set") {
  const std::string path = temp_file("edin_empty.jsonl");
  io::write_text_file(path, "");
  CHECK(load_documents(path).empty());
  fs::remove(path);
}

TEST_CASE("span past the text end is rejected with the line number") {
  const std::string path = temp_file("edin_bad_span.jsonl");
  io::write_text_file(
      path,
      R"({"id":"d1","text":"short","timestamp":1,"mentions":[{"start":0,"end":9,"entity_id":"Q1"}]})"
      "\n");
  try {
    load_documents(path);
    FAIL("expected SpanOutOfBounds");
  } catch (const Error& e) {
    CHECK(e.kind() == Err::SpanOutOfBounds);
    CHECK(std::string(e.what()).find(":1") != std::string::npos);
  }
  fs::remove(path);
}

TEST_CASE("duplicate ids and malformed lines abort strictly") {
  const std::string path = temp_file("edin_dup.jsonl");
  io::write_text_file(path,
                      R"({"id":"d1","text":"a","timestamp":1})"
                      "\n"
                      R"({"id":"d1","text":"b","timestamp":2})"
                      "\n");
  CHECK_THROWS_AS(load_documents(path), Error);

  io::write_text_file(path, "{not json\n");
  try {
    load_documents(path);
    FAIL("expected MalformedRecord");
  } catch (const Error& e) {
    CHECK(e.kind() == Err::MalformedRecord);
  }
  fs::remove(path);
}

TEST_CASE("spans count Unicode scalar values, not bytes") {
  // "Café" is 4 code points but 5 UTF-8 bytes.
  const std::string path = temp_file("edin_unicode.jsonl");
  io::write_text_file(
      path,
      "{\"id\":\"d1\",\"text\":\"Caf\xC3\xA9 x\",\"timestamp\":1,"
      "\"mentions\":[{\"start\":5,\"end\":6,\"entity_id\":\"Q1\"}]}\n");
  const DocumentSet docs = load_documents(path);
  REQUIRE(docs.size() == 1);
  CHECK(docs.docs[0].gold_mentions[0].span == Span{5, 6});
  fs::remove(path);
}

TEST_CASE("round trip: serialize(load(fixture)) is byte-identical") {
  const DocumentSet docs = load_documents(kDocs);
  CHECK(serialize_documents(docs) == io::read_text_file(kDocs));
  const EntityCatalog catalog = load_catalog(kCatalog);
  CHECK(serialize_catalog(catalog) == io::read_text_file(kCatalog));
}

TEST_CASE("temporal split partitions the window by fractions") {
  DocumentSet docs;
  for (int i = 0; i < 100; ++i) {
    docs.docs.push_back(make_doc("w" + std::to_string(i), 1000 + i));
  }
  for (int i = 0; i < 10; ++i) {
    docs.docs.push_back(make_doc("t" + std::to_string(i), 10 + i));
  }
  docs.docs.push_back(make_doc("late", 99999));

  EntityCatalog catalog;
  const SplitSet splits = temporal_split(docs, catalog, 1000, 2000, 0.2, 0.1, 7);
  CHECK(splits.train.size() == 10);
  CHECK(splits.adapt.size() == 20);
  CHECK(splits.adapt_dev.size() == 10);
  CHECK(splits.test.size() == 70);
  CHECK(splits.discarded_after_t2 == 1);

  // Pairwise disjoint, union equals the window.
  std::set<std::string> seen;
  for (const auto* set : {&splits.adapt, &splits.adapt_dev, &splits.test}) {
    for (const Document& doc : set->docs) {
      CHECK(seen.insert(doc.id).second);
    }
  }
  CHECK(seen.size() == 100);
}

TEST_CASE("temporal split is deterministic for a fixed seed") {
  DocumentSet docs;
  for (int i = 0; i < 50; ++i) {
    docs.docs.push_back(make_doc("w" + std::to_string(i), 1000 + i));
  }
  EntityCatalog catalog;
  const SplitSet a = temporal_split(docs, catalog, 1000, 2000, 0.4, 0.0, 11);
  const SplitSet b = temporal_split(docs, catalog, 1000, 2000, 0.4, 0.0, 11);
  REQUIRE(a.adapt.size() == b.adapt.size());
  for (std::size_t i = 0; i < a.adapt.size(); ++i) {
    CHECK(a.adapt.docs[i].id == b.adapt.docs[i].id);
  }
  const SplitSet c = temporal_split(docs, catalog, 1000, 2000, 0.4, 0.0, 12);
  bool same = a.adapt.size() == c.adapt.size();
  if (same) {
    for (std::size_t i = 0; i < a.adapt.size(); ++i) {
      same = same && a.adapt.docs[i].id == c.adapt.docs[i].id;
    }
  }
  CHECK_FALSE(same);
}

TEST_CASE("temporal split classifies entities by added_at") {
  DocumentSet docs;
  docs.docs.push_back(make_doc("w", 1500));
  EntityCatalog catalog = load_catalog(kCatalog);  // Q1@50 Q2@60 Q3@250
  const SplitSet splits = temporal_split(docs, catalog, 100, 1000, 0.5, 0.0, 1);
  CHECK(splits.known_entities == std::set<std::string>{"Q1", "Q2"});
  CHECK(splits.unknown_entities == std::set<std::string>{"Q3"});
}

TEST_CASE("empty window raises EmptyWindow") {
  DocumentSet docs;
  docs.docs.push_back(make_doc("old", 5));
  EntityCatalog catalog;
  CHECK_THROWS_AS(temporal_split(docs, catalog, 1000, 2000, 0.5, 0.0, 1), Error);
  try {
    temporal_split(docs, catalog, 1000, 2000, 0.5, 0.0, 1);
  } catch (const Error& e) {
    CHECK(e.kind() == Err::EmptyWindow);
  }
}

namespace {

SplitSet splits_for_rebalance() {
  SplitSet splits;
  splits.known_entities = {"K1", "K2"};
  splits.unknown_entities = {"U1"};
  return splits;
}

DocumentSet rebalance_input(std::size_t unknown_docs, std::size_t known_docs) {
  DocumentSet adapt;
  for (std::size_t i = 0; i < unknown_docs; ++i) {
    adapt.docs.push_back(make_doc(
        "u" + std::to_string(i), 1500,
        {{{0, 4}, "U1"}}));
  }
  for (std::size_t i = 0; i < known_docs; ++i) {
    adapt.docs.push_back(make_doc(
        "k" + std::to_string(i), 1500,
        {{{0, 4}, "K1"}}));
  }
  return adapt;
}

std::pair<std::size_t, std::size_t> count_mentions(const DocumentSet& docs,
                                                   const SplitSet& splits) {
  std::size_t unknown = 0, known = 0;
  for (const Document& doc : docs.docs) {
    for (const GoldMention& m : doc.gold_mentions) {
      if (splits.unknown_entities.count(m.entity_id)) ++unknown;
      if (splits.known_entities.count(m.entity_id)) ++known;
    }
  }
  return {unknown, known};
}

}  // namespace

TEST_CASE("rebalance reaches the target ratio and keeps unknown mentions") {
  const SplitSet splits = splits_for_rebalance();
  const DocumentSet adapt = rebalance_input(10, 1000);
  const RebalanceResult result = rebalance_adaptation(adapt, splits, 0.1, 3);
  CHECK(result.ratio_achieved);
  const auto [unknown, known] = count_mentions(result.docs, splits);
  CHECK(unknown == 10);
  CHECK(known <= 100);
}

TEST_CASE("rebalance leaves an already-satisfied set unchanged") {
  const SplitSet splits = splits_for_rebalance();
  const DocumentSet adapt = rebalance_input(5, 10);  // ratio 0.5
  const RebalanceResult result = rebalance_adaptation(adapt, splits, 0.1, 3);
  CHECK(result.ratio_achieved);
  CHECK(result.docs.size() == adapt.size());
}

TEST_CASE("rebalance with zero unknown mentions raises") {
  const SplitSet splits = splits_for_rebalance();
  const DocumentSet adapt = rebalance_input(0, 10);
  try {
    rebalance_adaptation(adapt, splits, 0.1, 3);
    FAIL("expected NoUnknownMentions");
  } catch (const Error& e) {
    CHECK(e.kind() == Err::NoUnknownMentions);
  }
}

TEST_CASE("rebalance flags unachievable targets without dropping anything") {
  SplitSet splits = splits_for_rebalance();
  // Unknown mention shares every document with many known mentions.
  DocumentSet adapt;
  Document doc = make_doc("mix", 1500);
  doc.gold_mentions = {{{0, 4}, "U1"}, {{5, 12}, "K1"}, {{13, 17}, "K2"}};
  adapt.docs.push_back(doc);
  const RebalanceResult result = rebalance_adaptation(adapt, splits, 5.0, 3);
  CHECK_FALSE(result.ratio_achieved);
  CHECK(result.docs.size() == 1);
}

TEST_CASE("mention frequency table counts per entity") {
  const DocumentSet docs = load_documents(kDocs);
  const FrequencyTable table = mention_frequency_table(docs);
  CHECK(frequency_of(table, "Q1") == 2);
  CHECK(frequency_of(table, "Q3") == 2);
  CHECK(frequency_of(table, "absent") == 0);

  // Invariant under permutation of documents.
  DocumentSet reversed;
  reversed.docs.assign(docs.docs.rbegin(), docs.docs.rend());
  CHECK(mention_frequency_table(reversed) == table);
}

TEST_CASE("empty train set maps every entity to zero") {
  const FrequencyTable table = mention_frequency_table({});
  CHECK(frequency_of(table, "anything") == 0);
}
