#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edin/types.hpp"

namespace edin {

struct GoldMention {
  Span span;                // Unicode scalar value offsets, end exclusive
  std::string entity_id;
};

struct Document {
  std::string id;
  std::string text;
  std::int64_t timestamp = 0;
  std::vector<GoldMention> gold_mentions;
};

struct EntityRecord {
  std::string id;
  std::string title;
  std::string description;
  std::int64_t added_at = 0;
};

// Immutable after construction; safe for concurrent reads.
struct DocumentSet {
  std::vector<Document> docs;

  std::size_t size() const { return docs.size(); }
  bool empty() const { return docs.empty(); }
};

struct EntityCatalog {
  std::vector<EntityRecord> entities;
  std::map<std::string, std::size_t> by_id;

  const EntityRecord* find(const std::string& id) const {
    auto it = by_id.find(id);
    return it == by_id.end() ? nullptr : &entities[it->second];
  }
};

struct SplitSet {
  DocumentSet train;
  DocumentSet adapt;
  DocumentSet adapt_dev;
  DocumentSet test;
  std::set<std::string> known_entities;    // added_at < t1
  std::set<std::string> unknown_entities;  // t1 <= added_at < t2
  std::size_t discarded_after_t2 = 0;
};

struct RebalanceResult {
  DocumentSet docs;
  bool ratio_achieved = true;
};

// Strict JSON-lines ingestion; any malformed line aborts with its number.
DocumentSet load_documents(const std::string& path);
EntityCatalog load_catalog(const std::string& path);
std::pair<DocumentSet, EntityCatalog> load_corpus(
    const std::string& documents_path, const std::string& catalog_path);

// Canonical writers: one compact JSON object per line, keys in format
// order, "mentions" omitted when empty. load(write(x)) is byte-stable.
std::string serialize_documents(const DocumentSet& docs);
std::string serialize_catalog(const EntityCatalog& catalog);
void write_documents(const std::string& path, const DocumentSet& docs);
void write_catalog(const std::string& path, const EntityCatalog& catalog);

// Documents before t1 go to train; documents in [t1, t2) are partitioned
// into adapt / adapt_dev / test by a seeded shuffle (SplitMix64 substream
// "temporal_split"). Membership is shuffled; each split preserves the
// input document order. Documents at or past t2 are dropped and counted.
SplitSet temporal_split(const DocumentSet& docs, const EntityCatalog& catalog,
                        std::int64_t t1, std::int64_t t2,
                        double adapt_fraction, double dev_fraction,
                        std::uint64_t seed);

// Subsamples documents carrying only known-entity mentions until the
// E_U:E_K mention ratio reaches target_ratio. Documents containing any
// unknown mention are never dropped.
RebalanceResult rebalance_adaptation(const DocumentSet& adapt,
                                     const SplitSet& splits,
                                     double target_ratio, std::uint64_t seed);

// Gold mentions per entity over the training split; absent entities
// count 0 via the lookup helper.
using FrequencyTable = std::map<std::string, std::size_t>;
FrequencyTable mention_frequency_table(const DocumentSet& train);
std::size_t frequency_of(const FrequencyTable& table, const std::string& id);

}  // namespace edin
