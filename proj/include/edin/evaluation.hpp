#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edin/ann_index.hpp"
#include "edin/corpus.hpp"
#include "edin/linker.hpp"
#include "edin/types.hpp"

namespace edin {

// Benchmark-mode association between synthetic ids (clusters or drafts)
// and gold entities: each synthetic id maps to the majority gold label of
// its members (ties to the lexicographically smallest label); a gold
// entity may own several synthetic ids.
struct GoldAssociation {
  std::map<std::string, std::set<std::string>> gold_to_synthetic;
  std::map<std::string, std::string> synthetic_to_gold;

  bool matches(const std::string& predicted, const std::string& gold) const {
    if (predicted == gold) return true;
    auto it = synthetic_to_gold.find(predicted);
    return it != synthetic_to_gold.end() && it->second == gold;
  }
};

// One labelled group of mention gold labels per synthetic id.
GoldAssociation associate_clusters(
    const std::map<std::string, std::vector<std::string>>& synthetic_members);

enum class EvalSubset { all, known, unknown, unknown_filtered, unknown_discovered };

std::optional<EvalSubset> parse_subset(const std::string& name);
const char* to_string(EvalSubset subset);

struct SubsetContext {
  std::set<std::string> known_entities;
  std::set<std::string> unknown_entities;
  std::set<std::string> adapt_entities;       // gold entities seen in D_adapt
  std::set<std::string> discovered_entities;  // gold entities with an indexed draft
};

struct ElMetrics {
  double r_at_1 = 0.0;
  double p_at_1 = 0.0;
  std::size_t gold_support = 0;
  std::size_t predictions = 0;
  std::size_t correct = 0;
};

// Exact character-span match; a prediction of a synthetic id is correct
// iff the association maps it to the gold entity. R@1 is over gold
// mentions in the subset, P@1 over emitted predictions whose (mapped)
// entity falls in the subset; empty denominators give 0 by convention.
ElMetrics el_metrics(const std::vector<LinkPrediction>& predictions,
                     const DocumentSet& gold_docs, const GoldAssociation& assoc,
                     EvalSubset subset, const SubsetContext& ctx);

// Normalized mutual information between two partitions of the same
// element set: I(U;V) / ((H(U)+H(V))/2), natural logs. Both entropies
// zero => 1; exactly one zero => 0.
double nmi(const std::map<std::string, std::string>& pred_partition,
           const std::map<std::string, std::string>& gold_partition);

struct FrequencyBin {
  std::size_t lo = 0;                 // inclusive
  std::optional<std::size_t> hi;      // exclusive; nullopt = unbounded
  std::size_t support = 0;
  std::size_t correct = 0;
  double r_at_1 = 0.0;
};

// Mentions bucketed by their entity's train-split mention count. Default
// edges produce {0}, {1}, [2,10), [10,100), [100,1000), [1000,inf).
std::vector<FrequencyBin> frequency_binned(
    const std::vector<LinkPrediction>& predictions,
    const DocumentSet& gold_docs, const GoldAssociation& assoc,
    const FrequencyTable& freq, const std::vector<std::size_t>& bin_edges = {
        0, 1, 2, 10, 100, 1000});

struct ClassStats {
  double mean = 0.0;
  std::size_t max = 0;
  std::size_t zero_mention_entities = 0;
  std::size_t over_10 = 0;
  double skewness = 0.0;  // adjusted Fisher-Pearson G1
  std::size_t entities = 0;
  std::size_t mentions = 0;
};

struct CorpusStats {
  ClassStats known;
  ClassStats unknown;
};

CorpusStats corpus_stats(const DocumentSet& test,
                         const std::set<std::string>& known_entities,
                         const std::set<std::string>& unknown_entities);

// Sample skewness with the adjusted Fisher-Pearson correction factor.
double sample_skewness(const std::vector<double>& values);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided
};

WelchResult welch_t_test(const std::vector<double>& a,
                         const std::vector<double>& b);

// Regularized incomplete beta function (continued fraction expansion);
// backs the Student-t tail probability.
double incomplete_beta(double a, double b, double x);

struct ConfusabilityReport {
  double mean_sim_confusable = 0.0;
  double mean_sim_other = 0.0;
  std::size_t confusable_entities = 0;
  std::size_t other_entities = 0;
  WelchResult test;
};

struct LinkedMention {
  std::string entity_id;  // linked known entity
  VecF vector;
};

// A known entity is confusable when an unknown draft appears among its
// top-proximity_k neighbors in the merged index. Groups the
// mention-to-linked-entity similarities accordingly and applies Welch's
// two-sample t-test.
ConfusabilityReport confusability_report(
    const std::vector<LinkedMention>& linked_mentions,
    const DenseIndex& merged_index, const std::set<std::string>& known_ids,
    std::size_t proximity_k);

struct EvalReport {
  ElMetrics all;
  ElMetrics known;
  ElMetrics unknown;
  ElMetrics unknown_filtered;
  ElMetrics unknown_discovered;
  double nmi_all = 0.0;
  double nmi_known = 0.0;
  double nmi_unknown = 0.0;
  std::vector<FrequencyBin> bins;
  CorpusStats stats;
};

EvalReport evaluate_predictions(const std::vector<LinkPrediction>& predictions,
                                const DocumentSet& gold_docs,
                                const GoldAssociation& assoc,
                                const SubsetContext& ctx,
                                const FrequencyTable& train_freq);

std::string report_to_json(const EvalReport& report);
std::string bins_to_tsv(const std::vector<FrequencyBin>& bins);

}  // namespace edin
