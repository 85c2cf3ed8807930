#pragma once

#include <cstdint>
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

struct PooledMention {
  int mention_id = 0;  // insertion order index
  std::string doc_id;
  Span span;  // character offsets
  std::string surface;
  VecF vector;
};

struct MentionPool {
  std::vector<PooledMention> mentions;

  std::size_t size() const { return mentions.size(); }
  bool empty() const { return mentions.empty(); }
};

enum class ClusterStatus { known, unknown };

struct Cluster {
  int id = 0;
  std::vector<int> member_ids;  // mention ids, ascending
  std::optional<std::string> assigned_entity;
  ClusterStatus status = ClusterStatus::unknown;
};

struct DiscoveryParams {
  double delta = 0.8171;   // mention-mention threshold
  double tau = 110.0;      // mention-entity threshold
  double coverage = 0.7;   // fraction of members tau must hold for
  int knn_k = 16;          // candidate entities per mention
  int min_cluster_size = 1;
};

struct DiscoveryReport {
  std::size_t mentions = 0;
  std::size_t clusters = 0;
  std::size_t known_clusters = 0;
  std::size_t unknown_clusters = 0;

  // Benchmark-mode diagnostics, present when gold labels exist. Clusters
  // are classed by the majority gold label of their labelled members.
  struct GoldDiagnostics {
    double cluster_precision_unknown = 0.0;
    double cluster_recall_unknown = 0.0;
    double cluster_precision_known = 0.0;
    double cluster_recall_known = 0.0;
    std::size_t unknown_entities_in_pool = 0;
    std::size_t unknown_entities_discovered = 0;
    double entity_recall_unknown = 0.0;
    double nmi = 0.0;
  };
  std::optional<GoldDiagnostics> gold;
};

// Runs mention detection and pooling over every document, in document
// order then span order. The rejection head is deliberately not applied:
// discovery must see mentions the gate would reject.
MentionPool collect_mentions(const DocumentSet& adapt,
                             const EmbeddingProvider& provider,
                             const MdWeights& weights,
                             const MentionPooler& pooler,
                             const LinkConfig& config);

// Streaming greedy NN clustering: each mention joins the cluster of its
// most similar already-processed mention when that similarity exceeds
// delta, else starts a new cluster. Ties go to the earliest-processed
// neighbor. Sequential by definition; order-dependent.
std::vector<Cluster> greedy_nn_cluster(const MentionPool& pool, double delta,
                                       Metric metric);

// Coverage-thresholded entity assignment: an entity is a candidate for a
// cluster when it is the nearest entity of at least one member with
// similarity above tau; it is assigned when the tau test holds for at
// least ceil(coverage * |cluster|) members. Several qualifying candidates
// resolve by highest mean similarity, then lexicographic entity id.
std::vector<Cluster> assign_entities(const std::vector<Cluster>& clusters,
                                     const MentionPool& pool,
                                     const DenseIndex& entity_index,
                                     const DiscoveryParams& params);

struct DiscoveryResult {
  MentionPool pool;
  std::vector<Cluster> clusters;
  DiscoveryReport report;
};

DiscoveryResult discover(const DocumentSet& adapt,
                         const EmbeddingProvider& provider,
                         const MdWeights& weights, const MentionPooler& pooler,
                         const LinkConfig& link_config,
                         const DenseIndex& entity_index,
                         const DiscoveryParams& params,
                         const SplitSet* splits = nullptr);

struct TuneGrids {
  std::vector<double> s_m;
  std::vector<double> delta;
  std::vector<double> tau;
};

// Grid search in the fixed order s_m (unknown discovery recall), delta
// (clustering NMI), tau (unknown discovery recall); earlier optima are
// frozen while later grids are scanned. Ties resolve to the smallest grid
// value.
struct TunedParams {
  double s_m = 0.5;
  DiscoveryParams params;
};

TunedParams tune_thresholds(const DocumentSet& adapt_dev,
                            const EmbeddingProvider& provider,
                            const MdWeights& weights,
                            const MentionPooler& pooler,
                            const LinkConfig& link_config,
                            const DenseIndex& entity_index,
                            const DiscoveryParams& base_params,
                            const TuneGrids& grids, const SplitSet& splits);

// Gold label for a pooled mention: the gold mention with the exact same
// character span, when present.
std::optional<std::string> gold_label_for(const DocumentSet& docs,
                                          const PooledMention& mention);

std::string serialize_clusters(const std::vector<Cluster>& clusters,
                               const MentionPool& pool);

}  // namespace edin
