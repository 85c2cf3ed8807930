#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edin/rng.hpp"
#include "edin/types.hpp"

namespace edin {

struct Neighbor {
  std::string entity_id;
  double score = 0.0;  // similarity under the index metric
};

enum class IndexMode : std::uint8_t { exact = 0, approximate = 1 };

struct HnswParams {
  std::uint32_t m = 32;                // neighbor degree
  std::uint32_t ef_construction = 200; // construction beam
  std::uint32_t ef_search = 128;       // search beam
  std::uint64_t level_seed = 1;        // seeded level generator
};

// Dense entity index over (entity_id, vector) pairs. Exact mode is a
// linear scan with a total order (descending score, ties by ascending
// entity id) and doubles as the correctness oracle for the approximate
// mode, a navigable small-world graph.
//
// knn is safe under unlimited concurrent readers; insert requires
// exclusive access.
class DenseIndex {
 public:
  static DenseIndex build(const std::vector<std::pair<std::string, VecF>>& entries,
                          Metric metric, IndexMode mode,
                          const HnswParams& params = {});

  void insert(const std::vector<std::pair<std::string, VecF>>& entries);

  std::vector<Neighbor> knn(const VecF& query, std::size_t k) const;

  void save(const std::string& path) const;
  static DenseIndex load(const std::string& path);

  std::size_t size() const { return ids_.size(); }
  Eigen::Index dim() const { return vectors_.rows(); }
  Metric metric() const { return metric_; }
  IndexMode mode() const { return mode_; }
  const HnswParams& params() const { return params_; }

  bool contains(const std::string& id) const {
    return id_to_slot_.count(id) != 0;
  }
  const std::string& id_at(std::size_t slot) const { return ids_[slot]; }
  VecF vector_of(const std::string& id) const;

  // Similarity between a query and a stored entry, under the index metric.
  double score_against(const VecF& query, std::size_t slot) const;

 private:
  DenseIndex(Metric metric, IndexMode mode, HnswParams params)
      : metric_(metric),
        mode_(mode),
        params_(params),
        level_rng_(SplitMix64::substream(params.level_seed, "hnsw_levels")) {}

  void append_entries(const std::vector<std::pair<std::string, VecF>>& entries);
  std::vector<Neighbor> knn_exact(const VecF& query, std::size_t k) const;
  std::vector<Neighbor> knn_graph(const VecF& query, std::size_t k) const;
  void graph_insert(std::size_t slot);
  std::vector<std::size_t> search_layer(const VecF& query, std::size_t entry,
                                        std::size_t beam, int level) const;
  int draw_level();

  Metric metric_;
  IndexMode mode_;
  HnswParams params_;

  std::vector<std::string> ids_;
  MatF vectors_;  // dim x count, entries as columns
  std::map<std::string, std::size_t> id_to_slot_;

  // Small-world graph state (approximate mode only).
  struct GraphNode {
    int level = 0;
    std::vector<std::vector<std::uint32_t>> neighbors;  // per level
  };
  std::vector<GraphNode> nodes_;
  std::int64_t entry_point_ = -1;
  int max_level_ = -1;
  SplitMix64 level_rng_;
};

}  // namespace edin
