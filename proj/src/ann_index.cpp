#include "edin/ann_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <queue>

#include "edin/error.hpp"
#include "edin/io.hpp"
#include "edin/rng.hpp"

namespace edin {

namespace {

// Output order: descending score, ties by ascending entity id.
bool neighbor_before(const Neighbor& a, const Neighbor& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.entity_id < b.entity_id;
}

}  // namespace

DenseIndex DenseIndex::build(
    const std::vector<std::pair<std::string, VecF>>& entries, Metric metric,
    IndexMode mode, const HnswParams& params) {
  if (entries.empty()) {
    raise(Err::InvalidArgument, "cannot build an index from zero entries");
  }
  DenseIndex index(metric, mode, params);
  index.insert(entries);
  return index;
}

void DenseIndex::append_entries(
    const std::vector<std::pair<std::string, VecF>>& entries) {
  const Eigen::Index dim =
      size() == 0 ? entries.front().second.size() : vectors_.rows();
  for (const auto& [id, vec] : entries) {
    if (vec.size() != dim) {
      raise(Err::DimensionMismatch,
            "entry '" + id + "' has dim " + std::to_string(vec.size()) +
                ", index dim " + std::to_string(dim));
    }
    if (id_to_slot_.count(id)) {
      raise(Err::DuplicateId, "entity id '" + id + "' already indexed");
    }
  }
  const std::size_t old = size();
  vectors_.conservativeResize(dim,
                              static_cast<Eigen::Index>(old + entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    vectors_.col(static_cast<Eigen::Index>(old + i)) = entries[i].second;
    ids_.push_back(entries[i].first);
    id_to_slot_.emplace(entries[i].first, old + i);
  }
}

void DenseIndex::insert(
    const std::vector<std::pair<std::string, VecF>>& entries) {
  if (entries.empty()) return;
  const std::size_t old = size();
  append_entries(entries);
  if (mode_ == IndexMode::approximate) {
    for (std::size_t slot = old; slot < size(); ++slot) {
      graph_insert(slot);
    }
  }
}

double DenseIndex::score_against(const VecF& query, std::size_t slot) const {
  const auto col = vectors_.col(static_cast<Eigen::Index>(slot));
  if (metric_ == Metric::inner_product) return dot64(query, col);
  return cosine64(query, col);
}

VecF DenseIndex::vector_of(const std::string& id) const {
  auto it = id_to_slot_.find(id);
  if (it == id_to_slot_.end()) {
    raise(Err::LookupMiss, "entity id '" + id + "' not in index");
  }
  return vectors_.col(static_cast<Eigen::Index>(it->second));
}

std::vector<Neighbor> DenseIndex::knn(const VecF& query, std::size_t k) const {
  if (k == 0) raise(Err::InvalidArgument, "knn requires k >= 1");
  if (size() == 0) raise(Err::EmptyIndex, "knn on an empty index");
  if (query.size() != dim()) {
    raise(Err::DimensionMismatch,
          "query dim " + std::to_string(query.size()) + ", index dim " +
              std::to_string(dim()));
  }
  return mode_ == IndexMode::exact ? knn_exact(query, k) : knn_graph(query, k);
}

std::vector<Neighbor> DenseIndex::knn_exact(const VecF& query,
                                            std::size_t k) const {
  std::vector<Neighbor> all;
  all.reserve(size());
  for (std::size_t slot = 0; slot < size(); ++slot) {
    all.push_back({ids_[slot], score_against(query, slot)});
  }
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take),
                    all.end(), neighbor_before);
  all.resize(take);
  return all;
}

int DenseIndex::draw_level() {
  // Geometric-like level assignment with the standard 1/ln(M) multiplier.
  const double u = level_rng_.next_open();
  const double ml = 1.0 / std::log(static_cast<double>(params_.m));
  return static_cast<int>(std::floor(-std::log(u) * ml));
}

std::vector<std::size_t> DenseIndex::search_layer(const VecF& query,
                                                  std::size_t entry,
                                                  std::size_t beam,
                                                  int level) const {
  using Item = std::pair<double, std::size_t>;  // (distance, slot)
  const auto dist = [&](std::size_t slot) {
    return -score_against(query, slot);
  };

  std::priority_queue<Item, std::vector<Item>, std::greater<>> candidates;
  std::priority_queue<Item> best;  // max-heap: worst of the beam on top
  std::vector<bool> visited(size(), false);

  const double d0 = dist(entry);
  candidates.emplace(d0, entry);
  best.emplace(d0, entry);
  visited[entry] = true;

  while (!candidates.empty()) {
    const auto [dc, c] = candidates.top();
    candidates.pop();
    if (dc > best.top().first && best.size() >= beam) break;
    for (std::uint32_t nb : nodes_[c].neighbors[static_cast<std::size_t>(level)]) {
      if (visited[nb]) continue;
      visited[nb] = true;
      const double dn = dist(nb);
      if (best.size() < beam || dn < best.top().first ||
          (dn == best.top().first && nb < best.top().second)) {
        candidates.emplace(dn, nb);
        best.emplace(dn, nb);
        if (best.size() > beam) best.pop();
      }
    }
  }

  std::vector<Item> items;
  items.reserve(best.size());
  while (!best.empty()) {
    items.push_back(best.top());
    best.pop();
  }
  std::sort(items.begin(), items.end());
  std::vector<std::size_t> out;
  out.reserve(items.size());
  for (const auto& [d, slot] : items) out.push_back(slot);
  return out;
}

void DenseIndex::graph_insert(std::size_t slot) {
  const int level = draw_level();
  nodes_.resize(size());
  nodes_[slot].level = level;
  nodes_[slot].neighbors.assign(static_cast<std::size_t>(level) + 1, {});

  if (entry_point_ < 0) {
    entry_point_ = static_cast<std::int64_t>(slot);
    max_level_ = level;
    return;
  }

  const VecF query = vectors_.col(static_cast<Eigen::Index>(slot));
  std::size_t ep = static_cast<std::size_t>(entry_point_);

  // Greedy descent through levels above the new node's level.
  for (int lc = max_level_; lc > level; --lc) {
    ep = search_layer(query, ep, 1, lc).front();
  }

  const auto max_degree = [&](int lc) {
    return static_cast<std::size_t>(lc == 0 ? 2 * params_.m : params_.m);
  };

  for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
    std::vector<std::size_t> frontier =
        search_layer(query, ep, params_.ef_construction, lc);
    const std::size_t degree =
        std::min<std::size_t>(params_.m, frontier.size());
    auto& own = nodes_[slot].neighbors[static_cast<std::size_t>(lc)];
    for (std::size_t i = 0; i < degree; ++i) {
      const std::size_t nb = frontier[i];
      own.push_back(static_cast<std::uint32_t>(nb));
      auto& theirs = nodes_[nb].neighbors[static_cast<std::size_t>(lc)];
      theirs.push_back(static_cast<std::uint32_t>(slot));
      if (theirs.size() > max_degree(lc)) {
        // Shrink to the closest links, ties by slot.
        const VecF centre = vectors_.col(static_cast<Eigen::Index>(nb));
        std::sort(theirs.begin(), theirs.end(),
                  [&](std::uint32_t a, std::uint32_t b) {
                    const double da = -score_against(centre, a);
                    const double db = -score_against(centre, b);
                    if (da != db) return da < db;
                    return a < b;
                  });
        theirs.resize(max_degree(lc));
      }
    }
    ep = frontier.front();
  }

  if (level > max_level_) {
    max_level_ = level;
    entry_point_ = static_cast<std::int64_t>(slot);
  }
}

std::vector<Neighbor> DenseIndex::knn_graph(const VecF& query,
                                            std::size_t k) const {
  std::size_t ep = static_cast<std::size_t>(entry_point_);
  for (int lc = max_level_; lc > 0; --lc) {
    ep = search_layer(query, ep, 1, lc).front();
  }
  const std::size_t beam = std::max<std::size_t>(params_.ef_search, k);
  const std::vector<std::size_t> found = search_layer(query, ep, beam, 0);

  std::vector<Neighbor> out;
  out.reserve(found.size());
  for (std::size_t slot : found) {
    out.push_back({ids_[slot], score_against(query, slot)});
  }
  std::sort(out.begin(), out.end(), neighbor_before);
  if (out.size() > k) out.resize(k);
  return out;
}

void DenseIndex::save(const std::string& path) const {
  io::Writer w;
  w.bytes("EDIX", 4);
  w.u32(1);
  w.u8(static_cast<std::uint8_t>(metric_));
  w.u8(static_cast<std::uint8_t>(mode_));
  w.u32(params_.m);
  w.u32(params_.ef_construction);
  w.u32(params_.ef_search);
  w.u64(params_.level_seed);
  w.u32(static_cast<std::uint32_t>(dim()));
  w.u64(size());
  for (std::size_t slot = 0; slot < size(); ++slot) {
    w.str(ids_[slot]);
    w.vec(vectors_.col(static_cast<Eigen::Index>(slot)));
  }
  w.write_file_with_crc(path);
}

DenseIndex DenseIndex::load(const std::string& path) {
  io::Reader r = io::Reader::from_file_checked(path);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, "EDIX", 4) != 0) {
    raise(Err::CorruptIndex, "bad magic in index file " + path);
  }
  const std::uint32_t version = r.u32();
  if (version != 1) {
    raise(Err::CorruptIndex,
          "unsupported index version " + std::to_string(version));
  }
  const auto metric = static_cast<Metric>(r.u8());
  const auto mode = static_cast<IndexMode>(r.u8());
  HnswParams params;
  params.m = r.u32();
  params.ef_construction = r.u32();
  params.ef_search = r.u32();
  params.level_seed = r.u64();
  const auto dim = static_cast<Eigen::Index>(r.u32());
  const std::uint64_t count = r.u64();

  std::vector<std::pair<std::string, VecF>> entries;
  entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string id = r.str();
    VecF vec = r.vec(dim);
    entries.emplace_back(std::move(id), std::move(vec));
  }
  if (!r.at_end()) raise(Err::CorruptIndex, "trailing bytes in " + path);

  // The graph is not persisted: replaying the insertions with the stored
  // level seed reproduces it exactly.
  return build(entries, metric, mode, params);
}

}  // namespace edin
