#include "edin/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "edin/error.hpp"
#include "edin/evaluation.hpp"
#include "edin/utf8.hpp"

namespace edin {

using ordered_json = nlohmann::ordered_json;

MentionPool collect_mentions(const DocumentSet& adapt,
                             const EmbeddingProvider& provider,
                             const MdWeights& weights,
                             const MentionPooler& pooler,
                             const LinkConfig& config) {
  MentionPool pool;
  for (const Document& doc : adapt.docs) {
    if (doc.text.empty()) continue;
    const TokenVectors tokens = token_vectors(provider, doc.text);
    if (tokens.count() == 0) continue;
    std::vector<SpanCandidate> spans = score_spans(
        tokens, weights, config.max_span_len, config.top_k, config.s_m);
    // Document order, then span order within the document.
    std::sort(spans.begin(), spans.end(),
              [](const SpanCandidate& a, const SpanCandidate& b) {
                if (a.first_token != b.first_token)
                  return a.first_token < b.first_token;
                return a.last_token < b.last_token;
              });
    for (const SpanCandidate& cand : spans) {
      PooledMention m;
      m.mention_id = static_cast<int>(pool.mentions.size());
      m.doc_id = doc.id;
      m.span = {tokens.offsets[static_cast<std::size_t>(cand.first_token)].start,
                tokens.offsets[static_cast<std::size_t>(cand.last_token)].end};
      m.surface = utf8::substr(doc.text, m.span.start, m.span.end);
      m.vector = pool_mention(tokens, cand.first_token, cand.last_token, pooler);
      pool.mentions.push_back(std::move(m));
    }
  }
  return pool;
}

std::vector<Cluster> greedy_nn_cluster(const MentionPool& pool, double delta,
                                       Metric metric) {
  if (!std::isfinite(delta)) {
    raise(Err::InvalidArgument, "delta must be finite");
  }
  std::vector<Cluster> clusters;
  std::vector<int> cluster_of(pool.size(), -1);

  for (std::size_t i = 0; i < pool.size(); ++i) {
    // Nearest already-processed mention; earliest index wins ties.
    int best = -1;
    double best_sim = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double sim =
          similarity(metric, pool.mentions[i].vector, pool.mentions[j].vector);
      if (best < 0 || sim > best_sim) {
        best = static_cast<int>(j);
        best_sim = sim;
      }
    }
    if (best >= 0 && best_sim > delta) {
      const int cid = cluster_of[static_cast<std::size_t>(best)];
      clusters[static_cast<std::size_t>(cid)].member_ids.push_back(
          pool.mentions[i].mention_id);
      cluster_of[i] = cid;
    } else {
      Cluster c;
      c.id = static_cast<int>(clusters.size());
      c.member_ids.push_back(pool.mentions[i].mention_id);
      cluster_of[i] = c.id;
      clusters.push_back(std::move(c));
    }
  }
  return clusters;
}

std::vector<Cluster> assign_entities(const std::vector<Cluster>& clusters,
                                     const MentionPool& pool,
                                     const DenseIndex& entity_index,
                                     const DiscoveryParams& params) {
  if (entity_index.size() == 0) {
    raise(Err::EmptyIndex, "assign_entities needs a nonempty entity index");
  }
  std::vector<Cluster> out = clusters;
  for (Cluster& cluster : out) {
    const std::size_t n = cluster.member_ids.size();
    // "At least coverage" with a small guard against binary fraction noise.
    const auto required = static_cast<std::size_t>(std::ceil(
        params.coverage * static_cast<double>(n) - 1e-9));

    // Candidates: nearest entity of at least one member, above tau there.
    std::set<std::string> candidates;
    for (int mid : cluster.member_ids) {
      const PooledMention& m = pool.mentions[static_cast<std::size_t>(mid)];
      const auto neighbors =
          entity_index.knn(m.vector, static_cast<std::size_t>(params.knn_k));
      if (!neighbors.empty() && neighbors.front().score > params.tau) {
        candidates.insert(neighbors.front().entity_id);
      }
    }

    std::optional<std::string> chosen;
    double chosen_mean = 0.0;
    for (const std::string& entity_id : candidates) {
      const VecF evec = entity_index.vector_of(entity_id);
      std::size_t held = 0;
      double sim_sum = 0.0;
      for (int mid : cluster.member_ids) {
        const PooledMention& m = pool.mentions[static_cast<std::size_t>(mid)];
        const double sim =
            similarity(entity_index.metric(), evec, m.vector);
        sim_sum += sim;
        if (sim > params.tau) ++held;
      }
      if (held < required) continue;
      const double mean = sim_sum / static_cast<double>(n);
      if (!chosen || mean > chosen_mean ||
          (mean == chosen_mean && entity_id < *chosen)) {
        chosen = entity_id;
        chosen_mean = mean;
      }
    }

    if (chosen) {
      cluster.assigned_entity = *chosen;
      cluster.status = ClusterStatus::known;
    } else {
      cluster.assigned_entity.reset();
      cluster.status = ClusterStatus::unknown;
    }
  }
  return out;
}

std::optional<std::string> gold_label_for(const DocumentSet& docs,
                                          const PooledMention& mention) {
  for (const Document& doc : docs.docs) {
    if (doc.id != mention.doc_id) continue;
    for (const GoldMention& gm : doc.gold_mentions) {
      if (gm.span == mention.span) return gm.entity_id;
    }
    return std::nullopt;
  }
  return std::nullopt;
}

namespace {

// Majority gold label among labelled members; ties to the smallest label.
std::optional<std::string> majority_label(
    const Cluster& cluster, const std::vector<std::optional<std::string>>& labels) {
  std::map<std::string, std::size_t> counts;
  for (int mid : cluster.member_ids) {
    const auto& label = labels[static_cast<std::size_t>(mid)];
    if (label) ++counts[*label];
  }
  std::optional<std::string> best;
  std::size_t best_count = 0;
  for (const auto& [label, count] : counts) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

}  // namespace

DiscoveryResult discover(const DocumentSet& adapt,
                         const EmbeddingProvider& provider,
                         const MdWeights& weights, const MentionPooler& pooler,
                         const LinkConfig& link_config,
                         const DenseIndex& entity_index,
                         const DiscoveryParams& params,
                         const SplitSet* splits) {
  DiscoveryResult result;
  result.pool = collect_mentions(adapt, provider, weights, pooler, link_config);
  const std::vector<Cluster> raw =
      greedy_nn_cluster(result.pool, params.delta, entity_index.metric());
  result.clusters = assign_entities(raw, result.pool, entity_index, params);

  DiscoveryReport& report = result.report;
  report.mentions = result.pool.size();
  report.clusters = result.clusters.size();
  for (const Cluster& c : result.clusters) {
    if (c.status == ClusterStatus::unknown) {
      ++report.unknown_clusters;
    } else {
      ++report.known_clusters;
    }
  }

  if (splits != nullptr) {
    std::map<std::pair<std::string, Span>, std::string> gold_index;
    for (const Document& doc : adapt.docs) {
      for (const GoldMention& gm : doc.gold_mentions) {
        gold_index.emplace(std::make_pair(doc.id, gm.span), gm.entity_id);
      }
    }
    std::vector<std::optional<std::string>> labels(result.pool.size());
    std::size_t labelled = 0;
    for (std::size_t i = 0; i < result.pool.size(); ++i) {
      const PooledMention& m = result.pool.mentions[i];
      auto it = gold_index.find({m.doc_id, m.span});
      if (it != gold_index.end()) {
        labels[i] = it->second;
        ++labelled;
      }
    }
    if (labelled > 0) {
      DiscoveryReport::GoldDiagnostics gold;

      std::size_t tp_u = 0, fp_u = 0, fn_u = 0;
      std::size_t tp_k = 0, fp_k = 0, fn_k = 0;
      std::set<std::string> unknown_seen, unknown_found;
      for (std::size_t i = 0; i < result.pool.size(); ++i) {
        if (labels[i] && splits->unknown_entities.count(*labels[i])) {
          unknown_seen.insert(*labels[i]);
        }
      }
      for (const Cluster& c : result.clusters) {
        const auto majority = majority_label(c, labels);
        if (!majority) continue;
        const bool truly_unknown = splits->unknown_entities.count(*majority) > 0;
        const bool truly_known = splits->known_entities.count(*majority) > 0;
        if (!truly_unknown && !truly_known) continue;
        const bool predicted_unknown = c.status == ClusterStatus::unknown;
        if (predicted_unknown) {
          truly_unknown ? ++tp_u : ++fp_u;
          if (truly_known) ++fn_k;
          if (truly_unknown) unknown_found.insert(*majority);
        } else {
          truly_known ? ++tp_k : ++fp_k;
          if (truly_unknown) ++fn_u;
        }
      }
      const auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
      };
      gold.cluster_precision_unknown = ratio(tp_u, tp_u + fp_u);
      gold.cluster_recall_unknown = ratio(tp_u, tp_u + fn_u);
      gold.cluster_precision_known = ratio(tp_k, tp_k + fp_k);
      gold.cluster_recall_known = ratio(tp_k, tp_k + fn_k);
      gold.unknown_entities_in_pool = unknown_seen.size();
      gold.unknown_entities_discovered = unknown_found.size();
      gold.entity_recall_unknown =
          ratio(unknown_found.size(), unknown_seen.size());

      // Clustering quality over labelled mentions only.
      std::map<std::string, std::string> pred_partition, gold_partition;
      std::vector<int> cluster_of(result.pool.size(), -1);
      for (const Cluster& c : result.clusters) {
        for (int mid : c.member_ids) {
          cluster_of[static_cast<std::size_t>(mid)] = c.id;
        }
      }
      for (std::size_t i = 0; i < result.pool.size(); ++i) {
        if (!labels[i]) continue;
        const std::string key = std::to_string(i);
        pred_partition[key] = std::to_string(cluster_of[i]);
        gold_partition[key] = *labels[i];
      }
      gold.nmi = nmi(pred_partition, gold_partition);
      report.gold = gold;
    }
  }
  return result;
}

TunedParams tune_thresholds(const DocumentSet& adapt_dev,
                            const EmbeddingProvider& provider,
                            const MdWeights& weights,
                            const MentionPooler& pooler,
                            const LinkConfig& link_config,
                            const DenseIndex& entity_index,
                            const DiscoveryParams& base_params,
                            const TuneGrids& grids, const SplitSet& splits) {
  bool any_gold = false;
  for (const Document& doc : adapt_dev.docs) {
    if (!doc.gold_mentions.empty()) {
      any_gold = true;
      break;
    }
  }
  if (!any_gold) {
    raise(Err::NoGoldLabels, "tuning requires gold labels on adapt_dev");
  }
  if (grids.s_m.empty() || grids.delta.empty() || grids.tau.empty()) {
    raise(Err::InvalidArgument, "tuning grids must be nonempty");
  }

  TunedParams tuned;
  tuned.params = base_params;

  const auto entity_recall = [&](const LinkConfig& cfg,
                                 const DiscoveryParams& params) {
    const DiscoveryResult r = discover(adapt_dev, provider, weights, pooler,
                                       cfg, entity_index, params, &splits);
    return r.report.gold ? r.report.gold->entity_recall_unknown : 0.0;
  };

  // s_m for unknown discovery recall.
  double best_obj = -1.0;
  for (double s_m : grids.s_m) {
    LinkConfig cfg = link_config;
    cfg.s_m = s_m;
    const double obj = entity_recall(cfg, tuned.params);
    if (obj > best_obj) {
      best_obj = obj;
      tuned.s_m = s_m;
    }
  }

  // delta for clustering NMI, with s_m frozen.
  LinkConfig cfg = link_config;
  cfg.s_m = tuned.s_m;
  best_obj = -1.0;
  for (double delta : grids.delta) {
    DiscoveryParams params = tuned.params;
    params.delta = delta;
    const DiscoveryResult r = discover(adapt_dev, provider, weights, pooler,
                                       cfg, entity_index, params, &splits);
    const double obj = r.report.gold ? r.report.gold->nmi : 0.0;
    if (obj > best_obj) {
      best_obj = obj;
      tuned.params.delta = delta;
    }
  }

  // tau for unknown discovery recall, with s_m and delta frozen.
  best_obj = -1.0;
  for (double tau : grids.tau) {
    DiscoveryParams params = tuned.params;
    params.tau = tau;
    const double obj = entity_recall(cfg, params);
    if (obj > best_obj) {
      best_obj = obj;
      tuned.params.tau = tau;
    }
  }
  return tuned;
}

std::string serialize_clusters(const std::vector<Cluster>& clusters,
                               const MentionPool& pool) {
  std::string out;
  for (const Cluster& c : clusters) {
    ordered_json j;
    j["cluster_id"] = c.id;
    j["status"] = c.status == ClusterStatus::known ? "known" : "unknown";
    if (c.assigned_entity) {
      j["entity_id"] = *c.assigned_entity;
    } else {
      j["entity_id"] = nullptr;
    }
    ordered_json members = ordered_json::array();
    for (int mid : c.member_ids) {
      const PooledMention& m = pool.mentions[static_cast<std::size_t>(mid)];
      ordered_json mj;
      mj["doc"] = m.doc_id;
      mj["start"] = m.span.start;
      mj["end"] = m.span.end;
      mj["surface"] = m.surface;
      members.push_back(std::move(mj));
    }
    j["members"] = std::move(members);
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace edin
