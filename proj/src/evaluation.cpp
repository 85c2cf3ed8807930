#include "edin/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "edin/error.hpp"

namespace edin {

using ordered_json = nlohmann::ordered_json;

GoldAssociation associate_clusters(
    const std::map<std::string, std::vector<std::string>>& synthetic_members) {
  GoldAssociation assoc;
  for (const auto& [synthetic_id, labels] : synthetic_members) {
    if (labels.empty()) {
      raise(Err::MissingGoldLabel,
            "no gold labels for synthetic id '" + synthetic_id + "'");
    }
    std::map<std::string, std::size_t> counts;
    for (const std::string& label : labels) ++counts[label];
    // Majority label; map order resolves ties to the smallest label.
    std::string majority;
    std::size_t best = 0;
    for (const auto& [label, count] : counts) {
      if (count > best) {
        majority = label;
        best = count;
      }
    }
    assoc.synthetic_to_gold.emplace(synthetic_id, majority);
    assoc.gold_to_synthetic[majority].insert(synthetic_id);
  }
  return assoc;
}

std::optional<EvalSubset> parse_subset(const std::string& name) {
  if (name == "all") return EvalSubset::all;
  if (name == "known") return EvalSubset::known;
  if (name == "unknown") return EvalSubset::unknown;
  if (name == "unknown_filtered") return EvalSubset::unknown_filtered;
  if (name == "unknown_discovered") return EvalSubset::unknown_discovered;
  return std::nullopt;
}

const char* to_string(EvalSubset subset) {
  switch (subset) {
    case EvalSubset::all: return "all";
    case EvalSubset::known: return "known";
    case EvalSubset::unknown: return "unknown";
    case EvalSubset::unknown_filtered: return "unknown_filtered";
    case EvalSubset::unknown_discovered: return "unknown_discovered";
  }
  return "all";
}

namespace {

bool entity_in_subset(const std::string& entity_id, EvalSubset subset,
                      const SubsetContext& ctx) {
  switch (subset) {
    case EvalSubset::all:
      return true;
    case EvalSubset::known:
      return ctx.known_entities.count(entity_id) > 0;
    case EvalSubset::unknown:
      return ctx.unknown_entities.count(entity_id) > 0;
    case EvalSubset::unknown_filtered:
      return ctx.unknown_entities.count(entity_id) > 0 &&
             ctx.adapt_entities.count(entity_id) > 0;
    case EvalSubset::unknown_discovered:
      return ctx.unknown_entities.count(entity_id) > 0 &&
             ctx.discovered_entities.count(entity_id) > 0;
  }
  return false;
}

// Synthetic ids evaluate as the gold entity they are associated with;
// unassociated synthetic ids class as unknown.
bool prediction_in_subset(const std::string& predicted_id,
                          const GoldAssociation& assoc, EvalSubset subset,
                          const SubsetContext& ctx) {
  auto it = assoc.synthetic_to_gold.find(predicted_id);
  if (it != assoc.synthetic_to_gold.end()) {
    return entity_in_subset(it->second, subset, ctx);
  }
  if (ctx.known_entities.count(predicted_id) ||
      ctx.unknown_entities.count(predicted_id)) {
    return entity_in_subset(predicted_id, subset, ctx);
  }
  // Out-of-catalog prediction (undiscovered draft): unknown-class.
  return subset == EvalSubset::all || subset == EvalSubset::unknown;
}

}  // namespace

ElMetrics el_metrics(const std::vector<LinkPrediction>& predictions,
                     const DocumentSet& gold_docs, const GoldAssociation& assoc,
                     EvalSubset subset, const SubsetContext& ctx) {
  std::map<std::pair<std::string, Span>, std::string> pred_by_span;
  for (const LinkPrediction& p : predictions) {
    pred_by_span.emplace(std::make_pair(p.doc_id, p.span), p.entity_id);
  }

  ElMetrics m;
  for (const Document& doc : gold_docs.docs) {
    for (const GoldMention& gm : doc.gold_mentions) {
      if (!entity_in_subset(gm.entity_id, subset, ctx)) continue;
      ++m.gold_support;
      auto it = pred_by_span.find({doc.id, gm.span});
      if (it != pred_by_span.end() && assoc.matches(it->second, gm.entity_id)) {
        ++m.correct;
      }
    }
  }
  for (const LinkPrediction& p : predictions) {
    if (prediction_in_subset(p.entity_id, assoc, subset, ctx)) ++m.predictions;
  }
  m.r_at_1 = m.gold_support == 0
                 ? 0.0
                 : static_cast<double>(m.correct) /
                       static_cast<double>(m.gold_support);
  m.p_at_1 = m.predictions == 0
                 ? 0.0
                 : static_cast<double>(m.correct) /
                       static_cast<double>(m.predictions);
  return m;
}

double nmi(const std::map<std::string, std::string>& pred_partition,
           const std::map<std::string, std::string>& gold_partition) {
  if (pred_partition.size() != gold_partition.size()) {
    raise(Err::PartitionMismatch, "partitions cover different element sets");
  }
  for (const auto& [element, label] : pred_partition) {
    if (!gold_partition.count(element)) {
      raise(Err::PartitionMismatch,
            "element '" + element + "' missing from the gold partition");
    }
  }
  const double n = static_cast<double>(pred_partition.size());
  if (n == 0.0) return 1.0;

  std::map<std::string, std::size_t> u_sizes, v_sizes;
  std::map<std::pair<std::string, std::string>, std::size_t> joint;
  for (const auto& [element, u_label] : pred_partition) {
    const std::string& v_label = gold_partition.at(element);
    ++u_sizes[u_label];
    ++v_sizes[v_label];
    ++joint[{u_label, v_label}];
  }

  const auto entropy = [&](const std::map<std::string, std::size_t>& sizes) {
    double h = 0.0;
    for (const auto& [label, count] : sizes) {
      const double p = static_cast<double>(count) / n;
      h -= p * std::log(p);
    }
    return h;
  };
  const double hu = entropy(u_sizes);
  const double hv = entropy(v_sizes);
  if (hu == 0.0 && hv == 0.0) return 1.0;  // both partitions trivial
  if (hu == 0.0 || hv == 0.0) return 0.0;

  double mi = 0.0;
  for (const auto& [labels, count] : joint) {
    const double pij = static_cast<double>(count) / n;
    const double pi = static_cast<double>(u_sizes.at(labels.first)) / n;
    const double pj = static_cast<double>(v_sizes.at(labels.second)) / n;
    mi += pij * std::log(pij / (pi * pj));
  }
  return mi / (0.5 * (hu + hv));
}

std::vector<FrequencyBin> frequency_binned(
    const std::vector<LinkPrediction>& predictions,
    const DocumentSet& gold_docs, const GoldAssociation& assoc,
    const FrequencyTable& freq, const std::vector<std::size_t>& bin_edges) {
  if (bin_edges.empty()) {
    raise(Err::InvalidArgument, "bin_edges must be nonempty");
  }
  for (std::size_t i = 1; i < bin_edges.size(); ++i) {
    if (bin_edges[i] <= bin_edges[i - 1]) {
      raise(Err::InvalidArgument, "bin_edges must be strictly increasing");
    }
  }

  std::vector<FrequencyBin> bins(bin_edges.size());
  for (std::size_t i = 0; i < bin_edges.size(); ++i) {
    bins[i].lo = bin_edges[i];
    if (i + 1 < bin_edges.size()) bins[i].hi = bin_edges[i + 1];
  }

  std::map<std::pair<std::string, Span>, std::string> pred_by_span;
  for (const LinkPrediction& p : predictions) {
    pred_by_span.emplace(std::make_pair(p.doc_id, p.span), p.entity_id);
  }

  for (const Document& doc : gold_docs.docs) {
    for (const GoldMention& gm : doc.gold_mentions) {
      const std::size_t count = frequency_of(freq, gm.entity_id);
      if (count < bins.front().lo) continue;  // below the first edge
      std::size_t b = bins.size() - 1;
      while (b > 0 && count < bins[b].lo) --b;
      ++bins[b].support;
      auto it = pred_by_span.find({doc.id, gm.span});
      if (it != pred_by_span.end() && assoc.matches(it->second, gm.entity_id)) {
        ++bins[b].correct;
      }
    }
  }
  for (FrequencyBin& bin : bins) {
    bin.r_at_1 = bin.support == 0 ? 0.0
                                  : static_cast<double>(bin.correct) /
                                        static_cast<double>(bin.support);
  }
  return bins;
}

double sample_skewness(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 3) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  if (m2 == 0.0) return 0.0;
  const double g1 = m3 / std::pow(m2, 1.5);
  const double nd = static_cast<double>(n);
  return g1 * std::sqrt(nd * (nd - 1.0)) / (nd - 2.0);
}

CorpusStats corpus_stats(const DocumentSet& test,
                         const std::set<std::string>& known_entities,
                         const std::set<std::string>& unknown_entities) {
  std::map<std::string, std::size_t> counts;
  for (const Document& doc : test.docs) {
    for (const GoldMention& gm : doc.gold_mentions) {
      ++counts[gm.entity_id];
    }
  }

  const auto collect = [&](const std::set<std::string>& ids) {
    ClassStats stats;
    std::vector<double> values;
    values.reserve(ids.size());
    for (const std::string& id : ids) {
      auto it = counts.find(id);
      const std::size_t c = it == counts.end() ? 0 : it->second;
      values.push_back(static_cast<double>(c));
      stats.mentions += c;
      stats.max = std::max(stats.max, c);
      if (c == 0) ++stats.zero_mention_entities;
      if (c > 10) ++stats.over_10;
    }
    stats.entities = ids.size();
    if (!ids.empty()) {
      stats.mean = static_cast<double>(stats.mentions) /
                   static_cast<double>(ids.size());
    }
    stats.skewness = sample_skewness(values);
    return stats;
  };

  CorpusStats out;
  out.known = collect(known_entities);
  out.unknown = collect(unknown_entities);
  return out;
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // Continued fraction (Lentz), switched at the symmetry point for
  // convergence.
  const double ln_front = a * std::log(x) + b * std::log(1.0 - x) -
                          std::log(a) -
                          (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  const auto contfrac = [](double aa, double bb, double xx) {
    const double tiny = 1e-300;
    double c = 1.0;
    double d = 1.0 - (aa + bb) * xx / (aa + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
      const double md = static_cast<double>(m);
      double num = md * (bb - md) * xx / ((aa + 2.0 * md - 1.0) * (aa + 2.0 * md));
      d = 1.0 + num * d;
      if (std::fabs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::fabs(c) < tiny) c = tiny;
      d = 1.0 / d;
      h *= d * c;
      num = -(aa + md) * (aa + bb + md) * xx /
            ((aa + 2.0 * md) * (aa + 2.0 * md + 1.0));
      d = 1.0 + num * d;
      if (std::fabs(d) < tiny) d = tiny;
      c = 1.0 + num / c;
      if (std::fabs(c) < tiny) c = tiny;
      d = 1.0 / d;
      const double delta = d * c;
      h *= delta;
      if (std::fabs(delta - 1.0) < 1e-14) break;
    }
    return h;
  };
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(ln_front) * contfrac(a, b, x);
  }
  const double ln_front_sym =
      b * std::log(1.0 - x) + a * std::log(x) - std::log(b) -
      (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  return 1.0 - std::exp(ln_front_sym) * contfrac(b, a, 1.0 - x);
}

WelchResult welch_t_test(const std::vector<double>& a,
                         const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) {
    raise(Err::DegenerateGroups, "both groups need at least two samples");
  }
  const auto moments = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size() - 1);
    return std::make_pair(mean, var);
  };
  const auto [mean_a, var_a] = moments(a);
  const auto [mean_b, var_b] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double se2 = var_a / na + var_b / nb;

  WelchResult result;
  if (se2 == 0.0) {
    result.t = mean_a == mean_b ? 0.0
               : (mean_a > mean_b ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity());
    result.df = na + nb - 2.0;
    result.p_value = mean_a == mean_b ? 1.0 : 0.0;
    return result;
  }
  result.t = (mean_a - mean_b) / std::sqrt(se2);
  result.df = se2 * se2 /
              (var_a * var_a / (na * na * (na - 1.0)) +
               var_b * var_b / (nb * nb * (nb - 1.0)));
  // Two-sided tail of Student's t via the incomplete beta.
  const double x = result.df / (result.df + result.t * result.t);
  result.p_value = result.t == 0.0
                       ? 1.0
                       : incomplete_beta(result.df / 2.0, 0.5, x);
  return result;
}

ConfusabilityReport confusability_report(
    const std::vector<LinkedMention>& linked_mentions,
    const DenseIndex& merged_index, const std::set<std::string>& known_ids,
    std::size_t proximity_k) {
  if (linked_mentions.empty()) {
    raise(Err::DegenerateGroups, "no linked mentions supplied");
  }

  // Entities whose neighborhood contains an unknown draft.
  std::set<std::string> confusable;
  std::set<std::string> mentioned;
  for (const LinkedMention& lm : linked_mentions) mentioned.insert(lm.entity_id);
  for (const std::string& id : mentioned) {
    if (!known_ids.count(id) || !merged_index.contains(id)) continue;
    const auto neighbors =
        merged_index.knn(merged_index.vector_of(id), proximity_k + 1);
    std::size_t seen = 0;
    for (const Neighbor& nb : neighbors) {
      if (nb.entity_id == id) continue;
      if (++seen > proximity_k) break;
      if (!known_ids.count(nb.entity_id)) {
        confusable.insert(id);
        break;
      }
    }
  }

  ConfusabilityReport report;
  std::vector<double> sims_confusable, sims_other;
  for (const LinkedMention& lm : linked_mentions) {
    if (!known_ids.count(lm.entity_id) || !merged_index.contains(lm.entity_id)) {
      continue;
    }
    const VecF evec = merged_index.vector_of(lm.entity_id);
    const double sim = similarity(merged_index.metric(), lm.vector, evec);
    if (confusable.count(lm.entity_id)) {
      sims_confusable.push_back(sim);
    } else {
      sims_other.push_back(sim);
    }
  }
  if (sims_confusable.size() < 2 || sims_other.size() < 2) {
    raise(Err::DegenerateGroups,
          "confusable/other groups too small for a t-test");
  }
  const auto mean = [](const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    return m / static_cast<double>(xs.size());
  };
  report.mean_sim_confusable = mean(sims_confusable);
  report.mean_sim_other = mean(sims_other);
  report.confusable_entities = confusable.size();
  std::set<std::string> other_seen;
  for (const LinkedMention& lm : linked_mentions) {
    if (known_ids.count(lm.entity_id) && !confusable.count(lm.entity_id)) {
      other_seen.insert(lm.entity_id);
    }
  }
  report.other_entities = other_seen.size();
  report.test = welch_t_test(sims_confusable, sims_other);
  return report;
}

namespace {

ordered_json metrics_to_json(const ElMetrics& m) {
  ordered_json j;
  j["r_at_1"] = m.r_at_1;
  j["p_at_1"] = m.p_at_1;
  j["gold_support"] = m.gold_support;
  j["predictions"] = m.predictions;
  j["correct"] = m.correct;
  return j;
}

ordered_json class_stats_to_json(const ClassStats& s) {
  ordered_json j;
  j["entities"] = s.entities;
  j["mentions"] = s.mentions;
  j["mean"] = s.mean;
  j["max"] = s.max;
  j["zero_mention_entities"] = s.zero_mention_entities;
  j["over_10"] = s.over_10;
  j["skewness"] = s.skewness;
  return j;
}

}  // namespace

EvalReport evaluate_predictions(const std::vector<LinkPrediction>& predictions,
                                const DocumentSet& gold_docs,
                                const GoldAssociation& assoc,
                                const SubsetContext& ctx,
                                const FrequencyTable& train_freq) {
  EvalReport report;
  report.all = el_metrics(predictions, gold_docs, assoc, EvalSubset::all, ctx);
  report.known =
      el_metrics(predictions, gold_docs, assoc, EvalSubset::known, ctx);
  report.unknown =
      el_metrics(predictions, gold_docs, assoc, EvalSubset::unknown, ctx);
  report.unknown_filtered = el_metrics(predictions, gold_docs, assoc,
                                       EvalSubset::unknown_filtered, ctx);
  report.unknown_discovered = el_metrics(predictions, gold_docs, assoc,
                                         EvalSubset::unknown_discovered, ctx);

  // Clustering view of the linking output: gold mentions that received a
  // prediction, grouped by predicted id vs gold label.
  const auto nmi_for = [&](EvalSubset subset) {
    std::map<std::pair<std::string, Span>, std::string> pred_by_span;
    for (const LinkPrediction& p : predictions) {
      pred_by_span.emplace(std::make_pair(p.doc_id, p.span), p.entity_id);
    }
    std::map<std::string, std::string> pred_part, gold_part;
    for (const Document& doc : gold_docs.docs) {
      for (const GoldMention& gm : doc.gold_mentions) {
        if (!entity_in_subset(gm.entity_id, subset, ctx)) continue;
        auto it = pred_by_span.find({doc.id, gm.span});
        if (it == pred_by_span.end()) continue;
        const std::string key = doc.id + "\x1f" + std::to_string(gm.span.start) +
                                "\x1f" + std::to_string(gm.span.end);
        pred_part[key] = it->second;
        gold_part[key] = gm.entity_id;
      }
    }
    return pred_part.empty() ? 0.0 : nmi(pred_part, gold_part);
  };
  report.nmi_all = nmi_for(EvalSubset::all);
  report.nmi_known = nmi_for(EvalSubset::known);
  report.nmi_unknown = nmi_for(EvalSubset::unknown);

  report.bins = frequency_binned(predictions, gold_docs, assoc, train_freq);
  report.stats =
      corpus_stats(gold_docs, ctx.known_entities, ctx.unknown_entities);
  return report;
}

std::string report_to_json(const EvalReport& report) {
  ordered_json j;
  j["all"] = metrics_to_json(report.all);
  j["known"] = metrics_to_json(report.known);
  j["unknown"] = metrics_to_json(report.unknown);
  j["unknown_filtered"] = metrics_to_json(report.unknown_filtered);
  j["unknown_discovered"] = metrics_to_json(report.unknown_discovered);
  j["nmi"] = {{"all", report.nmi_all},
              {"known", report.nmi_known},
              {"unknown", report.nmi_unknown}};
  ordered_json bins = ordered_json::array();
  for (const FrequencyBin& bin : report.bins) {
    ordered_json bj;
    bj["lo"] = bin.lo;
    if (bin.hi) {
      bj["hi"] = *bin.hi;
    } else {
      bj["hi"] = nullptr;
    }
    bj["support"] = bin.support;
    bj["correct"] = bin.correct;
    bj["r_at_1"] = bin.r_at_1;
    bins.push_back(std::move(bj));
  }
  j["frequency_bins"] = std::move(bins);
  j["corpus_stats"] = {{"known", class_stats_to_json(report.stats.known)},
                       {"unknown", class_stats_to_json(report.stats.unknown)}};
  return j.dump(2) + "\n";
}

std::string bins_to_tsv(const std::vector<FrequencyBin>& bins) {
  std::ostringstream out;
  out << "lo\thi\tsupport\tcorrect\tr_at_1\n";
  for (const FrequencyBin& bin : bins) {
    out << bin.lo << '\t';
    if (bin.hi) {
      out << *bin.hi;
    } else {
      out << "inf";
    }
    out << '\t' << bin.support << '\t' << bin.correct << '\t' << bin.r_at_1
        << '\n';
  }
  return out.str();
}

}  // namespace edin
