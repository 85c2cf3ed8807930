#include "edin/linker.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "edin/error.hpp"
#include "edin/io.hpp"
#include "edin/utf8.hpp"

namespace edin {

using ordered_json = nlohmann::ordered_json;

std::vector<SpanCandidate> score_spans(const TokenVectors& tokens,
                                       const MdWeights& weights,
                                       int max_span_len, int top_k,
                                       double s_m) {
  if (max_span_len < 1 || top_k < 1) {
    raise(Err::InvalidArgument, "score_spans needs max_span_len, top_k >= 1");
  }
  const int n = static_cast<int>(tokens.count());
  std::vector<double> s_start(n), s_end(n), inside_prefix(n + 1, 0.0);
  for (int t = 0; t < n; ++t) {
    const auto col = tokens.vectors.col(t);
    s_start[t] = dot64(weights.w_start, col);
    s_end[t] = dot64(weights.w_end, col);
    inside_prefix[t + 1] = inside_prefix[t] + dot64(weights.w_mention, col);
  }

  std::vector<SpanCandidate> spans;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n && j - i + 1 <= max_span_len; ++j) {
      const double inside = inside_prefix[j + 1] - inside_prefix[i];
      const double p = sigmoid(s_start[i] + s_end[j] + inside);
      if (p >= s_m) spans.push_back({i, j, p});
    }
  }
  std::sort(spans.begin(), spans.end(),
            [](const SpanCandidate& a, const SpanCandidate& b) {
              if (a.md_prob != b.md_prob) return a.md_prob > b.md_prob;
              if (a.first_token != b.first_token)
                return a.first_token < b.first_token;
              return a.last_token < b.last_token;
            });
  if (spans.size() > static_cast<std::size_t>(top_k)) {
    spans.resize(static_cast<std::size_t>(top_k));
  }
  return spans;
}

VecF pool_mention(const TokenVectors& tokens, int first_token, int last_token,
                  const MentionPooler& pooler) {
  if (first_token < 0 || last_token < first_token ||
      last_token >= tokens.count()) {
    raise(Err::SpanOutOfBounds, "token span [" + std::to_string(first_token) +
                                    "," + std::to_string(last_token) +
                                    "] outside token count " +
                                    std::to_string(tokens.count()));
  }
  // Mean in f64 for a span-order-independent result.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(tokens.dim());
  for (int t = first_token; t <= last_token; ++t) {
    mean += tokens.vectors.col(t).cast<double>();
  }
  mean /= static_cast<double>(last_token - first_token + 1);
  const VecF pooled = mean.cast<float>();

  if (pooler.is_identity()) {
    Eigen::VectorXd out = pooled.cast<double>();
    if (pooler.bias.size() != 0) out += pooler.bias.cast<double>();
    return out.cast<float>();
  }
  if (pooler.projection.cols() != tokens.dim()) {
    raise(Err::DimensionMismatch, "pooler projection expects token dim " +
                                      std::to_string(pooler.projection.cols()));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(pooler.projection.rows());
  for (Eigen::Index r = 0; r < pooler.projection.rows(); ++r) {
    out[r] = dot64(pooler.projection.row(r).transpose(), pooled);
  }
  if (pooler.bias.size() != 0) out += pooler.bias.cast<double>();
  return out.cast<float>();
}

std::vector<std::pair<std::string, double>> disambiguate(
    const VecF& mention, const DenseIndex& index, std::size_t k) {
  if (k == 0) raise(Err::InvalidArgument, "disambiguate requires k >= 1");
  if (index.size() == 0) raise(Err::EmptyIndex, "disambiguate on empty index");
  const std::vector<Neighbor> neighbors = index.knn(mention, k);

  double max_score = neighbors.front().score;
  for (const Neighbor& nb : neighbors) max_score = std::max(max_score, nb.score);
  double z = 0.0;
  std::vector<double> expd(neighbors.size());
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    expd[i] = std::exp(neighbors[i].score - max_score);
    z += expd[i];
  }
  std::vector<std::pair<std::string, double>> out;
  out.reserve(neighbors.size());
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    out.emplace_back(neighbors[i].entity_id, expd[i] / z);
  }
  return out;
}

VecF rejection_features(double md_prob, double ed_prob, const VecF& mention,
                        const VecF& entity) {
  if (mention.size() != entity.size()) {
    raise(Err::DimensionMismatch, "mention and entity dims differ");
  }
  const Eigen::Index d = mention.size();
  VecF f(2 + 4 * d);
  f[0] = static_cast<float>(md_prob);
  f[1] = static_cast<float>(ed_prob);
  f.segment(2, d) = mention;
  f.segment(2 + d, d) = entity;
  f.segment(2 + 2 * d, d) = mention - entity;
  f.segment(2 + 3 * d, d) = mention.cwiseProduct(entity);
  return f;
}

double rejection_score(const VecF& features, const RejectionHead& head) {
  if (head.is_default()) {
    return sigmoid(head.l2_bias);
  }
  if (head.l1.cols() != features.size()) {
    raise(Err::DimensionMismatch,
          "rejection head expects feature dim " + std::to_string(head.l1.cols()) +
              ", got " + std::to_string(features.size()));
  }
  double out = head.l2_bias;
  for (Eigen::Index h = 0; h < head.l1.rows(); ++h) {
    double z = head.l1_bias.size() ? head.l1_bias[h] : 0.0;
    z += dot64(head.l1.row(h).transpose(), features);
    const double activated = z > 0.0 ? z : 0.0;
    out += static_cast<double>(head.l2[h]) * activated;
  }
  return sigmoid(out);
}

namespace {

// Minimal token range covering a character span; nullopt when no token
// intersects it.
std::optional<std::pair<int, int>> token_range_for(
    const std::vector<Span>& offsets, Span char_span) {
  int first = -1;
  int last = -1;
  for (std::size_t t = 0; t < offsets.size(); ++t) {
    if (offsets[t].end <= char_span.start) continue;
    if (offsets[t].start >= char_span.end) break;
    if (first < 0) first = static_cast<int>(t);
    last = static_cast<int>(t);
  }
  if (first < 0) return std::nullopt;
  return std::make_pair(first, last);
}

}  // namespace

std::vector<LinkPrediction> link_document(
    const Document& doc, const EmbeddingProvider& provider,
    const MdWeights& weights, const MentionPooler& pooler,
    const RejectionHead& head, const DenseIndex& index,
    const LinkConfig& config, const std::vector<Span>* gold_spans) {
  if (doc.text.empty()) return {};
  const TokenVectors tokens = token_vectors(provider, doc.text);
  if (tokens.count() == 0) return {};

  std::vector<SpanCandidate> candidates;
  if (gold_spans == nullptr) {
    candidates = score_spans(tokens, weights, config.max_span_len,
                             config.top_k, config.s_m);
  } else {
    for (const Span& gs : *gold_spans) {
      if (auto range = token_range_for(tokens.offsets, gs)) {
        candidates.push_back({range->first, range->second, 1.0});
      }
    }
  }

  struct Scored {
    LinkPrediction pred;
    int first_token;
    int last_token;
  };
  std::vector<Scored> accepted;
  for (const SpanCandidate& cand : candidates) {
    const VecF mention =
        pool_mention(tokens, cand.first_token, cand.last_token, pooler);
    const auto ranked = disambiguate(mention, index,
                                     static_cast<std::size_t>(config.knn_k));
    const auto& [entity_id, ed_prob] = ranked.front();
    const VecF entity = index.vector_of(entity_id);
    const VecF feats =
        rejection_features(cand.md_prob, ed_prob, mention, entity);
    const double score = rejection_score(feats, head);
    if (score > config.gamma) {
      LinkPrediction pred;
      pred.doc_id = doc.id;
      pred.span = {tokens.offsets[static_cast<std::size_t>(cand.first_token)].start,
                   tokens.offsets[static_cast<std::size_t>(cand.last_token)].end};
      pred.entity_id = entity_id;
      pred.md_prob = cand.md_prob;
      pred.ed_prob = ed_prob;
      pred.final_score = score;
      accepted.push_back({std::move(pred), cand.first_token, cand.last_token});
    }
  }

  // Greedy non-overlap by descending final score; deterministic tie order.
  std::sort(accepted.begin(), accepted.end(), [](const Scored& a, const Scored& b) {
    if (a.pred.final_score != b.pred.final_score)
      return a.pred.final_score > b.pred.final_score;
    if (a.pred.md_prob != b.pred.md_prob) return a.pred.md_prob > b.pred.md_prob;
    if (a.first_token != b.first_token) return a.first_token < b.first_token;
    if (a.last_token != b.last_token) return a.last_token < b.last_token;
    return a.pred.entity_id < b.pred.entity_id;
  });
  std::vector<Scored> kept;
  for (const Scored& s : accepted) {
    bool overlaps = false;
    for (const Scored& k : kept) {
      if (s.first_token <= k.last_token && k.first_token <= s.last_token) {
        overlaps = true;
        break;
      }
    }
    if (!overlaps) kept.push_back(s);
  }
  std::sort(kept.begin(), kept.end(), [](const Scored& a, const Scored& b) {
    return a.first_token < b.first_token;
  });

  std::vector<LinkPrediction> out;
  out.reserve(kept.size());
  for (Scored& s : kept) out.push_back(std::move(s.pred));
  return out;
}

LinkerWeights load_linker_weights(const std::string& path,
                                  Eigen::Index token_dim) {
  const io::EmbeddingFile file = io::read_embedding_file(path);
  std::map<std::string, VecF> keys;
  for (const auto& [key, vec] : file.records) keys.emplace(key, vec);

  const auto get = [&](const std::string& key) -> const VecF* {
    auto it = keys.find(key);
    return it == keys.end() ? nullptr : &it->second;
  };
  const auto rows_with_prefix = [&](const std::string& prefix) {
    std::vector<VecF> rows;
    for (int i = 0;; ++i) {
      const VecF* row = get(prefix + std::to_string(i));
      if (row == nullptr) break;
      rows.push_back(*row);
    }
    return rows;
  };

  LinkerWeights out;
  out.md = MdWeights::zeros(token_dim);
  if (const VecF* v = get("md.w_start")) out.md.w_start = *v;
  if (const VecF* v = get("md.w_end")) out.md.w_end = *v;
  if (const VecF* v = get("md.w_mention")) out.md.w_mention = *v;

  const std::vector<VecF> proj = rows_with_prefix("pool.proj.row");
  if (!proj.empty()) {
    out.pooler.projection.resize(static_cast<Eigen::Index>(proj.size()),
                                 proj.front().size());
    for (std::size_t i = 0; i < proj.size(); ++i) {
      out.pooler.projection.row(static_cast<Eigen::Index>(i)) =
          proj[i].transpose();
    }
  }
  if (const VecF* v = get("pool.bias")) out.pooler.bias = *v;

  const std::vector<VecF> l1 = rows_with_prefix("rej.l1.row");
  if (!l1.empty()) {
    out.head.l1.resize(static_cast<Eigen::Index>(l1.size()), l1.front().size());
    for (std::size_t i = 0; i < l1.size(); ++i) {
      out.head.l1.row(static_cast<Eigen::Index>(i)) = l1[i].transpose();
    }
    if (const VecF* v = get("rej.l1.bias")) out.head.l1_bias = *v;
    const VecF* l2 = get("rej.l2.row0");
    if (l2 == nullptr || l2->size() != out.head.l1.rows()) {
      raise(Err::DimensionMismatch,
            "rej.l2.row0 missing or inconsistent with rej.l1 in " + path);
    }
    out.head.l2 = *l2;
    if (const VecF* v = get("rej.l2.bias")) out.head.l2_bias = (*v)[0];
  }
  return out;
}

std::string serialize_predictions(const std::vector<LinkPrediction>& preds) {
  std::string out;
  for (const LinkPrediction& p : preds) {
    ordered_json j;
    j["doc"] = p.doc_id;
    j["start"] = p.span.start;
    j["end"] = p.span.end;
    j["entity_id"] = p.entity_id;
    j["md"] = p.md_prob;
    j["ed"] = p.ed_prob;
    j["score"] = p.final_score;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<LinkPrediction> parse_predictions(const std::string& jsonl) {
  std::vector<LinkPrediction> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t next = jsonl.find('\n', pos);
    if (next == std::string::npos) next = jsonl.size();
    const std::string line = jsonl.substr(pos, next - pos);
    pos = next + 1;
    ++line_no;
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      raise(Err::MalformedRecord,
            "predictions line " + std::to_string(line_no) + " malformed");
    }
    LinkPrediction p;
    p.doc_id = j.at("doc").get<std::string>();
    p.span.start = j.at("start").get<std::int64_t>();
    p.span.end = j.at("end").get<std::int64_t>();
    p.entity_id = j.at("entity_id").get<std::string>();
    p.md_prob = j.value("md", 0.0);
    p.ed_prob = j.value("ed", 0.0);
    p.final_score = j.value("score", 0.0);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace edin
