#pragma once

#include <optional>
#include <string>
#include <vector>

#include "edin/ann_index.hpp"
#include "edin/corpus.hpp"
#include "edin/embedding.hpp"
#include "edin/types.hpp"

namespace edin {

struct MdWeights {
  VecF w_start;
  VecF w_end;
  VecF w_mention;

  // All-zero weights of the given dim: every span scores sigmoid(0) = 0.5.
  static MdWeights zeros(Eigen::Index dim) {
    return {VecF::Zero(dim), VecF::Zero(dim), VecF::Zero(dim)};
  }
};

struct SpanCandidate {
  int first_token = 0;
  int last_token = 0;  // inclusive
  double md_prob = 0.0;
};

// Mean pooling over span tokens followed by an optional linear projection
// (token dim -> entity dim). Empty projection means identity, empty bias
// means zero.
struct MentionPooler {
  MatF projection;
  VecF bias;

  bool is_identity() const { return projection.size() == 0; }
};

// Two-layer feed-forward scorer over the pair features, sigmoid output.
// Hidden activation is ReLU; hidden width comes from the weights file.
// An empty head is the untrained default and scores every pair 0.5.
struct RejectionHead {
  MatF l1;       // hidden x (2 + 4d)
  VecF l1_bias;  // hidden
  VecF l2;       // hidden
  double l2_bias = 0.0;
  double gamma = 0.4;

  bool is_default() const { return l1.size() == 0; }
};

struct LinkPrediction {
  std::string doc_id;
  Span span;  // character offsets
  std::string entity_id;
  double md_prob = 0.0;
  double ed_prob = 0.0;
  double final_score = 0.0;
};

struct LinkConfig {
  int max_span_len = 10;
  int top_k = 16;       // span candidates kept per document
  double s_m = 0.5;     // mention score threshold
  double gamma = 0.4;   // rejection threshold
  int knn_k = 16;       // retrieved entities per mention
};

// Enumerates spans up to max_span_len tokens and scores
//   p([i,j]) = sigmoid(s_start(i) + s_end(j) + sum_t s_mention(t)).
// Keeps spans with md_prob >= s_m, sorted by descending md_prob then by
// ascending (i, j); returns at most top_k.
std::vector<SpanCandidate> score_spans(const TokenVectors& tokens,
                                       const MdWeights& weights,
                                       int max_span_len, int top_k,
                                       double s_m);

VecF pool_mention(const TokenVectors& tokens, int first_token, int last_token,
                  const MentionPooler& pooler);

// Top-k retrieval by the index metric with a softmax over the retrieved
// scores (an explicit approximation of the full-catalog softmax).
std::vector<std::pair<std::string, double>> disambiguate(
    const VecF& mention, const DenseIndex& index, std::size_t k);

// [md_prob, ed_prob, mention, entity, mention - entity, mention . entity],
// total dim 2 + 4d.
VecF rejection_features(double md_prob, double ed_prob, const VecF& mention,
                        const VecF& entity);

double rejection_score(const VecF& features, const RejectionHead& head);

// Full per-document composition: MD -> pooling -> ED -> rejection gate,
// with overlapping accepted spans resolved greedily by descending final
// score. When gold_spans is given, MD is bypassed (oracle mention
// detection): each gold character span is mapped to the covering token
// range and scored with md_prob = 1.
std::vector<LinkPrediction> link_document(
    const Document& doc, const EmbeddingProvider& provider,
    const MdWeights& weights, const MentionPooler& pooler,
    const RejectionHead& head, const DenseIndex& index,
    const LinkConfig& config, const std::vector<Span>* gold_spans = nullptr);

// Learned parameters bundled from one weights file (see file format docs);
// any missing group falls back to its untrained default.
struct LinkerWeights {
  MdWeights md;
  MentionPooler pooler;
  RejectionHead head;
};

LinkerWeights load_linker_weights(const std::string& path, Eigen::Index token_dim);

std::string serialize_predictions(const std::vector<LinkPrediction>& preds);
std::vector<LinkPrediction> parse_predictions(const std::string& jsonl);

}  // namespace edin
