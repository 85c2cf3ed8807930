#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "edin/types.hpp"

namespace edin {

// Whitespace-plus-punctuation tokenization: a token is either a maximal
// run of non-space, non-punctuation code points or a single ASCII
// punctuation character. Offsets are Unicode scalar value indices.
struct Token {
  std::string text;
  Span span;
};
std::vector<Token> tokenize(const std::string& text);

// One vector per token, column-major (dim x n_tokens), plus the
// token-to-character offset map.
struct TokenVectors {
  MatF vectors;
  std::vector<Span> offsets;

  Eigen::Index count() const { return vectors.cols(); }
  Eigen::Index dim() const { return vectors.rows(); }
};

// Maps entity texts and mentions-in-context to fixed-dimension dense
// vectors. Implementations are immutable after construction and pure:
// the same textual input always yields the same vector.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  Eigen::Index dim() const { return dim_; }
  const std::string& kind() const { return kind_; }

  virtual VecF encode_text(const std::string& text) const = 0;

  // Mention-in-context encoding: surface and context mixed 0.7/0.3 and
  // re-normalized. File-backed providers override this with a single
  // lookup of the composed key "<surface> [SEP] <context>".
  virtual VecF encode_pair(const std::string& surface,
                           const std::string& context) const;

 protected:
  EmbeddingProvider(Eigen::Index dim, std::string kind)
      : dim_(dim), kind_(std::move(kind)) {}

 private:
  Eigen::Index dim_;
  std::string kind_;
};

// "<title> [SEP] <description>"; also the lookup key of file-backed stores.
std::string compose_entity_text(const std::string& title,
                                const std::string& description);

VecF encode_entity(const EmbeddingProvider& provider, const std::string& title,
                   const std::string& description);
VecF encode_mention_context(const EmbeddingProvider& provider,
                            const std::string& context, Span span);
TokenVectors token_vectors(const EmbeddingProvider& provider,
                           const std::string& text);

// Character 3-gram hashing into dim buckets with signed hashing (FNV-1a;
// low bits select the bucket, the top bit selects the sign), L2-normalized.
// Grams are taken over the UTF-8 bytes with 0x02/0x03 sentinels so inputs
// shorter than three bytes still produce grams.
class HashFeaturizer final : public EmbeddingProvider {
 public:
  explicit HashFeaturizer(Eigen::Index dim);
  VecF encode_text(const std::string& text) const override;
};

// Lookup table read from an embedding file; missing keys raise LookupMiss.
class FileBackedProvider final : public EmbeddingProvider {
 public:
  explicit FileBackedProvider(const std::string& path);
  FileBackedProvider(Eigen::Index dim, std::map<std::string, VecF> table);

  VecF encode_text(const std::string& text) const override;
  VecF encode_pair(const std::string& surface,
                   const std::string& context) const override;

  bool contains(const std::string& key) const {
    return table_.count(key) != 0;
  }

 private:
  explicit FileBackedProvider(
      std::pair<Eigen::Index, std::map<std::string, VecF>> loaded);

  std::map<std::string, VecF> table_;
};

// HTTP POST {base_url}/encode with {"texts": [...]}; expects
// {"vectors": [[...]]}. Each call is independent and idempotent.
class RemoteProvider final : public EmbeddingProvider {
 public:
  RemoteProvider(Eigen::Index dim, std::string base_url, int timeout_ms);
  VecF encode_text(const std::string& text) const override;
  std::vector<VecF> encode_batch(const std::vector<std::string>& texts) const;

 private:
  std::string base_url_;
  int timeout_ms_;
};

struct ProviderConfig {
  std::string kind = "hash";  // hash | file | remote
  Eigen::Index dim = 64;
  std::string embeddings_path;  // file kind
  std::string base_url;         // remote kind
  int timeout_ms = 5000;        // remote kind
};

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config);

}  // namespace edin
