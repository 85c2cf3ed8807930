#include "edin/embedding.hpp"

#include <nlohmann/json.hpp>

#include "edin/error.hpp"
#include "edin/io.hpp"
#include "edin/utf8.hpp"

// httplib pulls in <regex> and sockets; keep it out of the header.
#include <httplib.h>

namespace edin {

namespace {

bool is_ascii_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' ||
         c == U'\v';
}

bool is_ascii_punct(char32_t c) {
  return c < 0x80 && std::ispunct(static_cast<int>(c));
}

std::uint64_t fnv1a64(const char* data, std::size_t len) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> tokens;
  std::int64_t cp_index = 0;
  std::size_t byte = 0;
  std::string current;
  std::int64_t current_start = 0;

  const auto flush = [&](std::int64_t end_cp) {
    if (!current.empty()) {
      tokens.push_back({current, {current_start, end_cp}});
      current.clear();
    }
  };

  while (byte < text.size()) {
    const std::size_t len =
        utf8::sequence_length(static_cast<unsigned char>(text[byte]));
    const char32_t cp = utf8::codepoint_at_byte(text, byte);
    if (is_ascii_space(cp)) {
      flush(cp_index);
    } else if (is_ascii_punct(cp)) {
      flush(cp_index);
      tokens.push_back(
          {text.substr(byte, len), {cp_index, cp_index + 1}});
    } else {
      if (current.empty()) current_start = cp_index;
      current.append(text, byte, len);
    }
    byte += len;
    ++cp_index;
  }
  flush(cp_index);
  return tokens;
}

VecF EmbeddingProvider::encode_pair(const std::string& surface,
                                    const std::string& context) const {
  const VecF s = encode_text(surface);
  const VecF c = encode_text(context);
  Eigen::VectorXd mixed =
      0.7 * s.cast<double>() + 0.3 * c.cast<double>();
  const double n = mixed.norm();
  if (n > 0.0) mixed /= n;
  return mixed.cast<float>();
}

std::string compose_entity_text(const std::string& title,
                                const std::string& description) {
  return title + " [SEP] " + description;
}

VecF encode_entity(const EmbeddingProvider& provider, const std::string& title,
                   const std::string& description) {
  if (title.empty()) {
    raise(Err::InvalidArgument, "encode_entity requires a nonempty title");
  }
  return provider.encode_text(compose_entity_text(title, description));
}

VecF encode_mention_context(const EmbeddingProvider& provider,
                            const std::string& context, Span span) {
  const std::int64_t len = utf8::count_codepoints(context);
  if (span.start < 0 || span.start >= span.end || span.end > len) {
    raise(Err::SpanOutOfBounds,
          "mention span [" + std::to_string(span.start) + "," +
              std::to_string(span.end) + ") outside context of length " +
              std::to_string(len));
  }
  const std::string surface = utf8::substr(context, span.start, span.end);
  return provider.encode_pair(surface, context);
}

TokenVectors token_vectors(const EmbeddingProvider& provider,
                           const std::string& text) {
  if (text.empty()) {
    raise(Err::InvalidArgument, "token_vectors requires nonempty text");
  }
  const std::vector<Token> tokens = tokenize(text);
  TokenVectors out;
  out.vectors.resize(provider.dim(), static_cast<Eigen::Index>(tokens.size()));
  out.offsets.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.vectors.col(static_cast<Eigen::Index>(i)) =
        provider.encode_text(tokens[i].text);
    out.offsets.push_back(tokens[i].span);
  }
  return out;
}

HashFeaturizer::HashFeaturizer(Eigen::Index dim)
    : EmbeddingProvider(dim, "hash_featurizer") {
  if (dim <= 0) raise(Err::InvalidArgument, "featurizer dim must be positive");
}

VecF HashFeaturizer::encode_text(const std::string& text) const {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim());
  if (!text.empty()) {
    std::string padded;
    padded.reserve(text.size() + 2);
    padded.push_back('\x02');
    padded.append(text);
    padded.push_back('\x03');
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      const std::uint64_t h = fnv1a64(padded.data() + i, 3);
      const auto bucket =
          static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim()));
      acc[bucket] += (h >> 63) ? 1.0 : -1.0;
    }
    const double n = acc.norm();
    if (n > 0.0) acc /= n;
  }
  return acc.cast<float>();
}

namespace {

std::pair<Eigen::Index, std::map<std::string, VecF>> load_embedding_table(
    const std::string& path) {
  const io::EmbeddingFile file = io::read_embedding_file(path);
  std::map<std::string, VecF> table;
  for (const auto& [key, vec] : file.records) {
    table.emplace(key, vec);
  }
  return {static_cast<Eigen::Index>(file.dim), std::move(table)};
}

}  // namespace

FileBackedProvider::FileBackedProvider(const std::string& path)
    : FileBackedProvider(load_embedding_table(path)) {}

FileBackedProvider::FileBackedProvider(
    std::pair<Eigen::Index, std::map<std::string, VecF>> loaded)
    : FileBackedProvider(loaded.first, std::move(loaded.second)) {}

FileBackedProvider::FileBackedProvider(Eigen::Index dim,
                                       std::map<std::string, VecF> table)
    : EmbeddingProvider(dim, "file_backed"), table_(std::move(table)) {}

VecF FileBackedProvider::encode_text(const std::string& text) const {
  auto it = table_.find(text);
  if (it == table_.end()) {
    raise(Err::LookupMiss, "no embedding stored for key '" + text + "'");
  }
  return it->second;
}

VecF FileBackedProvider::encode_pair(const std::string& surface,
                                     const std::string& context) const {
  return encode_text(compose_entity_text(surface, context));
}

RemoteProvider::RemoteProvider(Eigen::Index dim, std::string base_url,
                               int timeout_ms)
    : EmbeddingProvider(dim, "remote"),
      base_url_(std::move(base_url)),
      timeout_ms_(timeout_ms) {}

VecF RemoteProvider::encode_text(const std::string& text) const {
  return encode_batch({text}).front();
}

std::vector<VecF> RemoteProvider::encode_batch(
    const std::vector<std::string>& texts) const {
  httplib::Client client(base_url_);
  client.set_connection_timeout(0, timeout_ms_ * 1000);
  client.set_read_timeout(0, timeout_ms_ * 1000);

  nlohmann::json body;
  body["texts"] = texts;
  auto res = client.Post("/encode", body.dump(), "application/json");
  if (!res || res->status != 200) {
    raise(Err::RemoteUnavailable, "encode endpoint unavailable at " +
                                      base_url_ +
                                      (res ? " (status " +
                                                 std::to_string(res->status) +
                                                 ")"
                                           : ""));
  }
  nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("vectors")) {
    raise(Err::RemoteUnavailable, "malformed reply from " + base_url_);
  }
  std::vector<VecF> out;
  for (const auto& jv : reply["vectors"]) {
    VecF v(dim());
    if (static_cast<Eigen::Index>(jv.size()) != dim()) {
      raise(Err::DimensionMismatch,
            "remote returned dim " + std::to_string(jv.size()) +
                ", expected " + std::to_string(dim()));
    }
    for (Eigen::Index i = 0; i < dim(); ++i) {
      v[i] = jv[static_cast<std::size_t>(i)].get<float>();
    }
    out.push_back(std::move(v));
  }
  if (out.size() != texts.size()) {
    raise(Err::RemoteUnavailable, "remote returned wrong vector count");
  }
  return out;
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
  if (config.kind == "hash") {
    return std::make_unique<HashFeaturizer>(config.dim);
  }
  if (config.kind == "file") {
    return std::make_unique<FileBackedProvider>(config.embeddings_path);
  }
  if (config.kind == "remote") {
    return std::make_unique<RemoteProvider>(config.dim, config.base_url,
                                            config.timeout_ms);
  }
  raise(Err::InvalidArgument, "unknown provider kind '" + config.kind + "'");
}

}  // namespace edin
