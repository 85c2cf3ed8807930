#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <filesystem>
#include <set>

#include "edin/embedding.hpp"
#include "edin/error.hpp"
#include "edin/io.hpp"
#include "edin/pipeline.hpp"
#include "edin/rng.hpp"

namespace edin {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kTopicPool = 240;
constexpr std::size_t kGlobalPool = 60;
constexpr double kNameMargin = 6.0;
constexpr double kFillerMargin = -18.0;
// Mention-entity threshold matched to the generator's geometry: a mention
// of a known entity scores ~0.36 against its own entity text and near
// zero against every other entity.
constexpr double kSynthTau = 0.25;

std::string make_word(SplitMix64& rng, std::size_t syllables) {
  static constexpr char consonants[] = "bcdfghjklmnpqrstvwz";
  static constexpr char vowels[] = "aeiou";
  std::string word;
  for (std::size_t s = 0; s < syllables; ++s) {
    word.push_back(consonants[rng.next_below(sizeof(consonants) - 1)]);
    word.push_back(vowels[rng.next_below(sizeof(vowels) - 1)]);
  }
  return word;
}

std::string fresh_word(SplitMix64& rng, std::size_t syllables,
                       std::set<std::string>& used) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::string word = make_word(rng, syllables);
    if (used.insert(word).second) return word;
  }
  raise(Err::Internal, "word generator exhausted");
}

struct SynthEntity {
  std::string id;
  std::string name;
  std::vector<std::string> topic;  // description / context vocabulary
  bool known = true;
  std::int64_t added_at = 0;
};

struct SynthWorld {
  std::vector<SynthEntity> entities;
  std::vector<std::string> topic_pool;
  std::vector<std::string> global_pool;
  std::set<std::string> vocab;  // every token that may appear in a document
  std::set<std::string> mention_tokens;  // tokens scoring as mentions
};

SynthWorld build_world(const RunConfig& config) {
  const SynthParams& p = config.synth;
  if (p.known_entities == 0 || p.unknown_entities == 0) {
    // Degenerate corpora are allowed (e.g. unknown fraction 0); handled by
    // the caller via the counts below.
  }
  SynthWorld world;
  SplitMix64 word_rng = SplitMix64::substream(config.seed, "synth_words");
  SplitMix64 name_rng = SplitMix64::substream(config.seed, "synth_names");
  SplitMix64 topic_rng = SplitMix64::substream(config.seed, "synth_topics");

  std::set<std::string> used;
  for (std::size_t i = 0; i < kTopicPool; ++i) {
    world.topic_pool.push_back(fresh_word(word_rng, 3, used));
  }
  for (std::size_t i = 0; i < kGlobalPool; ++i) {
    world.global_pool.push_back(fresh_word(word_rng, 2, used));
  }

  const bool variants = p.surface_variant_rate > 0.0;
  const auto name_ok = [&](const std::string& name) {
    if (used.count(name)) return false;
    if (variants && used.count(name + "s")) return false;
    return true;
  };
  const auto claim_name = [&](const std::string& name) {
    used.insert(name);
    if (variants) used.insert(name + "s");
  };
  const auto fresh_name = [&]() {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      std::string name = make_word(name_rng, 4);
      if (name_ok(name)) {
        claim_name(name);
        return name;
      }
    }
    raise(Err::Internal, "name generator exhausted");
  };

  const auto sample_topic = [&]() {
    std::vector<std::string> topic;
    std::set<std::size_t> picked;
    while (topic.size() < p.topic_words_per_entity) {
      const std::size_t idx = name_rng.next_below(world.topic_pool.size());
      if (picked.insert(idx).second) topic.push_back(world.topic_pool[idx]);
    }
    return topic;
  };

  for (std::size_t i = 0; i < p.known_entities; ++i) {
    SynthEntity e;
    char id[16];
    std::snprintf(id, sizeof(id), "K%05zu", i);
    e.id = id;
    e.name = fresh_name();
    e.topic = sample_topic();
    e.known = true;
    e.added_at = config.t1 - 100000 + static_cast<std::int64_t>(i);
    world.entities.push_back(std::move(e));
  }

  const auto count_of = [&](double rate) {
    return static_cast<std::size_t>(
        std::llround(rate * static_cast<double>(p.unknown_entities)));
  };
  const std::size_t n_collision = std::min(
      std::min(count_of(p.collision_rate), p.unknown_entities), p.known_entities);
  const std::size_t n_near = std::min(count_of(p.near_rate),
                                      p.unknown_entities - n_collision);

  for (std::size_t i = 0; i < p.unknown_entities; ++i) {
    SynthEntity e;
    char id[16];
    std::snprintf(id, sizeof(id), "U%05zu", i);
    e.id = id;
    e.known = false;
    e.topic = sample_topic();
    e.added_at = config.t1 + 1 + static_cast<std::int64_t>(i);
    if (i < n_collision) {
      // Shares the exact name of a known entity (the Underland case).
      e.name = world.entities[i].name;
    } else if (i < n_collision + n_near && i + 1 < p.unknown_entities) {
      // Near-duplicate of the next unknown's name: shared 6-char stem,
      // fresh 2-char tail (the BioNTech case).
      const std::string stem = make_word(name_rng, 3);
      for (int attempt = 0; attempt < 10000; ++attempt) {
        std::string candidate = stem + make_word(name_rng, 1);
        if (name_ok(candidate)) {
          claim_name(candidate);
          e.name = candidate;
          break;
        }
      }
      if (e.name.empty()) raise(Err::Internal, "near-name generator exhausted");
    } else {
      e.name = fresh_name();
    }
    world.entities.push_back(std::move(e));
  }

  for (const std::string& w : world.topic_pool) world.vocab.insert(w);
  for (const std::string& w : world.global_pool) world.vocab.insert(w);
  for (const SynthEntity& e : world.entities) {
    world.vocab.insert(e.name);
    world.mention_tokens.insert(e.name);
    if (variants) {
      world.vocab.insert(e.name + "s");
      world.mention_tokens.insert(e.name + "s");
    }
  }
  (void)topic_rng;
  return world;
}

// Exact-interpolation mention-detection weights: solve for w with
// w . feat(token) = +margin for mention tokens and a negative margin for
// everything else. With single-token mentions and fillers at -3x the
// mention margin, every span containing a filler scores below zero and
// only single mention tokens pass the s_m = 0.5 gate.
VecF solve_mention_weights(const SynthWorld& world, Eigen::Index dim) {
  std::vector<std::string> tokens(world.vocab.begin(), world.vocab.end());
  const auto n = static_cast<Eigen::Index>(tokens.size());
  if (n > dim) {
    raise(Err::InvalidArgument,
          "provider dim " + std::to_string(dim) +
              " too small for synthetic vocabulary of " + std::to_string(n));
  }
  const HashFeaturizer featurizer(dim);
  Eigen::MatrixXd features(n, dim);
  Eigen::VectorXd targets(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    features.row(i) = featurizer.encode_text(tokens[static_cast<std::size_t>(i)])
                          .cast<double>()
                          .transpose();
    targets[i] = world.mention_tokens.count(tokens[static_cast<std::size_t>(i)])
                     ? kNameMargin
                     : kFillerMargin;
  }
  const Eigen::MatrixXd gram = features * features.transpose();
  const Eigen::VectorXd alpha = gram.ldlt().solve(targets);
  const Eigen::VectorXd w = features.transpose() * alpha;
  const double residual = (features * w - targets).cwiseAbs().maxCoeff();
  if (residual > 1e-6) {
    raise(Err::Internal, "mention weight solve did not converge (residual " +
                             std::to_string(residual) + ")");
  }
  return w.cast<float>();
}

}  // namespace

SynthResult cmd_synth(const RunConfig& config) {
  const SynthParams& p = config.synth;
  if (p.known_entities == 0) {
    raise(Err::InvalidArgument, "synthetic corpus needs known entities");
  }
  if (p.sentence_words < p.noise_words + 2) {
    raise(Err::InvalidArgument, "sentence_words too small for noise_words");
  }
  if (config.t1 >= config.t2) {
    raise(Err::InvalidArgument, "synth requires t1 < t2");
  }

  const SynthWorld world = build_world(config);

  // Generator-chosen featurizer width: room for the whole vocabulary plus
  // headroom, never below the configured dim.
  const auto vocab_n = static_cast<Eigen::Index>(world.vocab.size());
  const Eigen::Index dim = std::max(
      config.provider.dim,
      static_cast<Eigen::Index>(std::bit_ceil(
          static_cast<std::size_t>(vocab_n) + 64)));
  const HashFeaturizer featurizer(dim);

  const VecF w_mention = solve_mention_weights(world, dim);

  SplitMix64 doc_rng = SplitMix64::substream(config.seed, "synth_docs");

  // One sentence per mention: topic words around the surface plus a few
  // global noise words, no punctuation.
  const auto make_sentence = [&](const SynthEntity& entity,
                                 std::string* surface_out, Span* span_out) {
    std::string surface = entity.name;
    if (p.surface_variant_rate > 0.0 &&
        doc_rng.next_double() < p.surface_variant_rate) {
      surface += "s";
    }
    const std::size_t words = p.sentence_words;
    std::vector<std::string> tokens;
    tokens.reserve(words);
    for (std::size_t i = 0; i + 1 + p.noise_words < words; ++i) {
      tokens.push_back(entity.topic[doc_rng.next_below(entity.topic.size())]);
    }
    for (std::size_t i = 0; i < p.noise_words; ++i) {
      tokens.push_back(
          world.global_pool[doc_rng.next_below(world.global_pool.size())]);
    }
    const std::size_t pos = doc_rng.next_below(tokens.size() + 1);
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), surface);

    std::string text;
    Span span{0, 0};
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) text += ' ';
      if (i == pos) {
        span.start = static_cast<std::int64_t>(text.size());
        span.end = span.start + static_cast<std::int64_t>(tokens[i].size());
      }
      text += tokens[i];
    }
    *surface_out = surface;
    *span_out = span;
    return text;
  };

  DocumentSet docs;
  std::size_t doc_counter = 0;
  const auto add_doc = [&](const SynthEntity& entity, std::int64_t timestamp) {
    Document doc;
    char id[24];
    std::snprintf(id, sizeof(id), "doc-%06zu", doc_counter++);
    doc.id = id;
    std::string surface;
    Span span;
    doc.text = make_sentence(entity, &surface, &span);
    doc.timestamp = timestamp;
    doc.gold_mentions.push_back({span, entity.id});
    docs.docs.push_back(std::move(doc));
  };

  const std::size_t unknown_window_total =
      p.unknown_entities * p.mentions_per_entity;
  std::size_t known_window_per_entity = p.mentions_per_entity;
  if (p.unknown_entities > 0 && p.unknown_mention_ratio > 0.0) {
    known_window_per_entity = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(
               static_cast<double>(unknown_window_total) /
               (p.unknown_mention_ratio *
                static_cast<double>(p.known_entities)))));
  }

  const auto window_timestamp = [&]() {
    const auto width = static_cast<std::uint64_t>(config.t2 - config.t1);
    return config.t1 + static_cast<std::int64_t>(doc_rng.next_below(width));
  };

  SynthResult result;
  for (const SynthEntity& entity : world.entities) {
    if (entity.known) {
      for (std::size_t m = 0; m < p.train_mentions_per_known; ++m) {
        const auto offset = static_cast<std::int64_t>(doc_rng.next_below(90000));
        add_doc(entity, config.t1 - 1 - offset);
      }
      for (std::size_t m = 0; m < known_window_per_entity; ++m) {
        add_doc(entity, window_timestamp());
        ++result.known_mentions_window;
      }
    } else {
      for (std::size_t m = 0; m < p.mentions_per_entity; ++m) {
        add_doc(entity, window_timestamp());
        ++result.unknown_mentions_window;
      }
    }
  }
  result.documents = docs.size();

  EntityCatalog catalog;
  for (const SynthEntity& entity : world.entities) {
    EntityRecord rec;
    rec.id = entity.id;
    rec.title = entity.name;
    std::string desc;
    for (const std::string& w : entity.topic) {
      if (!desc.empty()) desc += ' ';
      desc += w;
    }
    rec.description = desc;
    rec.added_at = entity.added_at;
    catalog.by_id.emplace(rec.id, catalog.entities.size());
    catalog.entities.push_back(std::move(rec));
  }

  fs::create_directories(config.out_dir);
  const auto prefixed = [&](const std::string& suffix) {
    return (fs::path(config.out_dir) / (p.out_prefix + suffix)).string();
  };

  result.documents_file = prefixed("_documents.jsonl");
  write_documents(result.documents_file, docs);
  result.catalog_file = prefixed("_catalog.jsonl");
  write_catalog(result.catalog_file, catalog);

  io::EmbeddingFile weights;
  weights.dim = static_cast<std::uint32_t>(dim);
  weights.records.emplace_back("md.w_start", VecF::Zero(dim));
  weights.records.emplace_back("md.w_end", VecF::Zero(dim));
  weights.records.emplace_back("md.w_mention", w_mention);
  result.weights_file = prefixed("_weights.edem");
  io::write_embedding_file(result.weights_file, weights);

  // Runnable config for the generated benchmark. Thresholds are generator
  // properties: tau matches the hash-feature similarity scale, not the
  // paper's unnormalized-score scale.
  RunConfig run = config;
  run.documents_path = result.documents_file;
  run.catalog_path = result.catalog_file;
  run.weights_path = result.weights_file;
  run.index_path = prefixed("_index.edix");
  run.provider.kind = "hash";
  run.provider.dim = dim;
  run.discovery.tau = kSynthTau;
  result.config_file = prefixed("_config.json");
  save_config(run, result.config_file);

  return result;
}

}  // namespace edin
