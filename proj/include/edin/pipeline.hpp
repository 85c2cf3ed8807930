#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edin/ann_index.hpp"
#include "edin/corpus.hpp"
#include "edin/discovery.hpp"
#include "edin/embedding.hpp"
#include "edin/evaluation.hpp"
#include "edin/linker.hpp"
#include "edin/types.hpp"

namespace edin {

enum class IndexingMode { cluster, mention };

struct SynthParams {
  std::size_t known_entities = 1000;
  std::size_t unknown_entities = 100;
  std::size_t mentions_per_entity = 8;  // in the [t1, t2) window
  std::size_t train_mentions_per_known = 2;
  double unknown_mention_ratio = 0.1;  // E_U:E_K window mentions
  double collision_rate = 0.03;        // unknowns reusing a known name
  double near_rate = 0.03;             // unknowns with near-duplicate names
  double surface_variant_rate = 0.0;   // mentions using an inflected surface
  std::size_t topic_words_per_entity = 6;
  std::size_t sentence_words = 10;     // tokens per sentence incl. the mention
  std::size_t noise_words = 2;         // off-topic words per sentence
  std::string out_prefix = "synth";
};

struct TuneGridSpec {
  double lo = 0.0;
  double hi = 1.0;
  double step = 0.1;

  std::vector<double> expand() const;
};

struct RunConfig {
  // paths
  std::string documents_path;
  std::string catalog_path;
  std::string weights_path;  // optional; empty = untrained defaults
  std::string index_path;
  std::string out_dir = "out";

  std::int64_t t1 = 0;
  std::int64_t t2 = 0;
  double adapt_fraction = 0.5;
  double dev_fraction = 0.0;

  std::uint64_t seed = 17;
  int threads = 1;

  Metric metric = Metric::inner_product;
  IndexMode ann_mode = IndexMode::exact;
  HnswParams ann_params;

  ProviderConfig provider;
  LinkConfig linker;
  DiscoveryParams discovery;
  IndexingMode indexing_mode = IndexingMode::cluster;
  std::size_t max_context_chars = 2000;

  SynthParams synth;
  TuneGridSpec tune_s_m{0.0, 1.0, 0.1};
  TuneGridSpec tune_delta{0.5, 1.0, 0.01};
  TuneGridSpec tune_tau{50.0, 250.0, 10.0};
};

// Config round-trips losslessly through its JSON file format. Environment
// variables prefixed EDIN_ override scalar keys after loading (see
// apply_env_overrides for the documented set).
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& config);
void save_config(const RunConfig& config, const std::string& path);
void apply_env_overrides(RunConfig& config);

struct StageCounter {
  std::string name;
  double seconds = 0.0;
  std::int64_t count = 0;
};

struct RunManifest {
  std::string stage;
  std::uint64_t config_crc = 0;
  std::vector<std::pair<std::string, std::uint64_t>> input_checksums;
  std::string version;
  std::vector<StageCounter> counters;
};

void write_manifest(const RunManifest& manifest, const std::string& path);

struct BuildResult {
  std::size_t indexed_entities = 0;
  std::string index_file;
};

BuildResult cmd_build_index(const RunConfig& config);

struct AdaptResult {
  DiscoveryReport report;
  std::size_t drafts = 0;
  std::size_t index_size_before = 0;
  std::size_t index_size_after = 0;
  std::string adapted_index_file;
  std::string clusters_file;
  std::string drafts_file;
  std::string draft_vectors_file;
};

AdaptResult cmd_adapt(const RunConfig& config);

struct EvaluateOptions {
  std::string index_override;        // defaults to the adapted index if present
  std::string predictions_path;      // skip linking, score an existing file
  bool gold_spans = false;           // oracle mention detection
  std::optional<EvalSubset> subset;  // restrict the printed headline subset
};

struct EvaluateResult {
  EvalReport report;
  std::string report_file;
  std::string tsv_file;
  std::string predictions_file;
};

EvaluateResult cmd_evaluate(const RunConfig& config,
                            const EvaluateOptions& options = {});

struct SynthResult {
  std::string documents_file;
  std::string catalog_file;
  std::string weights_file;
  std::string config_file;
  std::size_t documents = 0;
  std::size_t known_mentions_window = 0;
  std::size_t unknown_mentions_window = 0;
};

SynthResult cmd_synth(const RunConfig& config);

struct TuneResult {
  double s_m = 0.5;
  DiscoveryParams params;
};

TuneResult cmd_tune(const RunConfig& config);

}  // namespace edin
