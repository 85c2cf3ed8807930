#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <nlohmann/json.hpp>

#include "edin/error.hpp"
#include "edin/io.hpp"
#include "edin/pipeline.hpp"

using namespace edin;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A small end-to-end world: quick to generate, still exercises discovery.
RunConfig small_config(const fs::path& dir) {
  RunConfig config;
  config.out_dir = dir.string();
  config.t1 = 1000000;
  config.t2 = 2000000;
  config.adapt_fraction = 0.5;
  config.seed = 17;
  config.synth.known_entities = 40;
  config.synth.unknown_entities = 8;
  config.synth.mentions_per_entity = 6;
  config.synth.train_mentions_per_known = 1;
  config.synth.collision_rate = 0.0;
  config.synth.near_rate = 0.0;
  return config;
}

RunConfig generated_config(const fs::path& dir) {
  const RunConfig base = small_config(dir);
  const SynthResult synth = cmd_synth(base);
  return load_config(synth.config_file);
}

std::size_t count_lines(const std::string& path) {
  const std::string text = io::read_text_file(path);
  std::size_t lines = 0;
  for (char c : text) {
    if (c == '\n') ++lines;
  }
  return lines;
}

}  // namespace

TEST_CASE("config round-trips losslessly through its file format") {
  RunConfig config;
  config.documents_path = "docs.jsonl";
  config.catalog_path = "catalog.jsonl";
  config.t1 = 123;
  config.t2 = 456;
  config.seed = 991;
  config.metric = Metric::cosine;
  config.ann_mode = IndexMode::approximate;
  config.discovery.tau = 0.33;
  config.indexing_mode = IndexingMode::mention;

  const fs::path path = fs::temp_directory_path() / "edin_config.json";
  save_config(config, path.string());
  const RunConfig loaded = load_config(path.string());
  CHECK(config_to_json(loaded) == config_to_json(config));
  fs::remove(path);
}

TEST_CASE("environment variables override scalar keys") {
  RunConfig config;
  setenv("EDIN_SEED", "4242", 1);
  setenv("EDIN_METRIC", "cosine", 1);
  apply_env_overrides(config);
  unsetenv("EDIN_SEED");
  unsetenv("EDIN_METRIC");
  CHECK(config.seed == 4242);
  CHECK(config.metric == Metric::cosine);
}

TEST_CASE("synth is deterministic and hits the requested mention ratio") {
  const fs::path dir1 = fresh_dir("edin_synth_a");
  const fs::path dir2 = fresh_dir("edin_synth_b");
  const SynthResult a = cmd_synth(small_config(dir1));
  const SynthResult b = cmd_synth(small_config(dir2));

  CHECK(io::read_text_file(a.documents_file) ==
        io::read_text_file(b.documents_file));
  CHECK(io::read_text_file(a.catalog_file) == io::read_text_file(b.catalog_file));
  CHECK(io::read_text_file(a.weights_file) == io::read_text_file(b.weights_file));

  // Window-mention ratio within +-0.01 of the requested 0.1.
  const double ratio = static_cast<double>(a.unknown_mentions_window) /
                       static_cast<double>(a.known_mentions_window);
  CHECK(ratio == doctest::Approx(0.1).epsilon(0.1));
  CHECK(std::abs(ratio - 0.1) <= 0.01);

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("synth with zero unknown entities keeps every entity known") {
  const fs::path dir = fresh_dir("edin_synth_zero");
  RunConfig config = small_config(dir);
  config.synth.unknown_entities = 0;
  config.synth.unknown_mention_ratio = 0.0;
  const SynthResult synth = cmd_synth(config);
  const EntityCatalog catalog = load_catalog(synth.catalog_file);
  for (const EntityRecord& rec : catalog.entities) {
    CHECK(rec.added_at < config.t1);
  }
  CHECK(synth.unknown_mentions_window == 0);
  fs::remove_all(dir);
}

TEST_CASE("build-index writes a deterministic index of known entities") {
  const fs::path dir = fresh_dir("edin_build");
  const RunConfig config = generated_config(dir);

  const BuildResult first = cmd_build_index(config);
  CHECK(first.indexed_entities == 40);  // knowns only
  const std::string bytes_a = io::read_text_file(first.index_file);

  const BuildResult second = cmd_build_index(config);
  CHECK(io::read_text_file(second.index_file) == bytes_a);

  const DenseIndex index = DenseIndex::load(first.index_file);
  CHECK(index.size() == 40);
  fs::remove_all(dir);
}

TEST_CASE("build-index validates paths before doing any work") {
  RunConfig config;
  config.catalog_path = "/nonexistent/catalog.jsonl";
  config.index_path = "/tmp/never.edix";
  try {
    cmd_build_index(config);
    FAIL("expected MissingFile");
  } catch (const Error& e) {
    CHECK(e.kind() == Err::MissingFile);
    CHECK(e.exit_code() == 1);
  }
}

TEST_CASE("adapt grows the index per mode and is byte-deterministic") {
  const fs::path dir = fresh_dir("edin_adapt");
  RunConfig config = generated_config(dir);
  cmd_build_index(config);

  // Cluster mode: one entry per drafted unknown cluster.
  const AdaptResult cluster_run = cmd_adapt(config);
  CHECK(cluster_run.index_size_after - cluster_run.index_size_before ==
        cluster_run.drafts);
  CHECK(cluster_run.drafts == cluster_run.report.unknown_clusters);
  REQUIRE(cluster_run.report.gold.has_value());
  CHECK(cluster_run.report.gold->entity_recall_unknown == 1.0);

  // Byte-determinism of artifacts across a rerun.
  const std::string index_bytes =
      io::read_text_file(cluster_run.adapted_index_file);
  const std::string clusters_bytes = io::read_text_file(cluster_run.clusters_file);
  const AdaptResult rerun = cmd_adapt(config);
  CHECK(io::read_text_file(rerun.adapted_index_file) == index_bytes);
  CHECK(io::read_text_file(rerun.clusters_file) == clusters_bytes);

  // Mention mode: one entry per member of each drafted cluster.
  RunConfig mention_config = config;
  mention_config.indexing_mode = IndexingMode::mention;
  mention_config.out_dir = (dir / "mention").string();
  const AdaptResult mention_run = cmd_adapt(mention_config);

  std::size_t member_total = 0;
  {
    const std::string text = io::read_text_file(rerun.clusters_file);
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t next = text.find('\n', pos);
      if (next == std::string::npos) next = text.size();
      const auto j = nlohmann::json::parse(text.substr(pos, next - pos));
      pos = next + 1;
      if (j.at("status") == "unknown") member_total += j.at("members").size();
    }
  }
  CHECK(mention_run.drafts == member_total);
  CHECK(mention_run.index_size_after - mention_run.index_size_before ==
        member_total);

  fs::remove_all(dir);
}

TEST_CASE("evaluate links the test split and meets the smoke targets") {
  const fs::path dir = fresh_dir("edin_eval");
  RunConfig config = generated_config(dir);
  cmd_build_index(config);

  // Pre-adaptation: unknowns cannot be linked.
  EvaluateOptions pre_options;
  pre_options.index_override = config.index_path;
  const EvaluateResult pre = cmd_evaluate(config, pre_options);
  CHECK(pre.report.unknown.r_at_1 == 0.0);
  CHECK(pre.report.known.r_at_1 > 0.9);

  cmd_adapt(config);
  const EvaluateResult post = cmd_evaluate(config);
  CHECK(post.report.unknown.r_at_1 > 0.9);
  CHECK(post.report.known.r_at_1 >= pre.report.known.r_at_1 - 0.01);
  CHECK(count_lines(post.predictions_file) > 0);
  CHECK(fs::exists(post.tsv_file));

  // Byte-determinism of the report.
  const std::string report_bytes = io::read_text_file(post.report_file);
  const EvaluateResult again = cmd_evaluate(config);
  CHECK(io::read_text_file(again.report_file) == report_bytes);

  fs::remove_all(dir);
}

TEST_CASE("evaluate accepts gold-derived predictions and scores them 1.0") {
  const fs::path dir = fresh_dir("edin_eval_gold");
  RunConfig config = generated_config(dir);
  cmd_build_index(config);

  // Derive predictions from the gold test split.
  auto [docs, catalog] =
      load_corpus(config.documents_path, config.catalog_path);
  const SplitSet splits =
      temporal_split(docs, catalog, config.t1, config.t2,
                     config.adapt_fraction, config.dev_fraction, config.seed);
  std::vector<LinkPrediction> gold_preds;
  for (const Document& doc : splits.test.docs) {
    for (const GoldMention& gm : doc.gold_mentions) {
      LinkPrediction p;
      p.doc_id = doc.id;
      p.span = gm.span;
      p.entity_id = gm.entity_id;
      p.md_prob = p.ed_prob = p.final_score = 1.0;
      gold_preds.push_back(std::move(p));
    }
  }
  const std::string preds_path = (dir / "gold_preds.jsonl").string();
  io::write_text_file(preds_path, serialize_predictions(gold_preds));

  EvaluateOptions options;
  options.predictions_path = preds_path;
  options.index_override = config.index_path;
  const EvaluateResult result = cmd_evaluate(config, options);
  CHECK(result.report.all.r_at_1 == 1.0);
  CHECK(result.report.all.p_at_1 == 1.0);
  fs::remove_all(dir);
}

TEST_CASE("gold-span evaluation bypasses mention detection") {
  const fs::path dir = fresh_dir("edin_eval_goldspan");
  RunConfig config = generated_config(dir);
  cmd_build_index(config);
  cmd_adapt(config);

  EvaluateOptions options;
  options.gold_spans = true;
  const EvaluateResult result = cmd_evaluate(config, options);
  CHECK(result.report.all.r_at_1 > 0.9);
  for (const LinkPrediction& p :
       parse_predictions(io::read_text_file(result.predictions_file))) {
    CHECK(p.md_prob == 1.0);
  }
  fs::remove_all(dir);
}

TEST_CASE("tune recovers thresholds on a dev split") {
  const fs::path dir = fresh_dir("edin_tune");
  RunConfig config = generated_config(dir);
  config.dev_fraction = 0.25;
  config.adapt_fraction = 0.4;
  cmd_build_index(config);

  config.tune_s_m = {0.5, 0.5, 0.1};   // single point
  config.tune_delta = {0.5, 0.95, 0.15};
  config.tune_tau = {0.15, 0.45, 0.15};
  const TuneResult tuned = cmd_tune(config);
  CHECK(tuned.s_m == 0.5);
  // Any delta below the identical-surface similarity (1.0) keeps NMI at
  // its maximum; the tuner must pick the smallest such grid point.
  CHECK(tuned.params.delta >= 0.5);
  CHECK(tuned.params.tau >= 0.15);
  CHECK(fs::exists(dir / "tuned_params.json"));
  fs::remove_all(dir);
}

TEST_CASE("cli round trip: synth, build, adapt, evaluate") {
  const fs::path dir = fresh_dir("edin_cli");
  const RunConfig base = small_config(dir);
  const std::string base_cfg = (dir / "base_config.json").string();
  save_config(base, base_cfg);

  const std::string cli = EDIN_CLI;
  const auto run = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
  };

  CHECK(run("synth --config " + base_cfg) == 0);
  const std::string gen_cfg = (dir / "synth_config.json").string();
  CHECK(run("build-index --config " + gen_cfg) == 0);
  CHECK(run("adapt --config " + gen_cfg) == 0);
  CHECK(run("evaluate --config " + gen_cfg + " --subset unknown") == 0);
  CHECK(fs::exists(dir / "report.json"));

  // Validation failures exit with code 1.
  const int bad = run("build-index --config /nonexistent.json");
  CHECK(WEXITSTATUS(bad) == 1);
  fs::remove_all(dir);
}
