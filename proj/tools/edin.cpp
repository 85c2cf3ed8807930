// Command line front end: build-index, adapt, evaluate, synth, tune.
// Exit codes: 0 ok, 1 validation error, 2 data error, 3 internal error.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "edin/error.hpp"
#include "edin/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> metric;
  std::optional<std::string> mode;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Run configuration file")
      ->required();
  cmd->add_option("--seed", flags.seed, "Override the run seed");
  cmd->add_option("--threads", flags.threads, "Cap worker threads");
  cmd->add_option("--metric", flags.metric, "Similarity metric: ip | cosine");
  cmd->add_option("--mode", flags.mode, "Indexing mode: cluster | mention");
}

edin::RunConfig make_config(const CommonFlags& flags) {
  edin::RunConfig config = edin::load_config(flags.config_path);
  edin::apply_env_overrides(config);
  if (flags.seed) config.seed = *flags.seed;
  if (flags.threads) config.threads = *flags.threads;
  if (flags.metric) {
    if (*flags.metric == "ip") {
      config.metric = edin::Metric::inner_product;
    } else if (*flags.metric == "cosine") {
      config.metric = edin::Metric::cosine;
    } else {
      edin::raise(edin::Err::InvalidArgument,
                  "unknown metric '" + *flags.metric + "'");
    }
  }
  if (flags.mode) {
    if (*flags.mode == "cluster") {
      config.indexing_mode = edin::IndexingMode::cluster;
    } else if (*flags.mode == "mention") {
      config.indexing_mode = edin::IndexingMode::mention;
    } else {
      edin::raise(edin::Err::InvalidArgument,
                  "unknown indexing mode '" + *flags.mode + "'");
    }
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entity index adaptation toolkit"};
  app.require_subcommand(1);

  CommonFlags build_flags, adapt_flags, eval_flags, synth_flags, tune_flags;

  CLI::App* build = app.add_subcommand("build-index",
                                       "Build the known-entity dense index");
  add_common(build, build_flags);

  CLI::App* adapt = app.add_subcommand(
      "adapt", "Discover unknown entities and extend the index");
  add_common(adapt, adapt_flags);

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Link the test split and score it");
  add_common(evaluate, eval_flags);
  std::string index_override, predictions_path, subset_name;
  bool gold_spans = false;
  evaluate->add_option("--index", index_override,
                       "Evaluate against this index file");
  evaluate->add_option("--predictions", predictions_path,
                       "Score an existing predictions file instead of linking");
  evaluate->add_flag("--gold-spans", gold_spans,
                     "Oracle mention detection from gold spans");
  evaluate->add_option("--subset", subset_name,
                       "Headline subset: all | known | unknown | "
                       "unknown_filtered | unknown_discovered");

  CLI::App* synth =
      app.add_subcommand("synth", "Generate a seeded synthetic benchmark");
  add_common(synth, synth_flags);

  CLI::App* tune = app.add_subcommand(
      "tune", "Grid-search s_m, delta and tau on the adapt-dev split");
  add_common(tune, tune_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed()) {
      const auto result = edin::cmd_build_index(make_config(build_flags));
      std::printf("indexed %zu entities -> %s\n", result.indexed_entities,
                  result.index_file.c_str());
    } else if (adapt->parsed()) {
      const auto result = edin::cmd_adapt(make_config(adapt_flags));
      std::printf("mentions %zu  clusters %zu (unknown %zu)  drafts %zu\n",
                  result.report.mentions, result.report.clusters,
                  result.report.unknown_clusters, result.drafts);
      std::printf("index %zu -> %zu entries -> %s\n", result.index_size_before,
                  result.index_size_after, result.adapted_index_file.c_str());
      if (result.report.gold) {
        std::printf("discovery recall %.3f precision %.3f nmi %.3f\n",
                    result.report.gold->cluster_recall_unknown,
                    result.report.gold->cluster_precision_unknown,
                    result.report.gold->nmi);
      }
    } else if (evaluate->parsed()) {
      edin::EvaluateOptions options;
      options.index_override = index_override;
      options.predictions_path = predictions_path;
      options.gold_spans = gold_spans;
      if (!subset_name.empty()) {
        options.subset = edin::parse_subset(subset_name);
        if (!options.subset) {
          edin::raise(edin::Err::InvalidArgument,
                      "unknown subset '" + subset_name + "'");
        }
      }
      const auto result = edin::cmd_evaluate(make_config(eval_flags), options);
      const auto line = [](const char* name, const edin::ElMetrics& m) {
        std::printf("%-18s R@1 %.4f  P@1 %.4f  (support %zu)\n", name, m.r_at_1,
                    m.p_at_1, m.gold_support);
      };
      if (options.subset) {
        switch (*options.subset) {
          case edin::EvalSubset::all: line("all", result.report.all); break;
          case edin::EvalSubset::known: line("known", result.report.known); break;
          case edin::EvalSubset::unknown:
            line("unknown", result.report.unknown);
            break;
          case edin::EvalSubset::unknown_filtered:
            line("unknown_filtered", result.report.unknown_filtered);
            break;
          case edin::EvalSubset::unknown_discovered:
            line("unknown_discovered", result.report.unknown_discovered);
            break;
        }
      } else {
        line("all", result.report.all);
        line("known", result.report.known);
        line("unknown", result.report.unknown);
        line("unknown_filtered", result.report.unknown_filtered);
        line("unknown_discovered", result.report.unknown_discovered);
      }
      std::printf("report -> %s\n", result.report_file.c_str());
    } else if (synth->parsed()) {
      const auto result = edin::cmd_synth(make_config(synth_flags));
      std::printf("documents %zu (window mentions: %zu known, %zu unknown)\n",
                  result.documents, result.known_mentions_window,
                  result.unknown_mentions_window);
      std::printf("wrote %s\n", result.config_file.c_str());
    } else if (tune->parsed()) {
      const auto result = edin::cmd_tune(make_config(tune_flags));
      std::printf("tuned s_m %.4f delta %.4f tau %.4f\n", result.s_m,
                  result.params.delta, result.params.tau);
    }
  } catch (const edin::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 0;
}
