#include "edin/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <nlohmann/json.hpp>
#include <thread>

#include "edin/error.hpp"
#include "edin/indexing.hpp"
#include "edin/io.hpp"
#include "edin/utf8.hpp"

namespace edin {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "edin 0.1.0";

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

Metric parse_metric(const std::string& name) {
  if (name == "ip") return Metric::inner_product;
  if (name == "cosine") return Metric::cosine;
  raise(Err::InvalidArgument, "unknown metric '" + name + "'");
}

IndexMode parse_ann_mode(const std::string& name) {
  if (name == "exact") return IndexMode::exact;
  if (name == "hnsw") return IndexMode::approximate;
  raise(Err::InvalidArgument, "unknown ann mode '" + name + "'");
}

IndexingMode parse_indexing_mode(const std::string& name) {
  if (name == "cluster") return IndexingMode::cluster;
  if (name == "mention") return IndexingMode::mention;
  raise(Err::InvalidArgument, "unknown indexing mode '" + name + "'");
}

ordered_json grid_to_json(const TuneGridSpec& grid) {
  ordered_json j;
  j["lo"] = grid.lo;
  j["hi"] = grid.hi;
  j["step"] = grid.step;
  return j;
}

TuneGridSpec grid_from_json(const ordered_json& j, const TuneGridSpec& fallback) {
  TuneGridSpec grid = fallback;
  if (j.is_object()) {
    grid.lo = j.value("lo", grid.lo);
    grid.hi = j.value("hi", grid.hi);
    grid.step = j.value("step", grid.step);
  }
  return grid;
}

// Ensures the output directory exists and returns path/name.
std::string out_path(const RunConfig& config, const std::string& name) {
  fs::create_directories(config.out_dir);
  return (fs::path(config.out_dir) / name).string();
}

}  // namespace

std::vector<double> TuneGridSpec::expand() const {
  if (step <= 0.0 || hi < lo) {
    raise(Err::InvalidArgument, "grid requires step > 0 and hi >= lo");
  }
  std::vector<double> points;
  for (int i = 0;; ++i) {
    const double v = lo + step * i;
    if (v > hi + step * 1e-9) break;
    points.push_back(v);
  }
  return points;
}

std::string config_to_json(const RunConfig& config) {
  ordered_json j;
  j["paths"] = {{"documents", config.documents_path},
                {"catalog", config.catalog_path},
                {"weights", config.weights_path},
                {"index", config.index_path},
                {"out_dir", config.out_dir}};
  j["t1"] = config.t1;
  j["t2"] = config.t2;
  j["adapt_fraction"] = config.adapt_fraction;
  j["dev_fraction"] = config.dev_fraction;
  j["seed"] = config.seed;
  j["threads"] = config.threads;
  j["metric"] = to_string(config.metric);
  j["ann"] = {{"mode", config.ann_mode == IndexMode::exact ? "exact" : "hnsw"},
              {"m", config.ann_params.m},
              {"ef_construction", config.ann_params.ef_construction},
              {"ef_search", config.ann_params.ef_search}};
  j["provider"] = {{"kind", config.provider.kind},
                   {"dim", config.provider.dim},
                   {"embeddings", config.provider.embeddings_path},
                   {"base_url", config.provider.base_url},
                   {"timeout_ms", config.provider.timeout_ms}};
  j["linker"] = {{"s_m", config.linker.s_m},
                 {"gamma", config.linker.gamma},
                 {"max_span_len", config.linker.max_span_len},
                 {"top_k", config.linker.top_k},
                 {"knn_k", config.linker.knn_k}};
  j["discovery"] = {{"delta", config.discovery.delta},
                    {"tau", config.discovery.tau},
                    {"coverage", config.discovery.coverage},
                    {"knn_k", config.discovery.knn_k},
                    {"min_cluster_size", config.discovery.min_cluster_size}};
  j["indexing_mode"] =
      config.indexing_mode == IndexingMode::cluster ? "cluster" : "mention";
  j["max_context_chars"] = config.max_context_chars;
  j["synth"] = {{"known_entities", config.synth.known_entities},
                {"unknown_entities", config.synth.unknown_entities},
                {"mentions_per_entity", config.synth.mentions_per_entity},
                {"train_mentions_per_known", config.synth.train_mentions_per_known},
                {"unknown_mention_ratio", config.synth.unknown_mention_ratio},
                {"collision_rate", config.synth.collision_rate},
                {"near_rate", config.synth.near_rate},
                {"surface_variant_rate", config.synth.surface_variant_rate},
                {"topic_words_per_entity", config.synth.topic_words_per_entity},
                {"sentence_words", config.synth.sentence_words},
                {"noise_words", config.synth.noise_words},
                {"out_prefix", config.synth.out_prefix}};
  j["tune"] = {{"s_m", grid_to_json(config.tune_s_m)},
               {"delta", grid_to_json(config.tune_delta)},
               {"tau", grid_to_json(config.tune_tau)}};
  return j.dump(2) + "\n";
}

RunConfig load_config(const std::string& path) {
  const std::string text = io::read_text_file(path);
  ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    raise(Err::MalformedRecord, "config file " + path + " is not valid JSON");
  }
  RunConfig config;
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    config.documents_path = p.value("documents", config.documents_path);
    config.catalog_path = p.value("catalog", config.catalog_path);
    config.weights_path = p.value("weights", config.weights_path);
    config.index_path = p.value("index", config.index_path);
    config.out_dir = p.value("out_dir", config.out_dir);
  }
  config.t1 = j.value("t1", config.t1);
  config.t2 = j.value("t2", config.t2);
  config.adapt_fraction = j.value("adapt_fraction", config.adapt_fraction);
  config.dev_fraction = j.value("dev_fraction", config.dev_fraction);
  config.seed = j.value("seed", config.seed);
  config.threads = j.value("threads", config.threads);
  if (j.contains("metric")) config.metric = parse_metric(j["metric"]);
  if (j.contains("ann")) {
    const auto& a = j["ann"];
    if (a.contains("mode")) config.ann_mode = parse_ann_mode(a["mode"]);
    config.ann_params.m = a.value("m", config.ann_params.m);
    config.ann_params.ef_construction =
        a.value("ef_construction", config.ann_params.ef_construction);
    config.ann_params.ef_search =
        a.value("ef_search", config.ann_params.ef_search);
  }
  if (j.contains("provider")) {
    const auto& p = j["provider"];
    config.provider.kind = p.value("kind", config.provider.kind);
    config.provider.dim = p.value("dim", config.provider.dim);
    config.provider.embeddings_path =
        p.value("embeddings", config.provider.embeddings_path);
    config.provider.base_url = p.value("base_url", config.provider.base_url);
    config.provider.timeout_ms = p.value("timeout_ms", config.provider.timeout_ms);
  }
  if (j.contains("linker")) {
    const auto& l = j["linker"];
    config.linker.s_m = l.value("s_m", config.linker.s_m);
    config.linker.gamma = l.value("gamma", config.linker.gamma);
    config.linker.max_span_len = l.value("max_span_len", config.linker.max_span_len);
    config.linker.top_k = l.value("top_k", config.linker.top_k);
    config.linker.knn_k = l.value("knn_k", config.linker.knn_k);
  }
  if (j.contains("discovery")) {
    const auto& d = j["discovery"];
    config.discovery.delta = d.value("delta", config.discovery.delta);
    config.discovery.tau = d.value("tau", config.discovery.tau);
    config.discovery.coverage = d.value("coverage", config.discovery.coverage);
    config.discovery.knn_k = d.value("knn_k", config.discovery.knn_k);
    config.discovery.min_cluster_size =
        d.value("min_cluster_size", config.discovery.min_cluster_size);
  }
  if (j.contains("indexing_mode")) {
    config.indexing_mode = parse_indexing_mode(j["indexing_mode"]);
  }
  config.max_context_chars = j.value("max_context_chars", config.max_context_chars);
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    config.synth.known_entities = s.value("known_entities", config.synth.known_entities);
    config.synth.unknown_entities =
        s.value("unknown_entities", config.synth.unknown_entities);
    config.synth.mentions_per_entity =
        s.value("mentions_per_entity", config.synth.mentions_per_entity);
    config.synth.train_mentions_per_known =
        s.value("train_mentions_per_known", config.synth.train_mentions_per_known);
    config.synth.unknown_mention_ratio =
        s.value("unknown_mention_ratio", config.synth.unknown_mention_ratio);
    config.synth.collision_rate = s.value("collision_rate", config.synth.collision_rate);
    config.synth.near_rate = s.value("near_rate", config.synth.near_rate);
    config.synth.surface_variant_rate =
        s.value("surface_variant_rate", config.synth.surface_variant_rate);
    config.synth.topic_words_per_entity =
        s.value("topic_words_per_entity", config.synth.topic_words_per_entity);
    config.synth.sentence_words = s.value("sentence_words", config.synth.sentence_words);
    config.synth.noise_words = s.value("noise_words", config.synth.noise_words);
    config.synth.out_prefix = s.value("out_prefix", config.synth.out_prefix);
  }
  if (j.contains("tune")) {
    const auto& t = j["tune"];
    if (t.contains("s_m")) config.tune_s_m = grid_from_json(t["s_m"], config.tune_s_m);
    if (t.contains("delta"))
      config.tune_delta = grid_from_json(t["delta"], config.tune_delta);
    if (t.contains("tau")) config.tune_tau = grid_from_json(t["tau"], config.tune_tau);
  }
  return config;
}

void save_config(const RunConfig& config, const std::string& path) {
  io::write_text_file(path, config_to_json(config));
}

void apply_env_overrides(RunConfig& config) {
  const auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("EDIN_SEED")) config.seed = std::stoull(*v);
  if (auto v = env("EDIN_THREADS")) config.threads = std::stoi(*v);
  if (auto v = env("EDIN_METRIC")) config.metric = parse_metric(*v);
  if (auto v = env("EDIN_MODE")) config.indexing_mode = parse_indexing_mode(*v);
  if (auto v = env("EDIN_OUT_DIR")) config.out_dir = *v;
  if (auto v = env("EDIN_DOCUMENTS")) config.documents_path = *v;
  if (auto v = env("EDIN_CATALOG")) config.catalog_path = *v;
  if (auto v = env("EDIN_INDEX")) config.index_path = *v;
  if (auto v = env("EDIN_WEIGHTS")) config.weights_path = *v;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  ordered_json j;
  j["stage"] = manifest.stage;
  j["version"] = manifest.version;
  j["config_crc64"] = manifest.config_crc;
  ordered_json inputs = ordered_json::array();
  for (const auto& [file, crc] : manifest.input_checksums) {
    inputs.push_back({{"file", file}, {"crc64", crc}});
  }
  j["inputs"] = std::move(inputs);
  ordered_json counters = ordered_json::array();
  for (const StageCounter& c : manifest.counters) {
    counters.push_back({{"name", c.name}, {"seconds", c.seconds}, {"count", c.count}});
  }
  j["counters"] = std::move(counters);
  io::write_text_file(path, j.dump(2) + "\n");
}

namespace {

RunManifest start_manifest(const RunConfig& config, const std::string& stage) {
  RunManifest manifest;
  manifest.stage = stage;
  manifest.version = kVersion;
  const std::string canon = config_to_json(config);
  manifest.config_crc = io::crc64(canon.data(), canon.size());
  return manifest;
}

void add_input(RunManifest& manifest, const std::string& path) {
  if (path.empty() || !fs::exists(path)) return;
  manifest.input_checksums.emplace_back(path, io::crc64_file(path));
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) {
    raise(Err::MissingFile, what + " path is not configured");
  }
  if (!fs::exists(path)) {
    raise(Err::MissingFile, what + " not found: " + path);
  }
}

HnswParams seeded_ann_params(const RunConfig& config) {
  HnswParams params = config.ann_params;
  params.level_seed = config.seed;
  return params;
}

// Ordered parallel map over documents: results come back in input order
// regardless of thread interleaving.
std::vector<LinkPrediction> link_documents(
    const DocumentSet& docs, const EmbeddingProvider& provider,
    const LinkerWeights& weights, const DenseIndex& index,
    const LinkConfig& link_config, int threads, bool gold_spans) {
  const std::size_t n = docs.docs.size();
  std::vector<std::vector<LinkPrediction>> per_doc(n);
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Document& doc = docs.docs[i];
      if (gold_spans) {
        std::vector<Span> spans;
        spans.reserve(doc.gold_mentions.size());
        for (const GoldMention& gm : doc.gold_mentions) spans.push_back(gm.span);
        per_doc[i] = link_document(doc, provider, weights.md, weights.pooler,
                                   weights.head, index, link_config, &spans);
      } else {
        per_doc[i] = link_document(doc, provider, weights.md, weights.pooler,
                                   weights.head, index, link_config);
      }
    }
  };

  const int workers = std::max(1, threads);
  if (workers == 1 || n < 2) {
    work(0, n);
  } else {
    std::vector<std::future<void>> futures;
    const std::size_t chunk = (n + workers - 1) / static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(n, chunk * static_cast<std::size_t>(w));
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      futures.push_back(std::async(std::launch::async, work, begin, end));
    }
    for (auto& f : futures) f.get();
  }

  std::vector<LinkPrediction> out;
  for (std::vector<LinkPrediction>& preds : per_doc) {
    out.insert(out.end(), preds.begin(), preds.end());
  }
  return out;
}

LinkerWeights weights_for(const RunConfig& config,
                          const EmbeddingProvider& provider) {
  if (config.weights_path.empty()) {
    LinkerWeights weights;
    weights.md = MdWeights::zeros(provider.dim());
    weights.head.gamma = config.linker.gamma;
    return weights;
  }
  require_file(config.weights_path, "weights file");
  LinkerWeights weights = load_linker_weights(config.weights_path, provider.dim());
  weights.head.gamma = config.linker.gamma;
  return weights;
}

}  // namespace

BuildResult cmd_build_index(const RunConfig& config) {
  require_file(config.catalog_path, "catalog file");
  if (config.provider.kind == "file") {
    require_file(config.provider.embeddings_path, "embeddings file");
  }
  if (config.index_path.empty()) {
    raise(Err::MissingFile, "index output path is not configured");
  }
  const auto start = std::chrono::steady_clock::now();

  RunManifest manifest = start_manifest(config, "build-index");
  add_input(manifest, config.catalog_path);
  add_input(manifest, config.provider.embeddings_path);

  const EntityCatalog catalog = load_catalog(config.catalog_path);
  const auto provider = make_provider(config.provider);

  std::vector<std::pair<std::string, VecF>> entries;
  for (const EntityRecord& rec : catalog.entities) {
    if (rec.added_at >= config.t1) continue;  // E_K only
    entries.emplace_back(rec.id,
                         encode_entity(*provider, rec.title, rec.description));
  }
  if (entries.empty()) {
    raise(Err::InvalidArgument, "no catalog entities precede t1");
  }
  DenseIndex index = DenseIndex::build(entries, config.metric, config.ann_mode,
                                       seeded_ann_params(config));
  fs::create_directories(fs::path(config.index_path).parent_path().empty()
                             ? "."
                             : fs::path(config.index_path).parent_path().string());
  index.save(config.index_path);

  manifest.counters.push_back(
      {"indexed_entities", seconds_since(start), static_cast<std::int64_t>(entries.size())});
  write_manifest(manifest, out_path(config, "manifest_build.json"));

  return {entries.size(), config.index_path};
}

AdaptResult cmd_adapt(const RunConfig& config) {
  require_file(config.documents_path, "documents file");
  require_file(config.catalog_path, "catalog file");
  require_file(config.index_path, "built index");
  const auto start = std::chrono::steady_clock::now();

  RunManifest manifest = start_manifest(config, "adapt");
  add_input(manifest, config.documents_path);
  add_input(manifest, config.catalog_path);
  add_input(manifest, config.index_path);
  add_input(manifest, config.weights_path);

  auto [docs, catalog] = load_corpus(config.documents_path, config.catalog_path);
  const SplitSet splits =
      temporal_split(docs, catalog, config.t1, config.t2,
                     config.adapt_fraction, config.dev_fraction, config.seed);
  DenseIndex index = DenseIndex::load(config.index_path);
  const auto provider = make_provider(config.provider);
  const LinkerWeights weights = weights_for(config, *provider);

  AdaptResult result;
  result.index_size_before = index.size();

  const DiscoveryResult discovery =
      discover(splits.adapt, *provider, weights.md, weights.pooler,
               config.linker, index, config.discovery, &splits);
  result.report = discovery.report;

  std::vector<IndexEntryDraft> drafts;
  for (const Cluster& cluster : discovery.clusters) {
    if (cluster.status != ClusterStatus::unknown) continue;
    if (cluster.member_ids.size() <
        static_cast<std::size_t>(config.discovery.min_cluster_size)) {
      continue;
    }
    if (config.indexing_mode == IndexingMode::cluster) {
      drafts.push_back(index_cluster(cluster, discovery.pool, splits.adapt,
                                     *provider, config.max_context_chars));
    } else {
      auto per_mention =
          index_mentions(cluster, discovery.pool, splits.adapt, *provider);
      drafts.insert(drafts.end(), per_mention.begin(), per_mention.end());
    }
  }

  merge_drafts(index, drafts, catalog, config.t2);
  result.drafts = drafts.size();
  result.index_size_after = index.size();

  result.adapted_index_file = out_path(config, "index_adapted.edix");
  index.save(result.adapted_index_file);
  result.clusters_file = out_path(config, "clusters.jsonl");
  io::write_text_file(result.clusters_file,
                      serialize_clusters(discovery.clusters, discovery.pool));
  result.drafts_file = out_path(config, "drafts.jsonl");
  io::write_text_file(result.drafts_file, serialize_drafts(drafts));
  result.draft_vectors_file = out_path(config, "drafts.edem");
  write_draft_vectors(result.draft_vectors_file, drafts);

  ordered_json report_json;
  report_json["mentions"] = result.report.mentions;
  report_json["clusters"] = result.report.clusters;
  report_json["known_clusters"] = result.report.known_clusters;
  report_json["unknown_clusters"] = result.report.unknown_clusters;
  report_json["drafts"] = result.drafts;
  report_json["index_size_before"] = result.index_size_before;
  report_json["index_size_after"] = result.index_size_after;
  if (result.report.gold) {
    const auto& g = *result.report.gold;
    report_json["gold"] = {
        {"cluster_precision_unknown", g.cluster_precision_unknown},
        {"cluster_recall_unknown", g.cluster_recall_unknown},
        {"cluster_precision_known", g.cluster_precision_known},
        {"cluster_recall_known", g.cluster_recall_known},
        {"unknown_entities_in_pool", g.unknown_entities_in_pool},
        {"unknown_entities_discovered", g.unknown_entities_discovered},
        {"entity_recall_unknown", g.entity_recall_unknown},
        {"nmi", g.nmi}};
  }
  io::write_text_file(out_path(config, "discovery_report.json"),
                      report_json.dump(2) + "\n");

  manifest.counters.push_back({"mentions", seconds_since(start),
                               static_cast<std::int64_t>(result.report.mentions)});
  manifest.counters.push_back(
      {"drafts", seconds_since(start), static_cast<std::int64_t>(result.drafts)});
  write_manifest(manifest, out_path(config, "manifest_adapt.json"));
  return result;
}

namespace {

// Rebuilds the synthetic-id -> gold-label association from the clusters
// and drafts artifacts plus the adaptation split's gold labels.
GoldAssociation association_from_artifacts(const RunConfig& config,
                                           const SplitSet& splits) {
  const std::string clusters_path =
      (fs::path(config.out_dir) / "clusters.jsonl").string();
  const std::string drafts_path =
      (fs::path(config.out_dir) / "drafts.jsonl").string();
  if (!fs::exists(clusters_path) || !fs::exists(drafts_path)) {
    return {};
  }

  std::map<std::pair<std::string, Span>, std::string> gold_index;
  for (const Document& doc : splits.adapt.docs) {
    for (const GoldMention& gm : doc.gold_mentions) {
      gold_index.emplace(std::make_pair(doc.id, gm.span), gm.entity_id);
    }
  }

  // cluster id -> member labels in serialization order (absent = unlabeled).
  std::map<int, std::vector<std::optional<std::string>>> members;
  {
    const std::string text = io::read_text_file(clusters_path);
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t next = text.find('\n', pos);
      if (next == std::string::npos) next = text.size();
      const std::string line = text.substr(pos, next - pos);
      pos = next + 1;
      if (line.empty()) continue;
      const ordered_json j = ordered_json::parse(line);
      const int cid = j.at("cluster_id").get<int>();
      for (const auto& mj : j.at("members")) {
        Span span{mj.at("start").get<std::int64_t>(),
                  mj.at("end").get<std::int64_t>()};
        auto it = gold_index.find({mj.at("doc").get<std::string>(), span});
        members[cid].push_back(it == gold_index.end()
                                   ? std::optional<std::string>{}
                                   : std::optional<std::string>{it->second});
      }
    }
  }

  std::map<std::string, std::vector<std::string>> synthetic_members;
  {
    const std::string text = io::read_text_file(drafts_path);
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t next = text.find('\n', pos);
      if (next == std::string::npos) next = text.size();
      const std::string line = text.substr(pos, next - pos);
      pos = next + 1;
      if (line.empty()) continue;
      const ordered_json j = ordered_json::parse(line);
      const std::string id = j.at("id").get<std::string>();
      const int cid = j.at("cluster_id").get<int>();
      auto it = members.find(cid);
      if (it == members.end()) continue;
      // Mention-based ids carry the member ordinal: "EU:{c}:{m}".
      const std::size_t second_colon = id.find(':', 3);
      if (second_colon != std::string::npos) {
        const std::size_t ordinal = std::stoul(id.substr(second_colon + 1));
        if (ordinal < it->second.size() && it->second[ordinal]) {
          synthetic_members[id].push_back(*it->second[ordinal]);
        }
      } else {
        for (const auto& label : it->second) {
          if (label) synthetic_members[id].push_back(*label);
        }
      }
    }
  }
  // Drafts with no labelled member cannot be associated; drop them.
  for (auto it = synthetic_members.begin(); it != synthetic_members.end();) {
    it = it->second.empty() ? synthetic_members.erase(it) : std::next(it);
  }
  if (synthetic_members.empty()) return {};
  return associate_clusters(synthetic_members);
}

}  // namespace

EvaluateResult cmd_evaluate(const RunConfig& config,
                            const EvaluateOptions& options) {
  require_file(config.documents_path, "documents file");
  require_file(config.catalog_path, "catalog file");
  const auto start = std::chrono::steady_clock::now();

  RunManifest manifest = start_manifest(config, "evaluate");
  add_input(manifest, config.documents_path);
  add_input(manifest, config.catalog_path);

  auto [docs, catalog] = load_corpus(config.documents_path, config.catalog_path);
  const SplitSet splits =
      temporal_split(docs, catalog, config.t1, config.t2,
                     config.adapt_fraction, config.dev_fraction, config.seed);

  std::string index_path = options.index_override;
  if (index_path.empty()) {
    const std::string adapted =
        (fs::path(config.out_dir) / "index_adapted.edix").string();
    index_path = fs::exists(adapted) ? adapted : config.index_path;
  }
  require_file(index_path, "index");
  add_input(manifest, index_path);
  const DenseIndex index = DenseIndex::load(index_path);

  const auto provider = make_provider(config.provider);
  const LinkerWeights weights = weights_for(config, *provider);

  std::vector<LinkPrediction> predictions;
  if (!options.predictions_path.empty()) {
    require_file(options.predictions_path, "predictions file");
    predictions =
        parse_predictions(io::read_text_file(options.predictions_path));
  } else {
    predictions = link_documents(splits.test, *provider, weights, index,
                                 config.linker, config.threads,
                                 options.gold_spans);
  }

  const GoldAssociation assoc = association_from_artifacts(config, splits);

  SubsetContext ctx;
  ctx.known_entities = splits.known_entities;
  ctx.unknown_entities = splits.unknown_entities;
  for (const Document& doc : splits.adapt.docs) {
    for (const GoldMention& gm : doc.gold_mentions) {
      ctx.adapt_entities.insert(gm.entity_id);
    }
  }
  for (const auto& [gold_id, synthetic_ids] : assoc.gold_to_synthetic) {
    ctx.discovered_entities.insert(gold_id);
  }

  EvaluateResult result;
  result.report = evaluate_predictions(predictions, splits.test, assoc, ctx,
                                       mention_frequency_table(splits.train));

  result.predictions_file = out_path(config, "predictions.jsonl");
  io::write_text_file(result.predictions_file,
                      serialize_predictions(predictions));
  result.report_file = out_path(config, "report.json");
  io::write_text_file(result.report_file, report_to_json(result.report));
  result.tsv_file = out_path(config, "report.tsv");
  io::write_text_file(result.tsv_file, bins_to_tsv(result.report.bins));

  manifest.counters.push_back({"test_documents", seconds_since(start),
                               static_cast<std::int64_t>(splits.test.size())});
  manifest.counters.push_back({"predictions", seconds_since(start),
                               static_cast<std::int64_t>(predictions.size())});
  write_manifest(manifest, out_path(config, "manifest_evaluate.json"));
  return result;
}

TuneResult cmd_tune(const RunConfig& config) {
  require_file(config.documents_path, "documents file");
  require_file(config.catalog_path, "catalog file");
  require_file(config.index_path, "built index");

  auto [docs, catalog] = load_corpus(config.documents_path, config.catalog_path);
  const SplitSet splits =
      temporal_split(docs, catalog, config.t1, config.t2,
                     config.adapt_fraction, config.dev_fraction, config.seed);
  if (splits.adapt_dev.empty()) {
    raise(Err::InvalidArgument,
          "tuning needs dev_fraction > 0 to materialize an adapt-dev split");
  }
  const DenseIndex index = DenseIndex::load(config.index_path);
  const auto provider = make_provider(config.provider);
  const LinkerWeights weights = weights_for(config, *provider);

  TuneGrids grids;
  grids.s_m = config.tune_s_m.expand();
  grids.delta = config.tune_delta.expand();
  grids.tau = config.tune_tau.expand();

  const TunedParams tuned =
      tune_thresholds(splits.adapt_dev, *provider, weights.md, weights.pooler,
                      config.linker, index, config.discovery, grids, splits);

  ordered_json j;
  j["s_m"] = tuned.s_m;
  j["delta"] = tuned.params.delta;
  j["tau"] = tuned.params.tau;
  io::write_text_file(out_path(config, "tuned_params.json"), j.dump(2) + "\n");

  return {tuned.s_m, tuned.params};
}

}  // namespace edin
