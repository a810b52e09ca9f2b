#pragma once

// End-to-end run: ingest -> dedup -> enrich -> networks -> htt -> sep ->
// portraits -> exports. Each stage turns upstream state into a JSON state
// plus a set of output files; both are cached under a key hashed from the
// stage's configuration and the digests of its inputs.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bibliograph/corpus.hpp"
#include "bibliograph/errors.hpp"
#include "bibliograph/export.hpp"
#include "bibliograph/graphclient.hpp"
#include "bibliograph/htt.hpp"
#include "bibliograph/network.hpp"
#include "bibliograph/portraits.hpp"
#include "bibliograph/sep.hpp"
#include "bibliograph/text.hpp"

namespace bibliograph::pipeline {

namespace fs = std::filesystem;

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"ingest", "dedup",     "enrich",    "networks",
                                              "htt",    "sep",       "portraits", "exports"};
  return names;
}

// Bumped when a module's output format or algorithm changes; part of every
// stage key so stale cache entries are never reused.
inline const std::map<std::string, std::string>& module_versions() {
  static const std::map<std::string, std::string> v{{"corpus", "1"}, {"graphclient", "1"}, {"network", "1"},
                                                    {"htt", "1"},    {"sep", "1"},         {"portraits", "1"},
                                                    {"pipeline", "1"}};
  return v;
}

// ---------------------------------------------------------------------------
// Configuration

struct InputSpec {
  fs::path path;
  Dialect dialect = Dialect::jsonl;
  std::optional<json> mapping;  // CSV column overrides
};

struct PipelineConfig {
  std::vector<InputSpec> inputs;

  std::optional<std::string> api_base;
  graphclient::ClientPolicy policy;
  bool drop_unmatched = false;

  std::vector<EntityUnit> network_units{EntityUnit::fos, EntityUnit::keyword, EntityUnit::country};
  std::size_t min_node_freq = 2;
  double min_edge_weight = 1.0;
  bool association_strength = false;

  EntityUnit htt_unit = EntityUnit::fos;
  htt::HttParams htt;
  sep::SepParams sep;

  std::optional<json> lexicon;  // principle overrides; defaults when absent
  std::vector<std::string> techniques;  // empty: level-1 FoS tags of the corpus
  std::vector<std::string> cohort_phrases = default_cohort_phrases();
  bool include_abstract_tagging = false;
  std::vector<portraits::EntityKind> rank_kinds{portraits::EntityKind::country, portraits::EntityKind::institution,
                                                portraits::EntityKind::venue, portraits::EntityKind::author,
                                                portraits::EntityKind::fos};
  std::size_t top_n = 10;
  int keyphrases = 20;

  fs::path out_dir = "out";
  std::optional<fs::path> cache_dir;
  std::uint64_t seed = 0;
  std::set<std::string> skip;

  portraits::PrincipleLexicon principle_lexicon() const {
    return lexicon ? portraits::lexicon_from_json(*lexicon) : portraits::PrincipleLexicon::defaults();
  }

  void validate() const {
    if (inputs.empty()) throw ConfigError("config lists no inputs");
    std::set<fs::path> seen;
    auto distinct = [&](const fs::path& p, const std::string& what) {
      auto key = fs::weakly_canonical(fs::absolute(p));
      if (!seen.insert(key).second) throw ConfigError(what + " path '" + p.string() + "' is used twice");
    };
    for (const auto& in : inputs) distinct(in.path, "input");
    distinct(out_dir, "output");
    if (cache_dir) distinct(*cache_dir, "cache");
    for (const auto& s : skip) {
      if (std::find(stage_names().begin(), stage_names().end(), s) == stage_names().end()) {
        throw ConfigError("unknown stage '" + s + "' in skip list");
      }
      if (s == "ingest" || s == "dedup") throw ConfigError("stage '" + s + "' cannot be skipped");
    }
    if (network_units.empty() && !skip.count("networks")) throw ConfigError("network.units is empty");
    if (min_node_freq < 1 || !(min_edge_weight >= 1.0)) throw ConfigError("network thresholds must be >= 1");
    if (keyphrases <= 0) throw ConfigError("portraits.keyphrases must be positive");
    if (cohort_phrases.empty()) throw ConfigError("portraits.cohort_phrases is empty");
    policy.validate();
    htt.validate();
    sep.validate();
    principle_lexicon();
  }
};

// Everything except where files go; this is what the config hash covers.
inline json config_to_json(const PipelineConfig& c) {
  json inputs = json::array();
  for (const auto& in : c.inputs) {
    json j{{"path", in.path.generic_string()}, {"dialect", to_string(in.dialect)}};
    if (in.mapping) j["mapping"] = *in.mapping;
    inputs.push_back(std::move(j));
  }
  json units = json::array();
  for (auto u : c.network_units) units.push_back(to_string(u));
  json kinds = json::array();
  for (auto k : c.rank_kinds) kinds.push_back(portraits::to_string(k));
  json htt = htt::params_to_json(c.htt);
  htt["unit"] = to_string(c.htt_unit);
  json sep = sep::params_to_json(c.sep);
  sep.erase("seed");
  return {
      {"inputs", inputs},
      {"api",
       {{"base", c.api_base ? json(*c.api_base) : json(nullptr)},
        {"policy", graphclient::policy_to_json(c.policy)},
        {"drop_unmatched", c.drop_unmatched}}},
      {"network",
       {{"units", units},
        {"min_node_freq", c.min_node_freq},
        {"min_edge_weight", c.min_edge_weight},
        {"association_strength", c.association_strength}}},
      {"htt", htt},
      {"sep", sep},
      {"portraits",
       {{"lexicon", portraits::lexicon_to_json(c.principle_lexicon())},
        {"techniques", c.techniques},
        {"cohort_phrases", c.cohort_phrases},
        {"include_abstract_tagging", c.include_abstract_tagging},
        {"rank_kinds", kinds},
        {"top_n", c.top_n},
        {"keyphrases", c.keyphrases}}},
      {"seed", c.seed},
      {"skip", c.skip},
  };
}

// Relative input paths resolve against `base` (the config file's directory).
inline PipelineConfig config_from_json(const json& j, const fs::path& base = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
  };
  try {
    for (const auto& in : j.value("inputs", json::array())) {
      InputSpec s;
      s.path = resolve(in.at("path").get<std::string>());
      s.dialect = parse_dialect(in.value("dialect", std::string("jsonl")));
      if (in.contains("mapping")) {
        if (s.dialect == Dialect::jsonl) throw ConfigError("the jsonl dialect takes no column mapping");
        mapping_from_json(s.dialect, in["mapping"]);
        s.mapping = in["mapping"];
      }
      c.inputs.push_back(std::move(s));
    }
    if (auto it = j.find("api"); it != j.end()) {
      if (it->contains("base") && !(*it)["base"].is_null()) c.api_base = (*it)["base"].get<std::string>();
      if (it->contains("policy")) c.policy = graphclient::policy_from_json((*it)["policy"]);
      c.drop_unmatched = it->value("drop_unmatched", c.drop_unmatched);
    }
    if (auto it = j.find("network"); it != j.end()) {
      if (it->contains("units")) {
        c.network_units.clear();
        for (const auto& u : (*it)["units"]) c.network_units.push_back(parse_entity_unit(u.get<std::string>()));
      }
      c.min_node_freq = it->value("min_node_freq", c.min_node_freq);
      c.min_edge_weight = it->value("min_edge_weight", c.min_edge_weight);
      c.association_strength = it->value("association_strength", c.association_strength);
    }
    if (auto it = j.find("htt"); it != j.end()) {
      c.htt = htt::params_from_json(*it);
      if (it->contains("unit")) c.htt_unit = parse_entity_unit((*it)["unit"].get<std::string>());
    }
    if (auto it = j.find("sep"); it != j.end()) c.sep = sep::params_from_json(*it);
    if (auto it = j.find("portraits"); it != j.end()) {
      if (it->contains("lexicon")) c.lexicon = (*it)["lexicon"];
      c.techniques = it->value("techniques", c.techniques);
      c.cohort_phrases = it->value("cohort_phrases", c.cohort_phrases);
      c.include_abstract_tagging = it->value("include_abstract_tagging", c.include_abstract_tagging);
      if (it->contains("rank_kinds")) {
        c.rank_kinds.clear();
        for (const auto& k : (*it)["rank_kinds"]) c.rank_kinds.push_back(portraits::parse_entity_kind(k.get<std::string>()));
      }
      c.top_n = it->value("top_n", c.top_n);
      c.keyphrases = it->value("keyphrases", c.keyphrases);
    }
    if (j.contains("out_dir")) c.out_dir = resolve(j["out_dir"].get<std::string>());
    if (j.contains("cache_dir") && !j["cache_dir"].is_null()) c.cache_dir = resolve(j["cache_dir"].get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.skip = j.value("skip", c.skip);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.sep.seed = c.seed;
  return c;
}

inline PipelineConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j, path.parent_path());
}

inline std::string config_hash(const PipelineConfig& c) {
  return text::hex64(text::fnv1a64(config_to_json(c).dump()));
}

// Explicit setting, else BIBLIOGRAPH_CACHE_DIR, else no stage cache.
inline std::optional<fs::path> resolve_cache_dir(const PipelineConfig& c) {
  if (c.cache_dir) return c.cache_dir;
  if (const char* env = std::getenv("BIBLIOGRAPH_CACHE_DIR"); env && *env) return fs::path(env);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Stage results and their cache

struct StageOutput {
  json state = json::object();
  std::map<std::string, std::string> files;  // path relative to the output directory -> content
};

namespace detail {

// States pass through a dump/parse round trip whether or not they came from
// the cache, so a cache hit hands downstream exactly what a fresh run would.
inline std::string canonical_dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace detail

class StageCache {
 public:
  explicit StageCache(std::optional<fs::path> dir) : dir_(std::move(dir)) {}

  bool enabled() const { return dir_.has_value(); }

  std::optional<StageOutput> load(const std::string& stage, const std::string& key) const {
    if (!dir_) return std::nullopt;
    auto entry = *dir_ / (stage + "-" + key);
    std::error_code ec;
    if (!fs::is_regular_file(entry / "index.json", ec)) return std::nullopt;
    try {
      auto index = json::parse(text::read_file(entry / "index.json"));
      StageOutput out;
      out.state = json::parse(text::read_file(entry / "state.json"));
      for (const auto& rel : index.at("files")) {
        auto name = rel.get<std::string>();
        out.files[name] = text::read_file(entry / "files" / name);
      }
      return out;
    } catch (const std::exception&) {
      return std::nullopt;  // a damaged entry is a miss
    }
  }

  void store(const std::string& stage, const std::string& key, const StageOutput& out) const {
    if (!dir_) return;
    static thread_local std::mt19937_64 rng(std::random_device{}());
    auto final_dir = *dir_ / (stage + "-" + key);
    auto tmp = *dir_ / (stage + "-" + key + ".tmp" + std::to_string(rng()));
    json index{{"stage", stage}, {"files", json::array()}};
    for (const auto& [rel, content] : out.files) {
      text::write_file(tmp / "files" / rel, content);
      index["files"].push_back(rel);
    }
    text::write_file(tmp / "state.json", detail::canonical_dump(out.state));
    text::write_file(tmp / "index.json", index.dump());
    std::error_code ec;
    fs::rename(tmp, final_dir, ec);
    if (ec) fs::remove_all(tmp, ec);  // another run stored it first
  }

 private:
  std::optional<fs::path> dir_;
};

// ---------------------------------------------------------------------------
// Manifest

struct StageRecord {
  std::string name;
  double seconds = 0.0;
  bool cache_hit = false;
  std::vector<std::string> outputs;  // relative to the output directory
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<StageRecord> stages;
  std::vector<std::string> skipped;
  std::optional<std::string> failed_stage;
  std::string error;

  std::vector<std::string> files() const {
    std::vector<std::string> out;
    for (const auto& s : stages) out.insert(out.end(), s.outputs.begin(), s.outputs.end());
    return out;
  }
};

inline constexpr const char* kManifestName = "manifest.json";

inline json manifest_to_json(const RunManifest& m, bool with_timings = true) {
  json stages = json::array();
  for (const auto& s : m.stages) {
    json j{{"name", s.name}, {"outputs", s.outputs}};
    if (with_timings) {
      j["seconds"] = s.seconds;
      j["cache_hit"] = s.cache_hit;
    }
    stages.push_back(std::move(j));
  }
  json versions(module_versions());
  return {{"config_hash", m.config_hash},
          {"seed", m.seed},
          {"module_versions", versions},
          {"stages", stages},
          {"skipped", m.skipped},
          {"failed_stage", m.failed_stage ? json(*m.failed_stage) : json(nullptr)},
          {"error", m.error}};
}

// The manifest with timings and cache flags removed; equal across
// deterministic reruns.
inline json strip_timings(json manifest) {
  for (auto& s : manifest.at("stages")) {
    s.erase("seconds");
    s.erase("cache_hit");
  }
  return manifest;
}

enum class FailureKind { config, input, stage };

class StageFailure : public Error {
 public:
  StageFailure(std::string stage, FailureKind kind, const std::string& what, RunManifest manifest)
      : Error("stage '" + stage + "' failed: " + what),
        stage_(std::move(stage)),
        kind_(kind),
        manifest_(std::move(manifest)) {}

  const std::string& stage() const { return stage_; }
  FailureKind kind() const { return kind_; }
  const RunManifest& manifest() const { return manifest_; }

 private:
  std::string stage_;
  FailureKind kind_;
  RunManifest manifest_;
};

// ---------------------------------------------------------------------------
// Stage bodies

namespace detail {

inline json corpus_to_state(const Corpus& c) {
  json arr = json::array();
  for (const auto& r : c) arr.push_back(record_to_json(r));
  return arr;
}

inline Corpus corpus_from_state(const json& arr) {
  Corpus c;
  for (const auto& j : arr) c.push_back(record_from_json(j));
  return c;
}

inline std::string pretty(const json& j) { return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n"; }

inline StageOutput run_ingest(const PipelineConfig& c) {
  StageOutput out;
  json batches = json::array(), reports = json::array();
  for (const auto& in : c.inputs) {
    std::optional<CsvMapping> mapping;
    if (in.mapping) mapping = mapping_from_json(in.dialect, *in.mapping);
    auto parsed = parse_records(in.path, in.dialect, mapping);
    batches.push_back(corpus_to_state(parsed.records));
    json report = skip_report_to_json(parsed);
    report["input"] = in.path.filename().generic_string();
    report["dialect"] = to_string(in.dialect);
    reports.push_back(std::move(report));
  }
  out.state = {{"batches", batches}};
  out.files["ingest/skipped.json"] = pretty(reports);
  return out;
}

inline StageOutput run_dedup(const json& ingest_state) {
  std::vector<std::vector<BibRecord>> batches;
  for (const auto& b : ingest_state.at("batches")) batches.push_back(corpus_from_state(b));
  auto merged = merge_dedup(batches);
  StageOutput out;
  out.state = {{"corpus", corpus_to_state(merged.corpus)}};
  out.files["corpus/merged.jsonl"] = corpus_to_jsonl(merged.corpus);
  out.files["corpus/ingest_report.json"] = pretty(ingest_report_to_json(merged.report));
  return out;
}

inline StageOutput run_enrich(const PipelineConfig& c, const json& corpus_state,
                              const std::optional<graphclient::Fetcher>& fetcher,
                              const std::optional<fs::path>& cache_dir) {
  auto corpus = corpus_from_state(corpus_state.at("corpus"));
  auto fetch = fetcher ? *fetcher : graphclient::http_fetcher(graphclient::resolve_api_base(c.api_base), c.policy.timeout);
  std::optional<graphclient::ResponseCache> responses;
  if (cache_dir) responses.emplace(*cache_dir / "responses");
  auto res = graphclient::enrich_corpus(corpus, c.policy, fetch, responses ? &*responses : nullptr, c.drop_unmatched);
  StageOutput out;
  out.state = {{"corpus", corpus_to_state(res.corpus)}};
  out.files["corpus/enriched.jsonl"] = corpus_to_jsonl(res.corpus);
  // Retry and request counts depend on the server's mood; keep them out of
  // the deterministic outputs.
  json report = graphclient::enrichment_report_to_json(res.report);
  report.erase("retries");
  report.erase("requests");
  out.files["corpus/enrichment_report.json"] = pretty(report);
  return out;
}

inline CoocGraph unit_graph(const PipelineConfig& c, const Corpus& corpus, EntityUnit unit) {
  auto g = build_cooc_graph(corpus, unit, c.min_node_freq, c.min_edge_weight);
  return c.association_strength ? association_strength(g) : g;
}

inline StageOutput run_networks(const PipelineConfig& c, const json& corpus_state) {
  auto corpus = corpus_from_state(corpus_state.at("corpus"));
  StageOutput out;
  for (auto unit : c.network_units) {
    auto name = to_string(unit);
    auto g = unit_graph(c, corpus, unit);
    // FoS tags only exist after enrichment; an empty network is written as such.
    Partition p = g.empty() ? Partition{} : louvain_partition(g, c.seed);
    auto view = exporter::view_of(g, &p);
    out.state[name] = exporter::view_to_json(view);
    out.files["networks/" + name + "_graph.json"] = pretty(graph_to_json(g));
    out.files["networks/" + name + "_partition.json"] = pretty(partition_to_json(g, p));
    out.files["networks/" + name + "_nodes.csv"] = exporter::nodes_to_csv(view);
    out.files["networks/" + name + "_edges.csv"] = exporter::edges_to_csv(view);
  }
  return out;
}

// An empty network (e.g. FoS tags without enrichment) gives an empty tree.
inline StageOutput run_htt(const PipelineConfig& c, const json& corpus_state) {
  auto corpus = corpus_from_state(corpus_state.at("corpus"));
  auto g = unit_graph(c, corpus, c.htt_unit);
  htt::TopicTree tree = g.empty() ? htt::TopicTree{} : htt::build_topic_tree(g, c.htt);
  StageOutput out;
  json j = htt::tree_to_json(tree);
  j["unit"] = to_string(c.htt_unit);
  out.files["htt/tree.json"] = pretty(j);
  out.files["htt/tree.csv"] = htt::tree_to_csv(tree);
  return out;
}

inline StageOutput run_sep_stage(const PipelineConfig& c, const json& corpus_state) {
  auto corpus = corpus_from_state(corpus_state.at("corpus"));
  auto params = c.sep;
  params.seed = c.seed;
  auto eg = sep::run_sep(corpus, params);
  auto rows = sep::export_sep_view(eg);
  StageOutput out;
  out.state = {{"evolution", exporter::view_to_json(exporter::view_of(rows))}};
  out.files["sep/evolution.json"] = pretty(sep::evolution_to_json(eg));
  out.files["sep/view.csv"] = sep::sep_view_to_csv(rows);
  return out;
}

inline StageOutput run_portraits(const PipelineConfig& c, const json& corpus_state) {
  namespace pr = portraits;
  auto corpus = corpus_from_state(corpus_state.at("corpus"));
  auto lex = c.principle_lexicon();
  StageOutput out;
  json summary{{"records", corpus.size()}};

  json shares = json::object();
  for (auto kind : c.rank_kinds) {
    auto t = pr::rank_entities(corpus, kind, c.top_n);
    out.files["portraits/rank_" + pr::to_string(kind) + ".csv"] = pr::rank_table_to_csv(t, false);
    shares[pr::to_string(kind)] = {{"listed_share", t.top_share}, {"incidences", t.incidences}};
  }
  summary["rankings"] = shares;
  out.files["portraits/trend.csv"] = pr::trend_to_csv(pr::publication_trend(corpus));

  auto techniques = c.techniques.empty() ? pr::default_techniques(corpus) : c.techniques;
  summary["techniques"] = techniques;
  if (!techniques.empty()) {
    auto m = pr::build_interplay(corpus, lex, techniques, c.include_abstract_tagging);
    out.files["portraits/interplay_counts.csv"] = pr::interplay_counts_to_csv(m);
    out.files["portraits/interplay_shares.csv"] = pr::interplay_shares_to_csv(m);
    out.files["portraits/chord.csv"] = pr::chord_table_to_csv(m);
  }

  auto cohort = filter_core_cohort(corpus, c.cohort_phrases);
  summary["cohort"] = cohort.size();
  out.files["portraits/cohort.jsonl"] = corpus_to_jsonl(cohort);
  std::vector<pr::Keyphrase> phrases;
  if (!cohort.empty()) phrases = pr::extract_keyphrases(cohort, c.keyphrases);
  out.files["portraits/keyphrases.csv"] = pr::keyphrases_to_csv(phrases);
  out.files["portraits/summary.json"] = pretty(summary);
  return out;
}

inline StageOutput run_exports(const std::optional<json>& networks_state, const std::optional<json>& sep_state) {
  StageOutput out;
  if (networks_state) {
    for (const auto& [unit, view_json] : networks_state->items()) {
      auto view = exporter::view_from_json(view_json);
      out.files["graphs/" + unit + ".gexf"] = exporter::gexf_to_string(view);
      out.files["graphs/" + unit + ".graphml"] = exporter::graphml_to_string(view);
    }
  }
  if (sep_state) {
    auto view = exporter::view_from_json(sep_state->at("evolution"));
    out.files["graphs/evolution.gexf"] = exporter::gexf_to_string(view);
    out.files["graphs/evolution.graphml"] = exporter::graphml_to_string(view);
  }
  return out;
}

// Files listed by a previous manifest are ours to replace. Anything else in
// a non-empty output directory is left alone and refused.
inline void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  if (!fs::exists(dir, ec)) {
    fs::create_directories(dir);
    return;
  }
  if (!fs::is_directory(dir, ec)) throw ConfigError("output path '" + dir.string() + "' is not a directory");
  if (fs::is_empty(dir, ec)) return;
  auto manifest_path = dir / kManifestName;
  if (!fs::is_regular_file(manifest_path, ec)) {
    throw ConfigError("output directory '" + dir.string() + "' is not empty and holds no manifest");
  }
  json old;
  try {
    old = json::parse(text::read_file(manifest_path));
    for (const auto& s : old.at("stages")) {
      for (const auto& f : s.at("outputs")) fs::remove(dir / f.get<std::string>(), ec);
    }
  } catch (const json::exception& e) {
    throw ConfigError("cannot read previous manifest in '" + dir.string() + "': " + e.what());
  }
  fs::remove(manifest_path, ec);
  // Drop directories the old run created and left empty.
  std::vector<fs::path> dirs;
  for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it) {
    if (it->is_directory()) dirs.push_back(it->path());
  }
  std::sort(dirs.rbegin(), dirs.rend());
  for (const auto& d : dirs) {
    if (fs::is_empty(d, ec)) fs::remove(d, ec);
  }
}

inline std::string digest(const json& state) { return text::hex64(text::fnv1a64(canonical_dump(state))); }

}  // namespace detail

struct RunOptions {
  std::optional<graphclient::Fetcher> fetcher;  // replaces the HTTP client, e.g. in tests
};

inline RunManifest run_pipeline(const PipelineConfig& config, const RunOptions& options = {}) {
  config.validate();
  detail::prepare_out_dir(config.out_dir);
  const auto cache_dir = resolve_cache_dir(config);
  StageCache cache(cache_dir);

  RunManifest manifest;
  manifest.config_hash = config_hash(config);
  manifest.seed = config.seed;
  const json cfg = config_to_json(config);

  auto write_manifest = [&] {
    text::write_file(config.out_dir / kManifestName, detail::pretty(manifest_to_json(manifest)));
  };

  std::map<std::string, json> states;
  std::map<std::string, std::string> digests;

  // Runs one stage: key from its config section and upstream digests, cache
  // lookup, compute on miss, files written in path order.
  auto stage = [&](const std::string& name, const json& params, const std::vector<std::string>& upstream,
                   const std::function<StageOutput()>& compute) {
    if (config.skip.count(name)) {
      manifest.skipped.push_back(name);
      return;
    }
    auto start = std::chrono::steady_clock::now();
    StageRecord rec;
    rec.name = name;
    try {
      std::string key_src = name + "\n" + json(module_versions()).dump() + "\n" + detail::canonical_dump(params);
      for (const auto& u : upstream) key_src += "\n" + u + "=" + digests.at(u);
      auto key = text::hex64(text::fnv1a64(key_src));
      auto hit = cache.load(name, key);
      StageOutput out;
      if (hit) {
        out = std::move(*hit);
        rec.cache_hit = true;
      } else {
        out = compute();
        out.state = json::parse(detail::canonical_dump(out.state));
        cache.store(name, key, out);
      }
      for (const auto& [rel, content] : out.files) {
        text::write_file(config.out_dir / rel, content);
        rec.outputs.push_back(rel);
      }
      digests[name] = detail::digest(out.state);
      states[name] = std::move(out.state);
    } catch (const std::exception& e) {
      FailureKind kind = FailureKind::stage;
      if (dynamic_cast<const ConfigError*>(&e)) {
        kind = FailureKind::config;
      } else if (name == "ingest" && (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e))) {
        kind = FailureKind::input;
      }
      manifest.failed_stage = name;
      manifest.error = e.what();
      write_manifest();
      throw StageFailure(name, kind, e.what(), manifest);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.stages.push_back(std::move(rec));
  };

  json input_digests = json::array();
  for (const auto& in : config.inputs) {
    json d{{"dialect", to_string(in.dialect)}, {"mapping", in.mapping ? *in.mapping : json(nullptr)}};
    std::error_code ec;
    if (fs::is_regular_file(in.path, ec)) d["digest"] = text::hex64(text::fnv1a64(text::read_file(in.path)));
    d["name"] = in.path.filename().generic_string();
    input_digests.push_back(std::move(d));
  }
  stage("ingest", input_digests, {}, [&] { return detail::run_ingest(config); });
  stage("dedup", json::object(), {"ingest"}, [&] { return detail::run_dedup(states.at("ingest")); });
  stage("enrich", cfg.at("api"), {"dedup"}, [&] {
    return detail::run_enrich(config, states.at("dedup"), options.fetcher, cache_dir);
  });
  const std::string corpus_stage = states.count("enrich") ? "enrich" : "dedup";
  const json network_cfg{{"network", cfg.at("network")}, {"seed", config.seed}};
  stage("networks", network_cfg, {corpus_stage}, [&] { return detail::run_networks(config, states.at(corpus_stage)); });
  stage("htt", {{"htt", cfg.at("htt")}, {"network", cfg.at("network")}}, {corpus_stage},
        [&] { return detail::run_htt(config, states.at(corpus_stage)); });
  stage("sep", {{"sep", cfg.at("sep")}, {"seed", config.seed}}, {corpus_stage},
        [&] { return detail::run_sep_stage(config, states.at(corpus_stage)); });
  stage("portraits", cfg.at("portraits"), {corpus_stage},
        [&] { return detail::run_portraits(config, states.at(corpus_stage)); });
  std::vector<std::string> export_inputs;
  for (const char* s : {"networks", "sep"}) {
    if (states.count(s)) export_inputs.push_back(s);
  }
  stage("exports", json::object(), export_inputs, [&] {
    std::optional<json> nets, evo;
    if (states.count("networks")) nets = states.at("networks");
    if (states.count("sep")) evo = states.at("sep");
    return detail::run_exports(nets, evo);
  });

  write_manifest();
  return manifest;
}

// Files under `dir` (relative, generic form) other than the manifest.
inline std::vector<std::string> list_outputs(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto rel = fs::relative(e.path(), dir).generic_string();
    if (rel != kManifestName) out.push_back(rel);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace bibliograph::pipeline
