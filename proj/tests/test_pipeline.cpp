#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>

#include "bibliograph/pipeline.hpp"
#include "bibliograph/synthetic.hpp"
#include "bundle.hpp"
#include "support.hpp"

using namespace bibliograph;
using namespace bibliograph::pipeline;
using testing_support::TempDir;

namespace {

class Pipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    ::unsetenv("BIBLIOGRAPH_CACHE_DIR");
    ::unsetenv("BIBLIOGRAPH_API_BASE");
  }

  PipelineConfig fast_config(const std::filesystem::path& out) {
    auto c = bundle::config(*server_, out);
    c.policy.requests_per_second = 2000.0;
    return c;
  }

  std::unique_ptr<mock::MockApiServer> server_ = bundle::serve();
  TempDir tmp_{"bibliograph-pipeline"};
};

std::map<std::string, std::string> read_tree(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& rel : list_outputs(dir)) out[rel] = text::read_file(dir / rel);
  return out;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<std::string> stage_list(const RunManifest& m) {
  std::vector<std::string> out;
  for (const auto& s : m.stages) out.push_back(s.name);
  return out;
}

}  // namespace

TEST(Bundle, FilesMatchGenerator) {
  for (const auto& [name, content] : synthetic::bundle_files()) {
    EXPECT_EQ(text::read_file(bundle::dir() / name), content) << name;
  }
  auto b = synthetic::synthetic_bibliography(synthetic::kBundleSeed);
  EXPECT_EQ(merge_dedup({b.scopus_batch, b.wos_batch}).corpus.size(), 500u);
}

TEST_F(Pipeline, FullRunHasEightStagesAndEveryOutput) {
  auto m = run_pipeline(fast_config(tmp_ / "out"));
  EXPECT_EQ(stage_list(m), stage_names());
  EXPECT_TRUE(m.skipped.empty());
  EXPECT_FALSE(m.failed_stage);
  for (const auto& s : m.stages) EXPECT_FALSE(s.outputs.empty()) << s.name;
  // Manifest completeness: listed == present.
  EXPECT_EQ(sorted(m.files()), list_outputs(tmp_ / "out"));
  auto on_disk = json::parse(text::read_file(tmp_ / "out" / kManifestName));
  EXPECT_EQ(strip_timings(on_disk), strip_timings(manifest_to_json(m)));

  auto report = json::parse(text::read_file(tmp_ / "out" / "corpus" / "enrichment_report.json"));
  EXPECT_EQ(report["submitted"], 500);
  EXPECT_EQ(report["matched"].get<std::size_t>() + report["missing"].size(), 500u);
  auto tree = htt::tree_from_json(json::parse(text::read_file(tmp_ / "out" / "htt" / "tree.json")));
  EXPECT_GE(tree.nodes.size(), 2u);
  auto gexf = exporter::read_gexf(tmp_ / "out" / "graphs" / "evolution.gexf");
  EXPECT_TRUE(gexf.directed);
  EXPECT_FALSE(gexf.nodes.empty());
}

TEST_F(Pipeline, EnrichDisabledGivesSevenStagesAndNoCalls) {
  auto c = fast_config(tmp_ / "out");
  c.skip = {"enrich"};
  std::atomic<int> calls{0};
  RunOptions opts;
  opts.fetcher = [&](const std::string&) {
    ++calls;
    return graphclient::HttpResponse{404, "", ""};
  };
  auto m = run_pipeline(c, opts);
  EXPECT_EQ(m.stages.size(), 7u);
  EXPECT_EQ(m.skipped, std::vector<std::string>{"enrich"});
  EXPECT_EQ(calls.load(), 0);
  EXPECT_EQ(server_->request_count(), 0u);
  EXPECT_EQ(sorted(m.files()), list_outputs(tmp_ / "out"));
}

TEST_F(Pipeline, SecondRunServedFromCache) {
  auto c = fast_config(tmp_ / "a");
  c.cache_dir = tmp_ / "cache";
  auto first = run_pipeline(c);
  for (const auto& s : first.stages) EXPECT_FALSE(s.cache_hit) << s.name;
  auto requests = server_->request_count();
  EXPECT_GT(requests, 0u);

  c.out_dir = tmp_ / "b";
  auto second = run_pipeline(c);
  double cached_seconds = 0;
  for (const auto& s : second.stages) {
    EXPECT_TRUE(s.cache_hit) << s.name;
    cached_seconds += s.seconds;
  }
  EXPECT_EQ(server_->request_count(), requests);  // nothing fetched again
  EXPECT_LT(cached_seconds, 2.0);
  EXPECT_EQ(read_tree(tmp_ / "a"), read_tree(tmp_ / "b"));
  EXPECT_EQ(strip_timings(manifest_to_json(first)), strip_timings(manifest_to_json(second)));
}

TEST_F(Pipeline, CacheDirFromEnvironment) {
  ::setenv("BIBLIOGRAPH_CACHE_DIR", (tmp_ / "env-cache").c_str(), 1);
  auto c = fast_config(tmp_ / "a");
  c.skip = {"enrich"};
  run_pipeline(c);
  c.out_dir = tmp_ / "b";
  auto second = run_pipeline(c);
  for (const auto& s : second.stages) EXPECT_TRUE(s.cache_hit) << s.name;
  EXPECT_TRUE(std::filesystem::exists(tmp_ / "env-cache"));
  ::unsetenv("BIBLIOGRAPH_CACHE_DIR");
}

TEST_F(Pipeline, ChangedParametersMissOnlyDownstream) {
  auto c = fast_config(tmp_ / "a");
  c.cache_dir = tmp_ / "cache";
  c.skip = {"enrich"};
  run_pipeline(c);
  c.out_dir = tmp_ / "b";
  c.sep.novelty_threshold = 0.3;
  auto m = run_pipeline(c);
  for (const auto& s : m.stages) {
    bool expect_hit = s.name != "sep" && s.name != "exports";
    EXPECT_EQ(s.cache_hit, expect_hit) << s.name;
  }
}

TEST_F(Pipeline, ByteIdenticalAcrossFreshRuns) {
  auto a = run_pipeline(fast_config(tmp_ / "a"));
  auto b = run_pipeline(fast_config(tmp_ / "b"));
  EXPECT_EQ(read_tree(tmp_ / "a"), read_tree(tmp_ / "b"));
  EXPECT_EQ(strip_timings(json::parse(text::read_file(tmp_ / "a" / kManifestName))),
            strip_timings(json::parse(text::read_file(tmp_ / "b" / kManifestName))));
}

TEST_F(Pipeline, SeedReachesCommunityDetection) {
  auto c = fast_config(tmp_ / "a");
  c.skip = {"enrich"};
  auto a = run_pipeline(c);
  c.out_dir = tmp_ / "b";
  c.seed = c.seed + 1;
  auto b = run_pipeline(c);
  EXPECT_NE(a.config_hash, b.config_hash);
  EXPECT_EQ(text::read_file(tmp_ / "a" / "corpus" / "merged.jsonl"), text::read_file(tmp_ / "b" / "corpus" / "merged.jsonl"));
}

TEST_F(Pipeline, RerunReplacesPreviousOutputs) {
  auto c = fast_config(tmp_ / "out");
  run_pipeline(c);
  c.skip = {"enrich", "networks", "exports"};
  auto m = run_pipeline(c);
  EXPECT_EQ(sorted(m.files()), list_outputs(tmp_ / "out"));
  EXPECT_FALSE(std::filesystem::exists(tmp_ / "out" / "graphs"));
  EXPECT_FALSE(std::filesystem::exists(tmp_ / "out" / "corpus" / "enriched.jsonl"));
}

TEST_F(Pipeline, RefusesForeignNonEmptyDirectory) {
  text::write_file(tmp_ / "out" / "notes.txt", "mine");
  EXPECT_THROW(run_pipeline(fast_config(tmp_ / "out")), ConfigError);
  EXPECT_EQ(text::read_file(tmp_ / "out" / "notes.txt"), "mine");
}

TEST_F(Pipeline, MissingInputFailsIngestWithPartialManifest) {
  auto c = fast_config(tmp_ / "out");
  c.inputs.push_back({tmp_ / "absent.jsonl", Dialect::jsonl, std::nullopt});
  try {
    run_pipeline(c);
    FAIL() << "expected a stage failure";
  } catch (const StageFailure& e) {
    EXPECT_EQ(e.stage(), "ingest");
    EXPECT_EQ(e.kind(), FailureKind::input);
  }
  auto m = json::parse(text::read_file(tmp_ / "out" / kManifestName));
  EXPECT_EQ(m["failed_stage"], "ingest");
  EXPECT_TRUE(m["stages"].empty());
}

TEST_F(Pipeline, UnresolvedApiBaseFailsEnrichAsConfig) {
  auto c = fast_config(tmp_ / "out");
  c.api_base.reset();
  try {
    run_pipeline(c);
    FAIL() << "expected a stage failure";
  } catch (const StageFailure& e) {
    EXPECT_EQ(e.stage(), "enrich");
    EXPECT_EQ(e.kind(), FailureKind::config);
    EXPECT_EQ(stage_list(e.manifest()), (std::vector<std::string>{"ingest", "dedup"}));
  }
  auto m = json::parse(text::read_file(tmp_ / "out" / kManifestName));
  EXPECT_EQ(m["failed_stage"], "enrich");
  // The partial manifest still accounts for every file written.
  std::vector<std::string> listed;
  for (const auto& s : m["stages"]) {
    for (const auto& f : s["outputs"]) listed.push_back(f);
  }
  EXPECT_EQ(sorted(listed), list_outputs(tmp_ / "out"));
}

TEST_F(Pipeline, EnrichUsesEnvironmentApiBase) {
  auto c = fast_config(tmp_ / "out");
  c.api_base.reset();
  ::setenv("BIBLIOGRAPH_API_BASE", server_->base_url().c_str(), 1);
  auto m = run_pipeline(c);
  EXPECT_EQ(m.stages.size(), 8u);
  ::unsetenv("BIBLIOGRAPH_API_BASE");
}

TEST_F(Pipeline, DropUnmatchedShrinksCorpus) {
  auto c = fast_config(tmp_ / "out");
  c.drop_unmatched = true;
  c.skip = {"networks", "htt", "sep", "portraits", "exports"};
  run_pipeline(c);
  auto report = json::parse(text::read_file(tmp_ / "out" / "corpus" / "enrichment_report.json"));
  auto enriched = parse_records(tmp_ / "out" / "corpus" / "enriched.jsonl", Dialect::jsonl).records;
  EXPECT_EQ(enriched.size(), report["matched"].get<std::size_t>());
  EXPECT_EQ(report["dropped"].get<std::size_t>(), 500u - enriched.size());
}

TEST(Config, Validation) {
  TempDir tmp("bibliograph-config");
  text::write_file(tmp / "a.jsonl", "");
  auto base = [&] {
    PipelineConfig c;
    c.inputs = {{tmp / "a.jsonl", Dialect::jsonl, std::nullopt}};
    c.out_dir = tmp / "out";
    return c;
  };
  EXPECT_NO_THROW(base().validate());
  auto dup = base();
  dup.inputs.push_back(dup.inputs[0]);
  EXPECT_THROW(dup.validate(), ConfigError);
  auto same_out = base();
  same_out.out_dir = tmp / "a.jsonl";
  EXPECT_THROW(same_out.validate(), ConfigError);
  auto skip_unknown = base();
  skip_unknown.skip = {"render"};
  EXPECT_THROW(skip_unknown.validate(), ConfigError);
  auto skip_dedup = base();
  skip_dedup.skip = {"dedup"};
  EXPECT_THROW(skip_dedup.validate(), ConfigError);
  EXPECT_THROW(PipelineConfig{}.validate(), ConfigError);

  EXPECT_THROW(config_from_json(json{{"seed", "x"}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"network", {{"units", {"galaxy"}}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"inputs", {{{"path", "a"}, {"dialect", "bibtex"}}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"htt", {{"max_depth", 0}}}}).validate(), ConfigError);
  EXPECT_THROW(config_from_json(json{{"portraits", {{"lexicon", 3}}}}).validate(), ConfigError);
  text::write_file(tmp / "bad.json", "{");
  EXPECT_THROW(load_config(tmp / "bad.json"), ConfigError);
  EXPECT_THROW(load_config(tmp / "none.json"), ConfigError);
}

TEST(Config, RelativePathsAndHash) {
  auto c = config_from_json(json{{"inputs", {{{"path", "x.csv"}, {"dialect", "wos-like-csv"}}}}, {"out_dir", "o"}, {"seed", 9}},
                            "/data/run");
  EXPECT_EQ(c.inputs[0].path, std::filesystem::path("/data/run/x.csv"));
  EXPECT_EQ(c.out_dir, std::filesystem::path("/data/run/o"));
  EXPECT_EQ(c.sep.seed, 9u);
  auto moved = c;
  moved.out_dir = "/elsewhere";
  moved.cache_dir = "/cache";
  EXPECT_EQ(config_hash(c), config_hash(moved));
  auto reseeded = c;
  reseeded.seed = 10;
  EXPECT_NE(config_hash(c), config_hash(reseeded));
  // Round trip through JSON keeps the hash.
  EXPECT_EQ(config_hash(config_from_json(config_to_json(c))), config_hash(c));
}

TEST(ReportTables, RankTableCsvHasHeaderPlusRows) {
  Corpus c;
  for (const char* cc : {"CN", "CN", "US"}) {
    auto r = testing_support::record(std::string("T") + cc + std::to_string(c.size()), std::nullopt, 2020);
    r.countries = {cc};
    c.push_back(r);
  }
  auto t = portraits::rank_entities(c, portraits::EntityKind::country, 10);
  auto csv = portraits::rank_table_to_csv(t, false);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(text::parse_csv(csv)[1].fields[1], "CN");
}

TEST(ReportTables, CommaInNameIsQuoted) {
  Corpus c;
  auto r = testing_support::record("T", std::nullopt, 2020);
  r.affiliations = {"University of California, Berkeley"};
  c.push_back(r);
  auto csv = portraits::rank_table_to_csv(portraits::rank_entities(c, portraits::EntityKind::institution, 10), false);
  EXPECT_NE(csv.find("\"University of California, Berkeley\""), std::string::npos);
}

TEST(ReportTables, TreeJsonReloadsEqual) {
  auto planted = synthetic::planted_hierarchy(3);
  auto tree = htt::build_topic_tree(planted.graph);
  TempDir tmp("bibliograph-tree");
  text::write_file(tmp / "tree.json", htt::tree_to_json(tree).dump(2));
  auto back = htt::tree_from_json(json::parse(text::read_file(tmp / "tree.json")));
  EXPECT_EQ(htt::tree_to_json(back), htt::tree_to_json(tree));
}
