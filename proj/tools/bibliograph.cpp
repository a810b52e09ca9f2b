// Command-line front end. Every subcommand reads the same JSON config; the
// single-step commands run one pipeline stage on an explicit corpus file.
//
// Exit codes: 0 success, 2 configuration error, 3 input error, 4 stage failure.

#include <iostream>

#include <CLI11.hpp>

#include "bibliograph/pipeline.hpp"

namespace bg = bibliograph;
namespace pl = bibliograph::pipeline;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool drop_unmatched = false;
  bool include_abstract_tagging = false;
};

pl::PipelineConfig effective_config(const Globals& g) {
  pl::PipelineConfig c = g.config_path.empty() ? pl::PipelineConfig{} : pl::load_config(g.config_path);
  if (g.seed) {
    c.seed = *g.seed;
    c.sep.seed = *g.seed;
  }
  if (!g.out_dir.empty()) c.out_dir = g.out_dir;
  if (g.drop_unmatched) c.drop_unmatched = true;
  if (g.include_abstract_tagging) c.include_abstract_tagging = true;
  return c;
}

void write_files(const fs::path& dir, const pl::StageOutput& out, const std::string& strip_prefix = "") {
  for (const auto& [rel, content] : out.files) {
    auto name = rel;
    if (!strip_prefix.empty() && name.rfind(strip_prefix, 0) == 0) name = name.substr(strip_prefix.size());
    bg::text::write_file(dir / name, content);
    std::cout << (dir / name).string() << "\n";
  }
}

json corpus_state(const std::string& path) {
  if (path.empty()) throw bg::ConfigError("--corpus is required");
  auto parsed = bg::parse_records(path, bg::Dialect::jsonl);
  return {{"corpus", pl::detail::corpus_to_state(parsed.records)}};
}

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const pl::StageFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case pl::FailureKind::config: return 2;
      case pl::FailureKind::input: return 3;
      case pl::FailureKind::stage: return 4;
    }
    return 4;
  } catch (const bg::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const bg::IoError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const bg::FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bibliometric analytics: corpus merge, enrichment, co-occurrence networks, topic trees, "
               "evolutionary pathways and portraits"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Pipeline config (JSON)");
  app.add_option("--seed", g.seed, "Seed for community detection and clustering");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_flag("--drop-unmatched", g.drop_unmatched, "Drop records the API could not match");
  app.add_flag("--include-abstract-tagging", g.include_abstract_tagging, "Tag principles in abstracts too");

  std::function<void()> action;
  std::string corpus_path;

  auto* run = app.add_subcommand("run", "Run the full pipeline");
  std::vector<std::string> skip;
  run->add_option("--skip", skip, "Stage to skip (repeatable)");
  run->callback([&] {
    action = [&] {
      auto c = effective_config(g);
      c.skip.insert(skip.begin(), skip.end());
      auto m = pl::run_pipeline(c);
      for (const auto& s : m.stages) {
        std::cout << s.name << (s.cache_hit ? " (cached)" : "") << ": " << s.outputs.size() << " files, "
                  << bg::text::format_double(s.seconds) << " s\n";
      }
      for (const auto& s : m.skipped) std::cout << s << ": skipped\n";
      std::cout << "manifest: " << (c.out_dir / pl::kManifestName).string() << "\n";
    };
  });

  auto* ingest = app.add_subcommand("ingest", "Parse exports, merge and deduplicate");
  std::vector<std::string> inputs, dialects;
  ingest->add_option("--input", inputs, "Export file (repeatable; default: config inputs)");
  ingest->add_option("--dialect", dialects, "Dialect per --input: scopus-like-csv, wos-like-csv, jsonl");
  ingest->callback([&] {
    action = [&] {
      auto c = effective_config(g);
      if (!inputs.empty()) {
        c.inputs.clear();
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          c.inputs.push_back({inputs[i], bg::parse_dialect(i < dialects.size() ? dialects[i] : "jsonl"), std::nullopt});
        }
      }
      if (c.inputs.empty()) throw bg::ConfigError("no inputs given");
      auto parsed = pl::detail::run_ingest(c);
      write_files(c.out_dir, parsed, "ingest/");
      write_files(c.out_dir, pl::detail::run_dedup(parsed.state), "corpus/");
    };
  });

  auto* enrich = app.add_subcommand("enrich", "Fill entities from the works API by DOI");
  enrich->add_option("--corpus", corpus_path, "Corpus (jsonl)");
  enrich->callback([&] {
    action = [&] {
      auto c = effective_config(g);
      write_files(c.out_dir, pl::detail::run_enrich(c, corpus_state(corpus_path), std::nullopt, pl::resolve_cache_dir(c)),
                  "corpus/");
    };
  });

  auto* network = app.add_subcommand("network", "Build co-occurrence networks with communities");
  std::vector<std::string> units;
  network->add_option("--corpus", corpus_path, "Corpus (jsonl)");
  network->add_option("--unit", units, "fos, keyword, author, country, venue or term (repeatable)");
  network->callback([&] {
    action = [&] {
      auto c = effective_config(g);
      if (!units.empty()) {
        c.network_units.clear();
        for (const auto& u : units) c.network_units.push_back(bg::parse_entity_unit(u));
      }
      auto nets = pl::detail::run_networks(c, corpus_state(corpus_path));
      write_files(c.out_dir, nets, "networks/");
      write_files(c.out_dir, pl::detail::run_exports(nets.state, std::nullopt), "graphs/");
    };
  });

  auto* htt = app.add_subcommand("htt", "Extract the hierarchical topic tree");
  std::string htt_unit;
  htt->add_option("--corpus", corpus_path, "Corpus (jsonl)");
  htt->add_option("--unit", htt_unit, "Network unit (default from config: fos)");
  htt->callback([&] {
    action = [&] {
      auto c = effective_config(g);
      if (!htt_unit.empty()) c.htt_unit = bg::parse_entity_unit(htt_unit);
      write_files(c.out_dir, pl::detail::run_htt(c, corpus_state(corpus_path)), "htt/");
    };
  });

  auto* sep = app.add_subcommand("sep", "Trace evolutionary pathways over yearly slices");
  sep->add_option("--corpus", corpus_path, "Corpus (jsonl)");
  sep->callback([&] {
    action = [&] {
      auto c = effective_config(g);
      auto out = pl::detail::run_sep_stage(c, corpus_state(corpus_path));
      write_files(c.out_dir, out, "sep/");
      write_files(c.out_dir, pl::detail::run_exports(std::nullopt, out.state), "graphs/");
    };
  });

  auto* portrait = app.add_subcommand("portrait", "Rankings, trend, principle x technique interplay");
  std::vector<std::string> kinds;
  portrait->add_option("--corpus", corpus_path, "Corpus (jsonl)");
  portrait->add_option("--kind", kinds, "country, institution, venue, author or fos (repeatable)");
  portrait->callback([&] {
    action = [&] {
      auto c = effective_config(g);
      if (!kinds.empty()) {
        c.rank_kinds.clear();
        for (const auto& k : kinds) c.rank_kinds.push_back(bg::portraits::parse_entity_kind(k));
      }
      write_files(c.out_dir, pl::detail::run_portraits(c, corpus_state(corpus_path)), "portraits/");
    };
  });

  auto* cohort = app.add_subcommand("cohort", "Filter the core cohort and rank its keyphrases");
  std::vector<std::string> phrases;
  bool print_query = false;
  int top_k = 0;
  cohort->add_option("--corpus", corpus_path, "Corpus (jsonl)");
  cohort->add_option("--phrase", phrases, "Exact phrase (repeatable; default from config)");
  cohort->add_option("--top", top_k, "Keyphrases to keep (default from config)");
  cohort->add_flag("--print-query", print_query, "Print the database search string and exit");
  cohort->callback([&] {
    action = [&] {
      if (print_query) {
        std::cout << bg::build_search_query() << "\n";
        return;
      }
      auto c = effective_config(g);
      if (!phrases.empty()) c.cohort_phrases = phrases;
      auto corpus = pl::detail::corpus_from_state(corpus_state(corpus_path).at("corpus"));
      auto members = bg::filter_core_cohort(corpus, c.cohort_phrases);
      std::vector<bg::portraits::Keyphrase> ks;
      if (!members.empty()) ks = bg::portraits::extract_keyphrases(members, top_k > 0 ? top_k : c.keyphrases);
      pl::StageOutput out;
      out.files["cohort.jsonl"] = bg::corpus_to_jsonl(members);
      out.files["keyphrases.csv"] = bg::portraits::keyphrases_to_csv(ks);
      write_files(c.out_dir, out);
      std::cerr << members.size() << " of " << corpus.size() << " records in the cohort\n";
    };
  });

  auto* exp = app.add_subcommand("export", "Convert a graph JSON (from `network`) to GEXF, GraphML or CSV");
  std::string graph_path, partition_path, format = "gexf", out_file;
  exp->add_option("--graph", graph_path, "Graph JSON")->required();
  exp->add_option("--partition", partition_path, "Partition JSON for community colors");
  exp->add_option("--format", format, "gexf, graphml or csv")->check(CLI::IsMember({"gexf", "graphml", "csv"}));
  exp->add_option("--out", out_file, "Output file (csv writes <out>_nodes.csv and <out>_edges.csv)")->required();
  exp->callback([&] {
    action = [&] {
      auto graph = bg::graph_from_json(json::parse(bg::text::read_file(graph_path)));
      std::optional<bg::Partition> part;
      if (!partition_path.empty()) part = bg::partition_from_json(graph, json::parse(bg::text::read_file(partition_path)));
      auto view = bg::exporter::view_of(graph, part ? &*part : nullptr);
      if (format == "gexf") {
        bg::exporter::write_gexf(view, out_file);
      } else if (format == "graphml") {
        bg::exporter::write_graphml(view, out_file);
      } else {
        bg::text::write_file(out_file + "_nodes.csv", bg::exporter::nodes_to_csv(view));
        bg::text::write_file(out_file + "_edges.csv", bg::exporter::edges_to_csv(view));
      }
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  return run_guarded([&] {
    try {
      action();
    } catch (const json::parse_error& e) {
      throw bg::FormatError(e.what());
    }
  });
}
