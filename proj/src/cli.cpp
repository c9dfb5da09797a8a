#include "evidencedesk/api.hpp"

#include "evidencedesk/corpus.hpp"
#include "evidencedesk/embed.hpp"
#include "evidencedesk/evalstats.hpp"
#include "evidencedesk/index.hpp"
#include "evidencedesk/text_util.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

namespace evidencedesk::api {
namespace {

constexpr const char* kDefaultModels = "hash:384:1,hash:1024:2,hash:1536:3";

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::string t(util::trim(item));
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

struct EngineFlags {
  std::string store;
  std::string index;
  std::vector<std::string> adapters;
  std::string mock;
  std::string traces = "traces";
  std::string config_file;
  bool no_hyde = false;
  bool no_adapter = false;
  bool no_llm_safety = false;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--store", store, "Corpus store directory")->required();
    cmd.add_option("--index", index, "Vector index file")->required();
    cmd.add_option("--adapter", adapters, "Query adapter file (repeatable)");
    cmd.add_option("--mock", mock, "Scripted transcript; replaces the remote LLM");
    cmd.add_option("--traces", traces, "Trace output directory");
    cmd.add_option("--config", config_file, "JSON file of pipeline settings");
    cmd.add_flag("--no-hyde", no_hyde, "Disable hypothetical-passage retrieval");
    cmd.add_flag("--no-adapter", no_adapter, "Do not apply query adapters");
    cmd.add_flag("--no-llm-safety", no_llm_safety, "Skip the classifier safety call");
  }

  pipeline::PipelineConfig config() const {
    pipeline::PipelineConfig c;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw Error(ErrorCode::kIo, "cannot read " + config_file);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kParse, config_file + ": " + e.what());
      }
      c = apply_overrides(c, j);
    }
    if (no_hyde) c.use_hyde = false;
    if (no_adapter) c.use_adapter = false;
    if (no_llm_safety) c.llm_safety_check = false;
    return c;
  }

  std::unique_ptr<Engine> engine(bool strict_mock) const {
    std::vector<std::filesystem::path> adapter_paths(adapters.begin(), adapters.end());
    auto kb = pipeline::KnowledgeBase::open(store, index, adapter_paths);
    std::shared_ptr<llm::ChatClient> client;
    if (!mock.empty()) {
      client = std::make_shared<llm::ScriptedChatClient>(llm::load_transcript(mock, strict_mock));
    } else {
      client = llm::make_remote_client_from_env();
    }
    return std::make_unique<Engine>(std::move(kb), config(), std::move(client), traces);
  }
};

std::vector<llm::ChatMessage> load_history(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
  return AskRequest::from_json({{"question", "-"}, {"history", j}}).history;
}

HttpServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evidence-graded clinical question answering over a local corpus"};
  app.name("evidencedesk");
  app.require_subcommand(1);

  // ingest
  std::string ingest_input, ingest_store, ingest_scales = "128,512,1024";
  double overlap = corpus::kDefaultOverlap;
  auto* ingest = app.add_subcommand("ingest", "Chunk a directory of text files into a store");
  ingest->add_option("--input", ingest_input, "Directory of documents")->required();
  ingest->add_option("--store", ingest_store, "Output store directory")->required();
  ingest->add_option("--scales", ingest_scales, "Comma-separated chunk sizes in tokens");
  ingest->add_option("--overlap", overlap, "Window overlap fraction in [0, 1)");

  // index-build
  std::string build_store, build_index, build_models = kDefaultModels, build_scales;
  auto* index_build = app.add_subcommand("index-build", "Embed every chunk and write an index");
  index_build->add_option("--store", build_store, "Corpus store directory")->required();
  index_build->add_option("--index", build_index, "Output index file")->required();
  index_build->add_option("--models", build_models, "Comma-separated embedding model ids");
  index_build->add_option("--scales", build_scales, "Restrict to these chunk sizes");

  // train-adapter
  std::string pairs_path, adapter_model, adapter_out;
  double lambda = 1.0;
  std::size_t adapter_dims = 0;
  auto* train = app.add_subcommand("train-adapter", "Fit a query adapter from vector pairs");
  train->add_option("--pairs", pairs_path, "JSONL of {query_vector, target_vector}")->required();
  train->add_option("--model", adapter_model, "Embedding model id")->required();
  train->add_option("--out", adapter_out, "Output adapter file")->required();
  train->add_option("--lambda", lambda, "Ridge strength toward the identity");
  train->add_option("--dims", adapter_dims, "Dimension when the pair file is empty");

  // ask
  EngineFlags ask_flags;
  std::string question, history_path;
  bool ask_json = false;
  auto* ask = app.add_subcommand("ask", "Answer one question");
  ask_flags.add_to(*ask);
  ask->add_option("--question,-q", question, "Question text")->required();
  ask->add_option("--history", history_path, "JSON array of prior {role, content} turns");
  ask->add_flag("--json", ask_json, "Print the response as JSON");

  // validate-dataset
  std::string vd_benchmark, vd_ratings;
  auto* validate = app.add_subcommand("validate-dataset", "Check benchmark and ratings files");
  validate->add_option("--benchmark", vd_benchmark, "Benchmark question file");
  validate->add_option("--ratings", vd_ratings, "Ratings file");

  // stats
  std::string sv_ratings, alternative = "greater";
  double p0 = stats::kDefaultNullProportion, level = 0.95;
  std::size_t n_boot = stats::kDefaultBootstrapResamples;
  std::uint64_t seed = 0;
  auto add_stat_options = [&](CLI::App* cmd) {
    cmd->add_option("--ratings", sv_ratings, "Ratings file")->required();
    cmd->add_option("--p0", p0, "Null proportion of high ratings");
    cmd->add_option("--alternative", alternative, "greater, less or two-sided");
    cmd->add_option("--level", level, "Confidence level of the median interval");
    cmd->add_option("--n-boot", n_boot, "Bootstrap resamples");
    cmd->add_option("--seed", seed, "Bootstrap seed");
  };
  auto* stats_validation =
      app.add_subcommand("stats-validation", "Summarise question-validation ratings");
  add_stat_options(stats_validation);
  std::string me_benchmark;
  auto* stats_model = app.add_subcommand("stats-model-eval", "Summarise answer ratings");
  add_stat_options(stats_model);
  stats_model->add_option("--benchmark", me_benchmark, "Benchmark question file")->required();

  // serve
  EngineFlags serve_flags;
  std::string host = "127.0.0.1", serve_ratings = "ratings.csv", serve_benchmark;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the /v1 HTTP service");
  serve_flags.add_to(*serve);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port; 0 picks a free one");
  serve->add_option("--ratings", serve_ratings, "Ratings file appended by POST /v1/ratings");
  serve->add_option("--benchmark", serve_benchmark, "Benchmark served by GET /v1/benchmark");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  auto summary_options = [&] {
    dataset::SummaryOptions o;
    o.p0 = p0;
    o.alternative = stats::parse_alternative(alternative);
    o.level = level;
    o.n_boot = n_boot;
    o.seed = seed;
    return o;
  };

  try {
    if (*ingest) {
      std::vector<int> scales;
      for (const auto& s : split_csv(ingest_scales)) scales.push_back(std::stoi(s));
      const auto store = corpus::ingest_directory(ingest_input, scales, overlap, ingest_store);
      const auto report = store.report();
      nlohmann::json per_scale = nlohmann::json::object();
      for (const auto& [scale, n] : report.chunks_per_scale) per_scale[std::to_string(scale)] = n;
      out << nlohmann::json{{"documents", report.documents},
                            {"chunks", report.total_chunks()},
                            {"chunks_per_scale", per_scale}}
                 .dump()
          << "\n";
    } else if (*index_build) {
      const auto store = corpus::CorpusStore::load(build_store);
      std::vector<std::shared_ptr<const embed::EmbeddingProvider>> providers;
      for (const auto& id : split_csv(build_models)) providers.push_back(embed::make_provider(id));
      std::vector<int> scales;
      for (const auto& s : split_csv(build_scales)) scales.push_back(std::stoi(s));
      pipeline::IndexBuildReport report;
      const auto idx = pipeline::build_index(store, providers, scales, &report);
      idx.save(build_index);
      out << nlohmann::json{{"entries", report.entries},
                            {"skipped", report.skipped},
                            {"partitions", idx.partitions().size()}}
                 .dump()
          << "\n";
    } else if (*train) {
      const auto pairs = embed::load_training_pairs(pairs_path);
      const auto adapter = embed::train_adapter(adapter_model, pairs, lambda, adapter_dims);
      embed::save_adapter(adapter, adapter_out);
      out << nlohmann::json{{"model_id", adapter.model_id},
                            {"d", adapter.d},
                            {"lambda", adapter.lambda},
                            {"trained_pairs", adapter.trained_pairs}}
                 .dump()
          << "\n";
    } else if (*ask) {
      auto engine = ask_flags.engine(true);
      AskRequest req;
      req.question = question;
      req.history = load_history(history_path);
      const auto result = engine->ask(req);
      if (ask_json) {
        const auto j = result.refusal
                           ? nlohmann::json{{"status", "refused"},
                                            {"refusal", pipeline::to_json(*result.refusal)}}
                           : nlohmann::json{{"status", "done"},
                                            {"response", pipeline::to_json(*result.answer)}};
        out << j.dump(2) << "\n";
      } else if (result.refusal) {
        out << result.refusal->message << "\n";
        err << "refused (" << result.refusal->layer << ": " << result.refusal->reason
            << "), trace " << result.refusal->trace_id << "\n";
      } else {
        out << result.answer->answer_markdown << "\n";
        err << "trace " << result.answer->trace_id << "\n";
      }
    } else if (*validate) {
      if (vd_benchmark.empty() && vd_ratings.empty()) {
        err << "error: give --benchmark and/or --ratings\n";
        return 2;
      }
      nlohmann::json report = nlohmann::json::object();
      if (!vd_benchmark.empty()) {
        const auto set = dataset::load_benchmark(vd_benchmark);
        report["benchmark"] = {{"total", set.total()}, {"by_specialty", set.counts_by_specialty}};
      }
      if (!vd_ratings.empty()) {
        report["ratings"] = {{"rows", dataset::load_ratings(vd_ratings).size()}};
      }
      out << report.dump(2) << "\n";
    } else if (*stats_validation) {
      const auto ratings = dataset::load_ratings(sv_ratings);
      const auto rows =
          dataset::summarize_validation(ratings, dataset::validation_axes(), summary_options());
      out << dataset::format_validation_table(rows);
    } else if (*stats_model) {
      const auto ratings = dataset::load_ratings(sv_ratings);
      const auto bench = dataset::load_benchmark(me_benchmark);
      const auto report = dataset::summarize_model_eval(ratings, bench, dataset::evaluation_axes(),
                                                        summary_options());
      out << dataset::format_model_eval_tables(report);
    } else if (*serve) {
      auto engine = serve_flags.engine(false);
      std::optional<dataset::BenchmarkSet> bench;
      if (!serve_benchmark.empty()) bench = dataset::load_benchmark(serve_benchmark);
      Service service(*engine, std::make_shared<dataset::RatingsLog>(serve_ratings),
                      std::move(bench));
      HttpServer server(service);
      const int bound = server.bind(host, port);
      out << "listening on http://" << host << ":" << bound << "\n" << std::flush;
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.run();
      g_server = nullptr;
    }
  } catch (const pipeline::StageError& e) {
    err << "error: stage " << e.stage() << " failed (" << to_string(e.code())
        << "), trace " << e.trace_id() << ": " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace evidencedesk::api
