// Command-line entry point: corpus filtering stages, evaluation, and the
// curation service.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "bitext/curation.hpp"
#include "bitext/curation_server.hpp"
#include "bitext/error.hpp"
#include "bitext/ingest.hpp"
#include "bitext/metrics.hpp"
#include "bitext/pipeline.hpp"

namespace {

using namespace bitext;

constexpr int kExitUser = 1;
constexpr int kExitInternal = 2;

struct ProviderFlags {
  std::string kind = "mock";
  std::string url;
  std::size_t batch = 64;
  std::size_t dim = kMockDim;
  std::string cache;

  void attach(CLI::App* app) {
    app->add_option("--provider", kind, "Embedding provider: mock or remote")
        ->check(CLI::IsMember({"mock", "remote"}));
    app->add_option("--provider-url", url,
                    "Remote embedding endpoint (default: $BITEXT_PROVIDER_URL)");
    app->add_option("--batch", batch, "Texts per remote request");
    app->add_option("--dim", dim, "Embedding dimension");
    app->add_option("--cache", cache, "On-disk embedding cache file");
  }

  ProviderConfig config() const {
    ProviderConfig c;
    c.kind = kind == "remote" ? ProviderConfig::Kind::kRemote : ProviderConfig::Kind::kMock;
    c.url = url;
    if (c.url.empty()) {
      if (const char* env = std::getenv("BITEXT_PROVIDER_URL")) c.url = env;
    }
    if (c.kind == ProviderConfig::Kind::kRemote && c.url.empty()) {
      throw InvalidInput("remote provider needs --provider-url or BITEXT_PROVIDER_URL");
    }
    c.batch = batch;
    c.dim = dim;
    return c;
  }
};

CorpusFormat format_or_infer(const std::string& name, const std::string& path) {
  if (!name.empty()) {
    if (auto f = parse_format(name)) return *f;
    throw InvalidInput("unknown format: " + name);
  }
  if (auto f = format_from_path(path)) return *f;
  throw InvalidInput("cannot infer format of " + path + "; pass a --format flag");
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kProvider:
    case ErrorKind::kInternal:
      return kExitInternal;
    default:
      return kExitUser;
  }
}

void serve_until_signalled(CurationServer& server) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::jthread waiter([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {} received, stopping", sig);
    server.stop();
  });
  server.serve();
  // Wake the waiter if the server stopped on its own.
  pthread_kill(waiter.native_handle(), SIGTERM);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("bitext"));

  CLI::App app{"Parallel-corpus filtering, evaluation and gold-set curation"};
  app.require_subcommand(1);

  // dedup
  std::string dedup_in, dedup_in_format, dedup_out, dedup_out_format;
  auto* dedup = app.add_subcommand("dedup", "Remove exact duplicate pairs");
  dedup->add_option("--in", dedup_in, "Input corpus")->required();
  dedup->add_option("--in-format", dedup_in_format, "tsv or jsonl");
  dedup->add_option("--out", dedup_out, "Deduplicated corpus")->required();
  dedup->add_option("--out-format", dedup_out_format, "tsv or jsonl");

  // score
  std::string score_in, score_in_format, score_out, score_unscored;
  unsigned score_jobs = 1;
  ProviderFlags score_provider;
  auto* score = app.add_subcommand("score", "Attach similarity scores to pairs");
  score->add_option("--in", score_in, "Input corpus")->required();
  score->add_option("--in-format", score_in_format, "tsv or jsonl");
  score->add_option("--out", score_out, "Scored JSONL output")->required();
  score->add_option("--unscored", score_unscored, "Sidecar for pairs that failed scoring");
  score->add_option("--jobs", score_jobs, "Scoring threads")->check(CLI::PositiveNumber);
  score_provider.attach(score);

  // filter
  std::string filter_in, filter_kept, filter_rejected, filter_stats;
  double filter_tau = SimilarityThreshold::kDefault;
  auto* filter = app.add_subcommand("filter", "Split scored pairs at a threshold");
  filter->add_option("--in", filter_in, "Scored JSONL input")->required();
  filter->add_option("--tau", filter_tau, "Keep pairs with score >= tau")
      ->check(CLI::Range(0.0, 1.0));
  filter->add_option("--kept", filter_kept, "Kept pairs")->required();
  filter->add_option("--rejected", filter_rejected, "Rejected pairs")->required();
  filter->add_option("--stats", filter_stats, "Write filter statistics JSON");

  // run
  std::string run_config;
  ConfigMap run_overrides;
  auto* run = app.add_subcommand("run", "Run dedup, scoring and filtering end to end");
  run->add_option("--config", run_config, "key = value config file");
  const std::pair<const char*, const char*> run_keys[] = {
      {"input", "Input corpus"},
      {"input-format", "tsv or jsonl"},
      {"kept", "Kept pairs output"},
      {"rejected", "Rejected pairs output"},
      {"unscored", "Sidecar for pairs that failed scoring"},
      {"stats", "Statistics JSON output"},
      {"manifest", "Run manifest output"},
      {"tau", "Similarity threshold"},
      {"provider", "mock or remote"},
      {"provider-url", "Remote embedding endpoint"},
      {"batch", "Texts per remote request"},
      {"dim", "Embedding dimension"},
      {"cache", "Embedding cache file"},
      {"jobs", "Scoring threads"},
      {"in-flight", "Pairs buffered between stages"},
  };
  for (const auto& [flag, help] : run_keys) {
    std::string key = flag;
    std::replace(key.begin(), key.end(), '-', '_');
    run->add_option_function<std::string>(
        std::string("--") + flag,
        [&run_overrides, key](const std::string& v) { run_overrides[key] = v; }, help);
  }

  // evaluate
  std::string eval_set, eval_hyp, eval_out;
  ProviderFlags eval_provider;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score hypotheses with all five metrics");
  evaluate_cmd->add_option("--set", eval_set, "Evaluation set JSONL")->required();
  evaluate_cmd->add_option("--hyp", eval_hyp, "Hypotheses, one per line, aligned with --set");
  evaluate_cmd->add_option("--out", eval_out, "Write the report here instead of stdout");
  eval_provider.attach(evaluate_cmd);

  // sample
  std::string sample_corpus, sample_format, sample_queue;
  std::size_t sample_n = 0;
  std::uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "Draw a review queue from a corpus");
  sample->add_option("--corpus", sample_corpus, "Corpus to sample from")->required();
  sample->add_option("--format", sample_format, "tsv or jsonl");
  sample->add_option("--n", sample_n, "Sample size")->required();
  sample->add_option("--seed", sample_seed, "Random seed");
  sample->add_option("--queue", sample_queue, "Queue JSONL output")->required();

  // serve
  std::string serve_queue, serve_log;
  ServerOptions server_options;
  int lease_minutes = 10;
  bool serve_sync = false;
  auto* serve = app.add_subcommand("serve", "Run the curation HTTP service");
  serve->add_option("--queue", serve_queue, "Queue JSONL from `sample`")->required();
  serve->add_option("--log", serve_log, "Append-only decision log")->required();
  serve->add_option("--host", server_options.host, "Bind address");
  serve->add_option("--port", server_options.port, "Port (0 picks a free one)");
  serve->add_option("--ui-dir", server_options.ui_dir, "Review UI bundle directory");
  serve->add_option("--lease-minutes", lease_minutes, "Lease window")
      ->check(CLI::PositiveNumber);
  serve->add_flag("--sync", serve_sync, "fsync the log after every decision");

  // export-gold
  std::string export_queue, export_log, export_order = "decision", export_out;
  std::size_t export_limit = std::numeric_limits<std::size_t>::max();
  auto* export_gold = app.add_subcommand("export-gold", "Export accepted pairs as a gold set");
  export_gold->add_option("--queue", export_queue, "Queue JSONL")->required();
  export_gold->add_option("--log", export_log, "Decision log")->required();
  export_gold->add_option("--limit", export_limit, "Maximum pairs");
  export_gold->add_option("--order", export_order, "decision or score")
      ->check(CLI::IsMember({"decision", "score"}));
  export_gold->add_option("--out", export_out, "Gold JSONL output")->required();

  // report
  std::string report_stats, report_decisions;
  bool report_json = false;
  auto* report_cmd = app.add_subcommand("report", "Summarize run statistics or a decision log");
  auto* stats_opt = report_cmd->add_option("--stats", report_stats, "Stats JSON from run/filter");
  auto* decisions_opt =
      report_cmd->add_option("--decisions", report_decisions, "Decision log JSONL");
  stats_opt->excludes(decisions_opt);
  report_cmd->add_flag("--json", report_json, "Print JSON instead of text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUser;
  }

  try {
    if (*dedup) {
      const auto counts = run_dedup_stage(
          dedup_in, format_or_infer(dedup_in_format, dedup_in), dedup_out,
          format_or_infer(dedup_out_format, dedup_out));
      spdlog::info("dedup: read {}, kept {}, duplicates removed {}, malformed {}",
                   counts.read, counts.written, counts.dropped, counts.malformed);
    } else if (*score) {
      auto provider = make_provider(score_provider.config(), score_provider.cache);
      const auto counts = run_score_stage(score_in, format_or_infer(score_in_format, score_in),
                                          score_out, score_unscored, *provider, score_jobs);
      spdlog::info("score: read {}, scored {}, unscored {}", counts.read, counts.written,
                   counts.dropped);
    } else if (*filter) {
      const auto stats = run_filter_stage(filter_in, SimilarityThreshold(filter_tau),
                                          filter_kept, filter_rejected);
      if (!filter_stats.empty()) {
        std::ofstream out(filter_stats, std::ios::binary | std::ios::trunc);
        out << to_json(stats).dump(2) << '\n';
        if (!out) throw IoError("cannot write " + filter_stats);
      }
      spdlog::info("filter: retained {}, rejected {}", stats.retained, stats.rejected);
    } else if (*run) {
      ConfigMap values;
      if (!run_config.empty()) values = read_config_file(run_config);
      for (const auto& [key, value] : run_overrides) values[key] = value;
      if (!values.contains("provider_url")) {
        if (const char* env = std::getenv("BITEXT_PROVIDER_URL")) values["provider_url"] = env;
      }
      PipelineConfig config;
      apply_config(values, config);
      const auto stats = run_pipeline(config);
      std::cerr << report(stats).text;
    } else if (*evaluate_cmd) {
      const EvalSet set = load_eval_set(eval_set, eval_hyp);
      auto provider = make_provider(eval_provider.config(), eval_provider.cache);
      const std::string json = to_json(evaluate(set, *provider)).dump(2);
      if (eval_out.empty()) {
        std::cout << json << '\n';
      } else {
        std::ofstream out(eval_out, std::ios::binary | std::ios::trunc);
        out << json << '\n';
        if (!out) throw IoError("cannot write " + eval_out);
      }
    } else if (*sample) {
      const auto queue = sample_candidates(
          sample_corpus, format_or_infer(sample_format, sample_corpus), sample_n, sample_seed);
      write_pairs(std::span<const CorpusRecord>(queue), sample_queue, CorpusFormat::kJsonl);
      spdlog::info("sample: wrote {} candidates to {}", queue.size(), sample_queue);
    } else if (*serve) {
      CurationOptions options;
      options.lease_window = std::chrono::minutes(lease_minutes);
      options.sync_each = serve_sync;
      CurationStore store(serve_queue, serve_log, options);
      CurationServer server(store, server_options);
      const int port = server.bind();
      std::cout << "listening " << server_options.host << ":" << port << std::endl;
      serve_until_signalled(server);
    } else if (*export_gold) {
      CurationStore store(export_queue, export_log);
      const auto gold = store.export_gold(
          export_order == "score" ? ExportOrder::kScore : ExportOrder::kDecision, export_limit);
      write_pairs(std::span<const CorpusRecord>(gold), export_out, CorpusFormat::kJsonl);
      spdlog::info("export-gold: wrote {} pairs to {}", gold.size(), export_out);
    } else if (*report_cmd) {
      if (!report_decisions.empty()) {
        const auto decisions = DecisionLog::replay(report_decisions);
        std::cout << to_json(record_assessment_stats(decisions)).dump(2) << '\n';
      } else if (!report_stats.empty()) {
        std::ifstream in(report_stats, std::ios::binary);
        if (!in) throw IoError("cannot read " + report_stats);
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw InvalidInput("malformed stats JSON: " + report_stats);
        const Report r = report(stats_from_json(j));
        std::cout << (report_json ? r.json.dump(2) + "\n" : r.text);
      } else {
        throw InvalidInput("report needs --stats or --decisions");
      }
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kExitInternal;
  }
  return 0;
}
