#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace qae;
using namespace qae::cli;

namespace {

using Opt = std::optional<std::string>;

std::optional<std::filesystem::path> as_path(const Opt &s) {
  if (!s || s->empty()) return std::nullopt;
  return std::filesystem::path(*s);
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Extract, evaluate and review QA pairs from customer service sessions"};
  app.require_subcommand(1);

  Opt config, customer_role, agent_role;
  app.add_option("--config", config, "key = value settings file");
  app.add_option("--customer-role", customer_role, "customer role name in corpus files (C)");
  app.add_option("--agent-role", agent_role, "agent role name in corpus files (A)");

  // extract
  Opt ex_input, ex_output, ex_tagger, ex_stage2, ex_mode, ex_format, ex_workers, ex_window,
      ex_lexicon, ex_store, ex_timeout, ex_retries, ex_token, ex_in_flight;
  auto *extract = app.add_subcommand("extract", "Tag sessions and write extractions");
  extract->add_option("--input", ex_input, "corpus JSONL");
  extract->add_option("--output", ex_output, "extraction JSONL");
  extract->add_option("--tagger", ex_tagger, "heuristic | http:<URL> | file:<path>");
  extract->add_option("--stage2-tagger", ex_stage2, "second-stage tagger for two-stage modes");
  extract->add_option("--mode", ex_mode, "end_to_end | two_stage_gg | two_stage_bg");
  extract->add_option("--format", ex_format, "mask_sep | sentinel_semicolon | cls_single");
  extract->add_option("--workers", ex_workers, "parallel sessions");
  extract->add_option("--window", ex_window, "heuristic answer window");
  extract->add_option("--lexicon", ex_lexicon, "heuristic question phrases, one per line");
  extract->add_option("--store", ex_store, "also ingest results into this store");
  extract->add_option("--timeout-ms", ex_timeout, "HTTP tagger timeout");
  extract->add_option("--retries", ex_retries, "HTTP tagger retries");
  extract->add_option("--token", ex_token, "HTTP tagger bearer token");
  extract->add_option("--max-in-flight", ex_in_flight, "HTTP tagger concurrency cap");

  // evaluate
  Opt ev_pred, ev_ref, ev_report;
  bool raw_ids = false;
  auto *evaluate = app.add_subcommand("evaluate", "Score predictions against references");
  evaluate->add_option("--pred", ev_pred, "predicted extractions")->required();
  evaluate->add_option("--ref", ev_ref, "reference labels")->required();
  evaluate->add_option("--report", ev_report, "report JSON");
  evaluate->add_flag("--raw-ids", raw_ids, "compare labels without normalizing pair ids");

  // stats / analyze
  Opt st_input, st_extractions, st_output;
  auto *stats = app.add_subcommand("stats", "Corpus statistics");
  stats->add_option("--input", st_input, "corpus JSONL")->required();
  stats->add_option("--extractions", st_extractions, "labels from an extraction file");
  stats->add_option("--output", st_output, "statistics JSON");
  Opt an_input, an_extractions, an_output;
  auto *analyze = app.add_subcommand("analyze", "Structure relations and pair shapes");
  analyze->add_option("--input", an_input, "corpus JSONL")->required();
  analyze->add_option("--extractions", an_extractions, "labels from an extraction file");
  analyze->add_option("--output", an_output, "profile JSON");

  // ingest / export / serve
  Opt in_store, in_input, in_extractions;
  auto *ingest = app.add_subcommand("ingest", "Load sessions and extractions into a store");
  ingest->add_option("--store", in_store, "store directory");
  ingest->add_option("--input", in_input, "corpus JSONL")->required();
  ingest->add_option("--extractions", in_extractions, "extraction JSONL");
  Opt exp_store, exp_output, exp_format;
  auto *exportc = app.add_subcommand("export", "Export accepted FAQ entries");
  exportc->add_option("--store", exp_store, "store directory");
  exportc->add_option("--output", exp_output, "output file")->required();
  exportc->add_option("--format", exp_format, "jsonl | csv");
  Opt sv_store, sv_host, sv_port, sv_ui;
  auto *serve = app.add_subcommand("serve", "Run the review API");
  serve->add_option("--store", sv_store, "store directory");
  serve->add_option("--host", sv_host, "bind address");
  serve->add_option("--port", sv_port, "port, 0 for any");
  serve->add_option("--ui", sv_ui, "static review UI directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  Settings settings;
  try {
    if (config) settings = Settings(load_config_file(*config));
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }

  RoleNames roles;
  try {
    roles = RoleNames(settings.get("customer_role", customer_role, "C"),
                      settings.get("agent_role", agent_role, "A"));
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }

  auto &err = std::cerr;
  if (*extract) {
    ExtractOptions o;
    o.roles = roles;
    try {
      o.input = settings.get("input", ex_input, "");
      o.output = settings.get("output", ex_output, "");
      if (o.input.empty() || o.output.empty())
        throw Error(Errc::InvalidArgument, "extract needs --input and --output");
      o.tagger = settings.get("tagger", ex_tagger, "heuristic");
      o.stage2_tagger = settings.get("stage2_tagger", ex_stage2, "");
      o.mode = parse_mode_tag(settings.get("mode", ex_mode, "end_to_end"));
      o.format = parse_format_tag(settings.get("format", ex_format, "mask_sep"));
      o.workers = std::stoul(settings.get("workers", ex_workers, "1"));
      if (o.workers == 0) throw Error(Errc::InvalidArgument, "workers must be at least 1");
      o.heuristic.window = std::stoul(settings.get("window", ex_window, "3"));
      o.max_in_flight = std::stoul(settings.get("max_in_flight", ex_in_flight, "8"));
      if (o.max_in_flight == 0) throw Error(Errc::InvalidArgument, "max-in-flight must be >= 1");
      o.retry.timeout = std::chrono::milliseconds(std::stol(settings.get("timeout_ms", ex_timeout, "30000")));
      o.retry.retries = std::stoi(settings.get("retries", ex_retries, "3"));
      o.retry.bearer_token = settings.get("token", ex_token, "");
      o.store = as_path(settings.get("store", ex_store, ""));
    } catch (const Error &e) {
      err << "error: " << e.what() << '\n';
      return kConfigError;
    } catch (const std::logic_error &e) {
      err << "error: bad numeric setting: " << e.what() << '\n';
      return kConfigError;
    }
    if (auto lex = settings.get("lexicon", ex_lexicon, ""); !lex.empty()) {
      try {
        o.heuristic.lexicon = HeuristicConfig::load_lexicon(lex);
      } catch (const Error &e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
      }
    }
    return cmd_extract(o, err);
  }
  if (*evaluate)
    return cmd_evaluate(*ev_pred, *ev_ref, settings.get("report", ev_report, "report.json"),
                        raw_ids, err, roles);
  if (*stats)
    return cmd_stats(*st_input, as_path(st_extractions), as_path(st_output), std::cout, err, roles);
  if (*analyze)
    return cmd_analyze(*an_input, as_path(an_extractions), as_path(an_output), std::cout, err,
                       roles);

  auto store = [&](const Opt &flag) { return settings.get("store", flag, ""); };
  if (*ingest) {
    if (store(in_store).empty()) return err << "error: --store is required\n", kConfigError;
    return cmd_ingest(store(in_store), *in_input, as_path(in_extractions), err, roles);
  }
  if (*exportc) {
    if (store(exp_store).empty()) return err << "error: --store is required\n", kConfigError;
    return cmd_export(store(exp_store), *exp_output, settings.get("export_format", exp_format, "jsonl"),
                      err);
  }
  if (*serve) {
    if (store(sv_store).empty()) return err << "error: --store is required\n", kConfigError;
    int port = 0;
    try {
      port = std::stoi(settings.get("port", sv_port, "8080"));
    } catch (const std::logic_error &) {
      err << "error: bad port\n";
      return kConfigError;
    }
    if (port < 0 || port > 65535) return err << "error: bad port\n", kConfigError;
    auto ui = settings.get("ui", sv_ui, "");
    return cmd_serve(store(sv_store), settings.get("host", sv_host, "127.0.0.1"), port,
                     ui.empty() ? std::nullopt : std::optional<std::filesystem::path>(ui), err);
  }
  return kConfigError;
}
