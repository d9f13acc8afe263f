#include "commands.hpp"

#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

#include "qae/corpus_io.hpp"
#include "qae/metrics.hpp"
#include "qae/review_server.hpp"
#include "qae/store.hpp"
#include "qae/structure.hpp"

namespace qae::cli {

std::map<std::string, std::string> load_config_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  std::map<std::string, std::string> values;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (!key.empty()) values[key] = value;
  }
  return values;
}

std::string Settings::get(const std::string &key, const std::optional<std::string> &flag,
                          const std::string &fallback) const {
  if (flag) return *flag;
  std::string env_name = "QAE_";
  for (char c : key) env_name += c == '-' ? '_' : static_cast<char>(std::toupper(c));
  if (const char *env = std::getenv(env_name.c_str()); env && *env) return env;
  if (auto it = file_.find(key); it != file_.end()) return it->second;
  return fallback;
}

namespace {

struct TaggerHandle {
  std::unique_ptr<Tagger> tagger;
};

// Throws InvalidArgument for a bad spec; file-loading errors propagate.
std::unique_ptr<Tagger> make_tagger(const std::string &spec, const ExtractOptions &options,
                                    std::ostream &err) {
  if (spec == "heuristic") return std::make_unique<HeuristicTagger>(options.heuristic);
  if (spec.rfind("http:", 0) == 0) {
    auto url = spec.substr(5);
    auto style = options.format == PromptFormat::SentinelSemicolon ? OutputStyle::GeneratedText
                                                                   : OutputStyle::SlotLabels;
    return std::make_unique<HttpTagger>(url, style, options.retry, options.max_in_flight);
  }
  if (spec.rfind("file:", 0) == 0) {
    auto file = tag_via_file(spec.substr(5));
    for (const auto &w : file.warnings) err << "warning: " << w << '\n';
    return std::make_unique<PrecomputedTagger>(std::move(file.predictions));
  }
  throw Error(Errc::InvalidArgument,
              "tagger must be 'heuristic', 'http:<URL>' or 'file:<path>', got '" + spec + "'");
}

int report_error(std::ostream &err, const Error &e) {
  err << "error: " << e.what() << '\n';
  switch (e.code()) {
    case Errc::FileNotFound:
    case Errc::ParseError:
    case Errc::Io:
    case Errc::NonContiguousIndices:
    case Errc::EmptyUtterance: return kIoError;
    case Errc::SessionIdMismatch: return kAlignmentError;
    default: return kConfigError;
  }
}

std::optional<std::vector<AnnotatedSession>> load_annotated(
    const std::filesystem::path &input, const std::optional<std::filesystem::path> &extractions,
    const RoleNames &roles) {
  auto corpus = read_corpus(input, roles);
  std::map<std::string, ExtractionResult> by_id;
  if (extractions)
    for (auto &rec : read_labeled(*extractions, roles))
      by_id[rec.result.session_id] = std::move(rec.result);
  std::vector<AnnotatedSession> out;
  for (auto &rec : corpus) {
    if (auto it = by_id.find(rec.session.session_id); it != by_id.end()) {
      check_exclusive(it->second.pairs, rec.session.size());
      out.push_back({std::move(rec.session), std::move(it->second)});
    } else if (rec.labels) {
      auto result = labels_to_pairs(*rec.labels, rec.session);
      out.push_back({std::move(rec.session), std::move(result)});
    } else {
      return std::nullopt;
    }
  }
  return out;
}

}  // namespace

int cmd_extract(const ExtractOptions &options, std::ostream &err) {
  std::unique_ptr<Tagger> stage1, stage2;
  try {
    if (options.mode == ExtractionMode::EndToEnd && options.format == PromptFormat::ClsSingle)
      throw Error(Errc::InvalidArgument, "end-to-end extraction needs mask_sep or "
                                         "sentinel_semicolon");
    stage1 = make_tagger(options.tagger, options, err);
    if (options.mode != ExtractionMode::EndToEnd && !options.stage2_tagger.empty())
      stage2 = make_tagger(options.stage2_tagger, options, err);
  } catch (const Error &e) {
    return report_error(err, e);
  }

  std::vector<CorpusRecord> corpus;
  try {
    corpus = read_corpus(options.input, options.roles);
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
  std::vector<Session> sessions;
  sessions.reserve(corpus.size());
  for (auto &rec : corpus) sessions.push_back(std::move(rec.session));

  Tagger &first = *stage1;
  Tagger &second = stage2 ? *stage2 : *stage1;
  const bool reentrant = first.reentrant() && second.reentrant();
  auto extract = [&](const Session &s) {
    if (options.mode == ExtractionMode::EndToEnd)
      return extract_end_to_end(s, first, options.format, options.roles);
    return extract_two_stage(s, first, second, options.mode, options.roles);
  };
  auto results = extract_batch(sessions, extract, reentrant ? options.workers : 1);

  std::ofstream out(options.output, std::ios::binary | std::ios::trunc);
  if (!out) {
    err << "error: cannot write " << options.output << '\n';
    return kIoError;
  }
  std::size_t pairs = 0, warnings = 0, failures = 0;
  for (const auto &r : results) {
    out << extraction_to_json(r, options.roles).dump() << '\n';
    pairs += r.pairs.size();
    warnings += r.warnings.size();
    for (const auto &w : r.warnings)
      if (w.kind == WarningKind::TaggerFailure) ++failures;
  }
  out.flush();
  if (!out) {
    err << "error: short write to " << options.output << '\n';
    return kIoError;
  }

  if (options.store) {
    try {
      Store store(*options.store);
      for (std::size_t i = 0; i < sessions.size(); ++i) store.ingest(sessions[i], results[i]);
    } catch (const Error &e) {
      err << "error: ingest into " << *options.store << ": " << e.what() << '\n';
      return kIoError;
    }
  }
  err << "sessions=" << sessions.size() << " pairs=" << pairs << " warnings=" << warnings
      << " tagger_failures=" << failures << '\n';
  return kOk;
}

namespace {

Json utterance_scores_json(const UtteranceScores &s) {
  return {{"precision", s.precision}, {"recall", s.recall},     {"f1", s.f1},
          {"predicted", s.predicted}, {"reference", s.reference}, {"correct", s.correct}};
}

Json session_scores_json(const SessionScores &s) {
  return {{"adoption_rate", s.adoption_rate},
          {"hit_rate", s.hit_rate},
          {"session_f1", s.session_f1},
          {"predicted_pairs", s.predicted_pairs},
          {"reference_pairs", s.reference_pairs},
          {"matched_pairs", s.matched_pairs}};
}

Json groups_json(const std::map<std::string, GroupRecall> &groups) {
  Json j = Json::object();
  for (const auto &[name, g] : groups)
    j[name] = {{"matched", g.matched}, {"total", g.total}, {"recall", g.recall}};
  return j;
}

bool write_json(const std::optional<std::filesystem::path> &path, const Json &j,
                std::ostream &err) {
  if (!path) return true;
  std::ofstream out(*path, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) {
    err << "error: cannot write " << *path << '\n';
    return false;
  }
  return true;
}

}  // namespace

int cmd_evaluate(const std::filesystem::path &predicted, const std::filesystem::path &reference,
                 const std::filesystem::path &report, bool raw_ids, std::ostream &err,
                 const RoleNames &roles) {
  std::vector<LabeledRecord> pred, ref;
  try {
    pred = read_labeled(predicted, roles);
    ref = read_labeled(reference, roles);
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }

  std::map<std::string, std::size_t> pred_index;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred_index.emplace(pred[i].result.session_id, i).second) {
      err << "error: duplicate predicted session '" << pred[i].result.session_id << "'\n";
      return kAlignmentError;
    }
  }
  std::vector<ExtractionResult> p_results, r_results;
  std::vector<LabelSequence> p_labels, r_labels;
  std::vector<Session> sessions;
  bool have_sessions = true;
  for (const auto &r : ref) {
    auto it = pred_index.find(r.result.session_id);
    if (it == pred_index.end()) {
      err << "error: session '" << r.result.session_id << "' missing from predictions\n";
      return kAlignmentError;
    }
    const auto &p = pred[it->second];
    pred_index.erase(it);
    if (p.result.labels.size() != r.result.labels.size()) {
      err << "error: session '" << r.result.session_id << "' has " << p.result.labels.size()
          << " predicted and " << r.result.labels.size() << " reference labels\n";
      return kAlignmentError;
    }
    p_results.push_back(p.result);
    r_results.push_back(r.result);
    p_labels.push_back(p.result.labels);
    r_labels.push_back(r.result.labels);
    if (r.session)
      sessions.push_back(*r.session);
    else if (p.session)
      sessions.push_back(*p.session);
    else
      have_sessions = false;
  }
  if (!pred_index.empty()) {
    err << "error: session '" << pred_index.begin()->first << "' missing from reference\n";
    return kAlignmentError;
  }

  const auto utt = utterance_metrics(p_labels, r_labels, raw_ids);
  const auto ses = session_metrics(p_results, r_results);
  Json grouped{{"category", groups_json(grouped_recall(p_results, r_results, Grouping::Category))},
               {"in_pair_shape",
                groups_json(grouped_recall(p_results, r_results, Grouping::InPairShape))}};
  grouped["between_relation"] =
      have_sessions ? groups_json(grouped_recall(p_results, r_results, Grouping::BetweenRelation,
                                                 sessions))
                    : Json(nullptr);
  Json j{{"n_sessions", ref.size()},
         {"raw_ids", raw_ids},
         {"utterance", utterance_scores_json(utt)},
         {"session", session_scores_json(ses)},
         {"grouped_recall", std::move(grouped)}};
  if (!write_json(report, j, err)) return kIoError;
  err << std::fixed << std::setprecision(4) << "P=" << utt.precision << " R=" << utt.recall
      << " F1=" << utt.f1 << " AR=" << ses.adoption_rate << " HR=" << ses.hit_rate
      << " S-F1=" << ses.session_f1 << '\n';
  return kOk;
}

int cmd_stats(const std::filesystem::path &input,
              const std::optional<std::filesystem::path> &extractions,
              const std::optional<std::filesystem::path> &output, std::ostream &out,
              std::ostream &err, const RoleNames &roles) {
  std::optional<std::vector<AnnotatedSession>> corpus;
  try {
    corpus = load_annotated(input, extractions, roles);
  } catch (const Error &e) {
    return report_error(err, e);
  }
  if (!corpus) {
    err << "error: " << input << " has unlabeled sessions and no extraction file covers them\n";
    return kConfigError;
  }
  const auto s = corpus_stats(*corpus);
  Json ratios = Json::object();
  for (const auto &[c, r] : s.category_ratios) ratios[std::string(category_name(c))] = r;
  Json counts = Json::object();
  for (const auto &[c, n] : s.category_counts) counts[std::string(category_name(c))] = n;
  Json j{{"n_sessions", s.n_sessions}, {"n_pairs", s.n_pairs},  {"avg_us", s.avg_us},
         {"avg_qs", s.avg_qs},         {"avg_as", s.avg_as},    {"dist_qa", s.dist_qa},
         {"category_counts", counts},  {"category_ratios", ratios}};

  out << std::fixed << std::setprecision(2);
  out << "#Sess  Avg_Us  Avg_Qs  Avg_As  Dist_QA   1-1%   1-N%   N-1%   N-N%\n";
  out << std::setw(5) << s.n_sessions << std::setw(8) << s.avg_us << std::setw(8) << s.avg_qs
      << std::setw(8) << s.avg_as << std::setw(9) << s.dist_qa;
  for (auto c : {PairCategory::OneOne, PairCategory::OneN, PairCategory::NOne, PairCategory::NN})
    out << std::setw(7) << 100.0 * s.category_ratios.at(c);
  out << '\n' << j.dump() << '\n';
  return write_json(output, j, err) ? kOk : kIoError;
}

int cmd_analyze(const std::filesystem::path &input,
                const std::optional<std::filesystem::path> &extractions,
                const std::optional<std::filesystem::path> &output, std::ostream &out,
                std::ostream &err, const RoleNames &roles) {
  std::optional<std::vector<AnnotatedSession>> corpus;
  try {
    corpus = load_annotated(input, extractions, roles);
  } catch (const Error &e) {
    return report_error(err, e);
  }
  if (!corpus) {
    err << "error: " << input << " has unlabeled sessions and no extraction file covers them\n";
    return kConfigError;
  }
  StructureProfile profile;
  try {
    profile = session_structure_profile(*corpus);
  } catch (const Error &e) {
    return report_error(err, e);
  }
  Json relations = Json::object();
  for (auto r : kAllRelations)
    relations[std::string(relation_name(r))] = {{"count", profile.relation_counts.at(r)},
                                                {"fraction", profile.relation_fraction(r)}};
  Json shapes = Json::object();
  for (auto s : kAllShapes)
    shapes[std::string(shape_name(s))] = {{"count", profile.shape_counts.at(s)},
                                          {"fraction", profile.shape_fraction(s)}};
  Json sessions = Json::array();
  for (const auto &s : profile.sessions) {
    Json seq = Json::array();
    for (const auto &r : s.relations) {
      Json item{{"relation", relation_name(r.relation)}};
      if (r.irregular) item["annotation"] = "irregular-overlap";
      seq.push_back(std::move(item));
    }
    sessions.push_back({{"session_id", s.session_id}, {"relations", std::move(seq)}});
  }
  Json j{{"between_relations", std::move(relations)},
         {"in_pair_shapes", std::move(shapes)},
         {"irregular_overlaps", profile.irregular_overlaps},
         {"sessions", std::move(sessions)}};
  out << j.dump(2) << '\n';
  return write_json(output, j, err) ? kOk : kIoError;
}

int cmd_ingest(const std::filesystem::path &store_dir, const std::filesystem::path &input,
               const std::optional<std::filesystem::path> &extractions, std::ostream &err,
               const RoleNames &roles) {
  try {
    auto corpus = load_annotated(input, extractions, roles);
    if (!corpus) {
      err << "error: nothing to ingest for unlabeled sessions without extractions\n";
      return kConfigError;
    }
    Store store(store_dir);
    std::size_t ingested = 0;
    for (const auto &a : *corpus) {
      try {
        store.ingest(a.session, a.result);
        ++ingested;
      } catch (const Error &e) {
        if (e.code() != Errc::DuplicateSession) throw;
        err << "warning: " << e.what() << '\n';
      }
    }
    err << "ingested=" << ingested << '\n';
  } catch (const Error &e) {
    return report_error(err, e);
  }
  return kOk;
}

int cmd_export(const std::filesystem::path &store_dir, const std::filesystem::path &output,
               const std::string &format, std::ostream &err) {
  if (format != "jsonl" && format != "csv") {
    err << "error: export format must be jsonl or csv\n";
    return kConfigError;
  }
  try {
    Store store(store_dir);
    std::ofstream out(output, std::ios::binary | std::ios::trunc);
    if (format == "csv")
      store.export_faq_csv(out);
    else
      store.export_faq_jsonl(out);
    out.flush();
    if (!out) {
      err << "error: cannot write " << output << '\n';
      return kIoError;
    }
  } catch (const Error &e) {
    return report_error(err, e);
  }
  return kOk;
}

int cmd_serve(const std::filesystem::path &store_dir, const std::string &host, int port,
              const std::optional<std::filesystem::path> &ui_dir, std::ostream &err) {
  if (!std::filesystem::is_directory(store_dir)) {
    err << "error: store directory " << store_dir << " does not exist\n";
    return kIoError;
  }
  std::unique_ptr<Store> store;
  try {
    store = std::make_unique<Store>(store_dir);
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
  ReviewServer server(*store, ui_dir);
  const int bound = server.bind(host, port);
  if (bound < 0) {
    err << "error: cannot bind " << host << ":" << port << '\n';
    return kPortInUse;
  }

  // Termination signals are consumed by a watcher thread that stops the
  // server; the listener then returns and the store closes its logs.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });

  err << "serving " << store_dir << " on http://" << host << ":" << bound << '\n';
  server.serve();
  if (watcher.joinable()) {
    // serve() can also return without a signal (listener failure).
    pthread_kill(watcher.native_handle(), SIGTERM);
    watcher.join();
  }
  err << "shutdown complete\n";
  return kOk;
}

}  // namespace qae::cli
