#include <arpa/inet.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <sstream>
#include <thread>

#include "commands.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "qae/corpus_io.hpp"
#include "qae/store.hpp"

using namespace qae;
using namespace qae::test;
using namespace qae::cli;

namespace {

const std::filesystem::path kMini = kSourceDir / "data/mini_corpus.jsonl";
const std::filesystem::path kFixtures = kSourceDir / "data/structure_fixtures.jsonl";

struct Run {
  int status;
  std::string out;
};

// Runs the qae binary through the shell, capturing stdout.
Run qae_bin(const std::string &args) {
  std::string cmd = std::string(QAE_BIN) + " " + args + " 2>/dev/null";
  FILE *pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::string out;
  char buf[4096];
  while (auto n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  int raw = pclose(pipe);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

ExtractOptions options(const TempDir &dir, std::filesystem::path input = kMini) {
  ExtractOptions o;
  o.input = std::move(input);
  o.output = dir / "out.jsonl";
  return o;
}

}  // namespace

TEST_CASE("extract with the heuristic tagger") {
  TempDir dir;
  std::ostringstream err;
  auto o = options(dir);
  o.heuristic.window = 2;
  CHECK(cmd_extract(o, err) == kOk);
  CHECK(err.str().find("sessions=1 pairs=2") != std::string::npos);
  auto recs = read_labeled(o.output);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].result.labels == L("Q1 A1 A1 Q2 A2 O"));
}

TEST_CASE("extract exit codes") {
  TempDir dir;
  std::ostringstream err;
  auto o = options(dir, dir / "missing.jsonl");
  CHECK(cmd_extract(o, err) == kIoError);

  o = options(dir);
  o.tagger = "gpt:whatever";
  CHECK(cmd_extract(o, err) == kConfigError);

  o = options(dir);
  o.format = PromptFormat::ClsSingle;
  CHECK(cmd_extract(o, err) == kConfigError);

  o = options(dir);
  o.tagger = "file:" + (dir / "none.jsonl").string();
  CHECK(cmd_extract(o, err) == kIoError);

  write_file(dir / "bad.jsonl", "{\n");
  o = options(dir, dir / "bad.jsonl");
  CHECK(cmd_extract(o, err) == kIoError);
}

TEST_CASE("extract from a prediction file and two-stage modes") {
  TempDir dir;
  std::ostringstream err;
  write_file(dir / "pred.jsonl", R"({"session_id":"S1","labels":["Q1","O","A1","Q2","A2","O"]})" "\n");
  auto o = options(dir);
  o.tagger = "file:" + (dir / "pred.jsonl").string();
  CHECK(cmd_extract(o, err) == kOk);
  auto e2e = read_file(o.output);

  o.mode = ExtractionMode::TwoStageGG;
  CHECK(cmd_extract(o, err) == kOk);
  CHECK(read_file(o.output) == e2e);
}

TEST_CASE("unreachable tagger degrades per session") {
  TempDir dir;
  std::ostringstream err;
  auto o = options(dir);
  o.tagger = "http:http://127.0.0.1:1";
  o.retry.retries = 1;
  o.retry.backoff = std::chrono::milliseconds(1);
  o.retry.timeout = std::chrono::milliseconds(200);
  CHECK(cmd_extract(o, err) == kOk);
  CHECK(err.str().find("tagger_failures=1") != std::string::npos);
  auto recs = read_labeled(o.output);
  REQUIRE(recs.size() == 1);
  REQUIRE(recs[0].result.warnings.size() == 1);
  CHECK(recs[0].result.warnings[0].kind == WarningKind::TaggerFailure);
}

TEST_CASE("extract also ingests into a store") {
  TempDir dir;
  std::ostringstream err;
  auto o = options(dir);
  o.store = dir / "store";
  CHECK(cmd_extract(o, err) == kOk);
  Store store(dir / "store");
  CHECK(store.session_count() == 1);
}

TEST_CASE("evaluate") {
  TempDir dir;
  std::ostringstream err;
  CHECK(cmd_evaluate(kMini, kMini, dir / "same.json", false, err) == kOk);
  auto same = Json::parse(read_file(dir / "same.json"));
  for (auto key : {"precision", "recall", "f1"}) CHECK(same["utterance"][key] == 1.0);
  for (auto key : {"adoption_rate", "hit_rate", "session_f1"}) CHECK(same["session"][key] == 1.0);

  auto o = options(dir);
  o.heuristic.window = 2;
  REQUIRE(cmd_extract(o, err) == kOk);
  CHECK(cmd_evaluate(o.output, kMini, dir / "r.json", false, err) == kOk);
  auto r = Json::parse(read_file(dir / "r.json"));
  CHECK(r["utterance"]["precision"].get<double>() == doctest::Approx(0.8));
  CHECK(r["utterance"]["recall"] == 1.0);
  CHECK(r["utterance"]["f1"].get<double>() == doctest::Approx(8.0 / 9.0));
  CHECK(r["session"]["adoption_rate"] == 0.5);
  CHECK(r["session"]["matched_pairs"] == 1);
  CHECK(r["grouped_recall"]["category"]["1-1"]["recall"] == 0.5);
  CHECK(r["grouped_recall"]["in_pair_shape"].contains("Disjoint"));
  CHECK(r["grouped_recall"]["between_relation"]["SF"]["total"] == 2);

  // prediction for a session the reference lacks
  auto extra = read_file(o.output) +
               R"({"session_id":"S9","labels":["O"],"pairs":[],"warnings":[]})" "\n";
  write_file(dir / "extra.jsonl", extra);
  CHECK(cmd_evaluate(dir / "extra.jsonl", kMini, dir / "x.json", false, err) == kAlignmentError);
  CHECK(cmd_evaluate(kMini, dir / "extra.jsonl", dir / "x.json", false, err) == kAlignmentError);
  CHECK(cmd_evaluate(dir / "nope.jsonl", kMini, dir / "x.json", false, err) == kIoError);
}

TEST_CASE("stats and analyze") {
  TempDir dir;
  std::ostringstream out, err;
  CHECK(cmd_stats(kMini, std::nullopt, dir / "stats.json", out, err) == kOk);
  auto j = Json::parse(read_file(dir / "stats.json"));
  CHECK(j["avg_us"] == 6.0);
  CHECK(j["dist_qa"] == 1.5);
  CHECK(out.str().find("Dist_QA") != std::string::npos);

  CHECK(cmd_stats(kFixtures, std::nullopt, dir / "f.json", out, err) == kOk);
  CHECK(Json::parse(read_file(dir / "f.json"))["category_ratios"]["1-1"] == 1.0);

  write_file(dir / "plain.jsonl",
             R"({"session_id":"p","utterances":[{"role":"C","text":"Hi?"},{"role":"A","text":"Yes."}]})"
             "\n");
  CHECK(cmd_stats(dir / "plain.jsonl", std::nullopt, std::nullopt, out, err) == kConfigError);

  // an extraction file supplies the labels
  auto o = options(dir, dir / "plain.jsonl");
  REQUIRE(cmd_extract(o, err) == kOk);
  CHECK(cmd_stats(dir / "plain.jsonl", o.output, std::nullopt, out, err) == kOk);

  CHECK(cmd_analyze(kFixtures, std::nullopt, dir / "a.json", out, err) == kOk);
  auto a = Json::parse(read_file(dir / "a.json"));
  CHECK(a["between_relations"]["CC"]["fraction"] == 0.2);
  CHECK(a["sessions"].size() == 5);
  CHECK(cmd_analyze(dir / "plain.jsonl", std::nullopt, std::nullopt, out, err) == kConfigError);
}

TEST_CASE("ingest and export") {
  TempDir dir;
  std::ostringstream err;
  CHECK(cmd_ingest(dir / "store", kMini, std::nullopt, err) == kOk);
  {
    Store store(dir / "store");
    ReviewRecord r{"S1", 1, ReviewStatus::Accepted, "", "", "ann", {}};
    store.record_review(r);
  }
  CHECK(cmd_ingest(dir / "store", kMini, std::nullopt, err) == kOk);  // duplicate is a warning
  CHECK(cmd_export(dir / "store", dir / "faq.csv", "csv", err) == kOk);
  CHECK(read_file(dir / "faq.csv").starts_with("question,answer,session_id,pair_id,created\r\n"));
  CHECK(cmd_export(dir / "store", dir / "faq.jsonl", "jsonl", err) == kOk);
  CHECK(Json::parse(read_file(dir / "faq.jsonl"))["session_id"] == "S1");
  CHECK(cmd_export(dir / "store", dir / "faq.xml", "xml", err) == kConfigError);
}

TEST_CASE("serve exit codes") {
  TempDir dir;
  std::ostringstream err;
  CHECK(cmd_serve(dir / "absent", "127.0.0.1", 0, std::nullopt, err) == kIoError);
}

TEST_CASE("config precedence") {
  Settings s({{"workers", "3"}, {"window", "5"}});
  CHECK(s.get("workers", std::nullopt, "1") == "3");
  CHECK(s.get("workers", std::string("7"), "1") == "7");
  CHECK(s.get("missing", std::nullopt, "x") == "x");
  setenv("QAE_WORKERS", "4", 1);
  CHECK(s.get("workers", std::nullopt, "1") == "4");
  CHECK(s.get("workers", std::string("7"), "1") == "7");
  unsetenv("QAE_WORKERS");

  TempDir dir;
  write_file(dir / "qae.conf", "# comment\nworkers = 2\ntagger = \"heuristic\"\n\nbogus line\n");
  auto file = load_config_file(dir / "qae.conf");
  CHECK(file["workers"] == "2");
  CHECK(file["tagger"] == "heuristic");
  CHECK(file.size() == 2);
  CHECK_THROWS(load_config_file(dir / "none.conf"));
}

TEST_CASE("binary: subcommands and exit codes") {
  TempDir dir;
  auto out = (dir / "o.jsonl").string();
  CHECK(qae_bin("extract --input " + kMini.string() + " --output " + out).status == 0);
  CHECK(qae_bin("extract --input " + (dir / "x").string() + " --output " + out).status == 3);
  CHECK(qae_bin("extract --input " + kMini.string() + " --output " + out + " --mode sideways")
            .status == 2);
  CHECK(qae_bin("extract --input " + kMini.string() + " --output " + out + " --workers 0")
            .status == 2);
  CHECK(qae_bin("frobnicate").status == 2);
  CHECK(qae_bin("--help").status == 0);

  auto stats = qae_bin("stats --input " + kMini.string());
  CHECK(stats.status == 0);
  CHECK(stats.out.find("\"dist_qa\":1.5") != std::string::npos);

  CHECK(qae_bin("evaluate --pred " + out + " --ref " + kMini.string() + " --report " +
                (dir / "r.json").string())
            .status == 0);

  // config file, then environment over it, then flag over both
  write_file(dir / "qae.conf", "window = 1\n");
  CHECK(qae_bin("--config " + (dir / "qae.conf").string() + " extract --input " +
                kMini.string() + " --output " + out)
            .status == 0);
  CHECK(read_labeled(out)[0].result.labels == L("Q1 A1 O Q2 A2 O"));
  auto env = "QAE_WINDOW=2 " + std::string(QAE_BIN) + " --config " +
             (dir / "qae.conf").string() + " extract --input " + kMini.string() + " --output " +
             out + " 2>/dev/null";
  CHECK(std::system(env.c_str()) == 0);
  CHECK(read_labeled(out)[0].result.labels == L("Q1 A1 A1 Q2 A2 O"));
  CHECK(qae_bin("--config " + (dir / "qae.conf").string() + " extract --window 3 --input " +
                kMini.string() + " --output " + out)
            .status == 0);
  CHECK(read_labeled(out)[0].result.labels == L("Q1 A1 A1 Q2 A2 O"));

  CHECK(qae_bin("--config " + (dir / "missing.conf").string() + " stats --input " +
                kMini.string())
            .status == 2);
  CHECK(qae_bin("--customer-role X --agent-role X stats --input " + kMini.string()).status == 2);
}

TEST_CASE("binary: serve reports a busy port") {
  TempDir dir;
  std::ostringstream err;
  REQUIRE(cmd_ingest(dir / "store", kMini, std::nullopt, err) == kOk);
  // hold a port with a listening socket
  int fd = socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr *>(&addr), sizeof addr) == 0);
  REQUIRE(listen(fd, 1) == 0);
  socklen_t len = sizeof addr;
  getsockname(fd, reinterpret_cast<sockaddr *>(&addr), &len);
  auto port = std::to_string(ntohs(addr.sin_port));
  CHECK(qae_bin("serve --store " + (dir / "store").string() + " --port " + port).status == 5);
  close(fd);
}

TEST_CASE("binary: serve stops cleanly on SIGTERM") {
  TempDir dir;
  std::ostringstream err;
  REQUIRE(cmd_ingest(dir / "store", kMini, std::nullopt, err) == kOk);
  pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    if (!freopen("/dev/null", "w", stderr)) _exit(126);
    execl(QAE_BIN, QAE_BIN, "serve", "--store", (dir / "store").c_str(), "--port", "0",
          static_cast<char *>(nullptr));
    _exit(127);
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
}
