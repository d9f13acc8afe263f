#include <atomic>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "httplib.h"
#include "qae/error.hpp"
#include "qae/review_server.hpp"
#include "qae/store.hpp"

using namespace qae;
using namespace qae::test;

namespace {

Timestamp at(int seconds) { return Timestamp(std::chrono::seconds(1'800'000'000 + seconds)); }

// Clock advancing one second per call, for deterministic ingest order.
Store::Options ticking(bool durable = false) {
  auto t = std::make_shared<int>(0);
  return {durable, [t] { return at((*t)++); }};
}

ReviewRecord review(const std::string &sid, int pid, ReviewStatus status,
                    std::string reviewer = "ann", Timestamp when = {}) {
  ReviewRecord r;
  r.session_id = sid;
  r.pair_id = pid;
  r.status = status;
  r.reviewer = std::move(reviewer);
  r.timestamp = when;
  return r;
}

Session numbered(int i) {
  auto s = s1();
  s.session_id = "S" + std::to_string(i);
  return s;
}

void ingest_s1(Store &store, int i = 1) {
  auto s = numbered(i);
  store.ingest(s, labels_to_pairs(s1_labels(), s));
}

Errc code_of(auto &&fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("expected qae::Error");
  return Errc::Io;
}

}  // namespace

TEST_CASE("utc timestamps") {
  auto t = parse_utc("2026-10-16T08:30:00Z");
  CHECK(format_utc(t) == "2026-10-16T08:30:00Z");
  CHECK_THROWS_AS(parse_utc("2026-10-16 08:30"), Error);
}

TEST_CASE("accept, reject and duplicate reviews") {
  TempDir dir;
  Store store(dir.path(), ticking());
  ingest_s1(store);
  auto ack = store.record_review(review("S1", 1, ReviewStatus::Accepted));
  REQUIRE(ack.faq);
  CHECK(ack.faq->question == "Hi, my package hasn't arrived?");
  CHECK(ack.faq->answer == "It will arrive tomorrow.");
  CHECK(ack.record.timestamp != Timestamp{});

  ack = store.record_review(review("S1", 2, ReviewStatus::Rejected));
  CHECK_FALSE(ack.faq);
  CHECK(store.review("S1", 2)->status == ReviewStatus::Rejected);

  CHECK(code_of([&] { store.record_review(review("S1", 1, ReviewStatus::Rejected)); }) ==
        Errc::AlreadyReviewed);
  CHECK(code_of([&] { store.record_review(review("S1", 9, ReviewStatus::Accepted)); }) ==
        Errc::UnknownPair);
  CHECK(code_of([&] { store.record_review(review("S9", 1, ReviewStatus::Accepted)); }) ==
        Errc::UnknownPair);
  CHECK(store.faq_entries().size() == 1);
}

TEST_CASE("edited reviews") {
  TempDir dir;
  Store store(dir.path(), ticking());
  ingest_s1(store);
  auto r = review("S1", 2, ReviewStatus::Edited);
  CHECK(code_of([&] { store.record_review(r); }) == Errc::InvalidArgument);
  r.edited_question = "How do I get a refund?";
  r.edited_answer = "Use the orders page.";
  auto ack = store.record_review(r);
  REQUIRE(ack.faq);
  CHECK(ack.faq->question == "How do I get a refund?");
  CHECK(code_of([&] { store.record_review(review("S1", 1, ReviewStatus::Pending)); }) ==
        Errc::InvalidArgument);
}

TEST_CASE("multi-utterance unions are newline joined") {
  TempDir dir;
  Store store(dir.path(), ticking());
  auto s = s1();
  store.ingest(s, labels_to_pairs(L("Q1 A1 A1 O O O"), s));
  auto ack = store.record_review(review("S1", 1, ReviewStatus::Accepted));
  CHECK(ack.faq->answer == "Let me check.\nIt will arrive tomorrow.");
}

TEST_CASE("ingest validation") {
  TempDir dir;
  Store store(dir.path(), ticking());
  ingest_s1(store);
  CHECK(code_of([&] { ingest_s1(store); }) == Errc::DuplicateSession);
  auto s = numbered(2);
  ExtractionResult bad{"S2", {make_qa_pair(1, {1}, {2}), make_qa_pair(2, {2}, {3})}, {}, {}};
  CHECK(code_of([&] { store.ingest(s, bad); }) == Errc::OverlappingUnions);
  CHECK(store.session_count() == 1);
}

TEST_CASE("adoption report") {
  TempDir dir;
  Store store(dir.path(), ticking());
  CHECK(store.adoption_report().adoption_rate == 0.0);
  for (int i = 1; i <= 2; ++i) ingest_s1(store, i);
  store.record_review(review("S1", 1, ReviewStatus::Accepted, "ann", at(100)));
  store.record_review(review("S1", 2, ReviewStatus::Accepted, "ann", at(200)));
  store.record_review(review("S2", 1, ReviewStatus::Accepted, "bob", at(300)));
  store.record_review(review("S2", 2, ReviewStatus::Rejected, "bob", at(400)));
  auto rep = store.adoption_report();
  CHECK(rep.accepted == 3);
  CHECK(rep.rejected == 1);
  CHECK(rep.pending == 0);
  CHECK(rep.adoption_rate == 0.75);

  CHECK(store.adoption_report({std::nullopt, std::nullopt, "bob"}).adoption_rate == 0.5);
  auto window = store.adoption_report({at(150), at(300), std::nullopt});
  CHECK(window.accepted == 2);
  CHECK(window.rejected == 0);
}

TEST_CASE("edited counts as adopted") {
  TempDir dir;
  Store store(dir.path(), ticking());
  ingest_s1(store);
  auto r = review("S1", 1, ReviewStatus::Edited);
  r.edited_question = "q";
  r.edited_answer = "a";
  store.record_review(r);
  store.record_review(review("S1", 2, ReviewStatus::Rejected));
  CHECK(store.adoption_report().adoption_rate == 0.5);
}

TEST_CASE("pending pagination") {
  TempDir dir;
  Store store(dir.path(), ticking());
  auto empty = store.list_pending("", 10);
  CHECK(empty.items.empty());
  CHECK_FALSE(empty.next_cursor);

  ingest_s1(store);
  auto first = store.list_pending("", 1);
  REQUIRE(first.items.size() == 1);
  CHECK(first.items[0].pair.pair_id == 1);
  CHECK(first.items[0].excerpt.size() == 3);  // utterances 1..3
  REQUIRE(first.next_cursor);
  auto second = store.list_pending(*first.next_cursor, 1);
  REQUIRE(second.items.size() == 1);
  CHECK(second.items[0].pair.pair_id == 2);
  CHECK_FALSE(second.next_cursor);

  // reviewed pairs leave the queue, later ingests queue behind
  store.record_review(review("S1", 1, ReviewStatus::Accepted));
  ingest_s1(store, 0);
  auto all = store.list_pending("", 10);
  REQUIRE(all.items.size() == 3);
  CHECK(all.items[0].session_id == "S1");
  CHECK(all.items[1].session_id == "S0");

  CHECK(code_of([&] { store.list_pending("garbage", 1); }) == Errc::InvalidCursor);
}

TEST_CASE("compaction invalidates cursors and keeps state") {
  TempDir dir;
  std::string digest;
  {
    Store store(dir.path(), ticking());
    for (int i = 1; i <= 3; ++i) ingest_s1(store, i);
    store.record_review(review("S2", 1, ReviewStatus::Accepted));
    auto page = store.list_pending("", 1);
    digest = store.state_digest();
    auto before = store.epoch();
    store.compact();
    CHECK(store.epoch() == before + 1);
    CHECK(store.state_digest() == digest);
    CHECK(code_of([&] { store.list_pending(*page.next_cursor, 1); }) == Errc::InvalidCursor);
  }
  Store reopened(dir.path());
  CHECK(reopened.state_digest() == digest);
  CHECK(reopened.epoch() == 1);
}

TEST_CASE("replay after reopen and torn tail") {
  TempDir dir;
  std::string digest;
  {
    Store store(dir.path(), ticking(true));
    ingest_s1(store);
    store.record_review(review("S1", 1, ReviewStatus::Accepted));
    digest = store.state_digest();
  }
  {
    std::ofstream out(dir / "reviews.log", std::ios::app | std::ios::binary);
    out << R"({"session_id":"S1","pair_id":2,"sta)";
  }
  Store store(dir.path());
  CHECK(store.state_digest() == digest);
  CHECK(read_file(dir / "reviews.log").back() == '\n');
  // the dropped review can be recorded again
  store.record_review(review("S1", 2, ReviewStatus::Rejected));
  CHECK(store.adoption_report().rejected == 1);
}

TEST_CASE("corrupt line in the middle is an error") {
  TempDir dir;
  {
    Store store(dir.path(), ticking());
    ingest_s1(store, 1);
    ingest_s1(store, 2);
  }
  auto text = read_file(dir / "sessions.log");
  text.insert(text.find('\n') + 1, "{broken\n");
  write_file(dir / "sessions.log", text);
  CHECK(code_of([&] { Store s(dir.path()); }) == Errc::ParseError);
}

TEST_CASE("faq export") {
  TempDir dir;
  Store store(dir.path(), ticking());
  auto s = make_session("q\"x", {{SpeakerRole::Customer, "Is it \"free\", really?"},
                                 {SpeakerRole::Agent, "Yes"}});
  store.ingest(s, labels_to_pairs(L("Q1 A1"), s));
  store.record_review(review("q\"x", 1, ReviewStatus::Accepted, "ann", at(0)));
  std::ostringstream csv, jsonl;
  store.export_faq_csv(csv);
  store.export_faq_jsonl(jsonl);
  CHECK(csv.str() ==
        "question,answer,session_id,pair_id,created\r\n"
        "\"Is it \"\"free\"\", really?\",Yes,\"q\"\"x\",1,2027-01-15T08:00:00Z\r\n");
  auto j = Json::parse(jsonl.str());
  CHECK(j["answer"] == "Yes");
  CHECK(j["pair_id"] == 1);
}

TEST_CASE("concurrent reviews of one pair") {
  TempDir dir;
  Store store(dir.path(), ticking());
  ingest_s1(store);
  std::atomic<int> ok{0}, dup{0};
  std::vector<std::jthread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&] {
      try {
        store.record_review(review("S1", 1, ReviewStatus::Accepted));
        ++ok;
      } catch (const Error &e) {
        if (e.code() == Errc::AlreadyReviewed) ++dup;
      }
    });
  threads.clear();
  CHECK(ok == 1);
  CHECK(dup == 7);
}

// ---------------------------------------------------------------------------
// HTTP API

namespace {

struct RunningServer {
  explicit RunningServer(Store &store) : server(store) {
    port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    thread = std::thread([this] { server.serve(); });
    for (int i = 0; i < 200 && !server.running(); ++i)
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(5);
    return c;
  }
  ReviewServer server;
  int port = 0;
  std::thread thread;
};

std::string review_body(const std::string &sid, int pid, const std::string &status) {
  return Json{{"session_id", sid}, {"pair_id", pid}, {"status", status}, {"reviewer", "ui"}}
      .dump();
}

}  // namespace

TEST_CASE("review api") {
  TempDir dir;
  Store store(dir.path(), ticking());
  ingest_s1(store);
  RunningServer srv(store);
  auto c = srv.client();

  auto res = c.Get("/api/pending");
  REQUIRE(res);
  CHECK(res->status == 200);
  auto page = Json::parse(res->body);
  CHECK(page["items"].size() == 2);
  CHECK(page["next_cursor"].is_null());
  CHECK(page["items"][0]["excerpt"][0]["text"] == "Hi, my package hasn't arrived?");

  res = c.Get("/api/pending?size=1");
  page = Json::parse(res->body);
  CHECK(page["items"].size() == 1);
  auto cursor = page["next_cursor"].get<std::string>();
  res = c.Get("/api/pending?size=1&cursor=" + httplib::detail::encode_query_param(cursor));
  CHECK(Json::parse(res->body)["items"][0]["pair"]["pair_id"] == 2);
  CHECK(c.Get("/api/pending?cursor=nope")->status == 400);
  CHECK(c.Get("/api/pending?size=abc")->status == 400);

  res = c.Post("/api/reviews", review_body("S1", 1, "accepted"), "application/json");
  CHECK(res->status == 200);
  CHECK(Json::parse(res->body)["faq"]["answer"] == "It will arrive tomorrow.");
  res = c.Post("/api/reviews", review_body("S1", 2, "reject"), "application/json");
  CHECK(res->status == 200);
  CHECK(Json::parse(res->body)["faq"].is_null());

  CHECK(c.Post("/api/reviews", review_body("S1", 1, "accepted"), "application/json")->status ==
        409);
  CHECK(c.Post("/api/reviews", review_body("S1", 7, "accepted"), "application/json")->status ==
        404);
  CHECK(c.Post("/api/reviews", "{not json", "application/json")->status == 400);
  CHECK(c.Post("/api/reviews", review_body("S1", 1, "maybe"), "application/json")->status == 400);

  res = c.Get("/api/metrics/adoption");
  auto adoption = Json::parse(res->body);
  CHECK(adoption["adoption_rate"] == 0.5);
  CHECK(adoption["accepted"] == 1);
  CHECK(adoption["pending"] == 0);
  CHECK(Json::parse(c.Get("/api/metrics/adoption?reviewer=other")->body)["adoption_rate"] == 0.0);
  CHECK(c.Get("/api/metrics/adoption?from=yesterday")->status == 400);

  res = c.Get("/api/sessions/S1");
  CHECK(res->status == 200);
  auto session = Json::parse(res->body);
  CHECK(session["utterances"].size() == 6);
  CHECK(session["reviews"][0]["status"] == "accepted");
  CHECK(c.Get("/api/sessions/missing")->status == 404);
}

TEST_CASE("concurrent POSTs for one pair") {
  TempDir dir;
  Store store(dir.path(), ticking());
  ingest_s1(store);
  RunningServer srv(store);
  std::atomic<int> ok{0}, conflict{0};
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 6; ++i)
      threads.emplace_back([&] {
        auto c = srv.client();
        auto res = c.Post("/api/reviews", review_body("S1", 1, "accepted"), "application/json");
        if (res && res->status == 200) ++ok;
        if (res && res->status == 409) ++conflict;
      });
  }
  CHECK(ok == 1);
  CHECK(conflict == 5);
}

TEST_CASE("decisions survive a server restart") {
  TempDir dir;
  {
    Store store(dir.path(), ticking());
    ingest_s1(store);
    RunningServer srv(store);
    srv.client().Post("/api/reviews", review_body("S1", 1, "accepted"), "application/json");
  }
  Store store(dir.path());
  RunningServer srv(store);
  auto page = Json::parse(srv.client().Get("/api/pending")->body);
  CHECK(page["items"].size() == 1);
}

TEST_CASE("binding a busy port fails") {
  TempDir dir;
  Store store(dir.path(), ticking());
  RunningServer first(store);
  ReviewServer second(store);
  CHECK(second.bind("127.0.0.1", first.port) == -1);
}
