#ifndef QAE_STORE_HPP
#define QAE_STORE_HPP

// Review store behind the FAQ workflow. State lives in three append-only
// line-delimited JSON logs inside one directory:
//
//   sessions.log     {"session_id", "utterances", "ingested", "seq"}
//   extractions.log  extraction line (see corpus_io.hpp)
//   reviews.log      {"session_id", "pair_id", "status", "reviewer",
//                     "timestamp", ["question", "answer"]}
//
// plus EPOCH, bumped by compaction so that outstanding cursors go stale. The
// materialized index is rebuilt from the logs when a Store is opened; a torn
// final line left by a crash is discarded.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "qae/core.hpp"

namespace qae {

using Timestamp = std::chrono::sys_seconds;

std::string format_utc(Timestamp t);  // 2026-10-16T08:30:00Z
Timestamp parse_utc(const std::string &text);

enum class ReviewStatus { Pending, Accepted, Rejected, Edited };

std::string_view status_name(ReviewStatus status);  // "pending", "accepted", ...
ReviewStatus parse_status(std::string_view name);

struct ReviewRecord {
  std::string session_id;
  int pair_id = 0;
  ReviewStatus status = ReviewStatus::Pending;
  std::string edited_question;  // Edited only
  std::string edited_answer;    // Edited only
  std::string reviewer;
  Timestamp timestamp{};
};

struct FaqEntry {
  std::string question;
  std::string answer;
  std::string session_id;
  int pair_id = 0;
  Timestamp created{};
};

struct AdoptionReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t edited = 0;
  std::size_t pending = 0;
  double adoption_rate = 0.0;  // (accepted + edited) / (accepted + edited + rejected)
};

struct ReviewFilter {
  std::optional<Timestamp> from;  // inclusive
  std::optional<Timestamp> to;    // inclusive
  std::optional<std::string> reviewer;
};

struct PendingItem {
  std::string session_id;
  std::vector<Utterance> excerpt;  // utterances spanned by the pair
  QAPair pair;
  std::vector<Warning> warnings;   // warnings that concern this pair
  Timestamp ingested{};
};

struct PendingPage {
  std::vector<PendingItem> items;
  std::optional<std::string> next_cursor;
};

struct StoredSession {
  Session session;
  ExtractionResult extraction;
  Timestamp ingested{};
  std::uint64_t seq = 0;
};

struct ReviewAck {
  ReviewRecord record;
  std::optional<FaqEntry> faq;
};

class Store {
 public:
  using Clock = std::function<Timestamp()>;

  struct Options {
    bool durable = true;  // fdatasync after every append
    Clock clock;          // defaults to the system clock
  };

  // Creates the directory and empty logs when missing, then replays.
  explicit Store(std::filesystem::path dir);
  Store(std::filesystem::path dir, Options options);
  ~Store();

  Store(const Store &) = delete;
  Store &operator=(const Store &) = delete;

  const std::filesystem::path &dir() const { return dir_; }

  // Validates the session and union exclusivity. Throws DuplicateSession.
  void ingest(const Session &session, const ExtractionResult &extraction);

  // Throws UnknownPair, AlreadyReviewed, or InvalidArgument for a Pending
  // status or an Edited record with empty texts. A zero timestamp is
  // replaced by the clock.
  ReviewAck record_review(ReviewRecord record);

  AdoptionReport adoption_report(const ReviewFilter &filter = {}) const;

  // Ordered by (ingest time, session_id, pair_id). An empty cursor starts
  // at the beginning. Throws InvalidCursor.
  PendingPage list_pending(const std::string &cursor, std::size_t size) const;

  std::optional<StoredSession> session(const std::string &session_id) const;
  std::optional<ReviewRecord> review(const std::string &session_id, int pair_id) const;
  std::vector<FaqEntry> faq_entries() const;
  std::size_t session_count() const;

  // Rewrites the logs from the materialized state and bumps the epoch.
  void compact();
  std::uint64_t epoch() const;

  // Canonical dump of the materialized state, for replay comparisons.
  std::string state_digest() const;

  void export_faq_jsonl(std::ostream &out) const;
  void export_faq_csv(std::ostream &out) const;

 private:
  struct State;
  class Log;

  void replay();
  void apply_session(StoredSession stored);
  void apply_review(const ReviewRecord &record);
  FaqEntry make_faq(const ReviewRecord &record) const;

  std::filesystem::path dir_;
  Options options_;
  std::unique_ptr<State> state_;
  std::unique_ptr<Log> sessions_log_, extractions_log_, reviews_log_;
  mutable std::shared_mutex mutex_;
};

}  // namespace qae

#endif  // QAE_STORE_HPP
