#include "qae/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <tuple>

#include "qae/corpus_io.hpp"

namespace qae {

std::string format_utc(Timestamp t) {
  std::time_t secs = t.time_since_epoch().count();
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Timestamp parse_utc(const std::string &text) {
  std::tm tm{};
  char z = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &tm.tm_year, &tm.tm_mon,
                  &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &z) != 7 ||
      z != 'Z')
    throw Error(Errc::InvalidArgument, "timestamp '" + text + "' is not YYYY-MM-DDTHH:MM:SSZ");
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  return Timestamp{std::chrono::seconds{timegm(&tm)}};
}

std::string_view status_name(ReviewStatus status) {
  switch (status) {
    case ReviewStatus::Pending: return "pending";
    case ReviewStatus::Accepted: return "accepted";
    case ReviewStatus::Rejected: return "rejected";
    case ReviewStatus::Edited: return "edited";
  }
  return "?";
}

ReviewStatus parse_status(std::string_view name) {
  for (auto s : {ReviewStatus::Pending, ReviewStatus::Accepted, ReviewStatus::Rejected,
                 ReviewStatus::Edited})
    if (status_name(s) == name) return s;
  throw Error(Errc::InvalidArgument, "unknown review status '" + std::string(name) + "'");
}

namespace {

constexpr const char *kSessionsLog = "sessions.log";
constexpr const char *kExtractionsLog = "extractions.log";
constexpr const char *kReviewsLog = "reviews.log";
constexpr const char *kEpochFile = "EPOCH";

using PairKey = std::pair<std::string, int>;

Json review_to_json(const ReviewRecord &r) {
  Json j{{"session_id", r.session_id},
         {"pair_id", r.pair_id},
         {"status", status_name(r.status)},
         {"reviewer", r.reviewer},
         {"timestamp", format_utc(r.timestamp)}};
  if (r.status == ReviewStatus::Edited) {
    j["question"] = r.edited_question;
    j["answer"] = r.edited_answer;
  }
  return j;
}

ReviewRecord review_from_json(const Json &j) {
  ReviewRecord r;
  r.session_id = j.at("session_id").get<std::string>();
  r.pair_id = j.at("pair_id").get<int>();
  r.status = parse_status(j.at("status").get<std::string>());
  r.reviewer = j.value("reviewer", "");
  r.timestamp = parse_utc(j.at("timestamp").get<std::string>());
  r.edited_question = j.value("question", "");
  r.edited_answer = j.value("answer", "");
  return r;
}

Json faq_to_json(const FaqEntry &f) {
  return {{"question", f.question},
          {"answer", f.answer},
          {"session_id", f.session_id},
          {"pair_id", f.pair_id},
          {"created", format_utc(f.created)}};
}

// Reads complete lines. An unparseable final line without a terminating
// newline is a torn write: the file is truncated to drop it.
std::vector<Json> read_log(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();
  in.close();

  std::vector<Json> lines;
  std::size_t pos = 0, line_no = 0;
  while (pos < data.size()) {
    ++line_no;
    auto nl = data.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    auto end = terminated ? nl : data.size();
    std::string_view line(data.data() + pos, end - pos);
    if (!trim(line).empty()) {
      try {
        lines.push_back(Json::parse(line));
      } catch (const Json::parse_error &e) {
        if (terminated && end + 1 < data.size())
          throw Error(Errc::ParseError,
                      path.string() + ":" + std::to_string(line_no) + ": " + e.what(),
                      static_cast<int>(line_no));
        std::filesystem::resize_file(path, pos);
        break;
      }
    }
    if (!terminated) {
      // Complete JSON without newline: terminate it so appends stay separate.
      std::ofstream(path, std::ios::app | std::ios::binary) << '\n';
      break;
    }
    pos = end + 1;
  }
  return lines;
}

void write_atomically(const std::filesystem::path &path, const std::string &content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(Errc::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

class Store::Log {
 public:
  Log(std::filesystem::path path, bool durable) : path_(std::move(path)), durable_(durable) {
    fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(Errc::Io, path_.string() + ": " + std::strerror(errno));
  }
  ~Log() {
    if (fd_ >= 0) ::close(fd_);
  }
  Log(const Log &) = delete;
  Log &operator=(const Log &) = delete;

  void append(const Json &j) {
    std::string line = j.dump();
    line += '\n';
    const char *p = line.data();
    std::size_t left = line.size();
    while (left > 0) {
      auto n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::Io, path_.string() + ": " + std::strerror(errno));
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    if (durable_) ::fdatasync(fd_);
  }

 private:
  std::filesystem::path path_;
  bool durable_;
  int fd_ = -1;
};

struct Store::State {
  std::map<std::string, StoredSession> sessions;
  std::map<PairKey, ReviewRecord> reviews;
  std::vector<PairKey> review_order;
  std::vector<FaqEntry> faq;
  std::uint64_t next_seq = 1;
  std::uint64_t epoch = 0;
};

Store::Store(std::filesystem::path dir) : Store(std::move(dir), Options{}) {}

Store::Store(std::filesystem::path dir, Options options)
    : dir_(std::move(dir)), options_(std::move(options)), state_(std::make_unique<State>()) {
  if (!options_.clock)
    options_.clock = [] {
      return std::chrono::time_point_cast<std::chrono::seconds>(
          std::chrono::system_clock::now());
    };
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(Errc::Io, dir_.string() + ": " + ec.message());
  replay();
  sessions_log_ = std::make_unique<Log>(dir_ / kSessionsLog, options_.durable);
  extractions_log_ = std::make_unique<Log>(dir_ / kExtractionsLog, options_.durable);
  reviews_log_ = std::make_unique<Log>(dir_ / kReviewsLog, options_.durable);
}

Store::~Store() = default;

void Store::replay() {
  if (std::ifstream epoch_in(dir_ / kEpochFile); epoch_in) epoch_in >> state_->epoch;

  std::map<std::string, StoredSession> pending_sessions;
  for (const auto &j : read_log(dir_ / kSessionsLog)) {
    StoredSession s;
    s.session = session_from_json(j);
    s.ingested = parse_utc(j.at("ingested").get<std::string>());
    s.seq = j.at("seq").get<std::uint64_t>();
    pending_sessions[s.session.session_id] = std::move(s);
  }
  // A session whose extraction line never made it to disk is not ingested.
  for (const auto &j : read_log(dir_ / kExtractionsLog)) {
    auto extraction = extraction_from_json(j);
    auto it = pending_sessions.find(extraction.session_id);
    if (it == pending_sessions.end()) continue;
    it->second.extraction = std::move(extraction);
    apply_session(std::move(it->second));
    pending_sessions.erase(it);
  }
  for (const auto &j : read_log(dir_ / kReviewsLog)) apply_review(review_from_json(j));
}

void Store::apply_session(StoredSession stored) {
  state_->next_seq = std::max(state_->next_seq, stored.seq + 1);
  auto id = stored.session.session_id;
  state_->sessions[id] = std::move(stored);
}

FaqEntry Store::make_faq(const ReviewRecord &record) const {
  const auto &stored = state_->sessions.at(record.session_id);
  const QAPair *pair = nullptr;
  for (const auto &p : stored.extraction.pairs)
    if (p.pair_id == record.pair_id) pair = &p;
  auto join = [&](const IndexSet &indices) {
    std::string out;
    for (auto i : indices) {
      if (!out.empty()) out += '\n';
      out += trim(stored.session.at(i).text);
    }
    return out;
  };
  FaqEntry f{join(pair->question_indices), join(pair->answer_indices), record.session_id,
             record.pair_id, record.timestamp};
  if (record.status == ReviewStatus::Edited) {
    f.question = record.edited_question;
    f.answer = record.edited_answer;
  }
  return f;
}

void Store::apply_review(const ReviewRecord &record) {
  auto it = state_->sessions.find(record.session_id);
  if (it == state_->sessions.end()) return;
  const auto &pairs = it->second.extraction.pairs;
  if (std::none_of(pairs.begin(), pairs.end(),
                   [&](const QAPair &p) { return p.pair_id == record.pair_id; }))
    return;
  PairKey key{record.session_id, record.pair_id};
  if (!state_->reviews.emplace(key, record).second) return;
  state_->review_order.push_back(key);
  if (record.status == ReviewStatus::Accepted || record.status == ReviewStatus::Edited)
    state_->faq.push_back(make_faq(record));
}

void Store::ingest(const Session &session, const ExtractionResult &extraction) {
  validate_session(session);
  if (extraction.session_id != session.session_id)
    throw Error(Errc::SessionIdMismatch,
                "'" + extraction.session_id + "' vs '" + session.session_id + "'");
  check_exclusive(extraction.pairs, session.size());
  for (const auto &p : extraction.pairs)
    if (p.question_indices.empty())
      throw Error(Errc::EmptyQuestionUnion, "pair " + std::to_string(p.pair_id));

  std::unique_lock lock(mutex_);
  if (state_->sessions.count(session.session_id))
    throw Error(Errc::DuplicateSession, session.session_id);
  StoredSession stored{session, extraction, options_.clock(), state_->next_seq};
  auto sj = session_to_json(session);
  sj["ingested"] = format_utc(stored.ingested);
  sj["seq"] = stored.seq;
  sessions_log_->append(sj);
  extractions_log_->append(extraction_to_json(extraction));
  apply_session(std::move(stored));
}

ReviewAck Store::record_review(ReviewRecord record) {
  if (record.status == ReviewStatus::Pending)
    throw Error(Errc::InvalidArgument, "a review must accept, reject or edit");
  if (record.status == ReviewStatus::Edited &&
      (trim(record.edited_question).empty() || trim(record.edited_answer).empty()))
    throw Error(Errc::InvalidArgument, "edited reviews need question and answer text");
  if (record.status != ReviewStatus::Edited) {
    record.edited_question.clear();
    record.edited_answer.clear();
  }

  std::unique_lock lock(mutex_);
  auto it = state_->sessions.find(record.session_id);
  const bool known =
      it != state_->sessions.end() &&
      std::any_of(it->second.extraction.pairs.begin(), it->second.extraction.pairs.end(),
                  [&](const QAPair &p) { return p.pair_id == record.pair_id; });
  if (!known)
    throw Error(Errc::UnknownPair,
                record.session_id + "/" + std::to_string(record.pair_id));
  if (state_->reviews.count({record.session_id, record.pair_id}))
    throw Error(Errc::AlreadyReviewed,
                record.session_id + "/" + std::to_string(record.pair_id));
  if (record.timestamp == Timestamp{}) record.timestamp = options_.clock();

  reviews_log_->append(review_to_json(record));
  apply_review(record);
  ReviewAck ack{record, std::nullopt};
  if (record.status != ReviewStatus::Rejected) ack.faq = state_->faq.back();
  return ack;
}

AdoptionReport Store::adoption_report(const ReviewFilter &filter) const {
  std::shared_lock lock(mutex_);
  AdoptionReport r;
  std::size_t reviewed = 0, total = 0;
  for (const auto &[_, s] : state_->sessions) total += s.extraction.pairs.size();
  for (const auto &[_, rec] : state_->reviews) {
    ++reviewed;
    if (filter.from && rec.timestamp < *filter.from) continue;
    if (filter.to && rec.timestamp > *filter.to) continue;
    if (filter.reviewer && rec.reviewer != *filter.reviewer) continue;
    switch (rec.status) {
      case ReviewStatus::Accepted: ++r.accepted; break;
      case ReviewStatus::Rejected: ++r.rejected; break;
      case ReviewStatus::Edited: ++r.edited; break;
      case ReviewStatus::Pending: break;
    }
  }
  r.pending = total - reviewed;
  const auto decided = r.accepted + r.edited + r.rejected;
  r.adoption_rate =
      decided == 0 ? 0.0
                   : static_cast<double>(r.accepted + r.edited) / static_cast<double>(decided);
  return r;
}

PendingPage Store::list_pending(const std::string &cursor, std::size_t size) const {
  std::shared_lock lock(mutex_);

  using Key = std::tuple<std::int64_t, std::string, int>;
  std::optional<Key> after;
  if (!cursor.empty()) {
    // e<epoch>:<ingested>:<pair_id>:<session_id>
    std::uint64_t epoch = 0;
    long long ingested = 0;
    int pair_id = 0, consumed = 0;
    if (std::sscanf(cursor.c_str(), "e%lu:%lld:%d:%n", &epoch, &ingested, &pair_id,
                    &consumed) != 3 ||
        consumed == 0)
      throw Error(Errc::InvalidCursor, "malformed cursor '" + cursor + "'");
    if (epoch != state_->epoch)
      throw Error(Errc::InvalidCursor, "cursor from epoch " + std::to_string(epoch) +
                                           ", store is at " + std::to_string(state_->epoch));
    after = Key{ingested, cursor.substr(static_cast<std::size_t>(consumed)), pair_id};
  }

  std::vector<std::pair<Key, const QAPair *>> pending;
  for (const auto &[id, s] : state_->sessions)
    for (const auto &p : s.extraction.pairs)
      if (!state_->reviews.count({id, p.pair_id}))
        pending.push_back({Key{s.ingested.time_since_epoch().count(), id, p.pair_id}, &p});
  std::sort(pending.begin(), pending.end(),
            [](const auto &a, const auto &b) { return a.first < b.first; });

  auto first = pending.begin();
  if (after)
    first = std::upper_bound(pending.begin(), pending.end(), *after,
                             [](const Key &k, const auto &item) { return k < item.first; });

  PendingPage page;
  for (auto it = first; it != pending.end() && page.items.size() < size; ++it) {
    const auto &[key, pair] = *it;
    const auto &stored = state_->sessions.at(std::get<1>(key));
    PendingItem item{stored.session.session_id, {}, *pair, {}, stored.ingested};
    for (auto i = pair->span_begin(); i <= pair->span_end(); ++i)
      item.excerpt.push_back(stored.session.at(i));
    const auto indices = pair->all_indices();
    for (const auto &w : stored.extraction.warnings) {
      bool mine = (w.kind == WarningKind::RoleInconsistency &&
                   std::binary_search(indices.begin(), indices.end(), w.index)) ||
                  (w.kind == WarningKind::UnansweredQuestion && w.pair_id == pair->pair_id);
      if (mine) item.warnings.push_back(w);
    }
    page.items.push_back(std::move(item));
  }
  if (!page.items.empty() && first + static_cast<std::ptrdiff_t>(page.items.size()) !=
                                 pending.end()) {
    const auto &last = page.items.back();
    page.next_cursor = "e" + std::to_string(state_->epoch) + ":" +
                       std::to_string(last.ingested.time_since_epoch().count()) + ":" +
                       std::to_string(last.pair.pair_id) + ":" + last.session_id;
  }
  return page;
}

std::optional<StoredSession> Store::session(const std::string &session_id) const {
  std::shared_lock lock(mutex_);
  auto it = state_->sessions.find(session_id);
  if (it == state_->sessions.end()) return std::nullopt;
  return it->second;
}

std::optional<ReviewRecord> Store::review(const std::string &session_id, int pair_id) const {
  std::shared_lock lock(mutex_);
  auto it = state_->reviews.find({session_id, pair_id});
  if (it == state_->reviews.end()) return std::nullopt;
  return it->second;
}

std::vector<FaqEntry> Store::faq_entries() const {
  std::shared_lock lock(mutex_);
  return state_->faq;
}

std::size_t Store::session_count() const {
  std::shared_lock lock(mutex_);
  return state_->sessions.size();
}

std::uint64_t Store::epoch() const {
  std::shared_lock lock(mutex_);
  return state_->epoch;
}

void Store::compact() {
  std::unique_lock lock(mutex_);
  std::vector<const StoredSession *> by_seq;
  for (const auto &[_, s] : state_->sessions) by_seq.push_back(&s);
  std::sort(by_seq.begin(), by_seq.end(),
            [](const auto *a, const auto *b) { return a->seq < b->seq; });
  std::string sessions, extractions, reviews;
  for (const auto *s : by_seq) {
    auto sj = session_to_json(s->session);
    sj["ingested"] = format_utc(s->ingested);
    sj["seq"] = s->seq;
    sessions += sj.dump() + '\n';
    extractions += extraction_to_json(s->extraction).dump() + '\n';
  }
  for (const auto &key : state_->review_order)
    reviews += review_to_json(state_->reviews.at(key)).dump() + '\n';

  sessions_log_.reset();
  extractions_log_.reset();
  reviews_log_.reset();
  write_atomically(dir_ / kSessionsLog, sessions);
  write_atomically(dir_ / kExtractionsLog, extractions);
  write_atomically(dir_ / kReviewsLog, reviews);
  ++state_->epoch;
  write_atomically(dir_ / kEpochFile, std::to_string(state_->epoch) + '\n');
  sessions_log_ = std::make_unique<Log>(dir_ / kSessionsLog, options_.durable);
  extractions_log_ = std::make_unique<Log>(dir_ / kExtractionsLog, options_.durable);
  reviews_log_ = std::make_unique<Log>(dir_ / kReviewsLog, options_.durable);
}

std::string Store::state_digest() const {
  std::shared_lock lock(mutex_);
  Json sessions = Json::array();
  for (const auto &[id, s] : state_->sessions) {
    Json j = session_to_json(s.session);
    j["ingested"] = format_utc(s.ingested);
    j["seq"] = s.seq;
    j["extraction"] = extraction_to_json(s.extraction);
    sessions.push_back(std::move(j));
  }
  Json reviews = Json::array();
  for (const auto &key : state_->review_order)
    reviews.push_back(review_to_json(state_->reviews.at(key)));
  Json faq = Json::array();
  for (const auto &f : state_->faq) faq.push_back(faq_to_json(f));
  return Json{{"sessions", sessions}, {"reviews", reviews}, {"faq", faq}}.dump();
}

void Store::export_faq_jsonl(std::ostream &out) const {
  for (const auto &f : faq_entries()) out << faq_to_json(f).dump() << '\n';
}

void Store::export_faq_csv(std::ostream &out) const {
  out << "question,answer,session_id,pair_id,created\r\n";
  for (const auto &f : faq_entries())
    out << csv_field(f.question) << ',' << csv_field(f.answer) << ',' << csv_field(f.session_id)
        << ',' << f.pair_id << ',' << format_utc(f.created) << "\r\n";
}

}  // namespace qae
