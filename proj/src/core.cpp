#include "qae/core.hpp"

#include <algorithm>
#include <unordered_set>

namespace qae {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::NonContiguousIndices: return "NonContiguousIndices";
    case Errc::EmptyUtterance: return "EmptyUtterance";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::EmptyQuestionUnion: return "EmptyQuestionUnion";
    case Errc::EmptyUnion: return "EmptyUnion";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::OverlappingUnions: return "OverlappingUnions";
    case Errc::TaggerFailure: return "TaggerFailure";
    case Errc::ModeUnsupported: return "ModeUnsupported";
    case Errc::SessionIdMismatch: return "SessionIdMismatch";
    case Errc::IdenticalSpans: return "IdenticalSpans";
    case Errc::Timeout: return "Timeout";
    case Errc::ConnectionFailed: return "ConnectionFailed";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::HttpStatus: return "HttpStatus";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownPair: return "UnknownPair";
    case Errc::AlreadyReviewed: return "AlreadyReviewed";
    case Errc::InvalidCursor: return "InvalidCursor";
    case Errc::DuplicateSession: return "DuplicateSession";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

SpeakerRole opposite(SpeakerRole role) {
  return role == SpeakerRole::Customer ? SpeakerRole::Agent : SpeakerRole::Customer;
}

RoleNames::RoleNames(std::string customer, std::string agent)
    : customer_(std::move(customer)), agent_(std::move(agent)) {
  if (customer_.empty() || agent_.empty())
    throw Error(Errc::InvalidArgument, "role names must be non-empty");
  if (customer_ == agent_)
    throw Error(Errc::InvalidArgument, "role names must differ: " + customer_);
}

SpeakerRole RoleNames::parse(std::string_view surface) const {
  if (surface == customer_) return SpeakerRole::Customer;
  if (surface == agent_) return SpeakerRole::Agent;
  throw Error(Errc::InvalidArgument, "unknown role '" + std::string(surface) + "'");
}

const Utterance &Session::at(std::size_t index) const {
  if (index == 0 || index > utterances.size())
    throw Error(Errc::IndexOutOfRange, "utterance " + std::to_string(index) +
                                           " not in 1.." + std::to_string(utterances.size()));
  return utterances[index - 1];
}

Session make_session(std::string session_id,
                     std::vector<std::pair<SpeakerRole, std::string>> turns) {
  Session s{std::move(session_id), {}};
  s.utterances.reserve(turns.size());
  std::size_t i = 0;
  for (auto &[role, text] : turns) s.utterances.push_back({++i, role, std::move(text)});
  return s;
}

std::string_view category_name(PairCategory category) {
  switch (category) {
    case PairCategory::OneOne: return "1-1";
    case PairCategory::OneN: return "1-N";
    case PairCategory::NOne: return "N-1";
    case PairCategory::NN: return "N-N";
  }
  return "?";
}

IndexSet QAPair::all_indices() const {
  IndexSet all;
  all.reserve(question_indices.size() + answer_indices.size());
  std::merge(question_indices.begin(), question_indices.end(), answer_indices.begin(),
             answer_indices.end(), std::back_inserter(all));
  return all;
}

std::size_t QAPair::span_begin() const {
  std::size_t lo = question_indices.empty() ? SIZE_MAX : question_indices.front();
  if (!answer_indices.empty()) lo = std::min(lo, answer_indices.front());
  return lo;
}

std::size_t QAPair::span_end() const {
  std::size_t hi = question_indices.empty() ? 0 : question_indices.back();
  if (!answer_indices.empty()) hi = std::max(hi, answer_indices.back());
  return hi;
}

QAPair make_qa_pair(int pair_id, IndexSet questions, IndexSet answers) {
  std::sort(questions.begin(), questions.end());
  std::sort(answers.begin(), answers.end());
  questions.erase(std::unique(questions.begin(), questions.end()), questions.end());
  answers.erase(std::unique(answers.begin(), answers.end()), answers.end());
  QAPair p{pair_id, std::move(questions), std::move(answers)};
  p.unanswered = p.answer_indices.empty();
  p.category = categorize_pair(p);
  return p;
}

std::string_view warning_kind_name(WarningKind kind) {
  switch (kind) {
    case WarningKind::RoleInconsistency: return "RoleInconsistency";
    case WarningKind::AnswerWithoutQuestion: return "AnswerWithoutQuestion";
    case WarningKind::UnansweredQuestion: return "UnansweredQuestion";
    case WarningKind::MalformedModelOutput: return "MalformedModelOutput";
    case WarningKind::TaggerFailure: return "TaggerFailure";
  }
  return "?";
}

Warning Warning::role_inconsistency(std::size_t index, SpeakerRole expected) {
  Warning w;
  w.kind = WarningKind::RoleInconsistency;
  w.index = index;
  w.expected_role = expected;
  w.message = "utterance " + std::to_string(index) + " expected from " +
              (expected == SpeakerRole::Customer ? "customer" : "agent");
  return w;
}

Warning Warning::answer_without_question(int pair_id) {
  Warning w;
  w.kind = WarningKind::AnswerWithoutQuestion;
  w.pair_id = pair_id;
  w.message = "answer group " + std::to_string(pair_id) + " has no question; dropped";
  return w;
}

Warning Warning::unanswered_question(int pair_id) {
  Warning w;
  w.kind = WarningKind::UnansweredQuestion;
  w.pair_id = pair_id;
  w.message = "question " + std::to_string(pair_id) + " has no answer";
  return w;
}

Warning Warning::malformed_output(std::string detail) {
  Warning w;
  w.kind = WarningKind::MalformedModelOutput;
  w.message = "malformed model output: " + detail;
  w.detail = std::move(detail);
  return w;
}

Warning Warning::tagger_failure(std::string detail) {
  Warning w;
  w.kind = WarningKind::TaggerFailure;
  w.message = "tagger failure: " + detail;
  w.detail = std::move(detail);
  return w;
}

std::string trim(std::string_view text) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  auto b = text.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = text.find_last_not_of(ws);
  return std::string(text.substr(b, e - b + 1));
}

std::vector<Warning> validate_session(const Session &session) {
  if (session.utterances.empty())
    throw Error(Errc::NonContiguousIndices, "session '" + session.session_id + "' is empty");
  for (std::size_t i = 0; i < session.utterances.size(); ++i) {
    const auto &u = session.utterances[i];
    if (u.index != i + 1)
      throw Error(Errc::NonContiguousIndices,
                  "session '" + session.session_id + "': position " + std::to_string(i + 1) +
                      " has index " + std::to_string(u.index));
    if (trim(u.text).empty())
      throw Error(Errc::EmptyUtterance, "session '" + session.session_id + "': utterance " +
                                            std::to_string(u.index) + " is empty");
  }
  return {};
}

std::vector<Warning> check_role_consistency(const ExtractionResult &result,
                                            const Session &session) {
  std::vector<Warning> out;
  for (const auto &p : result.pairs) {
    for (auto i : p.question_indices)
      if (session.at(i).role != SpeakerRole::Customer)
        out.push_back(Warning::role_inconsistency(i, SpeakerRole::Customer));
    for (auto i : p.answer_indices)
      if (session.at(i).role != SpeakerRole::Agent)
        out.push_back(Warning::role_inconsistency(i, SpeakerRole::Agent));
  }
  return out;
}

PairCategory categorize_pair(const QAPair &pair) {
  const auto nq = pair.question_indices.size();
  const auto na = pair.answer_indices.size();
  if (nq == 0) throw Error(Errc::EmptyQuestionUnion, "pair " + std::to_string(pair.pair_id));
  if (nq == 1) return na == 1 ? PairCategory::OneOne : PairCategory::OneN;
  return na == 1 ? PairCategory::NOne : PairCategory::NN;
}

void check_exclusive(const std::vector<QAPair> &pairs, std::size_t n) {
  std::unordered_set<std::size_t> seen;
  for (const auto &p : pairs) {
    for (const auto *set : {&p.question_indices, &p.answer_indices}) {
      for (auto i : *set) {
        if (i == 0 || (n != 0 && i > n))
          throw Error(Errc::IndexOutOfRange, "index " + std::to_string(i) + " in pair " +
                                                 std::to_string(p.pair_id));
        if (!seen.insert(i).second)
          throw Error(Errc::OverlappingUnions, "utterance " + std::to_string(i) +
                                                   " appears in more than one union");
      }
    }
  }
}

}  // namespace qae
