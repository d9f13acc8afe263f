#ifndef QAE_CORE_HPP
#define QAE_CORE_HPP

// Domain types for two-party dialogue sessions, per-utterance QA labels and
// the question/answer unions collected from them.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qae/error.hpp"

namespace qae {

enum class SpeakerRole { Customer, Agent };

SpeakerRole opposite(SpeakerRole role);

// Surface strings for the two roles. Corpora differ ("C"/"A",
// "Patient"/"Doctor"), so the pair is configurable.
class RoleNames {
 public:
  RoleNames() = default;
  // Throws InvalidArgument when a name is empty or both names are equal.
  RoleNames(std::string customer, std::string agent);

  const std::string &name(SpeakerRole role) const {
    return role == SpeakerRole::Customer ? customer_ : agent_;
  }
  // Throws InvalidArgument for a surface matching neither role.
  SpeakerRole parse(std::string_view surface) const;

 private:
  std::string customer_ = "C";
  std::string agent_ = "A";
};

struct Utterance {
  std::size_t index = 0;  // 1-based
  SpeakerRole role = SpeakerRole::Customer;
  std::string text;
};

struct Session {
  std::string session_id;
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  // 1-based access.
  const Utterance &at(std::size_t index) const;
};

// Builds a session with indices 1..n from (role, text) turns.
Session make_session(std::string session_id,
                     std::vector<std::pair<SpeakerRole, std::string>> turns);

struct QALabel {
  enum class Kind { Outside, Question, Answer };

  Kind kind = Kind::Outside;
  int pair_id = 0;  // >= 1 unless Outside

  static QALabel outside() { return {}; }
  static QALabel question(int id) { return {Kind::Question, id}; }
  static QALabel answer(int id) { return {Kind::Answer, id}; }

  bool is_outside() const { return kind == Kind::Outside; }
  bool is_question() const { return kind == Kind::Question; }
  bool is_answer() const { return kind == Kind::Answer; }

  friend bool operator==(const QALabel &, const QALabel &) = default;
};

using LabelSequence = std::vector<QALabel>;

enum class PairCategory { OneOne, OneN, NOne, NN };

std::string_view category_name(PairCategory category);  // "1-1", "1-N", ...

using IndexSet = std::vector<std::size_t>;  // ascending, unique

struct QAPair {
  int pair_id = 0;
  IndexSet question_indices;
  IndexSet answer_indices;
  PairCategory category = PairCategory::OneOne;
  bool unanswered = false;

  // All indices of the pair, ascending.
  IndexSet all_indices() const;
  std::size_t span_begin() const;
  std::size_t span_end() const;
};

// Builds a pair and derives category/unanswered. Indices are sorted.
QAPair make_qa_pair(int pair_id, IndexSet questions, IndexSet answers);

enum class WarningKind {
  RoleInconsistency,
  AnswerWithoutQuestion,
  UnansweredQuestion,
  MalformedModelOutput,
  TaggerFailure,
};

std::string_view warning_kind_name(WarningKind kind);

struct Warning {
  WarningKind kind = WarningKind::MalformedModelOutput;
  std::size_t index = 0;                          // RoleInconsistency
  SpeakerRole expected_role = SpeakerRole::Customer;  // RoleInconsistency
  int pair_id = 0;      // AnswerWithoutQuestion, UnansweredQuestion
  std::string detail;   // MalformedModelOutput, TaggerFailure
  std::string message;

  static Warning role_inconsistency(std::size_t index, SpeakerRole expected);
  static Warning answer_without_question(int pair_id);
  static Warning unanswered_question(int pair_id);
  static Warning malformed_output(std::string detail);
  static Warning tagger_failure(std::string detail);
};

struct ExtractionResult {
  std::string session_id;
  std::vector<QAPair> pairs;
  LabelSequence labels;
  std::vector<Warning> warnings;
};

struct AnnotatedSession {
  Session session;
  ExtractionResult result;
};

// Structural errors throw (NonContiguousIndices, EmptyUtterance). Sessions
// carry no soft issues of their own, so the returned list is currently empty
// for every valid session.
std::vector<Warning> validate_session(const Session &session);

// One RoleInconsistency per agent utterance in a question union and per
// customer utterance in an answer union.
std::vector<Warning> check_role_consistency(const ExtractionResult &result,
                                            const Session &session);

// |A| = 0 reports as 1-N (|Q| = 1) or N-N (|Q| > 1).
PairCategory categorize_pair(const QAPair &pair);

// Throws OverlappingUnions or IndexOutOfRange (n = 0 skips the range check).
void check_exclusive(const std::vector<QAPair> &pairs, std::size_t n = 0);

std::string trim(std::string_view text);

}  // namespace qae

#endif  // QAE_CORE_HPP
