#ifndef QAE_STRUCTURE_HPP
#define QAE_STRUCTURE_HPP

// Positional dialogue-structure taxonomy: relations between consecutive QA
// pairs and the shape of question/answer interleaving inside one pair.

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qae/core.hpp"

namespace qae {

enum class BetweenRelation {
  SF,   // sequential flow
  FIS,  // follow-up information seeking
  CC,   // clarification / confirmation
  BI,   // barge-in / interruption
  ED,   // elaboration / detailing
};
inline constexpr std::array kAllRelations{BetweenRelation::SF, BetweenRelation::FIS,
                                          BetweenRelation::CC, BetweenRelation::BI,
                                          BetweenRelation::ED};

enum class InPairShape { Disjoint, OverlapQA, OverlapQAQ };
inline constexpr std::array kAllShapes{InPairShape::Disjoint, InPairShape::OverlapQA,
                                       InPairShape::OverlapQAQ};

std::string_view relation_name(BetweenRelation relation);
std::string_view shape_name(InPairShape shape);

struct PairRelation {
  BetweenRelation relation = BetweenRelation::SF;
  // Overlap that is neither nesting nor a clean crossing; reported as ED.
  bool irregular = false;
};

// Majority role over the question union; ties go to the earliest question
// utterance.
SpeakerRole questioner_of(const QAPair &pair, const Session &session);

// With span(x) = [min, max] over Q ∪ A and p ordered before q:
//   disjoint spans          -> SF (same questioner) / FIS (switched)
//   one span nested in other -> BI (same questioner) / CC (switched)
//   min(p) < min(q) <= max(p) < max(q) -> ED
//   anything else           -> ED, irregular
// Throws IdenticalSpans when both spans coincide.
PairRelation relate_adjacent_pairs(const QAPair &p, const QAPair &q, const Session &session);

// Disjoint iff max(Q) < min(A); otherwise OverlapQA when the last utterance
// of the pair is an answer, else OverlapQAQ. Throws EmptyUnion.
InPairShape classify_in_pair_shape(const QAPair &pair);

struct SessionRelations {
  std::string session_id;
  std::vector<PairRelation> relations;  // one per consecutive pair
};

struct StructureProfile {
  std::map<BetweenRelation, std::size_t> relation_counts;
  std::map<InPairShape, std::size_t> shape_counts;
  std::size_t irregular_overlaps = 0;
  std::vector<SessionRelations> sessions;

  std::size_t relation_total() const;
  std::size_t shape_total() const;
  double relation_fraction(BetweenRelation relation) const;
  double shape_fraction(InPairShape shape) const;
};

// Relations between consecutive pairs (by smallest question index) in each
// session; shapes for every pair with both unions non-empty.
StructureProfile session_structure_profile(std::span<const AnnotatedSession> corpus);

}  // namespace qae

#endif  // QAE_STRUCTURE_HPP
