#include "qae/structure.hpp"

#include <algorithm>

namespace qae {

std::string_view relation_name(BetweenRelation relation) {
  switch (relation) {
    case BetweenRelation::SF: return "SF";
    case BetweenRelation::FIS: return "FIS";
    case BetweenRelation::CC: return "CC";
    case BetweenRelation::BI: return "BI";
    case BetweenRelation::ED: return "ED";
  }
  return "?";
}

std::string_view shape_name(InPairShape shape) {
  switch (shape) {
    case InPairShape::Disjoint: return "Disjoint";
    case InPairShape::OverlapQA: return "OverlapQA";
    case InPairShape::OverlapQAQ: return "OverlapQAQ";
  }
  return "?";
}

SpeakerRole questioner_of(const QAPair &pair, const Session &session) {
  if (pair.question_indices.empty())
    throw Error(Errc::EmptyQuestionUnion, "pair " + std::to_string(pair.pair_id));
  std::size_t customer = 0;
  for (auto i : pair.question_indices)
    if (session.at(i).role == SpeakerRole::Customer) ++customer;
  const std::size_t agent = pair.question_indices.size() - customer;
  if (customer != agent) return customer > agent ? SpeakerRole::Customer : SpeakerRole::Agent;
  return session.at(pair.question_indices.front()).role;
}

PairRelation relate_adjacent_pairs(const QAPair &p, const QAPair &q, const Session &session) {
  const auto p_lo = p.span_begin(), p_hi = p.span_end();
  const auto q_lo = q.span_begin(), q_hi = q.span_end();
  if (p_lo == q_lo && p_hi == q_hi)
    throw Error(Errc::IdenticalSpans, "pairs " + std::to_string(p.pair_id) + " and " +
                                          std::to_string(q.pair_id) + " span [" +
                                          std::to_string(p_lo) + "," + std::to_string(p_hi) + "]");
  const bool same_asker = questioner_of(p, session) == questioner_of(q, session);

  if (p_hi < q_lo || q_hi < p_lo)
    return {same_asker ? BetweenRelation::SF : BetweenRelation::FIS};
  const bool q_in_p = p_lo <= q_lo && q_hi <= p_hi;
  const bool p_in_q = q_lo <= p_lo && p_hi <= q_hi;
  if (q_in_p || p_in_q) return {same_asker ? BetweenRelation::BI : BetweenRelation::CC};
  if (p_lo < q_lo && q_lo <= p_hi && p_hi < q_hi) return {BetweenRelation::ED};
  return {BetweenRelation::ED, true};
}

InPairShape classify_in_pair_shape(const QAPair &pair) {
  if (pair.question_indices.empty() || pair.answer_indices.empty())
    throw Error(Errc::EmptyUnion, "pair " + std::to_string(pair.pair_id) +
                                      " needs both a question and an answer union");
  if (pair.question_indices.back() < pair.answer_indices.front()) return InPairShape::Disjoint;
  return pair.answer_indices.back() > pair.question_indices.back() ? InPairShape::OverlapQA
                                                                   : InPairShape::OverlapQAQ;
}

std::size_t StructureProfile::relation_total() const {
  std::size_t total = 0;
  for (const auto &[_, n] : relation_counts) total += n;
  return total;
}

std::size_t StructureProfile::shape_total() const {
  std::size_t total = 0;
  for (const auto &[_, n] : shape_counts) total += n;
  return total;
}

double StructureProfile::relation_fraction(BetweenRelation relation) const {
  auto total = relation_total();
  auto it = relation_counts.find(relation);
  if (total == 0 || it == relation_counts.end()) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(total);
}

double StructureProfile::shape_fraction(InPairShape shape) const {
  auto total = shape_total();
  auto it = shape_counts.find(shape);
  if (total == 0 || it == shape_counts.end()) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(total);
}

StructureProfile session_structure_profile(std::span<const AnnotatedSession> corpus) {
  StructureProfile profile;
  for (auto r : kAllRelations) profile.relation_counts[r] = 0;
  for (auto s : kAllShapes) profile.shape_counts[s] = 0;
  for (const auto &[session, result] : corpus) {
    std::vector<const QAPair *> pairs;
    for (const auto &p : result.pairs)
      if (!p.question_indices.empty()) pairs.push_back(&p);
    std::sort(pairs.begin(), pairs.end(), [](const QAPair *a, const QAPair *b) {
      return a->question_indices.front() < b->question_indices.front();
    });
    SessionRelations rel{session.session_id, {}};
    for (std::size_t k = 0; k + 1 < pairs.size(); ++k) {
      auto relation = relate_adjacent_pairs(*pairs[k], *pairs[k + 1], session);
      ++profile.relation_counts[relation.relation];
      if (relation.irregular) ++profile.irregular_overlaps;
      rel.relations.push_back(relation);
    }
    profile.sessions.push_back(std::move(rel));
    for (const auto *p : pairs)
      if (!p->answer_indices.empty()) ++profile.shape_counts[classify_in_pair_shape(*p)];
  }
  return profile;
}

}  // namespace qae
