#include "qae/metrics.hpp"

#include <set>

#include "qae/codec.hpp"
#include "qae/structure.hpp"

namespace qae {

double safe_ratio(std::size_t numerator, std::size_t denominator) {
  return denominator == 0 ? 0.0
                          : static_cast<double>(numerator) / static_cast<double>(denominator);
}

double harmonic_mean(double a, double b) { return a + b > 0.0 ? 2.0 * a * b / (a + b) : 0.0; }

UtteranceScores utterance_metrics(std::span<const LabelSequence> predictions,
                                  std::span<const LabelSequence> references, bool raw_ids) {
  if (predictions.size() != references.size())
    throw Error(Errc::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                          std::to_string(references.size()) + " references");
  UtteranceScores s;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].size() != references[i].size())
      throw Error(Errc::LengthMismatch, "instance " + std::to_string(i) + ": " +
                                            std::to_string(predictions[i].size()) + " vs " +
                                            std::to_string(references[i].size()) + " labels");
    const auto pred = raw_ids ? predictions[i] : normalize_labels(predictions[i]);
    const auto ref = raw_ids ? references[i] : normalize_labels(references[i]);
    for (std::size_t j = 0; j < pred.size(); ++j) {
      if (!pred[j].is_outside()) ++s.predicted;
      if (!ref[j].is_outside()) ++s.reference;
      if (!pred[j].is_outside() && pred[j] == ref[j]) ++s.correct;
    }
  }
  s.precision = safe_ratio(s.correct, s.predicted);
  s.recall = safe_ratio(s.correct, s.reference);
  s.f1 = harmonic_mean(s.precision, s.recall);
  return s;
}

namespace {

using PairKey = std::pair<IndexSet, IndexSet>;

std::set<PairKey> pair_keys(const ExtractionResult &r) {
  std::set<PairKey> keys;
  for (const auto &p : r.pairs) keys.emplace(p.question_indices, p.answer_indices);
  return keys;
}

void check_aligned(std::span<const ExtractionResult> predicted,
                   std::span<const ExtractionResult> reference) {
  if (predicted.size() != reference.size())
    throw Error(Errc::SessionIdMismatch, std::to_string(predicted.size()) +
                                             " predicted sessions for " +
                                             std::to_string(reference.size()) + " references");
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i].session_id != reference[i].session_id)
      throw Error(Errc::SessionIdMismatch, "position " + std::to_string(i) + ": '" +
                                               predicted[i].session_id + "' vs '" +
                                               reference[i].session_id + "'");
}

}  // namespace

SessionScores session_metrics(std::span<const ExtractionResult> predicted,
                              std::span<const ExtractionResult> reference) {
  check_aligned(predicted, reference);
  SessionScores s;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto pred = pair_keys(predicted[i]);
    const auto ref = pair_keys(reference[i]);
    s.predicted_pairs += pred.size();
    s.reference_pairs += ref.size();
    for (const auto &k : pred) s.matched_pairs += ref.count(k);
  }
  s.adoption_rate = safe_ratio(s.matched_pairs, s.predicted_pairs);
  s.hit_rate = safe_ratio(s.matched_pairs, s.reference_pairs);
  s.session_f1 = harmonic_mean(s.hit_rate, s.adoption_rate);
  return s;
}

std::string_view grouping_name(Grouping grouping) {
  switch (grouping) {
    case Grouping::Category: return "category";
    case Grouping::InPairShape: return "in_pair_shape";
    case Grouping::BetweenRelation: return "between_relation";
  }
  return "?";
}

std::map<std::string, GroupRecall> grouped_recall(std::span<const ExtractionResult> predicted,
                                                  std::span<const ExtractionResult> reference,
                                                  Grouping grouping,
                                                  std::span<const Session> sessions) {
  check_aligned(predicted, reference);
  if (grouping == Grouping::BetweenRelation && sessions.size() != reference.size())
    throw Error(Errc::InvalidArgument, "relation grouping needs the reference sessions");

  std::map<std::string, GroupRecall> groups;
  switch (grouping) {
    case Grouping::Category:
      for (auto c : {PairCategory::OneOne, PairCategory::OneN, PairCategory::NOne,
                     PairCategory::NN})
        groups[std::string(category_name(c))];
      break;
    case Grouping::InPairShape:
      for (auto s : kAllShapes) groups[std::string(shape_name(s))];
      break;
    case Grouping::BetweenRelation:
      for (auto r : kAllRelations) groups[std::string(relation_name(r))];
      break;
  }

  auto count = [&](const std::string &group, const QAPair &pair, const std::set<PairKey> &pred) {
    auto &g = groups[group];
    ++g.total;
    if (pred.count({pair.question_indices, pair.answer_indices})) ++g.matched;
  };

  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto pred = pair_keys(predicted[i]);
    const auto &pairs = reference[i].pairs;
    if (grouping == Grouping::Category) {
      for (const auto &p : pairs) count(std::string(category_name(categorize_pair(p))), p, pred);
    } else if (grouping == Grouping::InPairShape) {
      for (const auto &p : pairs)
        if (!p.unanswered) count(std::string(shape_name(classify_in_pair_shape(p))), p, pred);
    } else {
      std::map<BetweenRelation, std::set<std::size_t>> members;
      for (std::size_t k = 0; k + 1 < pairs.size(); ++k) {
        auto rel = relate_adjacent_pairs(pairs[k], pairs[k + 1], sessions[i]).relation;
        members[rel].insert(k);
        members[rel].insert(k + 1);
      }
      for (const auto &[rel, idx] : members)
        for (auto k : idx) count(std::string(relation_name(rel)), pairs[k], pred);
    }
  }
  for (auto &[_, g] : groups) g.recall = safe_ratio(g.matched, g.total);
  return groups;
}

CorpusStats corpus_stats(std::span<const AnnotatedSession> corpus) {
  CorpusStats s;
  for (auto c : {PairCategory::OneOne, PairCategory::OneN, PairCategory::NOne, PairCategory::NN})
    s.category_counts[c] = 0;
  std::size_t utterances = 0, questions = 0, answers = 0, distance = 0;
  for (const auto &[session, result] : corpus) {
    ++s.n_sessions;
    utterances += session.size();
    for (const auto &p : result.pairs) {
      ++s.n_pairs;
      questions += p.question_indices.size();
      answers += p.answer_indices.size();
      distance += p.span_end() - p.span_begin();
      ++s.category_counts[categorize_pair(p)];
    }
  }
  s.avg_us = safe_ratio(utterances, s.n_sessions);
  s.avg_qs = safe_ratio(questions, s.n_sessions);
  s.avg_as = safe_ratio(answers, s.n_sessions);
  s.dist_qa = safe_ratio(distance, s.n_pairs);
  for (const auto &[c, n] : s.category_counts) s.category_ratios[c] = safe_ratio(n, s.n_pairs);
  return s;
}

}  // namespace qae
