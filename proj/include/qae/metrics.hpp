#ifndef QAE_METRICS_HPP
#define QAE_METRICS_HPP

// Utterance-level P/R/F1 over non-O labels, session-level adoption/hit rate
// over exact pair matches, grouped recall and corpus statistics.
//
// Every ratio with a zero denominator is 0, and F1 is 0 when P + R = 0.

#include <map>
#include <span>
#include <string>

#include "qae/core.hpp"

namespace qae {

struct UtteranceScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t predicted = 0;  // predicted labels != O
  std::size_t reference = 0;  // reference labels != O
  std::size_t correct = 0;    // != O and equal to the reference
};

struct SessionScores {
  double adoption_rate = 0.0;
  double hit_rate = 0.0;
  double session_f1 = 0.0;
  std::size_t predicted_pairs = 0;
  std::size_t reference_pairs = 0;
  std::size_t matched_pairs = 0;
};

double safe_ratio(std::size_t numerator, std::size_t denominator);
double harmonic_mean(double a, double b);

// Micro-averaged over the corpus. Both sides are canonicalized with
// normalize_labels unless `raw_ids` is set. Throws LengthMismatch.
UtteranceScores utterance_metrics(std::span<const LabelSequence> predictions,
                                  std::span<const LabelSequence> references,
                                  bool raw_ids = false);

// Pairs match when both index sets are equal. Results are aligned by
// position and must agree on session_id (SessionIdMismatch).
SessionScores session_metrics(std::span<const ExtractionResult> predicted,
                              std::span<const ExtractionResult> reference);

enum class Grouping { Category, InPairShape, BetweenRelation };

std::string_view grouping_name(Grouping grouping);

struct GroupRecall {
  std::size_t matched = 0;
  std::size_t total = 0;
  double recall = 0.0;
};

// Recall of reference pairs per group. InPairShape skips unanswered pairs;
// BetweenRelation puts both members of every consecutive-pair relation into
// that relation's bucket (once per bucket) and needs `sessions` aligned with
// `reference`.
std::map<std::string, GroupRecall> grouped_recall(std::span<const ExtractionResult> predicted,
                                                  std::span<const ExtractionResult> reference,
                                                  Grouping grouping,
                                                  std::span<const Session> sessions = {});

struct CorpusStats {
  std::size_t n_sessions = 0;
  std::size_t n_pairs = 0;
  double avg_us = 0.0;   // utterances per session
  double avg_qs = 0.0;   // question utterances per session
  double avg_as = 0.0;   // answer utterances per session
  double dist_qa = 0.0;  // mean of max - min index over Q ∪ A, per pair
  std::map<PairCategory, std::size_t> category_counts;
  std::map<PairCategory, double> category_ratios;
};

CorpusStats corpus_stats(std::span<const AnnotatedSession> corpus);

}  // namespace qae

#endif  // QAE_METRICS_HPP
