#ifndef QAE_CODEC_HPP
#define QAE_CODEC_HPP

// Prompt serialization for fill-in-the-blank taggers, parsing of their output
// back into label sequences, and conversion between labels and QA pairs.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qae/core.hpp"

namespace qae {

enum class PromptFormat {
  MaskSep,            // "role: text [MASK] [SEP] " per utterance
  SentinelSemicolon,  // "role: text <extra_id_i> ; " per utterance
  ClsSingle,          // "[CLS] text", one utterance
};

std::string_view format_tag(PromptFormat format);  // "mask_sep", ...
PromptFormat parse_format_tag(std::string_view tag);

struct SerializedPrompt {
  PromptFormat format = PromptFormat::MaskSep;
  std::string text;
  std::size_t n_slots = 0;
};

// "O", "Q<k>", "A<k>".
std::string label_surface(const QALabel &label);
// Strict grammar O|Q[1-9][0-9]*|A[1-9][0-9]*.
std::optional<QALabel> parse_label_surface(std::string_view surface);

template <typename T>
struct Parsed {
  T value;
  std::vector<Warning> warnings;
};

// Positions labelled O in `partial` stay open ([MASK]); others render their
// surface. Throws LengthMismatch when partial.size() != session.size().
SerializedPrompt serialize_mask_prompt(const Session &session,
                                       const LabelSequence *partial = nullptr,
                                       const RoleNames &roles = {});

// Open slot i (1-based) renders <extra_id_{i-1}>, so numbering stays tied to
// position when earlier slots are filled.
SerializedPrompt serialize_sentinel_prompt(const Session &session,
                                           const LabelSequence *partial = nullptr,
                                           const RoleNames &roles = {});

SerializedPrompt serialize_cls_prompt(const Utterance &utterance);

// Reads the token after each <extra_id_i> for i in 0..n_slots-1. Missing or
// unparseable slots become O with a MalformedModelOutput warning.
Parsed<LabelSequence> parse_generated_output(std::string_view text, std::size_t n_slots);

// Same, but only the sentinels in `open_slots` (0-based) are expected; the
// other positions come back O without warnings.
Parsed<LabelSequence> parse_generated_output(std::string_view text, std::size_t n_slots,
                                             std::span<const std::size_t> open_slots);

// Positional parse of per-slot surfaces; pads with O or truncates, warning
// either way.
Parsed<LabelSequence> parse_slot_labels(std::span<const std::string> tokens,
                                        std::size_t n_slots);

// Renumbers pair ids 1..m by first question occurrence. Answer ids without a
// question are kept under fresh ids m+1.. in order of first occurrence.
LabelSequence normalize_labels(const LabelSequence &labels);

// Collects (U_Qj, U_Aj) for every question id after normalization.
// Answer-only groups are dropped with AnswerWithoutQuestion (and set to O in
// the stored label sequence); unanswered questions are kept and flagged.
ExtractionResult labels_to_pairs(const LabelSequence &labels, const Session &session);

// Inverse of labels_to_pairs up to normalization. Throws OverlappingUnions or
// IndexOutOfRange.
LabelSequence pairs_to_labels(const std::vector<QAPair> &pairs, std::size_t n);

inline LabelSequence pairs_to_labels(const ExtractionResult &result, std::size_t n) {
  return pairs_to_labels(result.pairs, n);
}

}  // namespace qae

#endif  // QAE_CODEC_HPP
