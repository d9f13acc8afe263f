#ifndef QAE_PIPELINE_HPP
#define QAE_PIPELINE_HPP

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qae/codec.hpp"
#include "qae/core.hpp"

namespace qae {

enum class OutputStyle { SlotLabels, GeneratedText };

// Which labels the caller will keep from this tagging call.
enum class LabelSpace {
  Full,           // O, Q_k, A_k
  QuestionsOnly,  // stage 1: O, Q_k
  AnswersOnly,    // stage 2: O, A_k
  Binary,         // contextless stage 1: O, Q
};

struct TagContext {
  const Session &session;
  SerializedPrompt prompt;
  LabelSpace space = LabelSpace::Full;
  std::vector<std::string> label_space;
  // Stage-1 labels already filled into the prompt (AnswersOnly).
  const LabelSequence *filled = nullptr;
  // 1-based utterance under classification (Binary).
  std::size_t utterance = 0;
};

struct SlotLabels {
  std::vector<std::string> surfaces;
};
struct GeneratedText {
  std::string text;
};
using TaggerOutput = std::variant<SlotLabels, GeneratedText>;

class Tagger {
 public:
  virtual ~Tagger() = default;

  virtual std::string name() const = 0;
  virtual OutputStyle output_style() const = 0;
  virtual bool accepts(PromptFormat format) const = 0;
  // Only reentrant taggers are invoked from several workers at once.
  virtual bool reentrant() const { return false; }
  virtual TaggerOutput tag(const TagContext &context) = 0;
};

std::vector<std::string> label_space_surfaces(LabelSpace space, std::size_t max_id);

// ---------------------------------------------------------------------------
// Heuristic tagger

struct HeuristicConfig {
  std::size_t window = 3;
  std::vector<std::string> lexicon;  // interrogative phrases, matched case-insensitively

  // One phrase per line; blank lines and surrounding whitespace ignored.
  static std::vector<std::string> load_lexicon(const std::filesystem::path &path);
};

// Ends with '?' or the full-width '？', or contains a lexicon phrase on word
// boundaries.
bool is_question(std::string_view text, const HeuristicConfig &config);

// Each question opens pair k; following utterances by the other role, at
// most `window` of them and stopping at the next question, become A_k.
LabelSequence heuristic_tag(const Session &session, const HeuristicConfig &config);

// Answer window rule applied to already known question labels.
LabelSequence heuristic_answers(const Session &session, const LabelSequence &questions,
                                const HeuristicConfig &config);

class HeuristicTagger final : public Tagger {
 public:
  explicit HeuristicTagger(HeuristicConfig config = {}) : config_(std::move(config)) {}

  std::string name() const override { return "heuristic"; }
  OutputStyle output_style() const override { return OutputStyle::SlotLabels; }
  bool accepts(PromptFormat) const override { return true; }
  bool reentrant() const override { return true; }
  TaggerOutput tag(const TagContext &context) override;

 private:
  HeuristicConfig config_;
};

// ---------------------------------------------------------------------------
// Precomputed predictions (file mode, oracle taggers in tests)

using Prediction = std::variant<std::vector<std::string>, std::string>;  // labels | output text

class PrecomputedTagger final : public Tagger {
 public:
  PrecomputedTagger(std::map<std::string, Prediction> predictions, OutputStyle style);
  // Style follows the first prediction (slot labels when empty).
  explicit PrecomputedTagger(std::map<std::string, Prediction> predictions);

  std::string name() const override { return "precomputed"; }
  OutputStyle output_style() const override { return style_; }
  bool accepts(PromptFormat) const override { return true; }
  bool reentrant() const override { return true; }
  // Labels outside the requested space are replaced by O, so the same dump
  // serves as stage-1 and stage-2 oracle. Throws TaggerFailure for unknown
  // sessions.
  TaggerOutput tag(const TagContext &context) override;

 private:
  std::map<std::string, Prediction> predictions_;
  OutputStyle style_;
};

// Oracle over reference label sequences keyed by session id.
std::unique_ptr<PrecomputedTagger> make_oracle_tagger(
    const std::map<std::string, LabelSequence> &references,
    OutputStyle style = OutputStyle::SlotLabels);

// ---------------------------------------------------------------------------
// Extraction

enum class ExtractionMode { EndToEnd, TwoStageGG, TwoStageBG };

std::string_view mode_tag(ExtractionMode mode);  // "end_to_end", "two_stage_gg", ...
ExtractionMode parse_mode_tag(std::string_view tag);

// serialize -> tag -> parse -> normalize -> labels_to_pairs. Tagger errors
// surface as Error(TaggerFailure).
ExtractionResult extract_end_to_end(const Session &session, Tagger &tagger,
                                    PromptFormat format, const RoleNames &roles = {});

// Stage 1 labels questions, stage 2 labels answers with the questions filled
// into its prompt. Stage-2 question labels are coerced to O with a warning.
ExtractionResult extract_two_stage(const Session &session, Tagger &stage1, Tagger &stage2,
                                   ExtractionMode mode, const RoleNames &roles = {});

// Contextless per-utterance Q/O classification, then sequential Q1, Q2, ...
// numbering. Throws ModeUnsupported when the classifier groups two
// utterances under one explicit question id.
Parsed<LabelSequence> binary_stage1(const Session &session, Tagger &classifier);

// Runs `extract` over every session, in parallel when `workers` > 1. Results
// keep input order. A failing session yields an empty result carrying a
// TaggerFailure warning instead of aborting the batch.
std::vector<ExtractionResult> extract_batch(
    std::span<const Session> sessions,
    const std::function<ExtractionResult(const Session &)> &extract, std::size_t workers);

}  // namespace qae

#endif  // QAE_PIPELINE_HPP
