#include "qae/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <thread>

namespace qae {

std::vector<std::string> label_space_surfaces(LabelSpace space, std::size_t max_id) {
  std::vector<std::string> out{"O"};
  if (space == LabelSpace::Binary) {
    out.push_back("Q");
    return out;
  }
  if (space != LabelSpace::AnswersOnly)
    for (std::size_t k = 1; k <= max_id; ++k) out.push_back("Q" + std::to_string(k));
  if (space != LabelSpace::QuestionsOnly)
    for (std::size_t k = 1; k <= max_id; ++k) out.push_back("A" + std::to_string(k));
  return out;
}

// ---------------------------------------------------------------------------
// Heuristic tagger

std::vector<std::string> HeuristicConfig::load_lexicon(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  std::vector<std::string> phrases;
  std::string line;
  while (std::getline(in, line)) {
    auto phrase = trim(line);
    if (!phrase.empty()) phrases.push_back(std::move(phrase));
  }
  return phrases;
}

namespace {

bool is_word_byte(char c) {
  auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::isalnum(u);
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto &c : out)
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(c));
  return out;
}

bool contains_phrase(const std::string &text, const std::string &phrase) {
  if (phrase.empty()) return false;
  for (std::size_t pos = text.find(phrase); pos != std::string::npos;
       pos = text.find(phrase, pos + 1)) {
    bool left_ok = !is_word_byte(phrase.front()) || pos == 0 || !is_word_byte(text[pos - 1]);
    std::size_t end = pos + phrase.size();
    bool right_ok =
        !is_word_byte(phrase.back()) || end == text.size() || !is_word_byte(text[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

}  // namespace

bool is_question(std::string_view text, const HeuristicConfig &config) {
  auto t = trim(text);
  if (t.empty()) return false;
  if (t.back() == '?') return true;
  if (t.size() >= 3 && t.compare(t.size() - 3, 3, "\xEF\xBC\x9F") == 0) return true;
  if (config.lexicon.empty()) return false;
  auto lowered = ascii_lower(t);
  return std::any_of(config.lexicon.begin(), config.lexicon.end(), [&](const auto &phrase) {
    return contains_phrase(lowered, ascii_lower(phrase));
  });
}

LabelSequence heuristic_answers(const Session &session, const LabelSequence &questions,
                                const HeuristicConfig &config) {
  if (questions.size() != session.size())
    throw Error(Errc::LengthMismatch, "question labels do not cover the session");
  LabelSequence labels(session.size());
  for (std::size_t i = 0; i < questions.size(); ++i)
    if (questions[i].is_question()) labels[i] = questions[i];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i].is_question()) continue;
    const auto asker = session.utterances[i].role;
    for (std::size_t j = i + 1; j < labels.size() && j <= i + config.window; ++j) {
      if (labels[j].is_question() || session.utterances[j].role == asker) break;
      if (labels[j].is_outside()) labels[j] = QALabel::answer(labels[i].pair_id);
    }
  }
  return labels;
}

LabelSequence heuristic_tag(const Session &session, const HeuristicConfig &config) {
  LabelSequence questions(session.size());
  int next = 0;
  for (std::size_t i = 0; i < session.size(); ++i)
    if (is_question(session.utterances[i].text, config))
      questions[i] = QALabel::question(++next);
  return heuristic_answers(session, questions, config);
}

namespace {

bool allowed(const QALabel &label, LabelSpace space) {
  switch (space) {
    case LabelSpace::Full: return true;
    case LabelSpace::QuestionsOnly:
    case LabelSpace::Binary: return !label.is_answer();
    case LabelSpace::AnswersOnly: return !label.is_question();
  }
  return true;
}

std::vector<std::string> render_slots(const LabelSequence &labels) {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (const auto &l : labels) out.push_back(label_surface(l));
  return out;
}

std::string render_generated(const LabelSequence &labels, const LabelSequence *filled) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (filled && !(*filled)[i].is_outside()) continue;
    if (!out.empty()) out += ' ';
    out += "<extra_id_" + std::to_string(i) + "> " + label_surface(labels[i]);
  }
  return out;
}

TaggerOutput binary_output(bool question, OutputStyle style) {
  if (style == OutputStyle::GeneratedText) return GeneratedText{question ? "Q" : "O"};
  return SlotLabels{{question ? "Q" : "O"}};
}

}  // namespace

TaggerOutput HeuristicTagger::tag(const TagContext &context) {
  const auto &session = context.session;
  if (context.space == LabelSpace::Binary)
    return binary_output(is_question(session.at(context.utterance).text, config_),
                         OutputStyle::SlotLabels);
  LabelSequence labels;
  if (context.space == LabelSpace::AnswersOnly && context.filled) {
    labels = heuristic_answers(session, *context.filled, config_);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i].is_question()) labels[i] = QALabel::outside();
  } else {
    labels = heuristic_tag(session, config_);
    if (context.space == LabelSpace::QuestionsOnly)
      for (auto &l : labels)
        if (l.is_answer()) l = QALabel::outside();
  }
  return SlotLabels{render_slots(labels)};
}

PrecomputedTagger::PrecomputedTagger(std::map<std::string, Prediction> predictions,
                                     OutputStyle style)
    : predictions_(std::move(predictions)), style_(style) {}

PrecomputedTagger::PrecomputedTagger(std::map<std::string, Prediction> predictions)
    : predictions_(std::move(predictions)), style_(OutputStyle::SlotLabels) {
  if (!predictions_.empty() && std::holds_alternative<std::string>(predictions_.begin()->second))
    style_ = OutputStyle::GeneratedText;
}

TaggerOutput PrecomputedTagger::tag(const TagContext &context) {
  const auto &id = context.session.session_id;
  auto it = predictions_.find(id);
  if (it == predictions_.end())
    throw Error(Errc::TaggerFailure, "no precomputed prediction for session '" + id + "'");
  const auto n = context.session.size();

  if (context.space == LabelSpace::Full) {
    if (auto *labels = std::get_if<std::vector<std::string>>(&it->second))
      return SlotLabels{*labels};
    return GeneratedText{std::get<std::string>(it->second)};
  }

  LabelSequence labels;
  if (auto *surfaces = std::get_if<std::vector<std::string>>(&it->second)) {
    labels = parse_slot_labels(*surfaces, n).value;
  } else {
    labels = parse_generated_output(std::get<std::string>(it->second), n).value;
  }
  // Stage 1 numbers its questions canonically; answers must follow suit.
  labels = normalize_labels(labels);
  if (context.space == LabelSpace::Binary) {
    bool q = context.utterance >= 1 && context.utterance <= n &&
             labels[context.utterance - 1].is_question();
    return binary_output(q, style_);
  }
  for (auto &l : labels)
    if (!allowed(l, context.space)) l = QALabel::outside();
  if (context.filled)
    for (std::size_t i = 0; i < n; ++i)
      if (!(*context.filled)[i].is_outside()) labels[i] = QALabel::outside();
  if (std::holds_alternative<std::vector<std::string>>(it->second))
    return SlotLabels{render_slots(labels)};
  return GeneratedText{render_generated(labels, context.filled)};
}

std::unique_ptr<PrecomputedTagger> make_oracle_tagger(
    const std::map<std::string, LabelSequence> &references, OutputStyle style) {
  std::map<std::string, Prediction> predictions;
  for (const auto &[id, raw] : references) {
    auto labels = normalize_labels(raw);
    if (style == OutputStyle::SlotLabels)
      predictions.emplace(id, render_slots(labels));
    else
      predictions.emplace(id, render_generated(labels, nullptr));
  }
  return std::make_unique<PrecomputedTagger>(std::move(predictions), style);
}

// ---------------------------------------------------------------------------
// Extraction

std::string_view mode_tag(ExtractionMode mode) {
  switch (mode) {
    case ExtractionMode::EndToEnd: return "end_to_end";
    case ExtractionMode::TwoStageGG: return "two_stage_gg";
    case ExtractionMode::TwoStageBG: return "two_stage_bg";
  }
  return "?";
}

ExtractionMode parse_mode_tag(std::string_view tag) {
  if (tag == "end_to_end") return ExtractionMode::EndToEnd;
  if (tag == "two_stage_gg") return ExtractionMode::TwoStageGG;
  if (tag == "two_stage_bg") return ExtractionMode::TwoStageBG;
  throw Error(Errc::InvalidArgument, "unknown extraction mode '" + std::string(tag) + "'");
}

namespace {

TaggerOutput call_tagger(Tagger &tagger, const TagContext &context) {
  try {
    return tagger.tag(context);
  } catch (const Error &e) {
    if (e.code() == Errc::TaggerFailure) throw;
    throw Error(Errc::TaggerFailure, tagger.name() + ": " + e.what());
  } catch (const std::exception &e) {
    throw Error(Errc::TaggerFailure, tagger.name() + ": " + e.what());
  }
}

SerializedPrompt serialize(const Session &session, PromptFormat format,
                           const LabelSequence *partial, const RoleNames &roles) {
  switch (format) {
    case PromptFormat::MaskSep: return serialize_mask_prompt(session, partial, roles);
    case PromptFormat::SentinelSemicolon:
      return serialize_sentinel_prompt(session, partial, roles);
    case PromptFormat::ClsSingle: break;
  }
  throw Error(Errc::InvalidArgument, "cls_single prompts carry one utterance, not a session");
}

Parsed<LabelSequence> decode(const TaggerOutput &output, std::size_t n,
                             std::span<const std::size_t> open_slots) {
  if (const auto *slots = std::get_if<SlotLabels>(&output))
    return parse_slot_labels(slots->surfaces, n);
  return parse_generated_output(std::get<GeneratedText>(output).text, n, open_slots);
}

std::vector<std::size_t> all_slots(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

PromptFormat session_format(const Tagger &tagger) {
  const bool generated = tagger.output_style() == OutputStyle::GeneratedText;
  if (generated && tagger.accepts(PromptFormat::SentinelSemicolon))
    return PromptFormat::SentinelSemicolon;
  if (tagger.accepts(PromptFormat::MaskSep)) return PromptFormat::MaskSep;
  if (tagger.accepts(PromptFormat::SentinelSemicolon)) return PromptFormat::SentinelSemicolon;
  throw Error(Errc::ModeUnsupported, tagger.name() + " accepts no session-level prompt format");
}

void append(std::vector<Warning> &to, const std::vector<Warning> &from) {
  to.insert(to.end(), from.begin(), from.end());
}

ExtractionResult finish(const LabelSequence &labels, const Session &session,
                        std::vector<Warning> warnings) {
  auto result = labels_to_pairs(labels, session);
  append(warnings, result.warnings);
  result.warnings = std::move(warnings);
  return result;
}

}  // namespace

ExtractionResult extract_end_to_end(const Session &session, Tagger &tagger,
                                    PromptFormat format, const RoleNames &roles) {
  if (!tagger.accepts(format))
    throw Error(Errc::InvalidArgument,
                tagger.name() + " does not accept " + std::string(format_tag(format)));
  const auto n = session.size();
  TagContext ctx{session, serialize(session, format, nullptr, roles), LabelSpace::Full,
                 label_space_surfaces(LabelSpace::Full, n)};
  auto parsed = decode(call_tagger(tagger, ctx), n, all_slots(n));
  return finish(parsed.value, session, std::move(parsed.warnings));
}

Parsed<LabelSequence> binary_stage1(const Session &session, Tagger &classifier) {
  if (!classifier.accepts(PromptFormat::ClsSingle))
    throw Error(Errc::InvalidArgument, classifier.name() + " does not accept cls_single");
  Parsed<LabelSequence> out{LabelSequence(session.size()), {}};
  std::map<int, std::size_t> explicit_ids;
  int next = 0;
  for (const auto &u : session.utterances) {
    TagContext ctx{session, serialize_cls_prompt(u), LabelSpace::Binary,
                   label_space_surfaces(LabelSpace::Binary, 0)};
    ctx.utterance = u.index;
    auto output = call_tagger(classifier, ctx);
    std::string surface;
    if (const auto *slots = std::get_if<SlotLabels>(&output)) {
      if (slots->surfaces.size() != 1)
        out.warnings.push_back(Warning::malformed_output(
            "classifier returned " + std::to_string(slots->surfaces.size()) +
            " labels for utterance " + std::to_string(u.index)));
      if (!slots->surfaces.empty()) surface = trim(slots->surfaces.front());
    } else {
      const auto &text = std::get<GeneratedText>(output).text;
      auto t = trim(text);
      surface = t.substr(0, t.find_first_of(" \t\r\n"));
    }
    bool question = surface == "Q";
    if (!question && surface != "O") {
      auto label = parse_label_surface(surface);
      if (label && label->is_question()) {
        question = true;
        auto [it, fresh] = explicit_ids.emplace(label->pair_id, u.index);
        if (!fresh)
          throw Error(Errc::ModeUnsupported,
                      "utterances " + std::to_string(it->second) + " and " +
                          std::to_string(u.index) + " share question id " + surface +
                          "; contextless stage 1 needs single-utterance questions");
      } else {
        out.warnings.push_back(Warning::malformed_output(
            "classifier label '" + surface + "' for utterance " + std::to_string(u.index)));
      }
    }
    if (question) out.value[u.index - 1] = QALabel::question(++next);
  }
  return out;
}

ExtractionResult extract_two_stage(const Session &session, Tagger &stage1, Tagger &stage2,
                                   ExtractionMode mode, const RoleNames &roles) {
  if (mode == ExtractionMode::EndToEnd)
    throw Error(Errc::ModeUnsupported, "extract_two_stage needs a two-stage mode");
  const auto n = session.size();
  std::vector<Warning> warnings;

  LabelSequence questions;
  if (mode == ExtractionMode::TwoStageBG) {
    auto parsed = binary_stage1(session, stage1);
    questions = std::move(parsed.value);
    append(warnings, parsed.warnings);
  } else {
    auto format = session_format(stage1);
    TagContext ctx{session, serialize(session, format, nullptr, roles),
                   LabelSpace::QuestionsOnly, label_space_surfaces(LabelSpace::QuestionsOnly, n)};
    auto parsed = decode(call_tagger(stage1, ctx), n, all_slots(n));
    append(warnings, parsed.warnings);
    questions = std::move(parsed.value);
    for (std::size_t i = 0; i < n; ++i) {
      if (questions[i].is_answer()) {
        warnings.push_back(Warning::malformed_output(
            "stage 1 emitted " + label_surface(questions[i]) + " at utterance " +
            std::to_string(i + 1) + "; coerced to O"));
        questions[i] = QALabel::outside();
      }
    }
    questions = normalize_labels(questions);
  }

  const bool any_question =
      std::any_of(questions.begin(), questions.end(), [](auto &l) { return l.is_question(); });
  if (!any_question) return finish(questions, session, std::move(warnings));

  int m = 0;
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < n; ++i) {
    if (questions[i].is_question())
      m = std::max(m, questions[i].pair_id);
    else
      open.push_back(i);
  }
  auto format = session_format(stage2);
  TagContext ctx{session, serialize(session, format, &questions, roles),
                 LabelSpace::AnswersOnly,
                 label_space_surfaces(LabelSpace::AnswersOnly, static_cast<std::size_t>(m))};
  ctx.filled = &questions;
  auto parsed = decode(call_tagger(stage2, ctx), n, open);
  append(warnings, parsed.warnings);

  LabelSequence merged = questions;
  for (auto i : open) {
    const auto &l = parsed.value[i];
    if (l.is_answer()) {
      merged[i] = l;
    } else if (l.is_question()) {
      warnings.push_back(Warning::malformed_output("stage 2 emitted " + label_surface(l) +
                                                   " at utterance " + std::to_string(i + 1) +
                                                   "; coerced to O"));
    }
  }
  return finish(merged, session, std::move(warnings));
}

std::vector<ExtractionResult> extract_batch(
    std::span<const Session> sessions,
    const std::function<ExtractionResult(const Session &)> &extract, std::size_t workers) {
  std::vector<ExtractionResult> results(sessions.size());
  auto run_one = [&](std::size_t i) {
    const auto &s = sessions[i];
    try {
      results[i] = extract(s);
    } catch (const std::exception &e) {
      results[i] = ExtractionResult{s.session_id, {}, LabelSequence(s.size()),
                                    {Warning::tagger_failure(e.what())}};
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, sessions.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < sessions.size(); ++i) run_one(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < sessions.size(); i = next++) run_one(i);
    });
  pool.clear();  // joins
  return results;
}

}  // namespace qae
