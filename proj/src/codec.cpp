#include "qae/codec.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>
#include <unordered_map>

namespace qae {

std::string_view format_tag(PromptFormat format) {
  switch (format) {
    case PromptFormat::MaskSep: return "mask_sep";
    case PromptFormat::SentinelSemicolon: return "sentinel_semicolon";
    case PromptFormat::ClsSingle: return "cls_single";
  }
  return "?";
}

PromptFormat parse_format_tag(std::string_view tag) {
  if (tag == "mask_sep") return PromptFormat::MaskSep;
  if (tag == "sentinel_semicolon") return PromptFormat::SentinelSemicolon;
  if (tag == "cls_single") return PromptFormat::ClsSingle;
  throw Error(Errc::InvalidArgument, "unknown prompt format '" + std::string(tag) + "'");
}

std::string label_surface(const QALabel &label) {
  switch (label.kind) {
    case QALabel::Kind::Outside: return "O";
    case QALabel::Kind::Question: return "Q" + std::to_string(label.pair_id);
    case QALabel::Kind::Answer: return "A" + std::to_string(label.pair_id);
  }
  return "O";
}

std::optional<QALabel> parse_label_surface(std::string_view surface) {
  if (surface == "O") return QALabel::outside();
  if (surface.size() < 2 || (surface[0] != 'Q' && surface[0] != 'A')) return std::nullopt;
  auto digits = surface.substr(1);
  if (digits[0] < '1' || digits[0] > '9') return std::nullopt;
  int id = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return surface[0] == 'Q' ? QALabel::question(id) : QALabel::answer(id);
}

namespace {

void check_partial(const Session &session, const LabelSequence *partial) {
  if (partial && partial->size() != session.size())
    throw Error(Errc::LengthMismatch, "partial labels have " + std::to_string(partial->size()) +
                                          " entries for " + std::to_string(session.size()) +
                                          " utterances");
}

template <typename OpenSlot>
SerializedPrompt serialize_units(const Session &session, const LabelSequence *partial,
                                 const RoleNames &roles, PromptFormat format,
                                 std::string_view separator, OpenSlot open_slot) {
  check_partial(session, partial);
  SerializedPrompt prompt{format, {}, session.size()};
  for (std::size_t i = 0; i < session.size(); ++i) {
    const auto &u = session.utterances[i];
    prompt.text += roles.name(u.role);
    prompt.text += ": ";
    prompt.text += trim(u.text);
    prompt.text += ' ';
    if (partial && !(*partial)[i].is_outside())
      prompt.text += label_surface((*partial)[i]);
    else
      prompt.text += open_slot(i);
    prompt.text += separator;
  }
  return prompt;
}

std::string sentinel(std::size_t slot) { return "<extra_id_" + std::to_string(slot) + ">"; }

struct Marker {
  std::size_t slot;
  std::size_t begin;  // position of '<'
  std::size_t end;    // one past '>'
};

std::vector<Marker> find_markers(std::string_view text) {
  constexpr std::string_view prefix = "<extra_id_";
  std::vector<Marker> markers;
  std::size_t pos = 0;
  while ((pos = text.find(prefix, pos)) != std::string_view::npos) {
    std::size_t d = pos + prefix.size();
    std::size_t e = d;
    while (e < text.size() && text[e] >= '0' && text[e] <= '9') ++e;
    if (e > d && e < text.size() && text[e] == '>') {
      std::size_t slot = 0;
      auto [ptr, ec] = std::from_chars(text.data() + d, text.data() + e, slot);
      if (ec == std::errc()) markers.push_back({slot, pos, e + 1});
      pos = e + 1;
    } else {
      pos = d;
    }
  }
  return markers;
}

std::string_view first_token(std::string_view content) {
  constexpr std::string_view delims = " \t\r\n;";
  auto b = content.find_first_not_of(delims);
  if (b == std::string_view::npos) return {};
  auto e = content.find_first_of(delims, b);
  return content.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b);
}

}  // namespace

SerializedPrompt serialize_mask_prompt(const Session &session, const LabelSequence *partial,
                                       const RoleNames &roles) {
  return serialize_units(session, partial, roles, PromptFormat::MaskSep, " [SEP] ",
                         [](std::size_t) { return std::string("[MASK]"); });
}

SerializedPrompt serialize_sentinel_prompt(const Session &session,
                                           const LabelSequence *partial,
                                           const RoleNames &roles) {
  return serialize_units(session, partial, roles, PromptFormat::SentinelSemicolon, " ; ",
                         sentinel);
}

SerializedPrompt serialize_cls_prompt(const Utterance &utterance) {
  return {PromptFormat::ClsSingle, "[CLS] " + trim(utterance.text), 1};
}

Parsed<LabelSequence> parse_generated_output(std::string_view text, std::size_t n_slots) {
  std::vector<std::size_t> all(n_slots);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return parse_generated_output(text, n_slots, all);
}

Parsed<LabelSequence> parse_generated_output(std::string_view text, std::size_t n_slots,
                                             std::span<const std::size_t> open_slots) {
  Parsed<LabelSequence> out{LabelSequence(n_slots), {}};
  const auto markers = find_markers(text);
  // First occurrence of each slot id wins.
  std::map<std::size_t, std::size_t> first;
  for (std::size_t m = 0; m < markers.size(); ++m) {
    auto [it, inserted] = first.emplace(markers[m].slot, m);
    if (!inserted && markers[m].slot < n_slots)
      out.warnings.push_back(
          Warning::malformed_output("duplicate " + sentinel(markers[m].slot) + " ignored"));
  }
  for (auto slot : open_slots) {
    if (slot >= n_slots) continue;
    auto it = first.find(slot);
    if (it == first.end()) {
      out.warnings.push_back(Warning::malformed_output("missing " + sentinel(slot)));
      continue;
    }
    const auto &m = markers[it->second];
    std::size_t stop = it->second + 1 < markers.size() ? markers[it->second + 1].begin
                                                        : text.size();
    auto token = first_token(text.substr(m.end, stop - m.end));
    if (auto label = parse_label_surface(token)) {
      out.value[slot] = *label;
    } else {
      out.warnings.push_back(Warning::malformed_output(
          "unparseable label '" + std::string(token) + "' after " + sentinel(slot)));
    }
  }
  return out;
}

Parsed<LabelSequence> parse_slot_labels(std::span<const std::string> tokens,
                                        std::size_t n_slots) {
  Parsed<LabelSequence> out{LabelSequence(n_slots), {}};
  const std::size_t usable = std::min(tokens.size(), n_slots);
  for (std::size_t i = 0; i < usable; ++i) {
    if (auto label = parse_label_surface(trim(tokens[i]))) {
      out.value[i] = *label;
    } else {
      out.warnings.push_back(Warning::malformed_output(
          "unparseable label '" + tokens[i] + "' at slot " + std::to_string(i + 1)));
    }
  }
  for (std::size_t i = usable; i < n_slots; ++i)
    out.warnings.push_back(
        Warning::malformed_output("missing label at slot " + std::to_string(i + 1)));
  if (tokens.size() > n_slots)
    out.warnings.push_back(Warning::malformed_output(
        std::to_string(tokens.size() - n_slots) + " extra labels truncated"));
  return out;
}

LabelSequence normalize_labels(const LabelSequence &labels) {
  std::unordered_map<int, int> remap;
  int next = 1;
  for (const auto &l : labels)
    if (l.is_question() && remap.emplace(l.pair_id, next).second) ++next;
  for (const auto &l : labels)
    if (l.is_answer() && remap.emplace(l.pair_id, next).second) ++next;
  // Orphans are numbered by first occurrence, which the second pass gives.
  LabelSequence out;
  out.reserve(labels.size());
  for (const auto &l : labels)
    out.push_back(l.is_outside() ? l : QALabel{l.kind, remap.at(l.pair_id)});
  return out;
}

ExtractionResult labels_to_pairs(const LabelSequence &labels, const Session &session) {
  if (labels.size() != session.size())
    throw Error(Errc::LengthMismatch, "labels have " + std::to_string(labels.size()) +
                                          " entries for " + std::to_string(session.size()) +
                                          " utterances");
  ExtractionResult r{session.session_id, {}, normalize_labels(labels), {}};

  int m = 0;
  for (const auto &l : r.labels)
    if (l.is_question()) m = std::max(m, l.pair_id);
  std::vector<IndexSet> questions(m + 1), answers(m + 1);
  std::vector<int> orphans;
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    auto &l = r.labels[k];
    if (l.is_question()) {
      questions[l.pair_id].push_back(k + 1);
    } else if (l.is_answer()) {
      if (l.pair_id <= m) {
        answers[l.pair_id].push_back(k + 1);
      } else {
        if (std::find(orphans.begin(), orphans.end(), l.pair_id) == orphans.end())
          orphans.push_back(l.pair_id);
        l = QALabel::outside();
      }
    }
  }
  for (int id : orphans) r.warnings.push_back(Warning::answer_without_question(id));
  for (int j = 1; j <= m; ++j) {
    r.pairs.push_back(make_qa_pair(j, std::move(questions[j]), std::move(answers[j])));
    if (r.pairs.back().unanswered) r.warnings.push_back(Warning::unanswered_question(j));
  }
  auto roles = check_role_consistency(r, session);
  r.warnings.insert(r.warnings.end(), roles.begin(), roles.end());
  return r;
}

LabelSequence pairs_to_labels(const std::vector<QAPair> &pairs, std::size_t n) {
  check_exclusive(pairs, n);
  LabelSequence labels(n);
  int id = 0;
  for (const auto &p : pairs) {
    ++id;
    for (auto i : p.question_indices) labels[i - 1] = QALabel::question(id);
    for (auto i : p.answer_indices) labels[i - 1] = QALabel::answer(id);
  }
  return normalize_labels(labels);
}

}  // namespace qae
