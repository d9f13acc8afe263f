#include "qae/corpus_io.hpp"

#include <ostream>

#include "qae/codec.hpp"

namespace qae {

Json session_to_json(const Session &session, const RoleNames &roles) {
  Json utterances = Json::array();
  for (const auto &u : session.utterances)
    utterances.push_back({{"role", roles.name(u.role)}, {"text", u.text}});
  return {{"session_id", session.session_id}, {"utterances", std::move(utterances)}};
}

Session session_from_json(const Json &j, const RoleNames &roles) {
  Session s;
  s.session_id = j.at("session_id").get<std::string>();
  std::size_t index = 0;
  for (const auto &u : j.at("utterances"))
    s.utterances.push_back(
        {++index, roles.parse(u.at("role").get<std::string>()), u.at("text").get<std::string>()});
  validate_session(s);
  return s;
}

Json labels_to_json(const LabelSequence &labels) {
  Json out = Json::array();
  for (const auto &l : labels) out.push_back(label_surface(l));
  return out;
}

LabelSequence labels_from_json(const Json &j) {
  LabelSequence labels;
  for (const auto &item : j) {
    auto surface = item.get<std::string>();
    auto label = parse_label_surface(surface);
    if (!label) throw Error(Errc::ParseError, "invalid label '" + surface + "'");
    labels.push_back(*label);
  }
  return labels;
}

Json pair_to_json(const QAPair &pair) {
  return {{"pair_id", pair.pair_id},
          {"question_indices", pair.question_indices},
          {"answer_indices", pair.answer_indices},
          {"category", category_name(pair.category)},
          {"unanswered", pair.unanswered}};
}

QAPair pair_from_json(const Json &j) {
  return make_qa_pair(j.at("pair_id").get<int>(), j.at("question_indices").get<IndexSet>(),
                      j.at("answer_indices").get<IndexSet>());
}

Json warning_to_json(const Warning &w, const RoleNames &roles) {
  Json j{{"kind", warning_kind_name(w.kind)}};
  switch (w.kind) {
    case WarningKind::RoleInconsistency:
      j["index"] = w.index;
      j["expected_role"] = roles.name(w.expected_role);
      break;
    case WarningKind::AnswerWithoutQuestion:
    case WarningKind::UnansweredQuestion:
      j["pair_id"] = w.pair_id;
      break;
    case WarningKind::MalformedModelOutput:
    case WarningKind::TaggerFailure:
      j["detail"] = w.detail;
      break;
  }
  j["message"] = w.message;
  return j;
}

Warning warning_from_json(const Json &j, const RoleNames &roles) {
  Warning w;
  const auto kind = j.at("kind").get<std::string>();
  for (auto k : {WarningKind::RoleInconsistency, WarningKind::AnswerWithoutQuestion,
                 WarningKind::UnansweredQuestion, WarningKind::MalformedModelOutput,
                 WarningKind::TaggerFailure})
    if (warning_kind_name(k) == kind) w.kind = k;
  if (warning_kind_name(w.kind) != kind)
    throw Error(Errc::ParseError, "unknown warning kind '" + kind + "'");
  if (j.contains("index")) w.index = j.at("index").get<std::size_t>();
  if (j.contains("expected_role"))
    w.expected_role = roles.parse(j.at("expected_role").get<std::string>());
  if (j.contains("pair_id")) w.pair_id = j.at("pair_id").get<int>();
  if (j.contains("detail")) w.detail = j.at("detail").get<std::string>();
  if (j.contains("message")) w.message = j.at("message").get<std::string>();
  return w;
}

Json extraction_to_json(const ExtractionResult &result, const RoleNames &roles) {
  Json pairs = Json::array();
  for (const auto &p : result.pairs) pairs.push_back(pair_to_json(p));
  Json warnings = Json::array();
  for (const auto &w : result.warnings) warnings.push_back(warning_to_json(w, roles));
  return {{"session_id", result.session_id},
          {"labels", labels_to_json(result.labels)},
          {"pairs", std::move(pairs)},
          {"warnings", std::move(warnings)}};
}

ExtractionResult extraction_from_json(const Json &j, const RoleNames &roles) {
  ExtractionResult r;
  r.session_id = j.at("session_id").get<std::string>();
  if (j.contains("labels")) r.labels = labels_from_json(j.at("labels"));
  for (const auto &p : j.at("pairs")) r.pairs.push_back(pair_from_json(p));
  check_exclusive(r.pairs, r.labels.size());
  if (j.contains("warnings"))
    for (const auto &w : j.at("warnings")) r.warnings.push_back(warning_from_json(w, roles));
  return r;
}

std::vector<CorpusRecord> read_corpus(const std::filesystem::path &path,
                                      const RoleNames &roles) {
  std::vector<CorpusRecord> records;
  for_each_json_line(path, [&](int, const Json &j) {
    CorpusRecord rec{session_from_json(j, roles), std::nullopt};
    if (j.contains("labels")) {
      auto labels = labels_from_json(j.at("labels"));
      if (labels.size() != rec.session.size())
        throw Error(Errc::ParseError, "labels do not align with utterances");
      rec.labels = std::move(labels);
    }
    records.push_back(std::move(rec));
  });
  return records;
}

void write_corpus(std::ostream &out, const std::vector<CorpusRecord> &records,
                  const RoleNames &roles) {
  for (const auto &rec : records) {
    auto j = session_to_json(rec.session, roles);
    if (rec.labels) j["labels"] = labels_to_json(*rec.labels);
    out << j.dump() << '\n';
  }
}

std::vector<LabeledRecord> read_labeled(const std::filesystem::path &path,
                                        const RoleNames &roles) {
  std::vector<LabeledRecord> records;
  for_each_json_line(path, [&](int, const Json &j) {
    LabeledRecord rec;
    if (j.contains("utterances")) rec.session = session_from_json(j, roles);
    if (j.contains("pairs")) {
      rec.result = extraction_from_json(j, roles);
      if (rec.session && !rec.result.labels.empty() &&
          rec.result.labels.size() != rec.session->size())
        throw Error(Errc::ParseError, "labels do not align with utterances");
    } else if (j.contains("labels")) {
      auto labels = labels_from_json(j.at("labels"));
      if (rec.session) {
        if (labels.size() != rec.session->size())
          throw Error(Errc::ParseError, "labels do not align with utterances");
        rec.result = labels_to_pairs(labels, *rec.session);
      } else {
        // Without utterances only the index structure is known.
        Session shape;
        shape.session_id = j.at("session_id").get<std::string>();
        for (std::size_t i = 1; i <= labels.size(); ++i)
          shape.utterances.push_back({i, SpeakerRole::Customer, "-"});
        rec.result = labels_to_pairs(labels, shape);
        rec.result.warnings.clear();
      }
    } else {
      throw Error(Errc::ParseError, "line has neither labels nor pairs");
    }
    records.push_back(std::move(rec));
  });
  return records;
}

}  // namespace qae
