#ifndef QAE_CORPUS_IO_HPP
#define QAE_CORPUS_IO_HPP

// Line-delimited JSON formats.
//
// Corpus line:
//   {"session_id": "...", "utterances": [{"role": "C", "text": "..."}, ...],
//    "labels": ["Q1", "O", "A1", ...]}            (labels optional)
//
// Extraction line:
//   {"session_id": "...", "labels": [...],
//    "pairs": [{"pair_id": 1, "question_indices": [1], "answer_indices": [3],
//               "category": "1-1", "unanswered": false}, ...],
//    "warnings": [{"kind": "...", "message": "...", ...}, ...]}

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qae/core.hpp"

namespace qae {

using Json = nlohmann::ordered_json;

struct CorpusRecord {
  Session session;
  std::optional<LabelSequence> labels;
};

Json session_to_json(const Session &session, const RoleNames &roles = {});
Session session_from_json(const Json &j, const RoleNames &roles = {});

Json labels_to_json(const LabelSequence &labels);
LabelSequence labels_from_json(const Json &j);  // strict surface grammar

Json pair_to_json(const QAPair &pair);
QAPair pair_from_json(const Json &j);

Json warning_to_json(const Warning &warning, const RoleNames &roles = {});
Warning warning_from_json(const Json &j, const RoleNames &roles = {});

Json extraction_to_json(const ExtractionResult &result, const RoleNames &roles = {});
ExtractionResult extraction_from_json(const Json &j, const RoleNames &roles = {});

// Reads a corpus file, validating every session. Throws FileNotFound or
// ParseError (detail = 1-based line number). Blank lines are skipped.
std::vector<CorpusRecord> read_corpus(const std::filesystem::path &path,
                                      const RoleNames &roles = {});
void write_corpus(std::ostream &out, const std::vector<CorpusRecord> &records,
                  const RoleNames &roles = {});

// Any record carrying labels or pairs: corpus lines with labels and
// extraction lines are both accepted. `session` is set when the line has
// utterances.
struct LabeledRecord {
  std::optional<Session> session;
  ExtractionResult result;
};

std::vector<LabeledRecord> read_labeled(const std::filesystem::path &path,
                                        const RoleNames &roles = {});

// Calls `fn(line_number, json)` for every non-blank line.
template <typename Fn>
void for_each_json_line(const std::filesystem::path &path, Fn &&fn);

}  // namespace qae

#include <fstream>

namespace qae {

template <typename Fn>
void for_each_json_line(const std::filesystem::path &path, Fn &&fn) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error &e) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(number) + ": " + e.what(),
                  number);
    }
    try {
      fn(number, j);
    } catch (const Error &e) {
      if (e.code() == Errc::ParseError) throw;
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(number) + ": " + e.what(),
                  number);
    } catch (const Json::exception &e) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(number) + ": " + e.what(),
                  number);
    }
  }
}

}  // namespace qae

#endif  // QAE_CORPUS_IO_HPP
