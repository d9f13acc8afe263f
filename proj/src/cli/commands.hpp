#ifndef QAE_CLI_COMMANDS_HPP
#define QAE_CLI_COMMANDS_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "qae/codec.hpp"
#include "qae/gateway.hpp"
#include "qae/pipeline.hpp"

namespace qae::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kIoError = 3,
  kAlignmentError = 4,
  kPortInUse = 5,
};

// key = value lines; '#' starts a comment. Throws FileNotFound.
std::map<std::string, std::string> load_config_file(const std::filesystem::path &path);

// flag > QAE_<KEY> environment variable > config file > fallback.
class Settings {
 public:
  Settings() = default;
  explicit Settings(std::map<std::string, std::string> file) : file_(std::move(file)) {}

  std::string get(const std::string &key, const std::optional<std::string> &flag,
                  const std::string &fallback) const;

 private:
  std::map<std::string, std::string> file_;
};

struct ExtractOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  std::string tagger = "heuristic";
  std::string stage2_tagger;  // empty: same as `tagger`
  ExtractionMode mode = ExtractionMode::EndToEnd;
  PromptFormat format = PromptFormat::MaskSep;
  std::size_t workers = 1;
  HeuristicConfig heuristic;
  RetryPolicy retry;
  std::size_t max_in_flight = 8;
  RoleNames roles;
  std::optional<std::filesystem::path> store;  // also ingest results
};

int cmd_extract(const ExtractOptions &options, std::ostream &err);

int cmd_evaluate(const std::filesystem::path &predicted, const std::filesystem::path &reference,
                 const std::filesystem::path &report, bool raw_ids, std::ostream &err,
                 const RoleNames &roles = {});

int cmd_stats(const std::filesystem::path &input,
              const std::optional<std::filesystem::path> &extractions,
              const std::optional<std::filesystem::path> &output, std::ostream &out,
              std::ostream &err, const RoleNames &roles = {});

int cmd_analyze(const std::filesystem::path &input,
                const std::optional<std::filesystem::path> &extractions,
                const std::optional<std::filesystem::path> &output, std::ostream &out,
                std::ostream &err, const RoleNames &roles = {});

int cmd_ingest(const std::filesystem::path &store, const std::filesystem::path &input,
               const std::optional<std::filesystem::path> &extractions, std::ostream &err,
               const RoleNames &roles = {});

int cmd_export(const std::filesystem::path &store, const std::filesystem::path &output,
               const std::string &format, std::ostream &err);

// Blocks until SIGINT/SIGTERM.
int cmd_serve(const std::filesystem::path &store, const std::string &host, int port,
              const std::optional<std::filesystem::path> &ui_dir, std::ostream &err);

}  // namespace qae::cli

#endif  // QAE_CLI_COMMANDS_HPP
