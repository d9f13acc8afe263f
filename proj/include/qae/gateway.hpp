#ifndef QAE_GATEWAY_HPP
#define QAE_GATEWAY_HPP

// Connects the pipeline to external taggers: JSON over HTTP (POST
// <endpoint>/v1/tag) and line-delimited prediction dumps. The gateway moves
// label surfaces around but never interprets them.

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "qae/corpus_io.hpp"
#include "qae/pipeline.hpp"

namespace qae {

struct TagRequest {
  PromptFormat format = PromptFormat::MaskSep;
  std::string prompt;
  std::size_t n_slots = 0;
  std::vector<std::string> label_space;
};

struct TagResponse {
  std::optional<std::vector<std::string>> slot_labels;
  std::optional<std::string> generated_text;
  std::string model_id;
  double latency_ms = 0.0;
};

Json request_to_json(const TagRequest &request);
// Throws InvalidArgument when the document violates the request schema.
TagRequest request_from_json(const Json &j);

Json response_to_json(const TagResponse &response);
// Throws MalformedResponse unless exactly one payload is present and
// slot_labels, when present, has n_slots entries.
TagResponse response_from_json(const Json &j, std::size_t n_slots);

struct RetryPolicy {
  std::chrono::milliseconds timeout{30'000};
  int retries = 3;  // extra attempts after the first, on timeout / 5xx / connection errors
  std::chrono::milliseconds backoff{200};  // doubled after every failed attempt
  std::string bearer_token;
};

struct Endpoint {
  std::string scheme_host_port;  // "http://host:port"
  std::string base_path;         // "" or "/prefix"
};

Endpoint parse_endpoint(const std::string &url);

// Throws Timeout, ConnectionFailed, MalformedResponse or HttpStatus (detail =
// status code) once the policy is exhausted. 4xx is never retried.
TagResponse tag_via_http(const std::string &endpoint, const TagRequest &request,
                         const RetryPolicy &policy = {});

class HttpTagger final : public Tagger {
 public:
  HttpTagger(std::string endpoint, OutputStyle style, RetryPolicy policy = {},
             std::size_t max_in_flight = 8);

  std::string name() const override { return "http:" + endpoint_; }
  OutputStyle output_style() const override { return style_; }
  bool accepts(PromptFormat) const override { return true; }
  bool reentrant() const override { return true; }
  TaggerOutput tag(const TagContext &context) override;

 private:
  std::string endpoint_;
  OutputStyle style_;
  RetryPolicy policy_;
  std::unique_ptr<std::counting_semaphore<1024>> slots_;
};

struct FilePredictions {
  std::map<std::string, Prediction> predictions;
  std::vector<std::string> warnings;  // duplicate ids (last wins)
};

// Lines: {"session_id": ..., "labels": [...]} or {"session_id": ...,
// "output_text": "..."}. Throws FileNotFound or ParseError(line).
FilePredictions tag_via_file(const std::filesystem::path &path);

}  // namespace qae

#endif  // QAE_GATEWAY_HPP
