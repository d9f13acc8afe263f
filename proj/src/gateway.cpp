#include "qae/gateway.hpp"

#include <algorithm>
#include <thread>

#include "httplib.h"

namespace qae {

Json request_to_json(const TagRequest &request) {
  return {{"format", format_tag(request.format)},
          {"prompt", request.prompt},
          {"n_slots", request.n_slots},
          {"label_space", request.label_space}};
}

TagRequest request_from_json(const Json &j) {
  TagRequest r;
  try {
    r.format = parse_format_tag(j.at("format").get<std::string>());
    r.prompt = j.at("prompt").get<std::string>();
    r.n_slots = j.at("n_slots").get<std::size_t>();
    r.label_space = j.at("label_space").get<std::vector<std::string>>();
  } catch (const Json::exception &e) {
    throw Error(Errc::InvalidArgument, std::string("tag request: ") + e.what());
  }
  if (r.n_slots < 1) throw Error(Errc::InvalidArgument, "tag request: n_slots must be >= 1");
  if (r.label_space.empty())
    throw Error(Errc::InvalidArgument, "tag request: label_space must be non-empty");
  return r;
}

Json response_to_json(const TagResponse &response) {
  Json j = Json::object();
  if (response.slot_labels) j["slot_labels"] = *response.slot_labels;
  if (response.generated_text) j["generated_text"] = *response.generated_text;
  j["model_id"] = response.model_id;
  j["latency_ms"] = response.latency_ms;
  return j;
}

TagResponse response_from_json(const Json &j, std::size_t n_slots) {
  if (!j.is_object()) throw Error(Errc::MalformedResponse, "response is not a JSON object");
  const bool has_slots = j.contains("slot_labels");
  const bool has_text = j.contains("generated_text");
  if (has_slots == has_text)
    throw Error(Errc::MalformedResponse,
                "response needs exactly one of slot_labels and generated_text");
  TagResponse r;
  try {
    if (has_slots) {
      r.slot_labels = j.at("slot_labels").get<std::vector<std::string>>();
      if (r.slot_labels->size() != n_slots)
        throw Error(Errc::MalformedResponse, std::to_string(r.slot_labels->size()) +
                                                 " slot labels for " + std::to_string(n_slots) +
                                                 " slots");
    } else {
      r.generated_text = j.at("generated_text").get<std::string>();
    }
    if (j.contains("model_id")) r.model_id = j.at("model_id").get<std::string>();
    if (j.contains("latency_ms")) r.latency_ms = j.at("latency_ms").get<double>();
  } catch (const Json::exception &e) {
    throw Error(Errc::MalformedResponse, e.what());
  }
  return r;
}

Endpoint parse_endpoint(const std::string &url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.compare(0, scheme_end, "http") != 0)
    throw Error(Errc::InvalidArgument, "endpoint must be an http:// URL: '" + url + "'");
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) e.base_path = url.substr(path_start);
  while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  if (e.scheme_host_port.size() <= scheme_end + 3)
    throw Error(Errc::InvalidArgument, "endpoint has no host: '" + url + "'");
  return e;
}

namespace {

bool retryable(const Error &e) {
  switch (e.code()) {
    case Errc::Timeout:
    case Errc::ConnectionFailed: return true;
    case Errc::HttpStatus: return e.detail() >= 500;
    default: return false;
  }
}

TagResponse attempt(httplib::Client &client, const std::string &path, const std::string &body,
                    const TagRequest &request, const RetryPolicy &policy) {
  httplib::Headers headers;
  if (!policy.bearer_token.empty())
    headers.emplace("Authorization", "Bearer " + policy.bearer_token);
  auto res = client.Post(path, headers, body, "application/json");
  if (!res) {
    auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
      throw Error(Errc::Timeout, httplib::to_string(err));
    throw Error(Errc::ConnectionFailed, httplib::to_string(err));
  }
  if (res->status != 200)
    throw Error(Errc::HttpStatus, "status " + std::to_string(res->status), res->status);
  Json j;
  try {
    j = Json::parse(res->body);
  } catch (const Json::parse_error &e) {
    throw Error(Errc::MalformedResponse, e.what());
  }
  return response_from_json(j, request.n_slots);
}

}  // namespace

TagResponse tag_via_http(const std::string &endpoint, const TagRequest &request,
                         const RetryPolicy &policy) {
  const auto ep = parse_endpoint(endpoint);
  httplib::Client client(ep.scheme_host_port);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(policy.timeout);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(policy.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  const auto body = request_to_json(request).dump();
  const auto path = ep.base_path + "/v1/tag";
  auto delay = policy.backoff;
  for (int attempt_no = 0;; ++attempt_no) {
    try {
      return attempt(client, path, body, request, policy);
    } catch (const Error &e) {
      if (!retryable(e) || attempt_no >= policy.retries) throw;
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

HttpTagger::HttpTagger(std::string endpoint, OutputStyle style, RetryPolicy policy,
                       std::size_t max_in_flight)
    : endpoint_(std::move(endpoint)),
      style_(style),
      policy_(std::move(policy)),
      slots_(std::make_unique<std::counting_semaphore<1024>>(
          static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_in_flight, 1, 1024)))) {
  parse_endpoint(endpoint_);
}

TaggerOutput HttpTagger::tag(const TagContext &context) {
  TagRequest request{context.prompt.format, context.prompt.text, context.prompt.n_slots,
                     context.label_space};
  slots_->acquire();
  struct Release {
    std::counting_semaphore<1024> &s;
    ~Release() { s.release(); }
  } release{*slots_};
  auto response = tag_via_http(endpoint_, request, policy_);
  if (response.slot_labels) return SlotLabels{std::move(*response.slot_labels)};
  return GeneratedText{std::move(*response.generated_text)};
}

FilePredictions tag_via_file(const std::filesystem::path &path) {
  FilePredictions out;
  for_each_json_line(path, [&](int line, const Json &j) {
    auto id = j.at("session_id").get<std::string>();
    Prediction p;
    if (j.contains("labels"))
      p = j.at("labels").get<std::vector<std::string>>();
    else if (j.contains("output_text"))
      p = j.at("output_text").get<std::string>();
    else
      throw Error(Errc::ParseError,
                  "line " + std::to_string(line) + " has neither labels nor output_text", line);
    if (out.predictions.count(id))
      out.warnings.push_back("line " + std::to_string(line) + ": duplicate session_id '" + id +
                             "', last wins");
    out.predictions[id] = std::move(p);
  });
  return out;
}

}  // namespace qae
