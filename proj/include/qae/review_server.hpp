#ifndef QAE_REVIEW_SERVER_HPP
#define QAE_REVIEW_SERVER_HPP

// HTTP API over a Store for the review UI:
//
//   GET  /api/pending?cursor=&size=     page of pending pairs
//   POST /api/reviews                   {"session_id", "pair_id", "status",
//                                        "reviewer", ["question", "answer"]}
//   GET  /api/metrics/adoption?from=&to=&reviewer=
//   GET  /api/sessions/{id}
//
// Errors come back as {"error": <code>, "message": ...} with 400 (bad
// request / cursor), 404 (unknown session or pair) or 409 (already reviewed).

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "qae/corpus_io.hpp"
#include "qae/store.hpp"

namespace qae {

Json pending_page_to_json(const PendingPage &page);
Json adoption_to_json(const AdoptionReport &report);
Json review_record_to_json(const ReviewRecord &record);
Json faq_entry_to_json(const FaqEntry &entry);

// Parses a POST /api/reviews body. "status" accepts accepted/rejected/edited
// and the verbs accept/reject/edit.
ReviewRecord review_request_from_json(const Json &j);

class ReviewServer {
 public:
  // `ui_dir`, when given, is served as static files at "/".
  ReviewServer(Store &store, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~ReviewServer();

  ReviewServer(const ReviewServer &) = delete;
  ReviewServer &operator=(const ReviewServer &) = delete;

  // Port 0 binds an ephemeral port. Returns the bound port, or -1 when the
  // address is unavailable.
  int bind(const std::string &host, int port);
  // Blocks until stop().
  void serve();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace qae

#endif  // QAE_REVIEW_SERVER_HPP
