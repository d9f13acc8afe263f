#include "qae/review_server.hpp"

#include "httplib.h"

namespace qae {

Json review_record_to_json(const ReviewRecord &r) {
  Json j{{"session_id", r.session_id},
         {"pair_id", r.pair_id},
         {"status", status_name(r.status)},
         {"reviewer", r.reviewer},
         {"timestamp", format_utc(r.timestamp)}};
  if (r.status == ReviewStatus::Edited) {
    j["question"] = r.edited_question;
    j["answer"] = r.edited_answer;
  }
  return j;
}

Json faq_entry_to_json(const FaqEntry &f) {
  return {{"question", f.question},
          {"answer", f.answer},
          {"session_id", f.session_id},
          {"pair_id", f.pair_id},
          {"created", format_utc(f.created)}};
}

Json pending_page_to_json(const PendingPage &page) {
  Json items = Json::array();
  for (const auto &item : page.items) {
    Json excerpt = Json::array();
    for (const auto &u : item.excerpt)
      excerpt.push_back({{"index", u.index}, {"role", RoleNames{}.name(u.role)}, {"text", u.text}});
    Json warnings = Json::array();
    for (const auto &w : item.warnings) warnings.push_back(warning_to_json(w));
    items.push_back({{"session_id", item.session_id},
                     {"pair", pair_to_json(item.pair)},
                     {"excerpt", std::move(excerpt)},
                     {"warnings", std::move(warnings)},
                     {"review", {{"status", "pending"}}},
                     {"ingested", format_utc(item.ingested)}});
  }
  Json j{{"items", std::move(items)}};
  j["next_cursor"] = page.next_cursor ? Json(*page.next_cursor) : Json(nullptr);
  return j;
}

Json adoption_to_json(const AdoptionReport &r) {
  return {{"accepted", r.accepted},
          {"rejected", r.rejected},
          {"edited", r.edited},
          {"pending", r.pending},
          {"adoption_rate", r.adoption_rate}};
}

ReviewRecord review_request_from_json(const Json &j) {
  ReviewRecord r;
  try {
    r.session_id = j.at("session_id").get<std::string>();
    r.pair_id = j.at("pair_id").get<int>();
    auto status = j.contains("status") ? j.at("status").get<std::string>()
                                       : j.at("decision").get<std::string>();
    if (status == "accept") status = "accepted";
    if (status == "reject") status = "rejected";
    if (status == "edit") status = "edited";
    r.status = parse_status(status);
    r.reviewer = j.value("reviewer", "");
    r.edited_question = j.value("question", "");
    r.edited_answer = j.value("answer", "");
  } catch (const Json::exception &e) {
    throw Error(Errc::InvalidArgument, e.what());
  }
  return r;
}

namespace {

int http_status(Errc code) {
  switch (code) {
    case Errc::UnknownPair: return 404;
    case Errc::AlreadyReviewed: return 409;
    default: return 400;
  }
}

void send_json(httplib::Response &res, const Json &j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response &res, int status, std::string_view code,
                const std::string &message) {
  send_json(res, Json{{"error", code}, {"message", message}}, status);
}

}  // namespace

struct ReviewServer::Impl {
  explicit Impl(Store &s) : store(s) {}
  Store &store;
  httplib::Server server;
};

ReviewServer::ReviewServer(Store &store, std::optional<std::filesystem::path> ui_dir)
    : impl_(std::make_unique<Impl>(store)) {
  auto &server = impl_->server;
  Store *s = &store;

  // httplib's default adds SO_REUSEPORT, which lets a second server share a
  // busy port silently.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });

  server.Get("/api/pending", [s](const httplib::Request &req, httplib::Response &res) {
    std::size_t size = 20;
    if (req.has_param("size")) {
      try {
        size = std::stoul(req.get_param_value("size"));
      } catch (const std::exception &) {
        return send_error(res, 400, "InvalidArgument", "size must be a positive integer");
      }
    }
    try {
      send_json(res, pending_page_to_json(s->list_pending(req.get_param_value("cursor"), size)));
    } catch (const Error &e) {
      send_error(res, http_status(e.code()), errc_name(e.code()), e.what());
    }
  });

  server.Post("/api/reviews", [s](const httplib::Request &req, httplib::Response &res) {
    try {
      auto ack = s->record_review(review_request_from_json(Json::parse(req.body)));
      Json j{{"review", review_record_to_json(ack.record)}};
      j["faq"] = ack.faq ? faq_entry_to_json(*ack.faq) : Json(nullptr);
      send_json(res, j);
    } catch (const Json::parse_error &e) {
      send_error(res, 400, "InvalidArgument", e.what());
    } catch (const Error &e) {
      send_error(res, http_status(e.code()), errc_name(e.code()), e.what());
    }
  });

  server.Get("/api/metrics/adoption", [s](const httplib::Request &req, httplib::Response &res) {
    try {
      ReviewFilter filter;
      if (req.has_param("from")) filter.from = parse_utc(req.get_param_value("from"));
      if (req.has_param("to")) filter.to = parse_utc(req.get_param_value("to"));
      if (req.has_param("reviewer")) filter.reviewer = req.get_param_value("reviewer");
      send_json(res, adoption_to_json(s->adoption_report(filter)));
    } catch (const Error &e) {
      send_error(res, http_status(e.code()), errc_name(e.code()), e.what());
    }
  });

  server.Get(R"(/api/sessions/([^/]+))", [s](const httplib::Request &req,
                                             httplib::Response &res) {
    const auto id = req.matches[1].str();
    auto stored = s->session(id);
    if (!stored) return send_error(res, 404, "UnknownSession", "no session '" + id + "'");
    Json reviews = Json::array();
    for (const auto &p : stored->extraction.pairs) {
      auto r = s->review(id, p.pair_id);
      reviews.push_back(r ? review_record_to_json(*r)
                          : Json{{"session_id", id},
                                 {"pair_id", p.pair_id},
                                 {"status", "pending"}});
    }
    Json j = session_to_json(stored->session);
    j["extraction"] = extraction_to_json(stored->extraction);
    j["reviews"] = std::move(reviews);
    j["ingested"] = format_utc(stored->ingested);
    send_json(res, j);
  });

  if (ui_dir && std::filesystem::is_directory(*ui_dir))
    server.set_mount_point("/", ui_dir->string());
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string &host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void ReviewServer::serve() { impl_->server.listen_after_bind(); }

void ReviewServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool ReviewServer::running() const { return impl_->server.is_running(); }

}  // namespace qae
