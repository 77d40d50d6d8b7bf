#include "bitext/curation_server.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "bitext/error.hpp"

namespace bitext {

namespace {

constexpr const char* kPlaceholderPage = R"(<!doctype html>
<html lang="en">
<head><meta charset="utf-8"><title>Bitext review</title></head>
<body>
<h1>Bitext review service</h1>
<p>No UI bundle is mounted. Start the service with <code>--ui-dir</code>
pointing at the built review UI, or use the JSON API under
<code>/api/</code>.</p>
</body>
</html>
)";

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, nlohmann::ordered_json{{"error", message}});
}

int status_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kConflict: return 409;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kInvalidInput: return 400;
    default: return 500;
  }
}

}  // namespace

CurationServer::CurationServer(CurationStore& store, ServerOptions options)
    : store_(store),
      options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

CurationServer::~CurationServer() { stop(); }

void CurationServer::install_routes() {
  server_->Get("/api/queue/next", [this](const httplib::Request& req,
                                          httplib::Response& res) {
    const std::string reviewer = req.get_param_value("reviewer");
    if (reviewer.empty()) return send_error(res, 400, "reviewer is required");
    const auto lease = store_.next_pending(reviewer);
    if (!lease) {
      res.status = 204;
      return;
    }
    nlohmann::ordered_json body;
    body["pair_id"] = lease->item.pair.id;
    body["src"] = lease->item.pair.source_text;
    body["tgt"] = lease->item.pair.target_text;
    if (lease->item.score) body["score"] = *lease->item.score;
    body["lease_expiry"] = format_timestamp(lease->expiry);
    send_json(res, 200, body);
  });

  server_->Post("/api/decision", [this](const httplib::Request& req,
                                         httplib::Response& res) {
    const auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      return send_error(res, 400, "body must be a JSON object");
    }
    Decision d;
    try {
      d.pair_id = j.at("pair_id").get<std::string>();
      const auto verdict = parse_verdict(j.at("verdict").get<std::string>());
      if (!verdict) return send_error(res, 400, "unknown verdict");
      d.verdict = *verdict;
      if (j.contains("label") && !j["label"].is_null()) {
        d.label = parse_label(j["label"].get<std::string>());
        if (!d.label) return send_error(res, 400, "unknown label");
      }
      d.reviewer = j.at("reviewer").get<std::string>();
      if (j.contains("note") && !j["note"].is_null()) {
        d.note = j["note"].get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      return send_error(res, 400, std::string("malformed decision: ") + e.what());
    }
    try {
      const Decision recorded = store_.record_decision(std::move(d));
      send_json(res, 200, nlohmann::ordered_json{
                              {"ok", true},
                              {"pair_id", recorded.pair_id},
                              {"timestamp", format_timestamp(recorded.timestamp)}});
    } catch (const Error& e) {
      send_error(res, status_for(e), e.what());
    }
  });

  server_->Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
    const QueueCounts counts = store_.counts();
    const AssessmentStats stats = store_.assessment();
    nlohmann::ordered_json body;
    body["pending"] = counts.pending;
    body["leased"] = counts.leased;
    body["decided"] = counts.decided;
    const auto assessment = to_json(stats);
    body["per_label"] = assessment["per_label"];
    body["defect_rate"] = assessment["defect_rate"];
    send_json(res, 200, body);
  });

  server_->Get("/api/export", [this](const httplib::Request& req,
                                      httplib::Response& res) {
    std::size_t limit = std::numeric_limits<std::size_t>::max();
    if (req.has_param("limit")) {
      try {
        limit = std::stoul(req.get_param_value("limit"));
      } catch (const std::exception&) {
        return send_error(res, 400, "limit must be a non-negative integer");
      }
    }
    ExportOrder order = ExportOrder::kDecision;
    const std::string order_name = req.get_param_value("order");
    if (order_name == "score") {
      order = ExportOrder::kScore;
    } else if (!order_name.empty() && order_name != "decision") {
      return send_error(res, 400, "order must be decision or score");
    }
    try {
      std::string body;
      for (const auto& record : store_.export_gold(order, limit)) {
        body += serialize_record(record);
        body += '\n';
      }
      res.status = 200;
      res.set_content(body, "application/x-ndjson");
    } catch (const Error& e) {
      send_error(res, 404, e.what());
    }
  });

  if (!options_.ui_dir.empty()) {
    if (!server_->set_mount_point("/", options_.ui_dir.string())) {
      throw InvalidInput("UI directory not found: " + options_.ui_dir.string());
    }
  } else {
    server_->Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderPage, "text/html; charset=utf-8");
    });
  }

  server_->set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
          std::rethrow_exception(ep);
        } catch (const Error& e) {
          send_error(res, status_for(e), e.what());
        } catch (const std::exception& e) {
          send_error(res, 500, e.what());
        }
      });
}

int CurationServer::bind() {
  int port = options_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(options_.host);
  } else if (!server_->bind_to_port(options_.host, port)) {
    port = -1;
  }
  if (port < 0) {
    throw IoError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  spdlog::info("curation service listening on http://{}:{}/", options_.host, port);
  return port;
}

void CurationServer::serve() { server_->listen_after_bind(); }

void CurationServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

}  // namespace bitext
