#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "bitext/curation.hpp"

namespace httplib {
class Server;
}

namespace bitext {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds any free port
  // Static review UI bundle served at "/". A built-in placeholder page is
  // served when empty.
  std::filesystem::path ui_dir;
};

// HTTP+JSON front end for a CurationStore:
//   GET  /api/queue/next?reviewer=<id>  200 {pair_id, src, tgt, score?, lease_expiry} | 204
//   POST /api/decision                  200 {ok} | 400 | 404 | 409
//   GET  /api/stats                     200 {pending, leased, decided, per_label, defect_rate}
//   GET  /api/export?limit=&order=      200 JSONL | 404 empty gold set
//   GET  /                              review UI
class CurationServer {
 public:
  CurationServer(CurationStore& store, ServerOptions options);
  ~CurationServer();

  // Binds the socket; returns the bound port.
  int bind();
  // Blocks serving requests until stop().
  void serve();
  void stop();

 private:
  void install_routes();

  CurationStore& store_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace bitext
