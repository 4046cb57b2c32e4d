#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "mrbench/config.hpp"
#include "mrbench/error.hpp"
#include "mrbench/eval.hpp"

namespace mrb {

// HTTP status for an error code.
int http_status(ErrorCode code);
// {"error": code, "detail": text}
Json error_body(const Error &e);

// JSON/PNG API over an EvalService:
//   POST /api/{phase}/{track}/submissions          team bearer token, multipart
//   GET  /api/{phase}/{track}/leaderboard
//   GET  /api/{phase}/{track}/submissions/{id}/scorecard
//   GET  /api/{phase}/{track}/submissions/{id}/thumbnails/{k}.png   k = 0, 1, 2
//   GET  /api/standings
//   POST /api/admin/close_window, /api/admin/shutdown  admin bearer token
//   GET  /api/study/{track}/bundle                  reader token (header or ?token=)
//   GET  /api/study/{track}/images/{case}/{label}/{slice}.png
//   POST /api/study/{track}/responses
// Multipart submissions: a "manifest" field with JSON {"description"} and one
// file per volume in a field named "R<accel>", filename "<case_id>.ksb1".
class EvalServer {
public:
  EvalServer(ServeConfig cfg, EvalService &svc);
  ~EvalServer();
  EvalServer(const EvalServer &) = delete;
  EvalServer &operator=(const EvalServer &) = delete;

  // port 0 picks a free port; returns the bound port.
  int bind(const std::string &host, int port);
  // Serves until stop() or POST /api/admin/shutdown.
  void run();
  void stop();
  void wait_until_ready() const;

  // System time, or start + step * accepted submissions for a logical clock.
  std::int64_t now() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace mrb
