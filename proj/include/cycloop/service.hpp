#pragma once

// HTTP edit service.
//
//   GET  /health
//   POST /sessions                 create a session (fit + baseline loop)
//   GET  /sessions/{id}            session summary
//   DELETE /sessions/{id}
//   POST /sessions/{id}/edits      apply one localized edit
//   GET  /sessions/{id}/frames     one JSON line, then little-endian f32 frames;
//                                  query: block (name or "all"), stride,
//                                  version (409 on mismatch), closed=1 to
//                                  append frame T+1
//
// Sessions live in memory. With a snapshot directory, each session's create
// request and edit log are written there on shutdown and replayed on start.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

namespace cycloop {

struct ServiceOptions {
  // Directory searched for trajectory files named in create requests.
  std::filesystem::path model_dir = ".";
  std::optional<std::filesystem::path> snapshot_dir;
  std::size_t threads = 8;
};

// An HTTP status plus a JSON body; every handler result has this shape.
struct Reply {
  int status = 200;
  nlohmann::json body;
};

class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds the listening socket; port 0 picks a free port. Returns the bound
  // port, or -1 on failure.
  int bind(const std::string& host, int port);
  // Serves until stop(); returns false if the server could not run.
  bool run();
  void stop();
  void wait_until_ready() const;

  // Handler entry points, usable without a socket.
  Reply create_session(const std::string& body);
  Reply apply_edit(const std::string& session_id, const std::string& body);
  Reply summary(const std::string& session_id) const;

  std::size_t session_count() const;
  // Writes snapshots now (also done by the destructor when configured).
  void write_snapshots() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cycloop
