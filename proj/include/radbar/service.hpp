#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "radbar/barcode.hpp"
#include "radbar/image.hpp"
#include "radbar/retrieval.hpp"
#include "radbar/roimatch.hpp"

namespace radbar {

struct ServiceOptions {
  std::size_t max_upload_bytes = 16u << 20;
  std::size_t session_capacity = 256;
  std::optional<std::filesystem::path> static_dir;
};

struct QuerySession {
  std::string query_id;
  GrayImage image;
  RetrievalResult result;
  std::int64_t created_unix_ms = 0;
};

/// Bounded map of query sessions with least-recently-used eviction. Safe for
/// concurrent use.
class SessionStore {
 public:
  explicit SessionStore(std::size_t capacity);
  ~SessionStore();

  void put(std::shared_ptr<const QuerySession> session);
  std::shared_ptr<const QuerySession> get(const std::string& query_id);
  std::size_t size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// HTTP front end over one immutable index:
///   POST /api/query, POST /api/roi-match, GET /api/images/{id},
///   GET /api/index/stats, GET / (static UI assets).
class Service {
 public:
  Service(RetrievalIndex index, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and blocks serving requests until stop().
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it (or -1); serve with
  /// listen_after_bind().
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

  const RetrievalIndex& index() const;
  /// Response body of GET /api/index/stats.
  std::string stats_json() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace radbar
