#include "radbar/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <list>
#include <mutex>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "radbar/logging.hpp"

namespace radbar {

using nlohmann::json;

// ---------------------------------------------------------------------------
// SessionStore

struct SessionStore::Impl {
  std::size_t capacity;
  mutable std::mutex mutex;
  std::list<std::shared_ptr<const QuerySession>> order;  // front = most recent
  std::unordered_map<std::string, std::list<std::shared_ptr<const QuerySession>>::iterator> by_id;
};

SessionStore::SessionStore(std::size_t capacity) : impl_(std::make_unique<Impl>()) {
  if (capacity < 1) throw InvalidInput("session capacity must be >= 1");
  impl_->capacity = capacity;
}

SessionStore::~SessionStore() = default;

void SessionStore::put(std::shared_ptr<const QuerySession> session) {
  std::lock_guard lock(impl_->mutex);
  const std::string id = session->query_id;
  if (auto it = impl_->by_id.find(id); it != impl_->by_id.end()) {
    impl_->order.erase(it->second);
    impl_->by_id.erase(it);
  }
  impl_->order.push_front(std::move(session));
  impl_->by_id[id] = impl_->order.begin();
  while (impl_->order.size() > impl_->capacity) {
    impl_->by_id.erase(impl_->order.back()->query_id);
    impl_->order.pop_back();
  }
}

std::shared_ptr<const QuerySession> SessionStore::get(const std::string& query_id) {
  std::lock_guard lock(impl_->mutex);
  const auto it = impl_->by_id.find(query_id);
  if (it == impl_->by_id.end()) return nullptr;
  impl_->order.splice(impl_->order.begin(), impl_->order, it->second);
  return *it->second;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->order.size();
}

// ---------------------------------------------------------------------------
// Service

namespace {

struct HttpError {
  int status;
  std::string message;
};

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}}.dump());
}

std::string default_message(int status) {
  switch (status) {
    case 400: return "bad request";
    case 404: return "not found";
    case 413: return "upload exceeds the size limit";
    default: return httplib::status_message(status);
  }
}

std::size_t parse_count(const std::string& field, const std::string& text) {
  if (text.empty() || text.size() > 9 || text.find_first_not_of("0123456789") != std::string::npos) {
    throw HttpError{400, "field '" + field + "' must be a positive integer"};
  }
  const auto value = std::stoul(text);
  if (value < 1) throw HttpError{400, "field '" + field + "' must be >= 1"};
  return value;
}

ActivationVector parse_activation_part(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception&) {
    throw HttpError{400, "activations part is not valid JSON"};
  }
  if (doc.is_object() && doc.contains("activations")) doc = doc["activations"];
  if (!doc.is_array()) throw HttpError{400, "activations must be a JSON array of numbers"};
  std::vector<double> values;
  for (const auto& v : doc) {
    if (!v.is_number()) throw HttpError{400, "activations must be a JSON array of numbers"};
    values.push_back(v.get<double>());
  }
  try {
    return ActivationVector(std::move(values));
  } catch (const InvalidInput& e) {
    throw HttpError{400, e.what()};
  }
}

std::string generate_query_id(std::atomic<std::uint64_t>& counter, std::uint64_t salt) {
  std::ostringstream out;
  out << 'q' << std::hex << salt << '-' << counter.fetch_add(1);
  return out.str();
}

std::int64_t now_unix_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

struct Service::Impl {
  RetrievalIndex index;
  ServiceOptions options;
  SessionStore sessions;
  httplib::Server server;
  std::string stats;
  std::atomic<std::uint64_t> counter{0};
  std::uint64_t salt;

  Impl(RetrievalIndex idx, ServiceOptions opts)
      : index(std::move(idx)), options(std::move(opts)), sessions(options.session_capacity) {
    salt = std::random_device{}() & 0xffffffu;
    const auto& cfg = index.config();
    json doc;
    doc["entry_count"] = index.size();
    doc["cnnc_bits"] = cfg.cnnc_dim;
    doc["rbc_bits"] = cfg.rbc.code_length();
    doc["config"] = {{"cnnc_dim", cfg.cnnc_dim},
                     {"cnnc_source", to_string(cfg.cnnc_source)},
                     {"rbc_side", cfg.rbc.side},
                     {"rbc_angles", cfg.rbc.angle_count},
                     {"k1", cfg.k1},
                     {"k2", cfg.k2},
                     {"rbc_mode", to_string(cfg.rbc_mode)}};
    stats = doc.dump();
    routes();
  }

  template <typename Fn>
  void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const HttpError& e) {
      send_error(res, e.status, e.message);
    } catch (const NotFound& e) {
      send_error(res, 404, e.what());
    } catch (const InvalidInput& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      spdlog::error("request failed: {}", e.what());
      send_error(res, 500, e.what());
    }
  }

  void handle_query(const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data()) throw HttpError{400, "expected multipart/form-data with an 'image' part"};
    if (!req.has_file("image")) throw HttpError{400, "missing 'image' part"};
    const auto& file = req.get_file_value("image");
    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(file.content.data()),
                                              file.content.size());
    GrayImage image;
    try {
      image = decode_grayscale(bytes);
    } catch (const InvalidInput& e) {
      throw HttpError{400, std::string("cannot decode uploaded image: ") + e.what()};
    }

    QueryOptions opts;
    if (req.has_file("k1")) opts.k1 = parse_count("k1", req.get_file_value("k1").content);
    if (req.has_file("k2")) opts.k2 = parse_count("k2", req.get_file_value("k2").content);
    std::optional<ActivationVector> activations;
    if (req.has_file("activations")) activations = parse_activation_part(req.get_file_value("activations").content);

    auto session = std::make_shared<QuerySession>();
    session->query_id = generate_query_id(counter, salt);
    opts.query_id = session->query_id;
    session->result = retrieve(index, image, activations, opts);
    session->image = std::move(image);
    session->created_unix_ms = now_unix_ms();
    const std::string body = result_to_json(session->result);
    spdlog::info("query {} -> {} hits", session->query_id, session->result.hits.size());
    sessions.put(std::move(session));
    send_json(res, 200, body);
  }

  void handle_roi_match(const httplib::Request& req, httplib::Response& res) {
    json doc;
    try {
      doc = json::parse(req.body);
    } catch (const json::exception&) {
      throw HttpError{400, "request body is not valid JSON"};
    }
    if (!doc.is_object() || !doc.contains("query_id") || !doc["query_id"].is_string()) {
      throw HttpError{400, "missing string field 'query_id'"};
    }
    if (!doc.contains("roi") || !doc["roi"].is_object()) throw HttpError{400, "missing object field 'roi'"};
    Roi roi;
    for (const char* key : {"x", "y", "w", "h"}) {
      if (!doc["roi"].contains(key) || !doc["roi"][key].is_number_unsigned()) {
        throw HttpError{400, std::string("roi.") + key + " must be a non-negative integer"};
      }
    }
    roi.x = doc["roi"]["x"].get<std::size_t>();
    roi.y = doc["roi"]["y"].get<std::size_t>();
    roi.w = doc["roi"]["w"].get<std::size_t>();
    roi.h = doc["roi"]["h"].get<std::size_t>();
    if (!doc.contains("target_ids") || !doc["target_ids"].is_array()) {
      throw HttpError{400, "missing array field 'target_ids'"};
    }

    const auto session = sessions.get(doc["query_id"].get<std::string>());
    if (!session) throw HttpError{404, "unknown query_id '" + doc["query_id"].get<std::string>() + "'"};
    validate_roi(roi, session->image.width(), session->image.height());

    std::vector<RoiTarget> targets;
    for (const auto& id : doc["target_ids"]) {
      if (!id.is_string()) throw HttpError{400, "target_ids must be strings"};
      const auto entry = index.find(id.get<std::string>());
      if (!entry) throw HttpError{404, "unknown target id '" + id.get<std::string>() + "'"};
      targets.push_back({id.get<std::string>(), load_grayscale(index.entries()[*entry].path)});
    }
    const auto outcomes = roi_match(session->image, roi, targets);
    send_json(res, 200, "{\"matches\":" + roi_matches_to_json(outcomes) + "}");
  }

  void handle_image(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto entry = index.find(id);
    if (!entry) throw HttpError{404, "unknown image id '" + id + "'"};
    const auto& path = index.entries()[*entry].path;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw HttpError{404, "image file for '" + id + "' is missing"};
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::span<const std::uint8_t> view(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
    if (req.get_param_value("format") == "png" && sniff_content_type(view) != "image/png") {
      const auto png = encode_png(decode_grayscale(view));
      res.set_content(std::string(png.begin(), png.end()), "image/png");
      return;
    }
    res.set_content(std::move(bytes), sniff_content_type(view));
  }

  void routes() {
    server.set_payload_max_length(options.max_upload_bytes);
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      send_error(res, res.status, default_message(res.status));
      return httplib::Server::HandlerResponse::Handled;
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string message = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        message = e.what();
      } catch (...) {
      }
      send_error(res, 500, message);
    });

    server.Post("/api/query", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { handle_query(req, res); });
    });
    server.Post("/api/roi-match", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { handle_roi_match(req, res); });
    });
    server.Get(R"(/api/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { handle_image(req, res); });
    });
    server.Get("/api/index/stats", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, stats);
    });
    if (options.static_dir) {
      if (!server.set_mount_point("/", options.static_dir->string())) {
        throw NotFound("static asset directory " + options.static_dir->string() + " does not exist");
      }
    }
  }
};

Service::Service(RetrievalIndex index, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(index), std::move(options))) {
  init_logging();
}

Service::~Service() { stop(); }

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int Service::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

const RetrievalIndex& Service::index() const { return impl_->index; }

std::string Service::stats_json() const { return impl_->stats; }

}  // namespace radbar
