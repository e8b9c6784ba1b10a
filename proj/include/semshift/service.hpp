#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

#include "semshift/harness.hpp"

namespace semshift::service {

using io::Json;

struct Response {
  int status = 200;
  Json body;

  std::string text() const { return body.dump(); }
};

/// Error payload {code, message, detail}.
Response error(int status, std::string code, std::string message, Json detail = nullptr);

/// Admits callers one at a time in the order they called enter().
class FifoGate {
 public:
  void enter();
  void leave();

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::uint64_t next_ = 0;
  std::uint64_t serving_ = 0;
};

/// Request handling behind the local wire protocol. Mutations (POST) pass the FIFO gate
/// and hold the state lock exclusively; GETs share it.
class Service {
 public:
  Service(harness::Model model, const io::Manifest& manifest);
  Service(harness::Model model, std::vector<io::ManifestEntry> entries,
          std::vector<synth::SceneBundle> bundles);

  Response handle(std::string_view method, std::string_view path, std::string_view body);

  Response list_scenes() const;
  Response get_scene(const std::string& id) const;
  Response get_metrics(const std::string& id) const;
  Response post_semantic(const Json& req);
  Response post_decode(const Json& req);

 private:
  struct Semantic {
    std::string mode = "full";
    std::optional<int> instance_id;
    double intensity = 1.0;
  };
  struct SceneState {
    io::ManifestEntry entry;
    synth::SceneBundle bundle;
    SemanticPointCloud current;
    Semantic semantic;
    std::optional<Json> last_metrics;
  };

  const SceneState* find(const std::string& id) const;
  SceneState* find(const std::string& id);
  Json semantic_json(const SceneState& s) const;
  Json color_summary(const SceneState& s) const;

  harness::Model model_;
  std::vector<SceneState> scenes_;
  std::map<std::string, std::size_t> index_;
  mutable std::shared_mutex mu_;
  FifoGate gate_;
};

/// Local HTTP front end; httplib stays out of this header.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to host:port (port 0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace semshift::service
