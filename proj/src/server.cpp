#include "semshift/service.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines a _res macro.
#include <httplib.h>

namespace semshift::service {

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;

  explicit Impl(Service& s) : service(s) {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
      const Response r = service.handle(req.method, req.path, req.body);
      res.status = r.status;
      res.set_content(r.text(), "application/json");
    };
    server.Get(R"(/.*)", forward);
    server.Post(R"(/.*)", forward);
    server.Put(R"(/.*)", forward);
    server.Delete(R"(/.*)", forward);
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace semshift::service
