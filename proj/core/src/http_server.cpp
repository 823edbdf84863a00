#include <stdexcept>

// Before httplib: its resolver headers define macros that break Eigen.
#include "fpfgnn/interface.hpp"

#include <httplib.h>

namespace fpfgnn {

struct HttpServer::Impl {
  const InferenceService& service;
  httplib::Server server;
  bool bound = false;

  explicit Impl(const InferenceService& s) : service(s) {
    const auto route = [this](const httplib::Request& req, httplib::Response& res) {
      const HttpResponse r = service.handle(req.method, req.path, req.body);
      res.status = r.status;
      for (const auto& [k, v] : r.headers)
        if (k != "Content-Type") res.set_header(k, v);
      res.set_content(r.body, "application/json");
    };
    // Every method and path goes through handle() so 404/405 bodies match.
    const std::string any = ".*";
    server.Get(any, route);
    server.Post(any, route);
    server.Put(any, route);
    server.Delete(any, route);
    server.Patch(any, route);
    server.set_payload_max_length(16u << 20);
  }
};

HttpServer::HttpServer(const InferenceService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  impl_->bound = true;
  return bound;
}

void HttpServer::listen() {
  if (!impl_->bound) throw std::logic_error("HttpServer::listen before bind");
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

std::pair<std::string, int> parse_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size())
    throw std::invalid_argument("address must be host:port, got '" + addr + "'");
  const std::string host = addr.substr(0, colon);
  const std::string port_text = addr.substr(colon + 1);
  std::size_t used = 0;
  int port = -1;
  try {
    port = std::stoi(port_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port_text.size() || port < 0 || port > 65535)
    throw std::invalid_argument("bad port in address '" + addr + "'");
  return {host, port};
}

}  // namespace fpfgnn
