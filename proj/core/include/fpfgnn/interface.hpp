#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fpfgnn/pipeline.hpp"

namespace fpfgnn {

/// Immutable model snapshot shared by in-flight requests.
struct LoadedModel {
  Model model;
  Checkpoint checkpoint;
  std::string digest;  // SHA-256 of the checkpoint bytes
  std::string source;  // file path or "memory"
};

std::shared_ptr<const LoadedModel> load_model_file(const std::string& path);
std::shared_ptr<const LoadedModel> load_model_bytes(const std::string& bytes, std::string source = "memory");

struct HttpResponse {
  int status = 200;
  std::string body;
  std::map<std::string, std::string> headers;
};

/// Error body: {"error": {"code", "message", "path"?}}.
HttpResponse error_response(int status, const std::string& code, const std::string& message,
                            const std::string& path = {});

/// Routes:
///   GET  /health    always 200
///   GET  /model     config and checkpoint digest (503 before load)
///   POST /infer     {"plan": {...}, "return_raster": bool, "return_metrics": bool}
///   POST /retrieve  {"boundary": [[x, y], ...], "k": int}
/// Inference time goes in the X-Inference-Time header so identical requests
/// get identical bodies.
class InferenceService {
 public:
  explicit InferenceService(std::vector<FloorplanSpec> retrieval_pool = {});

  /// Replaces the model between requests; in-flight requests keep the old one.
  void set_model(std::shared_ptr<const LoadedModel> m);
  std::shared_ptr<const LoadedModel> model() const;

  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

  HttpResponse infer(const nlohmann::ordered_json& request) const;
  HttpResponse retrieve(const nlohmann::ordered_json& request) const;
  HttpResponse health() const;
  HttpResponse model_info() const;

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const LoadedModel> model_;
  std::vector<FloorplanSpec> pool_;
  std::chrono::steady_clock::time_point started_;
};

/// HTTP adapter over InferenceService. listen() blocks until stop() is
/// called from another thread.
class HttpServer {
 public:
  explicit HttpServer(const InferenceService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  /// Throws std::runtime_error if the address cannot be bound.
  int bind(const std::string& host, int port);
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "host:port"; throws std::invalid_argument on a bad address.
std::pair<std::string, int> parse_address(const std::string& addr);

/// Name of the environment variable holding the default checkpoint path.
inline constexpr const char* kCheckpointEnv = "FPFGNN_CHECKPOINT";

}  // namespace fpfgnn
