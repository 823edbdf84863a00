#include <chrono>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fpfgnn/interface.hpp"

namespace fpfgnn {

using nlohmann::json;
using nlohmann::ordered_json;

std::shared_ptr<const LoadedModel> load_model_bytes(const std::string& bytes, std::string source) {
  auto m = std::make_shared<LoadedModel>();
  m->checkpoint = deserialize_checkpoint(bytes);
  m->model = model_from_checkpoint(m->checkpoint);
  m->digest = sha256_hex(bytes);
  m->source = std::move(source);
  return m;
}

std::shared_ptr<const LoadedModel> load_model_file(const std::string& path) {
  return load_model_bytes(read_file(path), path);
}

HttpResponse error_response(int status, const std::string& code, const std::string& message,
                            const std::string& path) {
  ordered_json err{{"code", code}, {"message", message}};
  if (!path.empty()) err["path"] = path;
  HttpResponse r;
  r.status = status;
  r.body = ordered_json{{"error", err}}.dump();
  r.headers["Content-Type"] = "application/json";
  return r;
}

namespace {

HttpResponse ok(const ordered_json& body) {
  HttpResponse r;
  r.body = body.dump();
  r.headers["Content-Type"] = "application/json";
  return r;
}

bool flag(const ordered_json& req, const char* name) {
  if (!req.contains(name)) return false;
  if (!req[name].is_boolean())
    throw ParseError(std::string("$.") + name, "expected a boolean");
  return req[name].get<bool>();
}

ordered_json metrics_json(const MetricsReport& r) {
  const json src = to_json(r);
  ordered_json j;
  for (const auto& [k, v] : src.items()) j[k] = v;
  return j;
}

}  // namespace

InferenceService::InferenceService(std::vector<FloorplanSpec> retrieval_pool)
    : pool_(std::move(retrieval_pool)), started_(std::chrono::steady_clock::now()) {}

void InferenceService::set_model(std::shared_ptr<const LoadedModel> m) {
  std::lock_guard<std::mutex> lock(mutex_);
  model_ = std::move(m);
}

std::shared_ptr<const LoadedModel> InferenceService::model() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return model_;
}

HttpResponse InferenceService::handle(const std::string& method, const std::string& path,
                                      const std::string& body) const {
  const auto known = [&](const char* route, const char* verb) -> bool {
    return path == route && method == verb;
  };
  if (known("/health", "GET")) return health();
  if (known("/model", "GET")) return model_info();
  if (path == "/infer" || path == "/retrieve") {
    if (method != "POST") return error_response(405, "method_not_allowed", method + " not allowed on " + path);
    ordered_json req;
    try {
      req = ordered_json::parse(body);
    } catch (const ordered_json::parse_error& e) {
      return error_response(400, "malformed_request", std::string("invalid JSON: ") + e.what(), "$");
    }
    if (!req.is_object()) return error_response(400, "malformed_request", "request body must be an object", "$");
    return path == "/infer" ? infer(req) : retrieve(req);
  }
  if (path == "/health" || path == "/model")
    return error_response(405, "method_not_allowed", method + " not allowed on " + path);
  return error_response(404, "not_found", "no route for " + path);
}

HttpResponse InferenceService::health() const {
  const double uptime = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  const auto m = model();
  return ok({{"status", "ok"}, {"uptime_s", uptime}, {"model_loaded", m != nullptr}});
}

HttpResponse InferenceService::model_info() const {
  const auto m = model();
  if (!m) return error_response(503, "model_not_loaded", "no checkpoint loaded");
  ordered_json body;
  body["digest"] = m->digest;
  body["source"] = m->source;
  body["epoch"] = m->checkpoint.epoch;
  body["config"] = ordered_json::parse(to_json(m->checkpoint.model_config).dump());
  body["train_config"] = ordered_json::parse(to_json(m->checkpoint.train_config).dump());
  return ok(body);
}

HttpResponse InferenceService::infer(const ordered_json& req) const {
  const auto m = model();
  if (!m) return error_response(503, "model_not_loaded", "no checkpoint loaded");
  const auto t0 = std::chrono::steady_clock::now();
  FloorplanSpec spec;
  bool want_raster = false, want_metrics = false;
  try {
    for (const auto& [k, v] : req.items())
      if (k != "plan" && k != "return_raster" && k != "return_metrics")
        throw ParseError("$." + k, "unknown field");
    if (!req.contains("plan")) throw ParseError("$.plan", "missing field");
    want_raster = flag(req, "return_raster");
    want_metrics = flag(req, "return_metrics");
    spec = plan_from_json(req["plan"], "$.plan");
  } catch (const ParseError& e) {
    return error_response(e.semantic() ? 422 : 400, e.semantic() ? "semantic_violation" : "malformed_request",
                          e.what(), e.path());
  }
  if (spec.rooms.empty()) return error_response(422, "semantic_violation", "plan has no rooms", "$.plan.rooms");
  if (want_metrics && !spec.has_ground_truth())
    return error_response(422, "semantic_violation", "return_metrics needs a bbox on every room", "$.plan.rooms");

  const FactorGraph g = build_factor_graph(spec, m->model.config.graph);
  const std::vector<BBox> boxes = predict_boxes(predict_coordinates(m->model, g), g.room_count, spec.canvas);

  ordered_json out;
  out["model"] = m->digest;
  ordered_json rooms = ordered_json::array();
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BBox& b = boxes[i];
    rooms.push_back({{"id", spec.rooms[i].id},
                     {"type", room_type_name(spec.rooms[i].type)},
                     {"bbox", {b.x_min, b.y_min, b.x_max, b.y_max}}});
  }
  out["rooms"] = std::move(rooms);
  std::vector<RoomType> types;
  for (const RoomSpec& r : spec.rooms) types.push_back(r.type);
  if (want_raster) {
    const LayoutRaster raster = rasterize_layout(boxes, types, spec.boundary, spec.canvas);
    out["raster"] = {{"width", raster.width}, {"height", raster.height}, {"rle", run_length_encode(raster)}};
  }
  if (want_metrics) {
    FloorplanSpec truth = spec;
    out["metrics"] = metrics_json(evaluate_predictions({spec}, {truth}, {boxes}));
  }
  HttpResponse r = ok(out);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  r.headers["X-Inference-Time"] = std::to_string(ms / 1000.0);
  return r;
}

HttpResponse InferenceService::retrieve(const ordered_json& req) const {
  RectPolygon boundary;
  std::size_t k = 3;
  try {
    for (const auto& [key, v] : req.items())
      if (key != "boundary" && key != "k") throw ParseError("$." + key, "unknown field");
    if (!req.contains("boundary")) throw ParseError("$.boundary", "missing field");
    const ordered_json& b = req["boundary"];
    if (!b.is_array()) throw ParseError("$.boundary", "expected an array");
    std::vector<Point> pts;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const std::string p = "$.boundary[" + std::to_string(i) + "]";
      if (!b[i].is_array() || b[i].size() != 2 || !b[i][0].is_number() || !b[i][1].is_number())
        throw ParseError(p, "expected [x,y]");
      pts.push_back({b[i][0].get<double>(), b[i][1].get<double>()});
    }
    if (req.contains("k")) {
      if (!req["k"].is_number_integer() || req["k"].get<long long>() < 1) throw ParseError("$.k", "expected a positive integer");
      k = static_cast<std::size_t>(req["k"].get<long long>());
    }
    try {
      boundary = RectPolygon::from_points(std::move(pts));
    } catch (const GeometryError& e) {
      throw ParseError("$.boundary", e.what(), true);
    }
  } catch (const ParseError& e) {
    return error_response(e.semantic() ? 422 : 400, e.semantic() ? "semantic_violation" : "malformed_request",
                          e.what(), e.path());
  }
  if (pool_.empty()) return error_response(503, "no_retrieval_pool", "service was started without a plan pool");
  ordered_json plans = ordered_json::array();
  for (const Neighbor& n : knn_boundaries(boundary, pool_, k)) {
    const FloorplanSpec& src = pool_[n.index];
    const std::string tag = "retrieved:" + std::to_string(n.index);
    plans.push_back({{"index", n.index}, {"distance", n.distance}, {"plan", plan_to_json(retarget(src, boundary, tag))}});
  }
  return ok({{"neighbors", plans}});
}

}  // namespace fpfgnn
