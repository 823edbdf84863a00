#include <fstream>
#include <set>
#include <sstream>

#include "fpfgnn/data.hpp"

namespace fpfgnn {

using ojson = nlohmann::ordered_json;

namespace {

constexpr int kFormatVersion = 1;

void reject_unknown(const ojson& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError(path + "." + key, "unknown field");
  }
}

const ojson& field(const ojson& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key, "missing required field");
  return *it;
}

void expect_object(const ojson& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
}
void expect_array(const ojson& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
}

double as_number(const ojson& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  return j.get<double>();
}

int as_int(const ojson& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
  const auto v = j.get<long long>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ParseError(path, "integer out of range");
  return static_cast<int>(v);
}

std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

RoomSpec parse_room(const ojson& j, const std::string& path) {
  expect_object(j, path);
  reject_unknown(j, path, {"id", "type", "known", "location", "size", "bbox"});
  RoomSpec r;
  r.id = as_int(field(j, path, "id"), path + ".id");
  const ojson& type = field(j, path, "type");
  if (!type.is_string()) throw ParseError(path + ".type", "expected a string");
  const auto t = room_type_from_name(type.get<std::string>());
  if (!t) throw ParseError(path + ".type", "unknown room type \"" + type.get<std::string>() + "\"");
  r.type = *t;
  if (j.contains("location")) r.location = GridLocation{as_int(j["location"], path + ".location")};
  if (j.contains("size")) r.size = as_number(j["size"], path + ".size");
  if (j.contains("bbox")) {
    const ojson& b = j["bbox"];
    if (!b.is_array() || b.size() != 4) throw ParseError(path + ".bbox", "expected [xmin,ymin,xmax,ymax]");
    BBox box;
    box.x_min = as_number(b[0], path + ".bbox[0]");
    box.y_min = as_number(b[1], path + ".bbox[1]");
    box.x_max = as_number(b[2], path + ".bbox[2]");
    box.y_max = as_number(b[3], path + ".bbox[3]");
    r.bbox = box;
  }
  if (j.contains("known")) {
    if (!j["known"].is_boolean()) throw ParseError(path + ".known", "expected a boolean");
    if (j["known"].get<bool>() != r.known())
      throw ParseError(path + ".known", "known must be true exactly when location and size are both given", true);
  }
  return r;
}

EdgeSpec parse_edge(const ojson& j, const std::string& path) {
  expect_object(j, path);
  reject_unknown(j, path, {"s", "o", "rel"});
  EdgeSpec e;
  e.subject = as_int(field(j, path, "s"), path + ".s");
  e.object = as_int(field(j, path, "o"), path + ".o");
  const ojson& rel = field(j, path, "rel");
  if (!rel.is_string()) throw ParseError(path + ".rel", "expected a string");
  const auto r = relation_from_name(rel.get<std::string>());
  if (!r) throw ParseError(path + ".rel", "unknown relation \"" + rel.get<std::string>() + "\"");
  e.relation = *r;
  return e;
}

}  // namespace

ojson plan_to_json(const FloorplanSpec& spec) {
  ojson j;
  j["version"] = kFormatVersion;
  j["canvas"] = {{"w", spec.canvas.width}, {"h", spec.canvas.height}};
  ojson boundary = ojson::array();
  for (const Point& p : spec.boundary.corners()) boundary.push_back({p.x, p.y});
  j["boundary"] = std::move(boundary);
  ojson rooms = ojson::array();
  for (const RoomSpec& r : spec.rooms) {
    ojson room;
    room["id"] = r.id;
    room["type"] = std::string(room_type_name(r.type));
    room["known"] = r.known();
    if (r.location) room["location"] = r.location->index;
    if (r.size) room["size"] = *r.size;
    if (r.bbox) room["bbox"] = {r.bbox->x_min, r.bbox->y_min, r.bbox->x_max, r.bbox->y_max};
    rooms.push_back(std::move(room));
  }
  j["rooms"] = std::move(rooms);
  ojson edges = ojson::array();
  for (const EdgeSpec& e : spec.edges)
    edges.push_back({{"s", e.subject}, {"o", e.object}, {"rel", std::string(relation_name(e.relation))}});
  j["edges"] = std::move(edges);
  if (!spec.source.empty()) j["source"] = spec.source;
  return j;
}

FloorplanSpec plan_from_json(const ojson& j, const std::string& path) {
  expect_object(j, path);
  reject_unknown(j, path, {"version", "canvas", "boundary", "rooms", "edges", "source"});
  const ojson& version = field(j, path, "version");
  if (as_int(version, path + ".version") != kFormatVersion)
    throw ParseError(path + ".version", "unsupported version " + version.dump());

  FloorplanSpec spec;
  const std::string cpath = path + ".canvas";
  const ojson& canvas = field(j, path, "canvas");
  expect_object(canvas, cpath);
  reject_unknown(canvas, cpath, {"w", "h"});
  spec.canvas.width = as_int(field(canvas, cpath, "w"), cpath + ".w");
  spec.canvas.height = as_int(field(canvas, cpath, "h"), cpath + ".h");
  if (spec.canvas.width <= 0 || spec.canvas.height <= 0) throw ParseError(cpath, "canvas must be positive", true);

  const std::string bpath = path + ".boundary";
  const ojson& boundary = field(j, path, "boundary");
  expect_array(boundary, bpath);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < boundary.size(); ++i) {
    const ojson& p = boundary[i];
    if (!p.is_array() || p.size() != 2) throw ParseError(at(bpath, i), "expected [x,y]");
    pts.push_back({as_number(p[0], at(bpath, i) + "[0]"), as_number(p[1], at(bpath, i) + "[1]")});
  }
  try {
    spec.boundary = RectPolygon::from_points(std::move(pts));
  } catch (const GeometryError& e) {
    throw ParseError(bpath, e.what(), true);
  }

  const std::string rpath = path + ".rooms";
  const ojson& rooms = field(j, path, "rooms");
  expect_array(rooms, rpath);
  for (std::size_t i = 0; i < rooms.size(); ++i) spec.rooms.push_back(parse_room(rooms[i], at(rpath, i)));

  const std::string epath = path + ".edges";
  const ojson& edges = field(j, path, "edges");
  expect_array(edges, epath);
  for (std::size_t i = 0; i < edges.size(); ++i) spec.edges.push_back(parse_edge(edges[i], at(epath, i)));

  if (j.contains("source")) {
    if (!j["source"].is_string()) throw ParseError(path + ".source", "expected a string");
    spec.source = j["source"].get<std::string>();
  }

  // validate_spec reports paths rooted at "$"; re-root them under `path`.
  const auto issues = validate_spec(spec, false);
  if (!issues.empty()) throw ParseError(path + issues.front().path.substr(1), issues.front().message, true);
  return spec;
}

ojson dataset_to_json(const Dataset& d) {
  ojson j;
  j["version"] = kFormatVersion;
  ojson plans = ojson::array();
  for (const FloorplanSpec& p : d.plans) plans.push_back(plan_to_json(p));
  j["plans"] = std::move(plans);
  ojson split = ojson::array();
  for (Split s : d.split) split.push_back(s == Split::Train ? "train" : "val");
  j["split"] = std::move(split);
  return j;
}

Dataset dataset_from_json(const ojson& j) {
  expect_object(j, "$");
  reject_unknown(j, "$", {"version", "plans", "split"});
  if (as_int(field(j, "$", "version"), "$.version") != kFormatVersion)
    throw ParseError("$.version", "unsupported version");
  Dataset d;
  const ojson& plans = field(j, "$", "plans");
  expect_array(plans, "$.plans");
  for (std::size_t i = 0; i < plans.size(); ++i) d.plans.push_back(plan_from_json(plans[i], at("$.plans", i)));
  const ojson& split = field(j, "$", "split");
  expect_array(split, "$.split");
  if (split.size() != plans.size()) throw ParseError("$.split", "split length differs from plan count", true);
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == "train")
      d.split.push_back(Split::Train);
    else if (split[i] == "val")
      d.split.push_back(Split::Val);
    else
      throw ParseError(at("$.split", i), "expected \"train\" or \"val\"");
  }
  return d;
}

namespace {
ojson parse_text(const std::string& text) {
  try {
    return ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw ParseError("$", std::string("invalid JSON: ") + e.what());
  }
}
}  // namespace

std::string save_plan(const FloorplanSpec& spec) { return plan_to_json(spec).dump(2) + "\n"; }
FloorplanSpec load_plan(const std::string& text) { return plan_from_json(parse_text(text)); }
std::string save_dataset(const Dataset& d) { return dataset_to_json(d).dump() + "\n"; }
Dataset load_dataset(const std::string& text) { return dataset_from_json(parse_text(text)); }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& data) {
  // write to a sibling temp file, then rename so readers never see a partial file
  const std::filesystem::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

}  // namespace fpfgnn
