#include "fpfgnn/floorplan.hpp"

#include <set>

namespace fpfgnn {

namespace {

constexpr std::array<std::string_view, kRoomTypeCount> kRoomNames = {
    "LivingRoom", "MasterRoom", "Kitchen", "Bathroom", "DiningRoom",
    "ChildRoom",  "StudyRoom",  "SecondRoom", "GuestRoom", "Balcony",
    "Entrance",   "Storage",    "Wall-in",   "External",  "ExteriorWall"};

constexpr double kBoundsSlack = 1e-9;

}  // namespace

std::string_view room_type_name(RoomType t) {
  const int i = static_cast<int>(t);
  if (i < 0 || i >= kRoomTypeCount) return "?";
  return kRoomNames[static_cast<std::size_t>(i)];
}

std::optional<RoomType> room_type_from_name(std::string_view name) {
  for (int i = 0; i < kRoomTypeCount; ++i)
    if (kRoomNames[static_cast<std::size_t>(i)] == name) return static_cast<RoomType>(i);
  return std::nullopt;
}

int FloorplanSpec::room_index(int id) const {
  for (std::size_t i = 0; i < rooms.size(); ++i)
    if (rooms[i].id == id) return static_cast<int>(i);
  return -1;
}

bool FloorplanSpec::has_ground_truth() const {
  if (rooms.empty()) return false;
  for (const RoomSpec& r : rooms)
    if (!r.bbox) return false;
  return true;
}

std::vector<BBox> FloorplanSpec::ground_truth_boxes() const {
  std::vector<BBox> out;
  out.reserve(rooms.size());
  for (const RoomSpec& r : rooms) out.push_back(r.bbox.value_or(BBox{}));
  return out;
}

std::vector<SpecIssue> validate_spec(const FloorplanSpec& spec, bool check_ground_truth,
                                     int grid_order) {
  std::vector<SpecIssue> issues;
  const auto add = [&](std::string path, std::string msg) {
    issues.push_back({std::move(path), std::move(msg)});
  };
  if (spec.canvas.width <= 0 || spec.canvas.height <= 0) add("$.canvas", "canvas must be positive");
  if (spec.boundary.size() < 4) add("$.boundary", "boundary needs at least 4 corners");
  if (spec.rooms.empty()) add("$.rooms", "at least one room is required");

  std::set<int> ids;
  for (std::size_t i = 0; i < spec.rooms.size(); ++i) {
    const RoomSpec& r = spec.rooms[i];
    const std::string p = "$.rooms[" + std::to_string(i) + "]";
    if (!ids.insert(r.id).second) add(p + ".id", "duplicate room id " + std::to_string(r.id));
    const int t = static_cast<int>(r.type);
    if (t < 0 || t >= kRoomTypeCount) add(p + ".type", "room type index out of range");
    if (r.location && (r.location->index < 0 || r.location->index >= grid_order * grid_order))
      add(p + ".location", "location cell out of range");
    if (r.size && (*r.size < 0.0 || *r.size > 1.0)) add(p + ".size", "size must lie in [0,1]");
    if (r.bbox && !r.bbox->valid()) add(p + ".bbox", "bbox must be ordered and inside [0,1]");
  }

  for (std::size_t i = 0; i < spec.edges.size(); ++i) {
    const EdgeSpec& e = spec.edges[i];
    const std::string p = "$.edges[" + std::to_string(i) + "]";
    if (spec.room_index(e.subject) < 0) add(p + ".s", "edge subject references a missing room");
    if (spec.room_index(e.object) < 0) add(p + ".o", "edge object references a missing room");
    if (e.subject == e.object) add(p, "edge endpoints must differ");
  }

  if (check_ground_truth && issues.empty()) {
    const BBox outer = spec.boundary.bounds();
    for (std::size_t i = 0; i < spec.rooms.size(); ++i) {
      const RoomSpec& r = spec.rooms[i];
      if (!r.bbox) continue;
      const BBox& b = *r.bbox;
      if (b.x_min < outer.x_min - kBoundsSlack || b.y_min < outer.y_min - kBoundsSlack ||
          b.x_max > outer.x_max + kBoundsSlack || b.y_max > outer.y_max + kBoundsSlack)
        add("$.rooms[" + std::to_string(i) + "].bbox", "bbox leaves the boundary's enclosing box");
    }
    for (std::size_t i = 0; i < spec.edges.size(); ++i) {
      const EdgeSpec& e = spec.edges[i];
      const RoomSpec& s = spec.rooms[static_cast<std::size_t>(spec.room_index(e.subject))];
      const RoomSpec& o = spec.rooms[static_cast<std::size_t>(spec.room_index(e.object))];
      if (!s.bbox || !o.bbox) continue;
      if (!relation_satisfied(*s.bbox, *o.bbox, e.relation))
        add("$.edges[" + std::to_string(i) + "].rel", "relation disagrees with ground-truth boxes");
    }
  }
  return issues;
}

}  // namespace fpfgnn
