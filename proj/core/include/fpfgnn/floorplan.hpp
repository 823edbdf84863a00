#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fpfgnn/geometry.hpp"

namespace fpfgnn {

enum class RoomType : int {
  LivingRoom = 0,
  MasterRoom,
  Kitchen,
  Bathroom,
  DiningRoom,
  ChildRoom,
  StudyRoom,
  SecondRoom,
  GuestRoom,
  Balcony,
  Entrance,
  Storage,
  WallIn,
  External,
  ExteriorWall,
};

inline constexpr int kRoomTypeCount = 15;
/// LivingRoom .. Wall-in; External and ExteriorWall only appear in rasters.
inline constexpr int kGeneratableRoomTypes = 13;

std::string_view room_type_name(RoomType t);
std::optional<RoomType> room_type_from_name(std::string_view name);

struct RoomSpec {
  int id = 0;
  RoomType type = RoomType::LivingRoom;
  std::optional<GridLocation> location;
  std::optional<double> size;
  std::optional<BBox> bbox;  // ground truth, when known

  /// Location and size both specified.
  bool known() const { return location.has_value() && size.has_value(); }
  friend bool operator==(const RoomSpec&, const RoomSpec&) = default;
};

struct EdgeSpec {
  int subject = 0;
  int object = 0;
  RelationType relation = RelationType::LeftOf;
  friend bool operator==(const EdgeSpec&, const EdgeSpec&) = default;
};

struct Canvas {
  int width = 256;
  int height = 256;
  friend bool operator==(const Canvas&, const Canvas&) = default;
};

struct FloorplanSpec {
  Canvas canvas;
  RectPolygon boundary;
  std::vector<RoomSpec> rooms;
  std::vector<EdgeSpec> edges;
  std::string source;  // e.g. "synthetic:7" or "imported"

  /// Index of the room with the given id, or -1.
  int room_index(int id) const;
  bool has_ground_truth() const;
  std::vector<BBox> ground_truth_boxes() const;

  friend bool operator==(const FloorplanSpec&, const FloorplanSpec&) = default;
};

/// Semantic problems found by validate_spec (empty when valid).
struct SpecIssue {
  std::string path;
  std::string message;
};

/// Checks room ids, edge endpoints, attribute ranges and (optionally) the
/// ground-truth consistency invariants.
std::vector<SpecIssue> validate_spec(const FloorplanSpec& spec, bool check_ground_truth,
                                     int grid_order = kDefaultGridOrder);

}  // namespace fpfgnn
