#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpfgnn/floorplan.hpp"

namespace fpfgnn {

/// Structured load failure. `path` is a JSON path such as "$.rooms[2].type".
/// `semantic` separates well-formed-but-inconsistent input (dangling edges,
/// invalid boundary) from malformed documents.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string path, const std::string& message, bool semantic = false)
      : std::runtime_error(path + ": " + message), path_(std::move(path)), semantic_(semantic) {}
  const std::string& path() const { return path_; }
  bool semantic() const { return semantic_; }

 private:
  std::string path_;
  bool semantic_;
};

struct AdjacencyRule {
  double gap_tolerance_px = 2.0;
  double min_shared_span_px = 8.0;
};

struct GeneratorConfig {
  int min_rooms = 4;
  int max_rooms = 10;
  int min_corners = 4;
  int max_corners = 8;
  /// Boundary and partition coordinates snap to a grid of this many cells.
  int grid_cells = 32;
  /// Smallest room side, in grid cells.
  int min_room_cells = 3;
  int max_attempts = 64;
  Canvas canvas;
  int grid_order = kDefaultGridOrder;
  AdjacencyRule adjacency;

  void check() const;
};

/// Rectilinear boundary (up to two corner notches) partitioned by recursive
/// guillotine cuts. Deterministic per seed; throws std::runtime_error when no
/// valid partition is found within max_attempts.
FloorplanSpec generate_floorplan(std::uint64_t seed, const GeneratorConfig& cfg = {});

/// Typed adjacency from boxes: rooms are adjacent when the gap along one
/// axis is within tolerance and the overlap on the other axis reaches the
/// minimum span; nested boxes are always linked. Subject index < object index.
std::vector<EdgeSpec> derive_edges(const std::vector<BBox>& boxes, Canvas canvas = {},
                                   const AdjacencyRule& rule = {});

inline const std::set<RoomType>& default_protected_types() {
  static const std::set<RoomType> types{RoomType::LivingRoom, RoomType::MasterRoom, RoomType::Kitchen};
  return types;
}

/// Drops `k` uniformly chosen unprotected rooms to type-only rooms with no
/// incident edges. Throws std::invalid_argument when k exceeds the number of
/// unprotected rooms.
FloorplanSpec drop_constraints(const FloorplanSpec& spec, int k, std::uint64_t seed,
                               const std::set<RoomType>& protected_types = default_protected_types());
int droppable_room_count(const FloorplanSpec& spec,
                         const std::set<RoomType>& protected_types = default_protected_types());

enum class Split { Train, Val };

struct Dataset {
  std::vector<FloorplanSpec> plans;
  std::vector<Split> split;

  std::vector<std::size_t> indices(Split s) const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// `count` plans from seeds derived from `seed`; exactly `val_count` of them
/// labelled Val by a seeded shuffle.
Dataset make_dataset(std::uint64_t seed, int count, int val_count, const GeneratorConfig& cfg = {});

/// Seed of the i-th plan of a dataset.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

nlohmann::ordered_json plan_to_json(const FloorplanSpec& spec);
/// Strict schema check: unknown fields, missing fields and wrong types are
/// ParseErrors. `path` prefixes reported locations.
FloorplanSpec plan_from_json(const nlohmann::ordered_json& j, const std::string& path = "$");
nlohmann::ordered_json dataset_to_json(const Dataset& d);
Dataset dataset_from_json(const nlohmann::ordered_json& j);

std::string save_plan(const FloorplanSpec& spec);
FloorplanSpec load_plan(const std::string& text);
std::string save_dataset(const Dataset& d);
Dataset load_dataset(const std::string& text);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& data);

/// corner count / 8, polygon area, width / (width + height), then a 16-bin
/// angular histogram of inside pixels around the boundary's bounding-box
/// centre (normalized to sum to 1).
std::vector<double> boundary_descriptor(const RectPolygon& boundary, Canvas canvas = {});

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

/// k nearest plans by descriptor distance, ties broken by index.
std::vector<Neighbor> knn_boundaries(const RectPolygon& query, const std::vector<FloorplanSpec>& plans,
                                     std::size_t k, Canvas canvas = {});
/// Copies a retrieved plan's rooms and graph onto a new boundary, without
/// ground-truth boxes.
FloorplanSpec retarget(const FloorplanSpec& plan, const RectPolygon& boundary, const std::string& source);

}  // namespace fpfgnn
