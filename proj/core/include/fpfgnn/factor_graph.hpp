#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fpfgnn/floorplan.hpp"
#include "fpfgnn/geometry.hpp"

namespace fpfgnn {

enum class CoordKind : int { XMin = 0, XMax = 1, YMin = 2, YMax = 3 };
std::string_view coord_kind_name(CoordKind k);

struct VariableRef {
  int room = 0;
  CoordKind kind = CoordKind::XMin;
  friend bool operator==(const VariableRef&, const VariableRef&) = default;
};

/// Subject/object coordinate pair linked by one relation factor.
struct RelationTemplate {
  CoordKind subject;
  CoordKind object;
  friend bool operator==(const RelationTemplate&, const RelationTemplate&) = default;
};

struct BoxFactor {
  int room = 0;
  friend bool operator==(const BoxFactor&, const BoxFactor&) = default;
};
struct RelationFactor {
  RelationType relation = RelationType::LeftOf;
  RelationTemplate pair{CoordKind::XMax, CoordKind::XMin};
  int edge = 0;
  friend bool operator==(const RelationFactor&, const RelationFactor&) = default;
};
struct BoundaryFactor {
  int corner = 0;
  friend bool operator==(const BoundaryFactor&, const BoundaryFactor&) = default;
};
struct CompleteFactor {
  friend bool operator==(const CompleteFactor&, const CompleteFactor&) = default;
};

using FactorKind = std::variant<BoxFactor, RelationFactor, BoundaryFactor, CompleteFactor>;

/// Position of a factor kind in the 13-way one-hot block: box, the ten
/// relations, boundary, complete.
int factor_kind_slot(const FactorKind& kind);
inline constexpr int kFactorKindSlots = 13;

struct FactorGraphConfig {
  bool box_factors = true;
  bool relation_factors = true;
  bool boundary_factors = true;
  bool complete_factor = true;
  /// Per-relation switches, indexed like kAllRelations.
  std::array<bool, kRelationCount> relation_enabled{true, true, true, true, true,
                                                    true, true, true, true, true};
  bool corner_distance_features = true;
  bool corner_probe_features = true;
  /// Replace the fourth inside/surrounding pair {y_min^s, y_max^o} by
  /// {y_max^s, y_max^o}.
  bool amend_inside_factor = false;
  int grid_order = kDefaultGridOrder;
  double probe_offset = kDefaultProbeOffset;
};

/// Fixed-width feature layouts.
///   variable: type[15] ++ location[K^2] ++ size[1] ++ kind[4] ++ known[1]
///   factor:   kind[13] ++ type[15] ++ location[K^2] ++ size[1] ++ corner[10]
struct FeatureLayout {
  int grid_order = kDefaultGridOrder;

  int cells() const { return grid_order * grid_order; }
  int room_block() const { return kRoomTypeCount + cells() + 1; }
  int variable_width() const { return room_block() + 4 + 1; }
  int factor_width() const { return kFactorKindSlots + room_block() + 10; }
};

struct GraphEdge {
  int factor = 0;
  int variable = 0;
  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

struct FactorGraph {
  int room_count = 0;
  Canvas canvas;
  FeatureLayout layout;
  std::vector<VariableRef> variables;
  std::vector<FactorKind> factors;
  std::vector<double> variable_features;  // row-major, layout.variable_width() columns
  std::vector<double> factor_features;    // row-major, layout.factor_width() columns
  /// Sorted by (factor, variable). The feature of an edge is the feature row
  /// of its factor.
  std::vector<GraphEdge> edges;

  // Derived by index(): CSR views over `edges`.
  std::vector<int> factor_offsets;    // factors.size() + 1
  std::vector<int> variable_order;    // edge ids sorted by (variable, factor)
  std::vector<int> variable_offsets;  // variables.size() + 1

  std::size_t variable_count() const { return variables.size(); }
  std::size_t factor_count() const { return factors.size(); }
  void index();
};

/// Ordered (subject, object) coordinate pairs tied by one relation.
std::vector<RelationTemplate> relation_factor_templates(RelationType rel,
                                                        bool amend_inside_factor = false);

std::vector<double> variable_feature(const RoomSpec& room, CoordKind kind,
                                     const FactorGraphConfig& cfg);
std::vector<double> factor_feature(const FactorKind& kind, const FloorplanSpec& spec,
                                   const std::vector<CornerFeature>& corners,
                                   const FactorGraphConfig& cfg);

/// Throws std::invalid_argument for dangling edges or invalid room types.
FactorGraph build_factor_graph(const FloorplanSpec& spec, const FactorGraphConfig& cfg = {});

/// Structural diagnostics; empty iff the graph is well formed.
std::vector<std::string> validate(const FactorGraph& g);

nlohmann::json graph_to_json(const FactorGraph& g);

}  // namespace fpfgnn
