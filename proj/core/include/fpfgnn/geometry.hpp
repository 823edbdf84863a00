#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fpfgnn {

/// Thrown when a geometric input violates its preconditions.
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Axis-aligned box in normalized canvas coordinates. y grows downwards
/// (row 0 is the top of the canvas), so "above" means a smaller y.
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  bool valid() const;

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Rectilinear simple polygon. Stored in canonical order: first vertex is
/// the top-most then left-most corner, traversal runs down the left side
/// first (counter-clockwise as seen on screen), and collinear points are
/// removed.
class RectPolygon {
 public:
  RectPolygon() = default;

  /// Validates and canonicalizes. Throws GeometryError when the outline is
  /// not a simple rectilinear polygon with positive area.
  static RectPolygon from_points(std::vector<Point> points);
  static RectPolygon rectangle(double x_min, double y_min, double x_max, double y_max);

  const std::vector<Point>& corners() const { return corners_; }
  std::size_t size() const { return corners_.size(); }
  bool counter_clockwise() const { return true; }
  BBox bounds() const;
  double area() const;
  /// Even-odd point-in-polygon test.
  bool contains(double x, double y) const;

  friend bool operator==(const RectPolygon&, const RectPolygon&) = default;

 private:
  std::vector<Point> corners_;
};

/// Row-major W x H bit grid, 1 = inside the building.
class BoundaryMask {
 public:
  BoundaryMask() = default;
  BoundaryMask(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  bool at(int row, int col) const { return bits_[static_cast<std::size_t>(row) * width_ + col] != 0; }
  void set(int row, int col, bool v) { bits_[static_cast<std::size_t>(row) * width_ + col] = v ? 1 : 0; }
  /// Reads the pixel containing the normalized point; points outside the
  /// canvas read as 0.
  bool probe(double x, double y) const;
  std::size_t popcount() const;

  friend bool operator==(const BoundaryMask&, const BoundaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Corner descriptor layout: x, y, d_left, d_right, d_top, d_bottom,
/// mask(x+e,y+e), mask(x+e,y-e), mask(x-e,y+e), mask(x-e,y-e).
using CornerFeature = std::array<double, 10>;

enum class RelationType : std::uint8_t {
  LeftOf,
  RightOf,
  Above,
  Below,
  LeftAbove,
  RightAbove,
  LeftBelow,
  RightBelow,
  Inside,
  Surrounding,
};

inline constexpr int kRelationCount = 10;
inline constexpr std::array<RelationType, kRelationCount> kAllRelations = {
    RelationType::LeftOf,    RelationType::RightOf,    RelationType::Above,
    RelationType::Below,     RelationType::LeftAbove,  RelationType::RightAbove,
    RelationType::LeftBelow, RelationType::RightBelow, RelationType::Inside,
    RelationType::Surrounding};

std::string_view relation_name(RelationType r);
std::optional<RelationType> relation_from_name(std::string_view name);
RelationType inverse(RelationType r);

struct GridLocation {
  int index = 0;
  int row(int k) const { return index / k; }
  int col(int k) const { return index % k; }
  friend bool operator==(const GridLocation&, const GridLocation&) = default;
};

inline constexpr int kDefaultGridOrder = 5;
inline constexpr double kDefaultProbeOffset = 3.0 / 256.0;

double iou(const BBox& a, const BBox& b);
double intersect_area(const BBox& a, const BBox& b);
/// Same as intersect_area, scaled to pixel units on a width x height canvas.
double intersect_area_pixels(const BBox& a, const BBox& b, int width, int height);

BoundaryMask rasterize_polygon(const RectPolygon& p, int width, int height);
std::vector<Point> extract_corners(const RectPolygon& p);
/// Recovers the outline of the (single, hole-free) inside region of a mask.
RectPolygon trace_mask_boundary(const BoundaryMask& mask);

CornerFeature corner_feature(const RectPolygon& boundary, const BoundaryMask& mask, Point corner,
                             double epsilon = kDefaultProbeOffset);

GridLocation location_cell(const BBox& box, int k = kDefaultGridOrder);
double normalized_size(const BBox& box);

/// Containment first, then the 45-degree sector of the centroid offset.
/// Throws GeometryError for identical boxes.
RelationType classify_relation(const BBox& s, const BBox& o);
bool relation_satisfied(const BBox& s, const BBox& o, RelationType rel);

}  // namespace fpfgnn
