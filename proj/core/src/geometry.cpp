#include "fpfgnn/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace fpfgnn {

namespace {

constexpr double kCoordEps = 1e-12;

bool same(double a, double b) { return std::abs(a - b) <= kCoordEps; }

double shoelace(const std::vector<Point>& pts) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point& a = pts[i];
    const Point& b = pts[(i + 1) % pts.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

// Axis-parallel segments, closed intervals.
bool segments_touch(const Point& a0, const Point& a1, const Point& b0, const Point& b1) {
  const double ax0 = std::min(a0.x, a1.x), ax1 = std::max(a0.x, a1.x);
  const double ay0 = std::min(a0.y, a1.y), ay1 = std::max(a0.y, a1.y);
  const double bx0 = std::min(b0.x, b1.x), bx1 = std::max(b0.x, b1.x);
  const double by0 = std::min(b0.y, b1.y), by1 = std::max(b0.y, b1.y);
  return ax0 <= bx1 + kCoordEps && bx0 <= ax1 + kCoordEps && ay0 <= by1 + kCoordEps &&
         by0 <= ay1 + kCoordEps;
}

}  // namespace

bool BBox::valid() const {
  const auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  return x_min <= x_max && y_min <= y_max && in01(x_min) && in01(x_max) && in01(y_min) &&
         in01(y_max);
}

RectPolygon RectPolygon::from_points(std::vector<Point> points) {
  // drop repeated vertices
  std::vector<Point> pts;
  for (const Point& p : points) {
    if (pts.empty() || !(same(pts.back().x, p.x) && same(pts.back().y, p.y))) pts.push_back(p);
  }
  while (pts.size() > 1 && same(pts.front().x, pts.back().x) && same(pts.front().y, pts.back().y))
    pts.pop_back();
  if (pts.size() < 4) throw GeometryError("polygon needs at least 4 distinct corners");

  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point& a = pts[i];
    const Point& b = pts[(i + 1) % pts.size()];
    if (!same(a.x, b.x) && !same(a.y, b.y))
      throw GeometryError("polygon edge " + std::to_string(i) + " is not axis-parallel");
  }

  // drop collinear vertices (direction does not change)
  bool changed = true;
  while (changed && pts.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Point& prev = pts[(i + pts.size() - 1) % pts.size()];
      const Point& cur = pts[i];
      const Point& next = pts[(i + 1) % pts.size()];
      const bool vertical_in = same(prev.x, cur.x);
      const bool vertical_out = same(cur.x, next.x);
      if (vertical_in == vertical_out) {
        pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  if (pts.size() < 4 || pts.size() % 2 != 0)
    throw GeometryError("rectilinear polygon must have an even number (>= 4) of corners");

  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_touch(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]))
        throw GeometryError("polygon is not simple (edges " + std::to_string(i) + " and " +
                            std::to_string(j) + " touch)");
    }
  }

  const double signed_area = shoelace(pts);
  if (std::abs(signed_area) <= kCoordEps) throw GeometryError("polygon has empty interior");
  // y points down, so the on-screen counter-clockwise order has negative area
  if (signed_area > 0.0) std::reverse(pts.begin(), pts.end());

  const auto first = std::min_element(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    if (!same(a.y, b.y)) return a.y < b.y;
    return a.x < b.x;
  });
  std::rotate(pts.begin(), first, pts.end());

  RectPolygon poly;
  poly.corners_ = std::move(pts);
  return poly;
}

RectPolygon RectPolygon::rectangle(double x_min, double y_min, double x_max, double y_max) {
  return from_points({{x_min, y_min}, {x_min, y_max}, {x_max, y_max}, {x_max, y_min}});
}

BBox RectPolygon::bounds() const {
  BBox b{1e300, 1e300, -1e300, -1e300};
  for (const Point& p : corners_) {
    b.x_min = std::min(b.x_min, p.x);
    b.y_min = std::min(b.y_min, p.y);
    b.x_max = std::max(b.x_max, p.x);
    b.y_max = std::max(b.y_max, p.y);
  }
  return b;
}

double RectPolygon::area() const { return std::abs(shoelace(corners_)); }

bool RectPolygon::contains(double x, double y) const {
  bool inside = false;
  const std::size_t n = corners_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = corners_[i];
    const Point& b = corners_[(i + 1) % n];
    if (a.x != b.x) continue;  // horizontal edges never cross a horizontal ray
    const double lo = std::min(a.y, b.y);
    const double hi = std::max(a.y, b.y);
    if (y >= lo && y < hi && a.x > x) inside = !inside;
  }
  return inside;
}

BoundaryMask::BoundaryMask(int width, int height)
    : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, 0) {
  if (width <= 0 || height <= 0) throw GeometryError("mask dimensions must be positive");
}

bool BoundaryMask::probe(double x, double y) const {
  const double fc = std::floor(x * width_);
  const double fr = std::floor(y * height_);
  if (fc < 0 || fr < 0 || fc >= width_ || fr >= height_) return false;
  return at(static_cast<int>(fr), static_cast<int>(fc));
}

std::size_t BoundaryMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string_view relation_name(RelationType r) {
  switch (r) {
    case RelationType::LeftOf: return "left-of";
    case RelationType::RightOf: return "right-of";
    case RelationType::Above: return "above";
    case RelationType::Below: return "below";
    case RelationType::LeftAbove: return "left-above";
    case RelationType::RightAbove: return "right-above";
    case RelationType::LeftBelow: return "left-below";
    case RelationType::RightBelow: return "right-below";
    case RelationType::Inside: return "inside";
    case RelationType::Surrounding: return "surrounding";
  }
  return "?";
}

std::optional<RelationType> relation_from_name(std::string_view name) {
  for (RelationType r : kAllRelations)
    if (relation_name(r) == name) return r;
  return std::nullopt;
}

RelationType inverse(RelationType r) {
  switch (r) {
    case RelationType::LeftOf: return RelationType::RightOf;
    case RelationType::RightOf: return RelationType::LeftOf;
    case RelationType::Above: return RelationType::Below;
    case RelationType::Below: return RelationType::Above;
    case RelationType::LeftAbove: return RelationType::RightBelow;
    case RelationType::RightBelow: return RelationType::LeftAbove;
    case RelationType::RightAbove: return RelationType::LeftBelow;
    case RelationType::LeftBelow: return RelationType::RightAbove;
    case RelationType::Inside: return RelationType::Surrounding;
    case RelationType::Surrounding: return RelationType::Inside;
  }
  return r;
}

double intersect_area(const BBox& a, const BBox& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double intersect_area_pixels(const BBox& a, const BBox& b, int width, int height) {
  return intersect_area(a, b) * static_cast<double>(width) * static_cast<double>(height);
}

double iou(const BBox& a, const BBox& b) {
  const double inter = intersect_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BoundaryMask rasterize_polygon(const RectPolygon& p, int width, int height) {
  if (p.size() < 4 || p.area() <= 0.0) throw GeometryError("cannot rasterize an invalid polygon");
  BoundaryMask mask(width, height);
  for (int r = 0; r < height; ++r) {
    const double y = (r + 0.5) / height;
    for (int c = 0; c < width; ++c) {
      const double x = (c + 0.5) / width;
      if (p.contains(x, y)) mask.set(r, c, true);
    }
  }
  return mask;
}

std::vector<Point> extract_corners(const RectPolygon& p) { return p.corners(); }

RectPolygon trace_mask_boundary(const BoundaryMask& mask) {
  const int h = mask.height();
  const int w = mask.width();
  const auto inside = [&](int r, int c) {
    return r >= 0 && c >= 0 && r < h && c < w && mask.at(r, c);
  };
  int start_r = -1, start_c = -1;
  for (int r = 0; r < h && start_r < 0; ++r)
    for (int c = 0; c < w; ++c)
      if (mask.at(r, c)) {
        start_r = r;
        start_c = c;
        break;
      }
  if (start_r < 0) throw GeometryError("mask has no inside pixels");

  // Walk lattice points with the inside region on the left of travel
  // (east when heading down the first edge).
  struct Dir {
    int di, dj;
  };
  const auto left_of = [](Dir d) { return Dir{-d.dj, d.di}; };
  const auto right_of = [](Dir d) { return Dir{d.dj, -d.di}; };
  const auto pixel_ahead = [&](int i, int j, Dir d, Dir side) {
    const int r2 = 2 * i + d.di + side.di - 1;
    const int c2 = 2 * j + d.dj + side.dj - 1;
    return inside(r2 >> 1, c2 >> 1);
  };

  std::vector<Point> pts;
  int i = start_r, j = start_c;
  Dir d{1, 0};
  pts.push_back({static_cast<double>(j) / w, static_cast<double>(i) / h});
  const std::size_t limit = 4 * static_cast<std::size_t>(w + 1) * (h + 1);
  for (std::size_t step = 0; step < limit; ++step) {
    i += d.di;
    j += d.dj;
    if (i == start_r && j == start_c) break;
    const bool ahead_left = pixel_ahead(i, j, d, left_of(d));
    const bool ahead_right = pixel_ahead(i, j, d, right_of(d));
    Dir next = d;
    if (ahead_right)
      next = right_of(d);
    else if (!ahead_left)
      next = left_of(d);
    if (next.di != d.di || next.dj != d.dj) {
      pts.push_back({static_cast<double>(j) / w, static_cast<double>(i) / h});
      d = next;
    }
  }
  return RectPolygon::from_points(std::move(pts));
}

CornerFeature corner_feature(const RectPolygon& boundary, const BoundaryMask& mask, Point corner,
                             double epsilon) {
  const BBox b = boundary.bounds();
  const auto bit = [&](double x, double y) { return mask.probe(x, y) ? 1.0 : 0.0; };
  return CornerFeature{corner.x,
                       corner.y,
                       corner.x - b.x_min,
                       b.x_max - corner.x,
                       corner.y - b.y_min,
                       b.y_max - corner.y,
                       bit(corner.x + epsilon, corner.y + epsilon),
                       bit(corner.x + epsilon, corner.y - epsilon),
                       bit(corner.x - epsilon, corner.y + epsilon),
                       bit(corner.x - epsilon, corner.y - epsilon)};
}

GridLocation location_cell(const BBox& box, int k) {
  const auto cell = [k](double v) {
    const int c = static_cast<int>(std::floor(v * k));
    return std::clamp(c, 0, k - 1);
  };
  return GridLocation{cell(box.center_y()) * k + cell(box.center_x())};
}

double normalized_size(const BBox& box) { return box.width() * box.height(); }

namespace {

bool contains_box(const BBox& outer, const BBox& inner) {
  return outer.x_min <= inner.x_min && outer.y_min <= inner.y_min && outer.x_max >= inner.x_max &&
         outer.y_max >= inner.y_max;
}

// tan(22.5 deg): sector boundaries between axis and diagonal relations
constexpr double kSectorSlope = 0.41421356237309503;

}  // namespace

RelationType classify_relation(const BBox& s, const BBox& o) {
  if (s == o) throw GeometryError("relation between identical boxes is undefined");
  if (contains_box(s, o)) return RelationType::Surrounding;
  if (contains_box(o, s)) return RelationType::Inside;

  double dx = s.center_x() - o.center_x();
  double dy = s.center_y() - o.center_y();  // positive: s is lower on the canvas
  if (dx == 0.0 && dy == 0.0) {
    dx = s.x_min - o.x_min;
    dy = s.y_min - o.y_min;
  }
  const double ax = std::abs(dx);
  const double ay = std::abs(dy);
  if (ay <= kSectorSlope * ax) return dx < 0 ? RelationType::LeftOf : RelationType::RightOf;
  if (ax <= kSectorSlope * ay) return dy < 0 ? RelationType::Above : RelationType::Below;
  if (dx < 0) return dy < 0 ? RelationType::LeftAbove : RelationType::LeftBelow;
  return dy < 0 ? RelationType::RightAbove : RelationType::RightBelow;
}

bool relation_satisfied(const BBox& s, const BBox& o, RelationType rel) {
  if (s == o) return false;
  return classify_relation(s, o) == rel;
}

}  // namespace fpfgnn
