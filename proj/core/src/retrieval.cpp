#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fpfgnn/data.hpp"

namespace fpfgnn {

namespace {
constexpr int kAngularBins = 16;
}

std::vector<double> boundary_descriptor(const RectPolygon& boundary, Canvas canvas) {
  std::vector<double> d;
  d.reserve(3 + kAngularBins);
  const BBox b = boundary.bounds();
  d.push_back(static_cast<double>(boundary.size()) / 8.0);
  d.push_back(boundary.area());
  d.push_back(b.width() / (b.width() + b.height()));

  const BoundaryMask mask = rasterize_polygon(boundary, canvas.width, canvas.height);
  const double cx = b.center_x() * canvas.width, cy = b.center_y() * canvas.height;
  std::vector<double> bins(kAngularBins, 0.0);
  double total = 0.0;
  for (int r = 0; r < canvas.height; ++r)
    for (int c = 0; c < canvas.width; ++c) {
      if (!mask.at(r, c)) continue;
      const double a = std::atan2(r + 0.5 - cy, c + 0.5 - cx) + std::numbers::pi;
      auto bin = static_cast<int>(a / (2.0 * std::numbers::pi) * kAngularBins);
      bin = std::clamp(bin, 0, kAngularBins - 1);
      bins[static_cast<std::size_t>(bin)] += 1.0;
      total += 1.0;
    }
  for (double v : bins) d.push_back(total > 0.0 ? v / total : 0.0);
  return d;
}

std::vector<Neighbor> knn_boundaries(const RectPolygon& query, const std::vector<FloorplanSpec>& plans,
                                     std::size_t k, Canvas canvas) {
  if (plans.empty()) throw std::invalid_argument("retrieval needs a non-empty dataset");
  const std::vector<double> q = boundary_descriptor(query, canvas);
  std::vector<Neighbor> all;
  all.reserve(plans.size());
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const std::vector<double> d = boundary_descriptor(plans[i].boundary, canvas);
    double s = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) s += (d[j] - q[j]) * (d[j] - q[j]);
    all.push_back({i, std::sqrt(s)});
  }
  std::stable_sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) { return a.distance < b.distance; });
  all.resize(std::min(k, all.size()));
  return all;
}

FloorplanSpec retarget(const FloorplanSpec& plan, const RectPolygon& boundary, const std::string& source) {
  FloorplanSpec out = plan;
  out.boundary = boundary;
  out.source = source;
  for (RoomSpec& r : out.rooms) r.bbox.reset();
  return out;
}

}  // namespace fpfgnn
