#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fpfgnn/pipeline.hpp"

namespace fpfgnn {

void BoxMetricAccumulator::add(const std::vector<BBox>& pred, const std::vector<BBox>& gt,
                               const std::vector<RoomType>& types) {
  if (pred.size() != gt.size() || gt.size() != types.size())
    throw std::invalid_argument("box metric inputs differ in length");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double v = iou(pred[i], gt[i]);
    const auto c = static_cast<std::size_t>(types[i]);
    class_sum_.at(c) += v;
    ++class_count_.at(c);
    sum_ += v;
    ++count_;
  }
}

BoxMetrics BoxMetricAccumulator::result() const {
  BoxMetrics m;
  if (count_ == 0) return m;
  m.iou_micro = sum_ / static_cast<double>(count_);
  double macro = 0.0;
  int classes = 0;
  for (int c = 0; c < kRoomTypeCount; ++c)
    if (class_count_[static_cast<std::size_t>(c)]) {
      macro += class_sum_[static_cast<std::size_t>(c)] / static_cast<double>(class_count_[static_cast<std::size_t>(c)]);
      ++classes;
    }
  m.iou_macro = macro / classes;
  return m;
}

BoxMetrics eval_box_metrics(const std::vector<BBox>& pred, const std::vector<BBox>& gt,
                            const std::vector<RoomType>& types) {
  BoxMetricAccumulator acc;
  acc.add(pred, gt, types);
  return acc.result();
}

void PixelMetricAccumulator::add(const LayoutRaster& pred, const LayoutRaster& gt, const BoundaryMask& inside) {
  if (pred.width != gt.width || pred.height != gt.height || inside.width() != gt.width ||
      inside.height() != gt.height)
    throw std::invalid_argument("raster dimensions differ");
  for (int r = 0; r < gt.height; ++r)
    for (int c = 0; c < gt.width; ++c) {
      if (!inside.at(r, c)) continue;
      const std::uint8_t p = pred.at(r, c), g = gt.at(r, c);
      ++total_;
      if (p == g) {
        ++correct_;
        if (g < kRoomTypeCount) ++tp_[g];
        continue;
      }
      if (p < kRoomTypeCount) ++fp_[p];
      if (g < kRoomTypeCount) ++fn_[g];
    }
}

PixelMetrics PixelMetricAccumulator::result() const {
  PixelMetrics m;
  if (total_ == 0) return m;
  m.accuracy = static_cast<double>(correct_) / static_cast<double>(total_);
  std::uint64_t tp = 0, all = 0;
  double macro = 0.0;
  int classes = 0;
  for (std::size_t c = 0; c < kRoomTypeCount; ++c) {
    const std::uint64_t denom = tp_[c] + fp_[c] + fn_[c];
    if (denom == 0) continue;
    const double v = static_cast<double>(tp_[c]) / static_cast<double>(denom);
    m.per_class[c] = v;
    macro += v;
    ++classes;
    tp += tp_[c];
    all += denom;
  }
  m.iou_macro = classes ? macro / classes : 0.0;
  m.iou_micro = all ? static_cast<double>(tp) / static_cast<double>(all) : 0.0;
  return m;
}

PixelMetrics eval_pixel_metrics(const LayoutRaster& pred, const LayoutRaster& gt, const RectPolygon& boundary) {
  PixelMetricAccumulator acc;
  acc.add(pred, gt, rasterize_polygon(boundary, gt.width, gt.height));
  return acc.result();
}

ConstraintCounts& ConstraintCounts::operator+=(const ConstraintCounts& o) {
  relations_met += o.relations_met;
  relations += o.relations;
  locations_met += o.locations_met;
  locations += o.locations;
  return *this;
}

ConstraintCounts eval_constraint_metrics(const std::vector<BBox>& pred, const FloorplanSpec& spec, int grid_order) {
  if (pred.size() != spec.rooms.size()) throw std::invalid_argument("one predicted box per room expected");
  ConstraintCounts c;
  for (const EdgeSpec& e : spec.edges) {
    const int s = spec.room_index(e.subject), o = spec.room_index(e.object);
    if (s < 0 || o < 0) throw std::invalid_argument("edge references a missing room");
    ++c.relations;
    if (relation_satisfied(pred[static_cast<std::size_t>(s)], pred[static_cast<std::size_t>(o)], e.relation))
      ++c.relations_met;
  }
  for (std::size_t i = 0; i < spec.rooms.size(); ++i) {
    if (!spec.rooms[i].location) continue;
    ++c.locations;
    if (location_cell(pred[i], grid_order) == *spec.rooms[i].location) ++c.locations_met;
  }
  return c;
}

double overlap_stat(const std::vector<BBox>& boxes, Canvas canvas) {
  if (boxes.size() < 2) throw std::invalid_argument("overlap statistic needs at least two boxes");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      sum += intersect_area_pixels(boxes[i], boxes[j], canvas.width, canvas.height);
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json per_class = nlohmann::json::object();
  for (int c = 0; c < kRoomTypeCount; ++c)
    if (r.per_class_iou[static_cast<std::size_t>(c)])
      per_class[std::string(room_type_name(static_cast<RoomType>(c)))] = *r.per_class_iou[static_cast<std::size_t>(c)];
  return {{"plans", r.plans},
          {"box_iou_macro", r.box_iou_macro},
          {"box_iou_micro", r.box_iou_micro},
          {"pixel_accuracy", r.pixel_accuracy},
          {"pixel_iou_macro", r.pixel_iou_macro},
          {"pixel_iou_micro", r.pixel_iou_micro},
          {"per_class_iou", per_class},
          {"relation_accuracy", r.relation_accuracy},
          {"location_accuracy", r.location_accuracy},
          {"relation_accuracy_complete", r.relation_accuracy_complete},
          {"location_accuracy_complete", r.location_accuracy_complete},
          {"overlap", r.overlap}};
}

std::string format_report(const MetricsReport& r) {
  std::ostringstream out;
  out << std::fixed;
  const auto row = [&](const std::string& name, double v, int digits = 4) {
    out << std::left << std::setw(28) << name << std::right << std::setw(10) << std::setprecision(digits) << v << "\n";
  };
  out << std::left << std::setw(28) << "plans" << std::right << std::setw(10) << r.plans << "\n";
  row("box IOU macro", r.box_iou_macro);
  row("box IOU micro", r.box_iou_micro);
  row("pixel accuracy", r.pixel_accuracy);
  row("pixel IOU macro", r.pixel_iou_macro);
  row("pixel IOU micro", r.pixel_iou_micro);
  row("relation accuracy", r.relation_accuracy);
  row("location accuracy", r.location_accuracy);
  row("relation accuracy (all)", r.relation_accuracy_complete);
  row("location accuracy (all)", r.location_accuracy_complete);
  row("mean pairwise overlap px", r.overlap, 2);
  for (int c = 0; c < kRoomTypeCount; ++c)
    if (r.per_class_iou[static_cast<std::size_t>(c)])
      row("  IOU " + std::string(room_type_name(static_cast<RoomType>(c))), *r.per_class_iou[static_cast<std::size_t>(c)]);
  return out.str();
}

}  // namespace fpfgnn
