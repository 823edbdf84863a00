#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fpfgnn/data.hpp"
#include "fpfgnn/model.hpp"

namespace fpfgnn {

/// Class-index image; External marks pixels outside the boundary.
struct LayoutRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;  // row-major

  std::uint8_t at(int row, int col) const { return labels[static_cast<std::size_t>(row) * width + col]; }
  friend bool operator==(const LayoutRaster&, const LayoutRaster&) = default;
};

inline constexpr std::uint8_t kExternalLabel = static_cast<std::uint8_t>(RoomType::External);
/// Interior pixel not covered by any box; only visible when `fill_gaps` is off.
inline constexpr std::uint8_t kUnlabeled = 255;

/// Paints boxes largest-first (ties by index) inside the boundary mask, then
/// assigns leftover interior pixels to the room whose box centre is nearest.
LayoutRaster rasterize_layout(const std::vector<BBox>& boxes, const std::vector<RoomType>& types,
                              const RectPolygon& boundary, Canvas canvas = {}, bool fill_gaps = true);

/// Run-length pairs [label, count, label, count, ...] over the row-major grid.
std::vector<int> run_length_encode(const LayoutRaster& r);
LayoutRaster run_length_decode(const std::vector<int>& runs, int width, int height);
/// 8-bit RGB PNG with a fixed palette.
void write_png(const LayoutRaster& r, const std::string& path);

struct BoxMetrics {
  double iou_macro = 0.0;
  double iou_micro = 0.0;
};

/// Pools room-level IOUs over any number of plans.
class BoxMetricAccumulator {
 public:
  void add(const std::vector<BBox>& pred, const std::vector<BBox>& gt, const std::vector<RoomType>& types);
  BoxMetrics result() const;
  std::size_t count() const { return count_; }

 private:
  std::array<double, kRoomTypeCount> class_sum_{};
  std::array<std::size_t, kRoomTypeCount> class_count_{};
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

BoxMetrics eval_box_metrics(const std::vector<BBox>& pred, const std::vector<BBox>& gt,
                            const std::vector<RoomType>& types);

struct PixelMetrics {
  double accuracy = 0.0;
  double iou_macro = 0.0;
  double iou_micro = 0.0;
  /// Classes that never appear in either raster hold nullopt.
  std::array<std::optional<double>, kRoomTypeCount> per_class{};
};

/// Confusion counts over in-boundary pixels.
class PixelMetricAccumulator {
 public:
  void add(const LayoutRaster& pred, const LayoutRaster& gt, const BoundaryMask& inside);
  PixelMetrics result() const;

 private:
  std::array<std::uint64_t, kRoomTypeCount> tp_{}, fp_{}, fn_{};
  std::uint64_t correct_ = 0, total_ = 0;
};

PixelMetrics eval_pixel_metrics(const LayoutRaster& pred, const LayoutRaster& gt, const RectPolygon& boundary);

struct ConstraintCounts {
  std::size_t relations_met = 0, relations = 0;
  std::size_t locations_met = 0, locations = 0;

  double relation_accuracy() const { return relations ? static_cast<double>(relations_met) / relations : 1.0; }
  double location_accuracy() const { return locations ? static_cast<double>(locations_met) / locations : 1.0; }
  ConstraintCounts& operator+=(const ConstraintCounts& o);
};

/// Relation accuracy over the spec's edges; location accuracy over rooms
/// whose location is given.
ConstraintCounts eval_constraint_metrics(const std::vector<BBox>& pred, const FloorplanSpec& spec,
                                         int grid_order = kDefaultGridOrder);

/// Mean pairwise intersection area in pixels. Throws on fewer than 2 boxes.
double overlap_stat(const std::vector<BBox>& boxes, Canvas canvas = {});

struct MetricsReport {
  double box_iou_macro = 0.0;
  double box_iou_micro = 0.0;
  double pixel_accuracy = 0.0;
  double pixel_iou_macro = 0.0;
  double pixel_iou_micro = 0.0;
  std::array<std::optional<double>, kRoomTypeCount> per_class_iou{};
  /// Over the constraints the model was given.
  double relation_accuracy = 0.0;
  double location_accuracy = 0.0;
  /// Over the full original constraint set (equal to the above when nothing was dropped).
  double relation_accuracy_complete = 0.0;
  double location_accuracy_complete = 0.0;
  double overlap = 0.0;
  std::size_t plans = 0;
};

nlohmann::json to_json(const MetricsReport& r);
/// Aligned two-column text table.
std::string format_report(const MetricsReport& r);

struct TrainConfig {
  int epochs = 20;
  int batch_size = 60;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  int lr_step = 7;
  double lr_gamma = 0.1;
  std::uint64_t seed = 0;
  /// Worker threads for within-batch forward/backward. 1 is bitwise reproducible.
  int threads = 1;
  /// Per sample and epoch, drop a uniform 0..max_dropped unprotected rooms.
  int max_dropped = 0;
  ModelConfig model;

  void check() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;
  ModelConfig model_config;
  TrainConfig train_config;
  nn::ParameterSet<float> params;
  int epoch = 0;
  std::vector<double> train_loss;
  std::vector<double> val_iou_micro;
};

std::string serialize_checkpoint(const Checkpoint& c);
/// Throws std::runtime_error on a bad magic, unknown version or truncated data.
Checkpoint deserialize_checkpoint(const std::string& bytes);
/// Rebuilds slots and checks every parameter name and shape against the config.
Model model_from_checkpoint(const Checkpoint& c);
std::string sha256_hex(const std::string& bytes);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_iou_micro = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
};

/// Throws std::invalid_argument on an empty training split and
/// std::runtime_error when the loss becomes non-finite.
TrainResult train(const Dataset& data, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

struct EvalOptions {
  /// Rooms dropped per plan before inference (capped at the droppable count).
  int dropped = 0;
  std::uint64_t drop_seed = 0;
  bool pixel_metrics = true;
};

/// Predicts every listed plan and pools all metrics.
MetricsReport evaluate(const Model& model, const Dataset& data, const std::vector<std::size_t>& indices,
                       const EvalOptions& opt = {});
/// Same metrics with given predictions instead of a model.
MetricsReport evaluate_predictions(const std::vector<FloorplanSpec>& inputs, const std::vector<FloorplanSpec>& complete,
                                   const std::vector<std::vector<BBox>>& predictions, bool pixel_metrics = true);

struct AblationVariant {
  std::string name;
  ModelConfig model;
};

/// Named variants: full, no-box, no-relation, no-boundary, no-complete,
/// no-left-right, no-above-below, no-corner-relations, no-containment-relations,
/// no-corner-distance, no-corner-probe, max, sum, mean, baseline.
std::vector<AblationVariant> ablation_variants(const ModelConfig& base, const std::vector<std::string>& names);
std::vector<std::string> all_ablation_names();

struct AblationRow {
  std::string name;
  MetricsReport metrics;
  std::vector<EpochLog> log;
};

std::vector<AblationRow> run_ablation(const Dataset& data, const TrainConfig& base,
                                      const std::vector<AblationVariant>& variants,
                                      const std::function<void(const std::string&, const EpochLog&)>& on_epoch = {});
std::string format_ablation(const std::vector<AblationRow>& rows);

}  // namespace fpfgnn
