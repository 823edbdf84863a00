#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fpfgnn/pipeline.hpp"

using namespace fpfgnn;

namespace {

std::vector<RoomType> types_of(const FloorplanSpec& p) {
  std::vector<RoomType> t;
  for (const RoomSpec& r : p.rooms) t.push_back(r.type);
  return t;
}

// Pixel-set IOU of two boxes on a W x H grid, counting pixel centres.
double pixel_box_iou(const BBox& a, const BBox& b, int w, int h) {
  long inter = 0, uni = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double x = (c + 0.5) / w, y = (r + 0.5) / h;
      const bool in_a = x >= a.x_min && x < a.x_max && y >= a.y_min && y < a.y_max;
      const bool in_b = x >= b.x_min && x < b.x_max && y >= b.y_min && y < b.y_max;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

}  // namespace

TEST_CASE("rasterizer") {
  const RectPolygon square = RectPolygon::rectangle(0.25, 0.25, 0.75, 0.75);
  SUBCASE("one room fills the boundary") {
    const LayoutRaster r = rasterize_layout({{0.25, 0.25, 0.75, 0.75}}, {RoomType::Kitchen}, square);
    const BoundaryMask mask = rasterize_polygon(square, 256, 256);
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x)
        CHECK(r.at(y, x) == (mask.at(y, x) ? static_cast<std::uint8_t>(RoomType::Kitchen) : kExternalLabel));
  }
  SUBCASE("smaller box paints over a larger one") {
    const LayoutRaster r = rasterize_layout({{0.25, 0.25, 0.75, 0.75}, {0.3, 0.3, 0.4, 0.4}},
                                            {RoomType::LivingRoom, RoomType::Bathroom}, square);
    CHECK(r.at(90, 90) == static_cast<std::uint8_t>(RoomType::Bathroom));
    CHECK(r.at(150, 150) == static_cast<std::uint8_t>(RoomType::LivingRoom));
    const LayoutRaster flipped = rasterize_layout({{0.3, 0.3, 0.4, 0.4}, {0.25, 0.25, 0.75, 0.75}},
                                                  {RoomType::Bathroom, RoomType::LivingRoom}, square);
    CHECK(flipped == r);
  }
  SUBCASE("gaps go to the nearest box centre unless disabled") {
    const std::vector<BBox> boxes{{0.25, 0.25, 0.45, 0.75}, {0.55, 0.25, 0.75, 0.75}};
    const std::vector<RoomType> types{RoomType::Kitchen, RoomType::Balcony};
    const LayoutRaster filled = rasterize_layout(boxes, types, square);
    CHECK(filled.at(128, 118) == static_cast<std::uint8_t>(RoomType::Kitchen));
    CHECK(filled.at(128, 138) == static_cast<std::uint8_t>(RoomType::Balcony));
    const LayoutRaster raw = rasterize_layout(boxes, types, square, {}, false);
    CHECK(raw.at(128, 128) == kUnlabeled);
  }
  SUBCASE("ground truth of generated plans leaves nothing unlabeled") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const FloorplanSpec p = generate_floorplan(seed);
      const LayoutRaster r = rasterize_layout(p.ground_truth_boxes(), types_of(p), p.boundary, p.canvas, false);
      CHECK(std::count(r.labels.begin(), r.labels.end(), kUnlabeled) == 0);
    }
  }
  CHECK_THROWS(rasterize_layout({{0, 0, 1, 1}}, {}, square));
}

TEST_CASE("run length round trip and png") {
  const FloorplanSpec p = generate_floorplan(3);
  const LayoutRaster r = rasterize_layout(p.ground_truth_boxes(), types_of(p), p.boundary);
  const auto runs = run_length_encode(r);
  CHECK(runs.size() % 2 == 0);
  long total = 0;
  for (std::size_t i = 1; i < runs.size(); i += 2) total += runs[i];
  CHECK(total == 256 * 256);
  CHECK(run_length_decode(runs, 256, 256) == r);
  CHECK_THROWS(run_length_decode(runs, 256, 255));

  const auto path = std::filesystem::temp_directory_path() / "fpfgnn_test_raster.png";
  write_png(r, path.string());
  std::ifstream in(path, std::ios::binary);
  char sig[8] = {};
  in.read(sig, 8);
  CHECK(std::string(sig + 1, 3) == "PNG");
  std::filesystem::remove(path);
}

TEST_CASE("box metrics") {
  const BBox a{0, 0, 0.5, 0.5}, b{0.5, 0, 1, 0.5};
  const BBox half{0, 0, 0.25, 0.5};
  const auto m = eval_box_metrics({half, b}, {a, b}, {RoomType::Kitchen, RoomType::Balcony});
  CHECK(m.iou_micro == doctest::Approx(0.75));
  CHECK(m.iou_macro == doctest::Approx(0.75));
  const auto same = eval_box_metrics({half, b, a}, {a, b, a}, {RoomType::Kitchen, RoomType::Kitchen, RoomType::Balcony});
  CHECK(same.iou_micro == doctest::Approx(2.5 / 3));
  CHECK(same.iou_macro == doctest::Approx((0.75 + 1.0) / 2));
  CHECK_THROWS(eval_box_metrics({a}, {a, b}, {RoomType::Kitchen, RoomType::Kitchen}));

  nn::Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<BBox> gt, pred;
    std::vector<RoomType> types;
    for (int i = 0; i < 4; ++i) {
      const double x = rng.uniform(0, 0.5), y = rng.uniform(0, 0.5);
      gt.push_back({x, y, x + 0.3, y + 0.3});
      pred.push_back({x + rng.uniform(-0.1, 0.1), y, x + 0.3, y + 0.3 + rng.uniform(0, 0.1)});
      types.push_back(static_cast<RoomType>(rng.integer(0, 12)));
    }
    const double before = eval_box_metrics(pred, gt, types).iou_micro;
    gt.push_back({0.1, 0.1, 0.2, 0.2});
    pred.push_back(gt.back());
    types.push_back(RoomType::Storage);
    CHECK(eval_box_metrics(pred, gt, types).iou_micro >= before);
  }
}

TEST_CASE("analytic and raster box iou agree within discretization") {
  nn::Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto box = [&] {
      const double x = rng.uniform(0, 0.6), y = rng.uniform(0, 0.6);
      return BBox{x, y, x + rng.uniform(0.1, 0.4), y + rng.uniform(0.1, 0.4)};
    };
    const BBox a = box(), b = box();
    const double tol = 2.0 * (2 * (a.width() + a.height()) * 256) / (a.area() * 256 * 256) +
                       2.0 * (2 * (b.width() + b.height()) * 256) / (b.area() * 256 * 256);
    CHECK(std::abs(iou(a, b) - pixel_box_iou(a, b, 256, 256)) <= tol);
  }
}

TEST_CASE("pixel metrics") {
  const RectPolygon square = RectPolygon::rectangle(0, 0, 1, 1);
  const FloorplanSpec p = generate_floorplan(9);
  const LayoutRaster gt = rasterize_layout(p.ground_truth_boxes(), types_of(p), p.boundary);
  const PixelMetrics self = eval_pixel_metrics(gt, gt, p.boundary);
  CHECK(self.accuracy == 1.0);
  CHECK(self.iou_macro == 1.0);
  CHECK(self.iou_micro == 1.0);
  for (const RoomSpec& r : p.rooms) CHECK(self.per_class[static_cast<std::size_t>(r.type)] == 1.0);
  CHECK_FALSE(self.per_class[static_cast<std::size_t>(RoomType::External)].has_value());

  // 10% of the interior relabelled
  LayoutRaster a;
  a.width = a.height = 100;
  a.labels.assign(10000, static_cast<std::uint8_t>(RoomType::Kitchen));
  LayoutRaster b = a;
  for (int i = 0; i < 1000; ++i) b.labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(RoomType::Balcony);
  const PixelMetrics m = eval_pixel_metrics(b, a, square);
  CHECK(m.accuracy == doctest::Approx(0.9));
  CHECK(*m.per_class[static_cast<std::size_t>(RoomType::Kitchen)] == doctest::Approx(0.9));
  CHECK(*m.per_class[static_cast<std::size_t>(RoomType::Balcony)] == 0.0);
  CHECK(m.iou_macro == doctest::Approx(0.45));
  CHECK(m.iou_micro == doctest::Approx(9000.0 / 11000.0));

  LayoutRaster wrong = a;
  wrong.width = 50;
  CHECK_THROWS(eval_pixel_metrics(wrong, a, square));
}

TEST_CASE("constraint metrics") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const FloorplanSpec p = generate_floorplan(seed);
    const ConstraintCounts c = eval_constraint_metrics(p.ground_truth_boxes(), p);
    CHECK(c.relation_accuracy() == 1.0);
    CHECK(c.location_accuracy() == 1.0);
  }
  FloorplanSpec s;
  s.boundary = RectPolygon::rectangle(0, 0, 1, 1);
  const BBox left{0, 0, 0.3, 1}, mid{0.35, 0, 0.6, 1}, right{0.65, 0, 1, 1}, top{0.35, 0, 0.6, 0.2};
  s.rooms = {{0, RoomType::LivingRoom, location_cell(left), 0.3, left},
             {1, RoomType::Kitchen, location_cell(mid), 0.25, mid},
             {2, RoomType::Bathroom, location_cell(right), 0.35, right},
             {3, RoomType::Storage, std::nullopt, std::nullopt, top}};
  s.edges = {{0, 1, RelationType::LeftOf},
             {1, 2, RelationType::LeftOf},
             {0, 2, RelationType::LeftOf},
             {2, 0, RelationType::LeftOf}};
  const ConstraintCounts c = eval_constraint_metrics({left, mid, right, top}, s);
  CHECK(c.relations == 4);
  CHECK(c.relation_accuracy() == 0.75);
  CHECK(c.locations == 3);
  CHECK(c.location_accuracy() == 1.0);
  ConstraintCounts sum = c;
  sum += c;
  CHECK(sum.relations == 8);
}

TEST_CASE("overlap statistic") {
  const auto px = [](double a, double b, double c, double d) { return BBox{a / 256, b / 256, c / 256, d / 256}; };
  CHECK(overlap_stat({px(0, 0, 2, 2), px(1, 1, 3, 3), px(5, 5, 6, 6)}) == doctest::Approx(1.0 / 3));
  CHECK(overlap_stat({px(0, 0, 10, 10), px(10, 0, 20, 10)}) == 0.0);
  CHECK_THROWS(overlap_stat({px(0, 0, 1, 1)}));
  for (std::uint64_t seed = 0; seed < 50; ++seed) CHECK(overlap_stat(generate_floorplan(seed).ground_truth_boxes()) == 0.0);
}

TEST_CASE("metrics report formats") {
  MetricsReport r;
  r.box_iou_micro = 0.5;
  r.plans = 3;
  const nlohmann::json j = to_json(r);
  CHECK(j.at("box_iou_micro") == 0.5);
  CHECK(j.at("plans") == 3);
  CHECK(format_report(r).find("box IOU micro") != std::string::npos);
}

TEST_CASE("train config json") {
  TrainConfig c;
  c.epochs = 3;
  c.max_dropped = 2;
  c.model.aggregator = nn::Aggregator::Sum;
  const TrainConfig back = train_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(c.batch_size == 60);
  CHECK(c.lr == 1e-3);
  CHECK(c.weight_decay == 1e-4);
  CHECK(c.lr_step == 7);
  CHECK(c.model.hidden == 128);
  CHECK(c.model.iterations == 4);
  CHECK_THROWS(train_config_from_json(nlohmann::json{{"epochs", 0}}));
  CHECK_THROWS(train_config_from_json(nlohmann::json{{"momentum", 0.9}}));
}

TEST_CASE("checkpoint container") {
  Checkpoint c;
  c.model_config.hidden = 8;
  c.model_config.iterations = 2;
  c.params = init_params(c.model_config, 4).params;
  c.epoch = 3;
  c.train_loss = {0.5, 0.25};
  c.val_iou_micro = {0.1, 0.2};
  const std::string bytes = serialize_checkpoint(c);
  CHECK(bytes.substr(0, 8) == "FPFGNNCK");
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.params.names == c.params.names);
  CHECK(back.params.values == c.params.values);
  CHECK(back.epoch == 3);
  CHECK(back.train_loss == c.train_loss);
  CHECK(serialize_checkpoint(back) == bytes);
  const Model m = model_from_checkpoint(back);
  CHECK(m.params.values == c.params.values);

  CHECK_THROWS_AS(deserialize_checkpoint("NOTACKPT"), std::runtime_error);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), std::runtime_error);
  std::string future = bytes;
  future[8] = 9;
  CHECK_THROWS_AS(deserialize_checkpoint(future), std::runtime_error);

  Checkpoint wrong = back;
  wrong.model_config.hidden = 16;
  CHECK_THROWS(model_from_checkpoint(wrong));

  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("training smoke on one-room plans") {
  GeneratorConfig g;
  Dataset d;
  for (int i = 0; i < 24; ++i) {
    FloorplanSpec p;
    const double x = 0.1 + 0.02 * (i % 5), y = 0.1 + 0.03 * (i % 4);
    p.boundary = RectPolygon::rectangle(x, y, x + 0.5, y + 0.4);
    const BBox b{x, y, x + 0.5, y + 0.4};
    p.rooms = {{0, RoomType::LivingRoom, location_cell(b), normalized_size(b), b}};
    d.plans.push_back(p);
    d.split.push_back(i < 20 ? Split::Train : Split::Val);
  }
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 4;
  cfg.lr_step = 100;
  cfg.model.hidden = 16;
  cfg.model.graph.box_factors = cfg.model.graph.relation_factors = cfg.model.graph.boundary_factors = false;
  std::vector<double> losses;
  const TrainResult r = train(d, cfg, [&](const EpochLog& e) { losses.push_back(e.train_loss); });
  REQUIRE(losses.size() == 6);
  CHECK(losses.back() < losses.front());
  CHECK(r.best.epoch >= 1);
  CHECK(r.log.size() == 6);

  const TrainResult again = train(d, cfg);
  CHECK(sha256_hex(serialize_checkpoint(again.best)) == sha256_hex(serialize_checkpoint(r.best)));

  const MetricsReport m = evaluate(model_from_checkpoint(r.best), d, d.indices(Split::Val));
  CHECK(m.plans == 4);
  CHECK(m.box_iou_micro > 0.0);

  Dataset empty = d;
  empty.split.assign(d.plans.size(), Split::Val);
  CHECK_THROWS_AS(train(empty, cfg), std::invalid_argument);
}

TEST_CASE("threaded training matches single-threaded within rounding") {
  GeneratorConfig g;
  g.min_rooms = 4;
  g.max_rooms = 5;
  const Dataset d = make_dataset(5, 16, 4, g);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 6;
  cfg.model.hidden = 16;
  cfg.model.iterations = 2;
  const TrainResult one = train(d, cfg);
  cfg.threads = 3;
  const TrainResult three = train(d, cfg);
  for (std::size_t i = 0; i < one.best.params.size(); ++i)
    CHECK((one.best.params.values[i] - three.best.params.values[i]).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("ablation variants") {
  const auto names = all_ablation_names();
  const auto v = ablation_variants(ModelConfig{}, names);
  CHECK(v.size() == names.size());
  CHECK_THROWS(ablation_variants(ModelConfig{}, {"no-walls"}));
  const auto find = [&](const std::string& n) {
    return std::find_if(v.begin(), v.end(), [&](const AblationVariant& a) { return a.name == n; })->model;
  };
  CHECK_FALSE(find("no-boundary").graph.boundary_factors);
  CHECK_FALSE(find("baseline").message_passing);
  CHECK(find("sum").aggregator == nn::Aggregator::Sum);
  const auto corner = find("no-corner-relations").graph.relation_enabled;
  CHECK(std::count(corner.begin(), corner.end(), false) == 4);

  GeneratorConfig g;
  g.min_rooms = g.max_rooms = 4;
  const Dataset d = make_dataset(6, 10, 3, g);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.model.hidden = 8;
  cfg.model.iterations = 1;
  const auto rows = run_ablation(d, cfg, ablation_variants(cfg.model, {"full", "no-box"}));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].metrics.plans == 3);
  const std::string table = format_ablation(rows);
  CHECK(table.find("no-box") != std::string::npos);
}
