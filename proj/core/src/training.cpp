#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "fpfgnn/pipeline.hpp"

namespace fpfgnn {

void TrainConfig::check() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be non-negative");
  if (lr_step < 1) throw std::invalid_argument("lr step must be positive");
  if (!(lr_gamma > 0.0)) throw std::invalid_argument("lr gamma must be positive");
  if (threads < 1) throw std::invalid_argument("threads must be positive");
  if (max_dropped < 0) throw std::invalid_argument("max_dropped must be non-negative");
  model.check();
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},         {"batch_size", cfg.batch_size}, {"lr", cfg.lr},
          {"weight_decay", cfg.weight_decay}, {"lr_step", cfg.lr_step}, {"lr_gamma", cfg.lr_gamma},
          {"seed", cfg.seed},             {"threads", cfg.threads},       {"max_dropped", cfg.max_dropped},
          {"model", to_json(cfg.model)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("train config must be an object");
  static const std::set<std::string> allowed{"epochs", "batch_size", "lr", "weight_decay", "lr_step", "lr_gamma",
                                             "seed", "threads", "max_dropped", "model"};
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw std::invalid_argument("unknown field $." + k);
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.lr_step = j.value("lr_step", c.lr_step);
    c.lr_gamma = j.value("lr_gamma", c.lr_gamma);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.max_dropped = j.value("max_dropped", c.max_dropped);
  } catch (const nlohmann::json::type_error& e) {
    throw std::invalid_argument(std::string("train config field has the wrong type: ") + e.what());
  }
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  c.check();
  return c;
}

namespace {

using Clock = std::chrono::steady_clock;

// Larger unions spill the activations out of cache and run slower per plan.
constexpr std::size_t kPlansPerTape = 2;

nn::Matrix<float> target_matrix(const FloorplanSpec& plan) {
  const std::vector<double> t = coordinate_targets(plan.ground_truth_boxes());
  nn::Matrix<float> m(static_cast<Eigen::Index>(t.size()), 1);
  for (std::size_t i = 0; i < t.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = static_cast<float>(t[i]);
  return m;
}

FloorplanSpec degrade(const FloorplanSpec& plan, int max_dropped, std::uint64_t seed) {
  if (max_dropped == 0) return plan;
  nn::Rng rng(seed);
  const int k = std::min(rng.integer(0, max_dropped), droppable_room_count(plan));
  return drop_constraints(plan, k, rng.next());
}

// Forward/backward over the disjoint union of `parts`. Each plan contributes
// its mean L1 scaled by 1/batch; per-plan losses go to `plan_loss`.
void chunk_step(const std::vector<const GraphTensors<float>*>& parts, const std::vector<const nn::Matrix<float>*>& targets,
                std::size_t batch, const Model& model, std::vector<nn::Matrix<float>>& grads, double* plan_loss) {
  const GraphTensors<float> joined = batch_graph_tensors(parts);
  Eigen::Index rows = 0;
  for (const auto* t : targets) rows += t->rows();
  nn::Matrix<float> target(rows, 1), weight(rows, 1);
  Eigen::Index r = 0;
  for (const auto* t : targets) {
    target.middleRows(r, t->rows()) = *t;
    weight.middleRows(r, t->rows()).setConstant(1.0f / static_cast<float>(t->rows() * static_cast<Eigen::Index>(batch)));
    r += t->rows();
  }
  nn::Tape<float> tape;
  const nn::Var y = forward(tape, joined, model.params, model.slots, model.config);
  const nn::Var loss = tape.weighted_l1_loss(y, target, weight);
  const nn::Matrix<float> err = (tape.value(y) - target).cwiseAbs();
  r = 0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const Eigen::Index n = targets[k]->rows();
    plan_loss[k] = static_cast<double>(err.middleRows(r, n).sum()) / static_cast<double>(n);
    r += n;
  }
  tape.backward(loss);
  tape.accumulate_parameter_grads(grads);
}

double validation_iou(const Model& model, const Dataset& data, const std::vector<std::size_t>& val) {
  std::vector<FactorGraph> graphs;
  for (std::size_t i : val) graphs.push_back(build_factor_graph(data.plans[i], model.config.graph));
  const auto coords = predict_coordinates(model, graphs);
  BoxMetricAccumulator acc;
  for (std::size_t k = 0; k < val.size(); ++k) {
    const FloorplanSpec& plan = data.plans[val[k]];
    std::vector<RoomType> types;
    for (const RoomSpec& r : plan.rooms) types.push_back(r.type);
    acc.add(predict_boxes(coords[k], graphs[k].room_count, plan.canvas), plan.ground_truth_boxes(), types);
  }
  return acc.result().iou_micro;
}

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.check();
  const std::vector<std::size_t> train_idx = data.indices(Split::Train);
  const std::vector<std::size_t> val_idx = data.indices(Split::Val);
  if (train_idx.empty()) throw std::invalid_argument("training split is empty");
  for (std::size_t i : train_idx)
    if (!data.plans[i].has_ground_truth())
      throw std::invalid_argument("training plan " + std::to_string(i) + " lacks ground-truth boxes");

  // Graphs of the full specs are built once; degraded specs are rebuilt per epoch.
  std::vector<GraphTensors<float>> cached(data.plans.size());
  std::vector<nn::Matrix<float>> targets(data.plans.size());
  for (std::size_t i : train_idx) {
    if (cfg.max_dropped == 0) cached[i] = make_graph_tensors<float>(build_factor_graph(data.plans[i], cfg.model.graph));
    targets[i] = target_matrix(data.plans[i]);
  }

  Model model = init_params(cfg.model, cfg.seed);
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.weight_decay = cfg.weight_decay;
  nn::AdamState adam = nn::make_adam_state(model.params, adam_cfg);

  TrainResult result;
  double best_val = -1.0;
  std::vector<double> losses, vals;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    const double lr = nn::step_decay_lr(cfg.lr, epoch, cfg.lr_step, cfg.lr_gamma);
    std::vector<std::size_t> order = train_idx;
    nn::Rng shuffle(derive_seed(cfg.seed, 0x5EED0000ull + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.integer(0, static_cast<int>(i) - 1))]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t n = end - start;
      std::vector<GraphTensors<float>> degraded;
      if (cfg.max_dropped > 0) {
        degraded.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t idx = order[start + k];
          const std::uint64_t s = derive_seed(derive_seed(cfg.seed, 0xD809ull + static_cast<std::uint64_t>(epoch)), idx);
          degraded[k] = make_graph_tensors<float>(build_factor_graph(degrade(data.plans[idx], cfg.max_dropped, s), cfg.model.graph));
        }
      }
      const auto graph_of = [&](std::size_t k) -> const GraphTensors<float>& {
        return cfg.max_dropped > 0 ? degraded[k] : cached[order[start + k]];
      };

      const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), n));
      std::vector<std::vector<nn::Matrix<float>>> partial(static_cast<std::size_t>(workers), model.params.zeros_like());
      std::vector<double> sample_loss(n, 0.0);
      const auto run_chunk = [&](int w) {
        const std::size_t lo = n * static_cast<std::size_t>(w) / static_cast<std::size_t>(workers);
        const std::size_t hi = n * static_cast<std::size_t>(w + 1) / static_cast<std::size_t>(workers);
        for (std::size_t k0 = lo; k0 < hi; k0 += kPlansPerTape) {
          std::vector<const GraphTensors<float>*> parts;
          std::vector<const nn::Matrix<float>*> tgts;
          for (std::size_t k = k0; k < std::min(hi, k0 + kPlansPerTape); ++k) {
            parts.push_back(&graph_of(k));
            tgts.push_back(&targets[order[start + k]]);
          }
          chunk_step(parts, tgts, n, model, partial[static_cast<std::size_t>(w)], sample_loss.data() + k0);
        }
      };
      if (workers == 1) {
        run_chunk(0);
      } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(run_chunk, w);
        for (auto& t : pool) t.join();
      }
      for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(sample_loss[k]))
          throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + " on plan " +
                                   std::to_string(order[start + k]));
        epoch_loss += sample_loss[k];
      }
      std::vector<nn::Matrix<float>>& grads = partial[0];
      for (int w = 1; w < workers; ++w)
        for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += partial[static_cast<std::size_t>(w)][p];
      nn::adam_step(model.params, grads, adam, lr);
    }
    epoch_loss /= static_cast<double>(order.size());

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.train_loss = epoch_loss;
    log.val_iou_micro = val_idx.empty() ? 0.0 : validation_iou(model, data, val_idx);
    log.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    losses.push_back(log.train_loss);
    vals.push_back(log.val_iou_micro);
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);

    if (val_idx.empty() || log.val_iou_micro > best_val) {
      best_val = log.val_iou_micro;
      result.best.params = model.params;
      result.best.epoch = epoch + 1;
    }
  }
  result.best.model_config = cfg.model;
  result.best.train_config = cfg;
  result.best.train_loss = losses;
  result.best.val_iou_micro = vals;
  return result;
}

MetricsReport evaluate_predictions(const std::vector<FloorplanSpec>& inputs, const std::vector<FloorplanSpec>& complete,
                                   const std::vector<std::vector<BBox>>& predictions, bool pixel_metrics) {
  if (inputs.size() != complete.size() || inputs.size() != predictions.size())
    throw std::invalid_argument("evaluation inputs differ in length");
  BoxMetricAccumulator boxes;
  PixelMetricAccumulator pixels;
  ConstraintCounts given, all;
  double overlap = 0.0;
  std::size_t overlap_plans = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const FloorplanSpec& truth = complete[i];
    const auto& pred = predictions[i];
    std::vector<RoomType> types;
    for (const RoomSpec& r : truth.rooms) types.push_back(r.type);
    const auto gt = truth.ground_truth_boxes();
    boxes.add(pred, gt, types);
    if (pixel_metrics) {
      const LayoutRaster pr = rasterize_layout(pred, types, truth.boundary, truth.canvas);
      const LayoutRaster gr = rasterize_layout(gt, types, truth.boundary, truth.canvas);
      pixels.add(pr, gr, rasterize_polygon(truth.boundary, truth.canvas.width, truth.canvas.height));
    }
    given += eval_constraint_metrics(pred, inputs[i]);
    all += eval_constraint_metrics(pred, truth);
    if (pred.size() >= 2) {
      overlap += overlap_stat(pred, truth.canvas);
      ++overlap_plans;
    }
  }
  MetricsReport r;
  r.plans = inputs.size();
  const BoxMetrics b = boxes.result();
  r.box_iou_macro = b.iou_macro;
  r.box_iou_micro = b.iou_micro;
  if (pixel_metrics) {
    const PixelMetrics p = pixels.result();
    r.pixel_accuracy = p.accuracy;
    r.pixel_iou_macro = p.iou_macro;
    r.pixel_iou_micro = p.iou_micro;
    r.per_class_iou = p.per_class;
  }
  r.relation_accuracy = given.relation_accuracy();
  r.location_accuracy = given.location_accuracy();
  r.relation_accuracy_complete = all.relation_accuracy();
  r.location_accuracy_complete = all.location_accuracy();
  r.overlap = overlap_plans ? overlap / static_cast<double>(overlap_plans) : 0.0;
  return r;
}

MetricsReport evaluate(const Model& model, const Dataset& data, const std::vector<std::size_t>& indices,
                       const EvalOptions& opt) {
  std::vector<FloorplanSpec> inputs, complete;
  std::vector<FactorGraph> graphs;
  for (std::size_t i : indices) {
    const FloorplanSpec& plan = data.plans.at(i);
    if (!plan.has_ground_truth()) throw std::invalid_argument("plan " + std::to_string(i) + " lacks ground truth");
    FloorplanSpec input = plan;
    if (opt.dropped > 0)
      input = drop_constraints(plan, std::min(opt.dropped, droppable_room_count(plan)), derive_seed(opt.drop_seed, i));
    graphs.push_back(build_factor_graph(input, model.config.graph));
    inputs.push_back(std::move(input));
    complete.push_back(plan);
  }
  const auto coords = predict_coordinates(model, graphs);
  std::vector<std::vector<BBox>> preds;
  for (std::size_t k = 0; k < graphs.size(); ++k)
    preds.push_back(predict_boxes(coords[k], graphs[k].room_count, complete[k].canvas));
  return evaluate_predictions(inputs, complete, preds, opt.pixel_metrics);
}

std::vector<std::string> all_ablation_names() {
  return {"full",
          "no-box",
          "no-relation",
          "no-boundary",
          "no-complete",
          "no-left-right",
          "no-above-below",
          "no-corner-relations",
          "no-containment-relations",
          "no-corner-distance",
          "no-corner-probe",
          "max",
          "sum",
          "mean",
          "baseline"};
}

std::vector<AblationVariant> ablation_variants(const ModelConfig& base, const std::vector<std::string>& names) {
  std::vector<AblationVariant> out;
  const auto disable = [](ModelConfig& m, std::initializer_list<RelationType> rels) {
    for (RelationType r : rels) m.graph.relation_enabled[static_cast<std::size_t>(r)] = false;
  };
  for (const std::string& name : names) {
    ModelConfig m = base;
    if (name == "full") {
    } else if (name == "no-box") {
      m.graph.box_factors = false;
    } else if (name == "no-relation") {
      m.graph.relation_factors = false;
    } else if (name == "no-boundary") {
      m.graph.boundary_factors = false;
    } else if (name == "no-complete") {
      m.graph.complete_factor = false;
    } else if (name == "no-left-right") {
      disable(m, {RelationType::LeftOf, RelationType::RightOf});
    } else if (name == "no-above-below") {
      disable(m, {RelationType::Above, RelationType::Below});
    } else if (name == "no-corner-relations") {
      disable(m, {RelationType::LeftAbove, RelationType::RightAbove, RelationType::LeftBelow, RelationType::RightBelow});
    } else if (name == "no-containment-relations") {
      disable(m, {RelationType::Inside, RelationType::Surrounding});
    } else if (name == "no-corner-distance") {
      m.graph.corner_distance_features = false;
    } else if (name == "no-corner-probe") {
      m.graph.corner_probe_features = false;
    } else if (name == "max") {
      m.aggregator = nn::Aggregator::Max;
    } else if (name == "sum") {
      m.aggregator = nn::Aggregator::Sum;
    } else if (name == "mean") {
      m.aggregator = nn::Aggregator::Mean;
    } else if (name == "baseline") {
      m.message_passing = false;
    } else {
      throw std::invalid_argument("unknown ablation variant \"" + name + "\"");
    }
    out.push_back({name, m});
  }
  return out;
}

std::vector<AblationRow> run_ablation(const Dataset& data, const TrainConfig& base,
                                      const std::vector<AblationVariant>& variants,
                                      const std::function<void(const std::string&, const EpochLog&)>& on_epoch) {
  std::vector<AblationRow> rows;
  for (const AblationVariant& v : variants) {
    TrainConfig cfg = base;
    cfg.model = v.model;
    TrainResult tr = train(data, cfg, [&](const EpochLog& e) {
      if (on_epoch) on_epoch(v.name, e);
    });
    const Model model = model_from_checkpoint(tr.best);
    rows.push_back({v.name, evaluate(model, data, data.indices(Split::Val)), std::move(tr.log)});
  }
  return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(26) << "variant" << std::right;
  for (const char* h : {"iou-macro", "iou-micro", "px-acc", "px-macro", "px-micro", "rel-acc", "loc-acc", "overlap"})
    out << std::setw(11) << h;
  out << "\n";
  for (const AblationRow& r : rows) {
    const MetricsReport& m = r.metrics;
    out << std::left << std::setw(26) << r.name << std::right;
    for (double v : {m.box_iou_macro, m.box_iou_micro, m.pixel_accuracy, m.pixel_iou_macro, m.pixel_iou_micro,
                     m.relation_accuracy, m.location_accuracy})
      out << std::setw(11) << v;
    out << std::setw(11) << std::setprecision(2) << m.overlap << std::setprecision(4) << "\n";
  }
  return out.str();
}

}  // namespace fpfgnn
