#include <benchmark/benchmark.h>

#include "fpfgnn/interface.hpp"

using namespace fpfgnn;

namespace {

const Model& paper_model() {
  static const Model m = init_params(ModelConfig{}, 1);
  return m;
}

FloorplanSpec plan_with_rooms(int rooms) {
  GeneratorConfig cfg;
  cfg.min_rooms = rooms;
  cfg.max_rooms = rooms;
  return generate_floorplan(42, cfg);
}

// Disjoint union of `copies` identical graphs: edge count scales exactly.
GraphTensors<float> replicated(const FactorGraph& g, int copies) {
  const GraphTensors<float> one = make_graph_tensors<float>(g);
  std::vector<const GraphTensors<float>*> parts(static_cast<std::size_t>(copies), &one);
  return batch_graph_tensors(parts);
}

void BM_BuildFactorGraph(benchmark::State& state) {
  const FloorplanSpec plan = plan_with_rooms(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_factor_graph(plan));
}
BENCHMARK(BM_BuildFactorGraph)->DenseRange(4, 10, 2);

void BM_Forward(benchmark::State& state) {
  const Model& m = paper_model();
  const GraphTensors<float> g = replicated(build_factor_graph(plan_with_rooms(6)), static_cast<int>(state.range(0)));
  for (auto _ : state) {
    nn::Tape<float> tape(false);
    benchmark::DoNotOptimize(tape.value(forward(tape, g, m.params, m.slots, m.config)).data());
  }
  state.counters["edges"] = static_cast<double>(g.edge_factor.size());
  state.counters["edges/s"] =
      benchmark::Counter(static_cast<double>(g.edge_factor.size()), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Forward)->RangeMultiplier(2)->Range(1, 16)->Unit(benchmark::kMicrosecond);

void BM_ForwardBackward(benchmark::State& state) {
  const Model& m = paper_model();
  const FloorplanSpec plan = plan_with_rooms(6);
  const GraphTensors<float> g = replicated(build_factor_graph(plan), static_cast<int>(state.range(0)));
  std::vector<double> t1 = coordinate_targets(plan.ground_truth_boxes()), targets;
  for (int c = 0; c < state.range(0); ++c) targets.insert(targets.end(), t1.begin(), t1.end());
  nn::Matrix<float> target(static_cast<Eigen::Index>(targets.size()), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) target(static_cast<Eigen::Index>(i), 0) = static_cast<float>(targets[i]);
  std::vector<nn::Matrix<float>> grads;
  for (const auto& v : m.params.values) grads.push_back(nn::Matrix<float>::Zero(v.rows(), v.cols()));
  for (auto _ : state) {
    nn::Tape<float> tape;
    const nn::Var loss = tape.l1_loss(forward(tape, g, m.params, m.slots, m.config), target);
    tape.backward(loss);
    tape.accumulate_parameter_grads(grads);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(1)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_SegmentSoftmax(benchmark::State& state) {
  const int segments = 256, per = static_cast<int>(state.range(0)), d = 128;
  nn::Rng rng(5);
  nn::Matrix<float> rows(segments * per, d), theta(1, d);
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = static_cast<float>(rng.uniform(-1, 1));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] = static_cast<float>(rng.uniform(-1, 1));
  std::vector<int> offsets;
  for (int s = 0; s <= segments; ++s) offsets.push_back(s * per);
  for (auto _ : state) {
    nn::Tape<float> tape(false);
    const nn::Var out =
        tape.segment_aggregate(tape.constant(rows), offsets, nn::Aggregator::Softmax, tape.constant(theta));
    benchmark::DoNotOptimize(tape.value(out).data());
  }
}
BENCHMARK(BM_SegmentSoftmax)->Arg(4)->Arg(32);

void BM_Rasterize(benchmark::State& state) {
  const FloorplanSpec plan = plan_with_rooms(8);
  std::vector<RoomType> types;
  for (const RoomSpec& r : plan.rooms) types.push_back(r.type);
  const std::vector<BBox> boxes = plan.ground_truth_boxes();
  for (auto _ : state) benchmark::DoNotOptimize(rasterize_layout(boxes, types, plan.boundary, plan.canvas));
}
BENCHMARK(BM_Rasterize)->Unit(benchmark::kMicrosecond);

// End-to-end request handling: JSON parse, graph build, forward, boxes, body.
void BM_ServiceInfer(benchmark::State& state) {
  Checkpoint c;
  c.params = paper_model().params;
  InferenceService svc;
  svc.set_model(load_model_bytes(serialize_checkpoint(c)));
  FloorplanSpec plan = plan_with_rooms(8);
  for (RoomSpec& r : plan.rooms) r.bbox.reset();
  const std::string body = nlohmann::ordered_json{{"plan", plan_to_json(plan)}}.dump();
  for (auto _ : state) benchmark::DoNotOptimize(svc.handle("POST", "/infer", body));
}
BENCHMARK(BM_ServiceInfer)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
