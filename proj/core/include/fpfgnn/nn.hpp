#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fpfgnn/tape.hpp"

namespace fpfgnn::nn {

/// Slots of one dense layer inside a ParameterSet.
struct LinearSlots {
  int weight = -1;  // in x out
  int bias = -1;    // 1 x out
};

/// Affine layers with ReLU between them and a linear output.
struct MlpSlots {
  std::vector<LinearSlots> layers;
};

/// Deterministic uniform draws in [0,1) from a 64-bit Mersenne twister;
/// the mapping does not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Integer in [lo, hi].
  int integer(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Kaiming-uniform weights (bound sqrt(6 / fan_in)) and zero bias.
LinearSlots add_linear(ParameterSet<float>& params, const std::string& name, int in, int out, Rng& rng);
MlpSlots add_mlp(ParameterSet<float>& params, const std::string& name, const std::vector<int>& dims,
                 Rng& rng);

template <typename T>
Var linear_apply(Tape<T>& tape, const ParameterSet<T>& params, const LinearSlots& layer, Var x) {
  const Var w = tape.parameter(params, layer.weight);
  const Var b = tape.parameter(params, layer.bias);
  return tape.add_bias(tape.matmul(x, w), b);
}

template <typename T>
Var mlp_apply(Tape<T>& tape, const ParameterSet<T>& params, const MlpSlots& mlp, Var x) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const Matrix<T>& w = params.values.at(static_cast<std::size_t>(mlp.layers[i].weight));
    if (tape.value(x).cols() != w.rows())
      throw ShapeError("mlp input width " + std::to_string(tape.value(x).cols()) +
                       " does not match layer " + std::to_string(i) + " (" +
                       std::to_string(w.rows()) + ")");
    x = linear_apply(tape, params, mlp.layers[i], x);
    if (i + 1 < mlp.layers.size()) x = tape.relu(x);
  }
  return x;
}

/// Per-column softmax-weighted mean over a list of equal-width rows. Rows are put in
/// lexicographic order before reduction, so the result does not depend on
/// the order of the input list. Throws on an empty list.
template <typename T>
std::vector<T> softmax_aggregate(const std::vector<std::vector<T>>& rows, const std::vector<T>& theta);
/// MAX / SUM / MEAN counterpart of softmax_aggregate.
template <typename T>
std::vector<T> aggregate_alt(const std::vector<std::vector<T>>& rows, Aggregator mode);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix<float>> first_moment;
  std::vector<Matrix<float>> second_moment;
  long step = 0;
};

AdamState make_adam_state(const ParameterSet<float>& params, const AdamConfig& config);
/// One Adam update with coupled L2 weight decay (gradient += decay * param).
/// `lr` overrides config.lr so a schedule can drive it.
void adam_step(ParameterSet<float>& params, const std::vector<Matrix<float>>& grads, AdamState& state,
               double lr);
/// lr * gamma^(floor(epoch / step_size)), epochs counted from 0.
double step_decay_lr(double base_lr, int epoch, int step_size = 7, double gamma = 0.1);

struct GradCheckReport {
  int probes = 0;
  int kinks = 0;  // probes skipped because a ReLU or |.| kink lay inside the window
  double max_relative_error = 0.0;
  std::string worst_parameter;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool pass = false;
};

/// Returns the loss and, when `grads` is non-null, fills analytic gradients.
using LossFunction =
    std::function<double(const ParameterSet<double>& params, std::vector<Matrix<double>>* grads)>;

/// Central differences on `probe_count` random coordinates. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6). A probe that fails
/// while its one-sided slopes disagree by more than 10 * tol straddles a kink;
/// it is counted in `kinks` and left out of the maximum. `only` restricts
/// probes to parameters whose name contains the substring.
GradCheckReport finite_diff_check(const LossFunction& fn, const ParameterSet<double>& params,
                                  int probe_count, double tol, std::uint64_t seed,
                                  const std::string& only = {}, double step = 6e-6);

}  // namespace fpfgnn::nn
