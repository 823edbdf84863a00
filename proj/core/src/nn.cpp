#include "fpfgnn/nn.hpp"

#include <algorithm>
#include <cmath>

namespace fpfgnn::nn {

LinearSlots add_linear(ParameterSet<float>& params, const std::string& name, int in, int out, Rng& rng) {
  Matrix<float> w(in, out);
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  for (Eigen::Index r = 0; r < w.rows(); ++r)
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      w(r, c) = static_cast<float>(rng.uniform(-bound, bound));
  LinearSlots slots;
  slots.weight = params.add(name + ".weight", std::move(w));
  slots.bias = params.add(name + ".bias", Matrix<float>::Zero(1, out));
  return slots;
}

MlpSlots add_mlp(ParameterSet<float>& params, const std::string& name, const std::vector<int>& dims,
                 Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("mlp needs at least input and output widths");
  MlpSlots mlp;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    mlp.layers.push_back(add_linear(params, name + "." + std::to_string(i), dims[i], dims[i + 1], rng));
  return mlp;
}

namespace {

template <typename T>
Matrix<T> stack_sorted(const std::vector<std::vector<T>>& rows) {
  if (rows.empty()) throw std::invalid_argument("aggregation over an empty row list");
  const std::size_t d = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != d) throw ShapeError("aggregation rows differ in width");
  std::vector<const std::vector<T>*> order;
  for (const auto& r : rows) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const std::vector<T>* a, const std::vector<T>* b) { return *a < *b; });
  Matrix<T> m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = 0; j < d; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*order[i])[j];
  return m;
}

template <typename T>
std::vector<T> reduce(const std::vector<std::vector<T>>& rows, Aggregator mode, const std::vector<T>* theta) {
  Tape<T> tape(false);
  const Matrix<T> m = stack_sorted(rows);
  const Var r = tape.constant(m);
  Var th;
  if (theta) {
    if (theta->size() != static_cast<std::size_t>(m.cols())) throw ShapeError("theta width mismatch");
    Matrix<T> t(1, m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) t(0, j) = (*theta)[static_cast<std::size_t>(j)];
    th = tape.constant(std::move(t));
  }
  const int offsets[2] = {0, static_cast<int>(m.rows())};
  const Var out = tape.segment_aggregate(r, offsets, mode, th);
  const Matrix<T>& v = tape.value(out);
  return std::vector<T>(v.data(), v.data() + v.size());
}

}  // namespace

template <typename T>
std::vector<T> softmax_aggregate(const std::vector<std::vector<T>>& rows, const std::vector<T>& theta) {
  return reduce(rows, Aggregator::Softmax, &theta);
}

template <typename T>
std::vector<T> aggregate_alt(const std::vector<std::vector<T>>& rows, Aggregator mode) {
  if (mode == Aggregator::Softmax) throw std::invalid_argument("use softmax_aggregate for softmax");
  return reduce<T>(rows, mode, nullptr);
}

template std::vector<float> softmax_aggregate(const std::vector<std::vector<float>>&, const std::vector<float>&);
template std::vector<double> softmax_aggregate(const std::vector<std::vector<double>>&, const std::vector<double>&);
template std::vector<float> aggregate_alt(const std::vector<std::vector<float>>&, Aggregator);
template std::vector<double> aggregate_alt(const std::vector<std::vector<double>>&, Aggregator);

AdamState make_adam_state(const ParameterSet<float>& params, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  return s;
}

void adam_step(ParameterSet<float>& params, const std::vector<Matrix<float>>& grads, AdamState& state,
               double lr) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size())
    throw ShapeError("adam_step: parameter/gradient count mismatch");
  const AdamConfig& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const double step_size = lr / bc1;
  const double sqrt_bc2 = std::sqrt(bc2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix<float>& p = params.values[i];
    const Matrix<float>& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw ShapeError("adam_step: gradient shape mismatch for " + params.names[i]);
    Matrix<float>& m = state.first_moment[i];
    Matrix<float>& v = state.second_moment[i];
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const double gk = static_cast<double>(g.data()[k]) + c.weight_decay * static_cast<double>(p.data()[k]);
      const double mk = c.beta1 * m.data()[k] + (1.0 - c.beta1) * gk;
      const double vk = c.beta2 * v.data()[k] + (1.0 - c.beta2) * gk * gk;
      m.data()[k] = static_cast<float>(mk);
      v.data()[k] = static_cast<float>(vk);
      const double denom = std::sqrt(vk) / sqrt_bc2 + c.eps;
      p.data()[k] = static_cast<float>(p.data()[k] - step_size * mk / denom);
    }
  }
}

double step_decay_lr(double base_lr, int epoch, int step_size, double gamma) {
  if (step_size <= 0) return base_lr;
  return base_lr * std::pow(gamma, epoch / step_size);
}

GradCheckReport finite_diff_check(const LossFunction& fn, const ParameterSet<double>& params,
                                  int probe_count, double tol, std::uint64_t seed,
                                  const std::string& only, double step) {
  GradCheckReport report;
  std::vector<Matrix<double>> analytic = params.zeros_like();
  fn(params, &analytic);

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (only.empty() || params.names[i].find(only) != std::string::npos)
      if (params.values[i].size() > 0) candidates.push_back(i);
  if (candidates.empty()) return report;

  const double center = fn(params, nullptr);
  Rng rng(seed);
  ParameterSet<double> probe = params;
  for (int p = 0; p < probe_count; ++p) {
    const std::size_t slot = candidates[static_cast<std::size_t>(rng.integer(0, static_cast<int>(candidates.size()) - 1))];
    const Eigen::Index k = rng.integer(0, static_cast<int>(params.values[slot].size()) - 1);
    double& x = probe.values[slot].data()[k];
    const double orig = x;
    x = orig + step;
    const double up = fn(probe, nullptr);
    x = orig - step;
    const double down = fn(probe, nullptr);
    x = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[slot].data()[k];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    const double forward_slope = (up - center) / step, backward_slope = (center - down) / step;
    const double asymmetry = std::abs(forward_slope - backward_slope) /
                             std::max({std::abs(forward_slope), std::abs(backward_slope), 1e-6});
    if (rel >= tol && asymmetry > 10.0 * tol) {
      ++report.kinks;
      continue;
    }
    ++report.probes;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_parameter = params.names[slot] + "[" + std::to_string(k) + "]";
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  report.pass = report.max_relative_error < tol;
  return report;
}

}  // namespace fpfgnn::nn
