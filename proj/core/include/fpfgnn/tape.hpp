#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace fpfgnn::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Precision { Single, Double };

template <typename T>
constexpr Precision precision_of() {
  return sizeof(T) == sizeof(float) ? Precision::Single : Precision::Double;
}

enum class Aggregator { Softmax, Max, Sum, Mean };

std::string_view aggregator_name(Aggregator a);
Aggregator aggregator_from_name(std::string_view name);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Named dense parameters. Slot indices are stable for the lifetime of the set.
template <typename T>
struct ParameterSet {
  std::vector<std::string> names;
  std::vector<Matrix<T>> values;

  int add(std::string name, Matrix<T> value);
  int find(std::string_view name) const;
  std::size_t size() const { return values.size(); }
  std::size_t scalar_count() const;
  /// Zero matrices with the same shapes.
  std::vector<Matrix<T>> zeros_like() const;
};

template <typename To, typename From>
ParameterSet<To> cast_parameters(const ParameterSet<From>& in) {
  ParameterSet<To> out;
  out.names = in.names;
  out.values.reserve(in.values.size());
  for (const auto& v : in.values) out.values.push_back(v.template cast<To>());
  return out;
}

/// Reverse-mode recorder over row-major matrices. Every op appends one node;
/// backward() replays the nodes in reverse exactly once.
template <typename T>
class Tape {
 public:
  using Mat = Matrix<T>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value);
  /// A leaf whose gradient is reported under `slot`.
  Var parameter(const Mat& value, int slot);
  Var parameter(const ParameterSet<T>& set, int slot) { return parameter(set.values.at(static_cast<std::size_t>(slot)), slot); }

  const Mat& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
  /// Gradient after backward(); zero matrix if the node was unreachable.
  const Mat& grad(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }
  bool recording() const { return record_; }

  /// Seeds d(loss)/d(loss) = 1. Throws std::logic_error on a second call.
  void backward(Var loss);
  /// Adds each parameter node's gradient into grads[slot].
  void accumulate_parameter_grads(std::vector<Mat>& grads) const;

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  /// a (n x m) + bias (1 x m) broadcast over rows.
  Var add_bias(Var a, Var bias);
  Var relu(Var a);
  /// Per row: subtract the mean, divide by the standard deviation (eps 1e-5).
  Var row_normalize(Var a);
  /// Rows [start, start + count) of a.
  Var rows(Var a, int start, int count);
  /// out.row(k) = a.row(index[k]); backward scatters in index order.
  Var gather(Var a, std::span<const int> index);
  /// Reduces contiguous row segments [offsets[s], offsets[s+1]) to one row
  /// each. `theta` (1 x d) is only read for Aggregator::Softmax. Empty
  /// segments produce a zero row.
  Var segment_aggregate(Var rows, std::span<const int> offsets, Aggregator mode, Var theta = {});
  /// mean(|pred - target|), subgradient 0 at ties.
  Var l1_loss(Var pred, const Mat& target);
  /// sum_i weight_i |pred_i - target_i| over a column of predictions.
  Var weighted_l1_loss(Var pred, const Mat& target, const Mat& weight);
  /// Sum of all entries (1 x 1).
  Var sum(Var a);

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> backward;
    int slot = -1;
  };

  Var push(Mat value, std::function<void()> backward = {}, int slot = -1);
  Mat& grad_ref(int id);

  bool record_ = true;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  mutable Mat empty_;
};

extern template class Tape<float>;
extern template class Tape<double>;
extern template struct ParameterSet<float>;
extern template struct ParameterSet<double>;

}  // namespace fpfgnn::nn
