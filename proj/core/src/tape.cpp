#include "fpfgnn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fpfgnn::nn {

std::string_view aggregator_name(Aggregator a) {
  switch (a) {
    case Aggregator::Softmax: return "softmax";
    case Aggregator::Max: return "max";
    case Aggregator::Sum: return "sum";
    case Aggregator::Mean: return "mean";
  }
  return "?";
}

Aggregator aggregator_from_name(std::string_view name) {
  for (Aggregator a : {Aggregator::Softmax, Aggregator::Max, Aggregator::Sum, Aggregator::Mean})
    if (aggregator_name(a) == name) return a;
  throw std::invalid_argument("unknown aggregator '" + std::string(name) + "'");
}

template <typename T>
int ParameterSet<T>::add(std::string name, Matrix<T> value) {
  if (find(name) >= 0) throw std::invalid_argument("duplicate parameter " + name);
  names.push_back(std::move(name));
  values.push_back(std::move(value));
  return static_cast<int>(values.size()) - 1;
}

template <typename T>
int ParameterSet<T>::find(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += static_cast<std::size_t>(v.size());
  return n;
}

template <typename T>
std::vector<Matrix<T>> ParameterSet<T>::zeros_like() const {
  std::vector<Matrix<T>> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(Matrix<T>::Zero(v.rows(), v.cols()));
  return out;
}

template <typename T>
Var Tape<T>::push(Mat value, std::function<void()> backward, int slot) {
  Node n;
  n.value = std::move(value);
  if (record_) n.backward = std::move(backward);
  n.slot = slot;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
typename Tape<T>::Mat& Tape<T>::grad_ref(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() != n.value.size() || n.grad.rows() != n.value.rows())
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <typename T>
const typename Tape<T>::Mat& Tape<T>::grad(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  if (n.grad.size() == n.value.size() && n.grad.rows() == n.value.rows()) return n.grad;
  empty_ = Mat::Zero(n.value.rows(), n.value.cols());
  return empty_;
}

template <typename T>
Var Tape<T>::constant(Mat value) {
  return push(std::move(value));
}

template <typename T>
Var Tape<T>::parameter(const Mat& value, int slot) {
  return push(value, {}, slot);
}

template <typename T>
void Tape<T>::backward(Var loss) {
  if (!record_) throw std::logic_error("tape was created without recording");
  if (consumed_) throw std::logic_error("tape already consumed by a previous backward pass");
  if (value(loss).size() != 1) throw ShapeError("backward needs a scalar loss");
  consumed_ = true;
  grad_ref(loss.id).setOnes();
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.backward) continue;
    if (n.grad.size() != n.value.size()) continue;  // unreachable from the loss
    n.backward();
  }
}

template <typename T>
void Tape<T>::accumulate_parameter_grads(std::vector<Mat>& grads) const {
  for (const Node& n : nodes_) {
    if (n.slot < 0 || n.grad.size() != n.value.size()) continue;
    Mat& dst = grads.at(static_cast<std::size_t>(n.slot));
    if (dst.rows() != n.grad.rows() || dst.cols() != n.grad.cols())
      throw ShapeError("gradient buffer shape mismatch");
    dst += n.grad;
  }
}

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  if (A.cols() != B.rows())
    throw ShapeError("matmul: " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) +
                     " times " + std::to_string(B.rows()) + "x" + std::to_string(B.cols()));
  Mat out(A.rows(), B.cols());
  out.noalias() = A * B;
  const int ia = a.id, ib = b.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), [this, ia, ib, io] {
    const Mat& g = nodes_[static_cast<std::size_t>(io)].grad;
    const Mat& Av = nodes_[static_cast<std::size_t>(ia)].value;
    const Mat& Bv = nodes_[static_cast<std::size_t>(ib)].value;
    grad_ref(ia).noalias() += g * Bv.transpose();
    grad_ref(ib).noalias() += Av.transpose() * g;
  });
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw ShapeError("add: shape mismatch");
  Mat out = A + B;
  const int ia = a.id, ib = b.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), [this, ia, ib, io] {
    const Mat& g = nodes_[static_cast<std::size_t>(io)].grad;
    grad_ref(ia) += g;
    grad_ref(ib) += g;
  });
}

template <typename T>
Var Tape<T>::add_bias(Var a, Var bias) {
  const Mat& A = value(a);
  const Mat& B = value(bias);
  if (B.rows() != 1 || B.cols() != A.cols()) throw ShapeError("add_bias: bias must be 1 x cols");
  Mat out = A;
  out.rowwise() += B.row(0);
  const int ia = a.id, ib = bias.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), [this, ia, ib, io] {
    const Mat& g = nodes_[static_cast<std::size_t>(io)].grad;
    grad_ref(ia) += g;
    grad_ref(ib) += g.colwise().sum();
  });
}

template <typename T>
Var Tape<T>::relu(Var a) {
  Mat out = value(a).cwiseMax(T(0));
  const int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), [this, ia, io] {
    const Mat& g = nodes_[static_cast<std::size_t>(io)].grad;
    const Mat& x = nodes_[static_cast<std::size_t>(ia)].value;
    grad_ref(ia).array() += (x.array() > T(0)).select(g.array(), T(0));
  });
}

template <typename T>
Var Tape<T>::row_normalize(Var a) {
  const Mat& x = value(a);
  const auto d = static_cast<T>(x.cols());
  Mat out(x.rows(), x.cols());
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_sd(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mean = x.row(r).sum() / d;
    out.row(r) = x.row(r).array() - mean;
    const T var = out.row(r).squaredNorm() / d;
    inv_sd(r) = T(1) / std::sqrt(var + T(1e-5));
    out.row(r) *= inv_sd(r);
  }
  const int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), [this, ia, io, inv_sd, d] {
    const Mat& g = nodes_[static_cast<std::size_t>(io)].grad;
    const Mat& y = nodes_[static_cast<std::size_t>(io)].value;
    Mat& ga = grad_ref(ia);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const T gm = g.row(r).sum() / d;
      const T gy = g.row(r).dot(y.row(r)) / d;
      ga.row(r).array() += inv_sd(r) * (g.row(r).array() - gm - y.row(r).array() * gy);
    }
  });
}

template <typename T>
Var Tape<T>::rows(Var a, int start, int count) {
  const Mat& A = value(a);
  if (start < 0 || count < 0 || start + count > A.rows()) throw ShapeError("rows: out of range");
  Mat out = A.middleRows(start, count);
  const int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), [this, ia, io, start, count] {
    const Mat& g = nodes_[static_cast<std::size_t>(io)].grad;
    grad_ref(ia).middleRows(start, count) += g;
  });
}

template <typename T>
Var Tape<T>::gather(Var a, std::span<const int> index) {
  const Mat& A = value(a);
  Mat out(static_cast<Eigen::Index>(index.size()), A.cols());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= A.rows()) throw ShapeError("gather: index out of range");
    out.row(static_cast<Eigen::Index>(k)) = A.row(index[k]);
  }
  const int ia = a.id, io = static_cast<int>(nodes_.size());
  std::vector<int> idx(index.begin(), index.end());
  return push(std::move(out), [this, ia, io, idx = std::move(idx)] {
    const Mat& g = nodes_[static_cast<std::size_t>(io)].grad;
    Mat& ga = grad_ref(ia);
    for (std::size_t k = 0; k < idx.size(); ++k) ga.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
  });
}

template <typename T>
Var Tape<T>::segment_aggregate(Var rows_var, std::span<const int> offsets, Aggregator mode,
                               Var theta) {
  const Mat& R = value(rows_var);
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != R.rows())
    throw ShapeError("segment_aggregate: offsets do not cover the rows");
  const Eigen::Index d = R.cols();
  const std::size_t segments = offsets.size() - 1;
  Mat out = Mat::Zero(static_cast<Eigen::Index>(segments), d);
  std::vector<int> offs(offsets.begin(), offsets.end());
  const int ir = rows_var.id, io = static_cast<int>(nodes_.size());

  switch (mode) {
    case Aggregator::Sum:
    case Aggregator::Mean: {
      for (std::size_t s = 0; s < segments; ++s) {
        const int b = offs[s], e = offs[s + 1];
        if (b == e) continue;
        auto row = out.row(static_cast<Eigen::Index>(s));
        for (int i = b; i < e; ++i) row += R.row(i);
        if (mode == Aggregator::Mean) row /= static_cast<T>(e - b);
      }
      return push(std::move(out), [this, ir, io, offs = std::move(offs), mode] {
        const Mat& g = nodes_[static_cast<std::size_t>(io)].grad;
        Mat& gr = grad_ref(ir);
        for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
          const int b = offs[s], e = offs[s + 1];
          if (b == e) continue;
          const T scale = mode == Aggregator::Mean ? T(1) / static_cast<T>(e - b) : T(1);
          for (int i = b; i < e; ++i) gr.row(i) += scale * g.row(static_cast<Eigen::Index>(s));
        }
      });
    }
    case Aggregator::Max: {
      // argmax per (segment, column), ties to the lowest row
      std::vector<int> arg(segments * static_cast<std::size_t>(d), -1);
      for (std::size_t s = 0; s < segments; ++s) {
        const int b = offs[s], e = offs[s + 1];
        if (b == e) continue;
        for (Eigen::Index c = 0; c < d; ++c) {
          int best = b;
          for (int i = b + 1; i < e; ++i)
            if (R(i, c) > R(best, c)) best = i;
          arg[s * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)] = best;
          out(static_cast<Eigen::Index>(s), c) = R(best, c);
        }
      }
      return push(std::move(out), [this, ir, io, arg = std::move(arg), d, segments] {
        const Mat& g = nodes_[static_cast<std::size_t>(io)].grad;
        Mat& gr = grad_ref(ir);
        for (std::size_t s = 0; s < segments; ++s)
          for (Eigen::Index c = 0; c < d; ++c) {
            const int i = arg[s * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
            if (i >= 0) gr(i, c) += g(static_cast<Eigen::Index>(s), c);
          }
      });
    }
    case Aggregator::Softmax: {
      if (!theta.valid()) throw ShapeError("softmax aggregation needs theta");
      const Mat& th = value(theta);
      if (th.rows() != 1 || th.cols() != d) throw ShapeError("theta must be 1 x width");
      // unnormalized weights exp(theta.v_i - max), stored for backward
      Mat scores = R * th.transpose();  // rows x 1
      Mat weights(R.rows(), 1);
      Mat norm = Mat::Zero(static_cast<Eigen::Index>(segments), 1);
      for (std::size_t s = 0; s < segments; ++s) {
        const int b = offs[s], e = offs[s + 1];
        if (b == e) continue;
        T mx = -std::numeric_limits<T>::infinity();
        for (int i = b; i < e; ++i) mx = std::max(mx, scores(i, 0));
        T z = T(0);
        auto row = out.row(static_cast<Eigen::Index>(s));
        for (int i = b; i < e; ++i) {
          const T w = std::exp(scores(i, 0) - mx);
          weights(i, 0) = w;
          z += w;
          row += w * R.row(i);
        }
        row /= z;
        norm(static_cast<Eigen::Index>(s), 0) = z;
      }
      const int it = theta.id;
      return push(std::move(out), [this, ir, it, io, offs = std::move(offs),
                                   weights = std::move(weights), norm = std::move(norm)] {
        const Mat& g = nodes_[static_cast<std::size_t>(io)].grad;
        const Mat& outv = nodes_[static_cast<std::size_t>(io)].value;
        const Mat& Rv = nodes_[static_cast<std::size_t>(ir)].value;
        const Mat& thv = nodes_[static_cast<std::size_t>(it)].value;
        Mat& gr = grad_ref(ir);
        Mat& gt = grad_ref(it);
        for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
          const int b = offs[s], e = offs[s + 1];
          if (b == e) continue;
          const auto gs = g.row(static_cast<Eigen::Index>(s));
          const auto os = outv.row(static_cast<Eigen::Index>(s));
          const T z = norm(static_cast<Eigen::Index>(s), 0);
          for (int i = b; i < e; ++i) {
            const T w = weights(i, 0) / z;
            const T ds = w * (Rv.row(i) - os).dot(gs);
            gr.row(i) += w * gs + ds * thv.row(0);
            gt.row(0) += ds * Rv.row(i);
          }
        }
      });
    }
  }
  throw ShapeError("unknown aggregator");
}

template <typename T>
Var Tape<T>::l1_loss(Var pred, const Mat& target) {
  const Mat& P = value(pred);
  if (P.rows() != target.rows() || P.cols() != target.cols())
    throw ShapeError("l1_loss: prediction and target shapes differ");
  const T n = static_cast<T>(P.size());
  Mat out(1, 1);
  out(0, 0) = (P - target).cwiseAbs().sum() / n;
  const int ip = pred.id, io = static_cast<int>(nodes_.size());
  Mat sign = (P - target).unaryExpr([](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
  return push(std::move(out), [this, ip, io, n, sign = std::move(sign)] {
    const T g = nodes_[static_cast<std::size_t>(io)].grad(0, 0);
    grad_ref(ip) += (g / n) * sign;
  });
}

template <typename T>
Var Tape<T>::weighted_l1_loss(Var pred, const Mat& target, const Mat& weight) {
  const Mat& P = value(pred);
  if (P.rows() != target.rows() || P.cols() != target.cols() || weight.rows() != P.rows() ||
      weight.cols() != P.cols())
    throw ShapeError("weighted_l1_loss: prediction, target and weight shapes differ");
  Mat out(1, 1);
  out(0, 0) = ((P - target).cwiseAbs().array() * weight.array()).sum();
  const int ip = pred.id, io = static_cast<int>(nodes_.size());
  Mat slope = (P - target).unaryExpr([](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
  slope.array() *= weight.array();
  return push(std::move(out), [this, ip, io, slope = std::move(slope)] {
    const T g = nodes_[static_cast<std::size_t>(io)].grad(0, 0);
    grad_ref(ip) += g * slope;
  });
}

template <typename T>
Var Tape<T>::sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = value(a).sum();
  const int ia = a.id, io = static_cast<int>(nodes_.size());
  return push(std::move(out), [this, ia, io] {
    const T g = nodes_[static_cast<std::size_t>(io)].grad(0, 0);
    grad_ref(ia).array() += g;
  });
}

template class Tape<float>;
template class Tape<double>;
template struct ParameterSet<float>;
template struct ParameterSet<double>;

}  // namespace fpfgnn::nn
