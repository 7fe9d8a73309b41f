#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "esai/rng.hpp"

namespace esai {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(const Vec& a) {
  for (double x : a)
    if (!std::isfinite(x)) return false;
  return true;
}

// Dense row-major matrix. Shape is fixed at construction.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols)
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative matrix shape");
  }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  Vec& raw() { return data_; }
  const Vec& raw() const { return data_; }

  Vec matvec(const Vec& x) const {
    if (static_cast<int>(x.size()) != cols_)
      throw std::invalid_argument("matvec: dimension mismatch");
    Vec y(rows_, 0.0);
    for (int r = 0; r < rows_; ++r) {
      const double* row = data_.data() + static_cast<std::size_t>(r) * cols_;
      double s = 0.0;
      for (int c = 0; c < cols_; ++c) s += row[c] * x[c];
      y[r] = s;
    }
    return y;
  }

  // y = M^T x
  Vec matvec_transposed(const Vec& x) const {
    if (static_cast<int>(x.size()) != rows_)
      throw std::invalid_argument("matvec_transposed: dimension mismatch");
    Vec y(cols_, 0.0);
    for (int r = 0; r < rows_; ++r) {
      const double* row = data_.data() + static_cast<std::size_t>(r) * cols_;
      for (int c = 0; c < cols_; ++c) y[c] += row[c] * x[r];
    }
    return y;
  }

  double frobenius_sq() const { return dot(data_, data_); }
  double frobenius() const { return std::sqrt(frobenius_sq()); }

  bool all_finite() const { return esai::all_finite(data_); }

  void scale(double s) {
    for (double& x : data_) x *= s;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  Vec data_;
};

// Largest-singular-value estimate by power iteration on M^T M. The start
// vector is fixed-seed random and renormalized each step, so the estimate is
// deterministic and monotone nondecreasing in the iteration count.
inline double spectral_norm(const Matrix& m, int iterations = 50) {
  if (iterations < 1) throw std::invalid_argument("spectral_norm: iterations must be >= 1");
  if (m.rows() == 0 || m.cols() == 0) return 0.0;

  Rng rng(0x517ec7a16b59ULL);
  Vec v(m.cols());
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  double vn = norm2(v);
  if (vn == 0.0) v[0] = 1.0; else
    for (double& x : v) x /= vn;

  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vec u = m.matvec(v);
    const double un = norm2(u);
    if (un == 0.0) return 0.0;  // v hit the null space; zero matrix always lands here
    estimate = un;
    Vec w = m.matvec_transposed(u);
    const double wn = norm2(w);
    if (wn == 0.0) break;
    for (std::size_t i = 0; i < w.size(); ++i) v[i] = w[i] / wn;
  }
  return estimate;
}

inline Vec softmax(const Vec& logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty input");
  const double lmax = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - lmax);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

// Two-layer rectifier network: y = W2 max(0, W1 x + b1) + b2.
// If lipschitz_budget L >= 0 is set, project_lipschitz keeps the spectral norm
// of each layer at or below sqrt(L), bounding the network's Lipschitz constant
// by L.
struct FeedForward {
  int input_dim = 0;
  int hidden_dim = 0;
  int output_dim = 0;
  Matrix w1;  // hidden x input
  Vec b1;
  Matrix w2;  // output x hidden
  Vec b2;
  double lipschitz_budget = -1.0;  // negative: unconstrained

  static FeedForward make(int input, int hidden, int output, Rng& rng,
                          double budget = -1.0) {
    FeedForward net;
    net.input_dim = input;
    net.hidden_dim = hidden;
    net.output_dim = output;
    net.w1 = Matrix(hidden, input);
    net.b1.assign(hidden, 0.0);
    net.w2 = Matrix(output, hidden);
    net.b2.assign(output, 0.0);
    net.lipschitz_budget = budget;
    const double s1 = 1.0 / std::sqrt(static_cast<double>(std::max(1, input)));
    for (double& x : net.w1.raw()) x = rng.uniform(-s1, s1);
    const double s2 = 1.0 / std::sqrt(static_cast<double>(std::max(1, hidden)));
    for (double& x : net.w2.raw()) x = rng.uniform(-s2, s2);
    return net;
  }

  std::size_t parameter_count() const {
    return net_size(w1) + b1.size() + net_size(w2) + b2.size();
  }

  bool all_finite() const {
    return w1.all_finite() && w2.all_finite() && esai::all_finite(b1) &&
           esai::all_finite(b2);
  }

 private:
  static std::size_t net_size(const Matrix& m) {
    return static_cast<std::size_t>(m.rows()) * m.cols();
  }
};

// Intermediate activations from one forward pass, consumed by backward().
struct Tape {
  Vec input;
  Vec hidden_pre;
  Vec hidden;
  bool recorded = false;
};

struct FeedForwardGrad {
  Matrix w1;
  Vec b1;
  Matrix w2;
  Vec b2;

  static FeedForwardGrad zeros_like(const FeedForward& net) {
    FeedForwardGrad g;
    g.w1 = Matrix(net.hidden_dim, net.input_dim);
    g.b1.assign(net.hidden_dim, 0.0);
    g.w2 = Matrix(net.output_dim, net.hidden_dim);
    g.b2.assign(net.output_dim, 0.0);
    return g;
  }

  void reset() {
    std::fill(w1.raw().begin(), w1.raw().end(), 0.0);
    std::fill(b1.begin(), b1.end(), 0.0);
    std::fill(w2.raw().begin(), w2.raw().end(), 0.0);
    std::fill(b2.begin(), b2.end(), 0.0);
  }

  double squared_norm() const {
    return w1.frobenius_sq() + dot(b1, b1) + w2.frobenius_sq() + dot(b2, b2);
  }

  void scale(double s) {
    w1.scale(s);
    w2.scale(s);
    for (double& x : b1) x *= s;
    for (double& x : b2) x *= s;
  }
};

inline Vec forward(const FeedForward& net, const Vec& x, Tape* tape = nullptr) {
  if (static_cast<int>(x.size()) != net.input_dim)
    throw std::invalid_argument("forward: input dimension mismatch");
  Vec pre = net.w1.matvec(x);
  for (int i = 0; i < net.hidden_dim; ++i) pre[i] += net.b1[i];
  Vec hidden(net.hidden_dim);
  for (int i = 0; i < net.hidden_dim; ++i) hidden[i] = pre[i] > 0.0 ? pre[i] : 0.0;
  Vec out = net.w2.matvec(hidden);
  for (int i = 0; i < net.output_dim; ++i) out[i] += net.b2[i];
  if (tape) {
    tape->input = x;
    tape->hidden_pre = std::move(pre);
    tape->hidden = hidden;
    tape->recorded = true;
  }
  return out;
}

inline Vec forward(const FeedForward& net, const Vec& x, Tape& tape) {
  return forward(net, x, &tape);
}

// Accumulates parameter gradients into acc and returns the input gradient.
inline Vec backward(const FeedForward& net, const Tape& tape,
                    const Vec& out_grad, FeedForwardGrad& acc) {
  if (!tape.recorded)
    throw std::logic_error("backward: no forward pass recorded on tape");
  if (static_cast<int>(out_grad.size()) != net.output_dim)
    throw std::invalid_argument("backward: output gradient dimension mismatch");

  for (int o = 0; o < net.output_dim; ++o) {
    acc.b2[o] += out_grad[o];
    for (int h = 0; h < net.hidden_dim; ++h)
      acc.w2(o, h) += out_grad[o] * tape.hidden[h];
  }
  Vec dhidden = net.w2.matvec_transposed(out_grad);
  for (int h = 0; h < net.hidden_dim; ++h)
    if (tape.hidden_pre[h] <= 0.0) dhidden[h] = 0.0;
  for (int h = 0; h < net.hidden_dim; ++h) {
    acc.b1[h] += dhidden[h];
    for (int i = 0; i < net.input_dim; ++i)
      acc.w1(h, i) += dhidden[h] * tape.input[i];
  }
  return net.w1.matvec_transposed(dhidden);
}

// Rescales each layer to spectral norm <= sqrt(budget); layers already under
// budget are left untouched.
inline void project_lipschitz(FeedForward& net, int norm_iterations = 50) {
  if (net.lipschitz_budget < 0.0) return;
  const double cap = std::sqrt(net.lipschitz_budget);
  for (Matrix* w : {&net.w1, &net.w2}) {
    const double s = spectral_norm(*w, norm_iterations);
    if (s > cap) w->scale(cap / s);
  }
}

inline void sgd_step(FeedForward& net, const FeedForwardGrad& grad, double lr) {
  for (std::size_t i = 0; i < net.w1.raw().size(); ++i)
    net.w1.raw()[i] -= lr * grad.w1.raw()[i];
  for (std::size_t i = 0; i < net.b1.size(); ++i) net.b1[i] -= lr * grad.b1[i];
  for (std::size_t i = 0; i < net.w2.raw().size(); ++i)
    net.w2.raw()[i] -= lr * grad.w2.raw()[i];
  for (std::size_t i = 0; i < net.b2.size(); ++i) net.b2[i] -= lr * grad.b2[i];
}

}  // namespace esai
