#pragma once

// Minimal tape-based reverse-mode differentiation over dense tensors.
//
// A Graph records every operation in creation order, so reverse creation
// order is a valid topological order for the backward pass. Values are
// held by copy; a Graph is built per forward pass and discarded.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fundacast/tensor.hpp"

namespace fundacast::ad {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

inline MatrixMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatrixMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline ConstMatrixMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

class Graph;

struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

class Graph {
 public:
  using Backward = std::function<void(Graph&, std::size_t)>;

  Var constant(Tensor value) { return push(std::move(value), false, nullptr); }

  /// A leaf whose gradient is kept after backward().
  Var leaf(Tensor value) { return push(std::move(value), true, nullptr); }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  bool has_grad(std::size_t id) const { return nodes_[id].grad.size() == nodes_[id].value.size(); }

  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
    bool needs = false;
    for (const auto& v : inputs) needs = needs || nodes_[v.id].needs_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  /// Seeds d(root)/d(root) = 1 and propagates to every node that needs it.
  void backward(Var root) {
    if (root.graph != this || nodes_[root.id].value.size() != 1) {
      throw ShapeError("backward() needs a scalar root in this graph");
    }
    grad(root.id)[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.backward && has_grad(i)) n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    Backward backward;
  };

  Var push(Tensor value, bool needs_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Tensor(), needs_grad, std::move(backward)});
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return graph->value(id); }

namespace detail {

inline void require(bool ok, const char* what, const Shape& a, const Shape& b = {}) {
  if (!ok) throw ShapeError(std::string(what) + ": incompatible shapes " + shape_string(a) + " " + shape_string(b));
}

template <typename F, typename D>
Var unary(Var x, F f, D dfdx_from_y) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  const std::size_t xid = x.id;
  return x.graph->record(std::move(out), {x}, [xid, dfdx_from_y](Graph& g, std::size_t self) {
    const Tensor& y = g.value(self);
    const Tensor& in = g.value(xid);
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad(xid);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * dfdx_from_y(in[i], y[i]);
  });
}

inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

inline Var add(Var a, Var b) {
  detail::require(a.shape() == b.shape(), "add", a.shape(), b.shape());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ai = a.id, bi = b.id;
  return a.graph->record(std::move(out), {a, b}, [ai, bi](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    for (std::size_t id : {ai, bi}) {
      if (!g.needs_grad(id)) continue;
      Tensor& gx = g.grad(id);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
  });
}

inline Var mul(Var a, Var b) {
  detail::require(a.shape() == b.shape(), "mul", a.shape(), b.shape());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ai = a.id, bi = b.id;
  return a.graph->record(std::move(out), {a, b}, [ai, bi](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const Tensor& av = g.value(ai);
    const Tensor& bv = g.value(bi);
    if (g.needs_grad(ai)) {
      Tensor& ga = g.grad(ai);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv[i];
    }
    if (g.needs_grad(bi)) {
      Tensor& gb = g.grad(bi);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[i];
    }
  });
}

inline Var sigmoid(Var x) {
  return detail::unary(x, detail::stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(Var x) {
  return detail::unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var relu(Var x) {
  return detail::unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                       [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Linear algebra

/// (N x K) . (K x M)
inline Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  detail::require(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(0), "matmul", av.shape(), bv.shape());
  const std::size_t n = av.dim(0), k = av.dim(1), m = bv.dim(1);
  Tensor out({n, m});
  as_matrix(out, n, m).noalias() = as_matrix(av, n, k) * as_matrix(bv, k, m);
  const std::size_t ai = a.id, bi = b.id;
  return a.graph->record(std::move(out), {a, b}, [ai, bi, n, k, m](Graph& g, std::size_t self) {
    const auto gy = as_matrix(g.grad(self), n, m);
    if (g.needs_grad(ai)) as_matrix(g.grad(ai), n, k).noalias() += gy * as_matrix(g.value(bi), k, m).transpose();
    if (g.needs_grad(bi)) as_matrix(g.grad(bi), k, m).noalias() += as_matrix(g.value(ai), n, k).transpose() * gy;
  });
}

/// Adds a length-M bias to every row of an (N x M) tensor.
inline Var add_bias(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  detail::require(xv.rank() == 2 && bv.rank() == 1 && xv.dim(1) == bv.dim(0), "add_bias", xv.shape(), bv.shape());
  const std::size_t n = xv.dim(0), m = xv.dim(1);
  Tensor out = xv;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] += bv[c];
  }
  const std::size_t xi = x.id, bi = bias.id;
  return x.graph->record(std::move(out), {x, bias}, [xi, bi, n, m](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    if (g.needs_grad(xi)) {
      Tensor& gx = g.grad(xi);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
    if (g.needs_grad(bi)) {
      Tensor& gb = g.grad(bi);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) gb[c] += gy[r * m + c];
      }
    }
  });
}

/// x . W + b for an (N x F) input.
inline Var dense(Var x, Var weight, Var bias) { return add_bias(matmul(x, weight), bias); }

/// Columns [begin, begin + count) of an (N x M) tensor.
inline Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  detail::require(xv.rank() == 2 && begin + count <= xv.dim(1), "slice_cols", xv.shape());
  const std::size_t n = xv.dim(0), m = xv.dim(1);
  Tensor out({n, count});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(xv.data() + r * m + begin, count, out.data() + r * count);
  }
  const std::size_t xi = x.id;
  return x.graph->record(std::move(out), {x}, [xi, n, m, begin, count](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad(xi);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < count; ++c) gx[r * m + begin + c] += gy[r * count + c];
    }
  });
}

inline Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t xi = x.id;
  return x.graph->record(std::move(out), {x}, [xi](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad(xi);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
  });
}

// ---------------------------------------------------------------------------
// Convolution and pooling over (N x C x L) tensors

/// Stride-1 convolution with zero "same" padding. Weight is (O x C x K) with
/// odd K, bias is (O).
inline Var conv1d_same(Var x, Var weight, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  detail::require(xv.rank() == 3 && wv.rank() == 3 && xv.dim(1) == wv.dim(1) && wv.dim(2) % 2 == 1 &&
                      bv.rank() == 1 && bv.dim(0) == wv.dim(0),
                  "conv1d_same", xv.shape(), wv.shape());
  const std::size_t n = xv.dim(0), c = xv.dim(1), len = xv.dim(2);
  const std::size_t o = wv.dim(0), k = wv.dim(2);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t ck = c * k;

  // im2col: row (sample, position), column (channel, tap)
  auto cols = std::make_shared<Tensor>(Shape{n * len, ck});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t p = 0; p < len; ++p) {
      double* row = cols->data() + (s * len + p) * ck;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* src = xv.data() + (s * c + ch) * len;
        for (std::size_t t = 0; t < k; ++t) {
          const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(p) + static_cast<std::ptrdiff_t>(t) - pad;
          row[ch * k + t] = (q >= 0 && q < static_cast<std::ptrdiff_t>(len)) ? src[q] : 0.0;
        }
      }
    }
  }
  RowMatrix prod = as_matrix(*cols, n * len, ck) * as_matrix(wv, o, ck).transpose();
  Tensor out({n, o, len});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t oc = 0; oc < o; ++oc) {
      double* dst = out.data() + (s * o + oc) * len;
      for (std::size_t p = 0; p < len; ++p) dst[p] = prod(static_cast<Eigen::Index>(s * len + p), oc) + bv[oc];
    }
  }
  const std::size_t xi = x.id, wi = weight.id, bi = bias.id;
  return x.graph->record(
      std::move(out), {x, weight, bias}, [=](Graph& g, std::size_t self) {
        const Tensor& gy = g.grad(self);
        RowMatrix gprod(static_cast<Eigen::Index>(n * len), static_cast<Eigen::Index>(o));
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t oc = 0; oc < o; ++oc) {
            const double* src = gy.data() + (s * o + oc) * len;
            for (std::size_t p = 0; p < len; ++p) gprod(static_cast<Eigen::Index>(s * len + p), oc) = src[p];
          }
        }
        if (g.needs_grad(bi)) {
          Tensor& gb = g.grad(bi);
          for (std::size_t oc = 0; oc < o; ++oc) gb[oc] += gprod.col(static_cast<Eigen::Index>(oc)).sum();
        }
        if (g.needs_grad(wi)) as_matrix(g.grad(wi), o, ck).noalias() += gprod.transpose() * as_matrix(*cols, n * len, ck);
        if (g.needs_grad(xi)) {
          RowMatrix gcols = gprod * as_matrix(g.value(wi), o, ck);
          Tensor& gx = g.grad(xi);
          for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t p = 0; p < len; ++p) {
              for (std::size_t ch = 0; ch < c; ++ch) {
                for (std::size_t t = 0; t < k; ++t) {
                  const std::ptrdiff_t q = static_cast<std::ptrdiff_t>(p) + static_cast<std::ptrdiff_t>(t) - pad;
                  if (q < 0 || q >= static_cast<std::ptrdiff_t>(len)) continue;
                  gx[(s * c + ch) * len + static_cast<std::size_t>(q)] +=
                      gcols(static_cast<Eigen::Index>(s * len + p), static_cast<Eigen::Index>(ch * k + t));
                }
              }
            }
          }
        }
      });
}

/// Non-overlapping max pooling along the last axis; a trailing partial
/// window is dropped. Ties go to the earliest position.
inline Var max_pool1d(Var x, std::size_t window) {
  const Tensor& xv = x.value();
  detail::require(xv.rank() == 3 && window >= 1 && xv.dim(2) >= window, "max_pool1d", xv.shape());
  const std::size_t rows = xv.dim(0) * xv.dim(1), len = xv.dim(2), out_len = len / window;
  Tensor out({xv.dim(0), xv.dim(1), out_len});
  std::vector<std::size_t> argmax(rows * out_len);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t p = 0; p < out_len; ++p) {
      std::size_t best = r * len + p * window;
      for (std::size_t t = 1; t < window; ++t) {
        const std::size_t idx = r * len + p * window + t;
        if (xv[idx] > xv[best]) best = idx;
      }
      out[r * out_len + p] = xv[best];
      argmax[r * out_len + p] = best;
    }
  }
  const std::size_t xi = x.id;
  return x.graph->record(std::move(out), {x}, [xi, argmax = std::move(argmax)](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad(xi);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[argmax[i]] += gy[i];
  });
}

// ---------------------------------------------------------------------------
// Recurrent layer

/// One LSTM layer over an (N x L x I) sequence, returning every hidden state
/// as (N x L x H). Zero initial state. Gate blocks of the (4H) pre-activation
/// are ordered input, forget, candidate, output:
///   c_t = f * c_{t-1} + i * g,   h_t = o * tanh(c_t)
/// The backward pass is hand-written backpropagation through time.
inline Var lstm_sequence(Var x, Var w_input, Var w_hidden, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& wi = w_input.value();
  const Tensor& wh = w_hidden.value();
  const Tensor& bv = bias.value();
  detail::require(xv.rank() == 3 && wi.rank() == 2 && wh.rank() == 2 && bv.rank() == 1 && wi.dim(0) == xv.dim(2) &&
                      wh.dim(1) == 4 * wh.dim(0) && wi.dim(1) == wh.dim(1) && bv.dim(0) == wh.dim(1),
                  "lstm_sequence", xv.shape(), wi.shape());
  const std::size_t n = xv.dim(0), len = xv.dim(1), in = xv.dim(2), h = wh.dim(0);
  const auto N = static_cast<Eigen::Index>(n), H = static_cast<Eigen::Index>(h), I = static_cast<Eigen::Index>(in);

  struct Cache {
    std::vector<RowMatrix> inputs;  // x_t      (N x I)
    std::vector<RowMatrix> gates;   // i,f,g,o  (N x 4H), post-activation
    std::vector<RowMatrix> cells;   // c_t      (N x H), cells[0] = c_{-1}
    std::vector<RowMatrix> hidden;  // h_t      (N x H), hidden[0] = h_{-1}
    std::vector<RowMatrix> cell_tanh;
  };
  auto cache = std::make_shared<Cache>();
  cache->inputs.reserve(len);
  cache->gates.reserve(len);
  cache->cells.reserve(len + 1);
  cache->hidden.reserve(len + 1);
  cache->cell_tanh.reserve(len);
  cache->cells.push_back(RowMatrix::Zero(N, H));
  cache->hidden.push_back(RowMatrix::Zero(N, H));

  const auto Wi = as_matrix(wi, in, 4 * h);
  const auto Wh = as_matrix(wh, h, 4 * h);
  const Eigen::Map<const Eigen::RowVectorXd> b(bv.data(), 4 * H);
  Tensor out({n, len, h});
  for (std::size_t t = 0; t < len; ++t) {
    RowMatrix xt(N, I);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t k = 0; k < in; ++k) xt(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = xv[(s * len + t) * in + k];
    }
    RowMatrix z = xt * Wi;
    z.noalias() += cache->hidden.back() * Wh;
    z.rowwise() += b;
    for (Eigen::Index r = 0; r < N; ++r) {
      for (Eigen::Index col = 0; col < 4 * H; ++col) {
        const bool candidate = col >= 2 * H && col < 3 * H;
        z(r, col) = candidate ? std::tanh(z(r, col)) : detail::stable_sigmoid(z(r, col));
      }
    }
    RowMatrix c = z.middleCols(H, H).cwiseProduct(cache->cells.back()) +
                  z.leftCols(H).cwiseProduct(z.middleCols(2 * H, H));
    RowMatrix ct = c.array().tanh().matrix();
    RowMatrix ht = z.rightCols(H).cwiseProduct(ct);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t k = 0; k < h; ++k) out[(s * len + t) * h + k] = ht(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k));
    }
    cache->inputs.push_back(std::move(xt));
    cache->gates.push_back(std::move(z));
    cache->cells.push_back(std::move(c));
    cache->cell_tanh.push_back(std::move(ct));
    cache->hidden.push_back(std::move(ht));
  }

  const std::size_t xi = x.id, wii = w_input.id, whi = w_hidden.id, bi = bias.id;
  return x.graph->record(std::move(out), {x, w_input, w_hidden, bias}, [=](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const auto Wi = as_matrix(g.value(wii), in, 4 * h);
    const auto Wh = as_matrix(g.value(whi), h, 4 * h);
    RowMatrix dWi = RowMatrix::Zero(I, 4 * H);
    RowMatrix dWh = RowMatrix::Zero(H, 4 * H);
    Eigen::RowVectorXd db = Eigen::RowVectorXd::Zero(4 * H);
    RowMatrix dh_next = RowMatrix::Zero(N, H);
    RowMatrix dc_next = RowMatrix::Zero(N, H);
    RowMatrix dz(N, 4 * H);
    const bool want_x = g.needs_grad(xi);
    for (std::size_t t = len; t-- > 0;) {
      const RowMatrix& z = cache->gates[t];
      const RowMatrix& ct = cache->cell_tanh[t];
      RowMatrix dh = dh_next;
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t k = 0; k < h; ++k) dh(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) += gy[(s * len + t) * h + k];
      }
      const auto ig = z.leftCols(H).array();
      const auto fg = z.middleCols(H, H).array();
      const auto cg = z.middleCols(2 * H, H).array();
      const auto og = z.rightCols(H).array();
      RowMatrix dc = dc_next + (dh.array() * og * (1.0 - ct.array().square())).matrix();
      dz.leftCols(H) = (dc.array() * cg * ig * (1.0 - ig)).matrix();
      dz.middleCols(H, H) = (dc.array() * cache->cells[t].array() * fg * (1.0 - fg)).matrix();
      dz.middleCols(2 * H, H) = (dc.array() * ig * (1.0 - cg.square())).matrix();
      dz.rightCols(H) = (dh.array() * ct.array() * og * (1.0 - og)).matrix();
      dc_next = (dc.array() * fg).matrix();

      dWi.noalias() += cache->inputs[t].transpose() * dz;
      dWh.noalias() += cache->hidden[t].transpose() * dz;
      db += dz.colwise().sum();
      dh_next.noalias() = dz * Wh.transpose();
      if (want_x) {
        RowMatrix dx = dz * Wi.transpose();
        Tensor& gx = g.grad(xi);
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t k = 0; k < in; ++k) gx[(s * len + t) * in + k] += dx(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k));
        }
      }
    }
    if (g.needs_grad(wii)) as_matrix(g.grad(wii), in, 4 * h) += dWi;
    if (g.needs_grad(whi)) as_matrix(g.grad(whi), h, 4 * h) += dWh;
    if (g.needs_grad(bi)) {
      Tensor& gb = g.grad(bi);
      for (std::size_t k = 0; k < 4 * h; ++k) gb[k] += db(static_cast<Eigen::Index>(k));
    }
  });
}

/// Step `t` of an (N x L x H) sequence as (N x H).
inline Var sequence_step(Var seq, std::size_t t) {
  const Tensor& sv = seq.value();
  detail::require(sv.rank() == 3 && t < sv.dim(1), "sequence_step", sv.shape());
  const std::size_t n = sv.dim(0), len = sv.dim(1), h = sv.dim(2);
  Tensor out({n, h});
  for (std::size_t s = 0; s < n; ++s) std::copy_n(sv.data() + (s * len + t) * h, h, out.data() + s * h);
  const std::size_t si = seq.id;
  return seq.graph->record(std::move(out), {seq}, [si, n, len, h, t](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    Tensor& gs = g.grad(si);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t k = 0; k < h; ++k) gs[(s * len + t) * h + k] += gy[s * h + k];
    }
  });
}

// ---------------------------------------------------------------------------
// Losses. Each returns a shape-(1) mean over the batch.

inline Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

/// Binary cross-entropy computed from logits: max(z,0) - z*y + log(1 + e^-|z|).
inline Var bce_with_logits(Var logits, std::span<const double> targets) {
  const Tensor& z = logits.value();
  detail::require(z.size() == targets.size() && z.size() > 0, "bce_with_logits", z.shape());
  const std::size_t n = z.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += std::max(z[i], 0.0) - z[i] * targets[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  const std::size_t zi = logits.id;
  std::vector<double> y(targets.begin(), targets.end());
  return logits.graph->record(scalar(total / static_cast<double>(n)), {logits},
                              [zi, y = std::move(y)](Graph& g, std::size_t self) {
                                const double gy = g.grad(self)[0] / static_cast<double>(y.size());
                                const Tensor& z = g.value(zi);
                                Tensor& gz = g.grad(zi);
                                for (std::size_t i = 0; i < y.size(); ++i) {
                                  gz[i] += gy * (detail::stable_sigmoid(z[i]) - y[i]);
                                }
                              });
}

inline constexpr double kProbabilityClamp = 1e-12;

/// Binary cross-entropy on probabilities, clamped to [1e-12, 1 - 1e-12].
inline Var bce(Var probabilities, std::span<const double> targets) {
  const Tensor& p = probabilities.value();
  detail::require(p.size() == targets.size() && p.size() > 0, "bce", p.shape());
  const std::size_t n = p.size();
  auto clamp = [](double v) { return std::clamp(v, kProbabilityClamp, 1.0 - kProbabilityClamp); };
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = clamp(p[i]);
    total -= targets[i] * std::log(q) + (1.0 - targets[i]) * std::log(1.0 - q);
  }
  const std::size_t pi = probabilities.id;
  std::vector<double> y(targets.begin(), targets.end());
  return probabilities.graph->record(scalar(total / static_cast<double>(n)), {probabilities},
                                     [pi, y = std::move(y), clamp](Graph& g, std::size_t self) {
                                       const double gy = g.grad(self)[0] / static_cast<double>(y.size());
                                       const Tensor& p = g.value(pi);
                                       Tensor& gp = g.grad(pi);
                                       for (std::size_t i = 0; i < y.size(); ++i) {
                                         const double q = clamp(p[i]);
                                         gp[i] += gy * (q - y[i]) / (q * (1.0 - q));
                                       }
                                     });
}

inline Var mse(Var predictions, std::span<const double> targets) {
  const Tensor& p = predictions.value();
  detail::require(p.size() == targets.size() && p.size() > 0, "mse", p.shape());
  const std::size_t n = p.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (p[i] - targets[i]) * (p[i] - targets[i]);
  const std::size_t pi = predictions.id;
  std::vector<double> y(targets.begin(), targets.end());
  return predictions.graph->record(scalar(total / static_cast<double>(n)), {predictions},
                                   [pi, y = std::move(y)](Graph& g, std::size_t self) {
                                     const double gy = g.grad(self)[0] / static_cast<double>(y.size());
                                     const Tensor& p = g.value(pi);
                                     Tensor& gp = g.grad(pi);
                                     for (std::size_t i = 0; i < y.size(); ++i) gp[i] += 2.0 * gy * (p[i] - y[i]);
                                   });
}

/// wa * a + wb * b for two scalars.
inline Var weighted_sum(Var a, double wa, Var b, double wb) {
  detail::require(a.value().size() == 1 && b.value().size() == 1, "weighted_sum", a.shape(), b.shape());
  const std::size_t ai = a.id, bi = b.id;
  return a.graph->record(scalar(wa * a.value()[0] + wb * b.value()[0]), {a, b},
                         [ai, bi, wa, wb](Graph& g, std::size_t self) {
                           const double gy = g.grad(self)[0];
                           if (g.needs_grad(ai)) g.grad(ai)[0] += wa * gy;
                           if (g.needs_grad(bi)) g.grad(bi)[0] += wb * gy;
                         });
}

}  // namespace fundacast::ad
