#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "agmax/graph.hpp"

namespace agmax::diff {

/// Input floor applied inside log(); probabilities can reach exact zero when
/// predictions saturate to one-hot, and the MI loss divides and logs them.
inline constexpr double kLogFloor = 1e-12;

namespace detail {

template <typename T>
NodePtr<T> make_op(Tensor<T> value, std::vector<NodePtr<T>> parents,
                   std::function<void(Node<T>&)> backprop) {
  auto node = std::make_shared<Node<T>>(std::move(value));
  node->requires_grad = false;
  for (const auto& p : parents) node->requires_grad |= p->requires_grad;
  node->parents = std::move(parents);
  if (node->requires_grad) node->backprop = std::move(backprop);
  return node;
}

// Elementwise binary op with scalar-tensor broadcast (the only broadcast the
// engine supports). `da`/`db` map (upstream grad, a value, b value) to the
// local contributions.
template <typename T, typename Fwd, typename Da, typename Db>
NodePtr<T> binary_elementwise(const char* name, const NodePtr<T>& a,
                              const NodePtr<T>& b, Fwd fwd, Da da, Db db) {
  const bool a_scalar = a->value.numel() == 1 && a->value.rank() == 0;
  const bool b_scalar = b->value.numel() == 1 && b->value.rank() == 0;
  if (!a_scalar && !b_scalar && !a->value.same_shape(b->value)) {
    throw ShapeError(name, a->value.shape(), b->value.shape());
  }
  const Shape out_shape = a_scalar ? b->value.shape() : a->value.shape();
  Tensor<T> out(out_shape);
  const auto av = a->value.data();
  const auto bv = b->value.data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    ov[i] = fwd(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
  }
  return make_op<T>(
      std::move(out), {a, b}, [a_scalar, b_scalar, da, db](Node<T>& self) {
        Node<T>& pa = *self.parents[0];
        Node<T>& pb = *self.parents[1];
        const auto g = self.grad.data();
        const auto av = pa.value.data();
        const auto bv = pb.value.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const std::size_t ia = a_scalar ? 0 : i;
          const std::size_t ib = b_scalar ? 0 : i;
          if (pa.requires_grad) pa.grad[ia] += da(g[i], av[ia], bv[ib]);
          if (pb.requires_grad) pb.grad[ib] += db(g[i], av[ia], bv[ib]);
        }
      });
}

// Output-index range [lo, hi) for which (output index + d) lies in [0, limit_in).
inline std::pair<std::size_t, std::size_t> conv_span(std::size_t limit_out,
                                                     std::size_t limit_in,
                                                     std::ptrdiff_t d) {
  const std::ptrdiff_t lo = d < 0 ? -d : 0;
  const std::ptrdiff_t hi =
      std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(limit_out),
                               static_cast<std::ptrdiff_t>(limit_in) - d);
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace detail

template <typename T>
NodePtr<T> add(const NodePtr<T>& a, const NodePtr<T>& b) {
  return detail::binary_elementwise<T>(
      "add", a, b, [](T x, T y) { return x + y; },
      [](T g, T, T) { return g; }, [](T g, T, T) { return g; });
}

template <typename T>
NodePtr<T> sub(const NodePtr<T>& a, const NodePtr<T>& b) {
  return detail::binary_elementwise<T>(
      "sub", a, b, [](T x, T y) { return x - y; },
      [](T g, T, T) { return g; }, [](T g, T, T) { return -g; });
}

template <typename T>
NodePtr<T> mul(const NodePtr<T>& a, const NodePtr<T>& b) {
  return detail::binary_elementwise<T>(
      "mul", a, b, [](T x, T y) { return x * y; },
      [](T g, T, T y) { return g * y; }, [](T g, T x, T) { return g * x; });
}

template <typename T>
NodePtr<T> div(const NodePtr<T>& a, const NodePtr<T>& b) {
  return detail::binary_elementwise<T>(
      "div", a, b, [](T x, T y) { return x / y; },
      [](T g, T, T y) { return g / y; },
      [](T g, T x, T y) { return -g * x / (y * y); });
}

template <typename T>
NodePtr<T> add_scalar(const NodePtr<T>& a, T s) {
  return add(a, constant_scalar<T>(s));
}

template <typename T>
NodePtr<T> mul_scalar(const NodePtr<T>& a, T s) {
  return mul(a, constant_scalar<T>(s));
}

template <typename T>
NodePtr<T> neg(const NodePtr<T>& a) {
  return mul_scalar(a, T{-1});
}

template <typename T>
NodePtr<T> relu(const NodePtr<T>& x) {
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = std::max(T{0}, x->value[i]);
  }
  return detail::make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      if (p.value[i] > T{0}) p.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
NodePtr<T> exp_(const NodePtr<T>& x) {
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = std::exp(x->value[i]);
  }
  return detail::make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      p.grad[i] += self.grad[i] * self.value[i];
    }
  });
}

/// Natural log of max(x, kLogFloor); flat (zero gradient) below the floor.
template <typename T>
NodePtr<T> log_(const NodePtr<T>& x) {
  const T floor = static_cast<T>(kLogFloor);
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = std::log(std::max(x->value[i], floor));
  }
  return detail::make_op<T>(std::move(out), {x}, [floor](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      if (p.value[i] > floor) p.grad[i] += self.grad[i] / p.value[i];
    }
  });
}

/// Softmax over the last axis. Rows are shifted by their max before
/// exponentiation, so outputs are exact distributions for any finite logits.
template <typename T>
NodePtr<T> softmax(const NodePtr<T>& x) {
  if (x->value.rank() == 0) throw Error("softmax: rank-0 input");
  const std::size_t cols = x->value.shape().back();
  const std::size_t rows = x->value.numel() / cols;
  Tensor<T> out(x->value.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x->value.data().data() + r * cols;
    T* p = out.data().data() + r * cols;
    T m = in[0];
    for (std::size_t c = 1; c < cols; ++c) m = std::max(m, in[c]);
    T sum{0};
    for (std::size_t c = 0; c < cols; ++c) {
      p[c] = std::exp(in[c] - m);
      sum += p[c];
    }
    for (std::size_t c = 0; c < cols; ++c) p[c] /= sum;
  }
  return detail::make_op<T>(std::move(out), {x}, [cols](Node<T>& self) {
    Node<T>& parent = *self.parents[0];
    const std::size_t rows = self.value.numel() / cols;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* p = self.value.data().data() + r * cols;
      const T* g = self.grad.data().data() + r * cols;
      T* dz = parent.grad.data().data() + r * cols;
      T dot{0};
      for (std::size_t c = 0; c < cols; ++c) dot += g[c] * p[c];
      for (std::size_t c = 0; c < cols; ++c) dz[c] += p[c] * (g[c] - dot);
    }
  });
}

template <typename T>
NodePtr<T> matmul(const NodePtr<T>& a, const NodePtr<T>& b) {
  if (a->value.rank() != 2 || b->value.rank() != 2 ||
      a->value.dim(1) != b->value.dim(0)) {
    throw ShapeError("matmul", a->value.shape(), b->value.shape());
  }
  const std::size_t m = a->value.dim(0);
  const std::size_t k = a->value.dim(1);
  const std::size_t n = b->value.dim(1);
  Tensor<T> out({m, n});
  const T* A = a->value.data().data();
  const T* B = b->value.data().data();
  T* O = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const T av = A[i * k + l];
      const T* brow = B + l * n;
      T* orow = O + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return detail::make_op<T>(std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    Node<T>& pa = *self.parents[0];
    Node<T>& pb = *self.parents[1];
    const T* A = pa.value.data().data();
    const T* B = pb.value.data().data();
    const T* G = self.grad.data().data();
    if (pa.requires_grad) {
      T* dA = pa.grad.data().data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const T gv = G[i * n + j];
          const T* brow = B + j;  // column j, stride n
          for (std::size_t l = 0; l < k; ++l) {
            dA[i * k + l] += gv * brow[l * n];
          }
        }
      }
    }
    if (pb.requires_grad) {
      T* dB = pb.grad.data().data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
          const T av = A[i * k + l];
          const T* grow = G + i * n;
          T* drow = dB + l * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
        }
      }
    }
  });
}

template <typename T>
NodePtr<T> transpose(const NodePtr<T>& x) {
  if (x->value.rank() != 2) {
    throw Error("transpose: expected rank-2, got shape " +
                ShapeError::to_string(x->value.shape()));
  }
  const std::size_t r = x->value.dim(0);
  const std::size_t c = x->value.dim(1);
  Tensor<T> out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = x->value.at(i, j);
  }
  return detail::make_op<T>(std::move(out), {x}, [r, c](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        p.grad.at(i, j) += self.grad.at(j, i);
      }
    }
  });
}

template <typename T>
NodePtr<T> reshape(const NodePtr<T>& x, Shape new_shape) {
  if (shape_numel(new_shape) != x->value.numel()) {
    throw ShapeError("reshape", x->value.shape(), new_shape);
  }
  Tensor<T> out(std::move(new_shape),
                std::vector<T>(x->value.data().begin(), x->value.data().end()));
  return detail::make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      p.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
NodePtr<T> sum_all(const NodePtr<T>& x) {
  T total{0};
  for (std::size_t i = 0; i < x->value.numel(); ++i) total += x->value[i];
  return detail::make_op<T>(Tensor<T>::scalar(total), {x}, [](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    const T g = self.grad[0];
    for (std::size_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += g;
  });
}

template <typename T>
NodePtr<T> mean_all(const NodePtr<T>& x) {
  return mul_scalar(sum_all(x), T{1} / static_cast<T>(x->value.numel()));
}

/// Sum of a rank-2 tensor over one axis; axis 0 collapses rows, 1 columns.
template <typename T>
NodePtr<T> sum_axis(const NodePtr<T>& x, std::size_t axis) {
  if (x->value.rank() != 2 || axis > 1) {
    throw Error("sum_axis: expected rank-2 and axis in {0,1}, got shape " +
                ShapeError::to_string(x->value.shape()) + " axis " +
                std::to_string(axis));
  }
  const std::size_t rows = x->value.dim(0);
  const std::size_t cols = x->value.dim(1);
  Tensor<T> out({axis == 0 ? cols : rows});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out[axis == 0 ? j : i] += x->value.at(i, j);
    }
  }
  return detail::make_op<T>(std::move(out), {x},
                            [rows, cols, axis](Node<T>& self) {
                              Node<T>& p = *self.parents[0];
                              for (std::size_t i = 0; i < rows; ++i) {
                                for (std::size_t j = 0; j < cols; ++j) {
                                  p.grad.at(i, j) +=
                                      self.grad[axis == 0 ? j : i];
                                }
                              }
                            });
}

/// Concatenate tensors of equal rank along `axis`; all other dims must match.
template <typename T>
NodePtr<T> concat(const std::vector<NodePtr<T>>& xs, std::size_t axis) {
  if (xs.empty()) throw Error("concat: no inputs");
  const Shape& first = xs[0]->value.shape();
  if (axis >= first.size()) {
    throw Error("concat: axis " + std::to_string(axis) +
                " out of range for shape " + ShapeError::to_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& x : xs) {
    const Shape& s = x->value.shape();
    if (s.size() != first.size()) throw ShapeError("concat", first, s);
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) throw ShapeError("concat", first, s);
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  std::vector<std::size_t> block;  // per input: elements per outer slice
  block.reserve(xs.size());
  for (const auto& x : xs) block.push_back(x->value.shape()[axis] * inner);
  const std::size_t out_block = out_shape[axis] * inner;

  Tensor<T> out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t offset = o * out_block;
    for (std::size_t idx = 0; idx < xs.size(); ++idx) {
      const auto src = xs[idx]->value.data();
      std::copy_n(src.data() + o * block[idx], block[idx],
                  out.data().data() + offset);
      offset += block[idx];
    }
  }
  return detail::make_op<T>(
      std::move(out), xs, [outer, out_block, block](Node<T>& self) {
        for (std::size_t o = 0; o < outer; ++o) {
          std::size_t offset = o * out_block;
          for (std::size_t idx = 0; idx < self.parents.size(); ++idx) {
            Node<T>& p = *self.parents[idx];
            if (p.requires_grad) {
              T* dst = p.grad.data().data() + o * block[idx];
              const T* src = self.grad.data().data() + offset;
              for (std::size_t i = 0; i < block[idx]; ++i) dst[i] += src[i];
            }
            offset += block[idx];
          }
        }
      });
}

/// Add a length-m vector to every row of an (n, m) matrix (bias add).
template <typename T>
NodePtr<T> add_rowvec(const NodePtr<T>& x, const NodePtr<T>& v) {
  if (x->value.rank() != 2 || v->value.rank() != 1 ||
      x->value.dim(1) != v->value.dim(0)) {
    throw ShapeError("add_rowvec", x->value.shape(), v->value.shape());
  }
  const std::size_t rows = x->value.dim(0);
  const std::size_t cols = x->value.dim(1);
  Tensor<T> out(x->value.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out.at(i, j) = x->value.at(i, j) + v->value[j];
    }
  }
  return detail::make_op<T>(std::move(out), {x, v},
                            [rows, cols](Node<T>& self) {
                              Node<T>& px = *self.parents[0];
                              Node<T>& pv = *self.parents[1];
                              for (std::size_t i = 0; i < rows; ++i) {
                                for (std::size_t j = 0; j < cols; ++j) {
                                  const T g = self.grad.at(i, j);
                                  if (px.requires_grad) px.grad.at(i, j) += g;
                                  if (pv.requires_grad) pv.grad[j] += g;
                                }
                              }
                            });
}

/// One-hot rows for integer labels; a constant, never differentiated.
template <typename T>
NodePtr<T> one_hot(const std::vector<int>& labels, std::size_t num_classes) {
  Tensor<T> out({labels.size(), num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw Error("one_hot: label " + std::to_string(labels[i]) +
                  " out of range [0," + std::to_string(num_classes) + ")");
    }
    out.at(i, static_cast<std::size_t>(labels[i])) = T{1};
  }
  return constant(std::move(out));
}

/**
 * Direct 2-D convolution, stride 1, zero padding `pad`. Input is (N,Cin,H,W),
 * kernel (Cout,Cin,kh,kw), bias (Cout). Desk-scale inputs keep the naive
 * loop competitive; the inner loop runs contiguously over output columns.
 */
template <typename T>
NodePtr<T> conv2d(const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& b,
                  std::size_t pad) {
  if (x->value.rank() != 4 || w->value.rank() != 4 ||
      x->value.dim(1) != w->value.dim(1)) {
    throw ShapeError("conv2d", x->value.shape(), w->value.shape());
  }
  const std::size_t N = x->value.dim(0), Cin = x->value.dim(1);
  const std::size_t H = x->value.dim(2), W = x->value.dim(3);
  const std::size_t Cout = w->value.dim(0);
  const std::size_t kh = w->value.dim(2), kw = w->value.dim(3);
  if (b->value.rank() != 1 || b->value.dim(0) != Cout) {
    throw ShapeError("conv2d bias", w->value.shape(), b->value.shape());
  }
  if (H + 2 * pad < kh || W + 2 * pad < kw) {
    throw ShapeError("conv2d: kernel larger than padded input",
                     x->value.shape(), w->value.shape());
  }
  const std::size_t Ho = H + 2 * pad - kh + 1;
  const std::size_t Wo = W + 2 * pad - kw + 1;

  Tensor<T> out({N, Cout, Ho, Wo});
  const T* X = x->value.data().data();
  const T* K = w->value.data().data();
  const T* B = b->value.data().data();
  T* O = out.data().data();
  const std::ptrdiff_t ip = static_cast<std::ptrdiff_t>(pad);

  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t co = 0; co < Cout; ++co) {
      T* oplane = O + (n * Cout + co) * Ho * Wo;
      std::fill(oplane, oplane + Ho * Wo, B[co]);
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        const T* xplane = X + (n * Cin + ci) * H * W;
        const T* kplane = K + (co * Cin + ci) * kh * kw;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const T kv = kplane[ky * kw + kx];
            // input index = output index + d; valid where it lands in-bounds
            const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ip;
            const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - ip;
            const auto [oy_lo, oy_hi] = detail::conv_span(Ho, H, dy);
            const auto [ox_lo, ox_hi] = detail::conv_span(Wo, W, dx);
            for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
              const T* xrow = xplane + static_cast<std::size_t>(
                                           static_cast<std::ptrdiff_t>(oy) + dy) * W;
              T* orow = oplane + oy * Wo;
              for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
                orow[ox] += kv * xrow[static_cast<std::size_t>(
                                 static_cast<std::ptrdiff_t>(ox) + dx)];
              }
            }
          }
        }
      }
    }
  }

  return detail::make_op<T>(
      std::move(out), {x, w, b},
      [N, Cin, H, W, Cout, kh, kw, pad, Ho, Wo](Node<T>& self) {
        Node<T>& px = *self.parents[0];
        Node<T>& pw = *self.parents[1];
        Node<T>& pb = *self.parents[2];
        const T* X = px.value.data().data();
        const T* K = pw.value.data().data();
        const T* G = self.grad.data().data();
        const std::ptrdiff_t ip = static_cast<std::ptrdiff_t>(pad);

        if (pb.requires_grad) {
          for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t co = 0; co < Cout; ++co) {
              const T* gplane = G + (n * Cout + co) * Ho * Wo;
              T acc{0};
              for (std::size_t i = 0; i < Ho * Wo; ++i) acc += gplane[i];
              pb.grad[co] += acc;
            }
          }
        }
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t co = 0; co < Cout; ++co) {
            const T* gplane = G + (n * Cout + co) * Ho * Wo;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
              const T* xplane = X + (n * Cin + ci) * H * W;
              T* dxplane =
                  px.requires_grad ? px.grad.data().data() + (n * Cin + ci) * H * W
                                   : nullptr;
              const T* kplane = K + (co * Cin + ci) * kh * kw;
              T* dkplane = pw.requires_grad
                               ? pw.grad.data().data() + (co * Cin + ci) * kh * kw
                               : nullptr;
              for (std::size_t ky = 0; ky < kh; ++ky) {
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ip;
                  const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - ip;
                  const auto [oy_lo, oy_hi] = detail::conv_span(Ho, H, dy);
                  const auto [ox_lo, ox_hi] = detail::conv_span(Wo, W, dx);
                  const T kv = kplane[ky * kw + kx];
                  T kacc{0};
                  for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
                    const std::size_t iy = static_cast<std::size_t>(
                        static_cast<std::ptrdiff_t>(oy) + dy);
                    const T* grow = gplane + oy * Wo;
                    const T* xrow = xplane + iy * W;
                    T* dxrow = dxplane ? dxplane + iy * W : nullptr;
                    for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
                      const std::size_t ix = static_cast<std::size_t>(
                          static_cast<std::ptrdiff_t>(ox) + dx);
                      const T gv = grow[ox];
                      kacc += gv * xrow[ix];
                      if (dxrow) dxrow[ix] += gv * kv;
                    }
                  }
                  if (dkplane) dkplane[ky * kw + kx] += kacc;
                }
              }
            }
          }
        }
      });
}

/**
 * 2-D max pooling with square window `k` and stride `k`. Trailing rows and
 * columns that do not fill a window are dropped. Ties resolve to the first
 * element in row-major scan order, which keeps backward deterministic.
 */
template <typename T>
NodePtr<T> maxpool2d(const NodePtr<T>& x, std::size_t k) {
  if (x->value.rank() != 4 || k == 0) {
    throw Error("maxpool2d: expected rank-4 input and k > 0, got shape " +
                ShapeError::to_string(x->value.shape()));
  }
  const std::size_t N = x->value.dim(0), C = x->value.dim(1);
  const std::size_t H = x->value.dim(2), W = x->value.dim(3);
  const std::size_t Ho = H / k, Wo = W / k;
  if (Ho == 0 || Wo == 0) {
    throw Error("maxpool2d: window " + std::to_string(k) +
                " larger than input " + ShapeError::to_string(x->value.shape()));
  }
  Tensor<T> out({N, C, Ho, Wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
  const T* X = x->value.data().data();
  T* O = out.data().data();
  std::size_t oi = 0;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t plane = (n * C + c) * H * W;
      for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox, ++oi) {
          std::size_t best = plane + (oy * k) * W + ox * k;
          T best_v = X[best];
          for (std::size_t dy = 0; dy < k; ++dy) {
            for (std::size_t dx = 0; dx < k; ++dx) {
              const std::size_t idx = plane + (oy * k + dy) * W + (ox * k + dx);
              if (X[idx] > best_v) {
                best_v = X[idx];
                best = idx;
              }
            }
          }
          O[oi] = best_v;
          (*argmax)[oi] = best;
        }
      }
    }
  }
  return detail::make_op<T>(std::move(out), {x}, [argmax](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      p.grad[(*argmax)[i]] += self.grad[i];
    }
  });
}

/**
 * Per-channel affine map y = x * scale[c] + shift[c] on (N,C,H,W) with fixed
 * coefficients; used to fold dataset normalization into the forward graph so
 * attacks can differentiate through to raw intensities.
 */
template <typename T>
NodePtr<T> channel_affine(const NodePtr<T>& x, std::vector<T> scale,
                          std::vector<T> shift) {
  if (x->value.rank() != 4 || scale.size() != x->value.dim(1) ||
      shift.size() != scale.size()) {
    throw Error("channel_affine: shape " +
                ShapeError::to_string(x->value.shape()) + " with " +
                std::to_string(scale.size()) + " channels of coefficients");
  }
  const std::size_t N = x->value.dim(0), C = x->value.dim(1);
  const std::size_t plane = x->value.dim(2) * x->value.dim(3);
  Tensor<T> out(x->value.shape());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (n * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        out[base + i] = x->value[base + i] * scale[c] + shift[c];
      }
    }
  }
  return detail::make_op<T>(
      std::move(out), {x}, [scale = std::move(scale), N, C, plane](Node<T>& self) {
        Node<T>& p = *self.parents[0];
        for (std::size_t n = 0; n < N; ++n) {
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t base = (n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              p.grad[base + i] += self.grad[base + i] * scale[c];
            }
          }
        }
      });
}

}  // namespace agmax::diff
