#include "scagan/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "scagan/kernels.hpp"

namespace scagan::ops {
namespace {

std::atomic<std::uint64_t> g_norm_calls{0};

inline Node& input(Node& self, std::size_t i) { return *self.inputs[i]; }
inline bool wants(Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

template <typename F, typename DF>
Var unary(const Var& x, const char* name, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_op(std::move(out), {x}, name, [df](Node& self) {
    Node& in = input(self, 0);
    Tensor& g = in.grad_buffer();
    const Tensor& dy = self.grad;
    for (std::size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] * df(in.value[i], self.value[i]);
  });
}

void require_rank4(const Var& x, const char* what) { require_rank(x.value(), 4, what); }

Tensor transpose2(const Tensor& t) {
  const int r = t.dim(0), c = t.dim(1);
  Tensor out({c, r});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j) * r + i] = t[static_cast<std::size_t>(i) * c + j];
  return out;
}

Tensor matmul_raw(const Tensor& a, bool ta, const Tensor& b, bool tb) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const int m = ta ? a.dim(1) : a.dim(0);
  const int k = ta ? a.dim(0) : a.dim(1);
  const int kb = tb ? b.dim(1) : b.dim(0);
  const int n = tb ? b.dim(0) : b.dim(1);
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions differ: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  Tensor c({m, n});
  if (ta && tb) {
    Tensor bt = transpose2(b);
    kernels::gemm(m, n, k, a.ptr(), 1, m, bt.ptr(), n, c.ptr(), n);
  } else if (ta) {
    kernels::gemm(m, n, k, a.ptr(), 1, m, b.ptr(), n, c.ptr(), n);
  } else if (tb) {
    kernels::gemm_abt(m, n, k, a.ptr(), k, b.ptr(), k, c.ptr(), n);
  } else {
    kernels::gemm(m, n, k, a.ptr(), k, 1, b.ptr(), n, c.ptr(), n);
  }
  return c;
}

// Output/input index maps shared by im2col and its adjoint.
struct ConvGeom {
  int cin, h, w, kh, kw, stride, pad, ho, wo;
};

void im2col(const double* x, const ConvGeom& g, double* col) {
  const int p = g.ho * g.wo;
  for (int c = 0; c < g.cin; ++c) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        double* row = col + static_cast<std::size_t>((c * g.kh + ky) * g.kw + kx) * p;
        const double* xc = x + static_cast<std::size_t>(c) * g.h * g.w;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          double* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, 0.0);
            continue;
          }
          const double* src = xc + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeom& g, double* dx) {
  const int p = g.ho * g.wo;
  for (int c = 0; c < g.cin; ++c) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        const double* row = col + static_cast<std::size_t>((c * g.kh + ky) * g.kw + kx) * p;
        double* xc = dx + static_cast<std::size_t>(c) * g.h * g.w;
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          double* dst = xc + static_cast<std::size_t>(iy) * g.w;
          const double* src = row + oy * g.wo;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Shared forward/backward for instance norm (groups = N*C, each over H*W)
// and batch norm (groups = C, each over N*H*W).
template <typename IndexFn>
Var normalize_groups(const Var& x, double eps, int groups, int group_size, IndexFn index,
                     const char* name) {
  g_norm_calls.fetch_add(1, std::memory_order_relaxed);
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  std::vector<double> inv_sigma(static_cast<std::size_t>(groups));
  for (int gi = 0; gi < groups; ++gi) {
    double s = 0.0, s2 = 0.0;
    for (int j = 0; j < group_size; ++j) {
      const double v = xv[index(gi, j)];
      s += v;
      s2 += v * v;
    }
    const double mu = s / group_size;
    const double var = std::max(s2 / group_size - mu * mu, 0.0);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_sigma[static_cast<std::size_t>(gi)] = inv;
    for (int j = 0; j < group_size; ++j) {
      const std::size_t idx = index(gi, j);
      y[idx] = (xv[idx] - mu) * inv;
    }
  }
  return make_op(std::move(y), {x}, name,
                 [inv_sigma = std::move(inv_sigma), groups, group_size, index](Node& self) {
                   Tensor& gx = input(self, 0).grad_buffer();
                   const Tensor& dy = self.grad;
                   const Tensor& yv = self.value;
                   for (int gi = 0; gi < groups; ++gi) {
                     double mdy = 0.0, mdyy = 0.0;
                     for (int j = 0; j < group_size; ++j) {
                       const std::size_t idx = index(gi, j);
                       mdy += dy[idx];
                       mdyy += dy[idx] * yv[idx];
                     }
                     mdy /= group_size;
                     mdyy /= group_size;
                     const double inv = inv_sigma[static_cast<std::size_t>(gi)];
                     for (int j = 0; j < group_size; ++j) {
                       const std::size_t idx = index(gi, j);
                       gx[idx] += inv * (dy[idx] - mdy - yv[idx] * mdyy);
                     }
                   }
                 });
}

}  // namespace

std::uint64_t normalization_call_count() noexcept {
  return g_norm_calls.load(std::memory_order_relaxed);
}

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out.add_inplace(b.value());
  return make_op(std::move(out), {a, b}, "add", [](Node& self) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (wants(self, i)) input(self, i).accumulate_grad(self.grad);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op(std::move(out), {a, b}, "sub", [](Node& self) {
    if (wants(self, 0)) input(self, 0).accumulate_grad(self.grad);
    if (wants(self, 1)) {
      Tensor& g = input(self, 1).grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op(std::move(out), {a, b}, "mul", [](Node& self) {
    Node& na = input(self, 0);
    Node& nb = input(self, 1);
    if (na.requires_grad) {
      Tensor& g = na.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      Tensor& g = nb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * na.value[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "div");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b.value()[i];
  return make_op(std::move(out), {a, b}, "div", [](Node& self) {
    Node& na = input(self, 0);
    Node& nb = input(self, 1);
    if (na.requires_grad) {
      Tensor& g = na.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / nb.value[i];
    }
    if (nb.requires_grad) {
      Tensor& g = nb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * self.value[i] / nb.value[i];
    }
  });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var mul_scalar(const Var& a, double s) {
  return unary(a, "mul_scalar", [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var leaky_relu(const Var& x, double slope) {
  return unary(
      x, "leaky_relu", [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var relu(const Var& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(const Var& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var sqrt(const Var& x) {
  return unary(
      x, "sqrt", [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Var abs(const Var& x) {
  return unary(
      x, "abs", [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var log_clamped(const Var& x, double floor) {
  return unary(
      x, "log_clamped", [floor](double v) { return std::log(std::max(v, floor)); },
      [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

// ---------------------------------------------------------------- shape / reduce

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_op(std::move(out), {x}, "reshape", [](Node& self) {
    Node& in = input(self, 0);
    in.accumulate_grad(self.grad.reshaped(in.value.shape()));
  });
}

Var expand(const Var& x, const Shape& shape) {
  const Tensor& xv = x.value();
  if (xv.rank() != static_cast<int>(shape.size()) || xv.rank() > 4) {
    throw ShapeError("expand: rank mismatch " + shape_string(xv.shape()) + " -> " +
                     shape_string(shape));
  }
  // Pad both shapes to rank 4 and compute input strides (0 on broadcast axes).
  int out_dims[4] = {1, 1, 1, 1};
  int in_dims[4] = {1, 1, 1, 1};
  const int off = 4 - xv.rank();
  for (int i = 0; i < xv.rank(); ++i) {
    out_dims[off + i] = shape[static_cast<std::size_t>(i)];
    in_dims[off + i] = xv.shape()[static_cast<std::size_t>(i)];
    if (in_dims[off + i] != 1 && in_dims[off + i] != out_dims[off + i]) {
      throw ShapeError("expand: cannot broadcast " + shape_string(xv.shape()) + " to " +
                       shape_string(shape));
    }
  }
  std::size_t strides[4];
  std::size_t acc = 1;
  for (int i = 3; i >= 0; --i) {
    strides[i] = in_dims[i] == 1 ? 0 : acc;
    acc *= static_cast<std::size_t>(in_dims[i]);
  }
  auto for_each = [out_dims, strides](auto&& body) {
    std::size_t o = 0;
    for (int a = 0; a < out_dims[0]; ++a)
      for (int b = 0; b < out_dims[1]; ++b)
        for (int c = 0; c < out_dims[2]; ++c)
          for (int d = 0; d < out_dims[3]; ++d, ++o)
            body(o, a * strides[0] + b * strides[1] + c * strides[2] + d * strides[3]);
  };
  Tensor out(shape);
  for_each([&](std::size_t o, std::size_t i) { out[o] = xv[i]; });
  return make_op(std::move(out), {x}, "expand", [for_each](Node& self) {
    Tensor& g = input(self, 0).grad_buffer();
    const Tensor& dy = self.grad;
    for_each([&](std::size_t o, std::size_t i) { g[i] += dy[o]; });
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_op(Tensor({1}, s), {x}, "sum", [](Node& self) {
    Tensor& g = input(self, 0).grad_buffer();
    const double d = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d;
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  return mul_scalar(sum(x), 1.0 / n);
}

Var reduce(const Var& x, int axis, Reduce kind) {
  const Tensor& xv = x.value();
  require_rank(xv, 2, "reduce");
  if (axis != 0 && axis != 1) throw ShapeError("reduce: axis must be 0 or 1");
  const int rows = xv.dim(0), cols = xv.dim(1);
  const int outer = axis == 1 ? rows : cols;
  const int inner = axis == 1 ? cols : rows;
  if (inner == 0) throw ShapeError("reduce over an empty axis");
  auto at = [rows, cols, axis](int o, int i) -> std::size_t {
    (void)rows;
    return axis == 1 ? static_cast<std::size_t>(o) * cols + i : static_cast<std::size_t>(i) * cols + o;
  };
  Tensor out(axis == 1 ? Shape{rows, 1} : Shape{1, cols});
  std::vector<int> arg(static_cast<std::size_t>(outer), 0);
  for (int o = 0; o < outer; ++o) {
    double r = xv[at(o, 0)];
    int best = 0;
    for (int i = 1; i < inner; ++i) {
      const double v = xv[at(o, i)];
      switch (kind) {
        case Reduce::Sum:
        case Reduce::Mean:
          r += v;
          break;
        case Reduce::Min:
          if (v < r) r = v, best = i;
          break;
        case Reduce::Max:
          if (v > r) r = v, best = i;
          break;
      }
    }
    if (kind == Reduce::Mean) r /= inner;
    out[static_cast<std::size_t>(o)] = r;
    arg[static_cast<std::size_t>(o)] = best;
  }
  return make_op(std::move(out), {x}, "reduce",
                 [arg = std::move(arg), outer, inner, at, kind](Node& self) {
                   Tensor& g = input(self, 0).grad_buffer();
                   for (int o = 0; o < outer; ++o) {
                     const double d = self.grad[static_cast<std::size_t>(o)];
                     if (kind == Reduce::Min || kind == Reduce::Max) {
                       g[at(o, arg[static_cast<std::size_t>(o)])] += d;
                     } else {
                       const double s = kind == Reduce::Mean ? d / inner : d;
                       for (int i = 0; i < inner; ++i) g[at(o, i)] += s;
                     }
                   }
                 });
}

Var matmul(const Var& a, const Var& b, bool ta, bool tb) {
  Tensor out = matmul_raw(a.value(), ta, b.value(), tb);
  return make_op(std::move(out), {a, b}, "matmul", [ta, tb](Node& self) {
    Node& na = input(self, 0);
    Node& nb = input(self, 1);
    if (na.requires_grad) {
      na.accumulate_grad(ta ? matmul_raw(nb.value, tb, self.grad, true)
                            : matmul_raw(self.grad, false, nb.value, !tb));
    }
    if (nb.requires_grad) {
      nb.accumulate_grad(tb ? matmul_raw(self.grad, true, na.value, ta)
                            : matmul_raw(na.value, !ta, self.grad, false));
    }
  });
}

// ---------------------------------------------------------------- spatial

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding) {
  require_rank4(x, "conv2d input");
  require_rank(weight.value(), 4, "conv2d weight");
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const int n = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const int cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  if (wv.dim(1) != cin) {
    throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels, weight expects " +
                     std::to_string(wv.dim(1)));
  }
  if (bias.defined() && (bias.value().size() != static_cast<std::size_t>(cout))) {
    throw ShapeError("conv2d: bias size does not match output channels");
  }
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride/padding");
  const int ho = (h + 2 * padding - kh) / stride + 1;
  const int wo = (w + 2 * padding - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: kernel larger than padded input");
  const ConvGeom g{cin, h, w, kh, kw, stride, padding, ho, wo};
  const int k = cin * kh * kw;
  const int p = ho * wo;
  const bool pointwise = kh == 1 && kw == 1 && stride == 1 && padding == 0;

  Tensor out({n, cout, ho, wo});
  std::vector<double> col(pointwise ? 0 : static_cast<std::size_t>(k) * p);
  for (int s = 0; s < n; ++s) {
    const double* xs = xv.ptr() + static_cast<std::size_t>(s) * cin * h * w;
    double* os = out.ptr() + static_cast<std::size_t>(s) * cout * p;
    if (bias.defined()) {
      for (int co = 0; co < cout; ++co) std::fill(os + co * p, os + (co + 1) * p, bias.value()[co]);
    }
    const double* b = xs;
    if (!pointwise) {
      im2col(xs, g, col.data());
      b = col.data();
    }
    kernels::gemm(cout, p, k, wv.ptr(), k, 1, b, p, os, p);
  }

  std::vector<Var> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return make_op(std::move(out), std::move(inputs), "conv2d",
                 [g, n, cout, k, p, pointwise, has_bias](Node& self) {
                   Node& nx = input(self, 0);
                   Node& nw = input(self, 1);
                   const Tensor& dy = self.grad;
                   std::vector<double> col(pointwise ? 0 : static_cast<std::size_t>(k) * p);
                   std::vector<double> dcol(static_cast<std::size_t>(k) * p);
                   const std::size_t xstride = static_cast<std::size_t>(g.cin) * g.h * g.w;
                   for (int s = 0; s < n; ++s) {
                     const double* dys = dy.ptr() + static_cast<std::size_t>(s) * cout * p;
                     const double* xs = nx.value.ptr() + s * xstride;
                     if (nw.requires_grad) {
                       const double* b = xs;
                       if (!pointwise) {
                         im2col(xs, g, col.data());
                         b = col.data();
                       }
                       Tensor& gw = nw.grad_buffer();
                       kernels::gemm_abt(cout, k, p, dys, p, b, p, gw.ptr(), k);
                     }
                     if (has_bias && self.inputs[2]->requires_grad) {
                       Tensor& gb = self.inputs[2]->grad_buffer();
                       for (int co = 0; co < cout; ++co) {
                         double acc = 0.0;
                         for (int i = 0; i < p; ++i) acc += dys[co * p + i];
                         gb[static_cast<std::size_t>(co)] += acc;
                       }
                     }
                     if (nx.requires_grad) {
                       double* gx = nx.grad_buffer().ptr() + s * xstride;
                       if (pointwise) {
                         kernels::gemm(k, p, cout, nw.value.ptr(), 1, k, dys, p, gx, p);
                       } else {
                         std::fill(dcol.begin(), dcol.end(), 0.0);
                         kernels::gemm(k, p, cout, nw.value.ptr(), 1, k, dys, p, dcol.data(), p);
                         col2im_add(dcol.data(), g, gx);
                       }
                     }
                   }
                 });
}

Var instance_norm(const Var& x, double eps) {
  require_rank4(x, "instance_norm");
  const Shape& s = x.shape();
  const int hw = s[2] * s[3];
  return normalize_groups(
      x, eps, s[0] * s[1], hw,
      [hw](int gi, int j) { return static_cast<std::size_t>(gi) * hw + j; }, "instance_norm");
}

Var batch_norm(const Var& x, double eps) {
  require_rank4(x, "batch_norm");
  const Shape& s = x.shape();
  const int n = s[0], c = s[1], hw = s[2] * s[3];
  return normalize_groups(
      x, eps, c, n * hw,
      [c, hw](int gi, int j) {
        const int sample = j / hw;
        const int pos = j % hw;
        return (static_cast<std::size_t>(sample) * c + gi) * hw + pos;
      },
      "batch_norm");
}

Var resize_nearest(const Var& x, int height, int width) {
  require_rank4(x, "resize_nearest");
  if (height <= 0 || width <= 0) throw ShapeError("resize_nearest: target size must be positive");
  const Shape& s = x.shape();
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  std::vector<int> ys(static_cast<std::size_t>(height)), xs(static_cast<std::size_t>(width));
  for (int i = 0; i < height; ++i) ys[i] = std::min(h - 1, static_cast<int>((static_cast<long>(i) * h) / height));
  for (int j = 0; j < width; ++j) xs[j] = std::min(w - 1, static_cast<int>((static_cast<long>(j) * w) / width));
  Tensor out({n, c, height, width});
  const Tensor& xv = x.value();
  for (int a = 0; a < n * c; ++a) {
    const double* src = xv.ptr() + static_cast<std::size_t>(a) * h * w;
    double* dst = out.ptr() + static_cast<std::size_t>(a) * height * width;
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) dst[i * width + j] = src[ys[i] * w + xs[j]];
  }
  return make_op(std::move(out), {x}, "resize_nearest",
                 [ys = std::move(ys), xs = std::move(xs), n, c, h, w, height, width](Node& self) {
                   Tensor& g = input(self, 0).grad_buffer();
                   for (int a = 0; a < n * c; ++a) {
                     double* dst = g.ptr() + static_cast<std::size_t>(a) * h * w;
                     const double* src = self.grad.ptr() + static_cast<std::size_t>(a) * height * width;
                     for (int i = 0; i < height; ++i)
                       for (int j = 0; j < width; ++j) dst[ys[i] * w + xs[j]] += src[i * width + j];
                   }
                 });
}

Var upsample2x(const Var& x) { return resize_nearest(x, x.dim(2) * 2, x.dim(3) * 2); }

Var avg_pool2(const Var& x) {
  require_rank4(x, "avg_pool2");
  const Shape& s = x.shape();
  const int n = s[0], c = s[1], h = s[2], w = s[3], ho = h / 2, wo = w / 2;
  if (ho == 0 || wo == 0) throw ShapeError("avg_pool2: input too small");
  Tensor out({n, c, ho, wo});
  const Tensor& xv = x.value();
  for (int a = 0; a < n * c; ++a) {
    const double* src = xv.ptr() + static_cast<std::size_t>(a) * h * w;
    double* dst = out.ptr() + static_cast<std::size_t>(a) * ho * wo;
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j)
        dst[i * wo + j] = 0.25 * (src[2 * i * w + 2 * j] + src[2 * i * w + 2 * j + 1] +
                                  src[(2 * i + 1) * w + 2 * j] + src[(2 * i + 1) * w + 2 * j + 1]);
  }
  return make_op(std::move(out), {x}, "avg_pool2", [n, c, h, w, ho, wo](Node& self) {
    Tensor& g = input(self, 0).grad_buffer();
    for (int a = 0; a < n * c; ++a) {
      double* dst = g.ptr() + static_cast<std::size_t>(a) * h * w;
      const double* src = self.grad.ptr() + static_cast<std::size_t>(a) * ho * wo;
      for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j) {
          const double d = 0.25 * src[i * wo + j];
          dst[2 * i * w + 2 * j] += d;
          dst[2 * i * w + 2 * j + 1] += d;
          dst[(2 * i + 1) * w + 2 * j] += d;
          dst[(2 * i + 1) * w + 2 * j + 1] += d;
        }
    }
  });
}

Var max_pool2(const Var& x) {
  require_rank4(x, "max_pool2");
  const Shape& s = x.shape();
  const int n = s[0], c = s[1], h = s[2], w = s[3], ho = h / 2, wo = w / 2;
  if (ho == 0 || wo == 0) throw ShapeError("max_pool2: input too small");
  Tensor out({n, c, ho, wo});
  std::vector<std::size_t> arg(out.size());
  const Tensor& xv = x.value();
  std::size_t o = 0;
  for (int a = 0; a < n * c; ++a) {
    const std::size_t base = static_cast<std::size_t>(a) * h * w;
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j, ++o) {
        std::size_t best = base + 2 * i * w + 2 * j;
        for (std::size_t cand : {base + 2 * i * w + 2 * j + 1, base + (2 * i + 1) * w + 2 * j,
                                 base + (2 * i + 1) * w + 2 * j + 1}) {
          if (xv[cand] > xv[best]) best = cand;
        }
        out[o] = xv[best];
        arg[o] = best;
      }
  }
  return make_op(std::move(out), {x}, "max_pool2", [arg = std::move(arg)](Node& self) {
    Tensor& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape& s0 = parts[0].shape();
  require_rank(parts[0].value(), 4, "concat_channels");
  int total = 0;
  for (const Var& p : parts) {
    require_rank(p.value(), 4, "concat_channels");
    const Shape& s = p.shape();
    if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3]) {
      throw ShapeError("concat_channels: spatial/batch mismatch " + shape_string(s0) + " vs " +
                       shape_string(s));
    }
    total += s[1];
  }
  const int n = s0[0], hw = s0[2] * s0[3];
  Tensor out({n, total, s0[2], s0[3]});
  std::vector<int> offsets;
  int off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const int c = p.dim(1);
    for (int s = 0; s < n; ++s) {
      const double* src = p.value().ptr() + static_cast<std::size_t>(s) * c * hw;
      double* dst = out.ptr() + (static_cast<std::size_t>(s) * total + off) * hw;
      std::copy(src, src + static_cast<std::size_t>(c) * hw, dst);
    }
    off += c;
  }
  return make_op(std::move(out), parts, "concat_channels",
                 [offsets = std::move(offsets), n, hw, total](Node& self) {
                   for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                     Node& in = *self.inputs[i];
                     if (!in.requires_grad) continue;
                     Tensor& g = in.grad_buffer();
                     const int c = in.value.dim(1);
                     for (int s = 0; s < n; ++s) {
                       const double* src = self.grad.ptr() + (static_cast<std::size_t>(s) * total + offsets[i]) * hw;
                       double* dst = g.ptr() + static_cast<std::size_t>(s) * c * hw;
                       for (std::size_t j = 0; j < static_cast<std::size_t>(c) * hw; ++j) dst[j] += src[j];
                     }
                   }
                 });
}

Var slice_batch(const Var& x, int index) {
  require_rank4(x, "slice_batch");
  const Shape& s = x.shape();
  if (index < 0 || index >= s[0]) throw ShapeError("slice_batch: index out of range");
  const std::size_t chunk = static_cast<std::size_t>(s[1]) * s[2] * s[3];
  Tensor out({1, s[1], s[2], s[3]});
  std::copy(x.value().ptr() + index * chunk, x.value().ptr() + (index + 1) * chunk, out.ptr());
  return make_op(std::move(out), {x}, "slice_batch", [index, chunk](Node& self) {
    Tensor& g = input(self, 0).grad_buffer();
    for (std::size_t j = 0; j < chunk; ++j) g[index * chunk + j] += self.grad[j];
  });
}

namespace {
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}
}  // namespace

Var pad_reflect(const Var& x, int top, int bottom, int left, int right) {
  require_rank4(x, "pad_reflect");
  const Shape& s = x.shape();
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  if (top < 0 || bottom < 0 || left < 0 || right < 0 || top >= h || bottom >= h || left >= w ||
      right >= w) {
    throw ShapeError("pad_reflect: padding must be non-negative and smaller than the input");
  }
  const int ho = h + top + bottom, wo = w + left + right;
  Tensor out({n, c, ho, wo});
  std::vector<std::size_t> src_index(static_cast<std::size_t>(ho) * wo);
  for (int i = 0; i < ho; ++i)
    for (int j = 0; j < wo; ++j)
      src_index[static_cast<std::size_t>(i) * wo + j] =
          static_cast<std::size_t>(reflect_index(i - top, h)) * w + reflect_index(j - left, w);
  for (int a = 0; a < n * c; ++a) {
    const double* src = x.value().ptr() + static_cast<std::size_t>(a) * h * w;
    double* dst = out.ptr() + static_cast<std::size_t>(a) * ho * wo;
    for (std::size_t k = 0; k < src_index.size(); ++k) dst[k] = src[src_index[k]];
  }
  return make_op(std::move(out), {x}, "pad_reflect",
                 [src_index = std::move(src_index), n, c, h, w, ho, wo](Node& self) {
                   Tensor& g = input(self, 0).grad_buffer();
                   for (int a = 0; a < n * c; ++a) {
                     double* dst = g.ptr() + static_cast<std::size_t>(a) * h * w;
                     const double* src = self.grad.ptr() + static_cast<std::size_t>(a) * ho * wo;
                     for (std::size_t k = 0; k < src_index.size(); ++k) dst[src_index[k]] += src[k];
                   }
                 });
}

Var crop(const Var& x, int top, int left, int height, int width) {
  require_rank4(x, "crop");
  const Shape& s = x.shape();
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  if (top < 0 || left < 0 || height <= 0 || width <= 0 || top + height > h || left + width > w) {
    throw ShapeError("crop: window outside input " + shape_string(s));
  }
  Tensor out({n, c, height, width});
  for (int a = 0; a < n * c; ++a)
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j)
        out[(static_cast<std::size_t>(a) * height + i) * width + j] =
            x.value()[(static_cast<std::size_t>(a) * h + top + i) * w + left + j];
  return make_op(std::move(out), {x}, "crop", [n, c, h, w, top, left, height, width](Node& self) {
    Tensor& g = input(self, 0).grad_buffer();
    for (int a = 0; a < n * c; ++a)
      for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j)
          g[(static_cast<std::size_t>(a) * h + top + i) * w + left + j] +=
              self.grad[(static_cast<std::size_t>(a) * height + i) * width + j];
  });
}

}  // namespace scagan::ops
