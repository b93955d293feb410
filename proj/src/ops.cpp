#include "nasaswin/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace nasaswin {

namespace {

// Returns the number of leading repeats when b's shape is a suffix of a's.
std::size_t suffix_repeats(const Tensor& a, const Tensor& b, const char* op) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  bool ok = sb.size() <= sa.size() && std::equal(sb.rbegin(), sb.rend(), sa.rbegin());
  if (!ok) {
    throw DimensionError(std::string(op) + ": shapes " + to_string(sa) + " and " + to_string(sb) +
                         " are not broadcast-compatible");
  }
  return a.numel() / b.numel();
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + to_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Plain row-major kernel: c[m,n] += a[m,k] * b[k,n].
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m,n] += a[m,k] * b[n,k]^T
void gemm_acc_bt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] += s;
    }
  }
}

// c[k,n] += a[m,k]^T * b[m,n]
void gemm_acc_at(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const std::size_t reps = suffix_repeats(a, b, "add");
  const std::size_t nb = b.numel();
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] = ad[r * nb + j] + bd[j];
  return Tensor::make_op(
      a.shape(), std::move(out), {a, b},
      [reps, nb](std::span<const double> g, std::span<const std::span<double>> gi) {
        if (!gi[0].empty())
          for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
        if (!gi[1].empty())
          for (std::size_t r = 0; r < reps; ++r)
            for (std::size_t j = 0; j < nb; ++j) gi[1][j] += g[r * nb + j];
      },
      "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const std::size_t reps = suffix_repeats(a, b, "sub");
  const std::size_t nb = b.numel();
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] = ad[r * nb + j] - bd[j];
  return Tensor::make_op(
      a.shape(), std::move(out), {a, b},
      [reps, nb](std::span<const double> g, std::span<const std::span<double>> gi) {
        if (!gi[0].empty())
          for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
        if (!gi[1].empty())
          for (std::size_t r = 0; r < reps; ++r)
            for (std::size_t j = 0; j < nb; ++j) gi[1][j] -= g[r * nb + j];
      },
      "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const std::size_t reps = suffix_repeats(a, b, "mul");
  const std::size_t nb = b.numel();
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t j = 0; j < nb; ++j) out[r * nb + j] = ad[r * nb + j] * bd[j];
  return Tensor::make_op(
      a.shape(), std::move(out), {a, b},
      [a, b, reps, nb](std::span<const double> g, std::span<const std::span<double>> gi) {
        auto ad = a.data();
        auto bd = b.data();
        for (std::size_t r = 0; r < reps; ++r)
          for (std::size_t j = 0; j < nb; ++j) {
            const std::size_t i = r * nb + j;
            if (!gi[0].empty()) gi[0][i] += g[i] * bd[j];
            if (!gi[1].empty()) gi[1][j] += g[i] * ad[i];
          }
      },
      "mul");
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= factor;
  return Tensor::make_op(
      x.shape(), std::move(out), {x},
      [factor](std::span<const double> g, std::span<const std::span<double>> gi) {
        for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * factor;
      },
      "scale");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() < 2 || b.dim() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
  }
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  const std::size_t m = sa[sa.size() - 2], k = sa.back();
  const std::size_t kb = sb[sb.size() - 2], n = sb.back();
  const Shape lead_a(sa.begin(), sa.end() - 2);
  const Shape lead_b(sb.begin(), sb.end() - 2);
  bool batch_ok = lead_a == lead_b || lead_a.empty() || lead_b.empty();
  if (k != kb || !batch_ok) {
    throw DimensionError("matmul shape mismatch: " + to_string(sa) + " x " + to_string(sb));
  }
  const Shape& lead = lead_a.size() >= lead_b.size() ? lead_a : lead_b;
  const std::size_t batch = numel(lead);
  const std::size_t stride_a = lead_a.empty() ? 0 : m * k;
  const std::size_t stride_b = lead_b.empty() ? 0 : k * n;

  Shape out_shape = lead;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(batch * m * n, 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (std::size_t t = 0; t < batch; ++t) gemm_acc(ad + t * stride_a, bd + t * stride_b, out.data() + t * m * n, m, k, n);

  return Tensor::make_op(
      std::move(out_shape), std::move(out), {a, b},
      [a, b, batch, m, k, n, stride_a, stride_b](std::span<const double> g, std::span<const std::span<double>> gi) {
        const double* ad = a.data().data();
        const double* bd = b.data().data();
        for (std::size_t t = 0; t < batch; ++t) {
          const double* gt = g.data() + t * m * n;
          if (!gi[0].empty()) gemm_acc_bt(gt, bd + t * stride_b, gi[0].data() + t * stride_a, m, n, k);
          if (!gi[1].empty()) gemm_acc_at(ad + t * stride_a, gt, gi[1].data() + t * stride_b, m, k, n);
        }
      },
      "matmul");
}

Tensor transpose(const Tensor& x) {
  if (x.dim() < 2) throw DimensionError("transpose needs rank >= 2, got " + to_string(x.shape()));
  Shape s = x.shape();
  const std::size_t r = s[s.size() - 2], c = s.back();
  const std::size_t batch = x.numel() / (r * c);
  std::swap(s[s.size() - 2], s[s.size() - 1]);
  std::vector<double> out(x.numel());
  auto xd = x.data();
  for (std::size_t t = 0; t < batch; ++t)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[t * r * c + j * r + i] = xd[t * r * c + i * c + j];
  return Tensor::make_op(
      std::move(s), std::move(out), {x},
      [batch, r, c](std::span<const double> g, std::span<const std::span<double>> gi) {
        for (std::size_t t = 0; t < batch; ++t)
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gi[0][t * r * c + i * c + j] += g[t * r * c + j * r + i];
      },
      "transpose");
}

Tensor gather(const Tensor& x, std::vector<std::size_t> index, Shape out_shape) {
  if (numel(out_shape) != index.size()) {
    throw DimensionError("gather: " + std::to_string(index.size()) + " indices for shape " + to_string(out_shape));
  }
  auto xd = x.data();
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xd.size()) throw DimensionError("gather index out of range for " + to_string(x.shape()));
    out[i] = xd[index[i]];
  }
  return Tensor::make_op(
      std::move(out_shape), std::move(out), {x},
      [index = std::move(index)](std::span<const double> g, std::span<const std::span<double>> gi) {
        for (std::size_t i = 0; i < index.size(); ++i) gi[0][index[i]] += g[i];
      },
      "gather");
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  Shape shape = parts[0].shape();
  auto base = split_axis(shape, axis);
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) throw DimensionError("concat rank mismatch: " + to_string(shape) + " vs " + to_string(s));
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != shape[i]) {
        throw DimensionError("concat shape mismatch: " + to_string(shape) + " vs " + to_string(s));
      }
    }
    extents.push_back(s[axis]);
    total += s[axis];
  }
  shape[axis] = total;
  const std::size_t outer = base.outer, inner = base.inner;
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto d = parts[p].data();
    const std::size_t e = extents[p];
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(d.begin() + o * e * inner, e * inner, out.begin() + (o * total + offset) * inner);
    offset += e;
  }
  return Tensor::make_op(
      std::move(shape), std::move(out), parts,
      [extents, outer, inner, total](std::span<const double> g, std::span<const std::span<double>> gi) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < extents.size(); ++p) {
          const std::size_t e = extents[p];
          if (!gi[p].empty())
            for (std::size_t o = 0; o < outer; ++o)
              for (std::size_t i = 0; i < e * inner; ++i) gi[p][o * e * inner + i] += g[(o * total + offset) * inner + i];
          offset += e;
        }
      },
      "concat");
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  auto s = split_axis(x.shape(), axis);
  if (begin >= end || end > s.extent) {
    throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") out of range on axis " +
                         std::to_string(axis) + " of " + to_string(x.shape()));
  }
  Shape shape = x.shape();
  const std::size_t e = end - begin;
  shape[axis] = e;
  auto xd = x.data();
  std::vector<double> out(s.outer * e * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(xd.begin() + (o * s.extent + begin) * s.inner, e * s.inner, out.begin() + o * e * s.inner);
  return Tensor::make_op(
      std::move(shape), std::move(out), {x},
      [s, begin, e](std::span<const double> g, std::span<const std::span<double>> gi) {
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t i = 0; i < e * s.inner; ++i) gi[0][(o * s.extent + begin) * s.inner + i] += g[o * e * s.inner + i];
      },
      "slice");
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  auto s = split_axis(x.shape(), axis);
  auto xd = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      bool nan = false;
      for (std::size_t j = 0; j < s.extent; ++j) {
        mx = std::max(mx, xd[base + j * s.inner]);
        nan = nan || std::isnan(xd[base + j * s.inner]);
      }
      if (nan) {  // propagate; callers check the loss for finiteness
        for (std::size_t j = 0; j < s.extent; ++j) out[base + j * s.inner] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      if (mx == -std::numeric_limits<double>::infinity()) throw std::domain_error("softmax: fully masked slice");
      double z = 0.0;
      for (std::size_t j = 0; j < s.extent; ++j) {
        const double e = std::exp(xd[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < s.extent; ++j) out[base + j * s.inner] /= z;
    }
  auto y = std::make_shared<std::vector<double>>(out);
  return Tensor::make_op(
      x.shape(), std::move(out), {x},
      [s, y](std::span<const double> g, std::span<const std::span<double>> gi) {
        const auto& yd = *y;
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.extent * s.inner + in;
            double dot = 0.0;
            for (std::size_t j = 0; j < s.extent; ++j) dot += g[base + j * s.inner] * yd[base + j * s.inner];
            for (std::size_t j = 0; j < s.extent; ++j) {
              const std::size_t i = base + j * s.inner;
              gi[0][i] += yd[i] * (g[i] - dot);
            }
          }
      },
      "softmax");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.dim() < 1) throw DimensionError("layer_norm on rank-0 tensor");
  const std::size_t c = x.shape().back();
  if (gamma.numel() != c || beta.numel() != c) {
    throw DimensionError("layer_norm: gamma/beta " + to_string(gamma.shape()) + "/" + to_string(beta.shape()) +
                         " do not match trailing extent of " + to_string(x.shape()));
  }
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / c;
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mu) * rs;
      (*xhat)[r * c + j] = h;
      out[r * c + j] = h * gd[j] + bd[j];
    }
  }
  return Tensor::make_op(
      x.shape(), std::move(out), {x, gamma, beta},
      [gamma, xhat, rstd, rows, c](std::span<const double> g, std::span<const std::span<double>> gi) {
        auto gd = gamma.data();
        const auto& h = *xhat;
        std::vector<double> dh(c);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = g.data() + r * c;
          const double* hr = h.data() + r * c;
          double sum_dh = 0.0, sum_dh_h = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            dh[j] = gr[j] * gd[j];
            sum_dh += dh[j];
            sum_dh_h += dh[j] * hr[j];
            if (!gi[1].empty()) gi[1][j] += gr[j] * hr[j];
            if (!gi[2].empty()) gi[2][j] += gr[j];
          }
          if (!gi[0].empty()) {
            const double inv_c = 1.0 / static_cast<double>(c);
            for (std::size_t j = 0; j < c; ++j)
              gi[0][r * c + j] += (*rstd)[r] * (dh[j] - inv_c * sum_dh - hr[j] * inv_c * sum_dh_h);
          }
        }
      },
      "layer_norm");
}

Tensor gelu(const Tensor& x) {
  auto xd = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * xd[i] * (1.0 + std::erf(xd[i] * std::numbers::sqrt2 / 2.0));
  return Tensor::make_op(
      x.shape(), std::move(out), {x},
      [x](std::span<const double> g, std::span<const std::span<double>> gi) {
        auto xd = x.data();
        const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double v = xd[i];
          const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
          const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
          gi[0][i] += g[i] * (cdf + v * pdf);
        }
      },
      "gelu");
}

Tensor conv2d_grouped(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dOptions opts) {
  if (x.dim() != 3 || weight.dim() != 4) {
    throw DimensionError("conv2d_grouped expects x[c,h,w] and w[o,c/g,kh,kw], got " + to_string(x.shape()) + " and " +
                         to_string(weight.shape()));
  }
  const std::size_t cin = x.size(0), h = x.size(1), w = x.size(2);
  const std::size_t cout = weight.size(0), cpg = weight.size(1), kh = weight.size(2), kw = weight.size(3);
  const std::size_t g = opts.groups, st = opts.stride, pad = opts.padding;
  if (g == 0 || st == 0) throw ConfigError("conv2d_grouped: stride and groups must be positive");
  if (cin % g != 0 || cout % g != 0) {
    throw ConfigError("conv2d_grouped: channels " + std::to_string(cin) + "->" + std::to_string(cout) +
                      " not divisible by groups " + std::to_string(g));
  }
  if (cpg != cin / g) {
    throw ConfigError("conv2d_grouped: weight expects " + std::to_string(cpg) + " input channels per group, input gives " +
                      std::to_string(cin / g));
  }
  if (h + 2 * pad < kh || w + 2 * pad < kw) {
    throw ConfigError("conv2d_grouped: kernel " + std::to_string(kh) + "x" + std::to_string(kw) + " does not fit input " +
                      to_string(x.shape()));
  }
  if (bias.defined() && bias.numel() != cout) throw DimensionError("conv2d_grouped: bias " + to_string(bias.shape()));
  const std::size_t ho = (h + 2 * pad - kh) / st + 1;
  const std::size_t wo = (w + 2 * pad - kw) / st + 1;
  const std::size_t opg = cout / g;

  // Visits every (output, input, weight) triple; shared by forward/backward.
  auto sweep = [=](auto&& fn) {
    for (std::size_t oc = 0; oc < cout; ++oc) {
      const std::size_t grp = oc / opg;
      for (std::size_t ic = 0; ic < cpg; ++ic) {
        const std::size_t xc = grp * cpg + ic;
        for (std::size_t u = 0; u < kh; ++u)
          for (std::size_t v = 0; v < kw; ++v) {
            const std::size_t widx = ((oc * cpg + ic) * kh + u) * kw + v;
            for (std::size_t oy = 0; oy < ho; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * st + u) - static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t ox = 0; ox < wo; ++ox) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * st + v) - static_cast<std::ptrdiff_t>(pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                fn((oc * ho + oy) * wo + ox, (xc * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix), widx);
              }
            }
          }
      }
    }
  };

  std::vector<double> out(cout * ho * wo, 0.0);
  auto xd = x.data();
  auto wd = weight.data();
  if (bias.defined()) {
    auto bd = bias.data();
    for (std::size_t oc = 0; oc < cout; ++oc) std::fill_n(out.begin() + oc * ho * wo, ho * wo, bd[oc]);
  }
  sweep([&](std::size_t o, std::size_t i, std::size_t k) { out[o] += xd[i] * wd[k]; });

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return Tensor::make_op(
      {cout, ho, wo}, std::move(out), std::move(inputs),
      [x, weight, sweep, has_bias, cout, ho, wo](std::span<const double> g, std::span<const std::span<double>> gi) {
        auto xd = x.data();
        auto wd = weight.data();
        auto gx = gi[0];
        auto gw = gi[1];
        sweep([&](std::size_t o, std::size_t i, std::size_t k) {
          if (!gx.empty()) gx[i] += g[o] * wd[k];
          if (!gw.empty()) gw[k] += g[o] * xd[i];
        });
        if (has_bias && !gi[2].empty())
          for (std::size_t oc = 0; oc < cout; ++oc)
            for (std::size_t p = 0; p < ho * wo; ++p) gi[2][oc] += g[oc * ho * wo + p];
      },
      "conv2d_grouped");
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.dim() != 2) throw DimensionError("cross_entropy expects logits[n,k], got " + to_string(logits.shape()));
  const std::size_t n = logits.size(0), k = logits.size(1);
  if (n == 0 || labels.empty()) throw std::invalid_argument("cross_entropy: empty batch");
  if (labels.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
  }
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= k) throw std::invalid_argument("cross_entropy: label out of range");
  auto ld = logits.data();
  auto probs = std::make_shared<std::vector<double>>(n * k);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = ld.data() + r * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) (*probs)[r * k + j] = std::exp(row[j] - lse);
    total += lse - row[labels[r]];
  }
  return Tensor::make_op(
      {1}, {total / static_cast<double>(n)}, {logits},
      [probs, labels, n, k](std::span<const double> g, std::span<const std::span<double>> gi) {
        const double s = g[0] / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < k; ++j) {
            const double target = static_cast<std::size_t>(labels[r]) == j ? 1.0 : 0.0;
            gi[0][r * k + j] += s * ((*probs)[r * k + j] - target);
          }
      },
      "cross_entropy");
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::make_op(
      {1}, {s}, {x},
      [](std::span<const double> g, std::span<const std::span<double>> gi) {
        for (auto& v : gi[0]) v += g[0];
      },
      "sum");
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  auto s = split_axis(x.shape(), axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (shape.empty()) shape.push_back(1);
  auto xd = x.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  const double inv = 1.0 / static_cast<double>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.extent; ++j)
      for (std::size_t in = 0; in < s.inner; ++in) out[o * s.inner + in] += xd[(o * s.extent + j) * s.inner + in];
  for (auto& v : out) v *= inv;
  return Tensor::make_op(
      std::move(shape), std::move(out), {x},
      [s, inv](std::span<const double> g, std::span<const std::span<double>> gi) {
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t j = 0; j < s.extent; ++j)
            for (std::size_t in = 0; in < s.inner; ++in) gi[0][(o * s.extent + j) * s.inner + in] += g[o * s.inner + in] * inv;
      },
      "mean_axis");
}

}  // namespace nasaswin
