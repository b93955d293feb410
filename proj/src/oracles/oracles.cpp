#include "nasaswin/oracles/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nasaswin::oracle {

namespace {

Vec linear(const Vec& x, std::size_t n, const Linear& l) {
  const std::size_t in = l.weight.size(0), out = l.weight.size(1);
  auto w = l.weight.data();
  auto b = l.bias.data();
  Vec y(n * out);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += x[r * in + i] * w[i * out + o];
      y[r * out + o] = s;
    }
  return y;
}

double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); }

Vec vec(const Tensor& t) { return t.to_vector(); }

}  // namespace

Vec random_vec(std::size_t n, Rng& rng, double lo, double hi) {
  Vec v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad, double lo, double hi) {
  const std::size_t n = numel(shape);
  return Tensor::from(std::move(shape), random_vec(n, rng, lo, hi), requires_grad);
}

void randomize_params(const std::vector<std::pair<std::string, Tensor>>& params, Rng& rng) {
  auto ends_with = [](const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (auto [name, t] : params) {
    auto v = t.to_vector();
    const auto& shape = t.shape();
    if (ends_with(name, "gamma")) {
      for (auto& x : v) x = rng.uniform(0.5, 1.5);
    } else if (ends_with(name, "bias")) {
      for (auto& x : v) x = rng.uniform(-0.5, 0.5);
    } else if (ends_with(name, "head_mix_weight")) {
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = (i % (shape[0] + 1) == 0 ? 1.0 : 0.0) + rng.uniform(-0.5, 0.5);
    } else {
      // Linear weights are [in, out]; conv weights [out, in/g, kh, kw].
      const double fan_in = ends_with(name, "conv_weight") ? static_cast<double>(t.numel() / shape[0])
                                                           : static_cast<double>(shape[0]);
      const double a = std::sqrt(3.0 / fan_in);
      for (auto& x : v) x = rng.uniform(-a, a);
    }
    t.assign(std::move(v));
  }
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Vec matmul(const Vec& a, const Vec& b, std::size_t m, std::size_t k, std::size_t n) {
  Vec c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  return c;
}

Vec conv2d_grouped(const Vec& x, const Vec& w, const Vec& bias, std::size_t c_in, std::size_t h, std::size_t wd,
                   std::size_t c_out, std::size_t kh, std::size_t kw, std::size_t stride, std::size_t groups) {
  const std::size_t cig = c_in / groups, cog = c_out / groups;
  const std::size_t ho = (h - kh) / stride + 1, wo = (wd - kw) / stride + 1;
  Vec out(c_out * ho * wo);
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t oc = g * cog; oc < (g + 1) * cog; ++oc)
      for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t xx = 0; xx < wo; ++xx) {
          double s = bias.empty() ? 0.0 : bias[oc];
          for (std::size_t ic = 0; ic < cig; ++ic)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx)
                s += w[((oc * cig + ic) * kh + ky) * kw + kx] *
                     x[((g * cig + ic) * h + y * stride + ky) * wd + xx * stride + kx];
          out[(oc * ho + y) * wo + xx] = s;
        }
  return out;
}

Vec layer_norm(const Vec& x, const Vec& gamma, const Vec& beta, std::size_t n, std::size_t c, double eps) {
  Vec y(n * c);
  for (std::size_t r = 0; r < n; ++r) {
    double mu = 0.0;
    for (std::size_t i = 0; i < c; ++i) mu += x[r * c + i];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t i = 0; i < c; ++i) var += (x[r * c + i] - mu) * (x[r * c + i] - mu);
    var /= static_cast<double>(c);
    for (std::size_t i = 0; i < c; ++i) y[r * c + i] = (x[r * c + i] - mu) / std::sqrt(var + eps) * gamma[i] + beta[i];
  }
  return y;
}

Vec softmax_rows(const Vec& x, std::size_t n, std::size_t k) {
  Vec y(n * k);
  for (std::size_t r = 0; r < n; ++r) {
    const double m = *std::max_element(x.begin() + static_cast<std::ptrdiff_t>(r * k),
                                       x.begin() + static_cast<std::ptrdiff_t>((r + 1) * k));
    double z = 0.0;
    for (std::size_t i = 0; i < k; ++i) z += std::exp(x[r * k + i] - m);
    for (std::size_t i = 0; i < k; ++i) y[r * k + i] = std::exp(x[r * k + i] - m) / z;
  }
  return y;
}

double cross_entropy(const Vec& logits, const std::vector<int>& labels, std::size_t k) {
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    double z = 0.0;
    for (std::size_t i = 0; i < k; ++i) z += std::exp(logits[r * k + i]);
    total += -(logits[r * k + static_cast<std::size_t>(labels[r])] - std::log(z));
  }
  return total / static_cast<double>(labels.size());
}

std::pair<Vec, Vec> dft2(const Vec& x, std::size_t h, std::size_t w) {
  Vec re(h * w, 0.0), im(h * w, 0.0);
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      double sr = 0.0, si = 0.0;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) {
          const double ang = -2.0 * std::numbers::pi *
                             (static_cast<double>(u * y) / static_cast<double>(h) +
                              static_cast<double>(v * xx) / static_cast<double>(w));
          sr += x[y * w + xx] * std::cos(ang);
          si += x[y * w + xx] * std::sin(ang);
        }
      re[u * w + v] = sr;
      im[u * w + v] = si;
    }
  return {re, im};
}

Vec nasa_attn_matrix(const Vec& f, std::size_t t, std::size_t d, const std::vector<GridPos>& pos) {
  Vec a(t * t, 0.0);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      if (i == j) continue;
      double ad = 0.0;
      for (std::size_t k = 0; k < d; ++k) ad += std::abs(f[i * d + k] - f[j * d + k]);
      ad /= static_cast<double>(d);
      const double rd = std::hypot(static_cast<double>(pos[i].row - pos[j].row),
                                   static_cast<double>(pos[i].col - pos[j].col));
      a[i * t + j] = ad / rd;
    }
  return a;
}

Vec standard_window_attention(const Vec& tokens, std::size_t nw, std::size_t window, const WindowAttentionParams& p,
                              const Vec& mask) {
  const std::size_t t = window * window, c = p.dim, hd = c / p.heads;
  const Vec qkv = linear(tokens, nw * t, p.qkv);
  auto rb = p.relative_bias.data();
  const std::size_t span = 2 * window - 1;
  Vec merged(nw * t * c, 0.0);
  for (std::size_t w = 0; w < nw; ++w)
    for (std::size_t h = 0; h < p.heads; ++h) {
      auto q = [&](std::size_t i, std::size_t k) { return qkv[(w * t + i) * 3 * c + h * hd + k]; };
      auto kk = [&](std::size_t i, std::size_t k) { return qkv[(w * t + i) * 3 * c + c + h * hd + k]; };
      auto v = [&](std::size_t i, std::size_t k) { return qkv[(w * t + i) * 3 * c + 2 * c + h * hd + k]; };
      for (std::size_t i = 0; i < t; ++i) {
        Vec logits(t);
        for (std::size_t j = 0; j < t; ++j) {
          double dot = 0.0;
          for (std::size_t k = 0; k < hd; ++k) dot += q(i, k) * kk(j, k);
          const long dy = static_cast<long>(i / window) - static_cast<long>(j / window) + static_cast<long>(window) - 1;
          const long dx = static_cast<long>(i % window) - static_cast<long>(j % window) + static_cast<long>(window) - 1;
          logits[j] = dot / std::sqrt(static_cast<double>(hd)) +
                      rb[static_cast<std::size_t>(dy * static_cast<long>(span) + dx) * p.heads + h];
          if (!mask.empty()) logits[j] += mask[(w * t + i) * t + j];
        }
        const Vec a = softmax_rows(logits, 1, t);
        for (std::size_t k = 0; k < hd; ++k) {
          double s = 0.0;
          for (std::size_t j = 0; j < t; ++j) s += a[j] * v(j, k);
          merged[(w * t + i) * c + h * hd + k] = s;
        }
      }
    }
  return linear(merged, nw * t, p.proj);
}

Vec nasa_attention(const Vec& tokens, std::size_t nw, std::size_t window, const NasaParams& p, const Vec& mask) {
  const std::size_t t = window * window, c = p.dim, hd = c / p.heads, nh = p.heads;
  const auto pos = window_positions(window);
  const Vec values = linear(tokens, nw * t, p.value);
  auto mw = p.head_mix_weight.data();
  auto mb = p.head_mix_bias.data();
  Vec merged(nw * t * c, 0.0);
  for (std::size_t w = 0; w < nw; ++w) {
    std::vector<Vec> raw(nh);
    for (std::size_t h = 0; h < nh; ++h) {
      Vec f(t * hd);
      for (std::size_t i = 0; i < t; ++i)
        for (std::size_t k = 0; k < hd; ++k) f[i * hd + k] = tokens[(w * t + i) * c + h * hd + k];
      raw[h] = nasa_attn_matrix(f, t, hd, pos);
    }
    for (std::size_t h2 = 0; h2 < nh; ++h2)
      for (std::size_t i = 0; i < t; ++i) {
        Vec logits(t);
        for (std::size_t j = 0; j < t; ++j) {
          double s = mb[h2];
          for (std::size_t h = 0; h < nh; ++h) {
            if (p.mix == HeadMix::PerHead && h != h2) continue;
            s += mw[h2 * nh + h] * raw[h][i * t + j];
          }
          if (!mask.empty()) s += mask[(w * t + i) * t + j];
          logits[j] = s;
        }
        const Vec a = softmax_rows(logits, 1, t);
        for (std::size_t k = 0; k < hd; ++k) {
          double s = 0.0;
          for (std::size_t j = 0; j < t; ++j) s += a[j] * values[(w * t + j) * c + h2 * hd + k];
          merged[(w * t + i) * c + h2 * hd + k] = s;
        }
      }
  }
  return linear(merged, nw * t, p.proj);
}

Vec cmfe_group_outputs(const Vec& x, std::size_t h, std::size_t w, const CmfeParams& p) {
  const std::size_t dg = p.group_dim, ho = h / 4, wo = w / 4;
  auto cw = p.conv_weight.data();
  auto cb = p.conv_bias.data();
  Vec out(3 * dg * ho * wo);
  for (std::size_t g = 0; g < 3; ++g) {
    // Each group sees only its (colour, residual) channel pair.
    const std::size_t colour = 2 * g, noise = 2 * g + 1;
    for (std::size_t o = 0; o < dg; ++o) {
      const std::size_t oc = g * dg + o;
      for (std::size_t ty = 0; ty < ho; ++ty)
        for (std::size_t tx = 0; tx < wo; ++tx) {
          double s = cb[oc];
          for (std::size_t ky = 0; ky < 4; ++ky)
            for (std::size_t kx = 0; kx < 4; ++kx) {
              const std::size_t py = 4 * ty + ky, px = 4 * tx + kx;
              s += cw[((oc * 2 + 0) * 4 + ky) * 4 + kx] * x[(colour * h + py) * w + px];
              s += cw[((oc * 2 + 1) * 4 + ky) * 4 + kx] * x[(noise * h + py) * w + px];
            }
          out[(oc * ho + ty) * wo + tx] = s;
        }
    }
  }
  return out;
}

Vec cmfe_embed(const Vec& x, std::size_t h, std::size_t w, const CmfeParams& p) {
  const Vec grouped = cmfe_group_outputs(x, h, w, p);
  const std::size_t mid = 3 * p.group_dim, n = (h / 4) * (w / 4), c = p.embed_dim;
  Vec tokens(n * mid);
  for (std::size_t ch = 0; ch < mid; ++ch)
    for (std::size_t t = 0; t < n; ++t) tokens[t * mid + ch] = grouped[ch * n + t];
  Vec out = matmul(tokens, vec(p.merge_weight), n, mid, c);
  auto b = p.merge_bias.data();
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t k = 0; k < c; ++k) out[t * c + k] += b[k];
  return out;
}

Vec patch_merging(const Vec& x, std::size_t h, std::size_t w, std::size_t c, const PatchMergingParams& p) {
  const std::size_t ho = h / 2, wo = w / 2;
  Vec cat(ho * wo * 4 * c);
  for (std::size_t y = 0; y < ho; ++y)
    for (std::size_t xx = 0; xx < wo; ++xx) {
      const std::size_t tl = (2 * y) * w + 2 * xx, bl = (2 * y + 1) * w + 2 * xx;
      const std::size_t tr = (2 * y) * w + 2 * xx + 1, br = (2 * y + 1) * w + 2 * xx + 1;
      const std::size_t src[4] = {tl, bl, tr, br};
      for (std::size_t q = 0; q < 4; ++q)
        for (std::size_t k = 0; k < c; ++k) cat[(y * wo + xx) * 4 * c + q * c + k] = x[src[q] * c + k];
    }
  const Vec normed = layer_norm(cat, vec(p.norm.gamma), vec(p.norm.beta), ho * wo, 4 * c, p.norm.eps);
  return linear(normed, ho * wo, p.reduction);
}

Vec channel_merge(const Vec& main, const Vec& noise, std::size_t n, std::size_t c, const ChannelMergeParams& p) {
  Vec cat(n * 2 * c);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      cat[r * 2 * c + k] = main[r * c + k];
      cat[r * 2 * c + c + k] = noise[r * c + k];
    }
  Vec hidden = linear(cat, n, p.fc1);
  for (auto& v : hidden) v = gelu(v);
  return linear(hidden, n, p.fc2);
}

Vec brute_force_shift_mask(std::size_t h, std::size_t w, std::size_t window, std::size_t s) {
  const std::size_t t = window * window, nwx = w / window, nw = (h / window) * nwx;
  Vec mask(nw * t * t, 0.0);
  // After rolling by -s, rolled row y holds original row (y + s) mod h; it
  // arrived by wrapping around iff y + s >= h. Inside one window, two tokens
  // were neighbours before the roll iff they agree on wrapping along both axes.
  auto wrapped = [s](std::size_t i, std::size_t n) { return i + s >= n; };
  for (std::size_t wi = 0; wi < nw; ++wi) {
    const std::size_t oy = (wi / nwx) * window, ox = (wi % nwx) * window;
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < t; ++j) {
        const std::size_t yi = oy + i / window, xi = ox + i % window;
        const std::size_t yj = oy + j / window, xj = ox + j % window;
        if (wrapped(yi, h) != wrapped(yj, h) || wrapped(xi, w) != wrapped(xj, w)) mask[(wi * t + i) * t + j] = kMaskedLogit;
      }
  }
  return mask;
}

}  // namespace nasaswin::oracle
