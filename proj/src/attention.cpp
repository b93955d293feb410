#include "nasaswin/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "nasaswin/ops.hpp"

namespace nasaswin {

namespace {

void check_grid(std::size_t height, std::size_t width, std::size_t window) {
  if (window == 0 || height % window != 0 || width % window != 0) {
    throw ConfigError("token grid " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by window " + std::to_string(window));
  }
}

void check_tokens(const Tensor& x, std::size_t height, std::size_t width) {
  if (x.dim() != 2 || x.size(0) != height * width) {
    throw DimensionError("expected [" + std::to_string(height * width) + ",C] tokens, got " + to_string(x.shape()));
  }
}

Tensor roll(const Tensor& x, std::size_t height, std::size_t width, std::size_t dy, std::size_t dx) {
  check_tokens(x, height, width);
  const std::size_t c = x.size(1);
  std::vector<std::size_t> index(x.numel());
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t xx = 0; xx < width; ++xx) {
      const std::size_t src = ((y + dy) % height) * width + (xx + dx) % width;
      for (std::size_t k = 0; k < c; ++k) index[(y * width + xx) * c + k] = src * c + k;
    }
  return gather(x, std::move(index), x.shape());
}

// Per-head [nW, T, d] slice of a [nW, T, n*C] projection.
Tensor head_slice(const Tensor& x, std::size_t offset, std::size_t head, std::size_t head_dim) {
  return slice(x, 2, offset + head * head_dim, offset + (head + 1) * head_dim);
}

thread_local SignProbe* t_probe = nullptr;

}  // namespace

SignProbe::SignProbe(Mode mode, std::vector<signed char>& signs) : mode_(mode), signs_(signs), previous_(t_probe) {
  if (mode_ == Mode::Record) signs_.clear();
  t_probe = this;
}

SignProbe::~SignProbe() { t_probe = previous_; }

double SignProbe::abs(double diff) {
  const signed char sign = diff > 0.0 ? 1 : (diff < 0.0 ? -1 : 0);
  if (mode_ == Mode::Record) {
    signs_.push_back(sign);
    return std::abs(diff);
  }
  if (cursor_ >= signs_.size()) throw std::logic_error("SignProbe replay ran past the recorded signs");
  const signed char recorded = signs_[cursor_++];
  if (recorded != sign) ++crossings_;
  return recorded * diff;
}

WindowGrid window_partition(const Tensor& x, std::size_t height, std::size_t width, std::size_t window,
                            std::size_t shift) {
  check_grid(height, width, window);
  check_tokens(x, height, width);
  const std::size_t c = x.size(1);
  const std::size_t nwy = height / window, nwx = width / window, t = window * window;
  std::vector<std::size_t> index(x.numel());
  std::size_t o = 0;
  for (std::size_t wy = 0; wy < nwy; ++wy)
    for (std::size_t wx = 0; wx < nwx; ++wx)
      for (std::size_t ty = 0; ty < window; ++ty)
        for (std::size_t tx = 0; tx < window; ++tx) {
          const std::size_t src = (wy * window + ty) * width + wx * window + tx;
          for (std::size_t k = 0; k < c; ++k) index[o++] = src * c + k;
        }
  return {gather(x, std::move(index), {nwy * nwx, t, c}), height, width, window, shift};
}

Tensor window_reverse(const WindowGrid& grid) {
  const std::size_t height = grid.height, width = grid.width, window = grid.window;
  check_grid(height, width, window);
  const auto& s = grid.tokens.shape();
  if (s.size() != 3 || s[0] != grid.num_windows() || s[1] != window * window) {
    throw DimensionError("window grid tokens " + to_string(s) + " inconsistent with " + std::to_string(height) + "x" +
                         std::to_string(width) + "/" + std::to_string(window));
  }
  const std::size_t c = s[2];
  const std::size_t nwx = width / window;
  std::vector<std::size_t> index(grid.tokens.numel());
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t w = (y / window) * nwx + x / window;
      const std::size_t t = (y % window) * window + x % window;
      for (std::size_t k = 0; k < c; ++k) index[(y * width + x) * c + k] = (w * window * window + t) * c + k;
    }
  return gather(grid.tokens, std::move(index), {height * width, c});
}

Tensor cyclic_shift(const Tensor& x, std::size_t height, std::size_t width, std::size_t s) {
  return roll(x, height, width, s % height, s % width);
}

Tensor cyclic_unshift(const Tensor& x, std::size_t height, std::size_t width, std::size_t s) {
  return roll(x, height, width, (height - s % height) % height, (width - s % width) % width);
}

AttnMask build_shift_mask(std::size_t height, std::size_t width, std::size_t window, std::size_t s) {
  check_grid(height, width, window);
  if (s >= window) throw ConfigError("shift " + std::to_string(s) + " must be smaller than window " + std::to_string(window));
  const std::size_t t = window * window;
  const std::size_t nwx = width / window, nw = (height / window) * nwx;
  std::vector<double> mask(nw * t * t, 0.0);
  if (s == 0) return {Tensor::from({nw, t, t}, std::move(mask))};

  // Slices [0, n-M), [n-M, n-s), [n-s, n) along each axis.
  auto band = [window, s](std::size_t i, std::size_t n) -> int {
    if (i < n - window) return 0;
    if (i < n - s) return 1;
    return 2;
  };
  std::vector<int> label(height * width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) label[y * width + x] = band(y, height) * 3 + band(x, width);

  for (std::size_t w = 0; w < nw; ++w) {
    const std::size_t oy = (w / nwx) * window, ox = (w % nwx) * window;
    for (std::size_t i = 0; i < t; ++i) {
      const int li = label[(oy + i / window) * width + ox + i % window];
      for (std::size_t j = 0; j < t; ++j) {
        const int lj = label[(oy + j / window) * width + ox + j % window];
        if (li != lj) mask[(w * t + i) * t + j] = kMaskedLogit;
      }
    }
  }
  return {Tensor::from({nw, t, t}, std::move(mask))};
}

std::vector<GridPos> window_positions(std::size_t window) {
  std::vector<GridPos> pos;
  pos.reserve(window * window);
  for (std::size_t y = 0; y < window; ++y)
    for (std::size_t x = 0; x < window; ++x) pos.push_back({static_cast<int>(y), static_cast<int>(x)});
  return pos;
}

Tensor nasa_attn_matrix(const Tensor& f, std::span<const GridPos> positions) {
  if (f.dim() != 2 && f.dim() != 3) throw DimensionError("nasa_attn_matrix expects [T,d] or [B,T,d], got " + to_string(f.shape()));
  const bool batched = f.dim() == 3;
  const std::size_t b = batched ? f.size(0) : 1;
  const std::size_t t = f.size(f.dim() - 2), d = f.size(f.dim() - 1);
  if (positions.size() != t) {
    throw DimensionError("nasa_attn_matrix: " + std::to_string(positions.size()) + " positions for " + std::to_string(t) +
                         " tokens");
  }
  // inv_rd[i,j] = 1 / (d * RD(i,j)), 0 on the diagonal.
  auto inv_rd = std::make_shared<std::vector<double>>(t * t, 0.0);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      if (i == j) continue;
      const double dy = positions[i].row - positions[j].row;
      const double dx = positions[i].col - positions[j].col;
      const double rd = std::sqrt(dy * dy + dx * dx);
      if (rd == 0.0) throw ConfigError("nasa_attn_matrix: duplicate token positions");
      (*inv_rd)[i * t + j] = 1.0 / (static_cast<double>(d) * rd);
    }
  auto fd = f.data();
  std::vector<double> out(b * t * t, 0.0);
  for (std::size_t n = 0; n < b; ++n) {
    const double* fb = fd.data() + n * t * d;
    double* ob = out.data() + n * t * t;
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = i + 1; j < t; ++j) {
        double ad = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = fb[i * d + k] - fb[j * d + k];
          ad += t_probe ? t_probe->abs(diff) : std::abs(diff);
        }
        ob[i * t + j] = ad * (*inv_rd)[i * t + j];
        ob[j * t + i] = ad * (*inv_rd)[j * t + i];
      }
  }
  Shape shape = batched ? Shape{b, t, t} : Shape{t, t};
  return Tensor::make_op(
      std::move(shape), std::move(out), {f},
      [f, inv_rd, b, t, d](std::span<const double> g, std::span<const std::span<double>> gi) {
        auto fd = f.data();
        for (std::size_t n = 0; n < b; ++n) {
          const double* fb = fd.data() + n * t * d;
          const double* gb = g.data() + n * t * t;
          double* gf = gi[0].data() + n * t * d;
          for (std::size_t i = 0; i < t; ++i)
            for (std::size_t j = 0; j < t; ++j) {
              if (i == j) continue;
              const double coef = gb[i * t + j] * (*inv_rd)[i * t + j];
              if (coef == 0.0) continue;
              for (std::size_t k = 0; k < d; ++k) {
                const double diff = fb[i * d + k] - fb[j * d + k];
                const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                gf[i * d + k] += coef * sgn;
                gf[j * d + k] -= coef * sgn;
              }
            }
        }
      },
      "nasa_attn_matrix");
}

WindowAttentionParams WindowAttentionParams::init(std::size_t dim, std::size_t heads, std::size_t window, Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
  }
  WindowAttentionParams p;
  p.dim = dim;
  p.heads = heads;
  p.window = window;
  p.qkv = Linear::init(dim, 3 * dim, rng);
  p.relative_bias = init_truncated_normal({(2 * window - 1) * (2 * window - 1), heads}, rng);
  p.proj = Linear::init(dim, dim, rng);
  return p;
}

void WindowAttentionParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  qkv.visit(prefix + ".qkv", fn);
  fn(prefix + ".relative_bias", relative_bias);
  proj.visit(prefix + ".proj", fn);
}

WindowGrid standard_window_attention(const WindowGrid& win, const WindowAttentionParams& p, const AttnMask& mask) {
  const auto& s = win.tokens.shape();
  const std::size_t t = win.window * win.window;
  if (s.size() != 3 || s[1] != t || s[2] != p.dim || win.window != p.window) {
    throw ConfigError("window attention configured for dim " + std::to_string(p.dim) + ", window " +
                      std::to_string(p.window) + " but got tokens " + to_string(s) + " with window " +
                      std::to_string(win.window));
  }
  if (mask.values.defined() && mask.values.shape() != Shape{s[0], t, t}) {
    throw DimensionError("attention mask " + to_string(mask.values.shape()) + " does not match windows " + to_string(s));
  }
  const std::size_t hd = p.dim / p.heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(hd));
  Tensor qkv = p.qkv(win.tokens);

  const std::size_t m = win.window, span = 2 * m - 1;
  std::vector<std::size_t> rel(t * t);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      const std::size_t dy = i / m + m - 1 - j / m;
      const std::size_t dx = i % m + m - 1 - j % m;
      rel[i * t + j] = dy * span + dx;
    }

  std::vector<Tensor> outs;
  outs.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    Tensor q = head_slice(qkv, 0, h, hd);
    Tensor k = head_slice(qkv, p.dim, h, hd);
    Tensor v = head_slice(qkv, 2 * p.dim, h, hd);
    std::vector<std::size_t> idx(t * t);
    for (std::size_t i = 0; i < t * t; ++i) idx[i] = rel[i] * p.heads + h;
    Tensor bias = gather(p.relative_bias, std::move(idx), {t, t});
    Tensor scores = add(scale(matmul(q, transpose(k)), scale_factor), bias);
    if (mask.values.defined()) scores = add(scores, mask.values);
    outs.push_back(matmul(softmax(scores, 2), v));
  }
  Tensor merged = p.heads == 1 ? outs[0] : concat(outs, 2);
  return {p.proj(merged), win.height, win.width, win.window, win.shift};
}

NasaParams NasaParams::init(std::size_t dim, std::size_t heads, HeadMix mix, Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("NASA dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
  }
  NasaParams p;
  p.dim = dim;
  p.heads = heads;
  p.mix = mix;
  p.value = Linear::init(dim, dim, rng);
  std::vector<double> eye(heads * heads, 0.0);
  for (std::size_t h = 0; h < heads; ++h) eye[h * heads + h] = 1.0;
  p.head_mix_weight = Tensor::from({heads, heads}, std::move(eye), true);
  p.head_mix_bias = Tensor::zeros({heads}, true);
  p.proj = Linear::init(dim, dim, rng);
  return p;
}

void NasaParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  value.visit(prefix + ".value", fn);
  fn(prefix + ".head_mix_weight", head_mix_weight);
  fn(prefix + ".head_mix_bias", head_mix_bias);
  proj.visit(prefix + ".proj", fn);
}

WindowGrid nasa_attention(const WindowGrid& win, const NasaParams& p, const AttnMask& mask) {
  const auto& s = win.tokens.shape();
  const std::size_t t = win.window * win.window;
  if (s.size() != 3 || s[1] != t || s[2] != p.dim) {
    throw ConfigError("NASA configured for dim " + std::to_string(p.dim) + " but got tokens " + to_string(s));
  }
  if (p.head_mix_weight.shape() != Shape{p.heads, p.heads} || p.head_mix_bias.numel() != p.heads) {
    throw ConfigError("NASA head-mix parameters do not match " + std::to_string(p.heads) + " heads");
  }
  const std::size_t nw = s[0];
  if (mask.values.defined() && mask.values.shape() != Shape{nw, t, t}) {
    throw DimensionError("attention mask " + to_string(mask.values.shape()) + " does not match windows " + to_string(s));
  }
  const std::size_t hd = p.dim / p.heads;
  const auto positions = window_positions(win.window);
  Tensor values = p.value(win.tokens);

  // Stack raw head matrices as [heads, nW*T*T] and mix across heads:
  // mixed[h'] = sum_h W[h', h] raw[h] + b[h'].
  std::vector<Tensor> raw;
  raw.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    raw.push_back(nasa_attn_matrix(head_slice(win.tokens, 0, h, hd), positions).reshape({1, nw * t * t}));
  }
  Tensor stacked = p.heads == 1 ? raw[0] : concat(raw, 0);
  Tensor weight = p.head_mix_weight;
  if (p.mix == HeadMix::PerHead) {
    std::vector<double> eye(p.heads * p.heads, 0.0);
    for (std::size_t h = 0; h < p.heads; ++h) eye[h * p.heads + h] = 1.0;
    weight = mul(weight, Tensor::from({p.heads, p.heads}, std::move(eye)));
  }
  Tensor mixed = transpose(add(matmul(transpose(stacked), transpose(weight)), p.head_mix_bias));

  std::vector<Tensor> outs;
  outs.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    Tensor scores = slice(mixed, 0, h, h + 1).reshape({nw, t, t});
    if (mask.values.defined()) scores = add(scores, mask.values);
    outs.push_back(matmul(softmax(scores, 2), head_slice(values, 0, h, hd)));
  }
  Tensor merged = p.heads == 1 ? outs[0] : concat(outs, 2);
  return {p.proj(merged), win.height, win.width, win.window, win.shift};
}

}  // namespace nasaswin
