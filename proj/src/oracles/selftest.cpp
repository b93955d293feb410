#include "nasaswin/oracles/selftest.hpp"

#include <unistd.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nasaswin/attention.hpp"
#include "nasaswin/checkpoint.hpp"
#include "nasaswin/fusion.hpp"
#include "nasaswin/model.hpp"
#include "nasaswin/noise.hpp"
#include "nasaswin/ops.hpp"
#include "nasaswin/oracles/oracles.hpp"

namespace nasaswin::oracle {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Accumulates named failures; the first few are kept for the report.
class Tally {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (ok) return;
    ++failed_;
    if (failures_.size() < 4) failures_.push_back(what);
  }
  void within(double err, double tol, const std::string& what) {
    worst_ = std::max(worst_, err);
    expect(err < tol, what + " err " + fmt("%.3g", err));
  }
  Check result(const std::string& summary) const {
    Check c;
    c.passed = failed_ == 0;
    std::ostringstream os;
    os << summary;
    if (worst_ > 0.0) os << "; worst " << fmt("%.2e", worst_);
    if (failed_) {
      os << "; " << failed_ << "/" << total_ << " failed:";
      for (const auto& f : failures_) os << " [" << f << "]";
    }
    c.detail = os.str();
    return c;
  }

 private:
  std::size_t total_ = 0, failed_ = 0;
  double worst_ = 0.0;
  std::vector<std::string> failures_;
};

void randomize(const NamedTensors& params, Rng& rng, double amplitude) {
  for (auto [name, t] : params) t.assign(random_vec(t.numel(), rng, -amplitude, amplitude));
}

template <typename P>
NamedTensors collect(P& p, const std::string& prefix) {
  NamedTensors out;
  p.visit(prefix, [&](const std::string& n, Tensor& t) { out.emplace_back(n, t); });
  return out;
}

Tensor weighted(const Tensor& out, const Tensor& r) { return sum(mul(out, r)); }

struct GradCase {
  std::string name;
  std::function<Tensor()> loss;
  NamedTensors params;
};

// One randomized instance of every differentiable building block.
std::vector<GradCase> grad_cases(Rng& rng) {
  std::vector<GradCase> cases;
  auto rt = [&rng](Shape s, bool grad = true) { return random_tensor(std::move(s), rng, grad); };

  {
    Tensor a = rt({3, 4}), b = rt({4}), r = rt({3, 4}, false);
    cases.push_back({"add", [=] { return weighted(add(a, b), r); }, {{"a", a}, {"b", b}}});
  }
  {
    Tensor a = rt({2, 3, 4}), b = rt({3, 4}), r = rt({2, 3, 4}, false);
    cases.push_back({"sub", [=] { return weighted(sub(a, b), r); }, {{"a", a}, {"b", b}}});
  }
  {
    Tensor a = rt({3, 4}), b = rt({3, 4}), c = rt({4}), r = rt({3, 4}, false);
    cases.push_back({"mul", [=] { return weighted(mul(mul(a, b), c), r); }, {{"a", a}, {"b", b}, {"c", c}}});
  }
  {
    Tensor a = rt({5}), r = rt({5}, false);
    cases.push_back({"scale", [=] { return weighted(scale(a, -1.7), r); }, {{"a", a}}});
  }
  {
    Tensor a = rt({2, 3, 4}), b = rt({2, 4, 5}), r = rt({2, 3, 5}, false);
    cases.push_back({"matmul_batched", [=] { return weighted(matmul(a, b), r); }, {{"a", a}, {"b", b}}});
  }
  {
    Tensor a = rt({2, 3, 4}), b = rt({4, 2}), c = rt({3, 3}), r1 = rt({2, 3, 2}, false), r2 = rt({2, 3, 4}, false);
    cases.push_back({"matmul_shared",
                     [=] { return add(weighted(matmul(a, b), r1), weighted(matmul(c, a), r2)); },
                     {{"a", a}, {"b", b}, {"c", c}}});
  }
  {
    Tensor a = rt({2, 3, 4}), r = rt({2, 4, 3}, false);
    cases.push_back({"transpose", [=] { return weighted(transpose(a), r); }, {{"a", a}}});
  }
  {
    Tensor a = rt({6}), r = rt({2, 4}, false);
    std::vector<std::size_t> idx{0, 5, 5, 2, 1, 0, 3, 3};
    cases.push_back({"gather", [=] { return weighted(gather(a, idx, {2, 4}), r); }, {{"a", a}}});
  }
  {
    Tensor a = rt({2, 3}), b = rt({2, 2}), r = rt({2, 5}, false);
    cases.push_back({"concat", [=] { return weighted(concat({a, b}, 1), r); }, {{"a", a}, {"b", b}}});
  }
  {
    Tensor a = rt({3, 5}), r = rt({3, 2}, false);
    cases.push_back({"slice", [=] { return weighted(slice(a, 1, 2, 4), r); }, {{"a", a}}});
  }
  {
    Tensor a = rt({3, 4}), r0 = rt({3, 4}, false), r1 = rt({3, 4}, false);
    cases.push_back({"softmax",
                     [=] { return add(weighted(softmax(a, 0), r0), weighted(softmax(a, 1), r1)); },
                     {{"a", a}}});
  }
  {
    Tensor x = rt({3, 5}), g = rt({5}), b = rt({5}), r = rt({3, 5}, false);
    cases.push_back({"layer_norm", [=] { return weighted(layer_norm(x, g, b), r); }, {{"x", x}, {"gamma", g}, {"beta", b}}});
  }
  {
    Tensor x = rt({7}), r = rt({7}, false);
    cases.push_back({"gelu", [=] { return weighted(gelu(x), r); }, {{"x", x}}});
  }
  {
    Tensor x = rt({6, 8, 8}), w = rt({6, 2, 4, 4}), b = rt({6}), r = rt({6, 2, 2}, false);
    cases.push_back({"conv2d_grouped",
                     [=] { return weighted(conv2d_grouped(x, w, b, {.stride = 4, .groups = 3, .padding = 0}), r); },
                     {{"x", x}, {"w", w}, {"b", b}}});
  }
  {
    Tensor x = rt({2, 5, 5}), w = rt({3, 2, 3, 3}), b = rt({3}), r = rt({3, 3, 3}, false);
    cases.push_back({"conv2d_padded",
                     [=] { return weighted(conv2d_grouped(x, w, b, {.stride = 2, .groups = 1, .padding = 1}), r); },
                     {{"x", x}, {"w", w}, {"b", b}}});
  }
  {
    Tensor z = random_tensor({4, 2}, rng, true, -2.0, 2.0);
    cases.push_back({"cross_entropy", [=] { return cross_entropy(z, {0, 1, 1, 0}); }, {{"logits", z}}});
  }
  {
    Tensor a = rt({2, 3, 4}), r = rt({2, 4}, false);
    cases.push_back({"reductions",
                     [=] { return add(add(sum(a), scale(mean(a), 3.0)), weighted(mean_axis(a, 1), r)); },
                     {{"a", a}}});
  }
  {
    Tensor a = rt({2, 6}), r = rt({3, 4}, false);
    cases.push_back({"reshape", [=] { return weighted(a.reshape({3, 4}), r); }, {{"a", a}}});
  }
  {
    Tensor f = rt({2, 4, 3}), r = rt({2, 4, 4}, false);
    const auto pos = window_positions(2);
    cases.push_back({"nasa_attn_matrix", [=] { return weighted(nasa_attn_matrix(f, pos), r); }, {{"f", f}}});
  }
  {
    Tensor x = rt({16, 3}), r = rt({16, 3}, false);
    cases.push_back({"window_ops",
                     [=] {
                       Tensor s = cyclic_shift(x, 4, 4, 1);
                       WindowGrid g = window_partition(s, 4, 4, 2, 1);
                       return weighted(cyclic_unshift(window_reverse(g), 4, 4, 1), r);
                     },
                     {{"x", x}}});
  }
  {
    auto p = WindowAttentionParams::init(4, 2, 2, rng);
    auto params = collect(p, "attn");
    randomize_params(params, rng);
    Tensor x = rt({16, 4}), r = rt({4, 4, 4}, false);
    params.emplace_back("x", x);
    const AttnMask mask = build_shift_mask(4, 4, 2, 1);
    cases.push_back({"window_attention",
                     [=] { return weighted(standard_window_attention(window_partition(x, 4, 4, 2, 1), p, mask).tokens, r); },
                     params});
  }
  for (HeadMix mix : {HeadMix::CrossHead, HeadMix::PerHead}) {
    auto p = NasaParams::init(6, 2, mix, rng);
    auto params = collect(p, "nasa");
    randomize_params(params, rng);
    Tensor x = rt({16, 6}), r = rt({4, 4, 6}, false);
    params.emplace_back("x", x);
    const AttnMask mask = build_shift_mask(4, 4, 2, 1);
    cases.push_back({mix == HeadMix::CrossHead ? "nasa_attention" : "nasa_attention_per_head",
                     [=] { return weighted(nasa_attention(window_partition(x, 4, 4, 2, 1), p, mask).tokens, r); },
                     params});
  }
  {
    auto p = PatchMergingParams::init(3, rng);
    auto params = collect(p, "merge");
    randomize_params(params, rng);
    Tensor x = rt({16, 3}), r = rt({4, 6}, false);
    params.emplace_back("x", x);
    cases.push_back({"patch_merging", [=] { return weighted(patch_merging(x, 4, 4, p), r); }, params});
  }
  {
    auto p = ChannelMergeParams::init(4, rng);
    auto params = collect(p, "cm");
    randomize_params(params, rng);
    Tensor a = rt({3, 4}), b = rt({3, 4}), r = rt({3, 4}, false);
    params.emplace_back("main", a);
    params.emplace_back("noise", b);
    cases.push_back({"channel_merge", [=] { return weighted(channel_merge(a, b, p), r); }, params});
  }
  {
    auto p = CmfeParams::init(5, rng);
    NamedTensors params{{"conv_weight", p.conv_weight},
                        {"conv_bias", p.conv_bias},
                        {"merge_weight", p.merge_weight},
                        {"merge_bias", p.merge_bias}};
    randomize_params(params, rng);
    Tensor x = rt({6, 8, 8}), r = rt({4, 5}, false);
    params.emplace_back("x", x);
    cases.push_back({"cmfe_embed", [=] { return weighted(cmfe_embed(FusedInput{x}, p), r); }, params});
  }
  for (AttentionKind kind : {AttentionKind::Standard, AttentionKind::Nasa}) {
    auto block = SwinBlock::init(kind, 8, 2, 4, 4, 2, true, HeadMix::CrossHead, 2, rng);
    auto params = collect(block, "block");
    randomize_params(params, rng);
    Tensor x = rt({16, 8}), r = rt({16, 8}, false);
    params.emplace_back("x", x);
    cases.push_back({kind == AttentionKind::Standard ? "swin_block" : "nasa_block",
                     [=] { return weighted(block.forward(x), r); }, params});
  }
  return cases;
}

}  // namespace

Check suite_gradcheck_ops(std::size_t seeds, const GradCheckOptions& opts) {
  GradCheckReport total;
  std::size_t cases = 0;
  std::string failed;
  for (std::size_t s = 0; s < seeds; ++s) {
    Rng rng(derive_seed(0x6772616473, s));
    for (auto& c : grad_cases(rng)) {
      auto o = opts;
      o.sample_seed = derive_seed(s, cases);
      const auto r = check_gradients(c.loss, c.params, o);
      if (!r.passed && failed.size() < 200) failed += " " + c.name + "(seed " + std::to_string(s) + ": " + r.worst + ")";
      merge_into(total, r);
      ++cases;
    }
  }
  Check out;
  out.passed = total.passed;
  out.detail = std::to_string(cases) + " cases, " + std::to_string(total.checked) + " coords (" +
               std::to_string(total.kink_crossings) + " across a kink), max rel err " +
               fmt("%.2e", total.max_rel_error);
  if (!failed.empty()) out.detail += "; failing:" + failed;
  return out;
}

Check suite_gradcheck_model(std::size_t seeds, std::size_t coords_per_tensor) {
  GradCheckReport total;
  std::size_t tensors = 0;
  for (std::size_t s = 0; s < seeds; ++s) {
    NasaSwin model = NasaSwin::init(ModelConfig::toy(), 100 + s);
    auto params = model.named_params();
    tensors = params.size();
    Rng rng(derive_seed(0x6d6f64656c, s));
    randomize_params(params, rng);
    std::vector<FusedInput> batch{FusedInput{random_tensor({6, 32, 32}, rng)},
                                  FusedInput{random_tensor({6, 32, 32}, rng)}};
    GradCheckOptions opts;
    opts.max_coords_per_tensor = coords_per_tensor;
    opts.sample_seed = s;
    const auto r = check_gradients([&] { return cross_entropy(model.forward(batch), {0, 1}); }, params, opts);
    merge_into(total, r);
  }
  Check out;
  out.passed = total.passed;
  out.detail = std::to_string(seeds) + " seeds x " + std::to_string(tensors) + " tensors, " +
               std::to_string(total.checked) + " coords (" + std::to_string(total.kink_crossings) +
               " across a kink), max rel err " + fmt("%.2e", total.max_rel_error);
  if (!total.passed) out.detail += "; worst " + total.worst;
  return out;
}

Check suite_kernel_oracles() {
  Tally t;
  Rng rng(0x6b65726e);
  for (std::size_t trial = 0; trial < 10; ++trial) {
    const std::size_t m = 1 + rng.below(16), k = 1 + rng.below(16), n = 1 + rng.below(16), b = 1 + rng.below(3);
    Tensor a = random_tensor({b, m, k}, rng), c = random_tensor({b, k, n}, rng);
    auto got = matmul(a, c).to_vector();
    auto av = a.to_vector(), cv = c.to_vector();
    for (std::size_t i = 0; i < b; ++i) {
      Vec ai(av.begin() + static_cast<std::ptrdiff_t>(i * m * k), av.begin() + static_cast<std::ptrdiff_t>((i + 1) * m * k));
      Vec ci(cv.begin() + static_cast<std::ptrdiff_t>(i * k * n), cv.begin() + static_cast<std::ptrdiff_t>((i + 1) * k * n));
      auto ref = matmul(ai, ci, m, k, n);
      t.within(max_abs_diff(std::span(got).subspan(i * m * n, m * n), ref), 1e-12, "matmul");
    }
  }
  {
    const std::size_t cfgs[][7] = {
        // c_in, h, w, c_out, k, stride, groups
        {6, 8, 8, 6, 4, 4, 3}, {6, 16, 16, 9, 4, 4, 3}, {4, 9, 7, 4, 3, 2, 2}, {3, 5, 5, 2, 1, 1, 1}, {2, 16, 16, 4, 5, 3, 1}};
    for (const auto& c : cfgs) {
      const std::size_t cin = c[0], h = c[1], w = c[2], cout = c[3], kk = c[4], st = c[5], g = c[6];
      Tensor x = random_tensor({cin, h, w}, rng), wt = random_tensor({cout, cin / g, kk, kk}, rng),
             bias = random_tensor({cout}, rng);
      auto got = conv2d_grouped(x, wt, bias, {.stride = st, .groups = g, .padding = 0});
      auto ref = conv2d_grouped(x.to_vector(), wt.to_vector(), bias.to_vector(), cin, h, w, cout, kk, kk, st, g);
      t.within(max_abs_diff(got.data(), ref), 1e-12, "conv2d_grouped");
    }
  }
  {
    Tensor x = random_tensor({5, 7}, rng), g = random_tensor({7}, rng), b = random_tensor({7}, rng);
    t.within(max_abs_diff(layer_norm(x, g, b).data(), layer_norm(x.to_vector(), g.to_vector(), b.to_vector(), 5, 7, 1e-5)),
             1e-12, "layer_norm");
    Tensor s = random_tensor({4, 6}, rng, false, -5.0, 5.0);
    t.within(max_abs_diff(softmax(s, 1).data(), softmax_rows(s.to_vector(), 4, 6)), 1e-12, "softmax");
    Tensor z = random_tensor({4, 2}, rng, false, -3.0, 3.0);
    const std::vector<int> labels{1, 0, 0, 1};
    t.within(std::abs(cross_entropy(z, labels).item() - cross_entropy(z.to_vector(), labels, 2)), 1e-12, "cross_entropy");
  }
  {
    auto p = WindowAttentionParams::init(6, 2, 2, rng);
    randomize(collect(p, "a"), rng, 1.0);
    Tensor x = random_tensor({4, 4, 6}, rng);
    for (std::size_t shift : {0u, 1u}) {
      const AttnMask mask = build_shift_mask(4, 4, 2, shift);
      auto got = standard_window_attention({x, 4, 4, 2, shift}, p, mask).tokens;
      auto ref = standard_window_attention(x.to_vector(), 4, 2, p, mask.values.to_vector());
      t.within(max_abs_diff(got.data(), ref), 1e-12, "window_attention");
    }
  }
  {
    auto p = PatchMergingParams::init(5, rng);
    randomize(collect(p, "m"), rng, 1.0);
    Tensor x = random_tensor({6 * 4, 5}, rng);
    t.within(max_abs_diff(patch_merging(x, 6, 4, p).data(), patch_merging(x.to_vector(), 6, 4, 5, p)), 1e-12,
             "patch_merging");
  }
  {
    auto p = ChannelMergeParams::init(5, rng);
    randomize(collect(p, "c"), rng, 1.0);
    Tensor a = random_tensor({7, 5}, rng), b = random_tensor({7, 5}, rng);
    t.within(max_abs_diff(channel_merge(a, b, p).data(), channel_merge(a.to_vector(), b.to_vector(), 7, 5, p)), 1e-12,
             "channel_merge");
  }
  {
    for (std::size_t c : {12u, 13u}) {
      auto p = CmfeParams::init(c, rng);
      randomize({{"w", p.conv_weight}, {"b", p.conv_bias}, {"mw", p.merge_weight}, {"mb", p.merge_bias}}, rng, 1.0);
      Tensor x = random_tensor({6, 16, 12}, rng);
      t.within(max_abs_diff(cmfe_embed(FusedInput{x}, p).data(), cmfe_embed(x.to_vector(), 16, 12, p)), 1e-12, "cmfe");
    }
  }
  return t.result("matmul/conv/norm/softmax/CE/attention/merging/CMFE vs loops");
}

Check suite_nasa_oracle(std::size_t trials) {
  Tally t;
  std::size_t runs = 0;
  for (std::size_t m : {2u, 4u, 7u})
    for (std::size_t heads : {1u, 2u, 4u})
      for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(derive_seed(m, heads, trial));
        const std::size_t dim = heads * (1 + rng.below(3));
        const HeadMix mix = trial % 3 == 2 ? HeadMix::PerHead : HeadMix::CrossHead;
        auto p = NasaParams::init(dim, heads, mix, rng);
        randomize(collect(p, "n"), rng, 1.0);
        const std::size_t side = 2 * m;
        const std::size_t shift = trial % 2 ? m / 2 : 0;
        const AttnMask mask = build_shift_mask(side, side, m, shift);
        Tensor x = random_tensor({side * side, dim}, rng);
        WindowGrid win = window_partition(cyclic_shift(x, side, side, shift), side, side, m, shift);
        auto got = nasa_attention(win, p, mask).tokens;
        auto ref = nasa_attention(win.tokens.to_vector(), win.num_windows(), m, p, mask.values.to_vector());
        t.within(max_abs_diff(got.data(), ref), 1e-10, "M=" + std::to_string(m) + " heads=" + std::to_string(heads));
        ++runs;
      }
  // f = [1,3,2,1] on a 2x2 grid, positions row-major.
  Tensor f = Tensor::from({4, 1}, {1, 3, 2, 1});
  auto a = nasa_attn_matrix(f, window_positions(2)).to_vector();
  const double r2 = 1.0 / std::sqrt(2.0);
  const Vec expected{0, 2, 1, 0, 2, 0, r2, 2, 1, r2, 0, 1, 0, 2, 1, 0};
  t.expect(a == expected, "hand example f=[1,3,2,1]");
  return t.result(std::to_string(runs) + " randomized windows + hand example");
}

Check suite_structural(std::size_t instances) {
  Tally t;
  Rng rng(0x737472);
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t m = 2 + rng.below(6);
    const std::size_t h = m * (1 + rng.below(3)), w = m * (1 + rng.below(3)), c = 1 + rng.below(5);
    Tensor x = random_tensor({h * w, c}, rng);
    t.expect(window_reverse(window_partition(x, h, w, m)).to_vector() == x.to_vector(), "partition/reverse");
    const std::size_t s = rng.below(m);
    t.expect(cyclic_unshift(cyclic_shift(x, h, w, s), h, w, s).to_vector() == x.to_vector(), "shift/unshift");

    const AttnMask mask = build_shift_mask(h, w, m, s);
    const auto mv = mask.values.to_vector();
    t.expect(mv == brute_force_shift_mask(h, w, m, s), "mask vs brute force");
    const std::size_t tt = m * m, nw = (h / m) * (w / m);
    bool symmetric = true;
    for (std::size_t k = 0; k < nw; ++k)
      for (std::size_t a = 0; a < tt; ++a)
        for (std::size_t b = 0; b < tt; ++b) symmetric &= mv[(k * tt + a) * tt + b] == mv[(k * tt + b) * tt + a];
    t.expect(symmetric, "mask symmetric");

    Tensor scores = random_tensor({nw, tt, tt}, rng, false, -5.0, 5.0);
    auto probs = softmax(add(scores, mask.values), 2).to_vector();
    double leak = 0.0, row_err = 0.0;
    for (std::size_t r = 0; r < nw * tt; ++r) {
      double z = 0.0;
      for (std::size_t j = 0; j < tt; ++j) {
        z += probs[r * tt + j];
        if (mv[r * tt + j] != 0.0) leak = std::max(leak, probs[r * tt + j]);
      }
      row_err = std::max(row_err, std::abs(z - 1.0));
    }
    t.within(leak, 1e-6, "mask leakage");
    t.expect(row_err < 1e-9, "masked rows sum to 1");

    const std::size_t d = 1 + rng.below(4);
    const auto pos = window_positions(m);
    Tensor f = random_tensor({tt, d}, rng);
    const auto attn = nasa_attn_matrix(f, pos).to_vector();
    bool sym = true, diag = true;
    for (std::size_t a = 0; a < tt; ++a) {
      diag &= attn[a * tt + a] == 0.0;
      for (std::size_t b = 0; b < tt; ++b) sym &= attn[a * tt + b] == attn[b * tt + a];
    }
    t.expect(sym, "nasa symmetric");
    t.expect(diag, "nasa zero diagonal");
    const double shift_c = rng.uniform(-3.0, 3.0);
    auto fv = f.to_vector();
    Vec shifted(fv), scaled(fv);
    const double gain = rng.uniform(1.0, 4.0);
    for (auto& v : shifted) v += shift_c;
    for (auto& v : scaled) v *= gain;
    const auto attn_t = nasa_attn_matrix(Tensor::from({tt, d}, shifted), pos).to_vector();
    const auto attn_s = nasa_attn_matrix(Tensor::from({tt, d}, scaled), pos).to_vector();
    Vec attn_gain(attn);
    for (auto& v : attn_gain) v *= gain;
    t.within(max_abs_diff(attn_t, attn), 1e-12, "translation invariance");
    t.within(max_abs_diff(attn_s, attn_gain), 1e-12, "1-homogeneity");
  }
  return t.result(std::to_string(instances) + " instances of window/shift/mask/NASA-matrix properties");
}

Check suite_cms(std::size_t draws) {
  Tally t;
  Rng rng(20240601);
  std::array<std::size_t, 4> counts{};
  std::array<std::size_t, 4> sizes{};
  for (std::size_t i = 0; i < draws; ++i) {
    const MaskChoice m = sample_mask(rng);
    ++counts[static_cast<std::size_t>(m.variant)];
    if (m.variant == MaskChoice::Variant::RandomChannels) {
      bool valid = true;
      try {
        m.validate();
      } catch (const std::exception&) {
        valid = false;
      }
      t.expect(valid, "subset " + m.to_string());
      ++sizes[m.subset.size()];
    }
  }
  std::string freq;
  for (std::size_t v = 0; v < 4; ++v) {
    const double f = static_cast<double>(counts[v]) / static_cast<double>(draws);
    freq += (v ? "/" : "") + fmt("%.4f", f);
    t.expect(std::abs(f - 0.25) <= 0.02, "variant " + std::to_string(v) + " frequency " + fmt("%.4f", f));
  }
  Rng a(7), b(7);
  bool same = true;
  for (int i = 0; i < 100; ++i) {
    const auto x = sample_mask(a), y = sample_mask(b);
    same &= x.variant == y.variant && x.subset == y.subset;
  }
  t.expect(same, "seeded sequence repeats");
  return t.result(std::to_string(draws) + " draws, frequencies " + freq + ", subset sizes " +
                  std::to_string(sizes[1]) + "/" + std::to_string(sizes[2]) + "/" + std::to_string(sizes[3]));
}

Check suite_cmfe_groups() {
  Tally t;
  Rng rng(0x636d6665);
  for (std::size_t trial = 0; trial < 10; ++trial) {
    auto p = CmfeParams::init(12 + trial % 3, rng);
    randomize({{"w", p.conv_weight}, {"b", p.conv_bias}}, rng, 1.0);
    Tensor x = random_tensor({6, 8, 8}, rng);
    const auto base = cmfe_group_outputs(FusedInput{x}, p).to_vector();
    const std::size_t per_group = p.group_dim * 4;
    for (std::size_t g = 0; g < 3; ++g) {
      auto xv = x.to_vector();
      for (std::size_t ch = 0; ch < 6; ++ch) {
        if (ch / 2 == g) continue;
        for (std::size_t i = 0; i < 64; ++i) xv[ch * 64 + i] += rng.uniform(-5.0, 5.0);
      }
      const auto out = cmfe_group_outputs(FusedInput{Tensor::from({6, 8, 8}, xv)}, p).to_vector();
      bool identical = true, changed = false;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (i / per_group == g) identical &= out[i] == base[i];
        else changed |= out[i] != base[i];
      }
      t.expect(identical, "group " + std::to_string(g) + " output moved");
      t.expect(changed, "other groups unaffected by their own channels");

      // The same statement through autodiff: zero gradient into foreign channels.
      Tensor xg = Tensor::from({6, 8, 8}, x.to_vector(), true);
      Tensor grouped = cmfe_group_outputs(FusedInput{xg}, p);
      sum(slice(grouped, 0, g * p.group_dim, (g + 1) * p.group_dim)).backward();
      auto grad = xg.grad();
      bool zero = true;
      for (std::size_t ch = 0; ch < 6; ++ch)
        if (ch / 2 != g)
          for (std::size_t i = 0; i < 64; ++i) zero &= grad[ch * 64 + i] == 0.0;
      t.expect(zero, "group " + std::to_string(g) + " gradient leaks");
    }
  }
  return t.result("3 groups x 10 trials, outputs bit-identical under foreign-channel perturbation");
}

Check suite_spectrum() {
  Tally t;
  Rng rng(0x666674);
  const std::size_t sizes[][2] = {{8, 8}, {4, 4}, {6, 10}, {16, 8}, {5, 3}};
  for (const auto& s : sizes) {
    const std::size_t h = s[0], w = s[1];
    Tensor x = random_tensor({h, w}, rng);
    const auto spec = fft2(x);
    const auto [re, im] = dft2(x.to_vector(), h, w);
    t.within(max_abs_diff(spec.real.data(), re), 1e-9, "fft real " + std::to_string(h) + "x" + std::to_string(w));
    t.within(max_abs_diff(spec.imag.data(), im), 1e-9, "fft imag");
    double energy = 0.0, spectral = 0.0;
    for (double v : x.data()) energy += v * v;
    auto r = spec.real.data();
    auto i = spec.imag.data();
    for (std::size_t k = 0; k < h * w; ++k) spectral += r[k] * r[k] + i[k] * i[k];
    spectral /= static_cast<double>(h * w);
    t.within(std::abs(energy - spectral) / energy, 1e-6, "parseval");
  }
  return t.result("FFT vs direct DFT on 5 sizes, Parseval");
}

Check suite_checkpoint() {
  Tally t;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("nasaswin_selftest_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  NasaSwin model = NasaSwin::init(ModelConfig::toy(), 5);
  Rng rng(11);
  FusedInput x{random_tensor({6, 32, 32}, rng)};
  save_checkpoint(dir / "a.nsw", model);
  NasaSwin loaded = load_checkpoint(dir / "a.nsw");
  {
    NoGradGuard g;
    t.expect(model.forward(x).to_vector() == loaded.forward(x).to_vector(), "roundtrip logits");
  }
  auto sa = model.state_dict(), sb = loaded.state_dict();
  bool same = sa.size() == sb.size();
  for (std::size_t i = 0; same && i < sa.size(); ++i) same = sa[i].name == sb[i].name && sa[i].values == sb[i].values;
  t.expect(same, "roundtrip parameters");

  std::string rejected;
  {
    std::fstream f(dir / "a.nsw", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  try {
    load_checkpoint(dir / "a.nsw");
  } catch (const CheckpointError& e) {
    rejected = e.what();
  }
  t.expect(!rejected.empty(), "corrupted magic accepted");
  fs::remove_all(dir);
  return t.result("save/load bit-identical; corrupted magic reported: " + (rejected.empty() ? "<none>" : rejected));
}

Check suite_mutation() {
  // mul whose backward into `a` has one sign flipped.
  auto buggy_mul = [](const Tensor& a, const Tensor& b) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return Tensor::make_op(
        a.shape(), std::move(out), {a, b},
        [a, b](std::span<const double> g, std::span<const std::span<double>> gi) {
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (!gi[0].empty()) gi[0][i] += (i == 0 ? -1.0 : 1.0) * g[i] * b.data()[i];
            if (!gi[1].empty()) gi[1][i] += g[i] * a.data()[i];
          }
        },
        "buggy_mul");
  };
  Rng rng(99);
  Tensor a = random_tensor({4}, rng, true), b = random_tensor({4}, rng, true), r = random_tensor({4}, rng);
  const auto report = check_gradients([&] { return weighted(buggy_mul(a, b), r); }, {{"a", a}, {"b", b}});
  Check c;
  c.passed = !report.passed;
  c.detail = std::string("flipped-sign backward ") + (report.passed ? "NOT detected" : "detected") + ", " + report.worst;
  return c;
}

std::vector<Suite> selftest_suites() {
  return {
      {"gradcheck-ops", [] { return suite_gradcheck_ops(); }},
      {"gradcheck-model", [] { return suite_gradcheck_model(); }},
      {"kernel-oracles", suite_kernel_oracles},
      {"nasa-oracle", [] { return suite_nasa_oracle(); }},
      {"structural", [] { return suite_structural(); }},
      {"cms-distribution", [] { return suite_cms(); }},
      {"cmfe-groups", suite_cmfe_groups},
      {"spectrum", suite_spectrum},
      {"checkpoint", suite_checkpoint},
      {"gradcheck-mutation", suite_mutation},
  };
}

std::vector<SuiteResult> run_suites(const std::vector<Suite>& suites, std::ostream& out) {
  std::vector<SuiteResult> results;
  for (const auto& s : suites) {
    SuiteResult r;
    r.name = s.name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      Check c = s.run();
      r.passed = c.passed;
      r.detail = c.detail;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char line[96];
    std::snprintf(line, sizeof line, "%-20s %-4s %7.2fs  ", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.seconds);
    out << line << r.detail << '\n' << std::flush;
    results.push_back(std::move(r));
  }
  return results;
}

int run_selftest(std::ostream& out) {
  out << "suite                result   time  detail\n";
  const auto results = run_suites(selftest_suites(), out);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  out << (failed ? std::to_string(failed) + " suite(s) failed\n" : "all suites passed\n");
  return failed ? 1 : 0;
}

}  // namespace nasaswin::oracle
