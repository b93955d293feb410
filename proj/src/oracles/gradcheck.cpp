#include "nasaswin/oracles/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "nasaswin/attention.hpp"
#include "nasaswin/rng.hpp"

namespace nasaswin::oracle {

namespace {

struct Probed {
  double value;
  std::size_t crossings;
};

Probed evaluate(const std::function<Tensor()>& loss, std::vector<signed char>& signs) {
  NoGradGuard no_grad;
  SignProbe probe(SignProbe::Mode::Replay, signs);
  const double v = loss().item();
  return {v, probe.crossings()};
}

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit == 0 || limit >= n) return idx;
  for (std::size_t i = 0; i < limit; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport check_gradients(const std::function<Tensor()>& loss, const NamedTensors& params,
                                const GradCheckOptions& opts) {
  std::vector<std::vector<double>> analytic;
  std::vector<signed char> signs;
  {
    SignProbe probe(SignProbe::Mode::Record, signs);
    loss().backward();
  }
  for (const auto& [name, t] : params) {
    auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  GradCheckReport report;
  Rng rng(opts.sample_seed);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor param = params[p].second;
    const std::vector<double> original = param.to_vector();
    double scale = opts.floor;
    for (double a : analytic[p]) scale = std::max(scale, std::abs(a));
    struct Sample {
      std::size_t index;
      double numeric;
    };
    std::vector<Sample> samples;
    for (std::size_t i : pick_coords(original.size(), opts.max_coords_per_tensor, rng)) {
      auto values = original;
      values[i] = original[i] + opts.step;
      param.assign(values);
      const Probed plus = evaluate(loss, signs);
      values[i] = original[i] - opts.step;
      param.assign(values);
      const Probed minus = evaluate(loss, signs);
      param.assign(original);
      if (plus.crossings || minus.crossings) ++report.kink_crossings;
      samples.push_back({i, (plus.value - minus.value) / (2.0 * opts.step)});
      scale = std::max(scale, std::abs(samples.back().numeric));
    }
    for (const auto& [i, numeric] : samples) {
      const double a = analytic[p][i];
      const double rel = std::abs(a - numeric) / scale;
      ++report.checked;
      if (rel > report.max_rel_error || std::isnan(rel)) {
        report.max_rel_error = std::isnan(rel) ? INFINITY : rel;
        char buf[192];
        std::snprintf(buf, sizeof buf, "[%zu]: analytic %.9g vs numeric %.9g (tensor scale %.3g)", i, a, numeric,
                      scale);
        report.worst = params[p].first + buf;
      }
    }
  }
  report.passed = report.checked > 0 && report.max_rel_error < opts.tolerance;
  return report;
}

void merge_into(GradCheckReport& total, const GradCheckReport& part) {
  if (part.max_rel_error > total.max_rel_error) {
    total.max_rel_error = part.max_rel_error;
    total.worst = part.worst;
  }
  total.checked += part.checked;
  total.kink_crossings += part.kink_crossings;
  total.passed = total.passed && part.passed;
}

}  // namespace nasaswin::oracle
