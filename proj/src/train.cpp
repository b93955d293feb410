#include "nasaswin/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "nasaswin/ops.hpp"
#include "nasaswin/parallel.hpp"

namespace nasaswin {

namespace {

std::size_t resolve_workers(std::size_t requested) { return requested ? requested : worker_count(); }

double prob_generated(const Tensor& logits) {
  Tensor p = softmax(logits, logits.dim() - 1);
  return p.data()[1];
}

}  // namespace

void SgdOptimizer::step(NasaSwin& model, const std::vector<std::vector<double>>& grads) {
  std::size_t i = 0;
  model.visit_params([&](const std::string& name, Tensor& p) {
    if (i >= grads.size() || grads[i].size() != p.numel()) {
      throw std::logic_error("gradient layout does not match parameter '" + name + "'");
    }
    const auto& g = grads[i];
    auto values = p.to_vector();
    if (momentum_ > 0.0) {
      if (velocity_.size() <= i) velocity_.resize(i + 1);
      auto& v = velocity_[i];
      if (v.size() != g.size()) v.assign(g.size(), 0.0);
      for (std::size_t k = 0; k < g.size(); ++k) {
        v[k] = momentum_ * v[k] + g[k];
        values[k] -= lr_ * v[k];
      }
    } else {
      for (std::size_t k = 0; k < g.size(); ++k) values[k] -= lr_ * g[k];
    }
    p.assign(std::move(values));
    ++i;
  });
}

BatchResult compute_batch(const NasaSwin& model, const std::vector<const FusedInput*>& inputs,
                          const std::vector<int>& labels, std::size_t workers) {
  const std::size_t b = inputs.size();
  if (b == 0 || labels.size() != b) throw std::invalid_argument("compute_batch: empty or mismatched batch");
  struct PerSample {
    double loss = 0.0;
    bool correct = false;
    std::vector<std::vector<double>> grads;
  };
  std::vector<PerSample> per(b);
  parallel_for(b, workers, [&](std::size_t i) {
    NasaSwin replica = model.replica();
    Tensor logits = replica.forward(*inputs[i]);
    Tensor loss = cross_entropy(logits, {labels[i]});
    loss.backward();
    per[i].loss = loss.item();
    per[i].correct = (prob_generated(logits) > 0.5 ? 1 : 0) == labels[i];
    replica.visit_params([&](const std::string&, Tensor& t) {
      auto g = t.grad();
      per[i].grads.emplace_back(g.begin(), g.end());
    });
  });
  BatchResult out;
  out.grads = std::move(per[0].grads);
  out.loss = per[0].loss;
  out.correct = per[0].correct ? 1 : 0;
  for (std::size_t i = 1; i < b; ++i) {
    out.loss += per[i].loss;
    out.correct += per[i].correct ? 1 : 0;
    for (std::size_t p = 0; p < out.grads.size(); ++p)
      for (std::size_t k = 0; k < out.grads[p].size(); ++k) out.grads[p][k] += per[i].grads[p][k];
  }
  const double inv = 1.0 / static_cast<double>(b);
  out.loss *= inv;
  for (auto& g : out.grads)
    for (auto& v : g) v *= inv;
  return out;
}

double clip_global_norm(std::vector<std::vector<double>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double k = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g) v *= k;
  }
  return norm;
}

std::vector<LossPoint> train(NasaSwin& model, const std::vector<Sample>& data, const TrainConfig& cfg,
                             const TrainCallbacks& callbacks) {
  cfg.validate();
  if (data.empty()) throw TrainingError("training set is empty");
  const std::size_t workers = resolve_workers(cfg.threads);
  SgdOptimizer opt(cfg.lr, cfg.momentum);
  std::vector<LossPoint> curve;
  std::vector<std::size_t> order(data.size());
  std::size_t step = 0;
  for (std::size_t epoch = 1; cfg.epochs == 0 || epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, epoch, 0x5348554646ULL));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      std::vector<FusedInput> masked;
      masked.reserve(end - start);
      std::vector<int> labels;
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = data[order[k]];
        if (cfg.cms_enabled) {
          Rng sample_rng(derive_seed(cfg.seed, step + 1, order[k]));
          masked.push_back(apply_mask(s.input, sample_mask(sample_rng, cfg.cms_max_subset)));
        } else {
          masked.push_back(s.input);
        }
        labels.push_back(s.label);
      }
      std::vector<const FusedInput*> inputs;
      for (const auto& m : masked) inputs.push_back(&m);

      BatchResult r = compute_batch(model, inputs, labels, workers);
      ++step;
      if (!std::isfinite(r.loss)) throw TrainingError("non-finite loss at step " + std::to_string(step));
      if (cfg.clip_norm > 0.0) clip_global_norm(r.grads, cfg.clip_norm);
      opt.step(model, r.grads);
      LossPoint pt{step, epoch, r.loss, static_cast<double>(r.correct) / static_cast<double>(labels.size())};
      curve.push_back(pt);
      if (callbacks.on_step) callbacks.on_step(pt);
      if (cfg.max_steps && step >= cfg.max_steps) return curve;
    }
    if (callbacks.on_epoch) callbacks.on_epoch(epoch, model);
  }
  return curve;
}

std::string loss_curve_csv(const std::vector<LossPoint>& curve) {
  std::ostringstream os;
  os << "step,epoch,loss,batch_accuracy\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.6f\n", p.step, p.epoch, p.loss, p.batch_accuracy);
    os << buf;
  }
  return os.str();
}

std::vector<LossPoint> train_to_dir(NasaSwin& model, const DatasetManifest& manifest, const RunConfig& cfg,
                                    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::size_t workers = resolve_workers(cfg.train.threads);
  auto samples = prepare_samples(manifest, cfg.model.input_height, cfg.model.input_width, cfg.denoiser, workers);
  TrainCallbacks cb;
  cb.on_epoch = [&](std::size_t epoch, NasaSwin& m) {
    save_checkpoint(out_dir / ("ckpt_epoch" + std::to_string(epoch) + ".nsw"), m);
  };
  auto curve = train(model, samples, cfg.train, cb);
  save_checkpoint(out_dir / "final.nsw", model);
  std::ofstream(out_dir / "loss_curve.csv") << loss_curve_csv(curve);
  return curve;
}

std::vector<Prediction> predict(const NasaSwin& model, const std::vector<Sample>& data, std::size_t workers) {
  std::vector<Prediction> out(data.size());
  parallel_for(data.size(), resolve_workers(workers), [&](std::size_t i) {
    NoGradGuard guard;
    out[i] = {data[i].source, data[i].label, prob_generated(model.forward(data[i].input))};
  });
  return out;
}

Metrics evaluate(const NasaSwin& model, const std::vector<Sample>& data, const std::vector<std::string>& excluded,
                 std::size_t workers) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty manifest");
  const auto before = mask_sample_count();
  auto preds = predict(model, data, workers);
  if (mask_sample_count() != before) throw std::logic_error("channel masks were sampled during evaluation");
  return compute_metrics(preds, excluded);
}

}  // namespace nasaswin
