#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nasaswin/config.hpp"
#include "nasaswin/dataset.hpp"
#include "nasaswin/metrics.hpp"
#include "nasaswin/model.hpp"

namespace nasaswin {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plain SGD with optional heavy-ball momentum (v = mu v + g; p -= lr v).
class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
  /// `grads` follows the model's visit order.
  void step(NasaSwin& model, const std::vector<std::vector<double>>& grads);

 private:
  double lr_;
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

struct LossPoint {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double batch_accuracy = 0.0;
};

struct BatchResult {
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<std::vector<double>> grads;  // mean over the batch, visit order
};

/// Forward + backward over a batch. Each sample runs on its own parameter
/// replica; per-sample gradients are summed in batch order, so the result
/// is bit-identical for any worker count.
BatchResult compute_batch(const NasaSwin& model, const std::vector<const FusedInput*>& inputs,
                          const std::vector<int>& labels, std::size_t workers);

/// Scales every gradient by max_norm / ||g|| when the global L2 norm ||g||
/// exceeds max_norm. Returns the norm before scaling.
double clip_global_norm(std::vector<std::vector<double>>& grads, double max_norm);

struct TrainCallbacks {
  /// Called after each completed epoch (1-based).
  std::function<void(std::size_t epoch, NasaSwin& model)> on_epoch;
  std::function<void(const LossPoint&)> on_step;
};

/// Seeded shuffle per epoch, CMS per sample (one rng stream per sample
/// index and step) when enabled, cross-entropy, SGD. Throws TrainingError
/// naming the step on a non-finite loss.
std::vector<LossPoint> train(NasaSwin& model, const std::vector<Sample>& data, const TrainConfig& cfg,
                             const TrainCallbacks& callbacks = {});

/// Trains from a manifest and writes ckpt_epoch<N>.nsw, final.nsw and
/// loss_curve.csv under out_dir.
std::vector<LossPoint> train_to_dir(NasaSwin& model, const DatasetManifest& manifest, const RunConfig& cfg,
                                    const std::filesystem::path& out_dir);

std::string loss_curve_csv(const std::vector<LossPoint>& curve);

/// P(generated) per sample; never applies channel masks.
std::vector<Prediction> predict(const NasaSwin& model, const std::vector<Sample>& data, std::size_t workers);

/// Scores samples at threshold 0.5. Throws std::logic_error if any mask was
/// sampled while evaluating.
Metrics evaluate(const NasaSwin& model, const std::vector<Sample>& data, const std::vector<std::string>& excluded,
                 std::size_t workers);

}  // namespace nasaswin
