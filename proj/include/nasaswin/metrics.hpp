#pragma once

#include <map>
#include <string>
#include <vector>

namespace nasaswin {

struct Prediction {
  std::string source;
  int label = 0;
  double prob_generated = 0.0;

  /// Generated iff P(generated) > 0.5; an exact tie predicts genuine.
  int predicted() const { return prob_generated > 0.5 ? 1 : 0; }
};

struct SourceMetrics {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0, n = 0;
  double accuracy = 0.0;
};

struct Metrics {
  std::map<std::string, SourceMetrics> per_source;
  /// Sources averaged into avg_acc, sorted.
  std::vector<std::string> avg_sources;
  double avg_acc = 0.0;
  double overall_accuracy = 0.0;
  std::size_t n = 0;
};

/// Per-source confusion counts and accuracy. Avg-Acc is the unweighted mean
/// over all sources except those listed in `excluded` (in-domain subsets).
Metrics compute_metrics(const std::vector<Prediction>& predictions, const std::vector<std::string>& excluded = {});

/// CSV: source,n,tp,tn,fp,fn,accuracy then overall and avg_acc rows.
std::string metrics_csv(const Metrics& m);

/// Results table in the per-subset layout: one column per source (Acc %,
/// one decimal) followed by Avg-Acc, as GitHub-flavoured markdown.
std::string results_table(const Metrics& m, const std::string& method);

}  // namespace nasaswin
