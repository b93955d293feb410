#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "nasaswin/oracles/gradcheck.hpp"

namespace nasaswin::oracle {

struct Check {
  bool passed = true;
  std::string detail;
};

/// Central differences on every differentiable operation and composite
/// layer, one randomized instance per seed.
Check suite_gradcheck_ops(std::size_t seeds = 5, const GradCheckOptions& opts = {});
/// Full toy model (both branches), sampled coordinates of every parameter.
Check suite_gradcheck_model(std::size_t seeds = 5, std::size_t coords_per_tensor = 8);
/// matmul, conv, layer norm, softmax, cross-entropy, window attention,
/// patch merging, channel merge and CMFE against loop references.
Check suite_kernel_oracles();
/// Vectorized NASA attention against the loop composition for M in
/// {2,4,7} and heads in {1,2,4}, plus the 2x2 hand example.
Check suite_nasa_oracle(std::size_t trials = 20);
/// Window and shift roundtrips, shift-mask construction and leakage, and
/// the algebraic properties of nasa_attn_matrix.
Check suite_structural(std::size_t instances = 100);
/// Mask variant frequencies and subset validity over seeded draws.
Check suite_cms(std::size_t draws = 10000);
/// Group outputs of the fusion stem ignore channels of other groups.
Check suite_cmfe_groups();
/// FFT against the direct DFT, and Parseval.
Check suite_spectrum();
/// Checkpoint roundtrip; a corrupted magic must be rejected.
Check suite_checkpoint();
/// A deliberately wrong backward must be caught by the gradient checker.
Check suite_mutation();

struct Suite {
  std::string name;
  std::function<Check()> run;
};

std::vector<Suite> selftest_suites();

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs each suite, catching exceptions as failures, and prints a table.
std::vector<SuiteResult> run_suites(const std::vector<Suite>& suites, std::ostream& out);

/// Runs every suite; returns the process exit code (0 iff all pass).
int run_selftest(std::ostream& out);

}  // namespace nasaswin::oracle
