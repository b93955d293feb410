#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nasaswin/model.hpp"
#include "nasaswin/noise.hpp"

namespace nasaswin {

struct TrainConfig {
  double lr = 0.001;
  double momentum = 0.0;
  std::size_t batch = 8;
  std::size_t epochs = 10;
  std::size_t max_steps = 0;  // 0: run all epochs
  std::uint64_t seed = 1;
  bool cms_enabled = true;
  std::size_t cms_max_subset = 3;
  /// Rescale the batch gradient to this global L2 norm when it is larger;
  /// 0 disables clipping.
  double clip_norm = 0.0;
  std::size_t threads = 0;  // 0: NASASWIN_THREADS / hardware default

  void validate() const;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DenoiserSpec denoiser;
  /// Sources excluded from Avg-Acc (in-domain subsets).
  std::vector<std::string> in_domain;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys are errors.
/// Keys: model.{depths,dims,heads,window,nasa_span,num_classes,input_size,
/// head_mix,mlp_ratio}, cmfe.embed_dim, train.{lr,momentum,batch,epochs,
/// max_steps,seed,threads,clip_norm}, cms.{enabled,max_subset}, data.denoiser,
/// eval.in_domain.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace nasaswin
