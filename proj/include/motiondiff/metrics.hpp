#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "motiondiff/tensor.hpp"

namespace motiondiff {

// Samples and ground truth are [f x 3J] windows.

// Mean Euclidean distance over all ordered pairs of distinct samples,
// distances taken over the flattened sequence. Requires N >= 2.
double apd(std::span<const Tensor> samples);
// (1/f) min_i sum_t ||Z_i[t] - X[t]||: mean per-frame displacement of the
// closest sample.
double ade(std::span<const Tensor> samples, const Tensor& truth);
// min_i ||Z_i[f] - X[f]|| on the final frame.
double fde(std::span<const Tensor> samples, const Tensor& truth);

// members[i] lists the observations whose final observed frame lies within
// delta of observation i's (always including i itself).
struct MultimodalGroups {
  std::vector<std::vector<std::size_t>> members;
};

// observations are the observed windows [T x 3J]; only their last frame is used.
MultimodalGroups build_multimodal_groups(std::span<const Tensor> observations, double delta);

// Mean of ADE / FDE against every future in the group.
double mmade(std::span<const Tensor> samples, std::span<const Tensor> group_futures);
double mmfde(std::span<const Tensor> samples, std::span<const Tensor> group_futures);

struct EvalRecord {
  std::string obs_id;
  double apd = 0.0;
  double ade = 0.0;
  double fde = 0.0;
  double mmade = 0.0;
  double mmfde = 0.0;
};

// Scores every observation. futures/observations are indexed like
// predictions; APD is 0 for single-sample sets.
std::vector<EvalRecord> evaluate_predictions(const std::vector<std::vector<Tensor>>& predictions,
                                             std::span<const Tensor> observations, std::span<const Tensor> futures,
                                             const std::vector<std::string>& obs_ids, double delta);

EvalRecord mean_record(std::span<const EvalRecord> records);

// `obs_id,APD,ADE,FDE,MMADE,MMFDE` with 6 decimals and a closing `mean` row.
void write_eval_csv(std::ostream& out, std::span<const EvalRecord> records);

}  // namespace motiondiff
