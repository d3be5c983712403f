#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "egoact/manifest.hpp"
#include "egoact/rng.hpp"
#include "egoact/tensor.hpp"

namespace egoact {

/// Phase-1 merges each opposite-action pair into one class; phase-2 splits
/// them back and fine-tunes.
struct CurriculumSchedule {
  std::vector<std::pair<int, int>> merge_pairs;  // class indices
  int phase1_iterations = 0;
  int phase2_iterations = 0;

  bool active() const { return !merge_pairs.empty() && phase1_iterations > 0; }
};

struct MergeResult {
  LabelMap merged;
  std::vector<int> mapping;  // full class index -> merged class index
};

/// Each pair (a, b) becomes one class named "a+b" at the position of the
/// earlier member; unpaired classes keep their relative order. Throws on
/// out-of-range, self, or overlapping pairs.
MergeResult curriculum_merge(const LabelMap& labels,
                             const std::vector<std::pair<int, int>>& pairs);

/// Head split: row for full class c is a copy of merged row mapping[c] plus
/// gaussian noise (std noise_std) to break the pair symmetry.
void split_head(const Tensor<float>& merged_w, const Tensor<float>& merged_b,
                const std::vector<int>& mapping, int full_classes, double noise_std, Rng& rng,
                Tensor<float>& full_w, Tensor<float>& full_b);

/// Rebuilds `model` (SpliceClassifier or FrameClassifier) over the full
/// label set; encoder and recurrent parameters carry over bit-identical.
template <typename Model>
Model curriculum_split(const Model& merged_model, const std::vector<int>& mapping,
                       int full_classes, double noise_std, std::uint64_t seed) {
  if (merged_model.num_classes <= 0) throw std::invalid_argument("merged model has no head");
  for (int m : mapping) {
    if (m < 0 || m >= merged_model.num_classes) {
      throw std::invalid_argument("curriculum mapping references a class the merged head lacks");
    }
  }
  Model out = merged_model;
  out.num_classes = full_classes;
  Rng rng(derive_seed(seed, "curriculum/split"));
  split_head(merged_model.head_w, merged_model.head_b, mapping, full_classes, noise_std, rng,
             out.head_w, out.head_b);
  out.dhead_w = Tensor<float>(out.head_w.shape);
  out.dhead_b = Tensor<float>(out.head_b.shape);
  return out;
}

}  // namespace egoact
