#include "egoact/curriculum.hpp"

#include <stdexcept>

namespace egoact {

MergeResult curriculum_merge(const LabelMap& labels,
                             const std::vector<std::pair<int, int>>& pairs) {
  const int l = labels.size();
  std::vector<int> partner(l, -1);
  for (const auto& [a, b] : pairs) {
    if (a < 0 || a >= l || b < 0 || b >= l) {
      throw std::invalid_argument("curriculum pair references class out of range");
    }
    if (a == b) throw std::invalid_argument("curriculum pair merges a class with itself");
    if (partner[a] != -1 || partner[b] != -1) {
      throw std::invalid_argument("curriculum pairs overlap on class " +
                                  labels.names[partner[a] != -1 ? a : b]);
    }
    partner[a] = b;
    partner[b] = a;
  }

  MergeResult result;
  result.mapping.assign(l, -1);
  for (int c = 0; c < l; ++c) {
    if (result.mapping[c] != -1) continue;  // later pair member, already placed
    const int merged_index = result.merged.size();
    if (partner[c] == -1) {
      result.merged.names.push_back(labels.names[c]);
      result.mapping[c] = merged_index;
    } else {
      result.merged.names.push_back(labels.names[c] + "+" + labels.names[partner[c]]);
      result.mapping[c] = merged_index;
      result.mapping[partner[c]] = merged_index;
    }
  }
  return result;
}

void split_head(const Tensor<float>& merged_w, const Tensor<float>& merged_b,
                const std::vector<int>& mapping, int full_classes, double noise_std, Rng& rng,
                Tensor<float>& full_w, Tensor<float>& full_b) {
  if (merged_w.shape.size() != 2) throw std::invalid_argument("split_head: head must be (L,D)");
  if (static_cast<int>(mapping.size()) != full_classes) {
    throw std::invalid_argument("split_head: mapping length != full class count");
  }
  const int dim = merged_w.shape[1];

  full_w = Tensor<float>({full_classes, dim});
  full_b = Tensor<float>({full_classes});
  auto noise = [&]() {
    return noise_std > 0 ? static_cast<float>(noise_std * rng.normal()) : 0.0f;
  };
  for (int c = 0; c < full_classes; ++c) {
    const int m = mapping[c];
    if (m < 0 || m >= merged_w.shape[0]) {
      throw std::invalid_argument("split_head: mapping entry out of range");
    }
    for (int k = 0; k < dim; ++k) full_w.at2(c, k) = merged_w.at2(m, k) + noise();
    full_b[c] = merged_b[m] + noise();
  }
}

}  // namespace egoact
