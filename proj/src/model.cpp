#include "egoact/model.hpp"

#include <stdexcept>
#include <string>

namespace egoact {

void EncoderConfig::validate() const {
  if (input_channels < 1) throw std::invalid_argument("encoder: input_channels must be >= 1");
  if (input_size < 1) throw std::invalid_argument("encoder: input_size must be >= 1");
  if (blocks.empty()) throw std::invalid_argument("encoder: at least one conv block required");
  if (feature_dim < 1) throw std::invalid_argument("encoder: feature_dim must be >= 1");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const ConvBlockSpec& b = blocks[i];
    if (b.out_channels < 1 || b.kernel < 1 || b.stride < 1 || b.pool < 1) {
      throw std::invalid_argument("encoder: block " + std::to_string(i) +
                                  " has a non-positive field");
    }
    if (block_output_size(static_cast<int>(i)) < 1) {
      throw std::invalid_argument("encoder: block " + std::to_string(i) +
                                  " shrinks the input below 1 px");
    }
  }
}

int EncoderConfig::conv_size(int i) const {
  int size = input_size;
  for (int k = 0; k < i; ++k) {
    const ConvBlockSpec& b = blocks[k];
    size = (size + 2 * (b.kernel / 2) - b.kernel) / b.stride + 1;
    size = (size - 1) / b.pool + 1 - (b.pool - 1) / b.pool;
  }
  const ConvBlockSpec& b = blocks[i];
  return (size + 2 * (b.kernel / 2) - b.kernel) / b.stride + 1;
}

int EncoderConfig::block_output_size(int i) const {
  const int conv = conv_size(i);
  const int pool = blocks[i].pool;
  return (conv - 1) / pool + 1 - (pool - 1) / pool;
}

int EncoderConfig::flatten_length() const {
  const int last = static_cast<int>(blocks.size()) - 1;
  const int side = block_output_size(last);
  return blocks[last].out_channels * side * side;
}

// Anchor the common instantiations here so test TUs link fast.
template struct Encoder<float>;
template struct Encoder<double>;
template struct SpliceClassifier<float>;
template struct SpliceClassifier<double>;
template struct FrameClassifier<float>;
template struct FrameClassifier<double>;

template StreamOutput<float> forward_splice(const SpliceClassifier<float>&,
                                            const std::vector<Tensor<float>>&, bool,
                                            SpliceCache<float>*);
template StreamOutput<double> forward_splice(const SpliceClassifier<double>&,
                                             const std::vector<Tensor<double>>&, bool,
                                             SpliceCache<double>*);
template float splice_loss_and_grads(SpliceClassifier<float>&, const std::vector<Tensor<float>>&,
                                     bool, int, SpliceCache<float>&);
template double splice_loss_and_grads(SpliceClassifier<double>&,
                                      const std::vector<Tensor<double>>&, bool, int,
                                      SpliceCache<double>&);

}  // namespace egoact
