#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hts/autodiff.hpp"
#include "hts/image.hpp"

namespace hts {

// Named parameter block with its SGD momentum buffer.
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> momentum;
};

// Activations of the last conv layer (post-relu): channels x height x width.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;
};

// Three-conv classifier: conv1 3->16 s1, conv2 16->32 s2, conv3 32->64 s2
// (all 3x3, relu), global average pool, dense 64->num_classes. On 32x32
// inputs the last conv layer has 8x8 spatial extent.
struct SmallCnn {
  int in_channels = 3;
  int num_classes = 10;
  uint64_t seed = 0;
  std::vector<Param> params;  // conv1.w, conv1.b, conv2.w, ..., dense.w, dense.b

  Param& param(const std::string& name);
  const Param& param(const std::string& name) const;
};

// He-style scaled uniform init, fully determined by seed. Biases zero.
SmallCnn init_model(uint64_t seed, int num_classes = 10, int in_channels = 3);

// Graph handles for one forward pass; leaves carry the gradients after
// backward().
struct ForwardGraph {
  ad::TensorPtr input;                      // N x C x H x W leaf
  std::vector<ad::TensorPtr> param_leaves;  // same order as model.params
  ad::TensorPtr features;                   // conv3 post-relu
  ad::TensorPtr logits;                     // N x num_classes
};

// Builds the forward graph on `tape`. `input_grad` marks the input leaf as
// differentiable (attacks need d loss / d input).
ForwardGraph forward(const SmallCnn& model, ad::Tape& tape, const std::vector<int>& input_shape,
                     std::vector<double> input_values, bool input_grad, bool param_grad);

// Inference-only logits for a batch of images (no gradients recorded).
std::vector<double> predict_logits(const SmallCnn& model, const std::vector<const Image*>& batch);
int predict_class(const SmallCnn& model, const Image& img);

FeatureMap extract_features(const SmallCnn& model, const Image& img);

double feature_mse_value(const FeatureMap& a, const FeatureMap& b);

// Checkpoint format (little-endian):
//   magic "HTSCKPT1", int32 in_channels, int32 num_classes, uint64 seed,
//   int32 param count, then per param: int32 name length, name bytes,
//   int32 ndims, int32 dims..., float64 values...
void save_checkpoint(const SmallCnn& model, const std::string& path);
SmallCnn load_checkpoint(const std::string& path);

}  // namespace hts
