#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "hts/errors.hpp"

namespace hts::ad {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated iff requires_grad, same length as values
  bool requires_grad = false;

  size_t size() const { return values.size(); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
};

using TensorPtr = std::shared_ptr<Tensor>;

size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Reverse-mode tape. Primitives executed through a tape record their backward
// rule in execution order; backward() replays them in reverse. A tape and its
// tensors are a single-threaded unit of work.
class Tape {
 public:
  TensorPtr leaf(std::vector<int> shape, std::vector<double> values, bool requires_grad);
  TensorPtr constant(std::vector<int> shape, std::vector<double> values) {
    return leaf(std::move(shape), std::move(values), false);
  }

  TensorPtr add(const TensorPtr& a, const TensorPtr& b);        // same shape
  TensorPtr add_bias(const TensorPtr& x, const TensorPtr& b);   // N x K plus K
  TensorPtr mul(const TensorPtr& a, const TensorPtr& b);        // elementwise
  TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);     // (N x K)(K x M)
  // x: N x C x H x W, w: O x C x kh x kw (odd kernels), bias: O or null.
  // Zero same-padding (pad = k/2); stride 1 or 2.
  TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias, int stride);
  TensorPtr affine(const TensorPtr& x, double scale, double shift);  // scale*x + shift
  TensorPtr relu(const TensorPtr& x);
  TensorPtr max_pool2d(const TensorPtr& x);                     // 2x2, stride 2
  TensorPtr avg_pool2d(const TensorPtr& x, int kh, int kw);     // non-overlapping
  TensorPtr reshape(const TensorPtr& x, std::vector<int> shape);
  TensorPtr sum(const TensorPtr& x);                            // scalar
  // Mean cross-entropy over the batch; logits N x K. Scalar output.
  TensorPtr softmax_cross_entropy(const TensorPtr& logits, const std::vector<int>& labels);

  // Populates grad of every reachable requires_grad tensor with d loss/d t.
  // Throws UsageError on a non-scalar loss or a second call on the same tape.
  void backward(const TensorPtr& loss);

 private:
  std::vector<std::function<void()>> nodes_;
  bool consumed_ = false;

  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }
};

}  // namespace hts::ad
