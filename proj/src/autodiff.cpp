#include "hts/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hts::ad {

size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

[[noreturn]] void shape_fail(const char* op, const std::vector<int>& a, const std::vector<int>& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

TensorPtr make_output(std::vector<int> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values.assign(shape_numel(t->shape), 0.0);
  t->requires_grad = requires_grad;
  if (requires_grad) t->grad.assign(t->values.size(), 0.0);
  return t;
}

}  // namespace

TensorPtr Tape::leaf(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("leaf: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
  }
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  t->requires_grad = requires_grad;
  if (requires_grad) t->grad.assign(t->values.size(), 0.0);
  return t;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape) shape_fail("add", a->shape, b->shape);
  auto out = make_output(a->shape, a->requires_grad || b->requires_grad);
  for (size_t i = 0; i < out->size(); ++i) out->values[i] = a->values[i] + b->values[i];
  if (out->requires_grad) {
    record([a, b, out] {
      if (a->requires_grad)
        for (size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i];
      if (b->requires_grad)
        for (size_t i = 0; i < out->size(); ++i) b->grad[i] += out->grad[i];
    });
  }
  return out;
}

TensorPtr Tape::add_bias(const TensorPtr& x, const TensorPtr& b) {
  if (x->shape.size() != 2 || b->shape.size() != 1 || x->dim(1) != b->dim(0)) {
    shape_fail("add_bias", x->shape, b->shape);
  }
  const int n = x->dim(0), k = x->dim(1);
  auto out = make_output(x->shape, x->requires_grad || b->requires_grad);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j)
      out->values[static_cast<size_t>(i) * k + j] = x->values[static_cast<size_t>(i) * k + j] + b->values[j];
  if (out->requires_grad) {
    record([x, b, out, n, k] {
      if (x->requires_grad)
        for (size_t i = 0; i < out->size(); ++i) x->grad[i] += out->grad[i];
      if (b->requires_grad)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < k; ++j) b->grad[j] += out->grad[static_cast<size_t>(i) * k + j];
    });
  }
  return out;
}

TensorPtr Tape::mul(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape) shape_fail("mul", a->shape, b->shape);
  auto out = make_output(a->shape, a->requires_grad || b->requires_grad);
  for (size_t i = 0; i < out->size(); ++i) out->values[i] = a->values[i] * b->values[i];
  if (out->requires_grad) {
    record([a, b, out] {
      if (a->requires_grad)
        for (size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i] * b->values[i];
      if (b->requires_grad)
        for (size_t i = 0; i < out->size(); ++i) b->grad[i] += out->grad[i] * a->values[i];
    });
  }
  return out;
}

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->dim(1) != b->dim(0)) {
    shape_fail("matmul", a->shape, b->shape);
  }
  const int n = a->dim(0), k = a->dim(1), m = b->dim(1);
  auto out = make_output({n, m}, a->requires_grad || b->requires_grad);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < k; ++p) {
      double av = a->values[static_cast<size_t>(i) * k + p];
      const double* brow = &b->values[static_cast<size_t>(p) * m];
      double* orow = &out->values[static_cast<size_t>(i) * m];
      for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  if (out->requires_grad) {
    record([a, b, out, n, k, m] {
      if (a->requires_grad) {
        for (int i = 0; i < n; ++i)
          for (int p = 0; p < k; ++p) {
            double s = 0.0;
            const double* brow = &b->values[static_cast<size_t>(p) * m];
            const double* grow = &out->grad[static_cast<size_t>(i) * m];
            for (int j = 0; j < m; ++j) s += grow[j] * brow[j];
            a->grad[static_cast<size_t>(i) * k + p] += s;
          }
      }
      if (b->requires_grad) {
        for (int i = 0; i < n; ++i)
          for (int p = 0; p < k; ++p) {
            double av = a->values[static_cast<size_t>(i) * k + p];
            double* brow = &b->grad[static_cast<size_t>(p) * m];
            const double* grow = &out->grad[static_cast<size_t>(i) * m];
            for (int j = 0; j < m; ++j) brow[j] += av * grow[j];
          }
      }
    });
  }
  return out;
}

TensorPtr Tape::conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias, int stride) {
  if (x->shape.size() != 4 || w->shape.size() != 4 || x->dim(1) != w->dim(1)) {
    shape_fail("conv2d", x->shape, w->shape);
  }
  if (stride != 1 && stride != 2) throw ConfigError("conv2d: stride must be 1 or 2");
  const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  const int O = w->dim(0), KH = w->dim(2), KW = w->dim(3);
  if (KH % 2 == 0 || KW % 2 == 0) throw ConfigError("conv2d: kernel must be odd");
  if (bias && (bias->shape.size() != 1 || bias->dim(0) != O)) {
    shape_fail("conv2d bias", w->shape, bias->shape);
  }
  const int ph = KH / 2, pw = KW / 2;
  const int OH = (H + 2 * ph - KH) / stride + 1;
  const int OW = (W + 2 * pw - KW) / stride + 1;

  bool rg = x->requires_grad || w->requires_grad || (bias && bias->requires_grad);
  auto out = make_output({N, O, OH, OW}, rg);

  auto xv = [&](int n, int c) { return &x->values[((static_cast<size_t>(n) * C + c) * H) * W]; };
  auto ov = [&](int n, int o) { return &out->values[((static_cast<size_t>(n) * O + o) * OH) * OW]; };

  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < O; ++o) {
      double* op = ov(n, o);
      if (bias) {
        double bv = bias->values[o];
        for (int i = 0; i < OH * OW; ++i) op[i] = bv;
      }
      for (int c = 0; c < C; ++c) {
        const double* xp = xv(n, c);
        const double* wp = &w->values[((static_cast<size_t>(o) * C + c) * KH) * KW];
        for (int kh = 0; kh < KH; ++kh) {
          for (int kw = 0; kw < KW; ++kw) {
            double wv = wp[kh * KW + kw];
            if (wv == 0.0) continue;
            for (int oh = 0; oh < OH; ++oh) {
              int ir = oh * stride + kh - ph;
              if (ir < 0 || ir >= H) continue;
              const double* xrow = &xp[static_cast<size_t>(ir) * W];
              double* orow = &op[static_cast<size_t>(oh) * OW];
              // valid ow range: 0 <= ow*stride + kw - pw < W
              int lo = std::max(0, (pw - kw + stride - 1) / stride);
              int hi = std::min(OW, (W - 1 - kw + pw) / stride + 1);
              int ic0 = lo * stride + kw - pw;
              if (stride == 1) {
                for (int ow = lo; ow < hi; ++ow) orow[ow] += wv * xrow[ic0 + (ow - lo)];
              } else {
                for (int ow = lo; ow < hi; ++ow) orow[ow] += wv * xrow[ic0 + 2 * (ow - lo)];
              }
            }
          }
        }
      }
    }
  }

  if (rg) {
    record([x, w, bias, out, N, C, H, W, O, KH, KW, OH, OW, ph, pw, stride] {
      for (int n = 0; n < N; ++n) {
        for (int o = 0; o < O; ++o) {
          const double* gp = &out->grad[((static_cast<size_t>(n) * O + o) * OH) * OW];
          if (bias && bias->requires_grad) {
            double s = 0.0;
            for (int i = 0; i < OH * OW; ++i) s += gp[i];
            bias->grad[o] += s;
          }
          for (int c = 0; c < C; ++c) {
            const double* xp = &x->values[((static_cast<size_t>(n) * C + c) * H) * W];
            double* xg = x->requires_grad ? &x->grad[((static_cast<size_t>(n) * C + c) * H) * W] : nullptr;
            const double* wp = &w->values[((static_cast<size_t>(o) * C + c) * KH) * KW];
            double* wg = w->requires_grad ? &w->grad[((static_cast<size_t>(o) * C + c) * KH) * KW] : nullptr;
            for (int kh = 0; kh < KH; ++kh) {
              for (int kw = 0; kw < KW; ++kw) {
                double wv = wp[kh * KW + kw];
                double wgrad = 0.0;
                for (int oh = 0; oh < OH; ++oh) {
                  int ir = oh * stride + kh - ph;
                  if (ir < 0 || ir >= H) continue;
                  const double* grow = &gp[static_cast<size_t>(oh) * OW];
                  int lo = std::max(0, (pw - kw + stride - 1) / stride);
                  int hi = std::min(OW, (W - 1 - kw + pw) / stride + 1);
                  int ic0 = lo * stride + kw - pw;
                  const double* xrow = &xp[static_cast<size_t>(ir) * W];
                  if (wg) {
                    double s = 0.0;
                    for (int ow = lo; ow < hi; ++ow) s += grow[ow] * xrow[ic0 + stride * (ow - lo)];
                    wgrad += s;
                  }
                  if (xg) {
                    double* xgrow = &xg[static_cast<size_t>(ir) * W];
                    for (int ow = lo; ow < hi; ++ow) xgrow[ic0 + stride * (ow - lo)] += wv * grow[ow];
                  }
                }
                if (wg) wg[kh * KW + kw] += wgrad;
              }
            }
          }
        }
      }
    });
  }
  return out;
}

TensorPtr Tape::affine(const TensorPtr& x, double scale, double shift) {
  auto out = make_output(x->shape, x->requires_grad);
  for (size_t i = 0; i < out->size(); ++i) out->values[i] = scale * x->values[i] + shift;
  if (out->requires_grad) {
    record([x, out, scale] {
      for (size_t i = 0; i < out->size(); ++i) x->grad[i] += scale * out->grad[i];
    });
  }
  return out;
}

TensorPtr Tape::relu(const TensorPtr& x) {
  auto out = make_output(x->shape, x->requires_grad);
  for (size_t i = 0; i < out->size(); ++i) out->values[i] = x->values[i] > 0.0 ? x->values[i] : 0.0;
  if (out->requires_grad) {
    record([x, out] {
      for (size_t i = 0; i < out->size(); ++i)
        if (x->values[i] > 0.0) x->grad[i] += out->grad[i];
    });
  }
  return out;
}

TensorPtr Tape::max_pool2d(const TensorPtr& x) {
  if (x->shape.size() != 4 || x->dim(2) % 2 != 0 || x->dim(3) % 2 != 0) {
    throw ShapeError("max_pool2d: need N x C x even-H x even-W, got " + shape_str(x->shape));
  }
  const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  const int OH = H / 2, OW = W / 2;
  auto out = make_output({N, C, OH, OW}, x->requires_grad);
  auto argmax = std::make_shared<std::vector<size_t>>(out->size());
  size_t oi = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* xp = &x->values[((static_cast<size_t>(n) * C + c) * H) * W];
      size_t base = ((static_cast<size_t>(n) * C + c) * H) * W;
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow, ++oi) {
          size_t best = static_cast<size_t>(2 * oh) * W + 2 * ow;
          double bv = xp[best];
          // first-index-wins tie breaking for the gradient route
          const size_t cand[3] = {best + 1, best + W, best + W + 1};
          for (size_t idx : cand)
            if (xp[idx] > bv) { bv = xp[idx]; best = idx; }
          out->values[oi] = bv;
          (*argmax)[oi] = base + best;
        }
    }
  if (out->requires_grad) {
    record([x, out, argmax] {
      for (size_t i = 0; i < out->size(); ++i) x->grad[(*argmax)[i]] += out->grad[i];
    });
  }
  return out;
}

TensorPtr Tape::avg_pool2d(const TensorPtr& x, int kh, int kw) {
  if (x->shape.size() != 4 || kh <= 0 || kw <= 0 || x->dim(2) % kh != 0 || x->dim(3) % kw != 0) {
    throw ShapeError("avg_pool2d: window must tile " + shape_str(x->shape));
  }
  const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  const int OH = H / kh, OW = W / kw;
  const double inv = 1.0 / (kh * kw);
  auto out = make_output({N, C, OH, OW}, x->requires_grad);
  size_t oi = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* xp = &x->values[((static_cast<size_t>(n) * C + c) * H) * W];
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow, ++oi) {
          double s = 0.0;
          for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) s += xp[static_cast<size_t>(oh * kh + i) * W + ow * kw + j];
          out->values[oi] = s * inv;
        }
    }
  if (out->requires_grad) {
    record([x, out, N, C, H, W, OH, OW, kh, kw, inv] {
      size_t oi = 0;
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          double* xg = &x->grad[((static_cast<size_t>(n) * C + c) * H) * W];
          for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow, ++oi) {
              double g = out->grad[oi] * inv;
              for (int i = 0; i < kh; ++i)
                for (int j = 0; j < kw; ++j) xg[static_cast<size_t>(oh * kh + i) * W + ow * kw + j] += g;
            }
        }
    });
  }
  return out;
}

TensorPtr Tape::reshape(const TensorPtr& x, std::vector<int> shape) {
  if (shape_numel(shape) != x->size()) shape_fail("reshape", x->shape, shape);
  auto out = make_output(shape, x->requires_grad);
  out->values = x->values;
  if (out->requires_grad) {
    record([x, out] {
      for (size_t i = 0; i < out->size(); ++i) x->grad[i] += out->grad[i];
    });
  }
  return out;
}

TensorPtr Tape::sum(const TensorPtr& x) {
  auto out = make_output({1}, x->requires_grad);
  double s = 0.0;
  for (double v : x->values) s += v;
  out->values[0] = s;
  if (out->requires_grad) {
    record([x, out] {
      double g = out->grad[0];
      for (size_t i = 0; i < x->size(); ++i) x->grad[i] += g;
    });
  }
  return out;
}

TensorPtr Tape::softmax_cross_entropy(const TensorPtr& logits, const std::vector<int>& labels) {
  if (logits->shape.size() != 2 || static_cast<size_t>(logits->dim(0)) != labels.size()) {
    throw ShapeError("softmax_cross_entropy: logits " + shape_str(logits->shape) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const int N = logits->dim(0), K = logits->dim(1);
  for (int y : labels)
    if (y < 0 || y >= K) throw ShapeError("softmax_cross_entropy: label out of range");

  auto probs = std::make_shared<std::vector<double>>(logits->size());
  double total = 0.0;
  for (int i = 0; i < N; ++i) {
    const double* row = &logits->values[static_cast<size_t>(i) * K];
    double mx = *std::max_element(row, row + K);
    double z = 0.0;
    for (int j = 0; j < K; ++j) z += std::exp(row[j] - mx);
    for (int j = 0; j < K; ++j) (*probs)[static_cast<size_t>(i) * K + j] = std::exp(row[j] - mx) / z;
    total += -(row[labels[i]] - mx - std::log(z));
  }
  auto out = make_output({1}, logits->requires_grad);
  out->values[0] = total / N;
  if (out->requires_grad) {
    auto lbl = labels;
    record([logits, out, probs, lbl, N, K] {
      double g = out->grad[0] / N;
      for (int i = 0; i < N; ++i) {
        double* lg = &logits->grad[static_cast<size_t>(i) * K];
        const double* p = &(*probs)[static_cast<size_t>(i) * K];
        for (int j = 0; j < K; ++j) lg[j] += g * p[j];
        lg[lbl[i]] -= g;
      }
    });
  }
  return out;
}

void Tape::backward(const TensorPtr& loss) {
  if (consumed_) throw UsageError("backward: tape already consumed; build a fresh tape");
  if (loss->size() != 1) {
    throw UsageError("backward: loss must be scalar, got " + shape_str(loss->shape));
  }
  if (!loss->requires_grad) {
    throw UsageError("backward: loss does not require grad");
  }
  consumed_ = true;
  loss->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

}  // namespace hts::ad
