#include "hts/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace hts {

Param& SmallCnn::param(const std::string& name) {
  for (auto& p : params)
    if (p.name == name) return p;
  throw UsageError("no parameter named " + name);
}

const Param& SmallCnn::param(const std::string& name) const {
  return const_cast<SmallCnn*>(this)->param(name);
}

namespace {

Param make_param(std::mt19937_64& rng, std::string name, std::vector<int> shape, int fan_in) {
  Param p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  size_t n = ad::shape_numel(p.shape);
  p.values.resize(n);
  p.momentum.assign(n, 0.0);
  double limit = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : p.values) v = dist(rng);
  return p;
}

Param make_zero_param(std::string name, std::vector<int> shape) {
  Param p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  size_t n = ad::shape_numel(p.shape);
  p.values.assign(n, 0.0);
  p.momentum.assign(n, 0.0);
  return p;
}

}  // namespace

SmallCnn init_model(uint64_t seed, int num_classes, int in_channels) {
  SmallCnn m;
  m.in_channels = in_channels;
  m.num_classes = num_classes;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  m.params.push_back(make_param(rng, "conv1.w", {16, in_channels, 3, 3}, in_channels * 9));
  m.params.push_back(make_zero_param("conv1.b", {16}));
  m.params.push_back(make_param(rng, "conv2.w", {32, 16, 3, 3}, 16 * 9));
  m.params.push_back(make_zero_param("conv2.b", {32}));
  m.params.push_back(make_param(rng, "conv3.w", {64, 32, 3, 3}, 32 * 9));
  m.params.push_back(make_zero_param("conv3.b", {64}));
  m.params.push_back(make_param(rng, "dense.w", {64, num_classes}, 64));
  m.params.push_back(make_zero_param("dense.b", {num_classes}));
  return m;
}

ForwardGraph forward(const SmallCnn& model, ad::Tape& tape, const std::vector<int>& input_shape,
                     std::vector<double> input_values, bool input_grad, bool param_grad) {
  if (input_shape.size() != 4 || input_shape[1] != model.in_channels) {
    throw ShapeError("forward: expected N x " + std::to_string(model.in_channels) +
                     " x H x W input, got " + ad::shape_str(input_shape));
  }
  ForwardGraph g;
  g.input = tape.leaf(input_shape, std::move(input_values), input_grad);
  for (const auto& p : model.params) {
    g.param_leaves.push_back(tape.leaf(p.shape, p.values, param_grad));
  }
  auto& pl = g.param_leaves;
  // Fixed input normalization: map [0,1] intensities to [-1,1].
  auto x = tape.affine(g.input, 2.0, -1.0);
  auto h1 = tape.relu(tape.conv2d(x, pl[0], pl[1], 1));
  auto h2 = tape.relu(tape.conv2d(h1, pl[2], pl[3], 2));
  g.features = tape.relu(tape.conv2d(h2, pl[4], pl[5], 2));
  int fh = g.features->dim(2), fw = g.features->dim(3);
  auto pooled = tape.avg_pool2d(g.features, fh, fw);
  auto flat = tape.reshape(pooled, {g.features->dim(0), 64});
  g.logits = tape.add_bias(tape.matmul(flat, pl[6]), pl[7]);
  return g;
}

std::vector<double> predict_logits(const SmallCnn& model, const std::vector<const Image*>& batch) {
  if (batch.empty()) return {};
  int n = static_cast<int>(batch.size());
  int c = batch[0]->channels, h = batch[0]->height, w = batch[0]->width;
  std::vector<double> values;
  values.reserve(static_cast<size_t>(n) * c * h * w);
  for (const Image* img : batch) values.insert(values.end(), img->data.begin(), img->data.end());
  ad::Tape tape;
  auto g = forward(model, tape, {n, c, h, w}, std::move(values), false, false);
  return g.logits->values;
}

int predict_class(const SmallCnn& model, const Image& img) {
  auto logits = predict_logits(model, {&img});
  int best = 0;
  for (int j = 1; j < model.num_classes; ++j)
    if (logits[j] > logits[best]) best = j;
  return best;
}

FeatureMap extract_features(const SmallCnn& model, const Image& img) {
  ad::Tape tape;
  auto g = forward(model, tape, {1, img.channels, img.height, img.width}, img.data, false, false);
  FeatureMap fm;
  fm.channels = g.features->dim(1);
  fm.height = g.features->dim(2);
  fm.width = g.features->dim(3);
  fm.data = g.features->values;
  return fm;
}

double feature_mse_value(const FeatureMap& a, const FeatureMap& b) {
  if (a.data.size() != b.data.size()) throw ShapeError("feature_mse: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("checkpoint truncated");
  return v;
}

constexpr char kMagic[8] = {'H', 'T', 'S', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void save_checkpoint(const SmallCnn& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, 8);
  write_raw(out, static_cast<int32_t>(model.in_channels));
  write_raw(out, static_cast<int32_t>(model.num_classes));
  write_raw(out, static_cast<uint64_t>(model.seed));
  write_raw(out, static_cast<int32_t>(model.params.size()));
  for (const auto& p : model.params) {
    write_raw(out, static_cast<int32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_raw(out, static_cast<int32_t>(p.shape.size()));
    for (int d : p.shape) write_raw(out, static_cast<int32_t>(d));
    out.write(reinterpret_cast<const char*>(p.values.data()),
              static_cast<std::streamsize>(p.values.size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

SmallCnn load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw ParseError("not a checkpoint file: " + path);
  SmallCnn m;
  m.in_channels = read_raw<int32_t>(in);
  m.num_classes = read_raw<int32_t>(in);
  m.seed = read_raw<uint64_t>(in);
  int32_t count = read_raw<int32_t>(in);
  if (count < 0 || count > 1024) throw ParseError("checkpoint: bad parameter count");
  for (int i = 0; i < count; ++i) {
    Param p;
    int32_t name_len = read_raw<int32_t>(in);
    if (name_len < 0 || name_len > 256) throw ParseError("checkpoint: bad name length");
    p.name.resize(static_cast<size_t>(name_len));
    in.read(p.name.data(), name_len);
    int32_t ndims = read_raw<int32_t>(in);
    if (ndims < 1 || ndims > 8) throw ParseError("checkpoint: bad rank");
    for (int d = 0; d < ndims; ++d) p.shape.push_back(read_raw<int32_t>(in));
    size_t n = ad::shape_numel(p.shape);
    p.values.resize(n);
    in.read(reinterpret_cast<char*>(p.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ParseError("checkpoint truncated in parameter " + p.name);
    p.momentum.assign(n, 0.0);
    m.params.push_back(std::move(p));
  }
  return m;
}

}  // namespace hts
