#include "hts/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>

namespace hts {

Image::Image(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      data(static_cast<size_t>(h) * w * c, fill) {
  if (h <= 0 || w <= 0 || (c != 1 && c != 3)) {
    throw ConfigError("Image: invalid dimensions " + std::to_string(h) + "x" +
                      std::to_string(w) + "x" + std::to_string(c));
  }
}

double Image::sum() const {
  return std::accumulate(data.begin(), data.end(), 0.0);
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {}
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

int parse_positive_int(const std::string& tok, const char* what) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError(std::string("PNM header: bad ") + what + " '" + tok + "'");
  }
  long v = std::stol(tok);
  if (v <= 0 || v > 1 << 20) {
    throw ParseError(std::string("PNM header: out-of-range ") + what + " " + tok);
  }
  return static_cast<int>(v);
}

}  // namespace

Image load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  std::string magic = next_token(in);
  int channels;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw ParseError("PNM header: expected P5 or P6, got '" + magic + "'");
  }

  int width = parse_positive_int(next_token(in), "width");
  int height = parse_positive_int(next_token(in), "height");
  std::string maxval_tok = next_token(in);
  if (maxval_tok != "255") {
    throw ParseError("PNM header: unsupported maxval '" + maxval_tok + "' (only 255)");
  }
  // next_token consumed exactly one whitespace byte after the maxval;
  // the payload starts here.

  size_t n = static_cast<size_t>(width) * height * channels;
  std::vector<uint8_t> bytes(n);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) {
    throw ParseError("PNM payload truncated: expected " + std::to_string(n) +
                     " bytes, got " + std::to_string(in.gcount()));
  }

  Image img(height, width, channels);
  // Payload is pixel-interleaved; storage is planar.
  size_t k = 0;
  for (int r = 0; r < height; ++r)
    for (int col = 0; col < width; ++col)
      for (int c = 0; c < channels; ++c)
        img.at(c, r, col) = bytes[k++] / 255.0;
  return img;
}

void save_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");

  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";

  std::vector<uint8_t> bytes;
  bytes.reserve(img.size());
  for (int r = 0; r < img.height; ++r)
    for (int col = 0; col < img.width; ++col)
      for (int c = 0; c < img.channels; ++c) {
        double v = std::floor(img.at(c, r, col) * 255.0 + 0.5);  // round half up
        bytes.push_back(static_cast<uint8_t>(std::clamp(v, 0.0, 255.0)));
      }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

std::vector<LabeledExample> load_cifar10_batch(const std::string& path, size_t max_records) {
  constexpr size_t kRecord = 3073;  // 1 label byte + 32*32*3 planar RGB
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path);
  auto file_size = static_cast<size_t>(in.tellg());
  if (file_size % kRecord != 0) {
    throw ParseError("CIFAR-10 batch size " + std::to_string(file_size) +
                     " is not a multiple of 3073");
  }
  in.seekg(0);

  size_t available = file_size / kRecord;
  size_t count = std::min(max_records, available);
  std::vector<LabeledExample> out;
  out.reserve(count);
  std::vector<uint8_t> rec(kRecord);
  for (size_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(rec.data()), kRecord);
    LabeledExample ex;
    ex.label = rec[0];
    ex.image = Image(32, 32, 3);
    for (size_t k = 0; k < 3072; ++k) ex.image.data[k] = rec[1 + k] / 255.0;
    out.push_back(std::move(ex));
  }
  return out;
}

Image clamp_unit(Image img) {
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

}  // namespace hts
