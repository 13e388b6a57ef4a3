// Copyright 2026 The ScribbleSeg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "ssn/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace ssn::image_io {
namespace {

struct PnmHeader {
  int channels = 0;
  int width = 0;
  int height = 0;
  std::size_t payload_offset = 0;
};

PnmHeader parse_header(std::span<const std::uint8_t> b) {
  auto malformed = [](const std::string& why) {
    return IoError("malformed_header", "malformed PNM header: " + why);
  };
  if (b.size() < 2 || b[0] != 'P' || (b[1] != '5' && b[1] != '6')) {
    throw malformed("expected P5 or P6 magic");
  }
  PnmHeader h;
  h.channels = b[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  auto next_int = [&]() {
    for (;;) {
      while (pos < b.size() && std::isspace(b[pos])) ++pos;
      if (pos < b.size() && b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= b.size() || !std::isdigit(b[pos])) throw malformed("expected an integer field");
    long v = 0;
    while (pos < b.size() && std::isdigit(b[pos])) {
      v = v * 10 + (b[pos++] - '0');
      if (v > 1 << 20) throw malformed("field too large");
    }
    return static_cast<int>(v);
  };
  h.width = next_int();
  h.height = next_int();
  const int maxval = next_int();
  if (h.width <= 0 || h.height <= 0) throw malformed("non-positive dimensions");
  if (maxval != 255) throw malformed("only maxval 255 is supported");
  if (pos >= b.size() || !std::isspace(b[pos])) throw malformed("missing separator before payload");
  h.payload_offset = pos + 1;
  const std::size_t need = static_cast<std::size_t>(h.width) * h.height * h.channels;
  if (b.size() - h.payload_offset < need) throw IoError("truncated", "PNM payload is truncated");
  return h;
}

std::vector<std::uint8_t> header_bytes(char kind, int w, int h) {
  const std::string s = std::string("P") + kind + "\n" + std::to_string(w) + " " +
                        std::to_string(h) + "\n255\n";
  return {s.begin(), s.end()};
}

}  // namespace

std::vector<std::uint8_t> encode_image(const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
    throw ValidationError("shape_mismatch", "image must be [1,H,W] or [3,H,W]");
  }
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  auto out = header_bytes(c == 1 ? '5' : '6', w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        const float v = std::clamp(image.at(ch, y, x), 0.0f, 1.0f);
        out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
      }
    }
  }
  return out;
}

Tensor decode_image(std::span<const std::uint8_t> bytes) {
  const PnmHeader h = parse_header(bytes);
  Tensor t({h.channels, h.height, h.width});
  const std::uint8_t* p = bytes.data() + h.payload_offset;
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      for (int ch = 0; ch < h.channels; ++ch) t.at(ch, y, x) = static_cast<float>(*p++) / 255.0f;
    }
  }
  return t;
}

std::vector<std::uint8_t> encode_mask(const LabelMap& mask) {
  auto out = header_bytes('5', mask.width, mask.height);
  out.insert(out.end(), mask.labels.begin(), mask.labels.end());
  return out;
}

LabelMap decode_mask(std::span<const std::uint8_t> bytes) {
  const PnmHeader h = parse_header(bytes);
  if (h.channels != 1) throw IoError("malformed_header", "masks must be P5 grayscale");
  LabelMap m(h.height, h.width);
  std::copy_n(bytes.data() + h.payload_offset, m.size(), m.labels.begin());
  return m;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot_read", "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot_write", "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("cannot_write", "failed writing " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  const auto b = read_file(path);
  return {b.begin(), b.end()};
}

Tensor read_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }
void write_image(const std::filesystem::path& path, const Tensor& image) {
  write_file(path, encode_image(image));
}
LabelMap read_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }
void write_mask(const std::filesystem::path& path, const LabelMap& mask) {
  write_file(path, encode_mask(mask));
}

}  // namespace ssn::image_io
