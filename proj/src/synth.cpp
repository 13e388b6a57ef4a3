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
#include "ssn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ssn/image_io.hpp"
#include "ssn/rng.hpp"

namespace ssn::synth {
namespace {

struct Ellipse {
  double cy, cx, ry, rx, angle;
  bool contains(double y, double x, double grow = 0) const {
    const double dy = y - cy, dx = x - cx;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = c * dx + s * dy, v = -s * dx + c * dy;
    const double a = rx + grow, b = ry + grow;
    return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
  }
};

// Smooth unit-variance field: white noise box-blurred twice.
std::vector<double> texture(Rng& rng, int h, int w, int radius) {
  std::vector<double> f(static_cast<std::size_t>(h) * w), tmp(f.size());
  for (double& v : f) v = rng.normal();
  auto blur = [&](int dy, int dx) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0;
        int n = 0;
        for (int t = -radius; t <= radius; ++t) {
          const int yy = y + t * dy, xx = x + t * dx;
          if (yy < 0 || xx < 0 || yy >= h || xx >= w) continue;
          s += f[yy * w + xx];
          ++n;
        }
        tmp[y * w + x] = s / n;
      }
    f.swap(tmp);
  };
  for (int pass = 0; pass < 2; ++pass) {
    blur(0, 1);
    blur(1, 0);
  }
  double mean = 0, var = 0;
  for (double v : f) mean += v;
  mean /= static_cast<double>(f.size());
  for (double v : f) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(f.size()));
  for (double& v : f) v = (v - mean) / sd;
  return f;
}

Sample render(const DatasetSpec& spec, std::uint64_t sample_seed) {
  Rng rng(sample_seed);
  const int h = spec.height, w = spec.width, k = spec.num_classes;
  const double scale = std::min(h, w) / 64.0;
  LabelMap gt(h, w, kBackground);

  Ellipse organ{rng.uniform(0.38, 0.62) * h, rng.uniform(0.38, 0.62) * w,
                rng.uniform(0.15, 0.24) * h, rng.uniform(0.19, 0.30) * w,
                rng.uniform(0.0, std::numbers::pi)};
  if (k > kOrgan) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (organ.contains(y, x)) gt.at(y, x) = kOrgan;
  }

  const bool tumors = k > kTumor && spec.tag != Distribution::kUnseenShape;
  const int n_tumors = rng.uniform_int(1, 2);
  const double tumor_mean =
      rng.uniform(spec.class_means[std::min(kTumor, k - 1)] - spec.tumor_spread,
                  spec.class_means[std::min(kTumor, k - 1)] + spec.tumor_spread);
  for (int t = 0; t < n_tumors; ++t) {
    const double r = rng.uniform(2.5, 5.5) * scale;
    const double ang = rng.uniform(0.0, 2 * std::numbers::pi);
    const double rad = rng.uniform(0.0, 0.55);
    if (!tumors) continue;
    const double c = std::cos(organ.angle), s = std::sin(organ.angle);
    const double u = rad * organ.rx * std::cos(ang), v = rad * organ.ry * std::sin(ang);
    const double ty = organ.cy + s * u + c * v, tx = organ.cx + c * u - s * v;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dy = y - ty, dx = x - tx;
        if (dy * dy + dx * dx <= r * r && gt.at(y, x) == kOrgan) gt.at(y, x) = kTumor;
      }
  }

  if (k > kVessel) {
    const double y0 = rng.uniform(0.1, 0.9) * h, y2 = rng.uniform(0.1, 0.9) * h;
    const double y1 = rng.uniform(0.0, 1.0) * h, x1 = rng.uniform(0.3, 0.7) * w;
    const bool vertical = rng.uniform() < 0.5;
    const double radius = rng.uniform(1.3, 2.1) * scale;
    for (int i = 0; i <= 400; ++i) {
      const double t = i / 400.0;
      double py = (1 - t) * (1 - t) * y0 + 2 * (1 - t) * t * y1 + t * t * y2;
      double px = (1 - t) * (1 - t) * (-2.0) + 2 * (1 - t) * t * x1 + t * t * (w + 1.0);
      if (vertical) std::swap(py, px);
      const int y_lo = std::max(0, static_cast<int>(std::floor(py - radius)));
      const int y_hi = std::min(h - 1, static_cast<int>(std::ceil(py + radius)));
      const int x_lo = std::max(0, static_cast<int>(std::floor(px - radius)));
      const int x_hi = std::min(w - 1, static_cast<int>(std::ceil(px + radius)));
      for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
          const double dy = y - py, dx = x - px;
          if (dy * dy + dx * dx <= radius * radius && gt.at(y, x) != kTumor) gt.at(y, x) = kVessel;
        }
    }
  }

  double rect_mean = spec.rect_mean;
  if (spec.tag == Distribution::kUnseenShape) {
    const int rh = static_cast<int>(rng.uniform(8, 14) * scale);
    const int rw = static_cast<int>(rng.uniform(8, 14) * scale);
    for (int attempt = 0; attempt < 200; ++attempt) {
      const int y0 = rng.uniform_int(1, h - rh - 1), x0 = rng.uniform_int(1, w - rw - 1);
      bool clear = true;
      for (int y = y0 - 1; y < y0 + rh + 1 && clear; ++y)
        for (int x = x0 - 1; x < x0 + rw + 1 && clear; ++x)
          if (organ.contains(y, x, 1.0)) clear = false;
      if (!clear) continue;
      for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x) gt.at(y, x) = kTumor;
      break;
    }
  }

  const double jitter = 0.02;
  std::vector<double> means(spec.class_means.begin(), spec.class_means.begin() + k);
  for (double& m : means) m += jitter * rng.normal();
  if (tumors) means[kTumor] = tumor_mean;
  if (spec.tag == Distribution::kUnseenShape && k > kTumor) means[kTumor] = rect_mean;
  const double by = rng.uniform(-spec.bias_amplitude, spec.bias_amplitude);
  const double bx = rng.uniform(-spec.bias_amplitude, spec.bias_amplitude);

  const std::vector<double> tex = texture(rng, h, w, spec.texture_radius);
  Tensor img({1, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = means[gt.at(y, x)] + by * (2.0 * y / h - 1.0) + bx * (2.0 * x / w - 1.0) +
                 spec.texture_sigma * tex[y * w + x] + spec.noise_sigma * rng.normal();
      if (spec.tag == Distribution::kShifted) v = 0.5 + spec.contrast * (v - 0.5) + spec.shift;
      img.at(0, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return {std::move(img), std::move(gt)};
}

}  // namespace

std::string to_string(Distribution d) {
  switch (d) {
    case Distribution::kA: return "A";
    case Distribution::kShifted: return "B-shifted";
    case Distribution::kUnseenShape: return "unseen-shape";
  }
  return "A";
}

Distribution distribution_from_string(const std::string& s) {
  if (s == "A") return Distribution::kA;
  if (s == "B-shifted" || s == "B") return Distribution::kShifted;
  if (s == "unseen-shape") return Distribution::kUnseenShape;
  throw ValidationError("unknown_distribution", "unknown distribution tag '" + s + "'");
}

void DatasetSpec::validate() const {
  if (count < 0 || height < 8 || width < 8 || num_classes < 2 || num_classes > 4 ||
      static_cast<int>(class_means.size()) < num_classes || noise_sigma < 0 ||
      texture_sigma < 0 || texture_radius < 1 || texture_radius > 16 || tumor_spread < 0) {
    throw ValidationError("invalid_spec", "invalid dataset spec");
  }
  if (tag == Distribution::kUnseenShape && num_classes < 3) {
    throw ValidationError("invalid_spec", "unseen-shape data needs K >= 3");
  }
}

nlohmann::json DatasetSpec::to_json() const {
  return {{"count", count},           {"height", height},
          {"width", width},           {"K", num_classes},
          {"class_means", class_means}, {"noise_sigma", noise_sigma}, {"texture_sigma", texture_sigma},
          {"texture_radius", texture_radius}, {"tumor_spread", tumor_spread},
          {"bias_amplitude", bias_amplitude}, {"tag", synth::to_string(tag)},
          {"shift", shift},           {"contrast", contrast},
          {"rect_mean", rect_mean},   {"first_index", first_index}};
}

DatasetSpec DatasetSpec::from_json(const nlohmann::json& j) {
  DatasetSpec s;
  s.count = j.value("count", s.count);
  if (j.contains("size")) s.height = s.width = j["size"].get<int>();
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.num_classes = j.value("K", s.num_classes);
  s.class_means = j.value("class_means", s.class_means);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.texture_sigma = j.value("texture_sigma", s.texture_sigma);
  s.texture_radius = j.value("texture_radius", s.texture_radius);
  s.tumor_spread = j.value("tumor_spread", s.tumor_spread);
  s.bias_amplitude = j.value("bias_amplitude", s.bias_amplitude);
  if (j.contains("tag")) s.tag = distribution_from_string(j["tag"].get<std::string>());
  s.shift = j.value("shift", s.shift);
  s.contrast = j.value("contrast", s.contrast);
  s.rect_mean = j.value("rect_mean", s.rect_mean);
  s.first_index = j.value("first_index", s.first_index);
  s.validate();
  return s;
}

Dataset generate(const DatasetSpec& spec, std::uint64_t seed) {
  spec.validate();
  Dataset out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    out.push_back(render(spec, derive_seed(seed, static_cast<std::uint64_t>(spec.first_index + i))));
  }
  return out;
}

Split standard_split(DatasetSpec spec, std::uint64_t seed, int train_count, int val_count) {
  Split s;
  spec.first_index = 0;
  spec.count = train_count;
  s.train = generate(spec, seed);
  spec.first_index = train_count;
  spec.count = val_count;
  s.validation = generate(spec, seed);
  return s;
}

std::vector<std::uint64_t> class_histogram(const Dataset& data, int num_classes) {
  std::vector<std::uint64_t> h(static_cast<std::size_t>(num_classes));
  for (const auto& s : data)
    for (auto l : s.gt.labels) ++h.at(l);
  return h;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data, const DatasetSpec& spec,
                   std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot_write", "cannot create " + dir.string());
  nlohmann::json images = nlohmann::json::array(), masks = nlohmann::json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%03zu", i);
    const std::string ext = data[i].image.dim(0) == 3 ? ".ppm" : ".pgm";
    image_io::write_image(dir / ("image_" + std::string(name) + ext), data[i].image);
    image_io::write_mask(dir / ("mask_" + std::string(name) + ".pgm"), data[i].gt);
    images.push_back("image_" + std::string(name) + ext);
    masks.push_back("mask_" + std::string(name) + ".pgm");
  }
  nlohmann::json manifest = {{"images", images},
                             {"masks", masks},
                             {"K", spec.num_classes},
                             {"tag", to_string(spec.tag)},
                             {"seed", seed}};
  image_io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedDataset read_dataset(const std::filesystem::path& dir) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(image_io::read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad_manifest", std::string("manifest.json: ") + e.what());
  }
  LoadedDataset out;
  try {
    out.num_classes = m.at("K").get<int>();
    out.tag = m.value("tag", std::string("A"));
    out.seed = m.value("seed", std::uint64_t{0});
    const auto& images = m.at("images");
    const auto& masks = m.at("masks");
    if (images.size() != masks.size()) {
      throw ValidationError("bad_manifest", "manifest image/mask counts differ");
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
      Sample s{image_io::read_image(dir / images[i].get<std::string>()),
               image_io::read_mask(dir / masks[i].get<std::string>())};
      out.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad_manifest", std::string("manifest.json: ") + e.what());
  }
  return out;
}

}  // namespace ssn::synth
