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
#include "ssn/segnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "ssn/metrics.hpp"
#include "ssn/ops.hpp"
#include "ssn/rng.hpp"

namespace ssn {
namespace {

enum class Source { kImage, kPrevious, kPooled, kUpsampled };

struct StageInfo {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  Source source = Source::kPrevious;
  int skip = -1;  // stage whose output is added before the relu
  bool relu = true;
};

std::vector<StageInfo> layout(const SegNetConfig& c) {
  std::vector<StageInfo> s;
  const int d = c.depth;
  for (int i = 0; i < d; ++i) {
    const std::string p = "enc" + std::to_string(i);
    s.push_back({p + ".conv1", i == 0 ? c.in_channels : c.width_at(i - 1), c.width_at(i), 3,
                 i == 0 ? Source::kImage : Source::kPooled});
    s.push_back({p + ".conv2", c.width_at(i), c.width_at(i), 3, Source::kPrevious});
  }
  s.push_back({"bottleneck.conv1", d == 0 ? c.in_channels : c.width_at(d - 1), c.width_at(d), 3,
               d == 0 ? Source::kImage : Source::kPooled});
  s.push_back({"bottleneck.conv2", c.width_at(d), c.width_at(d), 3, Source::kPrevious});
  for (int i = d - 1; i >= 0; --i) {
    s.push_back({"dec" + std::to_string(i) + ".conv", c.width_at(i + 1), c.width_at(i), 3,
                 Source::kUpsampled, 2 * i + 1});
  }
  s.push_back({"head", c.width_at(0), c.num_classes, 1, Source::kPrevious, -1, false});
  return s;
}

template <typename T>
void accumulate(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
const BasicTensor<T>& stage_input(const ForwardTape<T>& tape, const std::vector<StageInfo>& info,
                                  int j) {
  switch (info[j].source) {
    case Source::kImage: return tape.image;
    case Source::kPooled: return tape.pooled[j];
    case Source::kUpsampled: return tape.upsampled[j];
    case Source::kPrevious: break;
  }
  return tape.outputs[j - 1];
}

void check_groups(const SegNetConfig& config, std::size_t n) {
  if (n != static_cast<std::size_t>(config.group_count())) {
    throw ValidationError("shape_mismatch", "expected " + std::to_string(config.group_count()) +
                                                " parameter groups, got " + std::to_string(n));
  }
}

}  // namespace

void SegNetConfig::validate() const {
  if (in_channels < 1 || base_width < 1 || depth < 0 || num_classes < 2 || num_classes > 255) {
    throw ValidationError("invalid_config",
                          "segnet config needs in_channels>=1, base_width>=1, depth>=0, "
                          "2<=num_classes<=255");
  }
}

void SegNetConfig::validate_image(const Shape& s) const {
  const int m = 1 << depth;
  if (s.size() != 3 || s[0] != in_channels || s[1] % m || s[2] % m) {
    throw ValidationError("shape_mismatch", "image shape " + to_string(s) + " incompatible with " +
                                                std::to_string(in_channels) +
                                                "-channel net of depth " + std::to_string(depth));
  }
}

void TrainConfig::validate() const {
  if (epochs < 0 || learning_rate <= 0 || batch_size < 1) {
    throw ValidationError("invalid_config", "train config needs epochs>=0, lr>0, batch_size>=1");
  }
}

Model init_model(const SegNetConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Model m{config, {}};
  for (const StageInfo& s : layout(config)) {
    ParamGroup<float> g{s.name, Tensor({s.out_channels, s.in_channels, s.kernel, s.kernel}),
                        Tensor({s.out_channels})};
    const double std_dev = std::sqrt(2.0 / (s.in_channels * s.kernel * s.kernel));
    for (float& w : g.weight.data()) w = static_cast<float>(std_dev * rng.normal());
    m.groups.push_back(std::move(g));
  }
  return m;
}

template <typename T>
BasicTensor<T> forward(const SegNetConfig& config, const GroupRefs<T>& groups,
                       const BasicTensor<T>& image, ForwardTape<T>& tape, int start_stage) {
  check_groups(config, groups.size());
  const auto info = layout(config);
  const int n = static_cast<int>(info.size());
  if (start_stage < 0 || start_stage > tape.stages_done || start_stage >= n) {
    throw ValidationError("stale_tape", "forward tape does not cover the requested start stage");
  }
  if (start_stage == 0) {
    config.validate_image(image.shape());
    require_finite(image, "image");
    tape.image = image;
    tape.pooled.assign(n, {});
    tape.upsampled.assign(n, {});
    tape.pool_argmax.assign(n, {});
    tape.outputs.assign(n, {});
  }
  for (int j = start_stage; j < n; ++j) {
    const StageInfo& s = info[j];
    if (s.source == Source::kPooled) {
      auto pr = ops::maxpool2x2_forward(tape.outputs[j - 1]);
      tape.pooled[j] = std::move(pr.output);
      tape.pool_argmax[j] = std::move(pr.argmax);
    } else if (s.source == Source::kUpsampled) {
      tape.upsampled[j] = ops::upsample2x_nearest_forward(tape.outputs[j - 1]);
    }
    BasicTensor<T> y = ops::conv2d_forward(stage_input(tape, info, j), groups[j]->weight,
                                           groups[j]->bias);
    if (s.skip >= 0) accumulate(y, tape.outputs[s.skip]);
    if (s.relu) {
      for (T& v : y.data()) v = v > T(0) ? v : T(0);
    }
    tape.outputs[j] = std::move(y);
  }
  tape.stages_done = n;
  return tape.outputs[n - 1];
}

template <typename T>
BasicTensor<T> forward(const BasicModel<T>& model, const BasicTensor<T>& image) {
  ForwardTape<T> tape;
  return forward(model.config, group_refs(model), image, tape, 0);
}

template <typename T>
std::vector<GroupGrad<T>> backward(const SegNetConfig& config, const GroupRefs<T>& groups,
                                   const ForwardTape<T>& tape, const BasicTensor<T>& grad_logits,
                                   int first_group) {
  check_groups(config, groups.size());
  const auto info = layout(config);
  const int n = static_cast<int>(info.size());
  if (tape.stages_done != n) throw ValidationError("stale_tape", "backward needs a full forward tape");
  if (first_group < 0 || first_group >= n) {
    throw ValidationError("invalid_layer_count", "first trainable group out of range");
  }
  if (grad_logits.shape() != tape.outputs[n - 1].shape()) {
    throw ValidationError("shape_mismatch", "grad_logits shape does not match logits");
  }
  std::vector<GroupGrad<T>> grads(n);
  std::vector<BasicTensor<T>> d_out(n);
  d_out[n - 1] = grad_logits;
  for (int j = n - 1; j >= first_group; --j) {
    const StageInfo& s = info[j];
    BasicTensor<T> g = s.relu ? ops::relu_backward(tape.outputs[j], d_out[j]) : d_out[j];
    d_out[j] = {};
    if (s.skip >= first_group && s.skip >= 0) accumulate(d_out[s.skip], g);
    const bool need_input = j > first_group;
    auto cg = ops::conv2d_backward(stage_input(tape, info, j), groups[j]->weight, g, need_input);
    grads[j] = {std::move(cg.kernel), std::move(cg.bias)};
    if (!need_input) continue;
    switch (s.source) {
      case Source::kPrevious: accumulate(d_out[j - 1], cg.input); break;
      case Source::kPooled:
        accumulate(d_out[j - 1], ops::maxpool2x2_backward(tape.pool_argmax[j],
                                                          tape.outputs[j - 1].shape(), cg.input));
        break;
      case Source::kUpsampled:
        accumulate(d_out[j - 1], ops::upsample2x_nearest_backward(cg.input));
        break;
      case Source::kImage: break;
    }
  }
  return grads;
}

template BasicTensor<float> forward(const SegNetConfig&, const GroupRefs<float>&,
                                    const BasicTensor<float>&, ForwardTape<float>&, int);
template BasicTensor<double> forward(const SegNetConfig&, const GroupRefs<double>&,
                                     const BasicTensor<double>&, ForwardTape<double>&, int);
template BasicTensor<float> forward(const BasicModel<float>&, const BasicTensor<float>&);
template BasicTensor<double> forward(const BasicModel<double>&, const BasicTensor<double>&);
template std::vector<GroupGrad<float>> backward(const SegNetConfig&, const GroupRefs<float>&,
                                                const ForwardTape<float>&,
                                                const BasicTensor<float>&, int);
template std::vector<GroupGrad<double>> backward(const SegNetConfig&, const GroupRefs<double>&,
                                                 const ForwardTape<double>&,
                                                 const BasicTensor<double>&, int);

TrainResult pretrain(Model model, std::span<const Sample> data, const TrainConfig& config) {
  config.validate();
  TrainResult result{std::move(model), {}};
  if (config.epochs == 0) return result;
  if (data.empty()) throw ValidationError("empty_dataset", "pretraining needs at least one sample");
  Model& m = result.model;
  const int k = m.config.num_classes;
  for (const Sample& s : data) {
    m.config.validate_image(s.image.shape());
    for (auto l : s.gt.labels) {
      if (l >= k) throw ValidationError("label_out_of_range", "training label >= K");
    }
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  const float lr = static_cast<float>(config.learning_rate);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.next_u64() % i]);
    }
    double loss_sum = 0, dice_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const auto refs = group_refs(m);
      std::vector<GroupGrad<float>> total;
      for (std::size_t b = start; b < end; ++b) {
        const Sample& s = data[order[b]];
        ForwardTape<float> tape;
        const Tensor probs = ops::softmax_channels(forward(m.config, refs, s.image, tape));
        const auto targets = ops::all_pixels(s.gt);
        auto ce = ops::masked_cross_entropy(probs, std::span<const ops::LabeledPixel>(targets));
        if (!std::isfinite(ce->loss)) {
          throw NumericalError("training_diverged",
                               "non-finite training loss at epoch " + std::to_string(epoch));
        }
        loss_sum += ce->loss;
        dice_sum += mean_dice(ops::argmax_channels(probs), s.gt, k);
        auto g = backward(m.config, refs, tape, ce->grad_logits, 0);
        if (total.empty()) {
          total = std::move(g);
        } else {
          for (std::size_t j = 0; j < g.size(); ++j) {
            accumulate(total[j].weight, g[j].weight);
            accumulate(total[j].bias, g[j].bias);
          }
        }
      }
      const float step = lr / static_cast<float>(end - start);
      for (std::size_t j = 0; j < total.size(); ++j) {
        ops::sgd_update(m.groups[j].weight, total[j].weight, step);
        ops::sgd_update(m.groups[j].bias, total[j].bias, step);
      }
    }
    const auto n = static_cast<double>(data.size());
    result.curve.push_back({epoch, loss_sum / n, dice_sum / n});
  }
  return result;
}

std::string training_curve_csv(const std::vector<EpochStats>& curve) {
  std::ostringstream os;
  os.precision(9);
  os << "epoch,loss,mean_dice\n";
  for (const auto& e : curve) os << e.epoch << ',' << e.loss << ',' << e.mean_dice << '\n';
  return os.str();
}

// ---- weight files ----------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'S', 'N', 'W'};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    u32(bits);
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}
  std::size_t remaining() const { return b_.size() - pos_; }
  void need(std::size_t n) const {
    if (remaining() < n) throw IoError("truncated", "weight file is truncated");
  }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_weight_file(const std::vector<NamedTensor>& tensors) {
  ByteWriter w;
  w.bytes(kMagic, 4);
  w.u32(kWeightFileVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    if (nt.name.size() > 0xFFFF) throw ValidationError("name_too_long", "tensor name too long");
    w.u16(static_cast<std::uint16_t>(nt.name.size()));
    w.bytes(nt.name.data(), nt.name.size());
    w.u8(static_cast<std::uint8_t>(nt.tensor.rank()));
    for (int d : nt.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float f : nt.tensor.data()) w.f32(f);
  }
  return w.take();
}

std::vector<NamedTensor> decode_weight_file(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError("bad_magic", "bad magic: not an SSNW weight file");
  }
  r.str(4);
  const std::uint32_t version = r.u32();
  if (version != kWeightFileVersion) {
    throw IoError("version_mismatch", "weight file version " + std::to_string(version) +
                                          " is not supported (expected " +
                                          std::to_string(kWeightFileVersion) + ")");
  }
  const std::uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  for (std::uint32_t t = 0; t < count; ++t) {
    NamedTensor nt;
    nt.name = r.str(r.u16());
    const int ndim = r.u8();
    if (ndim == 0) throw IoError("dimension_overflow", "tensor '" + nt.name + "' has rank 0");
    Shape shape;
    std::uint64_t elems = 1;
    for (int d = 0; d < ndim; ++d) {
      const std::uint32_t dim = r.u32();
      if (dim == 0 || dim > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
        throw IoError("dimension_overflow", "tensor '" + nt.name + "' has invalid dimension");
      }
      elems *= dim;
      if (elems > (std::uint64_t{1} << 32)) {
        throw IoError("dimension_overflow", "tensor '" + nt.name + "' is too large");
      }
      shape.push_back(static_cast<int>(dim));
    }
    if (r.remaining() / 4 < elems) throw IoError("truncated", "weight file is truncated");
    std::vector<float> data(static_cast<std::size_t>(elems));
    for (float& f : data) f = r.f32();
    nt.tensor = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(nt));
  }
  return out;
}

void write_weight_file(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  const auto bytes = encode_weight_file(tensors);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot_write", "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("cannot_write", "failed writing " + path.string());
}

std::vector<NamedTensor> read_weight_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot_read", "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_weight_file(bytes);
}

std::vector<NamedTensor> model_tensors(const Model& model) {
  std::vector<NamedTensor> out;
  for (const auto& g : model.groups) {
    out.push_back({g.name + ".weight", g.weight});
    out.push_back({g.name + ".bias", g.bias});
  }
  return out;
}

Model model_from_tensors(const std::vector<NamedTensor>& tensors) {
  auto fail = [](const std::string& why) {
    return ValidationError("not_a_segnet", "weight file does not describe a segnet: " + why);
  };
  if (tensors.size() < 6 || tensors.size() % 2 || (tensors.size() / 2 - 3) % 3) {
    throw fail("unexpected tensor count " + std::to_string(tensors.size()));
  }
  SegNetConfig c;
  const Tensor& first = tensors.front().tensor;
  const Tensor& last = tensors[tensors.size() - 2].tensor;
  if (first.rank() != 4 || last.rank() != 4) throw fail("kernels must be rank 4");
  c.in_channels = first.dim(1);
  c.base_width = first.dim(0);
  c.num_classes = last.dim(0);
  c.depth = static_cast<int>((tensors.size() / 2 - 3) / 3);
  c.validate();
  const auto info = layout(c);
  Model m{c, {}};
  for (std::size_t j = 0; j < info.size(); ++j) {
    const auto& w = tensors[2 * j];
    const auto& b = tensors[2 * j + 1];
    const StageInfo& s = info[j];
    if (w.name != s.name + ".weight" || b.name != s.name + ".bias") {
      throw fail("unexpected tensor name '" + w.name + "'");
    }
    if (w.tensor.shape() != Shape{s.out_channels, s.in_channels, s.kernel, s.kernel} ||
        b.tensor.shape() != Shape{s.out_channels}) {
      throw fail("shape mismatch in group '" + s.name + "'");
    }
    m.groups.push_back({s.name, w.tensor, b.tensor});
  }
  return m;
}

void save_weights(const Model& model, const std::filesystem::path& path) {
  write_weight_file(path, model_tensors(model));
}

Model load_weights(const std::filesystem::path& path) {
  return model_from_tensors(read_weight_file(path));
}

}  // namespace ssn
