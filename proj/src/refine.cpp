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
#include "ssn/refine.hpp"

#include <chrono>
#include <cmath>

#include "ssn/ops.hpp"

namespace ssn {

std::string to_string(RefineMode m) { return m == RefineMode::kPaper ? "paper" : "direct"; }

RefineMode refine_mode_from_string(const std::string& s) {
  if (s == "paper") return RefineMode::kPaper;
  if (s == "direct") return RefineMode::kDirect;
  throw ValidationError("invalid_mode", "refine mode must be \"paper\" or \"direct\", got \"" + s + "\"");
}

void RefineConfig::validate(int layer_count) const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw ValidationError("invalid_config", "refine learning rate must be > 0");
  }
  if (!(alpha >= 0) || !std::isfinite(alpha)) {
    throw ValidationError("invalid_config", "refine alpha must be >= 0");
  }
  if (max_epochs < 1) throw ValidationError("invalid_config", "refine M must be >= 1");
  if (trainable_layers < 1 || trainable_layers > layer_count) {
    throw ValidationError("invalid_layer_count", "refine l must be in 1.." + std::to_string(layer_count));
  }
  if (!(norm_guard > 0)) throw ValidationError("invalid_config", "norm guard must be > 0");
}

nlohmann::json RefineConfig::to_json() const {
  return {{"mode", to_string(mode)}, {"eta", learning_rate}, {"alpha", alpha},
          {"M", max_epochs},         {"l", trainable_layers},  {"norm_guard", norm_guard}};
}

RefineConfig RefineConfig::from_json(const nlohmann::json& j) { return from_json(j, RefineConfig{}); }

RefineConfig RefineConfig::from_json(const nlohmann::json& j, RefineConfig c) {
  if (j.is_null()) return c;
  if (!j.is_object()) throw ValidationError("invalid_config", "refine config must be an object");
  try {
    if (j.contains("mode")) c.mode = refine_mode_from_string(j["mode"].get<std::string>());
    c.learning_rate = j.value("eta", c.learning_rate);
    c.alpha = j.value("alpha", c.alpha);
    c.max_epochs = j.value("M", c.max_epochs);
    c.trainable_layers = j.value("l", c.trainable_layers);
    c.norm_guard = j.value("norm_guard", c.norm_guard);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid_config", std::string("refine config: ") + e.what());
  }
  return c;
}

template <typename T>
BasicInstanceWeights<T>::BasicInstanceWeights(std::shared_ptr<const BasicModel<T>> base,
                                              int trainable_layers)
    : base_(std::move(base)) {
  if (!base_) throw ValidationError("missing_model", "instance weights need a base model");
  if (trainable_layers < 1 || trainable_layers > base_->layer_count()) {
    throw ValidationError("invalid_layer_count",
                          "l must be in 1.." + std::to_string(base_->layer_count()));
  }
  tail_.assign(base_->groups.end() - trainable_layers, base_->groups.end());
}

template <typename T>
void BasicInstanceWeights<T>::restore(std::vector<ParamGroup<T>> tail) {
  if (tail.size() != tail_.size()) {
    throw ValidationError("shape_mismatch", "snapshot has a different trainable layer count");
  }
  tail_ = std::move(tail);
}

template <typename T>
GroupRefs<T> BasicInstanceWeights<T>::refs() const {
  GroupRefs<T> r;
  const int first = first_trainable();
  for (int j = 0; j < first; ++j) r.push_back(&base_->groups[j]);
  for (const auto& g : tail_) r.push_back(&g);
  return r;
}

template <typename T>
double BasicInstanceWeights<T>::drift() const {
  double s = 0;
  const int first = first_trainable();
  for (std::size_t j = 0; j < tail_.size(); ++j) {
    const auto& b = base_->groups[first + j];
    for (std::size_t i = 0; i < b.weight.size(); ++i) {
      const double d = static_cast<double>(b.weight[i]) - tail_[j].weight[i];
      s += d * d;
    }
    for (std::size_t i = 0; i < b.bias.size(); ++i) {
      const double d = static_cast<double>(b.bias[i]) - tail_[j].bias[i];
      s += d * d;
    }
  }
  return std::sqrt(s);
}

template <typename T>
void BasicInstanceWeights<T>::reset() {
  tail_.assign(base_->groups.end() - trainable_layers(), base_->groups.end());
}

template <typename T>
BasicSegmentation<T> segment(const SegNetConfig& config, const GroupRefs<T>& groups,
                             const BasicTensor<T>& image) {
  ForwardTape<T> tape;
  BasicSegmentation<T> s;
  s.probs = ops::softmax_channels(forward(config, groups, image, tape));
  s.labels = ops::argmax_channels(s.probs);
  return s;
}

Segmentation segment(const Model& model, const Tensor& image) {
  return segment(model.config, group_refs(model), image);
}

Segmentation segment(const InstanceWeights& weights, const Tensor& image) {
  return segment(weights.base().config, weights.refs(), image);
}

template <typename T>
T psi(const BasicTensor<T>& probs, const LabelMap& y_hat) {
  const std::size_t plane = y_hat.size();
  if (probs.rank() != 3 || static_cast<std::size_t>(probs.dim(1)) * probs.dim(2) != plane) {
    throw ValidationError("shape_mismatch", "psi: label map does not match probabilities");
  }
  double s = 0;
  for (std::size_t i = 0; i < plane; ++i) s += probs[y_hat.labels[i] * plane + i];
  return static_cast<T>(s / static_cast<double>(plane));
}

template <typename T>
BasicTensor<T> psi_grad_logits(const BasicTensor<T>& probs, const LabelMap& y_hat) {
  const int k = probs.dim(0);
  const std::size_t plane = y_hat.size();
  BasicTensor<T> g(probs.shape());
  const T inv = T(1) / static_cast<T>(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    const int yh = y_hat.labels[i];
    const T sy = probs[yh * plane + i];
    for (int c = 0; c < k; ++c) {
      g[c * plane + i] = inv * sy * ((c == yh ? T(1) : T(0)) - probs[c * plane + i]);
    }
  }
  return g;
}

template <typename T>
ConstraintLoss constraint_loss(const BasicTensor<T>& probs, const ScribbleMask& scribbles) {
  if (scribbles.empty()) throw EmptyScribblesError();
  const auto pixels = scribbles.pixels();
  const auto ce = ops::masked_cross_entropy(probs, std::span<const ops::LabeledPixel>(pixels));
  ConstraintLoss out;
  out.g = ce->loss;
  const int k = probs.dim(0);
  const std::size_t plane = static_cast<std::size_t>(probs.dim(1)) * probs.dim(2);
  for (const auto& lp : pixels) {
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if (probs[c * plane + lp.index] > probs[best * plane + lp.index]) best = c;
    }
    out.violations += best != lp.label;
  }
  return out;
}

nlohmann::json RefineReport::to_json(bool include_timing) const {
  nlohmann::json j = {{"epochs_run", epochs_run}, {"g", g},         {"violations", violations},
                      {"satisfied", satisfied},   {"drift", drift}};
  if (include_timing) j["wall_ms"] = wall_ms;
  return j;
}

namespace {

template <typename T>
void check_inputs(const BasicTensor<T>& image, const ScribbleMask& scribbles,
                  const BasicInstanceWeights<T>& weights, const RefineConfig& config) {
  const SegNetConfig& net = weights.base().config;
  config.validate(weights.base().layer_count());
  if (config.trainable_layers != weights.trainable_layers()) {
    throw ValidationError("invalid_layer_count",
                          "instance weights were built for l=" +
                              std::to_string(weights.trainable_layers()));
  }
  net.validate_image(image.shape());
  if (scribbles.empty()) throw EmptyScribblesError();
  if (scribbles.height() != image.dim(1) || scribbles.width() != image.dim(2)) {
    throw ValidationError("shape_mismatch", "scribble mask does not match image size");
  }
  for (const auto& [idx, label] : scribbles.entries()) {
    if (label >= net.num_classes) {
      throw ValidationError("label_out_of_range", "scribble label " + std::to_string(label) +
                                                      " >= K=" + std::to_string(net.num_classes));
    }
  }
}

// Descent direction for the trainable groups given the current forward.
template <typename T>
std::vector<GroupGrad<T>> step_direction(const BasicInstanceWeights<T>& weights,
                                         const ForwardTape<T>& tape, const BasicTensor<T>& probs,
                                         const ScribbleMask& scribbles,
                                         const RefineConfig& config) {
  const SegNetConfig& net = weights.base().config;
  const int first = weights.first_trainable();
  const auto pixels = scribbles.pixels();
  auto ce = ops::masked_cross_entropy(probs, std::span<const ops::LabeledPixel>(pixels));
  BasicTensor<T> dlogits;
  if (config.mode == RefineMode::kDirect) {
    dlogits = std::move(ce->grad_logits);
  } else {
    dlogits = psi_grad_logits(probs, ops::argmax_channels(probs));
    for (T& v : dlogits.data()) v *= ce->loss;
  }
  auto all = backward(net, weights.refs(), tape, dlogits, first);
  std::vector<GroupGrad<T>> grads(std::make_move_iterator(all.begin() + first),
                                  std::make_move_iterator(all.end()));

  const double norm = weights.drift();
  if (config.alpha > 0 && norm >= config.norm_guard) {
    const T scale = static_cast<T>(config.alpha / norm);
    for (std::size_t j = 0; j < grads.size(); ++j) {
      const auto& b = weights.base().groups[first + j];
      const auto& inst = weights.tail()[j];
      for (std::size_t i = 0; i < b.weight.size(); ++i) {
        grads[j].weight[i] -= scale * (b.weight[i] - inst.weight[i]);
      }
      for (std::size_t i = 0; i < b.bias.size(); ++i) {
        grads[j].bias[i] -= scale * (b.bias[i] - inst.bias[i]);
      }
    }
  }
  return grads;
}

}  // namespace

template <typename T>
std::vector<GroupGrad<T>> refine_gradient(const BasicTensor<T>& image,
                                          const ScribbleMask& scribbles,
                                          const BasicInstanceWeights<T>& weights,
                                          const RefineConfig& config) {
  check_inputs(image, scribbles, weights, config);
  ForwardTape<T> tape;
  const auto probs =
      ops::softmax_channels(forward(weights.base().config, weights.refs(), image, tape));
  return step_direction(weights, tape, probs, scribbles, config);
}

template <typename T>
BasicRefineOutcome<T> refine(const BasicTensor<T>& image, const ScribbleMask& scribbles,
                             BasicInstanceWeights<T>& weights, const RefineConfig& config) {
  check_inputs(image, scribbles, weights, config);
  const auto start = std::chrono::steady_clock::now();
  const SegNetConfig& net = weights.base().config;
  const int first = weights.first_trainable();
  const auto eta = static_cast<T>(config.learning_rate);

  BasicRefineOutcome<T> out;
  RefineReport& report = out.report;
  ForwardTape<T> tape;
  BasicTensor<T> logits = forward(net, weights.refs(), image, tape, 0);
  for (int epoch = 0;; ++epoch) {
    if (epoch > 0) logits = forward(net, weights.refs(), image, tape, first);
    if (!logits.all_finite()) {
      report.epochs_run = epoch;
      report.drift = weights.drift();
      throw RefineAborted(report, "non-finite output at refine epoch " + std::to_string(epoch));
    }
    BasicTensor<T> probs = ops::softmax_channels(logits);
    const ConstraintLoss cl = constraint_loss(probs, scribbles);
    report.g.push_back(cl.g);
    report.violations.push_back(cl.violations);
    if (cl.violations == 0 || epoch == config.max_epochs) {
      report.epochs_run = epoch;
      out.segmentation.labels = ops::argmax_channels(probs);
      out.segmentation.probs = std::move(probs);
      break;
    }
    auto grads = step_direction(weights, tape, probs, scribbles, config);
    for (const auto& g : grads) {
      if (!g.weight.all_finite() || !g.bias.all_finite()) {
        report.epochs_run = epoch;
        report.drift = weights.drift();
        throw RefineAborted(report, "non-finite gradient at refine epoch " + std::to_string(epoch + 1));
      }
    }
    for (std::size_t j = 0; j < grads.size(); ++j) {
      ops::sgd_update(weights.tail()[j].weight, grads[j].weight, eta);
      ops::sgd_update(weights.tail()[j].bias, grads[j].bias, eta);
    }
  }
  report.satisfied = report.violations.back() == 0;
  report.drift = weights.drift();
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

RefineOutcome refine(const Tensor& image, const ScribbleMask& scribbles,
                     std::shared_ptr<const Model> model, const RefineConfig& config) {
  if (!model) throw ValidationError("missing_model", "refine needs a model");
  config.validate(model->layer_count());
  InstanceWeights weights(std::move(model), config.trainable_layers);
  return refine(image, scribbles, weights, config);
}

template class BasicInstanceWeights<float>;
template class BasicInstanceWeights<double>;
template BasicSegmentation<float> segment(const SegNetConfig&, const GroupRefs<float>&,
                                          const BasicTensor<float>&);
template BasicSegmentation<double> segment(const SegNetConfig&, const GroupRefs<double>&,
                                           const BasicTensor<double>&);
template float psi(const BasicTensor<float>&, const LabelMap&);
template double psi(const BasicTensor<double>&, const LabelMap&);
template BasicTensor<float> psi_grad_logits(const BasicTensor<float>&, const LabelMap&);
template BasicTensor<double> psi_grad_logits(const BasicTensor<double>&, const LabelMap&);
template ConstraintLoss constraint_loss(const BasicTensor<float>&, const ScribbleMask&);
template ConstraintLoss constraint_loss(const BasicTensor<double>&, const ScribbleMask&);
template BasicRefineOutcome<float> refine(const BasicTensor<float>&, const ScribbleMask&,
                                          BasicInstanceWeights<float>&, const RefineConfig&);
template BasicRefineOutcome<double> refine(const BasicTensor<double>&, const ScribbleMask&,
                                           BasicInstanceWeights<double>&, const RefineConfig&);
template std::vector<GroupGrad<float>> refine_gradient(const BasicTensor<float>&,
                                                       const ScribbleMask&,
                                                       const BasicInstanceWeights<float>&,
                                                       const RefineConfig&);
template std::vector<GroupGrad<double>> refine_gradient(const BasicTensor<double>&,
                                                        const ScribbleMask&,
                                                        const BasicInstanceWeights<double>&,
                                                        const RefineConfig&);

}  // namespace ssn
