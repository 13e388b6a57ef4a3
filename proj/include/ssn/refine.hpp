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
#pragma once

#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssn/scribble.hpp"
#include "ssn/segnet.hpp"

// Scribble-constrained test-time refinement. The network is split into an
// initial part (frozen, shared with the pretrained model) and its final l
// parameter groups, which get a per-image copy that is optimized until
// every scribbled pixel is predicted with its scribble label.
namespace ssn {

enum class RefineMode {
  // grad = g * dPsi/dW - alpha * (W_l - W_inst) / ||W_l - W_inst||, g held
  // constant and the labeling y_hat fixed for the step.
  kPaper,
  // grad = dg/dW - alpha * (W_l - W_inst) / ||W_l - W_inst||.
  kDirect,
};

std::string to_string(RefineMode m);
RefineMode refine_mode_from_string(const std::string& s);

struct RefineConfig {
  RefineMode mode = RefineMode::kDirect;
  double learning_rate = 0.005;  // eta
  double alpha = 0.1;            // proximal weight
  int max_epochs = 100;          // M
  int trainable_layers = 4;      // l
  double norm_guard = 1e-12;     // proximal term is 0 below this drift

  // Throws ValidationError; `layer_count` is N of the model.
  void validate(int layer_count) const;
  nlohmann::json to_json() const;
  // Starts from `base` and applies the keys present in `j`
  // ("mode", "eta", "alpha", "M", "l", "norm_guard").
  static RefineConfig from_json(const nlohmann::json& j, RefineConfig base);
  static RefineConfig from_json(const nlohmann::json& j);
};

// W_lambda: the base model's groups with the final l replaced by private
// copies. Groups outside the final l are read straight from the shared,
// immutable base model.
template <typename T>
class BasicInstanceWeights {
 public:
  BasicInstanceWeights(std::shared_ptr<const BasicModel<T>> base, int trainable_layers);

  const BasicModel<T>& base() const noexcept { return *base_; }
  std::shared_ptr<const BasicModel<T>> base_ptr() const noexcept { return base_; }
  int trainable_layers() const noexcept { return static_cast<int>(tail_.size()); }
  int first_trainable() const noexcept { return base_->layer_count() - trainable_layers(); }

  const std::vector<ParamGroup<T>>& tail() const noexcept { return tail_; }
  std::vector<ParamGroup<T>>& tail() noexcept { return tail_; }
  void restore(std::vector<ParamGroup<T>> tail);

  GroupRefs<T> refs() const;
  // ||W_l - W_lambda_l||_2 over every weight and bias of the final l groups.
  double drift() const;
  // Copies the base groups back into the instance groups.
  void reset();

 private:
  std::shared_ptr<const BasicModel<T>> base_;
  std::vector<ParamGroup<T>> tail_;
};

using InstanceWeights = BasicInstanceWeights<float>;
using InstanceWeights64 = BasicInstanceWeights<double>;

template <typename T>
struct BasicSegmentation {
  BasicTensor<T> probs;  // [K,H,W]
  LabelMap labels;       // per-pixel argmax
};

using Segmentation = BasicSegmentation<float>;

template <typename T>
BasicSegmentation<T> segment(const SegNetConfig& config, const GroupRefs<T>& groups,
                             const BasicTensor<T>& image);
Segmentation segment(const Model& model, const Tensor& image);
Segmentation segment(const InstanceWeights& weights, const Tensor& image);

// Mean over pixels of probs[y_hat(p), p].
template <typename T>
T psi(const BasicTensor<T>& probs, const LabelMap& y_hat);

// d psi / d logits with y_hat held fixed.
template <typename T>
BasicTensor<T> psi_grad_logits(const BasicTensor<T>& probs, const LabelMap& y_hat);

struct ConstraintLoss {
  double g = 0;        // scribble cross-entropy
  int violations = 0;  // scribble pixels whose argmax differs from the label
};

// Throws EmptyScribblesError for an empty mask.
template <typename T>
ConstraintLoss constraint_loss(const BasicTensor<T>& probs, const ScribbleMask& scribbles);

struct RefineReport {
  int epochs_run = 0;               // weight updates applied
  std::vector<double> g;            // one entry per forward pass
  std::vector<int> violations;      // same length as g
  bool satisfied = false;           // final violation count is 0
  double drift = 0;                 // ||W_l - W_lambda_l||_2 at exit
  double wall_ms = 0;

  nlohmann::json to_json(bool include_timing = true) const;
};

// Raised when a gradient turns non-finite; carries the trace so far.
class RefineAborted : public NumericalError {
 public:
  RefineAborted(const RefineReport& report, const std::string& message)
      : NumericalError("non_finite_gradient", message), report_(report) {}
  const RefineReport& report() const noexcept { return report_; }

 private:
  RefineReport report_;
};

template <typename T>
struct BasicRefineOutcome {
  BasicSegmentation<T> segmentation;
  RefineReport report;
};

using RefineOutcome = BasicRefineOutcome<float>;

// Alternates inference with W_lambda and one gradient step on the final l
// groups until no scribbled pixel is violated or M steps were taken.
// `weights` carries over between calls; call reset() for a fresh
// instance. If nothing is violated on entry the network is left untouched
// and the result equals plain inference.
template <typename T>
BasicRefineOutcome<T> refine(const BasicTensor<T>& image, const ScribbleMask& scribbles,
                             BasicInstanceWeights<T>& weights, const RefineConfig& config);

// Same, starting from fresh instance weights of `model`.
RefineOutcome refine(const Tensor& image, const ScribbleMask& scribbles,
                     std::shared_ptr<const Model> model, const RefineConfig& config);

// The descent direction refine() would apply at the current weights, one
// entry per trainable group (index 0 = first trainable group).
template <typename T>
std::vector<GroupGrad<T>> refine_gradient(const BasicTensor<T>& image,
                                          const ScribbleMask& scribbles,
                                          const BasicInstanceWeights<T>& weights,
                                          const RefineConfig& config);

}  // namespace ssn
