/*
 * Copyright 2026 The ContextGuard Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Trainable parameters of the encoders, the contextual reasoning module and
// the prediction heads. A ModelState doubles as a gradient buffer and as
// optimizer moment storage: every routine that walks parameters does so
// through for_each_tensor, which visits tensors of several same-shaped
// states in lockstep in a fixed canonical order.

#ifndef CONTEXTGUARD_MODEL_HPP_
#define CONTEXTGUARD_MODEL_HPP_

#include <Eigen/Dense>
#include <array>
#include <string>

#include "contextguard/core.hpp"

namespace contextguard {

struct EncoderConfig {
  int d_v = 16;
  int d_t = 16;
  int d_cm = 32;
  int vocab_size = 0;  // 0: taken from the template grammar
  double noise_std = 0.0;
  VocabConfig scene_vocab;

  void validate() const;
};

struct FccrConfig {
  int d_c = 16;
  int d_f = 32;
  int n_heads = 2;
  int hidden = 32;

  void validate() const;
};

struct ModelConfig {
  EncoderConfig encoder;
  FccrConfig fccr;
  // Ablation: replace context extraction and fusion by one affine map from
  // the cross-modal representation to the fused context.
  bool no_fccr = false;

  void validate() const;
};

// y = w x + b
struct Dense {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;

  template <class F, class... S>
  static void zip(F& f, const std::string& p, S&... s) {
    f(p + ".w", s.w...);
    f(p + ".b", s.b...);
  }
};

// Two-layer perceptron ending in one logit.
struct HeadParams {
  Dense hidden;
  Dense out;

  template <class F, class... S>
  static void zip(F& f, const std::string& p, S&... s) {
    Dense::zip(f, p + ".hidden", s.hidden...);
    Dense::zip(f, p + ".out", s.out...);
  }
};

struct ExtractParams {
  Eigen::MatrixXd queries;  // n_heads x segment length
  Dense proj;               // d_c x d_cm

  template <class F, class... S>
  static void zip(F& f, const std::string& p, S&... s) {
    f(p + ".queries", s.queries...);
    Dense::zip(f, p + ".proj", s.proj...);
  }
};

struct FusionParams {
  Eigen::MatrixXd type_embedding;  // 5 x d_c, row k belongs to dimension k
  Eigen::MatrixXd wq, wk, wv, wo;  // d_c x d_c
  Dense out;                       // d_f x d_c

  template <class F, class... S>
  static void zip(F& f, const std::string& p, S&... s) {
    f(p + ".type_embedding", s.type_embedding...);
    f(p + ".wq", s.wq...);
    f(p + ".wk", s.wk...);
    f(p + ".wv", s.wv...);
    f(p + ".wo", s.wo...);
    Dense::zip(f, p + ".out", s.out...);
  }
};

struct ModelState {
  bool no_fccr = false;

  Dense image;                  // d_v x raw scene features
  Eigen::MatrixXd embedding;    // vocab x d_t
  Dense text;                   // d_t x d_t
  Dense fuse;                   // d_cm x (d_v + d_t)
  std::array<ExtractParams, kNumDimensions> extract;
  FusionParams fusion;
  Dense direct;                 // no_fccr only: d_f x d_cm
  HeadParams overall;
  std::array<HeadParams, kNumDimensions> heads;

  // Fresh state with Xavier-uniform weights and zero biases.
  static ModelState initialize(const ModelConfig& config, int raw_scene_dim,
                               std::uint64_t seed);
  // Same layout, all zeros.
  ModelState zeros_like() const;

  std::size_t parameter_count() const;
  double squared_norm() const;
  bool all_finite() const;
  void set_zero();
  // this += scale * other
  void add_scaled(const ModelState& other, double scale);

  friend bool operator==(const ModelState& a, const ModelState& b);
};

inline bool is_backbone_path(const std::string& path) {
  return path.rfind("encoder.", 0) == 0;
}

// Visits (path, tensor...) across same-layout states. Tensors are
// Eigen::MatrixXd or Eigen::VectorXd; use a generic lambda.
template <class F, class... S>
void for_each_tensor(F&& f, S&... states) {
  const bool no_fccr = std::get<0>(std::tie(states...)).no_fccr;
  Dense::zip(f, "encoder.image", states.image...);
  f(std::string("encoder.text.embedding"), states.embedding...);
  Dense::zip(f, "encoder.text", states.text...);
  Dense::zip(f, "encoder.fuse", states.fuse...);
  if (no_fccr) {
    Dense::zip(f, "fccr.direct", states.direct...);
  } else {
    for (int k = 0; k < kNumDimensions; ++k) {
      ExtractParams::zip(
          f, "fccr.extract." + std::string(to_string(kAllDimensions[k])),
          states.extract[k]...);
    }
    FusionParams::zip(f, "fccr.fuse", states.fusion...);
  }
  HeadParams::zip(f, "head.overall", states.overall...);
  for (int k = 0; k < kNumDimensions; ++k) {
    HeadParams::zip(f, "head." + std::string(to_string(kAllDimensions[k])),
                    states.heads[k]...);
  }
}

// Line-delimited text checkpoint: "<path> <rows> <cols> v0 v1 ..." with
// values in column-major order printed with 17 significant digits.
void save_checkpoint(const ModelState& model, const std::string& path);
ModelState load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const ModelState& model);
ModelState checkpoint_from_string(const std::string& text);

}  // namespace contextguard

#endif  // CONTEXTGUARD_MODEL_HPP_
