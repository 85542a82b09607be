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

// Toy stand-ins for the vision-language backbone: an image encoder over a
// rendered scene attribute vector, a mean-pooled bag-of-embeddings text
// encoder, and the cross-modal fusion layer. Every forward function can fill
// a cache that the matching *_backward accumulates gradients from.

#ifndef CONTEXTGUARD_ENCODERS_HPP_
#define CONTEXTGUARD_ENCODERS_HPP_

#include <Eigen/Dense>
#include <span>

#include "contextguard/core.hpp"
#include "contextguard/model.hpp"

namespace contextguard {

struct CrossModalRep {
  Eigen::VectorXd h;
};

// Length of render_scene_features() for this vocabulary.
int raw_scene_dim(const VocabConfig& vocab);

// Deterministic raw rendering of a scene: one-hot blocks for every
// categorical attribute, the polarity as a scalar, the hour as a sin/cos
// pair and the coherence flag as +-1.
Eigen::VectorXd render_scene_features(const SceneDescriptor& scene,
                                      const VocabConfig& vocab);

struct ImageCache {
  Eigen::VectorXd raw;
  Eigen::VectorXd out;
};

struct TextCache {
  std::vector<int> tokens;
  Eigen::VectorXd pooled;
  Eigen::VectorXd out;
};

struct FuseCache {
  Eigen::VectorXd input;  // [v; t]
  Eigen::VectorXd out;
};

// Noise of std config.noise_std is drawn from rng when both are non-zero.
Eigen::VectorXd encode_image(const SceneDescriptor& scene,
                             const ModelState& params,
                             const EncoderConfig& config, Rng* rng = nullptr,
                             ImageCache* cache = nullptr);
void encode_image_backward(const ImageCache& cache,
                           const Eigen::VectorXd& grad_out,
                           const ModelState& params, ModelState& grads);

Eigen::VectorXd encode_text(std::span<const int> tokens,
                            const ModelState& params,
                            const EncoderConfig& config,
                            TextCache* cache = nullptr);
void encode_text_backward(const TextCache& cache,
                          const Eigen::VectorXd& grad_out,
                          const ModelState& params, ModelState& grads);

CrossModalRep fuse(const Eigen::VectorXd& v, const Eigen::VectorXd& t,
                   const ModelState& params, FuseCache* cache = nullptr);
// Returns the gradients with respect to (v, t).
std::pair<Eigen::VectorXd, Eigen::VectorXd> fuse_backward(
    const FuseCache& cache, const Eigen::VectorXd& grad_out,
    const ModelState& params, ModelState& grads);

// Shared by every affine + tanh layer: accumulates dW, db and returns dx.
Eigen::VectorXd dense_tanh_backward(const Dense& layer, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& grad_y,
                                    Dense& grads);

}  // namespace contextguard

#endif  // CONTEXTGUARD_ENCODERS_HPP_
