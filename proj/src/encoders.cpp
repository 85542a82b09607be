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

#include "contextguard/encoders.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace contextguard {

namespace {

void one_hot(Eigen::VectorXd& out, int& offset, int value, int size) {
  if (value < 0 || value >= size) {
    throw std::invalid_argument("scene attribute outside vocabulary");
  }
  out(offset + value) = 1.0;
  offset += size;
}

void check_shape(const Eigen::MatrixXd& w, Eigen::Index rows, Eigen::Index cols,
                 const char* what) {
  if (w.rows() != rows || w.cols() != cols) {
    throw std::invalid_argument(std::string("dimension mismatch in ") + what +
                                ": parameter is " + std::to_string(w.rows()) +
                                "x" + std::to_string(w.cols()) + ", expected " +
                                std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
}

}  // namespace

int raw_scene_dim(const VocabConfig& v) {
  return v.n_person + v.n_location + v.n_event + v.n_narrative +
         v.n_background + v.n_zone + 1 + 2 + 1;
}

Eigen::VectorXd render_scene_features(const SceneDescriptor& s,
                                      const VocabConfig& v) {
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(raw_scene_dim(v));
  int off = 0;
  one_hot(raw, off, s.person_id, v.n_person);
  one_hot(raw, off, s.location_id, v.n_location);
  one_hot(raw, off, s.event_id, v.n_event);
  one_hot(raw, off, s.narrative_theme_id, v.n_narrative);
  one_hot(raw, off, s.background_id, v.n_background);
  one_hot(raw, off, s.spatial_zone_id, v.n_zone);
  raw(off++) = s.sentiment_polarity;
  const double angle = 2.0 * std::numbers::pi * s.time_slot / kTimeSlots;
  raw(off++) = std::sin(angle);
  raw(off++) = std::cos(angle);
  raw(off++) = s.coherence_flag ? 1.0 : -1.0;
  return raw;
}

Eigen::VectorXd dense_tanh_backward(const Dense& layer, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& grad_y,
                                    Dense& grads) {
  const Eigen::VectorXd dz =
      grad_y.array() * (1.0 - y.array().square());
  grads.w.noalias() += dz * x.transpose();
  grads.b += dz;
  return layer.w.transpose() * dz;
}

Eigen::VectorXd encode_image(const SceneDescriptor& scene,
                             const ModelState& params,
                             const EncoderConfig& config, Rng* rng,
                             ImageCache* cache) {
  Eigen::VectorXd raw = render_scene_features(scene, config.scene_vocab);
  check_shape(params.image.w, config.d_v, raw.size(), "encode_image");
  if (rng != nullptr && config.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, config.noise_std);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) += noise(*rng);
  }
  Eigen::VectorXd out = (params.image.w * raw + params.image.b).array().tanh();
  if (cache != nullptr) {
    cache->raw = std::move(raw);
    cache->out = out;
  }
  return out;
}

void encode_image_backward(const ImageCache& cache,
                           const Eigen::VectorXd& grad_out,
                           const ModelState& params, ModelState& grads) {
  dense_tanh_backward(params.image, cache.raw, cache.out, grad_out,
                      grads.image);
}

Eigen::VectorXd encode_text(std::span<const int> tokens,
                            const ModelState& params,
                            const EncoderConfig& config, TextCache* cache) {
  check_shape(params.embedding, config.vocab_size, config.d_t, "encode_text");
  check_shape(params.text.w, config.d_t, config.d_t, "encode_text");
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(config.d_t);
  for (int tok : tokens) {
    if (tok < 0 || tok >= config.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(tok) +
                              " outside vocabulary of size " +
                              std::to_string(config.vocab_size));
    }
    pooled += params.embedding.row(tok).transpose();
  }
  if (!tokens.empty()) pooled /= static_cast<double>(tokens.size());
  Eigen::VectorXd out =
      (params.text.w * pooled + params.text.b).array().tanh();
  if (cache != nullptr) {
    cache->tokens.assign(tokens.begin(), tokens.end());
    cache->pooled = pooled;
    cache->out = out;
  }
  return out;
}

void encode_text_backward(const TextCache& cache,
                          const Eigen::VectorXd& grad_out,
                          const ModelState& params, ModelState& grads) {
  const Eigen::VectorXd dpool = dense_tanh_backward(
      params.text, cache.pooled, cache.out, grad_out, grads.text);
  if (cache.tokens.empty()) return;
  const double inv = 1.0 / static_cast<double>(cache.tokens.size());
  for (int tok : cache.tokens) {
    grads.embedding.row(tok) += inv * dpool.transpose();
  }
}

CrossModalRep fuse(const Eigen::VectorXd& v, const Eigen::VectorXd& t,
                   const ModelState& params, FuseCache* cache) {
  check_shape(params.fuse.w, params.fuse.w.rows(), v.size() + t.size(),
              "fuse");
  Eigen::VectorXd x(v.size() + t.size());
  x << v, t;
  CrossModalRep rep{(params.fuse.w * x + params.fuse.b).array().tanh()};
  if (cache != nullptr) {
    cache->input = std::move(x);
    cache->out = rep.h;
  }
  return rep;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> fuse_backward(
    const FuseCache& cache, const Eigen::VectorXd& grad_out,
    const ModelState& params, ModelState& grads) {
  const Eigen::VectorXd dx = dense_tanh_backward(params.fuse, cache.input,
                                                 cache.out, grad_out,
                                                 grads.fuse);
  const Eigen::Index dv = params.image.w.rows();
  return {dx.head(dv), dx.tail(dx.size() - dv)};
}

}  // namespace contextguard
