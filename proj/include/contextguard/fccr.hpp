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

// Multi-stage fine-grained contextual reasoning.
//
//   h (d_cm) --extract_context x5--> C_k (d_c) --fuse_contexts--> F (d_f)
//   F   --predict_overall-->        S_consistency
//   C_k --predict_dimension(k)-->   S_k
//
// extract_context splits h into n_heads equal segments; dimension k owns
// n_heads learned queries that each attend (softmax over segments) to the
// segments, and the concatenated attended vectors go through an affine map
// and tanh. fuse_contexts adds a learned type embedding to each C_k, runs one
// round of multi-head self-attention with a residual connection over the five
// tokens, mean-pools and projects to d_f. The heads are two-layer tanh MLPs
// ending in a sigmoid.
//
// With ModelState::no_fccr the extraction and fusion stages are replaced by
// F = tanh(W h + b) and every S_k is read from F instead of C_k.

#ifndef CONTEXTGUARD_FCCR_HPP_
#define CONTEXTGUARD_FCCR_HPP_

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "contextguard/core.hpp"
#include "contextguard/encoders.hpp"
#include "contextguard/model.hpp"

namespace contextguard {

inline constexpr double kScoreClip = 1e-9;

struct ContextVectors {
  std::array<Eigen::VectorXd, kNumDimensions> by_dimension;

  const Eigen::VectorXd& operator[](ContextDimension d) const {
    return by_dimension[index_of(d)];
  }
};

struct VerdictScores {
  double overall = 0.5;
  std::array<double, kNumDimensions> per_dimension{};
  Eigen::VectorXd fused_context;

  double dimension(ContextDimension d) const {
    return per_dimension[index_of(d)];
  }
};

// Pre-sigmoid outputs; gradients flow back through these.
struct Logits {
  double overall = 0.0;
  std::array<double, kNumDimensions> per_dimension{};
};

double sigmoid(double z);

struct ExtractCache {
  Eigen::MatrixXd segments;   // n_heads x segment length
  Eigen::MatrixXd attention;  // queries x segments, rows sum to 1
  Eigen::VectorXd attended;   // flattened query outputs, length d_cm
  Eigen::VectorXd out;
};

Eigen::VectorXd extract_context(const CrossModalRep& h, ContextDimension k,
                                const ModelState& params,
                                ExtractCache* cache = nullptr);
// Returns dL/dh.
Eigen::VectorXd extract_context_backward(const ExtractCache& cache,
                                         ContextDimension k,
                                         const Eigen::VectorXd& grad_out,
                                         const ModelState& params,
                                         ModelState& grads);

struct FusionCache {
  Eigen::MatrixXd x;  // 5 x d_c token matrix after type embeddings
  Eigen::MatrixXd q, k, v, o;
  std::vector<Eigen::MatrixXd> probs;  // one 5x5 attention matrix per head
  Eigen::VectorXd pooled;
  Eigen::VectorXd out;
};

Eigen::VectorXd fuse_contexts(const ContextVectors& ctx,
                              const ModelState& params, int n_heads,
                              FusionCache* cache = nullptr);
std::array<Eigen::VectorXd, kNumDimensions> fuse_contexts_backward(
    const FusionCache& cache, const Eigen::VectorXd& grad_out,
    const ModelState& params, int n_heads, ModelState& grads);

struct HeadCache {
  Eigen::VectorXd input;
  Eigen::VectorXd hidden;
  double logit = 0.0;
};

double head_logit(const HeadParams& head, const Eigen::VectorXd& x,
                  HeadCache* cache = nullptr);
Eigen::VectorXd head_backward(const HeadParams& head, const HeadCache& cache,
                              double grad_logit, HeadParams& grads);

double predict_overall(const Eigen::VectorXd& f, const ModelState& params,
                       HeadCache* cache = nullptr);
double predict_dimension(const Eigen::VectorXd& c_k, ContextDimension k,
                         const ModelState& params, HeadCache* cache = nullptr);

struct ForwardCache {
  ImageCache image;
  TextCache text;
  FuseCache fuse;
  std::array<ExtractCache, kNumDimensions> extract;
  FusionCache fusion;
  Eigen::VectorXd h;
  Eigen::VectorXd fused;  // F
  HeadCache overall;
  std::array<HeadCache, kNumDimensions> heads;
  Logits logits;
};

// Full pipeline for one pair. Noise is only drawn when rng is supplied.
VerdictScores forward(const PairRecord& pair, const ModelState& model,
                      const ModelConfig& config, Rng* rng = nullptr,
                      ForwardCache* cache = nullptr);

// Accumulates dL/dtheta into grads given dL/dlogit for every output.
void backward(const ForwardCache& cache, const Logits& grad_logits,
              const ModelState& model, const ModelConfig& config,
              ModelState& grads);

// Binary cross-entropy on a score clipped to [1e-9, 1 - 1e-9].
double bce(double score, bool label);
// d bce / d logit for score = sigmoid(logit); zero where clipping is active.
double bce_grad_logit(double score, bool label);

struct LossResult {
  double loss = 0.0;
  ModelState grads;
};

// mean_r BCE(S, overall_r) + dim_weight * mean over present (r, k) of
// BCE(S_k, label_rk).
LossResult supervised_loss(std::span<const PairRecord> batch,
                           const ModelState& model, const ModelConfig& config,
                           double dim_weight = 1.0, Rng* rng = nullptr);
LossResult supervised_loss(std::span<const PairRecord* const> batch,
                           const ModelState& model, const ModelConfig& config,
                           double dim_weight = 1.0, Rng* rng = nullptr);

}  // namespace contextguard

#endif  // CONTEXTGUARD_FCCR_HPP_
