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

#include "contextguard/fccr.hpp"

#include <cmath>
#include <string>

namespace contextguard {

namespace {

void softmax_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

// Backprop through a row-wise softmax given its output p.
Eigen::MatrixXd softmax_rows_backward(const Eigen::MatrixXd& p,
                                      const Eigen::MatrixXd& dp) {
  Eigen::MatrixXd ds(p.rows(), p.cols());
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double dot = dp.row(r).dot(p.row(r));
    ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
  }
  return ds;
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::VectorXd extract_context(const CrossModalRep& h, ContextDimension k,
                                const ModelState& params, ExtractCache* cache) {
  const auto& p = params.extract[index_of(k)];
  const Eigen::Index n = p.queries.rows();
  const Eigen::Index s = p.queries.cols();
  if (n * s != h.h.size() || p.proj.w.cols() != h.h.size()) {
    throw std::invalid_argument("dimension mismatch in extract_context");
  }
  Eigen::MatrixXd segments(n, s);
  for (Eigen::Index i = 0; i < n; ++i) {
    segments.row(i) = h.h.segment(i * s, s).transpose();
  }
  Eigen::MatrixXd attention =
      p.queries * segments.transpose() / std::sqrt(static_cast<double>(s));
  softmax_rows(attention);
  const Eigen::MatrixXd att = attention * segments;
  Eigen::VectorXd attended(n * s);
  for (Eigen::Index j = 0; j < n; ++j) {
    attended.segment(j * s, s) = att.row(j).transpose();
  }
  Eigen::VectorXd out = (p.proj.w * attended + p.proj.b).array().tanh();
  if (cache != nullptr) {
    cache->segments = std::move(segments);
    cache->attention = std::move(attention);
    cache->attended = std::move(attended);
    cache->out = out;
  }
  return out;
}

Eigen::VectorXd extract_context_backward(const ExtractCache& cache,
                                         ContextDimension k,
                                         const Eigen::VectorXd& grad_out,
                                         const ModelState& params,
                                         ModelState& grads) {
  const auto& p = params.extract[index_of(k)];
  auto& g = grads.extract[index_of(k)];
  const Eigen::Index n = p.queries.rows();
  const Eigen::Index s = p.queries.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(s));

  const Eigen::VectorXd d_flat =
      dense_tanh_backward(p.proj, cache.attended, cache.out, grad_out, g.proj);
  Eigen::MatrixXd d_att(n, s);
  for (Eigen::Index j = 0; j < n; ++j) {
    d_att.row(j) = d_flat.segment(j * s, s).transpose();
  }
  const Eigen::MatrixXd d_attention = d_att * cache.segments.transpose();
  Eigen::MatrixXd d_segments = cache.attention.transpose() * d_att;
  const Eigen::MatrixXd d_scores =
      softmax_rows_backward(cache.attention, d_attention);
  g.queries.noalias() += scale * d_scores * cache.segments;
  d_segments.noalias() += scale * d_scores.transpose() * p.queries;

  Eigen::VectorXd dh(n * s);
  for (Eigen::Index i = 0; i < n; ++i) {
    dh.segment(i * s, s) = d_segments.row(i).transpose();
  }
  return dh;
}

Eigen::VectorXd fuse_contexts(const ContextVectors& ctx,
                              const ModelState& params, int n_heads,
                              FusionCache* cache) {
  const auto& p = params.fusion;
  const Eigen::Index dc = p.wq.rows();
  if (n_heads < 1 || dc % n_heads != 0) {
    throw std::invalid_argument("fuse_contexts: d_c not divisible by n_heads");
  }
  Eigen::MatrixXd x(kNumDimensions, dc);
  for (int k = 0; k < kNumDimensions; ++k) {
    if (ctx.by_dimension[k].size() != dc) {
      throw std::invalid_argument(
          "fuse_contexts: missing or mis-sized context vector for " +
          std::string(to_string(kAllDimensions[k])));
    }
    x.row(k) = ctx.by_dimension[k].transpose() + p.type_embedding.row(k);
  }
  const Eigen::MatrixXd q = x * p.wq;
  const Eigen::MatrixXd kk = x * p.wk;
  const Eigen::MatrixXd v = x * p.wv;
  const Eigen::Index dh = dc / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Eigen::MatrixXd o(kNumDimensions, dc);
  std::vector<Eigen::MatrixXd> probs;
  probs.reserve(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    Eigen::MatrixXd a = scale * q.middleCols(h * dh, dh) *
                        kk.middleCols(h * dh, dh).transpose();
    softmax_rows(a);
    o.middleCols(h * dh, dh) = a * v.middleCols(h * dh, dh);
    probs.push_back(std::move(a));
  }
  const Eigen::MatrixXd z = o * p.wo + x;
  Eigen::VectorXd pooled = z.colwise().mean().transpose();
  Eigen::VectorXd out = (p.out.w * pooled + p.out.b).array().tanh();
  if (cache != nullptr) {
    cache->x = std::move(x);
    cache->q = q;
    cache->k = kk;
    cache->v = v;
    cache->o = std::move(o);
    cache->probs = std::move(probs);
    cache->pooled = std::move(pooled);
    cache->out = out;
  }
  return out;
}

std::array<Eigen::VectorXd, kNumDimensions> fuse_contexts_backward(
    const FusionCache& cache, const Eigen::VectorXd& grad_out,
    const ModelState& params, int n_heads, ModelState& grads) {
  const auto& p = params.fusion;
  auto& g = grads.fusion;
  const Eigen::Index dc = p.wq.rows();
  const Eigen::Index dh = dc / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Eigen::VectorXd d_pooled =
      dense_tanh_backward(p.out, cache.pooled, cache.out, grad_out, g.out);
  const Eigen::MatrixXd dz =
      (d_pooled / static_cast<double>(kNumDimensions))
          .transpose()
          .replicate(kNumDimensions, 1);
  g.wo.noalias() += cache.o.transpose() * dz;
  const Eigen::MatrixXd d_o = dz * p.wo.transpose();
  Eigen::MatrixXd dx = dz;

  Eigen::MatrixXd dq(kNumDimensions, dc), dk(kNumDimensions, dc),
      dv(kNumDimensions, dc);
  for (int h = 0; h < n_heads; ++h) {
    const auto& a = cache.probs[h];
    const auto d_oh = d_o.middleCols(h * dh, dh);
    const Eigen::MatrixXd d_a = d_oh * cache.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh) = a.transpose() * d_oh;
    const Eigen::MatrixXd ds = softmax_rows_backward(a, d_a);
    dq.middleCols(h * dh, dh) = scale * ds * cache.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh) =
        scale * ds.transpose() * cache.q.middleCols(h * dh, dh);
  }
  g.wq.noalias() += cache.x.transpose() * dq;
  g.wk.noalias() += cache.x.transpose() * dk;
  g.wv.noalias() += cache.x.transpose() * dv;
  dx.noalias() += dq * p.wq.transpose();
  dx.noalias() += dk * p.wk.transpose();
  dx.noalias() += dv * p.wv.transpose();
  g.type_embedding += dx;

  std::array<Eigen::VectorXd, kNumDimensions> d_ctx;
  for (int k = 0; k < kNumDimensions; ++k) d_ctx[k] = dx.row(k).transpose();
  return d_ctx;
}

double head_logit(const HeadParams& head, const Eigen::VectorXd& x,
                  HeadCache* cache) {
  if (head.hidden.w.cols() != x.size()) {
    throw std::invalid_argument("dimension mismatch in prediction head");
  }
  Eigen::VectorXd hidden =
      (head.hidden.w * x + head.hidden.b).array().tanh();
  const double logit = (head.out.w * hidden)(0) + head.out.b(0);
  if (cache != nullptr) {
    cache->input = x;
    cache->hidden = std::move(hidden);
    cache->logit = logit;
  }
  return logit;
}

Eigen::VectorXd head_backward(const HeadParams& head, const HeadCache& cache,
                              double grad_logit, HeadParams& grads) {
  grads.out.w.row(0) += grad_logit * cache.hidden.transpose();
  grads.out.b(0) += grad_logit;
  const Eigen::VectorXd d_hidden = grad_logit * head.out.w.row(0).transpose();
  return dense_tanh_backward(head.hidden, cache.input, cache.hidden, d_hidden,
                             grads.hidden);
}

double predict_overall(const Eigen::VectorXd& f, const ModelState& params,
                       HeadCache* cache) {
  return sigmoid(head_logit(params.overall, f, cache));
}

double predict_dimension(const Eigen::VectorXd& c_k, ContextDimension k,
                         const ModelState& params, HeadCache* cache) {
  return sigmoid(head_logit(params.heads[index_of(k)], c_k, cache));
}

VerdictScores forward(const PairRecord& pair, const ModelState& model,
                      const ModelConfig& config, Rng* rng,
                      ForwardCache* cache) {
  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;

  const Eigen::VectorXd v =
      encode_image(pair.scene, model, config.encoder, rng, &c.image);
  const Eigen::VectorXd t =
      encode_text(pair.text_tokens, model, config.encoder, &c.text);
  const CrossModalRep h = fuse(v, t, model, &c.fuse);
  c.h = h.h;

  VerdictScores scores;
  if (model.no_fccr) {
    if (model.direct.w.cols() != h.h.size()) {
      throw std::invalid_argument("dimension mismatch in direct projection");
    }
    c.fused = (model.direct.w * h.h + model.direct.b).array().tanh();
    for (int k = 0; k < kNumDimensions; ++k) {
      c.logits.per_dimension[k] = head_logit(model.heads[k], c.fused,
                                             &c.heads[k]);
    }
  } else {
    ContextVectors ctx;
    for (int k = 0; k < kNumDimensions; ++k) {
      ctx.by_dimension[k] =
          extract_context(h, kAllDimensions[k], model, &c.extract[k]);
      c.logits.per_dimension[k] =
          head_logit(model.heads[k], ctx.by_dimension[k], &c.heads[k]);
    }
    c.fused = fuse_contexts(ctx, model, config.fccr.n_heads, &c.fusion);
  }
  c.logits.overall = head_logit(model.overall, c.fused, &c.overall);

  scores.overall = sigmoid(c.logits.overall);
  for (int k = 0; k < kNumDimensions; ++k) {
    scores.per_dimension[k] = sigmoid(c.logits.per_dimension[k]);
  }
  scores.fused_context = c.fused;
  return scores;
}

void backward(const ForwardCache& c, const Logits& g, const ModelState& model,
              const ModelConfig& config, ModelState& grads) {
  Eigen::VectorXd d_fused =
      head_backward(model.overall, c.overall, g.overall, grads.overall);
  Eigen::VectorXd dh;
  if (model.no_fccr) {
    for (int k = 0; k < kNumDimensions; ++k) {
      if (g.per_dimension[k] != 0.0) {
        d_fused += head_backward(model.heads[k], c.heads[k],
                                 g.per_dimension[k], grads.heads[k]);
      }
    }
    dh = dense_tanh_backward(model.direct, c.h, c.fused, d_fused,
                             grads.direct);
  } else {
    auto d_ctx = fuse_contexts_backward(c.fusion, d_fused, model,
                                        config.fccr.n_heads, grads);
    dh = Eigen::VectorXd::Zero(c.h.size());
    for (int k = 0; k < kNumDimensions; ++k) {
      if (g.per_dimension[k] != 0.0) {
        d_ctx[k] += head_backward(model.heads[k], c.heads[k],
                                  g.per_dimension[k], grads.heads[k]);
      }
      dh += extract_context_backward(c.extract[k], kAllDimensions[k],
                                     d_ctx[k], model, grads);
    }
  }
  const auto [dv, dt] = fuse_backward(c.fuse, dh, model, grads);
  encode_image_backward(c.image, dv, model, grads);
  encode_text_backward(c.text, dt, model, grads);
}

double bce(double score, bool label) {
  const double s = std::clamp(score, kScoreClip, 1.0 - kScoreClip);
  return label ? -std::log(s) : -std::log(1.0 - s);
}

double bce_grad_logit(double score, bool label) {
  if (score < kScoreClip || score > 1.0 - kScoreClip) return 0.0;
  return score - (label ? 1.0 : 0.0);
}

LossResult supervised_loss(std::span<const PairRecord* const> batch,
                           const ModelState& model, const ModelConfig& config,
                           double dim_weight, Rng* rng) {
  if (batch.empty()) throw std::invalid_argument("supervised_loss: empty batch");
  if (dim_weight < 0) throw std::invalid_argument("dim_weight must be >= 0");
  std::size_t n_dim_labels = 0;
  for (const auto* r : batch) n_dim_labels += r->annotated_dimensions().size();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const double inv_d =
      n_dim_labels == 0 ? 0.0 : dim_weight / static_cast<double>(n_dim_labels);

  LossResult result{0.0, model.zeros_like()};
  ForwardCache cache;
  for (const auto* r : batch) {
    const VerdictScores s = forward(*r, model, config, rng, &cache);
    Logits g;
    result.loss += inv_n * bce(s.overall, r->overall_consistent);
    g.overall = inv_n * bce_grad_logit(s.overall, r->overall_consistent);
    for (int k = 0; k < kNumDimensions; ++k) {
      const auto& label = r->ctxt_labels[k];
      if (!label) continue;
      result.loss += inv_d * bce(s.per_dimension[k], *label);
      g.per_dimension[k] = inv_d * bce_grad_logit(s.per_dimension[k], *label);
    }
    backward(cache, g, model, config, result.grads);
  }
  return result;
}

LossResult supervised_loss(std::span<const PairRecord> batch,
                           const ModelState& model, const ModelConfig& config,
                           double dim_weight, Rng* rng) {
  std::vector<const PairRecord*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& r : batch) ptrs.push_back(&r);
  return supervised_loss(std::span<const PairRecord* const>(ptrs), model,
                         config, dim_weight, rng);
}

}  // namespace contextguard
