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

#include "contextguard/optim.hpp"

#include <cmath>

#include "json.hpp"

namespace contextguard {

void OptimizerConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw ConfigError("optimizer.lr must be a finite value >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optimizer betas must lie in [0,1)");
  }
  if (!(eps > 0.0)) throw ConfigError("optimizer.eps must be > 0");
  if (batch_size < 1) throw ConfigError("optimizer.batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("optimizer.epochs must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
    throw ConfigError("optimizer.warmup_fraction must lie in [0,1]");
  }
}

LinearSchedule::LinearSchedule(long total_steps, double warmup_fraction)
    : total_(total_steps < 0 ? 0 : total_steps),
      warmup_(static_cast<long>(std::ceil(warmup_fraction * total_ - 1e-9))) {
  if (warmup_ < 0) warmup_ = 0;
}

double LinearSchedule::factor(long step) const {
  if (step < warmup_) {
    return static_cast<double>(step + 1) / static_cast<double>(warmup_);
  }
  if (total_ == 0) return 1.0;
  if (step >= total_) return 0.0;
  return static_cast<double>(total_ - step) /
         static_cast<double>(total_ - warmup_);
}

Adam::Adam(const ModelState& like, const OptimizerConfig& config,
           long total_steps)
    : config_(config),
      schedule_(total_steps, config.warmup_fraction),
      m_(like.zeros_like()),
      v_(like.zeros_like()) {
  config_.validate();
}

double Adam::current_lr() const { return config_.lr * schedule_.factor(t_); }

void Adam::step(ModelState& params, const ModelState& grads,
                bool freeze_backbone) {
  const double lr = current_lr();
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2, eps = config_.eps;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for_each_tensor(
      [&](const std::string& path, auto& p, const auto& g, auto& m, auto& v) {
        if (freeze_backbone && is_backbone_path(path)) return;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      },
      params, grads, m_, v_);
}

std::string TrainStats::to_json_line() const {
  nlohmann::ordered_json j;
  j["phase"] = phase;
  j["epoch"] = epoch;
  j["step"] = step;
  j["records"] = records;
  j["lr"] = lr;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("loss", loss);
  put("mean_reward", mean_reward);
  put("baseline", baseline);
  put("grad_norm", grad_norm);
  put("mean_real_score", mean_real_score);
  put("mean_fake_score", mean_fake_score);
  put("generator_entropy", generator_entropy);
  return j.dump();
}

}  // namespace contextguard
