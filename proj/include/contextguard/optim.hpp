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

#ifndef CONTEXTGUARD_OPTIM_HPP_
#define CONTEXTGUARD_OPTIM_HPP_

#include <optional>
#include <string>

#include "contextguard/model.hpp"

namespace contextguard {

struct OptimizerConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 32;
  int epochs = 10;
  double warmup_fraction = 0.05;

  void validate() const;
};

// Linear warm-up over the first ceil(warmup_fraction * total) steps, then
// linear decay to zero at `total`. With total == 0 the rate stays at its
// peak.
class LinearSchedule {
 public:
  LinearSchedule(long total_steps, double warmup_fraction);
  double factor(long step) const;
  long warmup_steps() const { return warmup_; }

 private:
  long total_;
  long warmup_;
};

class Adam {
 public:
  Adam(const ModelState& like, const OptimizerConfig& config,
       long total_steps = 0);

  // Descent step: params -= lr_t * mhat / (sqrt(vhat) + eps). Callers that
  // ascend pass negated gradients. Frozen backbone tensors keep their
  // values and moments.
  void step(ModelState& params, const ModelState& grads,
            bool freeze_backbone = false);

  long steps() const { return t_; }
  double current_lr() const;

 private:
  OptimizerConfig config_;
  LinearSchedule schedule_;
  ModelState m_;
  ModelState v_;
  long t_ = 0;
};

// One row of a training log. Only the fields a paradigm fills are written.
struct TrainStats {
  std::string phase;
  int epoch = 0;
  long step = 0;
  std::size_t records = 0;
  double lr = 0.0;
  std::optional<double> loss;
  std::optional<double> mean_reward;
  std::optional<double> baseline;
  std::optional<double> grad_norm;
  std::optional<double> mean_real_score;
  std::optional<double> mean_fake_score;
  std::optional<double> generator_entropy;

  std::string to_json_line() const;
};

}  // namespace contextguard

#endif  // CONTEXTGUARD_OPTIM_HPP_
