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

#include "contextguard/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace contextguard {

void EncoderConfig::validate() const {
  if (d_v < 1 || d_t < 1 || d_cm < 1) {
    throw ConfigError("encoder dimensions must be >= 1");
  }
  if (vocab_size < 1) throw ConfigError("encoder vocab_size must be >= 1");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  scene_vocab.validate();
}

void FccrConfig::validate() const {
  if (d_c < 1 || d_f < 1 || n_heads < 1 || hidden < 1) {
    throw ConfigError("fccr dimensions must be >= 1");
  }
  if (d_c % n_heads != 0) {
    throw ConfigError("fccr.d_c must be divisible by fccr.n_heads");
  }
}

void ModelConfig::validate() const {
  encoder.validate();
  fccr.validate();
  if (!no_fccr && encoder.d_cm % fccr.n_heads != 0) {
    throw ConfigError("encoder.d_cm must be divisible by fccr.n_heads");
  }
}

namespace {

Eigen::MatrixXd xavier(int rows, int cols, int fan_in, int fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = u(rng);
  }
  return m;
}

Dense dense(int out, int in, Rng& rng) {
  return Dense{xavier(out, in, in, out, rng), Eigen::VectorXd::Zero(out)};
}

HeadParams head(int in, int hidden, Rng& rng) {
  return HeadParams{dense(hidden, in, rng), dense(1, hidden, rng)};
}

}  // namespace

ModelState ModelState::initialize(const ModelConfig& config, int raw_scene_dim,
                                  std::uint64_t seed) {
  config.validate();
  const auto& e = config.encoder;
  const auto& c = config.fccr;
  Rng rng(derive_seed(seed, "init"));
  ModelState m;
  m.no_fccr = config.no_fccr;
  m.image = dense(e.d_v, raw_scene_dim, rng);
  // A lookup reads one row, so the fan-in is 1.
  m.embedding = xavier(e.vocab_size, e.d_t, 1, e.d_t, rng);
  m.text = dense(e.d_t, e.d_t, rng);
  m.fuse = dense(e.d_cm, e.d_v + e.d_t, rng);
  const int head_in = config.no_fccr ? c.d_f : c.d_c;
  if (config.no_fccr) {
    m.direct = dense(c.d_f, e.d_cm, rng);
  } else {
    const int seg = e.d_cm / c.n_heads;
    for (auto& x : m.extract) {
      x.queries = xavier(c.n_heads, seg, seg, c.n_heads, rng);
      x.proj = dense(c.d_c, e.d_cm, rng);
    }
    m.fusion.type_embedding = xavier(kNumDimensions, c.d_c, kNumDimensions,
                                     c.d_c, rng);
    m.fusion.wq = xavier(c.d_c, c.d_c, c.d_c, c.d_c, rng);
    m.fusion.wk = xavier(c.d_c, c.d_c, c.d_c, c.d_c, rng);
    m.fusion.wv = xavier(c.d_c, c.d_c, c.d_c, c.d_c, rng);
    m.fusion.wo = xavier(c.d_c, c.d_c, c.d_c, c.d_c, rng);
    m.fusion.out = dense(c.d_f, c.d_c, rng);
  }
  m.overall = head(c.d_f, c.hidden, rng);
  for (auto& h : m.heads) h = head(head_in, c.hidden, rng);
  return m;
}

ModelState ModelState::zeros_like() const {
  ModelState z = *this;
  z.set_zero();
  return z;
}

void ModelState::set_zero() {
  for_each_tensor([](const std::string&, auto& t) { t.setZero(); }, *this);
}

std::size_t ModelState::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, auto& t) { n += t.size(); }, *this);
  return n;
}

double ModelState::squared_norm() const {
  double s = 0.0;
  for_each_tensor([&](const std::string&, auto& t) { s += t.squaredNorm(); },
                  *this);
  return s;
}

bool ModelState::all_finite() const {
  bool ok = true;
  for_each_tensor(
      [&](const std::string&, auto& t) { ok = ok && t.allFinite(); }, *this);
  return ok;
}

void ModelState::add_scaled(const ModelState& other, double scale) {
  for_each_tensor(
      [&](const std::string&, auto& a, auto& b) { a += scale * b; }, *this, other);
}

bool operator==(const ModelState& a, const ModelState& b) {
  if (a.no_fccr != b.no_fccr) return false;
  bool same = true;
  for_each_tensor(
      [&](const std::string&, auto& s, auto& t) {
        same = same && s.rows() == t.rows() && s.cols() == t.cols() && s == t;
      },
      a, b);
  return same;
}

std::string checkpoint_to_string(const ModelState& model) {
  std::string out;
  char buf[32];
  for_each_tensor(
      [&](const std::string& path, auto& t) {
        out += path;
        out += ' ' + std::to_string(t.rows()) + ' ' + std::to_string(t.cols());
        for (Eigen::Index i = 0; i < t.size(); ++i) {
          std::snprintf(buf, sizeof(buf), " %.17g", t.data()[i]);
          out += buf;
        }
        out += '\n';
      },
      model);
  return out;
}

ModelState checkpoint_from_string(const std::string& text) {
  std::map<std::string, Eigen::MatrixXd> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string path;
    long rows = -1, cols = -1;
    if (!(ls >> path >> rows >> cols) || rows < 0 || cols < 0) {
      throw DataError("checkpoint line " + std::to_string(line_no) +
                      ": malformed header");
    }
    Eigen::MatrixXd t(rows, cols);
    std::string tok;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (!(ls >> tok)) {
        throw DataError("checkpoint line " + std::to_string(line_no) +
                        ": too few values for " + path);
      }
      t.data()[i] = std::strtod(tok.c_str(), nullptr);
    }
    if (ls >> tok) {
      throw DataError("checkpoint line " + std::to_string(line_no) +
                      ": too many values for " + path);
    }
    entries.emplace(path, std::move(t));
  }
  ModelState m;
  m.no_fccr = entries.count("fccr.direct.w") > 0;
  std::size_t used = 0;
  for_each_tensor(
      [&](const std::string& path, auto& t) {
        auto it = entries.find(path);
        if (it == entries.end()) {
          throw DataError("checkpoint missing parameter " + path);
        }
        const auto& src = it->second;
        if constexpr (std::decay_t<decltype(t)>::ColsAtCompileTime == 1) {
          if (src.cols() != 1) {
            throw DataError("checkpoint parameter " + path +
                            " should be a column vector");
          }
          t = src.col(0);
        } else {
          t = src;
        }
        ++used;
      },
      m);
  if (used != entries.size()) {
    throw DataError("checkpoint contains unknown parameters");
  }
  return m;
}

void save_checkpoint(const ModelState& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out << checkpoint_to_string(model);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace contextguard
