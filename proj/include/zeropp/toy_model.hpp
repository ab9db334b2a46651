// Copyright 2026 The zeropp-sim Authors. All Rights Reserved.
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
// =============================================================================
#pragma once

// Small dense network used as the training workload: L fully connected
// layers, tanh between them, linear output, mean squared error. Everything is
// computed in double; precision effects are introduced only where parameters
// and gradients cross rank boundaries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zeropp/error.hpp"

namespace zeropp {

struct Batch {
  std::size_t size = 0;
  std::vector<double> inputs;   // size x in_dim, row-major
  std::vector<double> targets;  // size x out_dim, row-major
};

// Per-sample activations of one forward pass, kept for the backward pass.
struct ForwardCache {
  std::vector<std::vector<double>> acts;  // acts[0] = inputs, acts[l+1] = output of layer l
};

class ToyModel {
 public:
  explicit ToyModel(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw ValidationError("ToyModel: need at least one layer");
    for (std::size_t w : widths_) {
      if (w == 0) throw ValidationError("ToyModel: zero-width layer");
    }
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      offsets_.push_back(off);
      off += widths_[l + 1] * widths_[l] + widths_[l + 1];
    }
    params_ = off;
  }

  // Four layers of width 64.
  static ToyModel standard() { return ToyModel({16, 64, 64, 64, 4}); }

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t layers() const { return widths_.size() - 1; }
  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  std::size_t param_count() const { return params_; }

  // Layer l stores W (out x in, row-major) followed by b (out).
  std::size_t weight_offset(std::size_t l) const { return offsets_[l]; }
  std::size_t bias_offset(std::size_t l) const {
    return offsets_[l] + widths_[l + 1] * widths_[l];
  }

  // Scaled-normal weights, zero biases.
  std::vector<double> init(std::uint64_t seed, double gain = 1.0) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> p(params_, 0.0);
    for (std::size_t l = 0; l < layers(); ++l) {
      const double sd = gain / std::sqrt(static_cast<double>(widths_[l]));
      const std::size_t n = widths_[l + 1] * widths_[l];
      for (std::size_t i = 0; i < n; ++i) p[weight_offset(l) + i] = sd * normal(rng);
    }
    return p;
  }

  std::vector<double> predict(std::span<const double> params, const Batch& batch,
                              ForwardCache* cache = nullptr) const {
    check(params, batch);
    ForwardCache local;
    ForwardCache& c = cache != nullptr ? *cache : local;
    c.acts.assign(widths_.size(), {});
    c.acts[0] = batch.inputs;
    for (std::size_t l = 0; l < layers(); ++l) {
      const std::size_t in = widths_[l];
      const std::size_t out = widths_[l + 1];
      const double* w = params.data() + weight_offset(l);
      const double* b = params.data() + bias_offset(l);
      const auto& a = c.acts[l];
      auto& z = c.acts[l + 1];
      z.assign(batch.size * out, 0.0);
      const bool hidden = l + 1 < layers();
      for (std::size_t n = 0; n < batch.size; ++n) {
        const double* an = a.data() + n * in;
        for (std::size_t o = 0; o < out; ++o) {
          double s = b[o];
          const double* wo = w + o * in;
          for (std::size_t i = 0; i < in; ++i) s += wo[i] * an[i];
          z[n * out + o] = hidden ? std::tanh(s) : s;
        }
      }
    }
    return c.acts.back();
  }

  // Mean over samples and outputs of (y - t)^2.
  double loss(std::span<const double> params, const Batch& batch,
              ForwardCache* cache = nullptr) const {
    const std::vector<double> y = predict(params, batch, cache);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - batch.targets[i];
      s += d * d;
    }
    return s / static_cast<double>(y.size());
  }

  // Gradient of loss() at `params`; `cache` must come from a forward pass
  // with the same parameters and batch.
  std::vector<double> backward(std::span<const double> params, const Batch& batch,
                               const ForwardCache& cache) const {
    check(params, batch);
    if (cache.acts.size() != widths_.size()) throw ValidationError("ToyModel: stale cache");
    std::vector<double> grad(params_, 0.0);
    const std::size_t out_dim = widths_.back();
    const double norm = 2.0 / static_cast<double>(batch.size * out_dim);
    std::vector<double> delta(batch.size * out_dim);
    for (std::size_t i = 0; i < delta.size(); ++i) {
      delta[i] = norm * (cache.acts.back()[i] - batch.targets[i]);
    }
    for (std::size_t l = layers(); l-- > 0;) {
      const std::size_t in = widths_[l];
      const std::size_t out = widths_[l + 1];
      const double* w = params.data() + weight_offset(l);
      double* gw = grad.data() + weight_offset(l);
      double* gb = grad.data() + bias_offset(l);
      const auto& a = cache.acts[l];
      std::vector<double> prev(l > 0 ? batch.size * in : 0, 0.0);
      for (std::size_t n = 0; n < batch.size; ++n) {
        const double* an = a.data() + n * in;
        for (std::size_t o = 0; o < out; ++o) {
          const double d = delta[n * out + o];
          gb[o] += d;
          double* gwo = gw + o * in;
          for (std::size_t i = 0; i < in; ++i) gwo[i] += d * an[i];
          if (l > 0) {
            const double* wo = w + o * in;
            for (std::size_t i = 0; i < in; ++i) prev[n * in + i] += d * wo[i];
          }
        }
      }
      if (l > 0) {
        for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= 1.0 - a[i] * a[i];
        delta = std::move(prev);
      }
    }
    return grad;
  }

 private:
  void check(std::span<const double> params, const Batch& batch) const {
    if (params.size() < params_) {
      throw ValidationError("ToyModel: expected " + std::to_string(params_) + " parameters, got " +
                            std::to_string(params.size()));
    }
    if (batch.inputs.size() != batch.size * in_dim() ||
        batch.targets.size() != batch.size * out_dim()) {
      throw ValidationError("ToyModel: batch shape mismatch");
    }
  }

  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;
  std::size_t params_ = 0;
};

// Regression targets produced by a fixed random teacher network of the same
// shape. Inputs are standard normal. Every batch is a pure function of
// (seed, stream, size), so all variants of an experiment see the same data.
class SyntheticRegression {
 public:
  SyntheticRegression(const ToyModel& model, std::uint64_t seed, double teacher_gain = 1.5)
      : model_(model), seed_(seed), teacher_(model.init(seed ^ 0x7ea3c4e5d1b2a90fULL, teacher_gain)) {}

  Batch sample(std::uint64_t stream, std::size_t n) const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    Batch b;
    b.size = n;
    b.inputs.resize(n * model_.in_dim());
    for (double& x : b.inputs) x = normal(rng);
    b.targets.assign(n * model_.out_dim(), 0.0);
    b.targets = model_.predict(teacher_, b);
    return b;
  }

  // Held-out data lives on a stream no training batch uses.
  Batch validation(std::size_t n) const { return sample(~std::uint64_t{0}, n); }

  const std::vector<double>& teacher() const { return teacher_; }

 private:
  ToyModel model_;
  std::uint64_t seed_;
  std::vector<double> teacher_;
};

// Central finite differences of loss() against backward(). Returns the largest
// relative error over the probed coordinates, with |g| floored at `floor`.
inline double gradient_check(const ToyModel& model, std::span<const double> params,
                             const Batch& batch, std::span<const std::size_t> coords,
                             double h = 1e-6, double floor = 1e-6) {
  ForwardCache cache;
  model.loss(params, batch, &cache);
  const std::vector<double> g = model.backward(params, batch, cache);
  std::vector<double> p(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t i : coords) {
    if (i >= p.size()) throw ValidationError("gradient_check: coordinate out of range");
    const double keep = p[i];
    p[i] = keep + h;
    const double up = model.loss(p, batch);
    p[i] = keep - h;
    const double down = model.loss(p, batch);
    p[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::fabs(fd), std::fabs(g[i]), floor});
    worst = std::max(worst, std::fabs(fd - g[i]) / denom);
  }
  return worst;
}

}  // namespace zeropp
