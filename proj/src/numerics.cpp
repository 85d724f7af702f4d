// SPDX-License-Identifier: Apache-2.0
#include "rda/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "rda/error.hpp"

namespace rda {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    require(row.size() == c, ErrorCategory::Config, "Matrix::from_rows: ragged rows");
    std::copy(row.begin(), row.end(), m.row(i++).begin());
  }
  return m;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

// out = x·W + b
Matrix affine(const Matrix& x, const DenseLayer& layer) {
  const std::size_t n = x.rows(), in = layer.in_dim(), out = layer.out_dim();
  Matrix y(n, out);
  for (std::size_t r = 0; r < n; ++r) {
    auto yr = y.row(r);
    std::copy(layer.bias.begin(), layer.bias.end(), yr.begin());
    const auto xr = x.row(r);
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = xr[k];
      if (xv == 0.0) continue;
      const auto wk = layer.weight.row(k);
      for (std::size_t c = 0; c < out; ++c) yr[c] += xv * wk[c];
    }
  }
  return y;
}

// grad.weight += xᵀ·dy ; grad.bias += colsum(dy)
void accumulate_layer_grad(const Matrix& x, const Matrix& dy, DenseLayer& grad) {
  const std::size_t n = x.rows(), in = x.cols(), out = dy.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const auto xr = x.row(r);
    const auto dr = dy.row(r);
    for (std::size_t c = 0; c < out; ++c) grad.bias[c] += dr[c];
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = xr[k];
      if (xv == 0.0) continue;
      auto gk = grad.weight.row(k);
      for (std::size_t c = 0; c < out; ++c) gk[c] += xv * dr[c];
    }
  }
}

// dx += dy·Wᵀ
void accumulate_input_grad(const Matrix& dy, const DenseLayer& layer, Matrix& dx) {
  const std::size_t n = dy.rows(), in = layer.in_dim(), out = layer.out_dim();
  for (std::size_t r = 0; r < n; ++r) {
    const auto dr = dy.row(r);
    auto xr = dx.row(r);
    for (std::size_t k = 0; k < in; ++k) {
      const auto wk = layer.weight.row(k);
      double acc = 0.0;
      for (std::size_t c = 0; c < out; ++c) acc += dr[c] * wk[c];
      xr[k] += acc;
    }
  }
}

DenseLayer zero_layer(std::size_t in, std::size_t out) {
  return DenseLayer{Matrix(in, out), std::vector<double>(out, 0.0)};
}

DenseLayer random_layer(std::size_t in, std::size_t out, double stddev, std::mt19937_64& rng) {
  DenseLayer layer = zero_layer(in, out);
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& w : layer.weight.values()) w = normal(rng);
  return layer;
}

}  // namespace

std::size_t ModelParams::input_dim() const noexcept {
  return trunk.empty() ? head_d.in_dim() : trunk.front().in_dim();
}

std::size_t ModelParams::feature_dim() const noexcept {
  return trunk.empty() ? head_d.in_dim() : trunk.back().out_dim();
}

std::size_t ModelParams::parameter_count() const noexcept {
  std::size_t total = 0;
  for (const auto& t : tensors()) total += t.size();
  return total;
}

void ModelParams::validate() const {
  auto check_layer = [](const DenseLayer& l) {
    require(l.bias.size() == l.out_dim(), ErrorCategory::Config,
            "dense layer bias length differs from output width");
  };
  std::size_t width = input_dim();
  for (const auto& layer : trunk) {
    check_layer(layer);
    require(layer.in_dim() == width, ErrorCategory::Config, "trunk layer widths do not chain");
    width = layer.out_dim();
  }
  check_layer(head_d);
  check_layer(head_a);
  require(head_d.in_dim() == width && head_a.in_dim() == width, ErrorCategory::Config,
          "head input width differs from trunk output width");
  require(head_d.out_dim() == head_a.out_dim(), ErrorCategory::Config,
          "heads disagree on class count");
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  for (const auto& l : trunk) z.trunk.push_back(zero_layer(l.in_dim(), l.out_dim()));
  z.head_d = zero_layer(head_d.in_dim(), head_d.out_dim());
  z.head_a = zero_layer(head_a.in_dim(), head_a.out_dim());
  return z;
}

std::vector<std::span<double>> ModelParams::tensors() {
  std::vector<std::span<double>> out;
  for (auto& l : trunk) {
    out.emplace_back(l.weight.values());
    out.emplace_back(l.bias);
  }
  out.emplace_back(head_d.weight.values());
  out.emplace_back(head_d.bias);
  out.emplace_back(head_a.weight.values());
  out.emplace_back(head_a.bias);
  return out;
}

std::vector<std::span<const double>> ModelParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : trunk) {
    out.emplace_back(l.weight.values());
    out.emplace_back(l.bias);
  }
  out.emplace_back(head_d.weight.values());
  out.emplace_back(head_d.bias);
  out.emplace_back(head_a.weight.values());
  out.emplace_back(head_a.bias);
  return out;
}

ModelParams ModelParams::zeros(std::size_t input_dim, std::span<const std::size_t> hidden,
                               std::size_t num_classes) {
  ModelParams p;
  std::size_t width = input_dim;
  for (std::size_t h : hidden) {
    p.trunk.push_back(zero_layer(width, h));
    width = h;
  }
  p.head_d = zero_layer(width, num_classes);
  p.head_a = zero_layer(width, num_classes);
  return p;
}

ModelParams ModelParams::initialized(std::size_t input_dim, std::span<const std::size_t> hidden,
                                     std::size_t num_classes, std::mt19937_64& rng) {
  ModelParams p;
  std::size_t width = input_dim;
  for (std::size_t h : hidden) {
    p.trunk.push_back(random_layer(width, h, std::sqrt(2.0 / static_cast<double>(width)), rng));
    width = h;
  }
  const double head_std = std::sqrt(1.0 / static_cast<double>(width));
  p.head_d = random_layer(width, num_classes, head_std, rng);
  p.head_a = random_layer(width, num_classes, head_std, rng);
  return p;
}

ForwardResult forward_two_head(const ModelParams& params, const Matrix& batch) {
  if (batch.cols() != params.input_dim()) {
    std::ostringstream os;
    os << "forward: batch has " << batch.cols() << " columns, model expects "
       << params.input_dim();
    fail(ErrorCategory::Config, os.str());
  }
  ForwardResult result;
  result.cache.input = batch;
  const Matrix* h = &result.cache.input;
  result.cache.activations.reserve(params.trunk.size());
  for (const auto& layer : params.trunk) {
    Matrix z = affine(*h, layer);
    for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
    result.cache.activations.push_back(std::move(z));
    h = &result.cache.activations.back();
  }
  result.logits_d = affine(*h, params.head_d);
  result.logits_a = affine(*h, params.head_a);
  if (!result.logits_d.all_finite() || !result.logits_a.all_finite())
    fail(ErrorCategory::Numerical, "forward: non-finite logits");
  return result;
}

Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Matrix& grad_logits_d, const Matrix& grad_logits_a) {
  const std::size_t n = cache.input.rows();
  bool consistent = cache.activations.size() == params.trunk.size() &&
                    cache.input.cols() == params.input_dim();
  for (std::size_t i = 0; consistent && i < params.trunk.size(); ++i)
    consistent = cache.activations[i].rows() == n &&
                 cache.activations[i].cols() == params.trunk[i].out_dim();
  require(consistent, ErrorCategory::Usage, "backward: cache does not match model");
  require(grad_logits_d.rows() == n && grad_logits_a.rows() == n &&
              grad_logits_d.cols() == params.num_classes() &&
              grad_logits_a.cols() == params.num_classes(),
          ErrorCategory::Usage, "backward: logit gradient shape mismatch");

  Gradients grads = params.zeros_like();
  const Matrix& features = params.trunk.empty() ? cache.input : cache.activations.back();
  accumulate_layer_grad(features, grad_logits_d, grads.head_d);
  accumulate_layer_grad(features, grad_logits_a, grads.head_a);
  if (params.trunk.empty()) return grads;

  Matrix upstream(n, params.feature_dim());
  accumulate_input_grad(grad_logits_d, params.head_d, upstream);
  accumulate_input_grad(grad_logits_a, params.head_a, upstream);

  for (std::size_t i = params.trunk.size(); i-- > 0;) {
    const Matrix& act = cache.activations[i];
    auto up = upstream.values();
    const auto a = act.values();
    for (std::size_t j = 0; j < up.size(); ++j)
      if (a[j] <= 0.0) up[j] = 0.0;
    const Matrix& below = i == 0 ? cache.input : cache.activations[i - 1];
    accumulate_layer_grad(below, upstream, grads.trunk[i]);
    if (i == 0) break;
    Matrix next(n, params.trunk[i].in_dim());
    accumulate_input_grad(upstream, params.trunk[i], next);
    upstream = std::move(next);
  }
  return grads;
}

OptimizerState OptimizerState::for_params(const ModelParams& params, double momentum,
                                          double weight_decay, double base_lr) {
  return OptimizerState{params.zeros_like(), momentum, weight_decay, base_lr};
}

void sgd_step(ModelParams& params, const Gradients& grads, OptimizerState& state, double lr) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto v = state.momentum_buffers.tensors();
  require(p.size() == g.size() && p.size() == v.size(), ErrorCategory::Usage,
          "sgd_step: tensor count mismatch");
  for (std::size_t t = 0; t < p.size(); ++t) {
    require(p[t].size() == g[t].size() && p[t].size() == v[t].size(), ErrorCategory::Usage,
            "sgd_step: tensor shape mismatch");
    for (std::size_t i = 0; i < p[t].size(); ++i) {
      v[t][i] = state.momentum * v[t][i] + g[t][i] + state.weight_decay * p[t][i];
      p[t][i] -= lr * v[t][i];
    }
  }
}

double lr_at(const LrSchedule& schedule, std::size_t step) {
  if (step > schedule.total_steps) {
    std::ostringstream os;
    os << "lr_at: step " << step << " outside [0, " << schedule.total_steps << "]";
    fail(ErrorCategory::Usage, os.str());
  }
  if (schedule.total_steps == 0) return schedule.base_lr;
  const double progress = static_cast<double>(step) / static_cast<double>(schedule.total_steps);
  return schedule.base_lr * std::cos(7.0 * std::numbers::pi * progress / 16.0);
}

GradCheckReport grad_check(const ModelParams& params, const LossFn& loss_fn, double tolerance,
                           std::mt19937_64& rng, std::size_t min_coordinates, double step) {
  const std::size_t total = params.parameter_count();
  require(total > 0, ErrorCategory::Usage, "grad_check: model has no parameters");
  require(min_coordinates > 0, ErrorCategory::Usage, "grad_check: empty coordinate subsample");

  Gradients analytic = params.zeros_like();
  const double base = loss_fn(params, &analytic);
  if (!std::isfinite(base)) fail(ErrorCategory::Numerical, "grad_check: non-finite loss");

  std::vector<std::size_t> coords(total);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (total > min_coordinates) {
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(min_coordinates);
  }

  // Flat index -> (tensor, offset).
  const auto sizes = [&] {
    std::vector<std::size_t> s;
    for (const auto& t : params.tensors()) s.push_back(t.size());
    return s;
  }();
  auto locate = [&](std::size_t flat) {
    std::size_t t = 0;
    while (flat >= sizes[t]) flat -= sizes[t++];
    return std::pair{t, flat};
  };

  GradCheckReport report;
  ModelParams probe = params;
  const auto grad_tensors = std::as_const(analytic).tensors();
  for (std::size_t flat : coords) {
    const auto [t, off] = locate(flat);
    double& slot = probe.tensors()[t][off];
    const double original = slot;
    slot = original + step;
    const double up = loss_fn(probe, nullptr);
    slot = original - step;
    const double down = loss_fn(probe, nullptr);
    slot = original;
    if (!std::isfinite(up) || !std::isfinite(down))
      fail(ErrorCategory::Numerical, "grad_check: non-finite loss under perturbation");
    const double numeric = (up - down) / (2.0 * step);
    const double a = grad_tensors[t][off];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > report.max_relative_error || report.coordinates_checked == 0) {
      report.max_relative_error = rel;
      report.worst_coordinate = flat;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
    ++report.coordinates_checked;
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

}  // namespace rda
