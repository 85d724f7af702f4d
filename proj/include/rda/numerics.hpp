// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace rda {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Affine map y = x·W + b with W stored as (in × out).
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return weight.cols(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Shared ReLU trunk feeding a default head and an auxiliary head. An empty
/// trunk means both heads read the raw input.
struct ModelParams {
  std::vector<DenseLayer> trunk;
  DenseLayer head_d;
  DenseLayer head_a;

  std::size_t input_dim() const noexcept;
  std::size_t feature_dim() const noexcept;
  std::size_t num_classes() const noexcept { return head_d.out_dim(); }
  std::size_t parameter_count() const noexcept;

  /// Throws a config error when layer widths do not chain.
  void validate() const;

  /// Same shapes, all zeros.
  ModelParams zeros_like() const;

  /// Flat views over every tensor in a fixed order: trunk (weight, bias)
  /// pairs, then head_d, then head_a.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  static ModelParams zeros(std::size_t input_dim, std::span<const std::size_t> hidden,
                           std::size_t num_classes);
  /// He-normal trunk, fan-in scaled heads, zero biases.
  static ModelParams initialized(std::size_t input_dim, std::span<const std::size_t> hidden,
                                 std::size_t num_classes, std::mt19937_64& rng);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using Gradients = ModelParams;

/// Post-ReLU activations of every trunk layer plus the input, enough to run
/// the backward pass.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> activations;
};

struct ForwardResult {
  Matrix logits_d;
  Matrix logits_a;
  ForwardCache cache;
};

ForwardResult forward_two_head(const ModelParams& params, const Matrix& batch);

/// Exact gradients of a scalar loss given its gradients w.r.t. both heads'
/// logits. Trunk gradients accumulate the contributions of both heads.
Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const Matrix& grad_logits_d, const Matrix& grad_logits_a);

struct OptimizerState {
  Gradients momentum_buffers;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double base_lr = 0.03;

  static OptimizerState for_params(const ModelParams& params, double momentum = 0.9,
                                   double weight_decay = 0.0005, double base_lr = 0.03);
};

/// v <- momentum*v + grad + weight_decay*param; param <- param - lr*v.
/// Decay applies to biases as well.
void sgd_step(ModelParams& params, const Gradients& grads, OptimizerState& state, double lr);

struct LrSchedule {
  double base_lr = 0.03;
  std::size_t total_steps = 0;
};

/// base_lr * cos(7*pi*step / (16*total_steps)).
double lr_at(const LrSchedule& schedule, std::size_t step);

/// Loss callback for gradient checking. Must write analytic gradients into
/// `grads` when it is non-null.
using LossFn = std::function<double(const ModelParams& params, Gradients* grads)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t worst_coordinate = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

/// Central differences on a random subsample of at least `min_coordinates`
/// coordinates (all of them when the model is smaller). Relative error is
/// |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(const ModelParams& params, const LossFn& loss_fn, double tolerance,
                           std::mt19937_64& rng, std::size_t min_coordinates = 200,
                           double step = 1e-5);

}  // namespace rda
