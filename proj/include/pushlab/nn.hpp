#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "pushlab/common.hpp"
#include "pushlab/rng.hpp"

namespace pushlab::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Per-feature affine normalization; apply() maps raw -> standardized and
// invert() recovers the input exactly (stds are floored at 1e-8 when fitted).
struct Standardizer {
  VectorXd mean;
  VectorXd std;

  static Standardizer identity(int n) {
    Standardizer s;
    s.mean = VectorXd::Zero(n);
    s.std = VectorXd::Ones(n);
    return s;
  }
  int size() const { return static_cast<int>(mean.size()); }
  void fit_rows(const MatrixXd& rows, double floor = 1e-8);
  VectorXd apply(const VectorXd& x) const { return (x - mean).cwiseQuotient(std); }
  VectorXd invert(const VectorXd& z) const { return z.cwiseProduct(std) + mean; }
  void apply_rows_inplace(MatrixXd& rows) const;
};

// Fully connected stack, ReLU after every layer except the last.
struct Mlp {
  std::vector<MatrixXd> W;  // W[l] is out x in
  std::vector<VectorXd> b;

  int depth() const { return static_cast<int>(W.size()); }
  int in_dim() const { return static_cast<int>(W.front().cols()); }
  int out_dim() const { return static_cast<int>(W.back().rows()); }
};

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases, consuming
// the rng in a fixed (layer, row, col) order so inits replay bit-identically.
Mlp make_mlp(const std::vector<int>& dims, Rng& rng);

int param_count(const Mlp& m);
void to_flat(const Mlp& m, double* dst);
void from_flat(Mlp& m, const double* src);

struct MlpTape {
  std::vector<MatrixXd> acts;  // acts[0] = input rows, acts[l+1] = layer l output
};

// Rows of X are independent samples. Writes layer activations into tape when given.
MatrixXd mlp_forward(const Mlp& m, const MatrixXd& X, MlpTape* tape = nullptr);

struct MlpGrads {
  std::vector<MatrixXd> dW;
  std::vector<VectorXd> db;

  static MlpGrads zeros_like(const Mlp& m);
  void set_zero();
};

// Backward for the batch recorded in tape. Accumulates parameter gradients into
// acc and returns dL/dX.
MatrixXd mlp_backward(const Mlp& m, const MlpTape& tape, const MatrixXd& dY, MlpGrads& acc);

struct TrainConfig {
  double lr0 = 1e-3;
  double decay_factor = 0.5;
  int decay_every = 2500;
  int iterations = 10000;
  int batch_size = 100;     // trajectories per iteration
  double l2_lambda = 1e-3;
  int rollout_length = 200; // BPTT window, engine steps
  double grad_clip = 5.0;   // global norm
  std::uint64_t seed = 1;
  int eval_every = 500;     // cadence for held-out loss logging / revert snapshots
};

// Stepwise decay: lr0 * decay_factor^floor(iteration / decay_every).
double lr_at(const TrainConfig& cfg, int iteration);

struct AdamState {
  VectorXd m, v;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  void init(int n) {
    m = VectorXd::Zero(n);
    v = VectorXd::Zero(n);
    t = 0;
  }
};

// Bias-corrected Adam update on a flat parameter vector. Throws on non-finite
// gradients (callers attach the offending parameter-block name).
void adam_step(VectorXd& params, const VectorXd& grad, AdamState& state, double lr);

struct GradCheckReport {
  double max_rel_error = 0.0;
  int worst_index = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  int samples = 0;
};

// Central-difference check of `analytic` against loss(params) on a random
// subsample of distinct parameter indices (all of them when n_samples >= size).
// Relative error uses a magnitude-aware floor so near-zero gradients with
// matching absolute error do not dominate. The default step balances truncation
// against cancellation for losses of magnitude ~1e3.
GradCheckReport grad_check(const VectorXd& params, const std::function<double(const VectorXd&)>& loss,
                           const VectorXd& analytic, int n_samples, std::uint64_t seed,
                           double step = 1e-5);

}  // namespace pushlab::nn
