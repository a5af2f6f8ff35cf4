#include "pushlab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace pushlab::nn {

void Standardizer::fit_rows(const MatrixXd& rows, double floor) {
  require(rows.rows() > 0, "Standardizer::fit_rows: no rows");
  mean = rows.colwise().mean();
  VectorXd var = (rows.rowwise() - mean.transpose()).array().square().colwise().mean();
  std = var.array().sqrt().max(floor);
}

void Standardizer::apply_rows_inplace(MatrixXd& rows) const {
  rows.rowwise() -= mean.transpose();
  rows.array().rowwise() /= std.transpose().array();
}

Mlp make_mlp(const std::vector<int>& dims, Rng& rng) {
  require(dims.size() >= 2, "make_mlp: need at least input and output dims");
  Mlp m;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l], fan_out = dims[l + 1];
    const double lim = std::sqrt(6.0 / (fan_in + fan_out));
    MatrixXd W(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) W(r, c) = rng.uniform(-lim, lim);
    m.W.push_back(std::move(W));
    m.b.push_back(VectorXd::Zero(fan_out));
  }
  return m;
}

int param_count(const Mlp& m) {
  int n = 0;
  for (int l = 0; l < m.depth(); ++l)
    n += static_cast<int>(m.W[l].size() + m.b[l].size());
  return n;
}

void to_flat(const Mlp& m, double* dst) {
  for (int l = 0; l < m.depth(); ++l) {
    std::copy(m.W[l].data(), m.W[l].data() + m.W[l].size(), dst);
    dst += m.W[l].size();
    std::copy(m.b[l].data(), m.b[l].data() + m.b[l].size(), dst);
    dst += m.b[l].size();
  }
}

void from_flat(Mlp& m, const double* src) {
  for (int l = 0; l < m.depth(); ++l) {
    std::copy(src, src + m.W[l].size(), m.W[l].data());
    src += m.W[l].size();
    std::copy(src, src + m.b[l].size(), m.b[l].data());
    src += m.b[l].size();
  }
}

MatrixXd mlp_forward(const Mlp& m, const MatrixXd& X, MlpTape* tape) {
  require(X.cols() == m.in_dim(), "mlp_forward: input width mismatch");
  if (tape) {
    tape->acts.clear();
    tape->acts.reserve(m.depth() + 1);
    tape->acts.push_back(X);
  }
  MatrixXd A = X;
  for (int l = 0; l < m.depth(); ++l) {
    MatrixXd Z = A * m.W[l].transpose();
    Z.rowwise() += m.b[l].transpose();
    if (l + 1 < m.depth())
      A = Z.cwiseMax(0.0);
    else
      A = std::move(Z);
    if (tape) tape->acts.push_back(A);
  }
  return A;
}

MlpGrads MlpGrads::zeros_like(const Mlp& m) {
  MlpGrads g;
  for (int l = 0; l < m.depth(); ++l) {
    g.dW.push_back(MatrixXd::Zero(m.W[l].rows(), m.W[l].cols()));
    g.db.push_back(VectorXd::Zero(m.b[l].size()));
  }
  return g;
}

void MlpGrads::set_zero() {
  for (auto& W : dW) W.setZero();
  for (auto& b : db) b.setZero();
}

MatrixXd mlp_backward(const Mlp& m, const MlpTape& tape, const MatrixXd& dY, MlpGrads& acc) {
  require(static_cast<int>(tape.acts.size()) == m.depth() + 1,
          "mlp_backward: tape does not match network depth");
  MatrixXd dZ = dY;  // last layer is linear
  for (int l = m.depth() - 1; l >= 0; --l) {
    acc.dW[l].noalias() += dZ.transpose() * tape.acts[l];
    acc.db[l].noalias() += dZ.colwise().sum().transpose();
    if (l == 0) return dZ * m.W[l];
    MatrixXd dA = dZ * m.W[l];
    // ReLU mask from the stored post-activation of the previous layer.
    dZ = ((tape.acts[l].array() > 0.0).cast<double>() * dA.array()).matrix();
  }
  return dZ;
}

double lr_at(const TrainConfig& cfg, int iteration) {
  require(iteration >= 0, "lr_at: negative iteration");
  const int k = iteration / cfg.decay_every;
  return cfg.lr0 * std::pow(cfg.decay_factor, k);
}

void adam_step(VectorXd& params, const VectorXd& grad, AdamState& state, double lr) {
  require(params.size() == grad.size() && params.size() == state.m.size(),
          "adam_step: size mismatch");
  require(grad.allFinite(), "adam_step: non-finite gradient");
  state.t += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  params.array() -=
      lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + state.eps);
}

GradCheckReport grad_check(const VectorXd& params, const std::function<double(const VectorXd&)>& loss,
                           const VectorXd& analytic, int n_samples, std::uint64_t seed,
                           double step) {
  require(params.size() == analytic.size(), "grad_check: size mismatch");
  GradCheckReport rep;
  Rng rng(seed);
  const int n = static_cast<int>(params.size());
  const double gmax = analytic.cwiseAbs().maxCoeff();
  const double denom_floor = std::max(1e-12, 1e-6 * gmax);
  // Distinct indices via a partial Fisher-Yates shuffle; probes every index
  // when the budget covers the whole vector.
  const int probes = std::min(n_samples, n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int s = 0; s < probes; ++s) {
    const int j = s + rng.uniform_int(n - s);
    std::swap(order[s], order[j]);
  }
  VectorXd p = params;
  for (int s = 0; s < probes; ++s) {
    const int i = order[s];
    const double h = step * std::max(1.0, std::abs(params[i]));
    const double keep = p[i];
    p[i] = keep + h;
    const double lp = loss(p);
    p[i] = keep - h;
    const double lm = loss(p);
    p[i] = keep;
    const double numeric = (lp - lm) / (2.0 * h);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), denom_floor});
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_index = i;
      rep.analytic_at_worst = a;
      rep.numeric_at_worst = numeric;
    }
    ++rep.samples;
  }
  return rep;
}

}  // namespace pushlab::nn
