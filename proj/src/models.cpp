#include "pushlab/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace pushlab::model {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::Vector4d;
using Eigen::VectorXd;

namespace {

struct PairTable {
  std::vector<int> recv, send;
  int count = 0;
};

PairTable make_pairs(int n) {
  PairTable p;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i) {
        p.recv.push_back(i);
        p.send.push_back(j);
      }
  p.count = static_cast<int>(p.recv.size());
  return p;
}

// Streaming per-column mean/std so codec fitting never materializes the full
// feature matrix.
struct StreamStats {
  VectorXd sum, sumsq;
  long n = 0;

  explicit StreamStats(int k) : sum(VectorXd::Zero(k)), sumsq(VectorXd::Zero(k)) {}

  void add(const double* row) {
    for (int c = 0; c < sum.size(); ++c) {
      sum[c] += row[c];
      sumsq[c] += row[c] * row[c];
    }
    ++n;
  }

  nn::Standardizer finalize(double floor = 1e-8) const {
    require(n > 0, "feature statistics: no rows");
    nn::Standardizer s;
    s.mean = sum / double(n);
    s.std = (sumsq / double(n) - s.mean.cwiseProduct(s.mean)).cwiseMax(0.0).cwiseSqrt();
    for (int c = 0; c < s.std.size(); ++c)
      if (s.std[c] < floor) s.std[c] = floor;
    return s;
  }
};

ObjState obj_from_row(const Eigen::MatrixXd& states, int t, int i, double m, double r) {
  ObjState o;
  o.x = states(t, i * 6 + 0);
  o.y = states(t, i * 6 + 1);
  o.theta = states(t, i * 6 + 2);
  o.vx = states(t, i * 6 + 3);
  o.vy = states(t, i * 6 + 4);
  o.omega = states(t, i * 6 + 5);
  o.m = m;
  o.r = r;
  return o;
}

void add_grads_to_flat(const nn::Mlp& rel, const nn::MlpGrads& gr, const nn::Mlp& dyn,
                       const nn::MlpGrads& gd, VectorXd& out) {
  double* dst = out.data();
  auto emit = [&dst](const nn::Mlp& shape, const nn::MlpGrads& g) {
    for (int l = 0; l < shape.depth(); ++l) {
      Eigen::Map<VectorXd>(dst, g.dW[l].size()) +=
          Eigen::Map<const VectorXd>(g.dW[l].data(), g.dW[l].size());
      dst += g.dW[l].size();
      Eigen::Map<VectorXd>(dst, g.db[l].size()) +=
          Eigen::Map<const VectorXd>(g.db[l].data(), g.db[l].size());
      dst += g.db[l].size();
    }
  };
  emit(rel, gr);
  emit(dyn, gd);
}

bool nominal_equal(const sim::NominalSpec& a, const sim::NominalSpec& b) {
  return a.mu == b.mu && a.gravity == b.gravity && a.masses == b.masses &&
         a.radii == b.radii && a.sim.dt == b.sim.dt;
}

// Lockstep rollout of uniform windows (same object count, step count, truth
// availability). Forward optionally tapes activations; backward runs BPTT over
// the whole horizon and accumulates flat parameter gradients.
class Roller {
 public:
  Roller(const ModelParams& params, const std::vector<const Window*>& wins, bool with_tape)
      : P_(params), win_(wins), tape_(with_tape) {
    require(!wins.empty(), "rollout: no windows");
    n_ = static_cast<int>(wins[0]->init.size());
    T_ = static_cast<int>(wins[0]->actions.rows());
    dt_ = wins[0]->dt;
    has_truth_ = wins[0]->truth.size() > 0;
    S_ = static_cast<int>(wins.size());
    require(n_ >= 1 && T_ >= 1, "rollout: empty window");
    const bool sain = P_.kind == ModelKind::kSain;
    for (const Window* w : wins) {
      require(static_cast<int>(w->init.size()) == n_, "rollout: object count mismatch");
      require(w->actions.rows() == T_ && w->actions.cols() == 2, "rollout: bad action shape");
      require(w->dt == dt_, "rollout: dt mismatch");
      require((w->truth.size() > 0) == has_truth_, "rollout: mixed truth availability");
      if (has_truth_)
        require(w->truth.rows() == T_ + 1 && w->truth.cols() == n_ * 6,
                "rollout: bad truth shape");
      if (sain)
        require(w->eng_dv.rows() == T_ && w->eng_dv.cols() == n_ * 3 &&
                    w->eng_dp.rows() == T_ && w->eng_dp.cols() == n_ * 4,
                "rollout: missing engine deltas");
    }
    pairs_ = make_pairs(n_);
    require(P_.codec.rel_in.size() == rel_width(P_.kind) &&
                P_.codec.dyn_in.size() == dyn_width(P_.kind) &&
                P_.codec.dyn_out.size() == kDynOutWidth,
            "rollout: codec width mismatch");
    require(P_.f_rel.in_dim() == rel_width(P_.kind) && P_.f_rel.out_dim() == kEffectWidth &&
                P_.f_dyn.in_dim() == dyn_width(P_.kind) && P_.f_dyn.out_dim() == kDynOutWidth,
            "rollout: network width mismatch");
  }

  void forward() {
    const bool sain = P_.kind == ModelKind::kSain;
    const int rw = rel_width(P_.kind);
    const int dw = dyn_width(P_.kind);
    const int rows = S_ * n_;
    const int prow = S_ * pairs_.count;

    states_.assign(T_ + 1, MatrixXd(rows, 6));
    cur_.resize(rows);
    pus_.resize(static_cast<size_t>(T_ + 1) * S_);
    for (int s = 0; s < S_; ++s) {
      const Window& w = *win_[s];
      for (int i = 0; i < n_; ++i) {
        const ObjState& o = w.init[i];
        cur_[row(s, i)] = o;
        states_[0].row(row(s, i)) << o.x, o.y, o.theta, o.vx, o.vy, o.omega;
      }
      Vec2 p = w.pusher0;
      pus_[s] = p;
      for (int t = 0; t < T_; ++t) {
        p += dt_ * Vec2(w.actions(t, 0), w.actions(t, 1));
        pus_[static_cast<size_t>(t + 1) * S_ + s] = p;
      }
    }
    if (tape_) {
      rel_tape_.assign(T_, nn::MlpTape{});
      dyn_tape_.assign(T_, nn::MlpTape{});
    }
    loss_ = 0.0;

    const RowVectorXd out_std = P_.codec.dyn_out.std.transpose();
    const RowVectorXd out_mu = P_.codec.dyn_out.mean.transpose();
    MatrixXd Xrel(prow, rw), Xdyn(rows, dw);
    std::vector<ObjState> scratch(n_);
    double rbuf[32], dbuf[32];

    for (int t = 0; t < T_; ++t) {
      for (int s = 0; s < S_; ++s) {
        const Window& w = *win_[s];
        for (int k = 0; k < pairs_.count; ++k) {
          const ObjState& oi = cur_[row(s, pairs_.recv[k])];
          const ObjState& oj = cur_[row(s, pairs_.send[k])];
          Vec3 dv = Vec3::Zero();
          if (sain) dv = w.eng_dv.block<1, 3>(t, pairs_.recv[k] * 3).transpose();
          rel_features(P_.kind, oi, oj, dv, rbuf);
          Xrel.row(s * pairs_.count + k) = Eigen::Map<const RowVectorXd>(rbuf, rw);
        }
      }
      P_.codec.rel_in.apply_rows_inplace(Xrel);
      MatrixXd E = nn::mlp_forward(P_.f_rel, Xrel, tape_ ? &rel_tape_[t] : nullptr);

      MatrixXd Eff = MatrixXd::Zero(rows, kEffectWidth);
      for (int s = 0; s < S_; ++s)
        for (int k = 0; k < pairs_.count; ++k)
          Eff.row(row(s, pairs_.recv[k])) += E.row(s * pairs_.count + k);

      for (int s = 0; s < S_; ++s) {
        const Window& w = *win_[s];
        for (int i = 0; i < n_; ++i) scratch[i] = cur_[row(s, i)];
        const Vec2& pp = pus_[static_cast<size_t>(t) * S_ + s];
        int ci = contacted_object(pp, w.pusher_radius, scratch, kActionContactMargin);
        for (int i = 0; i < n_; ++i) {
          Vec2 act = Vec2::Zero();
          if (i == ci) act = Vec2(w.actions(t, 0), w.actions(t, 1));
          Vector4d dp(0, 0, 0, 1);
          if (sain) dp = w.eng_dp.block<1, 4>(t, i * 4).transpose();
          Eigen::Matrix<double, 1, kEffectWidth> eff = Eff.row(row(s, i));
          dyn_features(P_.kind, cur_[row(s, i)], act, eff.data(), dp, dbuf);
          Xdyn.row(row(s, i)) = Eigen::Map<const RowVectorXd>(dbuf, dw);
        }
      }
      P_.codec.dyn_in.apply_rows_inplace(Xdyn);
      MatrixXd Z = nn::mlp_forward(P_.f_dyn, Xdyn, tape_ ? &dyn_tape_[t] : nullptr);
      Z.array().rowwise() *= out_std.array();
      Z.array().rowwise() += out_mu.array();

      const MatrixXd& S0 = states_[t];
      MatrixXd& S1 = states_[t + 1];
      for (int r = 0; r < rows; ++r) {
        const double vx = S0(r, 3) + dt_ * Z(r, 0);
        const double vy = S0(r, 4) + dt_ * Z(r, 1);
        const double om = S0(r, 5) + dt_ * Z(r, 2);
        S1(r, 3) = vx;
        S1(r, 4) = vy;
        S1(r, 5) = om;
        S1(r, 0) = S0(r, 0) + dt_ * vx;
        S1(r, 1) = S0(r, 1) + dt_ * vy;
        S1(r, 2) = S0(r, 2) + dt_ * om;
        ObjState& o = cur_[r];
        o.x = S1(r, 0);
        o.y = S1(r, 1);
        o.theta = S1(r, 2);
        o.vx = vx;
        o.vy = vy;
        o.omega = om;
      }

      if (has_truth_) {
        for (int s = 0; s < S_; ++s) {
          const Eigen::MatrixXd& tr = win_[s]->truth;
          double acc = 0.0;
          for (int i = 0; i < n_; ++i) {
            const int r = row(s, i);
            const double dx = S1(r, 0) - tr(t + 1, i * 6 + 0);
            const double dy = S1(r, 1) - tr(t + 1, i * 6 + 1);
            const double ds = std::sin(S1(r, 2)) - std::sin(tr(t + 1, i * 6 + 2));
            const double dc = std::cos(S1(r, 2)) - std::cos(tr(t + 1, i * 6 + 2));
            const double dvx = S1(r, 3) - tr(t + 1, i * 6 + 3);
            const double dvy = S1(r, 4) - tr(t + 1, i * 6 + 4);
            const double dom = S1(r, 5) - tr(t + 1, i * 6 + 5);
            acc += dx * dx + dy * dy + ds * ds + dc * dc + dvx * dvx + dvy * dvy + dom * dom;
          }
          loss_ += acc / double(T_);
        }
      }
    }
  }

  // Accumulates d(scale * data_loss)/d(theta) into grad (flat layout of
  // ModelParams::to_flat). Needs a taped forward pass with truth.
  void backward(double scale, VectorXd& grad) {
    require(tape_ && has_truth_, "rollout backward: needs tape and truth");
    const int rows = S_ * n_;
    nn::MlpGrads gr = nn::MlpGrads::zeros_like(P_.f_rel);
    nn::MlpGrads gd = nn::MlpGrads::zeros_like(P_.f_dyn);
    MatrixXd Gp = MatrixXd::Zero(rows, 3), Gv = MatrixXd::Zero(rows, 3);
    const RowVectorXd rel_std = P_.codec.rel_in.std.transpose();
    const RowVectorXd dyn_std = P_.codec.dyn_in.std.transpose();
    const RowVectorXd out_std = P_.codec.dyn_out.std.transpose();

    for (int t = T_ - 1; t >= 0; --t) {
      const MatrixXd& S1 = states_[t + 1];
      const double f = scale * 2.0 / double(T_);
      for (int s = 0; s < S_; ++s) {
        const Eigen::MatrixXd& tr = win_[s]->truth;
        for (int i = 0; i < n_; ++i) {
          const int r = row(s, i);
          Gp(r, 0) += f * (S1(r, 0) - tr(t + 1, i * 6 + 0));
          Gp(r, 1) += f * (S1(r, 1) - tr(t + 1, i * 6 + 1));
          const double sh = std::sin(S1(r, 2)), ch = std::cos(S1(r, 2));
          const double st = std::sin(tr(t + 1, i * 6 + 2)), ct = std::cos(tr(t + 1, i * 6 + 2));
          Gp(r, 2) += f * ((sh - st) * ch - (ch - ct) * sh);
          Gv(r, 0) += f * (S1(r, 3) - tr(t + 1, i * 6 + 3));
          Gv(r, 1) += f * (S1(r, 4) - tr(t + 1, i * 6 + 4));
          Gv(r, 2) += f * (S1(r, 5) - tr(t + 1, i * 6 + 5));
        }
      }

      MatrixXd Gvh = Gv + dt_ * Gp;                 // d loss / d v_{t+1}
      MatrixXd gz = dt_ * Gvh;
      gz.array().rowwise() *= out_std.array();      // network output is standardized
      MatrixXd dXdyn = nn::mlp_backward(P_.f_dyn, dyn_tape_[t], gz, gd);
      dXdyn.array().rowwise() /= dyn_std.array();   // back through input standardization

      MatrixXd dE(S_ * pairs_.count, kEffectWidth);
      for (int s = 0; s < S_; ++s)
        for (int k = 0; k < pairs_.count; ++k)
          dE.row(s * pairs_.count + k) =
              dXdyn.block<1, kEffectWidth>(row(s, pairs_.recv[k]), kEffectOffset);
      MatrixXd dXrel = nn::mlp_backward(P_.f_rel, rel_tape_[t], dE, gr);
      dXrel.array().rowwise() /= rel_std.array();

      MatrixXd GvN = Gvh + dXdyn.leftCols<3>();
      MatrixXd GpN = Gp;
      const MatrixXd& S0 = states_[t];
      for (int s = 0; s < S_; ++s) {
        for (int k = 0; k < pairs_.count; ++k) {
          const int ri = row(s, pairs_.recv[k]);
          const int rj = row(s, pairs_.send[k]);
          const auto g = dXrel.row(s * pairs_.count + k);
          GvN.row(ri) += g.segment<3>(0) + g.segment<3>(7);
          GvN.row(rj) -= g.segment<3>(7);
          GpN(ri, 0) += g(3);
          GpN(ri, 1) += g(4);
          GpN(rj, 0) -= g(3);
          GpN(rj, 1) -= g(4);
          const double d = S0(ri, 2) - S0(rj, 2);
          const double gth = g(5) * std::cos(d) - g(6) * std::sin(d);
          GpN(ri, 2) += gth;
          GpN(rj, 2) -= gth;
        }
      }
      Gv = std::move(GvN);
      Gp = std::move(GpN);
    }
    add_grads_to_flat(P_.f_rel, gr, P_.f_dyn, gd, grad);
  }

  double data_loss() const { return loss_; }
  bool has_truth() const { return has_truth_; }

  MatrixXd window_states(int s) const {
    MatrixXd out(T_ + 1, n_ * 6);
    for (int t = 0; t <= T_; ++t)
      for (int i = 0; i < n_; ++i) out.block<1, 6>(t, i * 6) = states_[t].row(row(s, i));
    return out;
  }

 private:
  int row(int s, int i) const { return s * n_ + i; }

  const ModelParams& P_;
  const std::vector<const Window*>& win_;
  int S_ = 0, n_ = 0, T_ = 0;
  double dt_ = 1.0 / 240.0;
  bool tape_ = false;
  bool has_truth_ = false;
  PairTable pairs_;
  std::vector<ObjState> cur_;
  std::vector<MatrixXd> states_;
  std::vector<Vec2> pus_;
  std::vector<nn::MlpTape> rel_tape_, dyn_tape_;
  double loss_ = 0.0;
};

std::vector<const Window*> as_ptrs(const std::vector<Window>& w) {
  std::vector<const Window*> p;
  p.reserve(w.size());
  for (const Window& x : w) p.push_back(&x);
  return p;
}

}  // namespace

int ModelParams::param_count() const {
  return nn::param_count(f_rel) + nn::param_count(f_dyn);
}

VectorXd ModelParams::to_flat() const {
  VectorXd v(param_count());
  nn::to_flat(f_rel, v.data());
  nn::to_flat(f_dyn, v.data() + nn::param_count(f_rel));
  return v;
}

void ModelParams::from_flat(const VectorXd& flat) {
  require(flat.size() == param_count(), "model params: flat size mismatch");
  nn::from_flat(f_rel, flat.data());
  nn::from_flat(f_dyn, flat.data() + nn::param_count(f_rel));
}

ModelParams make_model(ModelKind kind, std::uint64_t seed) {
  ModelParams p;
  p.kind = kind;
  Rng rel_rng(derive_seed(seed, 0x51));
  Rng dyn_rng(derive_seed(seed, 0x52));
  p.f_rel = nn::make_mlp({rel_width(kind), 128, 64, 32, 16, kEffectWidth}, rel_rng);
  p.f_dyn = nn::make_mlp({dyn_width(kind), 128, 64, 32, 16, kDynOutWidth}, dyn_rng);
  p.codec = FeatureCodec::identity(kind);
  return p;
}

void fill_engine_deltas(const sim::NominalSpec& nominal, Window& win) {
  const int T = static_cast<int>(win.actions.rows());
  const int n = static_cast<int>(win.init.size());
  require(T >= 1 && n >= 1, "engine deltas: empty window");
  require(nominal.sim.dt == win.dt, "engine deltas: dt mismatch");

  sim::WorldState w;
  w.disks.resize(n);
  for (int i = 0; i < n; ++i) {
    const ObjState& o = win.init[i];
    w.disks[i].pose = {o.x, o.y, wrap_angle(o.theta)};
    w.disks[i].twist = {o.vx, o.vy, o.omega};
    w.disks[i].mass = o.m;
    w.disks[i].radius = o.r;
  }
  w.pusher.position = win.pusher0;
  w.pusher.radius = win.pusher_radius;
  w.pusher.velocity = Vec2::Zero();
  sim::WorldState nom = nominal.substitute(w);

  std::vector<Vec2> plan(T);
  for (int t = 0; t < T; ++t) plan[t] = Vec2(win.actions(t, 0), win.actions(t, 1));
  sim::Trajectory traj = sim::rollout_physics(nom, plan, nominal.sim);

  win.eng_dv.resize(T, n * 3);
  win.eng_dp.resize(T, n * 4);
  std::vector<ObjState> prev = to_obj_states(traj.states[0]);
  for (int t = 0; t < T; ++t) {
    std::vector<ObjState> next = to_obj_states(traj.states[t + 1]);
    for (int i = 0; i < n; ++i) {
      win.eng_dv.block<1, 3>(t, i * 3) = engine_velocity_delta(prev[i], next[i]).transpose();
      win.eng_dp.block<1, 4>(t, i * 4) = engine_pose_delta(prev[i], next[i]).transpose();
    }
    prev = std::move(next);
  }
}

Window make_window(const data::Dataset& ds, const data::TrajectoryRecord& rec, int t0,
                   int T, ModelKind kind, const sim::NominalSpec& nominal, bool with_truth) {
  const int n = ds.n_disks;
  require(t0 >= 0 && T >= 1 && t0 + T <= rec.actions.rows(), "window: range out of bounds");
  require(rec.states.cols() == n * 6 + 4, "window: record width mismatch");

  Window win;
  win.dt = ds.sim.dt;
  win.pusher_radius = ds.scene_spec.pusher_radius;
  win.init.resize(n);
  for (int i = 0; i < n; ++i)
    win.init[i] = obj_from_row(rec.states, t0, i, rec.scene.masses[i], rec.scene.radii[i]);
  win.pusher0 = Vec2(rec.states(t0, n * 6 + 0), rec.states(t0, n * 6 + 1));
  win.actions = rec.actions.middleRows(t0, T);
  if (with_truth) win.truth = rec.states.block(t0, 0, T + 1, n * 6);

  if (kind == ModelKind::kSain) {
    const data::TrajectoryRecord::Segment* seg = nullptr;
    if (nominal_equal(ds.nominal, nominal))
      for (const auto& s : rec.nominal)
        if (s.t0 == t0 && s.states.rows() >= T + 1) {
          seg = &s;
          break;
        }
    if (seg) {
      win.eng_dv.resize(T, n * 3);
      win.eng_dp.resize(T, n * 4);
      for (int t = 0; t < T; ++t)
        for (int i = 0; i < n; ++i) {
          // mass/radius only ride along here; deltas ignore them
          ObjState a = obj_from_row(seg->states, t, i, 1.0, 0.05);
          ObjState b = obj_from_row(seg->states, t + 1, i, 1.0, 0.05);
          win.eng_dv.block<1, 3>(t, i * 3) = engine_velocity_delta(a, b).transpose();
          win.eng_dp.block<1, 4>(t, i * 4) = engine_pose_delta(a, b).transpose();
        }
    } else {
      fill_engine_deltas(nominal, win);
    }
  }
  return win;
}

std::vector<MatrixXd> batch_rollout(const ModelParams& params,
                                    const std::vector<Window>& windows, double* data_loss) {
  auto ptrs = as_ptrs(windows);
  Roller r(params, ptrs, false);
  r.forward();
  if (data_loss) {
    require(r.has_truth(), "batch rollout: loss requested without truth");
    *data_loss = r.data_loss();
  }
  std::vector<MatrixXd> out;
  out.reserve(windows.size());
  for (int s = 0; s < static_cast<int>(windows.size()); ++s) out.push_back(r.window_states(s));
  return out;
}

double batch_objective(const ModelParams& params, const std::vector<Window>& windows,
                       double scale, double lambda) {
  auto ptrs = as_ptrs(windows);
  Roller r(params, ptrs, false);
  r.forward();
  require(r.has_truth(), "objective: windows lack truth");
  return scale * r.data_loss() + lambda * params.to_flat().squaredNorm();
}

VectorXd batch_objective_grad(const ModelParams& params, const std::vector<Window>& windows,
                              double scale, double lambda, double* objective) {
  auto ptrs = as_ptrs(windows);
  Roller r(params, ptrs, true);
  r.forward();
  require(r.has_truth(), "objective grad: windows lack truth");
  VectorXd flat = params.to_flat();
  VectorXd g = 2.0 * lambda * flat;
  r.backward(scale, g);
  if (objective) *objective = scale * r.data_loss() + lambda * flat.squaredNorm();
  return g;
}

namespace {

// Shared scalar single-step used by in_step / sain_step: explicit per-object
// actions, engine deltas already encoded (zeros for the pure learned model).
std::vector<ObjState> scalar_step(const ModelParams& P, const std::vector<ObjState>& objs,
                                  const std::vector<Vec2>& actions,
                                  const std::vector<Vec3>& eng_dv,
                                  const std::vector<Vector4d>& eng_dp, double dt) {
  const int n = static_cast<int>(objs.size());
  require(static_cast<int>(actions.size()) == n, "model step: one action per object");
  const int rw = rel_width(P.kind);
  const int dw = dyn_width(P.kind);
  PairTable pairs = make_pairs(n);
  double rbuf[32], dbuf[32];

  MatrixXd Xrel(pairs.count, rw);
  for (int k = 0; k < pairs.count; ++k) {
    rel_features(P.kind, objs[pairs.recv[k]], objs[pairs.send[k]], eng_dv[pairs.recv[k]], rbuf);
    Xrel.row(k) = Eigen::Map<const RowVectorXd>(rbuf, rw);
  }
  P.codec.rel_in.apply_rows_inplace(Xrel);
  MatrixXd E = nn::mlp_forward(P.f_rel, Xrel);

  MatrixXd Eff = MatrixXd::Zero(n, kEffectWidth);
  for (int k = 0; k < pairs.count; ++k) Eff.row(pairs.recv[k]) += E.row(k);

  MatrixXd Xdyn(n, dw);
  for (int i = 0; i < n; ++i) {
    Eigen::Matrix<double, 1, kEffectWidth> eff = Eff.row(i);
    dyn_features(P.kind, objs[i], actions[i], eff.data(), eng_dp[i], dbuf);
    Xdyn.row(i) = Eigen::Map<const RowVectorXd>(dbuf, dw);
  }
  P.codec.dyn_in.apply_rows_inplace(Xdyn);
  MatrixXd Z = nn::mlp_forward(P.f_dyn, Xdyn);

  std::vector<ObjState> next = objs;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) Z(i, c) = P.codec.dyn_out.mean[c] + P.codec.dyn_out.std[c] * Z(i, c);
    next[i].vx += dt * Z(i, 0);
    next[i].vy += dt * Z(i, 1);
    next[i].omega += dt * Z(i, 2);
    next[i].x += dt * next[i].vx;
    next[i].y += dt * next[i].vy;
    next[i].theta += dt * next[i].omega;
  }
  return next;
}

}  // namespace

sim::WorldState in_step(const ModelParams& params, const sim::WorldState& s,
                        const std::vector<Vec2>& actions) {
  require(params.kind == ModelKind::kIn, "in_step: wrong model kind");
  std::vector<ObjState> objs = to_obj_states(s);
  const int n = static_cast<int>(objs.size());
  std::vector<Vec3> dv(n, Vec3::Zero());
  std::vector<Vector4d> dp(n, Vector4d(0, 0, 0, 1));
  std::vector<ObjState> next = scalar_step(params, objs, actions, dv, dp, params.nominal.sim.dt);
  sim::WorldState out = s;
  write_back(next, out);
  return out;
}

sim::WorldState sain_step(const ModelParams& params, const sim::WorldState& s,
                          const sim::WorldState& shadow_now, const sim::WorldState& shadow_next,
                          const std::vector<Vec2>& actions) {
  require(params.kind == ModelKind::kSain, "sain_step: wrong model kind");
  std::vector<ObjState> objs = to_obj_states(s);
  std::vector<ObjState> sa = to_obj_states(shadow_now);
  std::vector<ObjState> sb = to_obj_states(shadow_next);
  const int n = static_cast<int>(objs.size());
  require(static_cast<int>(sa.size()) == n && static_cast<int>(sb.size()) == n,
          "sain_step: shadow state size mismatch");
  std::vector<Vec3> dv(n);
  std::vector<Vector4d> dp(n);
  for (int i = 0; i < n; ++i) {
    dv[i] = engine_velocity_delta(sa[i], sb[i]);
    dp[i] = engine_pose_delta(sa[i], sb[i]);
  }
  std::vector<ObjState> next = scalar_step(params, objs, actions, dv, dp, params.nominal.sim.dt);
  sim::WorldState out = s;
  write_back(next, out);
  return out;
}

std::vector<sim::WorldState> rollout_model(const ModelParams& params, const sim::WorldState& s0,
                                           std::span<const Vec2> plan) {
  const int T = static_cast<int>(plan.size());
  require(T >= 1, "model rollout: empty plan");
  Window win;
  win.dt = params.nominal.sim.dt;
  win.init = to_obj_states(s0);
  win.pusher0 = s0.pusher.position;
  win.pusher_radius = s0.pusher.radius;
  win.actions.resize(T, 2);
  for (int t = 0; t < T; ++t) win.actions.row(t) << plan[t].x(), plan[t].y();
  if (params.kind == ModelKind::kSain) fill_engine_deltas(params.nominal, win);

  std::vector<Window> one;
  one.push_back(std::move(win));
  std::vector<MatrixXd> pred = batch_rollout(params, one);
  const MatrixXd& st = pred[0];
  const int n = static_cast<int>(s0.disks.size());

  std::vector<sim::WorldState> out(T + 1);
  Vec2 pp = s0.pusher.position;
  for (int t = 0; t <= T; ++t) {
    sim::WorldState w = s0;
    w.surface = sim::SurfaceModel{};
    w.surface.mu_nominal = s0.surface.mu_nominal;
    w.surface.gravity = s0.surface.gravity;
    for (int i = 0; i < n; ++i) {
      w.disks[i].pose = {st(t, i * 6 + 0), st(t, i * 6 + 1), wrap_angle(st(t, i * 6 + 2))};
      w.disks[i].twist = {st(t, i * 6 + 3), st(t, i * 6 + 4), st(t, i * 6 + 5)};
    }
    w.pusher.position = pp;
    w.pusher.velocity = t < T ? Vec2(plan[t]) : Vec2::Zero();
    if (t < T) pp += win.dt * Vec2(plan[t]);
    out[t] = std::move(w);
  }
  return out;
}

double trajectory_loss(const std::vector<sim::WorldState>& pred,
                       const std::vector<sim::WorldState>& truth, const VectorXd& theta,
                       double lambda) {
  require(pred.size() == truth.size() && pred.size() >= 2, "trajectory loss: size mismatch");
  const int T = static_cast<int>(pred.size()) - 1;
  double acc = 0.0;
  for (int t = 1; t <= T; ++t) {
    require(pred[t].disks.size() == truth[t].disks.size(), "trajectory loss: disk count");
    for (std::size_t i = 0; i < pred[t].disks.size(); ++i) {
      const auto& a = pred[t].disks[i];
      const auto& b = truth[t].disks[i];
      const double dx = a.pose.x - b.pose.x;
      const double dy = a.pose.y - b.pose.y;
      const double ds = std::sin(a.pose.theta) - std::sin(b.pose.theta);
      const double dc = std::cos(a.pose.theta) - std::cos(b.pose.theta);
      const double dvx = a.twist.vx - b.twist.vx;
      const double dvy = a.twist.vy - b.twist.vy;
      const double dom = a.twist.omega - b.twist.omega;
      acc += dx * dx + dy * dy + ds * ds + dc * dc + dvx * dvx + dvy * dvy + dom * dom;
    }
  }
  return acc / double(T) + lambda * theta.squaredNorm();
}

namespace {

std::vector<Window> tile_windows(const data::Dataset& ds, ModelKind kind,
                                 const sim::NominalSpec& nominal, int L) {
  std::vector<Window> wins;
  for (const auto& rec : ds.trajectories)
    for (int t0 = 0; t0 + L <= rec.actions.rows(); t0 += L)
      wins.push_back(make_window(ds, rec, t0, L, kind, nominal, true));
  return wins;
}

FeatureCodec fit_codec(ModelKind kind, const std::vector<Window>& wins, double pusher_radius) {
  const int rw = rel_width(kind);
  const int dw = dyn_width(kind);
  const bool sain = kind == ModelKind::kSain;
  StreamStats rel_stats(rw), dyn_stats(dw), out_stats(kDynOutWidth);
  double rbuf[32], dbuf[32], obuf[4];
  const double zero_eff[kEffectWidth] = {};

  for (const Window& w : wins) {
    const int n = static_cast<int>(w.init.size());
    const int T = static_cast<int>(w.actions.rows());
    PairTable pairs = make_pairs(n);
    std::vector<ObjState> objs(n), nxt(n);
    Vec2 pp = w.pusher0;
    for (int t = 0; t < T; ++t) {
      for (int i = 0; i < n; ++i) {
        objs[i] = obj_from_row(w.truth, t, i, w.init[i].m, w.init[i].r);
        nxt[i] = obj_from_row(w.truth, t + 1, i, w.init[i].m, w.init[i].r);
      }
      for (int k = 0; k < pairs.count; ++k) {
        Vec3 dv = Vec3::Zero();
        if (sain) dv = w.eng_dv.block<1, 3>(t, pairs.recv[k] * 3).transpose();
        rel_features(kind, objs[pairs.recv[k]], objs[pairs.send[k]], dv, rbuf);
        rel_stats.add(rbuf);
      }
      int ci = contacted_object(pp, w.pusher_radius, objs, kActionContactMargin);
      for (int i = 0; i < n; ++i) {
        Vec2 act = i == ci ? Vec2(w.actions(t, 0), w.actions(t, 1)) : Vec2::Zero();
        Vector4d dp(0, 0, 0, 1);
        if (sain) dp = w.eng_dp.block<1, 4>(t, i * 4).transpose();
        dyn_features(kind, objs[i], act, zero_eff, dp, dbuf);
        dyn_stats.add(dbuf);
        obuf[0] = (nxt[i].vx - objs[i].vx) / w.dt;
        obuf[1] = (nxt[i].vy - objs[i].vy) / w.dt;
        obuf[2] = (nxt[i].omega - objs[i].omega) / w.dt;
        out_stats.add(obuf);
      }
      pp += w.dt * Vec2(w.actions(t, 0), w.actions(t, 1));
    }
  }
  (void)pusher_radius;

  FeatureCodec codec;
  codec.kind = kind;
  codec.rel_in = rel_stats.finalize();
  codec.dyn_in = dyn_stats.finalize();
  codec.dyn_out = out_stats.finalize();
  codec.enforce_effect_identity();
  return codec;
}

TrainResult run_training(ModelParams params, const data::Dataset& ds,
                         const nn::TrainConfig& cfg, bool fit_normalization,
                         const ProgressFn& progress) {
  TrainResult result;
  if (ds.trajectories.empty()) {
    result.params = std::move(params);
    return result;
  }
  std::vector<Window> wins = tile_windows(ds, params.kind, params.nominal, cfg.rollout_length);
  require(!wins.empty(), "train: dataset shorter than one rollout window");
  if (fit_normalization)
    params.codec = fit_codec(params.kind, wins, ds.scene_spec.pusher_radius);

  VectorXd flat = params.to_flat();
  VectorXd snap = flat;
  nn::AdamState adam;
  adam.init(static_cast<int>(flat.size()));
  Rng pick(derive_seed(cfg.seed, 0xBA7C4));
  result.loss_curve.reserve(cfg.iterations);

  const int B = std::min<int>(cfg.batch_size, static_cast<int>(wins.size()));
  std::vector<const Window*> batch(B);
  ModelParams work = params;

  for (int it = 0; it < cfg.iterations; ++it) {
    work.from_flat(flat);
    for (int b = 0; b < B; ++b)
      batch[b] = &wins[pick.uniform_int(static_cast<std::uint64_t>(wins.size()))];

    const double scale = kTrainLossScale / double(B);
    Roller roller(work, batch, true);
    roller.forward();
    const double obj = scale * roller.data_loss() + cfg.l2_lambda * flat.squaredNorm();
    VectorXd grad = 2.0 * cfg.l2_lambda * flat;
    roller.backward(scale, grad);

    if (!std::isfinite(obj) || !grad.allFinite()) {
      flat = snap;
      result.diverged = true;
      break;
    }
    if (it % cfg.eval_every == 0) snap = flat;
    if (progress && (it % cfg.eval_every == 0 || it + 1 == cfg.iterations)) progress(it, obj);
    result.loss_curve.push_back(obj);

    const double norm = grad.norm();
    if (norm > cfg.grad_clip) grad *= cfg.grad_clip / norm;
    nn::adam_step(flat, grad, adam, nn::lr_at(cfg, it));
    ++result.iterations_run;
  }

  params.from_flat(flat);
  result.params = std::move(params);
  return result;
}

}  // namespace

TrainResult train(ModelKind kind, const data::Dataset& ds, const nn::TrainConfig& cfg,
                  const ProgressFn& progress) {
  require(!ds.trajectories.empty(), "train: empty dataset");
  ModelParams params = make_model(kind, cfg.seed);
  params.nominal = ds.nominal;
  return run_training(std::move(params), ds, cfg, true, progress);
}

TrainResult fine_tune(const ModelParams& params, const data::Dataset& ds,
                      const nn::TrainConfig& cfg, const ProgressFn& progress) {
  nn::TrainConfig scaled = cfg;
  scaled.lr0 = cfg.lr0 * 0.1;
  return run_training(params, ds, scaled, false, progress);
}

}  // namespace pushlab::model
