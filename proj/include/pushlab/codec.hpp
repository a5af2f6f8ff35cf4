#pragma once

#include <vector>

#include "pushlab/nn.hpp"
#include "pushlab/sim.hpp"

namespace pushlab::model {

enum class ModelKind { kIn, kSain };

inline const char* kind_tag(ModelKind k) { return k == ModelKind::kIn ? "in" : "sain"; }

// Flat per-object state used inside model rollouts. theta is deliberately left
// unwrapped here: the recurrent Euler update keeps the position identity exact
// and every consumer of rotation goes through sin/cos.
struct ObjState {
  double x = 0, y = 0, theta = 0;
  double vx = 0, vy = 0, omega = 0;
  double m = 1, r = 0.05;
};

std::vector<ObjState> to_obj_states(const sim::WorldState& w);
void write_back(const std::vector<ObjState>& objs, sim::WorldState& w);

// Feature layouts.
//
// Pairwise (receiver i, sender j), width 14 (IN) / 17 (SAIN):
//   [0:3)  v_i                      [3:5)  p_i - p_j
//   [5:7)  sin/cos(theta_i - theta_j)
//   [7:10) v_i - v_j
//   [10]   m_i  [11] m_j  [12] r_i  [13] r_j
//   [14:17) nominal-engine velocity delta of i (SAIN only)
//
// Per-object dynamics, width 23 (IN) / 27 (SAIN):
//   [0:3)  v_i                      [3:5)  action (pusher velocity if touching i)
//   [5]    m_i  [6] r_i
//   [7:23) summed pairwise effect (16), never standardized
//   [23:27) nominal-engine pose delta (dx, dy, sin dth, cos dth) (SAIN only)
inline constexpr int kEffectWidth = 16;
inline constexpr int kDynOutWidth = 3;  // d(vx, vy, omega) targets

inline int rel_width(ModelKind k) { return k == ModelKind::kIn ? 14 : 17; }
inline int dyn_width(ModelKind k) { return k == ModelKind::kIn ? 23 : 27; }
inline constexpr int kEffectOffset = 7;  // effect block start inside the dyn row

void rel_features(ModelKind k, const ObjState& oi, const ObjState& oj, const Vec3& engine_dv_i,
                  double* out);
void dyn_features(ModelKind k, const ObjState& oi, const Vec2& action_i,
                  const double* effect_i, const Eigen::Vector4d& engine_dp_enc_i, double* out);

// Deltas of consecutive nominal-engine states; rotation delta is encoded as
// sin/cos so engine-side angle wrapping cannot inject 2*pi jumps.
Vec3 engine_velocity_delta(const ObjState& prev, const ObjState& next);
Eigen::Vector4d engine_pose_delta(const ObjState& prev, const ObjState& next);

// Index of the closest disk the pusher touches (within `margin` of surface
// contact), -1 when it touches none. The commanded pusher velocity is assigned
// to exactly this object, every other object gets a zero action.
int contacted_object(const Vec2& pusher_pos, double pusher_radius,
                     const std::vector<ObjState>& objs, double margin);

inline constexpr double kActionContactMargin = 1e-3;  // m

// Input/output normalization bundle for one model. Effect columns of dyn_in are
// pinned to identity (their statistics would drift with the weights).
struct FeatureCodec {
  ModelKind kind = ModelKind::kIn;
  nn::Standardizer rel_in;
  nn::Standardizer dyn_in;
  nn::Standardizer dyn_out;

  static FeatureCodec identity(ModelKind k);
  void enforce_effect_identity();
};

}  // namespace pushlab::model
