#include "pushlab/codec.hpp"

#include <cmath>

namespace pushlab::model {

std::vector<ObjState> to_obj_states(const sim::WorldState& w) {
  std::vector<ObjState> objs(w.disks.size());
  for (size_t i = 0; i < w.disks.size(); ++i) {
    const auto& d = w.disks[i];
    objs[i] = ObjState{d.pose.x, d.pose.y, d.pose.theta,
                       d.twist.vx, d.twist.vy, d.twist.omega, d.mass, d.radius};
  }
  return objs;
}

void write_back(const std::vector<ObjState>& objs, sim::WorldState& w) {
  require(objs.size() == w.disks.size(), "write_back: object count mismatch");
  for (size_t i = 0; i < objs.size(); ++i) {
    auto& d = w.disks[i];
    d.pose.x = objs[i].x;
    d.pose.y = objs[i].y;
    d.pose.theta = wrap_angle(objs[i].theta);
    d.twist.vx = objs[i].vx;
    d.twist.vy = objs[i].vy;
    d.twist.omega = objs[i].omega;
  }
}

void rel_features(ModelKind k, const ObjState& oi, const ObjState& oj, const Vec3& engine_dv_i,
                  double* out) {
  const double dth = oi.theta - oj.theta;
  out[0] = oi.vx;
  out[1] = oi.vy;
  out[2] = oi.omega;
  out[3] = oi.x - oj.x;
  out[4] = oi.y - oj.y;
  out[5] = std::sin(dth);
  out[6] = std::cos(dth);
  out[7] = oi.vx - oj.vx;
  out[8] = oi.vy - oj.vy;
  out[9] = oi.omega - oj.omega;
  out[10] = oi.m;
  out[11] = oj.m;
  out[12] = oi.r;
  out[13] = oj.r;
  if (k == ModelKind::kSain) {
    out[14] = engine_dv_i[0];
    out[15] = engine_dv_i[1];
    out[16] = engine_dv_i[2];
  }
}

void dyn_features(ModelKind k, const ObjState& oi, const Vec2& action_i,
                  const double* effect_i, const Eigen::Vector4d& engine_dp_enc_i, double* out) {
  out[0] = oi.vx;
  out[1] = oi.vy;
  out[2] = oi.omega;
  out[3] = action_i.x();
  out[4] = action_i.y();
  out[5] = oi.m;
  out[6] = oi.r;
  for (int e = 0; e < kEffectWidth; ++e) out[kEffectOffset + e] = effect_i[e];
  if (k == ModelKind::kSain) {
    out[23] = engine_dp_enc_i[0];
    out[24] = engine_dp_enc_i[1];
    out[25] = engine_dp_enc_i[2];
    out[26] = engine_dp_enc_i[3];
  }
}

Vec3 engine_velocity_delta(const ObjState& prev, const ObjState& next) {
  return Vec3(next.vx - prev.vx, next.vy - prev.vy, next.omega - prev.omega);
}

Eigen::Vector4d engine_pose_delta(const ObjState& prev, const ObjState& next) {
  const double dth = wrap_angle(next.theta - prev.theta);
  return Eigen::Vector4d(next.x - prev.x, next.y - prev.y, std::sin(dth), std::cos(dth));
}

int contacted_object(const Vec2& pusher_pos, double pusher_radius,
                     const std::vector<ObjState>& objs, double margin) {
  int best = -1;
  double best_gap = margin;
  for (size_t i = 0; i < objs.size(); ++i) {
    const double dist = (Vec2(objs[i].x, objs[i].y) - pusher_pos).norm();
    const double gap = dist - (pusher_radius + objs[i].r);
    if (gap < best_gap) {
      best_gap = gap;
      best = static_cast<int>(i);
    }
  }
  return best;
}

FeatureCodec FeatureCodec::identity(ModelKind k) {
  FeatureCodec c;
  c.kind = k;
  c.rel_in = nn::Standardizer::identity(rel_width(k));
  c.dyn_in = nn::Standardizer::identity(dyn_width(k));
  c.dyn_out = nn::Standardizer::identity(kDynOutWidth);
  return c;
}

void FeatureCodec::enforce_effect_identity() {
  for (int e = 0; e < kEffectWidth; ++e) {
    dyn_in.mean[kEffectOffset + e] = 0.0;
    dyn_in.std[kEffectOffset + e] = 1.0;
  }
}

}  // namespace pushlab::model
