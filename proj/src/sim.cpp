#include "pushlab/sim.hpp"

#include <algorithm>
#include <cmath>

#include "pushlab/rng.hpp"

namespace pushlab::sim {

double MuField::at(double x, double y) const {
  if (empty()) fail("MuField::at on empty field");
  double fx = (x - x0) / h;
  double fy = (y - y0) / h;
  fx = std::clamp(fx, 0.0, static_cast<double>(nx - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(ny - 1));
  const int ix = std::min(static_cast<int>(fx), nx - 2);
  const int iy = std::min(static_cast<int>(fy), ny - 2);
  const double tx = fx - ix, ty = fy - iy;
  auto v = [&](int i, int j) { return values[static_cast<size_t>(j) * nx + i]; };
  return (1 - tx) * (1 - ty) * v(ix, iy) + tx * (1 - ty) * v(ix + 1, iy) +
         (1 - tx) * ty * v(ix, iy + 1) + tx * ty * v(ix + 1, iy + 1);
}

MuField make_mu_field(std::uint64_t seed, double mean, double amplitude, double corr_len,
                      double extent, double spacing) {
  MuField f;
  f.h = spacing;
  f.x0 = -extent;
  f.y0 = -extent;
  f.nx = static_cast<int>(std::round(2.0 * extent / spacing)) + 1;
  f.ny = f.nx;

  Rng rng(seed);
  std::vector<double> white(static_cast<size_t>(f.nx) * f.ny);
  for (auto& w : white) w = rng.normal();

  // Gaussian smoothing with sigma = corr_len, separable passes.
  const double sigma_cells = corr_len / spacing;
  const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_cells)));
  std::vector<double> kernel(2 * half + 1);
  for (int k = -half; k <= half; ++k)
    kernel[k + half] = std::exp(-0.5 * (k / sigma_cells) * (k / sigma_cells));

  auto convolve = [&](const std::vector<double>& in, bool along_x) {
    std::vector<double> out(in.size());
    for (int j = 0; j < f.ny; ++j) {
      for (int i = 0; i < f.nx; ++i) {
        double acc = 0.0, wsum = 0.0;
        for (int k = -half; k <= half; ++k) {
          int ii = along_x ? i + k : i;
          int jj = along_x ? j : j + k;
          if (ii < 0 || ii >= f.nx || jj < 0 || jj >= f.ny) continue;
          acc += kernel[k + half] * in[static_cast<size_t>(jj) * f.nx + ii];
          wsum += kernel[k + half];
        }
        out[static_cast<size_t>(j) * f.nx + i] = acc / wsum;
      }
    }
    return out;
  };
  auto smooth = convolve(convolve(white, true), false);

  double peak = 0.0;
  for (double v : smooth) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0.0 ? amplitude / peak : 0.0;

  f.values.resize(smooth.size());
  for (size_t i = 0; i < smooth.size(); ++i)
    f.values[i] = std::clamp(mean + scale * smooth[i], 0.05 + 1e-9, 0.25 - 1e-9);
  return f;
}

FrictionWrench coulomb_friction(const DiskState& disk, const SurfaceModel& surface,
                                double deadband) {
  FrictionWrench w;
  const double mu = surface.mu_at(disk.pose.x, disk.pose.y);
  const double mg = mu * disk.mass * surface.gravity;
  const Vec2 v = disk.twist.linear();
  const double speed = v.norm();
  if (speed >= deadband) w.force = -mg * (v / speed);
  if (std::abs(disk.twist.omega) >= deadband)
    w.torque = -(2.0 / 3.0) * mg * disk.radius * (disk.twist.omega > 0 ? 1.0 : -1.0);
  return w;
}

namespace {

struct Contact {
  int a, b;        // body index; -1 is the pusher, otherwise disk index
  Vec2 normal;     // unit, from a to b
  double pen;      // overlap depth, > 0
  double vn0;      // pre-solve normal relative velocity (for restitution)
  double jn = 0.0; // accumulated impulses
  double jt = 0.0;
};

struct BodyRef {
  double radius;
  double inv_m;
  double inv_i;
};

// Collects pusher-disk then disk-disk contacts in fixed index order.
std::vector<Contact> find_contacts(const WorldState& w, double margin) {
  std::vector<Contact> cs;
  const int n = static_cast<int>(w.disks.size());
  for (int i = 0; i < n; ++i) {
    const Vec2 d = w.disks[i].pose.position() - w.pusher.position;
    const double dist = d.norm();
    const double target = w.pusher.radius + w.disks[i].radius;
    if (dist < target + margin) {
      require(dist > 1e-12, "contact resolution: coincident centers have no normal");
      cs.push_back({-1, i, d / dist, target - dist, 0.0});
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Vec2 d = w.disks[j].pose.position() - w.disks[i].pose.position();
      const double dist = d.norm();
      const double target = w.disks[i].radius + w.disks[j].radius;
      if (dist < target + margin) {
        require(dist > 1e-12, "contact resolution: coincident centers have no normal");
        cs.push_back({i, j, d / dist, target - dist, 0.0});
      }
    }
  }
  return cs;
}

// Sequential impulses over all contacts. pusher_inv_m = 0 makes the pusher
// kinematic. Returns the number of deep penetrations encountered on entry.
int solve_velocities(WorldState& w, const SimConfig& cfg, double pusher_inv_m) {
  auto contacts = find_contacts(w, 0.0);
  if (contacts.empty()) return 0;

  auto body = [&](int idx) -> BodyRef {
    if (idx < 0) return BodyRef{w.pusher.radius, pusher_inv_m, 0.0};
    const DiskState& d = w.disks[idx];
    return BodyRef{d.radius, 1.0 / d.mass, 1.0 / d.inertia()};
  };

  auto vel_of = [&](int idx) -> Vec2 {
    return idx < 0 ? w.pusher.velocity : w.disks[idx].twist.linear();
  };
  auto add_vel = [&](int idx, const Vec2& dv) {
    if (idx < 0) {
      w.pusher.velocity += dv;
    } else {
      w.disks[idx].twist.vx += dv.x();
      w.disks[idx].twist.vy += dv.y();
    }
  };
  auto add_omega = [&](int idx, double domega) {
    if (idx >= 0) w.disks[idx].twist.omega += domega;
  };

  int deep = 0;
  for (auto& c : contacts) {
    const BodyRef A = body(c.a), B = body(c.b);
    // Surface velocity at the contact includes spin; contact point sits along the
    // normal so r x n = 0 and only the tangential direction sees inertia terms.
    const Vec2 ra = c.normal * (A.radius - 0.5 * c.pen);
    const Vec2 rb = -c.normal * (B.radius - 0.5 * c.pen);
    const double wa = c.a < 0 ? 0.0 : w.disks[c.a].twist.omega;
    const double wb = c.b < 0 ? 0.0 : w.disks[c.b].twist.omega;
    const Vec2 vrel = (vel_of(c.b) + wb * perp(rb)) - (vel_of(c.a) + wa * perp(ra));
    c.vn0 = vrel.dot(c.normal);
    if (c.pen > 10.0 * cfg.penetration_tolerance) ++deep;
  }

  for (int it = 0; it < cfg.solver_iterations; ++it) {
    for (auto& c : contacts) {
      const BodyRef A = body(c.a), B = body(c.b);
      const Vec2 ra = c.normal * (A.radius - 0.5 * c.pen);
      const Vec2 rb = -c.normal * (B.radius - 0.5 * c.pen);
      const double wa = c.a < 0 ? 0.0 : w.disks[c.a].twist.omega;
      const double wb = c.b < 0 ? 0.0 : w.disks[c.b].twist.omega;
      const Vec2 vrel = (vel_of(c.b) + wb * perp(rb)) - (vel_of(c.a) + wa * perp(ra));

      // Normal: inelastic target plus restitution on the pre-solve approach
      // velocity and a Baumgarte bias on overlap beyond the tolerance.
      const double vn = vrel.dot(c.normal);
      const double bias = cfg.baumgarte_beta / cfg.dt *
                          std::max(0.0, c.pen - cfg.penetration_tolerance);
      const double target = std::max(-cfg.restitution * std::min(c.vn0, 0.0), bias);
      const double kn = A.inv_m + B.inv_m;
      if (kn > 0.0) {
        const double djn = -(vn - target) / kn;
        const double jn_new = std::max(0.0, c.jn + djn);
        const double d = jn_new - c.jn;
        c.jn = jn_new;
        const Vec2 imp = d * c.normal;
        add_vel(c.a, -imp * A.inv_m);
        add_vel(c.b, imp * B.inv_m);
      }

      // Tangential Coulomb friction, capped by the accumulated normal impulse.
      const Vec2 t = perp(c.normal);
      const double vt = vrel.dot(t);
      const double kt = A.inv_m + B.inv_m + ra.squaredNorm() * A.inv_i +
                        rb.squaredNorm() * B.inv_i;
      if (kt > 0.0) {
        const double djt = -vt / kt;
        const double cap = cfg.contact_mu * c.jn;
        const double jt_new = std::clamp(c.jt + djt, -cap, cap);
        const double d = jt_new - c.jt;
        c.jt = jt_new;
        const Vec2 imp = d * t;
        add_vel(c.a, -imp * A.inv_m);
        add_vel(c.b, imp * B.inv_m);
        add_omega(c.a, -A.inv_i * cross2(ra, imp));
        add_omega(c.b, B.inv_i * cross2(rb, imp));
      }
    }
  }
  return deep;
}

// Moves overlapping bodies apart along contact normals (split by inverse mass)
// until no emitted overlap exceeds the tolerance. Velocities are untouched.
void project_positions(WorldState& w, const SimConfig& cfg, double pusher_inv_m) {
  for (int pass = 0; pass < 4; ++pass) {
    auto contacts = find_contacts(w, 0.0);
    bool any = false;
    for (const auto& c : contacts) {
      if (c.pen <= cfg.penetration_tolerance) continue;
      any = true;
      const double corr = c.pen - cfg.penetration_tolerance;
      const double wa = c.a < 0 ? pusher_inv_m : 1.0 / w.disks[c.a].mass;
      const double wb = c.b < 0 ? pusher_inv_m : 1.0 / w.disks[c.b].mass;
      const double wsum = wa + wb;
      if (wsum <= 0.0) continue;
      const Vec2 shift = c.normal * corr;
      if (c.a >= 0) {
        w.disks[c.a].pose.x -= shift.x() * wa / wsum;
        w.disks[c.a].pose.y -= shift.y() * wa / wsum;
      } else if (pusher_inv_m > 0.0) {
        w.pusher.position -= shift * wa / wsum;
      }
      if (c.b >= 0) {
        w.disks[c.b].pose.x += shift.x() * wb / wsum;
        w.disks[c.b].pose.y += shift.y() * wb / wsum;
      }
    }
    if (!any) break;
  }
}

// Ground friction as a clamped impulse: a step never removes more momentum than
// mu*m*g*dt and stops the disk exactly when it can absorb the remaining speed.
void apply_ground_friction(WorldState& w, const SimConfig& cfg) {
  for (auto& d : w.disks) {
    const double mu = w.surface.mu_at(d.pose.x, d.pose.y);
    const double dv_max = mu * w.surface.gravity * cfg.dt;
    Vec2 v = d.twist.linear();
    const double speed = v.norm();
    if (speed < cfg.velocity_deadband || speed <= dv_max) {
      d.twist.vx = 0.0;
      d.twist.vy = 0.0;
    } else {
      v -= dv_max * (v / speed);
      d.twist.vx = v.x();
      d.twist.vy = v.y();
    }
    // tau = (2/3)*mu*m*g*r over I = m r^2/2 -> domega = (4/3)*mu*g/r * dt
    const double domega_max = (4.0 / 3.0) * mu * w.surface.gravity / d.radius * cfg.dt;
    const double spin = std::abs(d.twist.omega);
    if (spin < cfg.velocity_deadband || spin <= domega_max) {
      d.twist.omega = 0.0;
    } else {
      d.twist.omega -= domega_max * (d.twist.omega > 0 ? 1.0 : -1.0);
    }
  }
}

void integrate(WorldState& w, const SimConfig& cfg) {
  for (auto& d : w.disks) {
    d.pose.x += cfg.dt * d.twist.vx;
    d.pose.y += cfg.dt * d.twist.vy;
    d.pose.theta = wrap_angle(d.pose.theta + cfg.dt * d.twist.omega);
  }
  w.pusher.position += cfg.dt * w.pusher.velocity;
}

void advance_impl(WorldState& w, const SimConfig& cfg, double pusher_inv_m,
                  StepDiag* diag) {
  apply_ground_friction(w, cfg);
  const int deep = solve_velocities(w, cfg, pusher_inv_m);
  if (diag) diag->deep_penetration_events += deep;
  integrate(w, cfg);
  project_positions(w, cfg, pusher_inv_m);
}

}  // namespace

WorldState resolve_contacts(const WorldState& world, const SimConfig& cfg, StepDiag* diag) {
  WorldState w = world;
  const int deep = solve_velocities(w, cfg, 0.0);
  if (diag) diag->deep_penetration_events += deep;
  if (deep > 0) project_positions(w, cfg, 0.0);
  return w;
}

void advance(WorldState& w, const Vec2& pusher_cmd, const SimConfig& cfg, StepDiag* diag) {
  w.pusher.velocity = pusher_cmd;
  advance_impl(w, cfg, 0.0, diag);
}

void advance_forced(WorldState& w, const Vec2& force, const SimConfig& cfg, StepDiag* diag) {
  require(w.pusher.mass > 0.0, "step_forced needs a positive pusher mass");
  w.pusher.velocity += cfg.dt / w.pusher.mass * force;
  advance_impl(w, cfg, 1.0 / w.pusher.mass, diag);
}

WorldState step(const WorldState& world, const Vec2& pusher_cmd, const SimConfig& cfg,
                StepDiag* diag) {
  WorldState w = world;
  advance(w, pusher_cmd, cfg, diag);
  return w;
}

WorldState step_forced(const WorldState& world, const Vec2& force, const SimConfig& cfg,
                       StepDiag* diag) {
  WorldState w = world;
  advance_forced(w, force, cfg, diag);
  return w;
}

Trajectory rollout_physics(const WorldState& world, std::span<const Vec2> plan,
                           const SimConfig& cfg) {
  Trajectory traj;
  traj.dt = cfg.dt;
  traj.states.reserve(plan.size() + 1);
  traj.actions.assign(plan.begin(), plan.end());
  traj.states.push_back(world);
  WorldState w = world;
  for (const Vec2& cmd : plan) {
    advance(w, cmd, cfg);
    traj.states.push_back(w);
  }
  return traj;
}

WorldState NominalSpec::substitute(const WorldState& w) const {
  require(!masses.empty() && masses.size() == radii.size(),
          "nominal spec: need matching mass/radius lists");
  WorldState out = w;
  out.surface = SurfaceModel{};
  out.surface.mode = SurfaceModel::Mode::kUniform;
  out.surface.mu_nominal = mu;
  out.surface.gravity = gravity;
  for (std::size_t i = 0; i < out.disks.size(); ++i) {
    std::size_t k = std::min(i, masses.size() - 1);
    out.disks[i].mass = masses[k];
    out.disks[i].radius = radii[k];
  }
  return out;
}

double kinetic_energy(const WorldState& world) {
  double e = 0.0;
  for (const auto& d : world.disks) {
    e += 0.5 * d.mass * d.twist.linear().squaredNorm();
    e += 0.5 * d.inertia() * d.twist.omega * d.twist.omega;
  }
  return e;
}

}  // namespace pushlab::sim
