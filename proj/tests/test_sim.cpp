#include <doctest.h>

#include <cmath>

#include "pushlab/rng.hpp"
#include "pushlab/sim.hpp"

using namespace pushlab;

namespace {

sim::WorldState one_disk(double mass, double radius, double mu, const Vec2& vel,
                         double omega = 0.0) {
  sim::WorldState w;
  sim::DiskState d;
  d.mass = mass;
  d.radius = radius;
  d.twist.vx = vel.x();
  d.twist.vy = vel.y();
  d.twist.omega = omega;
  w.disks.push_back(d);
  w.surface.mu_nominal = mu;
  w.pusher.position = Vec2(10.0, 10.0);  // parked far away
  return w;
}

sim::DiskState disk_at(const Vec2& pos, const Vec2& vel, double mass = 1.0,
                       double radius = 0.05) {
  sim::DiskState d;
  d.pose.x = pos.x();
  d.pose.y = pos.y();
  d.twist.vx = vel.x();
  d.twist.vy = vel.y();
  d.mass = mass;
  d.radius = radius;
  return d;
}

double pair_momentum_x(const sim::WorldState& w) {
  double p = 0.0;
  for (const auto& d : w.disks) p += d.mass * d.twist.vx;
  return p;
}

double max_overlap(const sim::WorldState& w) {
  double worst = 0.0;
  for (std::size_t i = 0; i < w.disks.size(); ++i) {
    for (std::size_t j = i + 1; j < w.disks.size(); ++j) {
      const Vec2 d = w.disks[j].pose.position() - w.disks[i].pose.position();
      worst = std::max(worst, w.disks[i].radius + w.disks[j].radius - d.norm());
    }
    const Vec2 d = w.pusher.position - w.disks[i].pose.position();
    worst = std::max(worst, w.disks[i].radius + w.pusher.radius - d.norm());
  }
  return worst;
}

sim::WorldState mirror_x(const sim::WorldState& w) {
  sim::WorldState m = w;
  for (auto& d : m.disks) {
    d.pose.y = -d.pose.y;
    d.pose.theta = -d.pose.theta;
    d.twist.vy = -d.twist.vy;
    d.twist.omega = -d.twist.omega;
  }
  m.pusher.position.y() = -m.pusher.position.y();
  m.pusher.velocity.y() = -m.pusher.velocity.y();
  return m;
}

}  // namespace

TEST_CASE("ground friction wrench matches the contact-patch integral") {
  const double mu = 0.2, mass = 1.0, radius = 0.05, g = 9.81;
  auto w = one_disk(mass, radius, mu, Vec2(0.1, 0.0), 2.0);
  const auto fr = sim::coulomb_friction(w.disks[0], w.surface);

  // Translation: every patch element slides the same way, so the integral of
  // mu * pressure over the disk is just mu * m * g against the motion.
  CHECK(fr.force.x() == doctest::Approx(-1.962).epsilon(1e-12));
  CHECK(fr.force.y() == doctest::Approx(0.0).epsilon(1e-12));

  // Spin: integrate mu * p * rho over the patch numerically (uniform pressure
  // p = m g / (pi R^2)) and compare against the closed form (2/3) mu m g R.
  const double p = mass * g / (kPi * radius * radius);
  double torque = 0.0;
  const int nr = 4000;
  const double dr = radius / nr;
  for (int i = 0; i < nr; ++i) {
    const double rho = (i + 0.5) * dr;
    torque += mu * p * rho * (2.0 * kPi * rho * dr);
  }
  CHECK(torque == doctest::Approx((2.0 / 3.0) * mu * mass * g * radius).epsilon(1e-6));
  CHECK(fr.torque == doctest::Approx(-0.0654).epsilon(1e-12));
  CHECK(std::abs(fr.torque) == doctest::Approx(torque).epsilon(1e-6));
}

TEST_CASE("sliding disk stops at the closed-form time") {
  sim::SimConfig cfg;
  auto w = one_disk(1.0, 0.05, 0.15, Vec2(0.1, 0.0));
  const double t_stop = 0.1 / (0.15 * 9.81);  // 0.0680 s

  int stop_step = -1;
  for (int t = 1; t <= 100; ++t) {
    sim::advance(w, Vec2::Zero(), cfg);
    CHECK(w.disks[0].twist.vx >= 0.0);  // friction never reverses the motion
    if (w.disks[0].twist.linear().norm() == 0.0) {
      stop_step = t;
      break;
    }
  }
  REQUIRE(stop_step > 0);
  CHECK(std::abs(stop_step * cfg.dt - t_stop) <= cfg.dt + 1e-12);

  // Once stopped it stays put.
  const double x = w.disks[0].pose.x;
  for (int t = 0; t < 50; ++t) sim::advance(w, Vec2::Zero(), cfg);
  CHECK(w.disks[0].pose.x == x);
  CHECK(w.disks[0].twist.vx == 0.0);
}

TEST_CASE("friction removes exactly mu*g*dt of speed from an isolated disk") {
  sim::SimConfig cfg;
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const double mu = rng.uniform(0.05, 0.25);
    const Vec2 v(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
    const double omega = rng.uniform(-3.0, 3.0);
    if (v.norm() < 0.05 || std::abs(omega) < 0.5) continue;
    auto w = one_disk(rng.uniform(0.85, 1.15), rng.uniform(0.05, 0.06), mu, v, omega);

    const double dv = mu * 9.81 * cfg.dt;
    const double domega = (4.0 / 3.0) * mu * 9.81 / w.disks[0].radius * cfg.dt;
    sim::advance(w, Vec2::Zero(), cfg);

    CHECK(w.disks[0].twist.linear().norm() == doctest::Approx(v.norm() - dv).epsilon(1e-12));
    CHECK(cross2(w.disks[0].twist.linear(), v.normalized()) ==
          doctest::Approx(0.0).epsilon(1e-15));  // direction preserved
    CHECK(std::abs(w.disks[0].twist.omega) ==
          doctest::Approx(std::abs(omega) - domega).epsilon(1e-12));
  }
}

TEST_CASE("head-on equal-mass contact is perfectly inelastic") {
  sim::SimConfig cfg;
  sim::WorldState w;
  w.surface.mu_nominal = 0.0;  // isolate the impulse from ground friction
  w.disks.push_back(disk_at(Vec2(0.0, 0.0), Vec2(0.1, 0.0)));
  w.disks.push_back(disk_at(Vec2(0.1 - 1e-5, 0.0), Vec2(0.0, 0.0)));
  w.pusher.position = Vec2(10.0, 10.0);

  const double p0 = pair_momentum_x(w);
  sim::advance(w, Vec2::Zero(), cfg);
  CHECK(w.disks[0].twist.vx == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(w.disks[1].twist.vx == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(pair_momentum_x(w) == doctest::Approx(p0).epsilon(1e-14));

  // Post-impulse approach velocity is gone.
  CHECK(w.disks[1].twist.vx - w.disks[0].twist.vx >= -1e-12);
}

TEST_CASE("disk-disk impulses conserve pair momentum for random overlaps") {
  sim::SimConfig cfg;
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    sim::WorldState w;
    w.surface.mu_nominal = 0.0;
    const double r1 = rng.uniform(0.05, 0.06), r2 = rng.uniform(0.05, 0.06);
    const double ang = rng.uniform(0.0, 2.0 * kPi);
    const Vec2 offset = (r1 + r2 - 1e-5) * rotate(Vec2(1.0, 0.0), ang);
    w.disks.push_back(disk_at(Vec2(0.0, 0.0), Vec2(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)),
                              rng.uniform(0.85, 1.15), r1));
    w.disks.push_back(
        disk_at(offset, Vec2(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)),
                rng.uniform(0.85, 1.15), r2));
    w.disks[0].twist.omega = rng.uniform(-2.0, 2.0);
    w.disks[1].twist.omega = rng.uniform(-2.0, 2.0);
    w.pusher.position = Vec2(10.0, 10.0);

    double px = 0.0, py = 0.0;
    for (const auto& d : w.disks) {
      px += d.mass * d.twist.vx;
      py += d.mass * d.twist.vy;
    }
    sim::advance(w, Vec2::Zero(), cfg);
    double qx = 0.0, qy = 0.0;
    for (const auto& d : w.disks) {
      qx += d.mass * d.twist.vx;
      qy += d.mass * d.twist.vy;
    }
    CHECK(qx == doctest::Approx(px).epsilon(1e-12));
    CHECK(qy == doctest::Approx(py).epsilon(1e-12));
  }
}

TEST_CASE("kinetic energy never increases without pusher work") {
  sim::SimConfig cfg;
  Rng rng(13);
  sim::WorldState w;
  w.surface.mu_nominal = 0.15;
  w.disks.push_back(disk_at(Vec2(0.0, 0.0), Vec2(0.15, 0.02)));
  w.disks.push_back(disk_at(Vec2(0.104, 0.01), Vec2(-0.05, 0.0)));
  w.disks.push_back(disk_at(Vec2(0.05, 0.1), Vec2(0.0, -0.1)));
  for (auto& d : w.disks) d.twist.omega = rng.uniform(-2.0, 2.0);
  w.pusher.position = Vec2(10.0, 10.0);

  double e = sim::kinetic_energy(w);
  for (int t = 0; t < 200; ++t) {
    sim::advance(w, Vec2::Zero(), cfg);
    const double e2 = sim::kinetic_energy(w);
    CHECK(e2 <= e + 1e-12);
    e = e2;
  }
  CHECK(e == 0.0);  // everything ground to a halt
}

TEST_CASE("kinematic pusher follows its command exactly") {
  sim::SimConfig cfg;
  sim::WorldState w;
  w.disks.push_back(disk_at(Vec2(0.0548 + 1e-5, 0.0), Vec2::Zero()));
  w.pusher.position = Vec2(0.0, 0.0);  // already touching the disk

  const Vec2 cmd(0.05, 0.0);
  sim::WorldState before = w;
  sim::advance(w, cmd, cfg);
  CHECK(w.pusher.velocity.x() == cmd.x());
  CHECK(w.pusher.velocity.y() == cmd.y());
  CHECK(w.pusher.position.x() == before.pusher.position.x() + cfg.dt * cmd.x());
  CHECK(w.disks[0].twist.vx >= 0.0);  // pushed, never sucked toward the pusher

  // step() is the value-returning flavor of the same update.
  sim::WorldState v = sim::step(before, cmd, cfg);
  CHECK(v.disks[0].pose.x == w.disks[0].pose.x);
  CHECK(v.disks[0].twist.vx == w.disks[0].twist.vx);
  CHECK(v.pusher.position.x() == w.pusher.position.x());
}

TEST_CASE("sustained push emits no overlap beyond tolerance") {
  sim::SimConfig cfg;
  sim::WorldState w;
  w.disks.push_back(disk_at(Vec2(0.06, 0.0), Vec2::Zero()));
  w.disks.push_back(disk_at(Vec2(0.16, 0.0), Vec2::Zero()));
  w.pusher.position = Vec2(0.0, 0.0);

  for (int t = 0; t < 480; ++t) {
    sim::advance(w, Vec2(0.05, 0.001), cfg);
    CHECK(max_overlap(w) <= cfg.penetration_tolerance + 1e-12);
  }
  CHECK(w.disks[0].pose.x > 0.06);  // the push actually moved things
}

TEST_CASE("deep penetration is diagnosed and projected out") {
  sim::SimConfig cfg;
  sim::WorldState w;
  w.disks.push_back(disk_at(Vec2(0.0, 0.0), Vec2::Zero()));
  w.disks.push_back(disk_at(Vec2(0.09, 0.0), Vec2::Zero()));  // 10 mm overlap
  w.pusher.position = Vec2(10.0, 10.0);

  sim::StepDiag diag;
  sim::advance(w, Vec2::Zero(), cfg, &diag);
  CHECK(diag.deep_penetration_events >= 1);
  CHECK(max_overlap(w) <= cfg.penetration_tolerance + 1e-12);
}

TEST_CASE("dynamics commute with mirroring across the x axis") {
  sim::SimConfig cfg;
  sim::WorldState w;
  w.surface.mu_nominal = 0.12;
  w.disks.push_back(disk_at(Vec2(0.055, 0.01), Vec2(0.03, 0.01), 0.9, 0.052));
  w.disks.push_back(disk_at(Vec2(0.16, 0.02), Vec2(-0.01, 0.02), 1.1, 0.058));
  w.disks[0].twist.omega = 0.7;
  w.disks[1].twist.omega = -0.4;
  w.disks[0].pose.theta = 0.3;
  w.pusher.position = Vec2(0.0, 0.005);

  const Vec2 cmd(0.05, 0.01);
  sim::WorldState a = w, b = mirror_x(w);
  for (int t = 0; t < 120; ++t) {
    sim::advance(a, cmd, cfg);
    sim::advance(b, Vec2(cmd.x(), -cmd.y()), cfg);
  }
  const sim::WorldState bm = mirror_x(b);
  for (std::size_t i = 0; i < a.disks.size(); ++i) {
    CHECK(a.disks[i].pose.x == doctest::Approx(bm.disks[i].pose.x).epsilon(1e-9));
    CHECK(a.disks[i].pose.y == doctest::Approx(bm.disks[i].pose.y).epsilon(1e-9));
    CHECK(a.disks[i].pose.theta == doctest::Approx(bm.disks[i].pose.theta).epsilon(1e-9));
    CHECK(a.disks[i].twist.vx == doctest::Approx(bm.disks[i].twist.vx).epsilon(1e-9));
    CHECK(a.disks[i].twist.vy == doctest::Approx(bm.disks[i].twist.vy).epsilon(1e-9));
    CHECK(a.disks[i].twist.omega == doctest::Approx(bm.disks[i].twist.omega).epsilon(1e-9));
  }
}

TEST_CASE("stepping is bit-for-bit deterministic") {
  sim::SimConfig cfg;
  sim::WorldState w;
  w.disks.push_back(disk_at(Vec2(0.055, 0.001), Vec2(0.02, -0.01)));
  w.disks.push_back(disk_at(Vec2(0.161, 0.004), Vec2::Zero(), 1.1, 0.058));
  w.pusher.position = Vec2(0.0, 0.0);

  sim::WorldState a = w, b = w;
  for (int t = 0; t < 100; ++t) {
    sim::advance(a, Vec2(0.05, 0.0), cfg);
    sim::advance(b, Vec2(0.05, 0.0), cfg);
  }
  for (std::size_t i = 0; i < a.disks.size(); ++i) {
    CHECK(a.disks[i].pose.x == b.disks[i].pose.x);
    CHECK(a.disks[i].pose.y == b.disks[i].pose.y);
    CHECK(a.disks[i].pose.theta == b.disks[i].pose.theta);
    CHECK(a.disks[i].twist.vx == b.disks[i].twist.vx);
    CHECK(a.disks[i].twist.omega == b.disks[i].twist.omega);
  }
}

TEST_CASE("nominal substitution replaces parameters, keeps state") {
  sim::NominalSpec nominal;
  sim::WorldState w;
  w.surface = sim::SurfaceModel{};
  w.surface.mode = sim::SurfaceModel::Mode::kSpatialField;
  w.surface.field = sim::make_mu_field(3, 0.15, 0.05, 0.1);
  w.disks.push_back(disk_at(Vec2(0.01, 0.02), Vec2(0.1, 0.2), 0.93, 0.051));
  w.disks.push_back(disk_at(Vec2(0.12, 0.03), Vec2(-0.1, 0.05), 1.07, 0.059));
  w.disks.push_back(disk_at(Vec2(0.24, 0.04), Vec2(0.0, 0.0), 1.12, 0.055));
  w.disks[2].pose.theta = 0.4;
  w.pusher.position = Vec2(-0.06, 0.0);
  w.pusher.velocity = Vec2(0.05, 0.0);

  const sim::WorldState n = nominal.substitute(w);
  CHECK(n.surface.mode == sim::SurfaceModel::Mode::kUniform);
  CHECK(n.surface.mu_nominal == 0.15);
  CHECK(n.disks[0].mass == 0.896);
  CHECK(n.disks[1].mass == 1.1);
  CHECK(n.disks[2].mass == 1.1);  // entries repeat past the end
  CHECK(n.disks[0].radius == 0.0525);
  CHECK(n.disks[2].radius == 0.058);
  for (std::size_t i = 0; i < w.disks.size(); ++i) {
    CHECK(n.disks[i].pose.x == w.disks[i].pose.x);
    CHECK(n.disks[i].pose.theta == w.disks[i].pose.theta);
    CHECK(n.disks[i].twist.vx == w.disks[i].twist.vx);
  }
  CHECK(n.pusher.position.x() == w.pusher.position.x());
  CHECK(n.pusher.velocity.x() == w.pusher.velocity.x());
}

TEST_CASE("spatial friction field interpolates and clamps") {
  const auto field = sim::make_mu_field(17, 0.15, 0.05, 0.1);
  REQUIRE(!field.empty());
  for (double v : field.values) {
    CHECK(v > 0.05);
    CHECK(v < 0.25);
  }
  // Exact at nodes.
  const double node = field.values[2 * field.nx + 3];
  CHECK(field.at(field.x0 + 3 * field.h, field.y0 + 2 * field.h) ==
        doctest::Approx(node).epsilon(1e-12));
  // Far outside the grid the border value holds.
  CHECK(field.at(field.x0 - 5.0, field.y0 - 5.0) == doctest::Approx(field.values[0]).epsilon(1e-12));

  sim::SurfaceModel s;
  s.mode = sim::SurfaceModel::Mode::kSpatialField;
  s.field = field;
  CHECK(s.mu_at(0.0, 0.0) == field.at(0.0, 0.0));
}
