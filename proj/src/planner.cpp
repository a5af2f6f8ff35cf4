#include "pushlab/planner.hpp"

#include <cmath>
#include <set>

namespace pushlab::plan {

std::vector<ControlAction> enumerate_actions(const PlannerConfig& cfg) {
  require(cfg.n_theta >= 1 && cfg.n_alpha >= 1, "planner: empty action grid");
  std::vector<ControlAction> out;
  out.reserve(cfg.n_theta * cfg.n_alpha);
  const double th_bin = 2.0 * cfg.theta_range / cfg.n_theta;
  const double al_bin = 2.0 * cfg.alpha_range / cfg.n_alpha;
  for (int ti = 0; ti < cfg.n_theta; ++ti)
    for (int ai = 0; ai < cfg.n_alpha; ++ai) {
      ControlAction a;
      a.index = ti * cfg.n_alpha + ai;
      a.theta = -cfg.theta_range + (ti + 0.5) * th_bin;
      a.alpha = -cfg.alpha_range + (ai + 0.5) * al_bin;
      a.push_length = cfg.push_length;
      a.push_speed = cfg.push_speed;
      out.push_back(a);
    }
  return out;
}

double heuristic(const Vec2& p1, const Vec2& p2, const Vec2& goal) {
  const double dist = (p2 - goal).norm();
  const Vec2 to_goal = goal - p1;
  const Vec2 to_obj = p2 - p1;
  const double ng = to_goal.norm();
  const double no = to_obj.norm();
  double align = 0.0;
  if (ng >= 1e-9 && no >= 1e-9) align = 1.0 - to_goal.dot(to_obj) / (ng * no);
  return dist + align;
}

int active_horizon(double dist_to_goal, const PlannerConfig& cfg) {
  return dist_to_goal < cfg.switch_distance ? cfg.horizon_near : cfg.horizon_far;
}

namespace {

// Axis from disk 2 toward disk 1 extended through disk 1: the "back" of the
// pushed disk. Coincident centers have no back axis; fall back to -x.
Vec2 back_axis(const sim::WorldState& w) {
  const Vec2 u = Vec2(w.disks[1].pose.x - w.disks[0].pose.x,
                      w.disks[1].pose.y - w.disks[0].pose.y);
  const double n = u.norm();
  return n >= 1e-12 ? Vec2(-u / n) : Vec2(-1.0, 0.0);
}

bool at_rest(const sim::WorldState& w) {
  for (const auto& d : w.disks)
    if (d.twist.vx != 0.0 || d.twist.vy != 0.0 || d.twist.omega != 0.0) return false;
  return true;
}

constexpr int kSettleSteps = 480;

}  // namespace

sim::WorldState place_pusher(const sim::WorldState& w, const ControlAction& a) {
  require(w.disks.size() >= 2, "place_pusher: need two disks");
  sim::WorldState out = w;
  const Vec2 back = rotate(back_axis(w), a.theta);
  out.pusher.position = Vec2(w.disks[0].pose.x, w.disks[0].pose.y) +
                        (w.disks[0].radius + w.pusher.radius) * back;
  out.pusher.velocity = Vec2::Zero();
  return out;
}

Vec2 push_command(const sim::WorldState& placed, const ControlAction& a) {
  const Vec2 to_disk = Vec2(placed.disks[0].pose.x, placed.disks[0].pose.y) -
                       placed.pusher.position;
  const double n = to_disk.norm();
  require(n >= 1e-12, "push_command: pusher on disk center");
  return a.push_speed * rotate(Vec2(to_disk / n), a.alpha);
}

int push_steps(const ControlAction& a, double dt) {
  return std::max(1, static_cast<int>(std::lround(a.push_length / (a.push_speed * dt))));
}

std::vector<sim::WorldState> PhysicsForward::predict(
    const sim::WorldState& w, const std::vector<ControlAction>& actions) const {
  std::vector<sim::WorldState> out;
  out.reserve(actions.size());
  for (const ControlAction& a : actions) {
    sim::WorldState nom = nominal_.substitute(place_pusher(w, a));
    const Vec2 cmd = push_command(nom, a);
    const int n = push_steps(a, nominal_.sim.dt);
    for (int t = 0; t < n; ++t) sim::advance(nom, cmd, nominal_.sim);
    // Glide-out matters: pushes end with ~1 mm of sliding left, the same order
    // as the goal tolerance, and episodes settle before observing.
    for (int t = 0; t < kSettleSteps && !at_rest(nom); ++t)
      sim::advance(nom, Vec2::Zero(), nominal_.sim);
    sim::WorldState pred = w;   // observed masses/radii/surface ride along
    for (std::size_t i = 0; i < pred.disks.size(); ++i) {
      pred.disks[i].pose = nom.disks[i].pose;
      pred.disks[i].twist = nom.disks[i].twist;
    }
    pred.pusher.position = nom.pusher.position;
    pred.pusher.velocity = nom.pusher.velocity;
    out.push_back(std::move(pred));
  }
  return out;
}

std::vector<sim::WorldState> LearnedForward::predict(
    const sim::WorldState& w, const std::vector<ControlAction>& actions) const {
  require(!actions.empty(), "predict: no actions");
  const model::ModelParams& P = *params_;
  const double dt = P.nominal.sim.dt;
  const int n = static_cast<int>(w.disks.size());

  std::vector<model::Window> wins(actions.size());
  std::vector<Vec2> cmds(actions.size());
  for (std::size_t k = 0; k < actions.size(); ++k) {
    sim::WorldState placed = place_pusher(w, actions[k]);
    const Vec2 cmd = push_command(placed, actions[k]);
    const int T = push_steps(actions[k], dt);
    model::Window& win = wins[k];
    win.dt = dt;
    win.init = model::to_obj_states(placed);
    win.pusher0 = placed.pusher.position;
    win.pusher_radius = placed.pusher.radius;
    win.actions.resize(T, 2);
    for (int t = 0; t < T; ++t) win.actions.row(t) << cmd.x(), cmd.y();
    if (P.kind == model::ModelKind::kSain) model::fill_engine_deltas(P.nominal, win);
    cmds[k] = cmd;
  }
  std::vector<Eigen::MatrixXd> pred = model::batch_rollout(P, wins);

  std::vector<sim::WorldState> out;
  out.reserve(actions.size());
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const Eigen::MatrixXd& st = pred[k];
    const long last = st.rows() - 1;
    sim::WorldState v = w;
    for (int i = 0; i < n; ++i) {
      v.disks[i].pose = {st(last, i * 6 + 0), st(last, i * 6 + 1),
                         wrap_angle(st(last, i * 6 + 2))};
      v.disks[i].twist = {st(last, i * 6 + 3), st(last, i * 6 + 4), st(last, i * 6 + 5)};
    }
    v.pusher.position = wins[k].pusher0 + double(last) * dt * cmds[k];
    v.pusher.velocity = Vec2::Zero();
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

struct Node {
  double cost = 0.0;
  bool terminal = false;   // predicted within tolerance; scored by distance alone
  std::vector<int> seq;
  sim::WorldState world;
};

struct NodeLess {
  bool operator()(const Node& a, const Node& b) const {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.seq < b.seq;
  }
};

Vec2 disk_pos(const sim::WorldState& w, int i) {
  return Vec2(w.disks[i].pose.x, w.disks[i].pose.y);
}

}  // namespace

PlanResult plan_next(const sim::WorldState& observed, const Goal& goal,
                     const ForwardModel& model, const PlannerConfig& cfg, double cost_scale) {
  require(observed.disks.size() >= 2, "plan: need two disks");
  require(cost_scale > 0.0, "plan: cost scale must be positive");
  require(cfg.queue_capacity >= 1, "plan: zero search budget");

  const std::vector<ControlAction> actions = enumerate_actions(cfg);
  const int H = active_horizon((disk_pos(observed, 1) - goal.position).norm(), cfg);

  // Within tolerance the episode ends, so a predicted capture is an end state:
  // no alignment shaping, no further pushes. Anything else pays dist + align.
  auto score = [&](const sim::WorldState& w, bool& terminal) {
    const double dist = (disk_pos(w, 1) - goal.position).norm();
    terminal = dist <= goal.tolerance;
    if (terminal) return cost_scale * dist;
    return cost_scale * heuristic(disk_pos(w, 0), disk_pos(w, 1), goal.position);
  };

  std::multiset<Node, NodeLess> open;
  Node root;
  root.cost = score(observed, root.terminal);
  root.world = observed;
  root.world.surface = sim::SurfaceModel{};   // models never consult the surface
  open.insert(std::move(root));

  PlanResult res;
  int greedy = -1;
  double greedy_cost = 0.0;
  int expansions = 0;

  while (!open.empty()) {
    Node node = *open.begin();
    open.erase(open.begin());
    res.depth_reached = std::max(res.depth_reached, static_cast<int>(node.seq.size()));
    if ((node.terminal && !node.seq.empty()) || static_cast<int>(node.seq.size()) == H) {
      res.action = actions[node.seq[0]];
      res.cost = node.cost;
      res.expansions = expansions;
      return res;
    }
    if (expansions == cfg.queue_capacity) break;
    ++expansions;

    std::vector<sim::WorldState> pred = model.predict(node.world, actions);
    for (std::size_t k = 0; k < actions.size(); ++k) {
      Node child;
      child.cost = score(pred[k], child.terminal);
      require(std::isfinite(child.cost), "plan: non-finite candidate cost");
      child.seq = node.seq;
      child.seq.push_back(static_cast<int>(k));
      child.world = std::move(pred[k]);
      if (node.seq.empty() && (greedy < 0 || child.cost < greedy_cost)) {
        greedy = static_cast<int>(k);
        greedy_cost = child.cost;
      }
      open.insert(std::move(child));
    }
    while (static_cast<int>(open.size()) > cfg.queue_capacity) open.erase(std::prev(open.end()));
  }

  require(greedy >= 0, "plan: search ended before expanding the root");
  res.action = actions[greedy];
  res.cost = greedy_cost;
  res.expansions = expansions;
  res.fallback = true;
  return res;
}

Goal sample_goal(const sim::WorldState& w, bool hard, Rng& rng) {
  require(w.disks.size() >= 2, "goal: need two disks");
  const Vec2 c1 = disk_pos(w, 0), c2 = disk_pos(w, 1);
  const Vec2 u = (c2 - c1).normalized();
  double ang;
  if (hard) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    ang = sign * rng.uniform(kPi / 6.0, kPi / 3.0);
  } else {
    ang = rng.uniform(-kPi / 6.0, kPi / 6.0);
  }
  Goal g;
  g.position = c2 + 3.0 * w.disks[1].radius * rotate(u, ang);
  g.tolerance = w.disks[1].radius / 10.0;
  return g;
}

namespace {

sim::WorldState observe(const sim::WorldState& w, const Observation& obs, Rng& rng) {
  if (!obs.noisy) return w;
  sim::WorldState o = w;
  for (auto& d : o.disks) {
    d.pose.x += obs.sigma_pos * rng.normal();
    d.pose.y += obs.sigma_pos * rng.normal();
    d.pose.theta = wrap_angle(d.pose.theta + obs.sigma_rot * rng.normal());
    d.twist = {0.0, 0.0, 0.0};   // velocities unobserved; episodes settle first
  }
  return o;
}

sim::WorldState strip_surface(const sim::WorldState& w) {
  sim::WorldState o = w;
  o.surface = sim::SurfaceModel{};
  o.surface.mu_nominal = w.surface.mu_nominal;
  return o;
}

}  // namespace

EpisodeResult run_episode(const sim::WorldState& world0, const Goal& goal,
                          const ForwardModel& model, const PlannerConfig& cfg,
                          const sim::SimConfig& true_cfg, const Observation& obs, Rng& rng) {
  EpisodeResult ep;
  ep.goal = goal;
  sim::WorldState world = world0;
  ep.checkpoints.push_back(strip_surface(world));

  for (int k = 0; k <= cfg.max_episode_actions; ++k) {
    ep.final_distance = (disk_pos(world, 1) - goal.position).norm();
    if (ep.final_distance <= goal.tolerance) {
      ep.success = true;
      ep.actions_used = k;
      return ep;
    }
    if (k == cfg.max_episode_actions) break;

    PlanResult plan = plan_next(observe(world, obs, rng), goal, model, cfg);
    world = place_pusher(world, plan.action);
    const Vec2 cmd = push_command(world, plan.action);
    const int n = push_steps(plan.action, true_cfg.dt);
    for (int t = 0; t < n; ++t) sim::advance(world, cmd, true_cfg);
    for (int t = 0; t < kSettleSteps && !at_rest(world); ++t)
      sim::advance(world, Vec2::Zero(), true_cfg);

    ep.actions.push_back(plan.action);
    ep.checkpoints.push_back(strip_surface(world));
  }
  ep.actions_used = static_cast<int>(ep.actions.size());
  return ep;
}

}  // namespace pushlab::plan
