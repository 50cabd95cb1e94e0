#pragma once

// Independent reference implementations used by unit tests and the
// acceptance runner. Deliberately brute force.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crowdnav/network.hpp"
#include "crowdnav/pedestrians.hpp"
#include "crowdnav/perception.hpp"
#include "crowdnav/ppo.hpp"
#include "crowdnav/world.hpp"
#include "crowdnav/random.hpp"

namespace oracle {

using namespace crowdnav;

/// Best velocity on a dense grid over the speed disk satisfying every
/// half-plane; nullopt when no grid point is feasible.
inline bool orca_feasible(const OrcaConstraints& c, Vec2 v, double max_speed) {
  if (abs_sq(v) > max_speed * max_speed) return false;
  for (const OrcaLine& l : c.lines) {
    if (det(l.direction, l.point - v) > 0.0) return false;
  }
  return true;
}

/// Brute-force minimiser of |v - preferred| over the feasible disk: a full grid
/// sweep at `resolution`, then finer local sweeps around the incumbent. The
/// objective is nearly flat along a constraint edge, so the coarse grid alone
/// can land well away from the true optimum.
inline std::optional<Vec2> orca_dense(const OrcaConstraints& c, Vec2 preferred, double max_speed,
                                      double resolution = 0.002, int refinements = 3) {
  std::optional<Vec2> best;
  double best_d = 0.0;
  auto sweep = [&](Vec2 center, double step, int n) {
    for (int i = -n; i <= n; ++i) {
      for (int j = -n; j <= n; ++j) {
        const Vec2 v = center + Vec2{i * step, j * step};
        if (!orca_feasible(c, v, max_speed)) continue;
        const double d = abs_sq(v - preferred);
        if (!best || d < best_d) {
          best = v;
          best_d = d;
        }
      }
    }
  };
  sweep({}, resolution, static_cast<int>(std::ceil(max_speed / resolution)));
  // Each pass covers +-10 coarse cells around the incumbent at a tenth of the step.
  for (int k = 0; k < refinements && best; ++k) {
    const double window = 10.0 * resolution;
    resolution /= 10.0;
    sweep(*best, resolution, static_cast<int>(std::ceil(window / resolution)));
  }
  return best;
}

/// A random multi-agent snapshot: agent 0 plus 1-4 neighbors.
struct OrcaCase {
  OrcaAgent agent;
  std::vector<Neighbor> neighbors;
};

inline OrcaCase random_orca_case(Rng& rng, int agents) {
  OrcaCase c;
  auto random_speed = [&](double max) {
    const double a = uniform(rng, -std::numbers::pi, std::numbers::pi);
    return unit_from_angle(a) * uniform(rng, 0.0, max);
  };
  c.agent.position = {0.0, 0.0};
  c.agent.velocity = random_speed(0.5);
  c.agent.preferred_velocity = random_speed(0.5);
  for (int k = 1; k < agents; ++k) {
    Neighbor n;
    // Keep bodies apart so the overlap branch is not the common case.
    do {
      n.position = {uniform(rng, -3.0, 3.0), uniform(rng, -3.0, 3.0)};
    } while (norm(n.position) < 0.7);
    n.velocity = random_speed(0.5);
    n.id = k;
    c.neighbors.push_back(n);
  }
  return c;
}

/// Cells whose centers fall inside a robot-frame disk, by exhaustive scan.
inline std::vector<int> disk_cells(Vec2 center, double radius) {
  std::vector<int> out;
  for (int row = 0; row < kMapSize; ++row) {
    for (int col = 0; col < kMapSize; ++col) {
      if (abs_sq(cell_center(row, col) - center) <= radius * radius) {
        out.push_back(row * kMapSize + col);
      }
    }
  }
  return out;
}

/// True when `p` lies inside anything the lidar can hit, other than the
/// sensor carrier itself.
inline bool inside_any(const WorldState& w, std::size_t self, Vec2 p) {
  for (const StaticObstacle& o : w.obstacles) {
    if (signed_distance(o, p) <= 0.0) return true;
  }
  for (const Pedestrian& ped : w.pedestrians) {
    for (const Circle& leg : ped.legs) {
      if (abs_sq(p - leg.center) <= leg.radius * leg.radius) return true;
    }
  }
  for (std::size_t j = 0; j < w.robots.size(); ++j) {
    if (j == self) continue;
    const double r = w.robots[j].radius;
    if (abs_sq(p - w.robots[j].position()) <= r * r) return true;
  }
  return false;
}

/// Per-cell visibility: a cell is an obstacle cell when some sample point in
/// it sits just inside a surface and the straight segment from the sensor to
/// that point is clear until the surface. Brute-force marching, no raycasts.
inline std::vector<bool> visible_obstacle_cells(const WorldState& w, std::size_t self,
                                                const LidarConfig& lidar) {
  constexpr int kSub = 8;
  constexpr double kSkin = 0.03;  // how deep a sample may sit below the surface
  constexpr double kMarch = 0.005;
  const AgentBody& robot = w.robots[self];
  std::vector<bool> out(kMapCells, false);
  for (int row = 0; row < kMapSize; ++row) {
    for (int col = 0; col < kMapSize; ++col) {
      const Vec2 corner = cell_center(row, col) - Vec2{0.5, 0.5} * kMapResolution;
      bool hit = false;
      for (int a = 0; a < kSub && !hit; ++a) {
        for (int b = 0; b < kSub && !hit; ++b) {
          const Vec2 local = corner + Vec2{(a + 0.5) / kSub, (b + 0.5) / kSub} * kMapResolution;
          const double dist = norm(local);
          if (dist > lidar.max_range || dist < 1e-9) continue;
          if (std::abs(std::atan2(local.y, local.x)) > 0.5 * lidar.fov) continue;
          const Vec2 world = robot.position() + rotate(local, robot.pose.theta);
          if (!inside_any(w, self, world)) continue;
          const Vec2 dir = (world - robot.position()) / dist;
          bool clear = true;
          for (double s = 0.0; s < dist - kSkin; s += kMarch) {
            if (inside_any(w, self, robot.position() + dir * s)) {
              clear = false;
              break;
            }
          }
          hit = clear;
        }
      }
      out[static_cast<std::size_t>(row * kMapSize + col)] = hit;
    }
  }
  return out;
}

/// Fraction of cells flagged in `a` that have a flagged cell of `b` within
/// one cell (Chebyshev). Returns 1 when `a` is empty.
inline double near_fraction(const std::vector<bool>& a, const std::vector<bool>& b) {
  int total = 0;
  int good = 0;
  for (int row = 0; row < kMapSize; ++row) {
    for (int col = 0; col < kMapSize; ++col) {
      if (!a[static_cast<std::size_t>(row * kMapSize + col)]) continue;
      ++total;
      bool found = false;
      for (int dr = -1; dr <= 1 && !found; ++dr) {
        for (int dc = -1; dc <= 1 && !found; ++dc) {
          const int r = row + dr;
          const int c = col + dc;
          if (r < 0 || c < 0 || r >= kMapSize || c >= kMapSize) continue;
          found = b[static_cast<std::size_t>(r * kMapSize + c)];
        }
      }
      good += found ? 1 : 0;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(good) / total;
}

/// Small network for gradient checks: 12 x 12 maps, every layer kind present.
inline nn::NetArch small_arch(nn::HeadKind head, int outputs,
                              nn::LogStdMode mode = nn::LogStdMode::parameter) {
  nn::NetArch a;
  a.map_size = 12;
  a.filters = {3, 4, 5};
  a.flat_units = 6;
  a.goal_units = 3;
  a.hidden = 7;
  a.head = head;
  a.outputs = outputs;
  a.log_std = mode;
  return a;
}

inline nn::Batch<double> random_batch(const nn::NetArch& a, std::size_t n, Rng& rng) {
  nn::Batch<double> b;
  b.n = n;
  b.maps.resize(n * static_cast<std::size_t>(a.in_channels * a.map_size * a.map_size));
  b.goals.resize(n * static_cast<std::size_t>(a.goal_dim));
  for (double& v : b.maps) v = uniform(rng, -1.0, 1.0);
  for (double& v : b.goals) v = uniform(rng, -2.0, 2.0);
  return b;
}

/// Scalar loss: fixed random weights dotted with every network output.
struct ProbeLoss {
  nn::Mat<double> w_out;
  nn::Mat<double> w_log_std;

  double operator()(const nn::ConvNet<double>& net, const nn::Batch<double>& b) const {
    const auto r = net.forward(b, false);
    double l = (r.out.array() * w_out.array()).sum();
    if (r.log_std.size() > 0) l += (r.log_std.array() * w_log_std.array()).sum();
    return l;
  }
};

struct GradCheck {
  std::string slice;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

/// Central differences on `per_slice` randomly chosen entries of every
/// parameter slice, against the network's own backward pass.
inline std::vector<GradCheck> gradient_check(nn::ConvNet<double>& net, const nn::Batch<double>& b,
                                             Rng& rng, std::size_t per_slice, double h = 1e-4) {
  const nn::NetArch& a = net.arch();
  ProbeLoss loss;
  loss.w_out.resize(static_cast<long>(b.n), a.outputs);
  for (long i = 0; i < loss.w_out.size(); ++i) loss.w_out.data()[i] = uniform(rng, -1.0, 1.0);
  if (a.head == nn::HeadKind::gaussian) {
    loss.w_log_std.resize(static_cast<long>(b.n), a.outputs);
    for (long i = 0; i < loss.w_log_std.size(); ++i) loss.w_log_std.data()[i] = uniform(rng, -1.0, 1.0);
  }

  const auto fwd = net.forward(b, true);
  std::vector<double> grad(net.params().size(), 0.0);
  net.backward(fwd.cache, loss.w_out, loss.w_log_std, grad);

  std::vector<GradCheck> out;
  for (const auto& [name, slice] : net.layout().named()) {
    if (slice.size() == 0) continue;
    for (std::size_t k = 0; k < std::min(per_slice, slice.size()); ++k) {
      const std::size_t idx = slice.offset + uniform_index(rng, slice.size());
      double& p = net.params()[idx];
      const double keep = p;
      p = keep + h;
      const double up = loss(net, b);
      p = keep - h;
      const double down = loss(net, b);
      p = keep;
      GradCheck g;
      g.slice = name;
      g.index = idx;
      g.analytic = grad[idx];
      g.numeric = (up - down) / (2.0 * h);
      const double scale = std::max({std::abs(g.analytic), std::abs(g.numeric), 1e-6});
      g.rel_error = std::abs(g.analytic - g.numeric) / scale;
      out.push_back(g);
    }
  }
  return out;
}

/// Textbook backward recursion with no shortcuts.
inline std::vector<double> discounted_returns(const std::vector<double>& rewards, double bootstrap,
                                              double gamma) {
  std::vector<double> g(rewards.size());
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    double acc = 0.0;
    double scale = 1.0;
    for (std::size_t k = t; k < rewards.size(); ++k) {
      acc += scale * rewards[k];
      scale *= gamma;
    }
    g[t] = acc + scale * bootstrap;
  }
  return g;
}

}  // namespace oracle
