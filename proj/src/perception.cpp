#include "crowdnav/perception.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace crowdnav {

int cell_index(Vec2 p) {
  const int col = static_cast<int>(std::floor(p.x / kMapResolution)) + kMapCenter;
  const int row = static_cast<int>(std::floor(p.y / kMapResolution)) + kMapCenter;
  if (col < 0 || col >= kMapSize || row < 0 || row >= kMapSize) return -1;
  return row * kMapSize + col;
}

Vec2 cell_center(int row, int col) {
  return {(col - kMapCenter + 0.5) * kMapResolution, (row - kMapCenter + 0.5) * kMapResolution};
}

float encode_cell(Cell c) {
  switch (c) {
    case Cell::obstacle:
      return 0.0F;
    case Cell::free:
      return 1.0F;
    case Cell::unknown:
      return 0.5F;
    case Cell::footprint:
      return 0.25F;
  }
  return 0.5F;
}

bool PedestrianMap::empty() const {
  return std::all_of(occupancy.begin(), occupancy.end(), [](double v) { return v == 0.0; });
}

double beam_angle(const LidarConfig& lidar, int beam) {
  if (lidar.beams == 1) return 0.0;
  return -0.5 * lidar.fov + lidar.fov * beam / (lidar.beams - 1);
}

namespace {

// Grid traversal from the map center along `dir` (robot frame), marking every
// cell entered before `length` meters.
void trace_free(Vec2 dir, double length, std::array<bool, kMapCells>& free_mark) {
  const double gx0 = kMapCenter;
  const double gy0 = kMapCenter;
  const double limit = length / kMapResolution;
  int ix = static_cast<int>(std::floor(gx0 + 1e-9 * dir.x));
  int iy = static_cast<int>(std::floor(gy0 + 1e-9 * dir.y));
  const int step_x = dir.x > 0.0 ? 1 : -1;
  const int step_y = dir.y > 0.0 ? 1 : -1;
  constexpr double inf = std::numeric_limits<double>::infinity();
  double t_max_x = dir.x != 0.0 ? ((ix + (dir.x > 0.0 ? 1 : 0)) - gx0) / dir.x : inf;
  double t_max_y = dir.y != 0.0 ? ((iy + (dir.y > 0.0 ? 1 : 0)) - gy0) / dir.y : inf;
  const double t_delta_x = dir.x != 0.0 ? 1.0 / std::abs(dir.x) : inf;
  const double t_delta_y = dir.y != 0.0 ? 1.0 / std::abs(dir.y) : inf;
  double t_enter = 0.0;
  while (t_enter < limit) {
    if (ix < 0 || ix >= kMapSize || iy < 0 || iy >= kMapSize) break;
    free_mark[static_cast<std::size_t>(iy * kMapSize + ix)] = true;
    if (t_max_x < t_max_y) {
      t_enter = t_max_x;
      t_max_x += t_delta_x;
      ix += step_x;
    } else {
      t_enter = t_max_y;
      t_max_y += t_delta_y;
      iy += step_y;
    }
  }
}

}  // namespace

SensorMap build_sensor_map(const WorldState& world, std::size_t robot_index,
                           const LidarConfig& lidar) {
  const AgentBody& robot = world.robots.at(robot_index);
  std::array<bool, kMapCells> free_mark{};
  std::array<bool, kMapCells> hit_mark{};
  for (int b = 0; b < lidar.beams; ++b) {
    const double rel = beam_angle(lidar, b);
    const double range =
        raycast(world, robot.position(), robot.pose.theta + rel, lidar.max_range, robot_index);
    const Vec2 dir = unit_from_angle(rel);
    trace_free(dir, range, free_mark);
    if (range < lidar.max_range) {
      const int idx = cell_index(dir * range);
      if (idx >= 0) hit_mark[static_cast<std::size_t>(idx)] = true;
    }
  }

  SensorMap map;
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    map.cells[i] = hit_mark[i] ? Cell::obstacle : free_mark[i] ? Cell::free : Cell::unknown;
  }
  for (int row = 0; row < kMapSize; ++row) {
    for (int col = 0; col < kMapSize; ++col) {
      if (norm(cell_center(row, col)) <= robot.radius) {
        map.cells[static_cast<std::size_t>(row * kMapSize + col)] = Cell::footprint;
      }
    }
  }
  return map;
}

PedestrianMap build_pedestrian_map(const WorldState& world, std::size_t robot_index) {
  const AgentBody& robot = world.robots.at(robot_index);
  PedestrianMap map;
  std::vector<double> best(kMapCells, std::numeric_limits<double>::infinity());
  const double heading = robot.pose.theta;

  for (const Pedestrian& ped : world.pedestrians) {
    const Vec2 rel = rotate(ped.body.position() - robot.position(), -heading);
    const Vec2 vel = rotate(ped.body.velocity, -heading);
    const double r = ped.body.radius;
    if (std::abs(rel.x) > kMapHalfExtent + r || std::abs(rel.y) > kMapHalfExtent + r) continue;

    const int col_lo = std::max(0, static_cast<int>(std::floor((rel.x - r) / kMapResolution)) + kMapCenter);
    const int col_hi = std::min(kMapSize - 1, static_cast<int>(std::floor((rel.x + r) / kMapResolution)) + kMapCenter);
    const int row_lo = std::max(0, static_cast<int>(std::floor((rel.y - r) / kMapResolution)) + kMapCenter);
    const int row_hi = std::min(kMapSize - 1, static_cast<int>(std::floor((rel.y + r) / kMapResolution)) + kMapCenter);
    for (int row = row_lo; row <= row_hi; ++row) {
      for (int col = col_lo; col <= col_hi; ++col) {
        const double d = norm(cell_center(row, col) - rel);
        const auto i = static_cast<std::size_t>(row * kMapSize + col);
        if (d > r || d >= best[i]) continue;
        best[i] = d;
        map.occupancy[i] = 1.0;
        map.vx[i] = vel.x;
        map.vy[i] = vel.y;
      }
    }
  }
  return map;
}

TargetPose target_in_robot_frame(const Pose2D& robot, const Pose2D& goal) {
  const Vec2 rel = rotate(goal.position() - robot.position(), -robot.theta);
  return {rel.x, rel.y, normalize_angle(goal.theta - robot.theta)};
}

void encode_observation(const ObservationBundle& obs, std::span<float> maps,
                        std::span<float> goal, double max_ped_speed) {
  if (maps.size() != kObservationChannels * kMapCells || goal.size() != kGoalDim) {
    throw std::invalid_argument("encode_observation: buffer size mismatch");
  }
  const PedestrianMap& pm = obs.pedestrian_map;
  for (std::size_t i = 0; i < kMapCells; ++i) {
    maps[i] = encode_cell(obs.sensor_map.cells[i]);
    maps[kMapCells + i] = static_cast<float>(pm.occupancy[i]);
    maps[2 * kMapCells + i] = static_cast<float>(std::clamp(pm.vx[i] / max_ped_speed, -1.0, 1.0));
    maps[3 * kMapCells + i] = static_cast<float>(std::clamp(pm.vy[i] / max_ped_speed, -1.0, 1.0));
  }
  goal[0] = static_cast<float>(obs.target.x);
  goal[1] = static_cast<float>(obs.target.y);
  goal[2] = static_cast<float>(obs.target.alpha);
}

std::string sensor_map_to_text(const SensorMap& map) {
  std::string out;
  out.reserve(kMapCells + kMapSize);
  for (int row = kMapSize - 1; row >= 0; --row) {
    for (int col = 0; col < kMapSize; ++col) {
      switch (map.at(row, col)) {
        case Cell::obstacle:
          out += '#';
          break;
        case Cell::free:
          out += '.';
          break;
        case Cell::unknown:
          out += '?';
          break;
        case Cell::footprint:
          out += 'R';
          break;
      }
    }
    out += '\n';
  }
  return out;
}

std::string pedestrian_map_to_text(const PedestrianMap& map) {
  std::string out;
  for (int row = kMapSize - 1; row >= 0; --row) {
    for (int col = 0; col < kMapSize; ++col) {
      out += map.occupancy[static_cast<std::size_t>(row * kMapSize + col)] > 0.0 ? 'P' : '.';
    }
    out += '\n';
  }
  return out;
}

namespace {

void write_pgm(const std::string& path, const std::array<std::uint8_t, kMapCells>& pixels) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P5\n" << kMapSize << ' ' << kMapSize << "\n255\n";
  for (int row = kMapSize - 1; row >= 0; --row) {
    f.write(reinterpret_cast<const char*>(pixels.data() + row * kMapSize), kMapSize);
  }
}

std::uint8_t to_byte(double unit) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0));
}

}  // namespace

// Pixel = round(255 * encoded value): obstacle 0, footprint 64, unknown 128, free 255.
void write_sensor_map_pgm(const std::string& path, const SensorMap& map) {
  std::array<std::uint8_t, kMapCells> px{};
  for (std::size_t i = 0; i < kMapCells; ++i) px[i] = to_byte(encode_cell(map.cells[i]));
  write_pgm(path, px);
}

// Occupancy: 0 or 255. Velocity channels: round(255 * (v / max_speed + 1) / 2).
void write_pedestrian_map_pgm(const std::string& path, const PedestrianMap& map, int channel,
                              double max_ped_speed) {
  std::array<std::uint8_t, kMapCells> px{};
  for (std::size_t i = 0; i < kMapCells; ++i) {
    switch (channel) {
      case 0:
        px[i] = to_byte(map.occupancy[i]);
        break;
      case 1:
        px[i] = to_byte(0.5 * (map.vx[i] / max_ped_speed + 1.0));
        break;
      case 2:
        px[i] = to_byte(0.5 * (map.vy[i] / max_ped_speed + 1.0));
        break;
      default:
        throw std::invalid_argument("pedestrian map channel must be 0, 1 or 2");
    }
  }
  write_pgm(path, px);
}

}  // namespace crowdnav
