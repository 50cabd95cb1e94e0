#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crowdnav/world.hpp"

namespace crowdnav {

// Egocentric grid: 48 x 48 cells of 0.125 m, robot at the center, +x along
// the robot heading, +y to its left. Cell (row, col) covers
//   x in [(col - 24) * res, (col - 23) * res), y in [(row - 24) * res, (row - 23) * res).
inline constexpr int kMapSize = 48;
inline constexpr int kMapCells = kMapSize * kMapSize;
inline constexpr double kMapResolution = 0.125;
inline constexpr int kMapCenter = kMapSize / 2;
inline constexpr double kMapHalfExtent = kMapCenter * kMapResolution;  // 3.0 m

/// Grid cell containing a robot-frame point, or -1 when outside the map.
int cell_index(Vec2 robot_frame_point);
Vec2 cell_center(int row, int col);

enum class Cell : std::uint8_t { obstacle, free, unknown, footprint };

/// Network-facing scalar for each sensor category.
float encode_cell(Cell c);

struct SensorMap {
  std::array<Cell, kMapCells> cells;

  Cell at(int row, int col) const { return cells[static_cast<std::size_t>(row * kMapSize + col)]; }
};

struct PedestrianMap {
  std::vector<double> occupancy = std::vector<double>(kMapCells, 0.0);
  std::vector<double> vx = std::vector<double>(kMapCells, 0.0);  // robot frame, m/s
  std::vector<double> vy = std::vector<double>(kMapCells, 0.0);

  bool empty() const;
};

/// Goal pose in the robot frame.
struct TargetPose {
  double x = 0.0;
  double y = 0.0;
  double alpha = 0.0;
};

struct ObservationBundle {
  SensorMap sensor_map;
  PedestrianMap pedestrian_map;
  TargetPose target;
};

struct LidarConfig {
  int beams = 720;
  double fov = 1.5 * 3.14159265358979323846;  // 270 degrees
  double max_range = 6.0;
};

/// Beam angle relative to the robot heading; beams span [-fov/2, +fov/2].
double beam_angle(const LidarConfig& lidar, int beam);

SensorMap build_sensor_map(const WorldState& world, std::size_t robot_index,
                           const LidarConfig& lidar = {});

/// Pedestrian body disks rasterized by cell center; velocities rotated into
/// the robot frame. Overlaps resolve to the pedestrian nearest the cell center.
PedestrianMap build_pedestrian_map(const WorldState& world, std::size_t robot_index);

TargetPose target_in_robot_frame(const Pose2D& robot, const Pose2D& goal);

inline constexpr std::size_t kObservationChannels = 4;
inline constexpr std::size_t kGoalDim = 3;

/// Writes the network input: channel 0 sensor categories, channels 1-3 the
/// pedestrian map with velocities divided by `max_ped_speed`. Every value
/// lies in [-1, 1].
void encode_observation(const ObservationBundle& obs, std::span<float> maps,
                        std::span<float> goal, double max_ped_speed = kMaxPedestrianSpeed);

// Debug dumps. Text rows run from +y (top) to -y; PGM is 8-bit grayscale.
std::string sensor_map_to_text(const SensorMap& map);
std::string pedestrian_map_to_text(const PedestrianMap& map);
void write_sensor_map_pgm(const std::string& path, const SensorMap& map);
void write_pedestrian_map_pgm(const std::string& path, const PedestrianMap& map, int channel,
                              double max_ped_speed = kMaxPedestrianSpeed);

}  // namespace crowdnav
