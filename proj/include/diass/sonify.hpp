#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diass/model.hpp"

namespace diass {

struct GridData {
    std::vector<int> dims;          // (nx, ny) or (nx, ny, nz)
    std::vector<double> values;     // x-fastest layout: v[ix + nx*(iy + ny*iz)]
    std::vector<std::string> axis_labels;  // "x", "y" (, "z")

    double at(int ix, int iy, int iz = 0) const;
};

struct TrajectoryEntity {
    double x = 0.0;
    double y = 0.0;
    double speed = 0.0;
};

struct TrajectoryData {
    int timesteps = 0;
    std::vector<std::vector<TrajectoryEntity>> steps;  // steps[t][entity]
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;  // domain bounds
};

enum class MapMode { PlaneScan, TravelingWindow };
enum class GridFormat { Csv, RawF32 };

struct MappingConfig {
    MapMode mode = MapMode::PlaneScan;
    int sample_rate = 44100;
    int channels = 2;
    double scan_duration = 30.0;  // seconds to traverse the plane / window path
    int stride = 2;               // vertical stride k (plane scan)
    double freq_lo = 100.0;
    double freq_hi = 4000.0;
    double sones_lo = 1.0;
    double sones_hi = 32.0;
    double window_width = 0.0;    // traveling window, domain x units
    int time_axis = 0;            // plane axis swept in time (0 = x, 1 = y)
    int plane_axis = 2;           // 3-D grids: axis fixed to select the plane
    int plane_index = 0;
    std::optional<std::pair<double, double>> data_range;  // explicit normalization range
};

// CSV rows "x,y[,z],value" (dims inferred, every cell exactly once) or raw
// float32 behind a one-line ASCII header "nx ny [nz]".
GridData load_grid(const std::string& path, GridFormat format);

// CSV "step,entity,x,y,speed" with contiguous steps and a fixed entity
// count; optional "# domain x0 x1 y0 y1" comment declares the bounds.
TrajectoryData load_trajectory(const std::string& path);

// One sound per stride-th vertical grid line, constant frequency ladder,
// loudness envelope traced from the horizontal data run.
Score map_plane_scan(const GridData& grid, const MappingConfig& cfg,
                     std::vector<std::string>* warnings = nullptr);

// One sound per maximal stay of an entity inside the advancing window:
// y -> frequency, x -> pan, |vx| -> vibrato depth, speed -> loudness.
Score map_traveling_window(const TrajectoryData& traj, const MappingConfig& cfg,
                           std::vector<std::string>* warnings = nullptr);

}  // namespace diass
