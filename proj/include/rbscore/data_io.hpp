#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rbscore/model.hpp"

namespace rbscore {

inline constexpr int kPolioMonths = 168;  // Jan 1970 - Dec 1983

// Reads a `t,count` CSV and checks 168 consecutive months of non-negative
// integer counts. Throws std::runtime_error on I/O or format problems.
std::vector<double> load_polio_csv(const std::filesystem::path& path);

// Observation column of a CSV with a `t` column and a `y` or `count` column.
std::vector<double> load_observations_csv(const std::filesystem::path& path);

// Writes `t,x,y`.
void write_path_csv(const std::filesystem::path& path, const SimulatedPath& path_data);

std::vector<std::string> split_csv_line(const std::string& line);

// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

}  // namespace rbscore
