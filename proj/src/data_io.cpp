#include "rbscore/data_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rbscore {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

double parse_number(const std::string& s, const std::filesystem::path& path, int line) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && *first == ' ') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last)
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::vector<double> load_polio_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"t", "count"})
    throw std::runtime_error(path.string() + ": expected header 't,count'");
  std::vector<double> counts;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 2) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 2 fields");
    const double t = parse_number(fields[0], path, lineno);
    const double c = parse_number(fields[1], path, lineno);
    if (t != static_cast<double>(counts.size() + 1))
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": months must run 1..168 in order");
    if (c < 0.0 || std::floor(c) != c)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": counts must be non-negative integers");
    counts.push_back(c);
  }
  if (counts.size() != kPolioMonths)
    throw std::runtime_error(path.string() + ": expected 168 monthly counts, found " + std::to_string(counts.size()));
  return counts;
}

std::vector<double> load_observations_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  int col = -1;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == "y" || header[i] == "count") col = static_cast<int>(i);
  if (col < 0) throw std::runtime_error(path.string() + ": no 'y' or 'count' column");
  std::vector<double> y;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": field count mismatch");
    y.push_back(parse_number(fields[col], path, lineno));
  }
  if (y.empty()) throw std::runtime_error(path.string() + ": no observations");
  return y;
}

void write_path_csv(const std::filesystem::path& path, const SimulatedPath& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,x,y\n";
  for (std::size_t t = 0; t < data.y.size(); ++t)
    out << (t + 1) << ',' << format_double(data.x[t]) << ',' << format_double(data.y[t]) << '\n';
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace rbscore
