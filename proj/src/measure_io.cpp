#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "spt/discrete_measure.hpp"

namespace spt {

namespace {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

DiscreteMeasure read_measure_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.empty() || header[0] != "w")
    throw std::runtime_error(path + ": first CSV column must be 'w'");
  const int d = static_cast<int>(header.size()) - 1;
  if (d < 1) throw std::runtime_error(path + ": no coordinate columns");
  for (int j = 0; j < d; ++j) {
    const std::string want = "x" + std::to_string(j + 1);
    if (header[j + 1] != want)
      throw std::runtime_error(path + ": expected header column '" + want + "', got '" +
                                  header[j + 1] + "'");
  }

  std::vector<double> weights;
  std::vector<double> coords;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != d + 1)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(d + 1) + " fields, got " +
                                  std::to_string(fields.size()));
    for (const auto& f : fields) {
      size_t pos = 0;
      double v;
      try {
        v = std::stod(f, &pos);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number '" + f + "'");
      }
      if (pos != f.size())
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number '" + f + "'");
      coords.push_back(v);
    }
    weights.push_back(coords[coords.size() - static_cast<size_t>(d) - 1]);
    coords.erase(coords.end() - d - 1);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(weights.size());
  if (n == 0) throw std::runtime_error(path + ": no atoms");
  Eigen::MatrixXd points(n, d);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = weights[static_cast<size_t>(i)];
    for (int j = 0; j < d; ++j) points(i, j) = coords[static_cast<size_t>(i) * d + j];
  }
  return make_measure(std::move(points), std::move(w));
}

void write_measure_csv(const DiscreteMeasure& mu, const std::string& path) {
  validate_measure(mu);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "w";
  for (Eigen::Index j = 0; j < mu.dim(); ++j) out << ",x" << (j + 1);
  out << "\n";
  for (Eigen::Index i = 0; i < mu.n(); ++i) {
    out << format_double(mu.weights[i]);
    for (Eigen::Index j = 0; j < mu.dim(); ++j) out << "," << format_double(mu.points(i, j));
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

DiscreteMeasure measure_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("measure json: ") + e.what());
  }
  if (!j.is_object() || !j.contains("points") || !j.contains("weights"))
    throw std::runtime_error("measure json: need object with 'points' and 'weights'");
  const auto& pts = j["points"];
  const auto& wts = j["weights"];
  if (!pts.is_array() || pts.empty() || !wts.is_array())
    throw std::runtime_error("measure json: 'points' must be a nonempty array");
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  if (static_cast<Eigen::Index>(wts.size()) != n)
    throw std::runtime_error("measure json: weight count does not match atom count");
  if (!pts[0].is_array() || pts[0].empty())
    throw std::runtime_error("measure json: each point must be a nonempty array");
  const Eigen::Index d = static_cast<Eigen::Index>(pts[0].size());
  Eigen::MatrixXd points(n, d);
  Eigen::VectorXd weights(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = pts[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d)
      throw std::runtime_error("measure json: ragged point rows");
    for (Eigen::Index k = 0; k < d; ++k) points(i, k) = row[static_cast<size_t>(k)].get<double>();
    weights[i] = wts[static_cast<size_t>(i)].get<double>();
  }
  return make_measure(std::move(points), std::move(weights));
}

std::string measure_to_json_text(const DiscreteMeasure& mu) {
  validate_measure(mu);
  nlohmann::json pts = nlohmann::json::array();
  for (Eigen::Index i = 0; i < mu.n(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < mu.dim(); ++j) row.push_back(mu.points(i, j));
    pts.push_back(std::move(row));
  }
  nlohmann::json wts = nlohmann::json::array();
  for (Eigen::Index i = 0; i < mu.n(); ++i) wts.push_back(mu.weights[i]);
  nlohmann::json j{{"points", std::move(pts)}, {"weights", std::move(wts)}};
  return j.dump(2);
}

DiscreteMeasure read_measure_json(const std::string& path) {
  return measure_from_json_text(read_file(path));
}

void write_measure_json(const DiscreteMeasure& mu, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << measure_to_json_text(mu) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

DiscreteMeasure read_measure(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".csv") return read_measure_csv(path);
  if (ext == ".json") return read_measure_json(path);
  throw std::runtime_error(path + ": unsupported measure format (use .csv or .json)");
}

}  // namespace spt
