#include "spt/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "spt/concentration.hpp"
#include "spt/discrete_measure.hpp"
#include "spt/laws.hpp"
#include "spt/numeric.hpp"
#include "spt/rng.hpp"
#include "spt/samplers.hpp"
#include "spt/stiefel.hpp"
#include "spt/transport.hpp"
#include "spt/version.hpp"

namespace spt {
namespace {

using json = nlohmann::ordered_json;

constexpr const char* kKinds[] = {"rates_plugin",  "rates_wpp",
                                  "spike_recovery", "concentration",
                                  "hardness_suite", "solve"};

bool known_kind(const std::string& kind) {
  for (const char* k : kKinds) {
    if (kind == k) return true;
  }
  return false;
}

bool sampler_kind(const std::string& kind) {
  return kind == "rates_plugin" || kind == "concentration";
}

bool spiked_kind(const std::string& kind) {
  return kind == "rates_wpp" || kind == "spike_recovery";
}

std::string formatted(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// ------------------------------------------------------------------ parsing

struct Entry {
  std::string text;
  int line = 0;
  bool used = false;
};

struct Section {
  int line = 0;
  std::map<std::string, Entry> entries;
  bool known = false;
};

struct RawConfig {
  std::string path;
  std::map<std::string, Section> sections;  // "" holds top-level keys
};

bool valid_key(const std::string& s) {
  if (s.empty() || (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_')) {
    return false;
  }
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_';
  });
}

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

RawConfig parse_raw(const std::string& text, const std::string& path) {
  RawConfig raw;
  raw.path = path;
  raw.sections[""].line = 0;
  std::string current;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trimmed(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(path, lineno, "unterminated section header");
      }
      current = trimmed(line.substr(1, line.size() - 2));
      if (!valid_key(current)) {
        throw ConfigError(path, lineno, "bad section name '" + current + "'");
      }
      if (raw.sections.count(current)) {
        throw ConfigError(path, lineno,
                          "section [" + current + "] appears twice");
      }
      raw.sections[current].line = lineno;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path, lineno, "expected 'key = value'");
    }
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));
    if (!valid_key(key)) {
      throw ConfigError(path, lineno, "bad key name '" + key + "'");
    }
    if (value.empty()) {
      throw ConfigError(path, lineno, "key '" + key + "' has no value");
    }
    Section& sec = raw.sections[current];
    if (sec.entries.count(key)) {
      throw ConfigError(path, lineno,
                        "key '" + key + "' appears twice in one section");
    }
    sec.entries[key] = Entry{value, lineno, false};
  }
  return raw;
}

// Typed access with line-referenced failures and used-key tracking, so
// anything the schema never touched can be reported as unknown.
class Reader {
 public:
  explicit Reader(RawConfig raw) : raw_(std::move(raw)) {}

  const std::string& path() const { return raw_.path; }

  void mark_section(const std::string& section) {
    auto it = raw_.sections.find(section);
    if (it != raw_.sections.end()) it->second.known = true;
  }

  bool has(const std::string& section, const std::string& key) {
    auto sec = raw_.sections.find(section);
    return sec != raw_.sections.end() && sec->second.entries.count(key) > 0;
  }

  int key_line(const std::string& section, const std::string& key) {
    return raw_.sections.at(section).entries.at(key).line;
  }

  std::string require(const std::string& section, const std::string& key) {
    auto sec = raw_.sections.find(section);
    if (sec == raw_.sections.end()) {
      throw ConfigError(raw_.path, 0,
                        "missing section [" + section + "] (needs key '" +
                            key + "')");
    }
    auto it = sec->second.entries.find(key);
    if (it == sec->second.entries.end()) {
      throw ConfigError(raw_.path, sec->second.line,
                        "missing key '" + key + "' in [" + section + "]");
    }
    it->second.used = true;
    return it->second.text;
  }

  std::optional<std::string> optional_text(const std::string& section,
                                           const std::string& key) {
    if (!has(section, key)) return std::nullopt;
    Entry& e = raw_.sections[section].entries[key];
    e.used = true;
    return e.text;
  }

  double to_double(const std::string& section, const std::string& key,
                   const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || !std::isfinite(v)) {
      throw ConfigError(raw_.path, key_line(section, key),
                        "key '" + key + "': bad number '" + text + "'");
    }
    return v;
  }

  long long to_int(const std::string& section, const std::string& key,
                   const std::string& text) {
    const double v = to_double(section, key, text);
    if (v != std::floor(v) || std::abs(v) > 1e15) {
      throw ConfigError(raw_.path, key_line(section, key),
                        "key '" + key + "': expected an integer, got '" +
                            text + "'");
    }
    return static_cast<long long>(v);
  }

  std::uint64_t to_u64(const std::string& section, const std::string& key,
                       const std::string& text) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
    if (errno != 0 || end != text.c_str() + text.size() ||
        text.find('-') != std::string::npos) {
      throw ConfigError(raw_.path, key_line(section, key),
                        "key '" + key + "': bad unsigned integer '" + text +
                            "'");
    }
    return v;
  }

  std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::string token;
    for (const char c : text) {
      if (c == ' ' || c == '\t' || c == ',') {
        if (!token.empty()) parts.push_back(std::exchange(token, ""));
      } else {
        token += c;
      }
    }
    if (!token.empty()) parts.push_back(token);
    return parts;
  }

  std::vector<double> to_double_list(const std::string& section,
                                     const std::string& key,
                                     const std::string& text) {
    std::vector<double> out;
    for (const std::string& t : split_list(text)) {
      out.push_back(to_double(section, key, t));
    }
    if (out.empty()) {
      throw ConfigError(raw_.path, key_line(section, key),
                        "key '" + key + "': empty list");
    }
    return out;
  }

  std::vector<int> to_int_list(const std::string& section,
                               const std::string& key,
                               const std::string& text) {
    std::vector<int> out;
    for (const std::string& t : split_list(text)) {
      out.push_back(static_cast<int>(to_int(section, key, t)));
    }
    if (out.empty()) {
      throw ConfigError(raw_.path, key_line(section, key),
                        "key '" + key + "': empty list");
    }
    return out;
  }

  // Rows separated by '|', row entries by spaces or commas.
  Eigen::MatrixXd to_matrix(const std::string& section, const std::string& key,
                            const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::string row;
    std::istringstream in(text);
    while (std::getline(in, row, '|')) {
      rows.push_back(to_double_list(section, key, row));
    }
    const std::size_t width = rows.empty() ? 0 : rows.front().size();
    for (const auto& r : rows) {
      if (r.size() != width) {
        throw ConfigError(raw_.path, key_line(section, key),
                          "key '" + key + "': ragged rows");
      }
    }
    Eigen::MatrixXd m(rows.size(), width);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < width; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  ConfigError at(const std::string& section, const std::string& key,
                 const std::string& message) {
    return ConfigError(raw_.path, key_line(section, key), message);
  }

  // Every key must have been consumed by the schema for this kind.
  void finish(const std::string& kind) {
    for (const auto& [name, sec] : raw_.sections) {
      if (!name.empty() && !sec.known) {
        throw ConfigError(raw_.path, sec.line,
                          "section [" + name + "] is not used by kind '" +
                              kind + "'");
      }
      for (const auto& [key, entry] : sec.entries) {
        if (!entry.used) {
          throw ConfigError(raw_.path, entry.line,
                            "key '" + key + "' is not used by kind '" + kind +
                                "'");
        }
      }
    }
  }

 private:
  RawConfig raw_;
};

// ------------------------------------------------- generator construction

constexpr const char* kSamplerFamilies[] = {
    "gaussian", "uniform_cube", "two_point", "atomic",
    "gauss_hermite_convolved"};
constexpr const char* kSpikedFamilies[] = {"spiked_gaussian", "hard_instance"};

double mixture_delta(const ExperimentConfig& c) {
  if (c.noise_delta >= 0.0) return c.noise_delta;
  return std::min(1.0 / c.nodes, 0.5);
}

Sampler build_sampler(const ExperimentConfig& c) {
  if (c.family == "gaussian") return standard_gaussian_sampler(c.d);
  if (c.family == "uniform_cube") return uniform_cube_sampler(c.d, c.side);
  if (c.family == "two_point") {
    if (c.atoms.rows() != 2) {
      throw std::invalid_argument("two_point generator needs exactly 2 atoms");
    }
    return two_point_sampler(c.atoms,
                             Eigen::Vector2d(c.atom_weights[0],
                                             c.atom_weights[1]));
  }
  if (c.family == "atomic") return atomic_sampler(c.atoms, c.atom_weights);
  if (c.family == "gauss_hermite_convolved") {
    return gauss_hermite_convolved_sampler(c.nodes, mixture_delta(c));
  }
  throw std::invalid_argument("unknown sampler family '" + c.family + "'");
}

Eigen::VectorXd spike_direction(const ExperimentConfig& c) {
  if (c.direction.size() > 0) return c.direction;
  // Haar direction keeps the instance free of accidental axis alignment
  // while staying a pure function of the seed.
  return random_frame(c.d, 1, derive_seed(c.seed, 101)).rows.row(0);
}

SpikedPairSpec build_spiked(const ExperimentConfig& c) {
  const Eigen::VectorXd u = spike_direction(c);
  if (c.family == "spiked_gaussian") {
    return spiked_gaussian_spec(c.d, u, c.beta);
  }
  if (c.family == "hard_instance") {
    return hard_instance_spec(c.d, u, c.nodes, mixture_delta(c));
  }
  throw std::invalid_argument("unknown spiked family '" + c.family + "'");
}

// (E |g|^p)^{1/p} for a standard gaussian g.
double gaussian_abs_moment_root(double p) {
  return std::pow(
      std::exp2(p / 2.0) * std::tgamma((p + 1.0) / 2.0) / std::sqrt(M_PI),
      1.0 / p);
}

// Population distance between the two marginals of a spiked generator.
double spiked_truth(const ExperimentConfig& c) {
  if (c.family == "spiked_gaussian") {
    return (std::sqrt(1.0 + c.beta) - 1.0) * gaussian_abs_moment_root(c.p);
  }
  // Mixture against the standard gaussian: exact quantile integral, p = 1.
  const ConvolvedLaw law = hard_distribution_A(c.nodes, mixture_delta(c));
  return quantile_w1(convolved_cdf(law), gaussian_cdf(0.0, 1.0)).value;
}

// ------------------------------------------------------------- validation

void validate_config(const ExperimentConfig& c) {
  if (!known_kind(c.kind)) {
    throw std::invalid_argument("unknown experiment kind '" + c.kind + "'");
  }
  if (c.threads < 1) {
    throw std::invalid_argument("threads must be >= 1");
  }
  if (c.kind == "solve") {
    if (c.solve_a.empty() || c.solve_b.empty()) {
      throw std::invalid_argument("solve needs both measure paths");
    }
    if (!(c.p >= 1.0)) throw std::invalid_argument("p must be >= 1");
    return;
  }
  if (c.kind == "hardness_suite") {
    if (c.moment_orders.empty() || c.eps_list.empty() || c.nodes_list.empty()) {
      throw std::invalid_argument("hardness lists must be nonempty");
    }
    for (const int order : c.moment_orders) {
      if (order < 1) throw std::invalid_argument("moment orders must be >= 1");
    }
    for (const double eps : c.eps_list) {
      if (!(eps > 0.0) || eps > 1.0 / 6.0 + 1e-15) {
        throw std::invalid_argument("eps values must lie in (0, 1/6]");
      }
    }
    for (const int m : c.nodes_list) {
      if (m < 1 || m > kGaussHermiteMaxNodes) {
        throw std::invalid_argument("mixture sizes must lie in [1, 30]");
      }
    }
    return;
  }

  if (!(c.p >= 1.0)) throw std::invalid_argument("p must be >= 1");
  if (c.n_list.empty()) throw std::invalid_argument("n_list is required");
  for (std::size_t i = 0; i < c.n_list.size(); ++i) {
    if (c.n_list[i] < 1) throw std::invalid_argument("sample sizes must be >= 1");
    if (i > 0 && c.n_list[i] <= c.n_list[i - 1]) {
      throw std::invalid_argument("n_list must be strictly increasing");
    }
  }
  if (c.replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  if (c.kind == "concentration" && c.replicates < 200) {
    throw std::invalid_argument(
        "concentration needs at least 200 replicates per n");
  }
  if (sampler_kind(c.kind)) {
    build_sampler(c);  // throws on inconsistent generator parameters
    return;
  }
  if (c.k != 1) {
    throw std::invalid_argument("spiked generators support k = 1 only");
  }
  if (c.family == "hard_instance" && c.kind == "rates_wpp" && c.p != 1.0) {
    throw std::invalid_argument(
        "hard_instance rates need p = 1 (no closed-form truth otherwise)");
  }
  build_spiked(c);
}

// --------------------------------------------------------- canonical echo

std::string render_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string render_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += formatted(v[i]);
  }
  return out;
}

std::string render_matrix(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) out += " | ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      out += formatted(m(i, j));
    }
  }
  return out;
}

std::string render_config(const ExperimentConfig& c) {
  std::string out = "# canonical experiment configuration\n";
  out += "kind = " + c.kind + "\n";
  const bool uses_generator = sampler_kind(c.kind) || spiked_kind(c.kind);
  if (uses_generator) {
    out += "\n[generator]\nfamily = " + c.family + "\n";
    if (c.family == "atomic" || c.family == "two_point") {
      out += "atoms = " + render_matrix(c.atoms) + "\n";
      out += "weights = " +
             render_matrix(c.atom_weights.transpose()) + "\n";
    } else if (c.family == "gauss_hermite_convolved" ||
               c.family == "hard_instance") {
      if (c.family == "hard_instance") out += "dim = " + std::to_string(c.d) + "\n";
      out += "nodes = " + std::to_string(c.nodes) + "\n";
      if (c.noise_delta >= 0.0) out += "delta = " + formatted(c.noise_delta) + "\n";
    } else {
      out += "dim = " + std::to_string(c.d) + "\n";
      if (c.family == "uniform_cube") out += "side = " + formatted(c.side) + "\n";
      if (c.family == "spiked_gaussian") out += "beta = " + formatted(c.beta) + "\n";
    }
    if (spiked_kind(c.kind) && c.direction.size() > 0) {
      out += "direction = " + render_matrix(c.direction.transpose()) + "\n";
    }
  }
  out += "\n[run]\n";
  if (c.kind != "hardness_suite") out += "p = " + formatted(c.p) + "\n";
  if (spiked_kind(c.kind)) out += "k = " + std::to_string(c.k) + "\n";
  if (c.kind != "hardness_suite" && c.kind != "solve") {
    out += "n_list = " + render_list(c.n_list) + "\n";
    out += "replicates = " + std::to_string(c.replicates) + "\n";
  }
  out += "seed = " + std::to_string(c.seed) + "\n";
  out += "threads = " + std::to_string(c.threads) + "\n";
  if (!c.out_dir.empty()) out += "out = " + c.out_dir + "\n";
  if (spiked_kind(c.kind)) {
    out += "\n[wpp]\n";
    out += "restarts = " + std::to_string(c.wpp.restarts) + "\n";
    out += "max_iters = " + std::to_string(c.wpp.max_iters) + "\n";
    out += "step_init = " + formatted(c.wpp.step_init) + "\n";
    out += "step_decay = " + formatted(c.wpp.step_decay) + "\n";
    out += "tol = " + formatted(c.wpp.tol) + "\n";
    if (c.wpp.net_fallback) {
      out += "net_fallback = " + formatted(*c.wpp.net_fallback) + "\n";
    }
  }
  if (c.kind == "solve") {
    out += "\n[solve]\na = " + c.solve_a + "\nb = " + c.solve_b + "\n";
  }
  if (c.kind == "hardness_suite") {
    out += "\n[hardness]\n";
    out += "moment_orders = " + render_list(c.moment_orders) + "\n";
    out += "eps_list = " + render_list(c.eps_list) + "\n";
    out += "nodes_list = " + render_list(c.nodes_list) + "\n";
  }
  return out;
}

// ------------------------------------------------------------- file plumbing

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot move " + tmp + " into place");
  }
}

class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(dir + "/lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      throw std::runtime_error(
          "output directory is locked by another run (stale? remove " +
          path_ + ")");
    }
    std::fputs("running\n", f);
    std::fclose(f);
  }
  ~DirLock() { std::remove(path_.c_str()); }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
};

// ---------------------------------------------------------------- runners

struct KindOutput {
  std::string rows_csv;
  json summary;
  int total_rows = 0;
  int flagged_rows = 0;
};

double mean_of(const std::vector<double>& v) {
  KahanAccumulator acc;
  for (const double x : v) acc.add(x);
  return acc.value() / static_cast<double>(v.size());
}

json fit_to_json(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3) return nullptr;
  try {
    const RateFit fit = rate_fit(pairs);
    json j;
    j["slope"] = fit.slope;
    j["intercept"] = fit.intercept;
    j["slope_stderr"] = fit.slope_stderr;
    return j;
  } catch (const std::exception&) {
    return nullptr;  // degenerate means (zeros); fit reported as absent
  }
}

double pair_distance(const DiscreteMeasure& a, const DiscreteMeasure& b,
                     double p) {
  if (a.points.cols() == 1) return wasserstein_1d_cost(a, b, p);
  return wasserstein_discrete_cost(a, b, p);
}

KindOutput run_rates_plugin(const ExperimentConfig& c) {
  const Sampler gen = build_sampler(c);
  KindOutput out;
  out.rows_csv = "n,replicate,seed,value,flag\n";
  json per_n = json::array();
  std::vector<std::pair<double, double>> fit_pairs;
  for (std::size_t idx = 0; idx < c.n_list.size(); ++idx) {
    const int n = c.n_list[idx];
    std::vector<double> values;
    for (int r = 0; r < c.replicates; ++r) {
      const std::uint64_t row_seed =
          derive_seed(derive_seed(c.seed, idx), static_cast<std::uint64_t>(r));
      double value = std::numeric_limits<double>::quiet_NaN();
      int flag = 1;
      try {
        const DiscreteMeasure mu = empirical(gen, n, derive_seed(row_seed, 0));
        const DiscreteMeasure nu = empirical(gen, n, derive_seed(row_seed, 1));
        value = pair_distance(mu, nu, c.p);
        values.push_back(value);
        flag = 0;
      } catch (const std::exception&) {
        ++out.flagged_rows;
      }
      out.rows_csv += std::to_string(n) + ',' + std::to_string(r) + ',' +
                      std::to_string(row_seed) + ',' + formatted(value) + ',' +
                      std::to_string(flag) + '\n';
      ++out.total_rows;
    }
    json entry;
    entry["n"] = n;
    entry["mean"] = values.empty() ? json(nullptr) : json(mean_of(values));
    if (values.size() >= 100) {
      ReplicateSample sample;
      sample.values = values;
      sample.n = n;
      entry["sigma_sq_hat"] = estimate_subgaussian_constant(sample);
    } else {
      entry["sigma_sq_hat"] = nullptr;
    }
    per_n.push_back(entry);
    if (!values.empty()) fit_pairs.emplace_back(n, mean_of(values));
  }
  out.summary["per_n"] = per_n;
  out.summary["rate_fit"] = fit_to_json(fit_pairs);
  return out;
}

KindOutput run_rates_wpp(const ExperimentConfig& c) {
  const SpikedPairSpec spec = build_spiked(c);
  const double truth = spiked_truth(c);
  KindOutput out;
  out.rows_csv = "n,replicate,seed,wpp_value,plugin_value,flag\n";
  json per_n = json::array();
  std::vector<std::pair<double, double>> wpp_pairs;
  std::vector<std::pair<double, double>> plugin_pairs;
  for (std::size_t idx = 0; idx < c.n_list.size(); ++idx) {
    const int n = c.n_list[idx];
    std::vector<double> wpp_err;
    std::vector<double> plugin_err;
    for (int r = 0; r < c.replicates; ++r) {
      const std::uint64_t row_seed =
          derive_seed(derive_seed(c.seed, idx), static_cast<std::uint64_t>(r));
      double wpp_value = std::numeric_limits<double>::quiet_NaN();
      double plugin_value = std::numeric_limits<double>::quiet_NaN();
      int flag = 1;
      try {
        const auto [mu, nu] = sample_spiked_pair(spec, n, row_seed);
        WppOptions opts = c.wpp;
        opts.seed = derive_seed(row_seed, 4);
        wpp_value = wpp_estimate(mu, nu, c.p, c.k, opts).value;
        plugin_value = wasserstein_discrete_cost(mu, nu, c.p);
        wpp_err.push_back(std::abs(wpp_value - truth));
        plugin_err.push_back(std::abs(plugin_value - truth));
        flag = 0;
      } catch (const std::exception&) {
        ++out.flagged_rows;
      }
      out.rows_csv += std::to_string(n) + ',' + std::to_string(r) + ',' +
                      std::to_string(row_seed) + ',' + formatted(wpp_value) +
                      ',' + formatted(plugin_value) + ',' +
                      std::to_string(flag) + '\n';
      ++out.total_rows;
    }
    json entry;
    entry["n"] = n;
    entry["wpp_mean_err"] =
        wpp_err.empty() ? json(nullptr) : json(mean_of(wpp_err));
    entry["plugin_mean_err"] =
        plugin_err.empty() ? json(nullptr) : json(mean_of(plugin_err));
    per_n.push_back(entry);
    if (!wpp_err.empty()) wpp_pairs.emplace_back(n, mean_of(wpp_err));
    if (!plugin_err.empty()) plugin_pairs.emplace_back(n, mean_of(plugin_err));
  }
  out.summary["truth"] = truth;
  out.summary["per_n"] = per_n;
  out.summary["wpp_rate_fit"] = fit_to_json(wpp_pairs);
  out.summary["plugin_rate_fit"] = fit_to_json(plugin_pairs);
  return out;
}

KindOutput run_spike_recovery(const ExperimentConfig& c) {
  const SpikedPairSpec spec = build_spiked(c);
  KindOutput out;
  out.rows_csv = "n,replicate,seed,sin_sq,flag\n";
  json per_n = json::array();
  for (std::size_t idx = 0; idx < c.n_list.size(); ++idx) {
    const int n = c.n_list[idx];
    std::vector<double> angles;
    for (int r = 0; r < c.replicates; ++r) {
      const std::uint64_t row_seed =
          derive_seed(derive_seed(c.seed, idx), static_cast<std::uint64_t>(r));
      double sin_sq = std::numeric_limits<double>::quiet_NaN();
      int flag = 1;
      try {
        const auto [mu, nu] = sample_spiked_pair(spec, n, row_seed);
        WppOptions opts = c.wpp;
        opts.seed = derive_seed(row_seed, 4);
        const StiefelFrame rec = recover_spike(mu, nu, c.p, c.k, opts);
        sin_sq = sin_squared_angle(rec, spec.spike_frame);
        angles.push_back(sin_sq);
        flag = 0;
      } catch (const std::exception&) {
        ++out.flagged_rows;
      }
      out.rows_csv += std::to_string(n) + ',' + std::to_string(r) + ',' +
                      std::to_string(row_seed) + ',' + formatted(sin_sq) +
                      ',' + std::to_string(flag) + '\n';
      ++out.total_rows;
    }
    json entry;
    entry["n"] = n;
    entry["mean_sin_sq"] =
        angles.empty() ? json(nullptr) : json(mean_of(angles));
    per_n.push_back(entry);
  }
  out.summary["per_n"] = per_n;
  return out;
}

KindOutput run_concentration(const ExperimentConfig& c) {
  // Mirrors subgaussian_scaling_check's seed layout so the emitted rows
  // are exactly the replicates behind each reported constant.
  const Sampler gen = build_sampler(c);
  DiscreteMeasure exact_ref;
  const bool have_exact = gen.family == Sampler::Family::kAtomic ||
                          gen.family == Sampler::Family::kTwoPoint;
  if (have_exact) {
    exact_ref.points = gen.atoms;
    exact_ref.weights = gen.weights;
  }
  KindOutput out;
  out.rows_csv = "n,replicate,seed,value,flag\n";
  json per_n = json::array();
  std::vector<double> n_sigma;
  for (std::size_t idx = 0; idx < c.n_list.size(); ++idx) {
    const int n = c.n_list[idx];
    const std::uint64_t n_seed = derive_seed(c.seed, idx);
    const DiscreteMeasure ref =
        have_exact ? exact_ref
                   : empirical(gen, 20 * n, derive_seed(n_seed, 0));
    std::vector<double> values;
    for (int r = 0; r < c.replicates; ++r) {
      const std::uint64_t row_seed =
          derive_seed(n_seed, static_cast<std::uint64_t>(1 + r));
      double value = std::numeric_limits<double>::quiet_NaN();
      int flag = 1;
      try {
        const DiscreteMeasure mu = empirical(gen, n, row_seed);
        value = pair_distance(mu, ref, c.p);
        values.push_back(value);
        flag = 0;
      } catch (const std::exception&) {
        ++out.flagged_rows;
      }
      out.rows_csv += std::to_string(n) + ',' + std::to_string(r) + ',' +
                      std::to_string(row_seed) + ',' + formatted(value) + ',' +
                      std::to_string(flag) + '\n';
      ++out.total_rows;
    }
    json entry;
    entry["n"] = n;
    entry["exact_reference"] = have_exact;
    if (values.size() >= 100) {
      ReplicateSample sample;
      sample.values = values;
      sample.n = n;
      const double sigma_sq = estimate_subgaussian_constant(sample);
      entry["sigma_sq_hat"] = sigma_sq;
      entry["n_sigma_sq"] = n * sigma_sq;
      n_sigma.push_back(n * sigma_sq);
    } else {
      entry["sigma_sq_hat"] = nullptr;
      entry["n_sigma_sq"] = nullptr;
    }
    per_n.push_back(entry);
  }
  out.summary["per_n"] = per_n;
  if (!n_sigma.empty()) {
    const auto [lo, hi] = std::minmax_element(n_sigma.begin(), n_sigma.end());
    out.summary["n_sigma_sq_spread"] = *lo > 0.0 ? json(*hi / *lo) : json(nullptr);
  } else {
    out.summary["n_sigma_sq_spread"] = nullptr;
  }
  return out;
}

KindOutput run_hardness_suite(const ExperimentConfig& c) {
  KindOutput out;
  out.rows_csv = "section,moment_order,eps,m,name,value,flag\n";
  auto row = [&out](const std::string& section, const std::string& order,
                    const std::string& eps, const std::string& m,
                    const std::string& name, double value, int flag) {
    out.rows_csv += section + ',' + order + ',' + eps + ',' + m + ',' + name +
                    ',' + formatted(value) + ',' + std::to_string(flag) + '\n';
    ++out.total_rows;
  };

  json extremal = json::array();
  json priors = json::array();
  for (const int order : c.moment_orders) {
    const std::string ls = std::to_string(order);
    ExtremalPair pair;
    bool have_pair = false;
    try {
      pair = extremal_pair_lp(order);
      have_pair = true;
      row("extremal", ls, "", "", "objective", pair.objective, 0);
    } catch (const std::exception&) {
      ++out.flagged_rows;
      row("extremal", ls, "", "", "objective",
          std::numeric_limits<double>::quiet_NaN(), 1);
    }
    json ej;
    ej["moment_order"] = order;
    ej["objective"] = have_pair ? json(pair.objective) : json(nullptr);
    ej["gap_reached"] = have_pair && pair.objective >= 0.5;
    ej["warning"] = have_pair ? pair.warning : "construction failed";
    extremal.push_back(ej);

    for (const double eps : c.eps_list) {
      const std::string es = formatted(eps);
      json pj;
      pj["moment_order"] = order;
      pj["eps"] = eps;
      if (!have_pair || pair.objective < 0.5) {
        pj["built"] = false;
        pj["achieved_objective"] = have_pair ? json(pair.objective) : json(nullptr);
        priors.push_back(pj);
        row("priors", ls, es, "", "skipped_gap_below_half",
            have_pair ? pair.objective : std::numeric_limits<double>::quiet_NaN(),
            0);
        continue;
      }
      try {
        const PriorPair built =
            build_priors(pair.x, pair.x_prime, eps, order);
        const auto mean = [](const AtomicLaw& law) {
          return law_moments(law, 1)[1];
        };
        const auto mean_inv = [](const AtomicLaw& law) {
          KahanAccumulator acc;
          for (Eigen::Index i = 0; i < law.atoms.size(); ++i) {
            acc.add(law.weights[i] / law.atoms[i]);
          }
          return acc.value();
        };
        const double ey = mean(built.y);
        const double eyp = mean(built.y_prime);
        const double iy = mean_inv(built.y);
        const double iyp = mean_inv(built.y_prime);
        const double support_max =
            std::max(built.y.atoms.maxCoeff(), built.y_prime.atoms.maxCoeff());
        pj["built"] = true;
        pj["mean_y"] = ey;
        pj["mean_y_prime"] = eyp;
        pj["mean_inv_y"] = iy;
        pj["mean_inv_y_prime"] = iyp;
        pj["support_max"] = support_max;
        pj["z_eps"] = built.z_eps;
        pj["delta_eps"] = built.delta_eps;
        pj["delta_eps_prime"] = built.delta_eps_prime;
        row("priors", ls, es, "", "mean_y", ey, 0);
        row("priors", ls, es, "", "mean_y_prime", eyp, 0);
        row("priors", ls, es, "", "mean_inv_y", iy, 0);
        row("priors", ls, es, "", "mean_inv_y_prime", iyp, 0);
        row("priors", ls, es, "", "support_max", support_max, 0);
        row("priors", ls, es, "", "z_eps", built.z_eps, 0);
      } catch (const std::exception&) {
        ++out.flagged_rows;
        pj["built"] = false;
        pj["achieved_objective"] = pair.objective;
        row("priors", ls, es, "", "construction_failed",
            std::numeric_limits<double>::quiet_NaN(), 1);
      }
      priors.push_back(pj);
    }
  }

  json mixtures = json::array();
  for (const int m : c.nodes_list) {
    const std::string ms = std::to_string(m);
    json mj;
    mj["m"] = m;
    try {
      const ConvolvedLaw law = hard_distribution_A(m);
      const int order = 2 * m - 1;
      const Eigen::VectorXd target = gaussian_moments(order, 1.0);
      const Eigen::VectorXd achieved = law_moments(law, order);
      double rel = 0.0;
      double abs_zero = 0.0;
      for (int j = 0; j <= order; ++j) {
        if (target[j] == 0.0) {
          abs_zero = std::max(abs_zero, std::abs(achieved[j]));
        } else {
          rel = std::max(rel,
                         std::abs(achieved[j] - target[j]) /
                             std::abs(target[j]));
        }
      }
      const double w1 =
          quantile_w1(convolved_cdf(law), gaussian_cdf(0.0, 1.0)).value;
      mj["max_rel_moment_dev"] = rel;
      mj["max_abs_dev_at_zero_targets"] = abs_zero;
      mj["w1_gap"] = w1;
      mj["m_w1_sq"] = m * w1 * w1;
      row("distribution_a", "", "", ms, "max_rel_moment_dev", rel, 0);
      row("distribution_a", "", "", ms, "max_abs_dev_at_zero_targets",
          abs_zero, 0);
      row("distribution_a", "", "", ms, "w1_gap", w1, 0);
      row("distribution_a", "", "", ms, "m_w1_sq", m * w1 * w1, 0);
    } catch (const std::exception&) {
      ++out.flagged_rows;
      mj["failed"] = true;
      row("distribution_a", "", "", ms, "construction_failed",
          std::numeric_limits<double>::quiet_NaN(), 1);
    }
    mixtures.push_back(mj);
  }

  out.summary["extremal_pairs"] = extremal;
  out.summary["priors"] = priors;
  out.summary["distribution_a"] = mixtures;
  return out;
}

KindOutput run_solve(const ExperimentConfig& c) {
  const DiscreteMeasure mu = read_measure(c.solve_a);
  const DiscreteMeasure nu = read_measure(c.solve_b);
  const TransportResult res = wasserstein_discrete(mu, nu, c.p);
  KindOutput out;
  out.rows_csv = "i,j,mass\n";
  for (const CouplingEntry& e : res.coupling.entries) {
    out.rows_csv += std::to_string(e.i) + ',' + std::to_string(e.j) + ',' +
                    formatted(e.mass) + '\n';
    ++out.total_rows;
  }
  out.summary["cost"] = res.cost;
  out.summary["p"] = c.p;
  out.summary["rows"] = static_cast<int>(mu.points.rows());
  out.summary["cols"] = static_cast<int>(nu.points.rows());
  out.summary["pivots"] = res.pivots;
  out.summary["dual_violation"] = res.dual_violation;
  return out;
}

KindOutput dispatch(const ExperimentConfig& c) {
  if (c.kind == "rates_plugin") return run_rates_plugin(c);
  if (c.kind == "rates_wpp") return run_rates_wpp(c);
  if (c.kind == "spike_recovery") return run_spike_recovery(c);
  if (c.kind == "concentration") return run_concentration(c);
  if (c.kind == "hardness_suite") return run_hardness_suite(c);
  return run_solve(c);
}

}  // namespace

// ------------------------------------------------------------- public API

ExperimentConfig parse_experiment_config_text(const std::string& text,
                                              const std::string& path_label) {
  Reader reader(parse_raw(text, path_label));
  ExperimentConfig c;
  c.config_path = path_label;
  c.kind = reader.require("", "kind");
  if (!known_kind(c.kind)) {
    throw reader.at("", "kind", "unknown experiment kind '" + c.kind + "'");
  }

  const bool uses_generator = sampler_kind(c.kind) || spiked_kind(c.kind);
  if (uses_generator) {
    reader.mark_section("generator");
    c.family = reader.require("generator", "family");
    const auto& allowed = sampler_kind(c.kind)
                              ? std::vector<std::string>(
                                    std::begin(kSamplerFamilies),
                                    std::end(kSamplerFamilies))
                              : std::vector<std::string>(
                                    std::begin(kSpikedFamilies),
                                    std::end(kSpikedFamilies));
    if (std::find(allowed.begin(), allowed.end(), c.family) == allowed.end()) {
      std::string names;
      for (const std::string& a : allowed) names += (names.empty() ? "" : ", ") + a;
      throw reader.at("generator", "family",
                      "family '" + c.family + "' not usable by kind '" +
                          c.kind + "' (expected one of: " + names + ")");
    }
    if (auto v = reader.optional_text("generator", "dim")) {
      c.d = static_cast<int>(reader.to_int("generator", "dim", *v));
      if (c.d < 1) throw reader.at("generator", "dim", "dim must be >= 1");
    }
    if (auto v = reader.optional_text("generator", "side")) {
      c.side = reader.to_double("generator", "side", *v);
      if (!(c.side > 0.0)) {
        throw reader.at("generator", "side", "side must be positive");
      }
    }
    if (auto v = reader.optional_text("generator", "beta")) {
      c.beta = reader.to_double("generator", "beta", *v);
      if (!(c.beta >= 0.0)) {
        throw reader.at("generator", "beta", "beta must be >= 0");
      }
    }
    if (auto v = reader.optional_text("generator", "nodes")) {
      c.nodes = static_cast<int>(reader.to_int("generator", "nodes", *v));
      if (c.nodes < 1 || c.nodes > kGaussHermiteMaxNodes) {
        throw reader.at("generator", "nodes", "nodes must lie in [1, 30]");
      }
    }
    if (auto v = reader.optional_text("generator", "delta")) {
      c.noise_delta = reader.to_double("generator", "delta", *v);
      if (!(c.noise_delta > 0.0)) {
        throw reader.at("generator", "delta", "delta must be positive");
      }
    }
    if (auto v = reader.optional_text("generator", "atoms")) {
      c.atoms = reader.to_matrix("generator", "atoms", *v);
    }
    if (auto v = reader.optional_text("generator", "weights")) {
      const std::vector<double> w =
          reader.to_double_list("generator", "weights", *v);
      c.atom_weights =
          Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
    }
    if ((c.family == "atomic" || c.family == "two_point") &&
        (c.atoms.size() == 0 || c.atom_weights.size() == 0)) {
      throw ConfigError(reader.path(), 0,
                        "family '" + c.family +
                            "' needs 'atoms' and 'weights' in [generator]");
    }
    if (c.family == "atomic" || c.family == "two_point") {
      c.d = static_cast<int>(c.atoms.cols());
    }
    if (c.family == "gauss_hermite_convolved") c.d = 1;
    if (auto v = reader.optional_text("generator", "direction")) {
      const std::vector<double> dir =
          reader.to_double_list("generator", "direction", *v);
      c.direction = Eigen::Map<const Eigen::VectorXd>(dir.data(), dir.size());
      if (!spiked_kind(c.kind)) {
        throw reader.at("generator", "direction",
                        "direction only applies to spiked generators");
      }
      if (c.direction.size() != c.d) {
        throw reader.at("generator", "direction",
                        "direction length must equal dim");
      }
      const double norm = c.direction.norm();
      if (!(norm > 0.0)) {
        throw reader.at("generator", "direction", "direction must be nonzero");
      }
      c.direction /= norm;
    }
  }

  reader.mark_section("run");
  if (c.kind != "hardness_suite") {
    c.p = reader.to_double("run", "p", reader.require("run", "p"));
    if (!(c.p >= 1.0)) throw reader.at("run", "p", "p must be >= 1");
  }
  if (spiked_kind(c.kind)) {
    if (auto v = reader.optional_text("run", "k")) {
      c.k = static_cast<int>(reader.to_int("run", "k", *v));
      if (c.k != 1) {
        throw reader.at("run", "k", "spiked generators support k = 1 only");
      }
    }
  }
  if (c.kind != "hardness_suite" && c.kind != "solve") {
    c.n_list = reader.to_int_list("run", "n_list",
                                  reader.require("run", "n_list"));
    for (std::size_t i = 0; i < c.n_list.size(); ++i) {
      if (c.n_list[i] < 1) {
        throw reader.at("run", "n_list", "sample sizes must be >= 1");
      }
      if (i > 0 && c.n_list[i] <= c.n_list[i - 1]) {
        throw reader.at("run", "n_list", "n_list must be strictly increasing");
      }
    }
    c.replicates = static_cast<int>(
        reader.to_int("run", "replicates", reader.require("run", "replicates")));
    if (c.replicates < 1) {
      throw reader.at("run", "replicates", "replicates must be >= 1");
    }
    if (c.kind == "concentration" && c.replicates < 200) {
      throw reader.at("run", "replicates",
                      "concentration needs at least 200 replicates per n");
    }
  }
  if (auto v = reader.optional_text("run", "seed")) {
    c.seed = reader.to_u64("run", "seed", *v);
  }
  if (auto v = reader.optional_text("run", "threads")) {
    c.threads = static_cast<int>(reader.to_int("run", "threads", *v));
    if (c.threads < 1) {
      throw reader.at("run", "threads", "threads must be >= 1");
    }
  }
  if (auto v = reader.optional_text("run", "out")) c.out_dir = *v;

  if (spiked_kind(c.kind)) {
    reader.mark_section("wpp");
    if (auto v = reader.optional_text("wpp", "restarts")) {
      c.wpp.restarts = static_cast<int>(reader.to_int("wpp", "restarts", *v));
    }
    if (auto v = reader.optional_text("wpp", "max_iters")) {
      c.wpp.max_iters = static_cast<int>(reader.to_int("wpp", "max_iters", *v));
    }
    if (auto v = reader.optional_text("wpp", "step_init")) {
      c.wpp.step_init = reader.to_double("wpp", "step_init", *v);
    }
    if (auto v = reader.optional_text("wpp", "step_decay")) {
      c.wpp.step_decay = reader.to_double("wpp", "step_decay", *v);
    }
    if (auto v = reader.optional_text("wpp", "tol")) {
      c.wpp.tol = reader.to_double("wpp", "tol", *v);
    }
    if (auto v = reader.optional_text("wpp", "net_fallback")) {
      c.wpp.net_fallback = reader.to_double("wpp", "net_fallback", *v);
    }
    try {
      validate_wpp_options(c.wpp);
    } catch (const std::exception& e) {
      throw ConfigError(reader.path(), 0, e.what());
    }
  }

  if (c.kind == "solve") {
    reader.mark_section("solve");
    c.solve_a = reader.require("solve", "a");
    c.solve_b = reader.require("solve", "b");
  }

  if (c.kind == "hardness_suite") {
    reader.mark_section("hardness");
    if (auto v = reader.optional_text("hardness", "moment_orders")) {
      c.moment_orders = reader.to_int_list("hardness", "moment_orders", *v);
      for (const int order : c.moment_orders) {
        if (order < 1) {
          throw reader.at("hardness", "moment_orders",
                          "moment orders must be >= 1");
        }
      }
    }
    if (auto v = reader.optional_text("hardness", "eps_list")) {
      c.eps_list = reader.to_double_list("hardness", "eps_list", *v);
      for (const double eps : c.eps_list) {
        if (!(eps > 0.0) || eps > 1.0 / 6.0 + 1e-15) {
          throw reader.at("hardness", "eps_list",
                          "eps values must lie in (0, 1/6]");
        }
      }
    }
    if (auto v = reader.optional_text("hardness", "nodes_list")) {
      c.nodes_list = reader.to_int_list("hardness", "nodes_list", *v);
      for (const int m : c.nodes_list) {
        if (m < 1 || m > kGaussHermiteMaxNodes) {
          throw reader.at("hardness", "nodes_list",
                          "mixture sizes must lie in [1, 30]");
        }
      }
    }
  }

  reader.finish(c.kind);
  try {
    validate_config(c);
  } catch (const std::exception& e) {
    throw ConfigError(reader.path(), 0, e.what());
  }
  c.echo_text = render_config(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config_text(buffer.str(), path);
}

void apply_overrides(ExperimentConfig& config,
                     const std::optional<std::uint64_t>& seed,
                     const std::optional<std::string>& out_dir,
                     const std::optional<int>& threads) {
  if (seed) config.seed = *seed;
  if (out_dir) config.out_dir = *out_dir;
  if (threads) {
    if (*threads < 1) throw std::invalid_argument("threads must be >= 1");
    config.threads = *threads;
  }
  config.echo_text = render_config(config);
}

std::string describe(const ExperimentConfig& config) {
  validate_config(config);
  std::string plan = "experiment: " + config.kind + "\n";
  if (!config.config_path.empty()) {
    plan += "config: " + config.config_path + "\n";
  }
  if (sampler_kind(config.kind) || spiked_kind(config.kind)) {
    plan += "generator: " + config.family + " (dim " + std::to_string(config.d);
    if (config.family == "uniform_cube") {
      plan += ", side " + formatted(config.side);
    }
    if (config.family == "spiked_gaussian") {
      plan += ", beta " + formatted(config.beta);
    }
    if (config.family == "gauss_hermite_convolved" ||
        config.family == "hard_instance") {
      plan += ", nodes " + std::to_string(config.nodes) + ", delta " +
              formatted(mixture_delta(config));
    }
    plan += ")\n";
  }
  if (config.kind != "hardness_suite") {
    plan += "p = " + formatted(config.p);
    if (spiked_kind(config.kind)) plan += ", k = " + std::to_string(config.k);
    plan += "\n";
  }
  if (config.kind == "solve") {
    plan += "inputs: " + config.solve_a + " vs " + config.solve_b + "\n";
  } else if (config.kind == "hardness_suite") {
    plan += "moment orders: " + render_list(config.moment_orders) + "\n";
    plan += "eps values: " + render_list(config.eps_list) + "\n";
    plan += "mixture sizes: " + render_list(config.nodes_list) + "\n";
  } else {
    plan += "n_list: " + render_list(config.n_list) + "\n";
    plan += "replicates per n: " + std::to_string(config.replicates) +
            " (total rows " +
            std::to_string(config.replicates *
                           static_cast<int>(config.n_list.size())) +
            ")\n";
  }
  plan += "seed = " + std::to_string(config.seed) + ", threads = " +
          std::to_string(config.threads) + "\n";
  plan += "output: " +
          (config.out_dir.empty() ? std::string("(not set)") : config.out_dir) +
          " (config.ini, rows.csv, summary.json)\n";
  plan += "dry run: no files were written\n";
  return plan;
}

ExperimentReport run(const ExperimentConfig& config) {
  validate_config(config);
  if (config.out_dir.empty()) {
    throw std::invalid_argument(
        "output directory required (set out in [run] or pass --out)");
  }
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(config.out_dir);
  DirLock lock(config.out_dir);

  const std::string echo =
      config.echo_text.empty() ? render_config(config) : config.echo_text;
  write_atomic(config.out_dir + "/config.ini", echo);

  KindOutput result = dispatch(config);

  json summary;
  summary["kind"] = config.kind;
  summary["version"] = kVersion;
  summary["seed"] = config.seed;
  if (config.kind != "hardness_suite") summary["p"] = config.p;
  if (spiked_kind(config.kind)) {
    summary["k"] = config.k;
    summary["d"] = config.d;
  }
  summary["total_rows"] = result.total_rows;
  summary["flagged_rows"] = result.flagged_rows;
  for (auto& [key, value] : result.summary.items()) summary[key] = value;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  summary["wall_seconds"] = wall;

  ExperimentReport report;
  report.kind = config.kind;
  report.out_dir = config.out_dir;
  report.rows_csv = std::move(result.rows_csv);
  report.summary_json = summary.dump(2) + "\n";
  report.wall_seconds = wall;
  report.total_rows = result.total_rows;
  report.flagged_rows = result.flagged_rows;

  write_atomic(config.out_dir + "/rows.csv", report.rows_csv);
  write_atomic(config.out_dir + "/summary.json", report.summary_json);
  return report;
}

}  // namespace spt
