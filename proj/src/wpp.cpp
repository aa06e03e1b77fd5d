#include "spt/wpp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "spt/rng.hpp"

namespace spt {
namespace {

using json = nlohmann::ordered_json;

// Cost-only objective for line searches; k = 1 avoids materializing
// couplings entirely.
double projected_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                      const StiefelFrame& frame, double p) {
  const DiscreteMeasure mu_p = project_measure(mu, frame);
  const DiscreteMeasure nu_p = project_measure(nu, frame);
  if (frame.k() == 1) return wasserstein_1d_cost(mu_p, nu_p, p);
  return wasserstein_discrete_cost(mu_p, nu_p, p);
}

StiefelFrame identity_frame(int d) {
  StiefelFrame frame;
  frame.rows = Eigen::MatrixXd::Identity(d, d);
  return frame;
}

json frame_rows_to_json(const StiefelFrame& frame) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < frame.k(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < frame.d(); ++j) row.push_back(frame.rows(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void validate_wpp_options(const WppOptions& opts) {
  if (opts.restarts < 1) {
    throw std::invalid_argument("wpp options: restarts must be >= 1");
  }
  if (opts.max_iters < 1) {
    throw std::invalid_argument("wpp options: max_iters must be >= 1");
  }
  if (!(opts.step_init > 0.0) || !std::isfinite(opts.step_init)) {
    throw std::invalid_argument("wpp options: step_init must be positive");
  }
  if (!(opts.step_decay > 0.0) || !(opts.step_decay < 1.0)) {
    throw std::invalid_argument("wpp options: step_decay must lie in (0, 1)");
  }
  if (!(opts.tol > 0.0) || !std::isfinite(opts.tol)) {
    throw std::invalid_argument("wpp options: tol must be positive");
  }
  if (opts.net_fallback && !(*opts.net_fallback > 0.0)) {
    throw std::invalid_argument("wpp options: net_fallback must be positive");
  }
}

DiscreteMeasure project_measure(const DiscreteMeasure& mu,
                                const StiefelFrame& frame) {
  validate_frame(frame);
  if (frame.d() != mu.points.cols()) {
    throw std::invalid_argument(
        "project_measure: frame width must match the measure dimension");
  }
  DiscreteMeasure out;
  out.points = mu.points * frame.rows.transpose();
  out.weights = mu.weights;
  return out;
}

TransportResult projected_wasserstein(const DiscreteMeasure& mu,
                                      const DiscreteMeasure& nu,
                                      const StiefelFrame& frame, double p) {
  const DiscreteMeasure mu_p = project_measure(mu, frame);
  const DiscreteMeasure nu_p = project_measure(nu, frame);
  if (frame.k() == 1) return wasserstein_1d(mu_p, nu_p, p);
  return wasserstein_discrete(mu_p, nu_p, p);
}

WppGradient wpp_supergradient(const DiscreteMeasure& mu,
                              const DiscreteMeasure& nu,
                              const StiefelFrame& frame, double p) {
  const TransportResult res = projected_wasserstein(mu, nu, frame, p);
  WppGradient out;
  out.grad = Eigen::MatrixXd::Zero(frame.k(), frame.d());
  if (!(res.cost > 0.0)) {
    out.degenerate = true;
    return out;
  }
  // d/dU (sum pi ||U d||^p)^{1/p} = cost^{1-p} sum pi ||Ud||^{p-2} (Ud) d^T
  // at fixed coupling pi, skipping pairs with ||Ud|| = 0.
  for (const CouplingEntry& e : res.coupling.entries) {
    if (e.mass <= 0.0) continue;
    const Eigen::VectorXd delta =
        (mu.points.row(e.i) - nu.points.row(e.j)).transpose();
    const Eigen::VectorXd projected = frame.rows * delta;
    const double r = projected.norm();
    if (r <= 0.0) continue;
    out.grad.noalias() +=
        (e.mass * std::pow(r, p - 2.0)) * projected * delta.transpose();
  }
  out.grad *= std::pow(res.cost, 1.0 - p);
  return out;
}

WppResult wpp_estimate(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                       double p, int k, const WppOptions& opts) {
  validate_wpp_options(opts);
  validate_measure(mu);
  validate_measure(nu);
  const int d = static_cast<int>(mu.points.cols());
  if (nu.points.cols() != d) {
    throw std::invalid_argument("wpp_estimate: measure dimensions disagree");
  }
  if (k < 1 || k > d) {
    throw std::invalid_argument("wpp_estimate: need 1 <= k <= d");
  }

  WppResult result;
  if (k == d) {
    // Square frames are isometries: the objective is the same at every
    // frame, so return the exact unprojected distance at the identity.
    result.frame = identity_frame(d);
    result.value = k == 1 ? wasserstein_1d_cost(mu, nu, p)
                          : wasserstein_discrete_cost(mu, nu, p);
    result.per_restart_values = {result.value};
    result.converged_flags = {true};
    return result;
  }

  double best = -1.0;
  StiefelFrame best_frame;
  for (int r = 0; r < opts.restarts; ++r) {
    StiefelFrame u = random_frame(d, k, derive_seed(opts.seed, r));
    double value = projected_cost(mu, nu, u, p);
    bool converged = false;
    for (int it = 0; it < opts.max_iters; ++it) {
      const WppGradient g = wpp_supergradient(mu, nu, u, p);
      if (g.degenerate) {
        converged = true;
        break;
      }
      const Eigen::MatrixXd tangent = project_tangent(u, g.grad);
      const double tnorm = tangent.norm();
      if (tnorm <= 1e-13 * std::max(1.0, g.grad.norm())) {
        converged = true;
        break;
      }
      // Backtracking line search: accept the first step with sufficient
      // increase; a fixed coupling underestimates the true objective, so
      // the accepted gain is a lower bound on the actual gain.
      double step = opts.step_init;
      bool moved = false;
      StiefelFrame next;
      double next_value = value;
      while (step * tnorm > 1e-14) {
        StiefelFrame cand;
        try {
          cand = retract(u, tangent, step);
        } catch (const std::exception&) {
          step *= opts.step_decay;
          continue;
        }
        const double cand_value = projected_cost(mu, nu, cand, p);
        if (cand_value > value + 1e-4 * step * tnorm * tnorm) {
          next = std::move(cand);
          next_value = cand_value;
          moved = true;
          break;
        }
        step *= opts.step_decay;
      }
      if (!moved) {
        converged = true;
        break;
      }
      const double gain = next_value - value;
      u = std::move(next);
      value = next_value;
      if (gain <= opts.tol * value) {
        converged = true;
        break;
      }
    }
    result.per_restart_values.push_back(value);
    result.converged_flags.push_back(converged);
    if (value > best) {
      best = value;
      best_frame = u;
    }
  }

  if (opts.net_fallback && k == 1 && d <= 3) {
    std::vector<StiefelFrame> net;
    bool have_net = true;
    try {
      net = epsilon_net(d, k, *opts.net_fallback);
    } catch (const std::exception&) {
      have_net = false;  // net would exceed its size cap; skip the search
    }
    if (have_net) {
      double net_best = -1.0;
      StiefelFrame net_frame;
      for (const StiefelFrame& f : net) {
        const double v = projected_cost(mu, nu, f, p);
        if (v > net_best) {
          net_best = v;
          net_frame = f;
        }
      }
      result.per_restart_values.push_back(net_best);
      result.converged_flags.push_back(true);
      if (net_best > best) {
        best = net_best;
        best_frame = net_frame;
      }
    }
  }

  result.value = best;
  result.frame = std::move(best_frame);
  return result;
}

StiefelFrame recover_spike(const DiscreteMeasure& mu,
                           const DiscreteMeasure& nu, double p, int k,
                           const WppOptions& opts) {
  return wpp_estimate(mu, nu, p, k, opts).frame;
}

std::string wpp_result_to_json_text(const WppResult& result) {
  json j;
  j["value"] = result.value;
  j["frame"] = frame_rows_to_json(result.frame);
  j["per_restart_values"] = result.per_restart_values;
  j["converged_flags"] = result.converged_flags;
  return j.dump();
}

WppResult wpp_result_from_json_text(const std::string& text) {
  try {
    const json j = json::parse(text);
    WppResult result;
    result.value = j.at("value").get<double>();
    const json& rows = j.at("frame");
    if (!rows.is_array() || rows.empty()) {
      throw std::runtime_error("wpp result: frame must be a nonempty array");
    }
    const std::size_t k = rows.size();
    const std::size_t d = rows.at(0).size();
    result.frame.rows.resize(static_cast<Eigen::Index>(k),
                             static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < k; ++i) {
      if (rows.at(i).size() != d) {
        throw std::runtime_error("wpp result: ragged frame rows");
      }
      for (std::size_t c = 0; c < d; ++c) {
        result.frame.rows(static_cast<Eigen::Index>(i),
                          static_cast<Eigen::Index>(c)) =
            rows.at(i).at(c).get<double>();
      }
    }
    result.per_restart_values =
        j.at("per_restart_values").get<std::vector<double>>();
    result.converged_flags =
        j.at("converged_flags").get<std::vector<bool>>();
    if (result.per_restart_values.size() != result.converged_flags.size()) {
      throw std::runtime_error(
          "wpp result: value and flag lists differ in length");
    }
    return result;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("wpp result: ") + e.what());
  }
}

}  // namespace spt
