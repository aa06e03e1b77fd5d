#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "spt/numeric.hpp"
#include "transport_solvers.hpp"

namespace spt::detail {

namespace {

// Transportation simplex over the complete bipartite graph with a spanning
// tree basis. Nodes 0..n-1 are sources, n..n+m-1 sinks. Arc costs are
// evaluated lazily from the point coordinates (cached when the matrix is
// small enough), so memory stays O(n+m) even for 10^4-point inputs.
//
// Pricing is block search (best candidate within a rolling block). The
// leaving arc on ties follows the cycle traversal order from the apex; a
// pivot-count cap switches to Bland's rule (smallest arc id entering,
// smallest arc id leaving) as a termination guarantee of last resort.
class TransportSimplex {
 public:
  TransportSimplex(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p)
      : n_(static_cast<int>(mu.n())),
        m_(static_cast<int>(nu.n())),
        d_(static_cast<int>(mu.dim())),
        p_(p),
        supply_(mu.weights),
        demand_(nu.weights) {
    copy_points(mu.points, xa_);
    copy_points(nu.points, xb_);
    const std::int64_t arcs = static_cast<std::int64_t>(n_) * m_;
    if (arcs <= (std::int64_t{1} << 24)) {
      cost_cache_.resize(static_cast<size_t>(arcs));
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < m_; ++j)
          cost_cache_[static_cast<size_t>(i) * m_ + j] = compute_cost(i, j);
      cached_ = true;
    }
    double cmax = 0.0;
    // Scale for the entering tolerance: exact max cost when cached, else a
    // bounding-box upper bound.
    if (cached_) {
      for (const double c : cost_cache_) cmax = std::max(cmax, c);
    } else {
      double dia2 = 0.0;
      for (int k = 0; k < d_; ++k) {
        double lo = xa_[static_cast<size_t>(k)], hi = lo;
        for (int i = 0; i < n_; ++i) {
          const double x = xa_[static_cast<size_t>(i) * d_ + k];
          lo = std::min(lo, x);
          hi = std::max(hi, x);
        }
        for (int j = 0; j < m_; ++j) {
          const double x = xb_[static_cast<size_t>(j) * d_ + k];
          lo = std::min(lo, x);
          hi = std::max(hi, x);
        }
        dia2 += (hi - lo) * (hi - lo);
      }
      cmax = pow_dist(std::sqrt(dia2), p_);
    }
    eps_enter_ = 1e-11 * (1.0 + cmax);
    block_size_ =
        std::max<std::int64_t>(256, static_cast<std::int64_t>(std::sqrt(static_cast<double>(arcs))));
  }

  TransportResult solve() {
    build_initial_basis();
    const std::int64_t soft_limit = 200LL * (n_ + m_) + 20000;
    const std::int64_t refresh_every = 50000;
    std::int64_t entering;
    while ((entering = bland_ ? find_entering_bland() : find_entering_block()) >= 0) {
      pivot(entering);
      ++pivots_;
      if (!bland_ && pivots_ > soft_limit) bland_ = true;
      if (pivots_ % refresh_every == 0) refresh_potentials();
    }
    return extract();
  }

 private:
  static void copy_points(const Eigen::MatrixXd& pts, std::vector<double>& out) {
    out.resize(static_cast<size_t>(pts.rows()) * pts.cols());
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      for (Eigen::Index j = 0; j < pts.cols(); ++j)
        out[static_cast<size_t>(i) * pts.cols() + j] = pts(i, j);
  }

  double compute_cost(int i, int j) const {
    const double* a = &xa_[static_cast<size_t>(i) * d_];
    const double* b = &xb_[static_cast<size_t>(j) * d_];
    double s = 0.0;
    for (int k = 0; k < d_; ++k) {
      const double t = a[k] - b[k];
      s += t * t;
    }
    if (s <= 0.0) return 0.0;
    if (p_ == 2.0) return s;
    if (p_ == 1.0) return std::sqrt(s);
    return std::exp(0.5 * p_ * std::log(s));
  }

  double arc_cost(int i, int j) const {
    return cached_ ? cost_cache_[static_cast<size_t>(i) * m_ + j] : compute_cost(i, j);
  }

  bool is_source(int v) const { return v < n_; }

  // Arc id of the tree arc stored at child node v (for Bland comparisons).
  std::int64_t tree_arc_id(int v) const {
    const int src = is_source(v) ? v : parent_[v];
    const int snk = is_source(v) ? parent_[v] : v;
    return static_cast<std::int64_t>(src) * m_ + (snk - n_);
  }

  // Northwest-corner start over supports sorted by first coordinate (index
  // tie-break). For 1-D inputs this is already the optimal monotone basis.
  void build_initial_basis() {
    std::vector<int> sa(n_), sb(m_);
    std::iota(sa.begin(), sa.end(), 0);
    std::iota(sb.begin(), sb.end(), 0);
    std::sort(sa.begin(), sa.end(), [&](int u, int v) {
      const double a = xa_[static_cast<size_t>(u) * d_], b = xa_[static_cast<size_t>(v) * d_];
      if (a != b) return a < b;
      return u < v;
    });
    std::sort(sb.begin(), sb.end(), [&](int u, int v) {
      const double a = xb_[static_cast<size_t>(u) * d_], b = xb_[static_cast<size_t>(v) * d_];
      if (a != b) return a < b;
      return u < v;
    });

    const int nn = n_ + m_;
    parent_.assign(nn, -1);
    flow_.assign(nn, 0.0);
    pi_.assign(nn, 0.0);
    depth_.assign(nn, 0);
    children_.assign(nn, {});

    // Staircase walk: each step emits one basic cell and advances one side,
    // so exactly n+m-1 cells come out, zero-flow cells included.
    int ia = 0, ib = 0;
    double ra = supply_[sa[0]], rb = demand_[sb[0]];
    std::vector<std::pair<int, int>> cells;
    cells.reserve(static_cast<size_t>(nn));
    std::vector<double> cell_flow;
    cell_flow.reserve(static_cast<size_t>(nn));
    while (true) {
      const double f = std::min(ra, rb);
      cells.emplace_back(sa[ia], sb[ib]);
      cell_flow.push_back(f);
      ra -= f;
      rb -= f;
      if (ia == n_ - 1 && ib == m_ - 1) break;
      if (ra <= 0.0 && ia < n_ - 1) {
        ++ia;
        ra = supply_[sa[ia]];
      } else {
        ++ib;
        rb = demand_[sb[ib]];
      }
    }

    std::vector<std::vector<std::pair<int, double>>> adj(nn);
    for (size_t t = 0; t < cells.size(); ++t) {
      const int u = cells[t].first, v = n_ + cells[t].second;
      adj[u].emplace_back(v, cell_flow[t]);
      adj[v].emplace_back(u, cell_flow[t]);
    }
    root_ = sa[0];
    std::vector<int> stack{root_};
    std::vector<char> seen(nn, 0);
    seen[root_] = 1;
    pi_[root_] = 0.0;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const auto& [w, f] : adj[v]) {
        if (seen[w]) continue;
        seen[w] = 1;
        parent_[w] = v;
        flow_[w] = f;
        depth_[w] = depth_[v] + 1;
        const int src = is_source(w) ? w : v;
        const int snk = is_source(w) ? v : w;
        pi_[w] = arc_cost(src, snk - n_) - pi_[v];
        children_[v].push_back(w);
        stack.push_back(w);
      }
    }
  }

  // Recompute duals from the tree; wipes incremental rounding drift.
  void refresh_potentials() {
    pi_[root_] = 0.0;
    walk_stack_.clear();
    walk_stack_.push_back(root_);
    while (!walk_stack_.empty()) {
      const int v = walk_stack_.back();
      walk_stack_.pop_back();
      for (const int w : children_[v]) {
        const int src = is_source(w) ? w : v;
        const int snk = is_source(w) ? v : w;
        pi_[w] = arc_cost(src, snk - n_) - pi_[v];
        walk_stack_.push_back(w);
      }
    }
  }

  // Best candidate within a rolling block; -1 once a full pass stays clean.
  std::int64_t find_entering_block() {
    const std::int64_t arcs = static_cast<std::int64_t>(n_) * m_;
    double min_rc = 0.0;
    std::int64_t best = -1;
    std::int64_t scanned = 0;
    std::int64_t a = cursor_;
    int i = static_cast<int>(a / m_);
    int j = static_cast<int>(a % m_);
    while (scanned < arcs) {
      const std::int64_t stop = std::min(arcs - scanned, block_size_);
      for (std::int64_t t = 0; t < stop; ++t) {
        const double rc = arc_cost(i, j) - pi_[i] - pi_[n_ + j];
        if (rc < min_rc) {
          min_rc = rc;
          best = a;
        }
        ++a;
        ++j;
        if (j == m_) {
          j = 0;
          ++i;
        }
        if (a == arcs) {
          a = 0;
          i = 0;
          j = 0;
        }
      }
      scanned += stop;
      if (best >= 0 && min_rc < -eps_enter_) {
        cursor_ = a;
        return best;
      }
    }
    last_dual_violation_ = std::max(0.0, -min_rc);
    return -1;
  }

  // Bland mode: first violating arc in id order.
  std::int64_t find_entering_bland() {
    const std::int64_t arcs = static_cast<std::int64_t>(n_) * m_;
    double min_rc = 0.0;
    int i = 0, j = 0;
    for (std::int64_t a = 0; a < arcs; ++a) {
      const double rc = arc_cost(i, j) - pi_[i] - pi_[n_ + j];
      if (rc < -eps_enter_) return a;
      min_rc = std::min(min_rc, rc);
      ++j;
      if (j == m_) {
        j = 0;
        ++i;
      }
    }
    last_dual_violation_ = std::max(0.0, -min_rc);
    return -1;
  }

  void pivot(std::int64_t arc) {
    const int es = static_cast<int>(arc / m_);
    const int et = n_ + static_cast<int>(arc % m_);
    const double rc = arc_cost(es, et - n_) - pi_[es] - pi_[et];

    // Paths from both endpoints to the common apex (apex excluded).
    s_path_.clear();
    t_path_.clear();
    int u = es, v = et;
    while (depth_[u] > depth_[v]) {
      s_path_.push_back(u);
      u = parent_[u];
    }
    while (depth_[v] > depth_[u]) {
      t_path_.push_back(v);
      v = parent_[v];
    }
    while (u != v) {
      s_path_.push_back(u);
      t_path_.push_back(v);
      u = parent_[u];
      v = parent_[v];
    }

    // Sending theta around the cycle lowers flow on source-node arcs of the
    // s side and sink-node arcs of the t side; theta is the smallest such
    // flow. Ties: last minimum in traversal order apex->es->et->apex, or the
    // smallest arc id under Bland.
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    char leave_side = 's';
    auto consider = [&](int w, char side) {
      const double f = flow_[w];
      if (f < theta) {
        theta = f;
        leave = w;
        leave_side = side;
      } else if (f == theta && leave >= 0) {
        if (bland_) {
          if (tree_arc_id(w) < tree_arc_id(leave)) {
            leave = w;
            leave_side = side;
          }
        } else {
          leave = w;
          leave_side = side;
        }
      }
    };
    for (auto it = s_path_.rbegin(); it != s_path_.rend(); ++it)
      if (is_source(*it)) consider(*it, 's');
    for (const int w : t_path_)
      if (!is_source(w)) consider(w, 't');
    if (leave < 0) throw std::logic_error("network simplex: unbounded pivot cycle");

    for (const int w : s_path_) flow_[w] += is_source(w) ? -theta : theta;
    for (const int w : t_path_) flow_[w] += is_source(w) ? theta : -theta;

    // Detach the subtree under the leaving arc, re-root it at the entering
    // endpoint that lives inside it, and hang it off the other endpoint.
    const int e_in = leave_side == 's' ? es : et;
    const int e_out = leave_side == 's' ? et : es;
    remove_child(parent_[leave], leave);

    int cur = e_in;
    int prev = -1;
    double carry = theta;  // flow of the arc (cur -> its new parent)
    while (true) {
      const int nxt = parent_[cur];
      const double old_flow = flow_[cur];
      if (prev >= 0) {
        remove_child(cur, prev);          // prev no longer points up to cur
        children_[prev].push_back(cur);   // cur now hangs under prev
      }
      parent_[cur] = prev;
      flow_[cur] = carry;
      carry = old_flow;
      prev = cur;
      if (cur == leave) break;
      cur = nxt;
    }
    parent_[e_in] = e_out;
    children_[e_out].push_back(e_in);

    // Shift potentials on the re-rooted subtree so the entering arc is tight:
    // +rc on nodes of e_in's type, -rc on the other type. Depths refresh on
    // the same walk.
    const bool in_is_source = is_source(e_in);
    walk_stack_.clear();
    walk_stack_.push_back(e_in);
    depth_[e_in] = depth_[e_out] + 1;
    while (!walk_stack_.empty()) {
      const int w = walk_stack_.back();
      walk_stack_.pop_back();
      pi_[w] += (is_source(w) == in_is_source) ? rc : -rc;
      for (const int c : children_[w]) {
        depth_[c] = depth_[w] + 1;
        walk_stack_.push_back(c);
      }
    }
  }

  void remove_child(int par, int v) {
    if (par < 0) return;
    auto& kids = children_[par];
    for (size_t t = 0; t < kids.size(); ++t) {
      if (kids[t] == v) {
        kids[t] = kids.back();
        kids.pop_back();
        return;
      }
    }
  }

  // Basic flows recomputed from the marginals through the tree (subtree
  // balances), wiping incremental rounding drift before extraction.
  void recompute_flows() {
    const int nn = n_ + m_;
    std::vector<int> order;
    order.reserve(static_cast<size_t>(nn));
    walk_stack_.clear();
    walk_stack_.push_back(root_);
    while (!walk_stack_.empty()) {
      const int w = walk_stack_.back();
      walk_stack_.pop_back();
      order.push_back(w);
      for (const int c : children_[w]) walk_stack_.push_back(c);
    }
    std::vector<double> balance(static_cast<size_t>(nn));
    for (int v = 0; v < nn; ++v)
      balance[static_cast<size_t>(v)] = is_source(v) ? supply_[v] : -demand_[v - n_];
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int v = *it;
      const int par = parent_[v];
      if (par < 0) continue;
      const double b = balance[static_cast<size_t>(v)];
      flow_[v] = std::max(0.0, is_source(v) ? b : -b);
      balance[static_cast<size_t>(par)] += b;
    }
  }

  TransportResult extract() {
    recompute_flows();
    TransportResult r;
    r.p = p_;
    r.pivots = pivots_;
    r.dual_violation = last_dual_violation_;
    r.coupling.rows = n_;
    r.coupling.cols = m_;
    KahanAccumulator acc;
    const int nn = n_ + m_;
    for (int v = 0; v < nn; ++v) {
      if (parent_[v] < 0) continue;
      const int src = is_source(v) ? v : parent_[v];
      const int snk = is_source(v) ? parent_[v] : v;
      const double f = flow_[v];
      if (f > 0.0) {
        r.coupling.entries.push_back({src, snk - n_, f});
        acc.add(f * compute_cost(src, snk - n_));
      }
    }
    std::sort(r.coupling.entries.begin(), r.coupling.entries.end(),
              [](const CouplingEntry& a, const CouplingEntry& b) {
                if (a.i != b.i) return a.i < b.i;
                return a.j < b.j;
              });
    r.cost = root_p(acc.value(), p_);
    return r;
  }

  int n_, m_, d_;
  double p_;
  Eigen::VectorXd supply_, demand_;
  std::vector<double> xa_, xb_;
  std::vector<double> cost_cache_;
  bool cached_ = false;

  int root_ = 0;
  std::vector<int> parent_, depth_;
  std::vector<std::vector<int>> children_;
  std::vector<double> flow_, pi_;
  std::vector<int> s_path_, t_path_, walk_stack_;

  double eps_enter_ = 1e-11;
  std::int64_t block_size_ = 256;
  std::int64_t cursor_ = 0;
  std::int64_t pivots_ = 0;
  double last_dual_violation_ = 0.0;
  bool bland_ = false;
};

}  // namespace

TransportResult solve_network_simplex(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                      double p) {
  TransportSimplex solver(mu, nu, p);
  TransportResult r = solver.solve();
  r.coupling.row_marginal = mu.weights;
  r.coupling.col_marginal = nu.weights;
  return r;
}

}  // namespace spt::detail
