#pragma once

#include "spt/transport.hpp"

namespace spt::detail {

// Exact transportation-simplex solve on the complete bipartite graph.
// Preconditions: validated measures, matching dimension, all weights > 0.
TransportResult solve_network_simplex(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                      double p);

// Exact assignment solve (Jonker-Volgenant shortest augmenting paths).
// Preconditions: n == m and both weight vectors uniform.
TransportResult solve_assignment(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

}  // namespace spt::detail
