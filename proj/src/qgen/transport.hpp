#pragma once

#include <vector>

namespace qgen::wmd {

// Balanced transportation problem: move `supply` mass onto `demand` mass at
// minimum total cost. cost is row-major, supply.size() x demand.size().
struct TransportProblem {
  std::vector<double> supply;
  std::vector<double> demand;
  std::vector<double> cost;

  std::size_t rows() const { return supply.size(); }
  std::size_t cols() const { return demand.size(); }
  double cost_at(std::size_t i, std::size_t j) const { return cost[i * cols() + j]; }

  // Throws kInvalidArgument on negative weights, sums off 1 by more than
  // 1e-9, or a negative / non-finite cost.
  void validate() const;
};

struct TransportSolution {
  double cost = 0.0;
  std::vector<double> plan;  // row-major flows
  int iterations = 0;
};

// Exact transportation simplex (northwest-corner start, u-v potentials,
// Dantzig pricing with a fallback to Bland's rule against degenerate cycling).
TransportSolution solve_transport(const TransportProblem& problem);

}  // namespace qgen::wmd
