#include "qgen/transport.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>

#include "qgen/error.hpp"

namespace qgen::wmd {

void TransportProblem::validate() const {
  if (supply.empty() || demand.empty()) {
    fail(ErrorCode::kInvalidArgument, "transport problem needs at least one source and sink");
  }
  if (cost.size() != supply.size() * demand.size()) {
    fail(ErrorCode::kInvalidArgument, "transport cost matrix has wrong size");
  }
  auto check_side = [](const std::vector<double>& w, const char* name) {
    double sum = 0;
    for (double x : w) {
      if (!(x >= 0) || !std::isfinite(x)) {
        fail(ErrorCode::kInvalidArgument, std::string("negative or non-finite ") + name + " weight");
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      fail(ErrorCode::kInvalidArgument,
           std::string(name) + " weights sum to " + std::to_string(sum) + ", expected 1");
    }
  };
  check_side(supply, "supply");
  check_side(demand, "demand");
  for (double c : cost) {
    if (!(c >= 0) || !std::isfinite(c)) {
      fail(ErrorCode::kInvalidArgument, "transport costs must be finite and nonnegative");
    }
  }
}

namespace {

struct Cell {
  std::size_t row;
  std::size_t col;
};

class Simplex {
 public:
  explicit Simplex(const TransportProblem& p)
      : p_(p), m_(p.rows()), n_(p.cols()), flow_(m_ * n_, 0.0), basic_(m_ * n_, false) {
    double max_cost = 0;
    for (double c : p.cost) max_cost = std::max(max_cost, c);
    eps_ = 1e-12 * (1.0 + max_cost);
  }

  TransportSolution run() {
    northwest_corner();
    const int dantzig_budget = 50 * static_cast<int>(m_ + n_);
    const int hard_limit = 100000 + 1000 * static_cast<int>(m_ * n_);
    int iter = 0;
    for (;; ++iter) {
      if (iter > hard_limit) fail(ErrorCode::kDegenerate, "transport simplex failed to converge");
      compute_potentials();
      const bool bland = iter >= dantzig_budget;
      const auto entering = price(bland);
      if (!entering) break;
      pivot(*entering, bland);
    }
    TransportSolution out;
    out.plan = flow_;
    out.iterations = iter;
    for (std::size_t k = 0; k < flow_.size(); ++k) out.cost += flow_[k] * p_.cost[k];
    return out;
  }

 private:
  std::size_t idx(const Cell& c) const { return c.row * n_ + c.col; }

  // Staircase start: always exactly m + n - 1 cells forming a spanning tree,
  // some possibly carrying zero flow.
  void northwest_corner() {
    std::vector<double> supply = p_.supply;
    std::vector<double> demand = p_.demand;
    std::size_t i = 0;
    std::size_t j = 0;
    for (;;) {
      const double x = std::max(0.0, std::min(supply[i], demand[j]));
      add_basic({i, j}, x);
      supply[i] -= x;
      demand[j] -= x;
      if (i == m_ - 1 && j == n_ - 1) break;
      if (i < m_ - 1 && (j == n_ - 1 || supply[i] <= demand[j])) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  void add_basic(const Cell& c, double x) {
    basis_.push_back(c);
    basic_[idx(c)] = true;
    flow_[idx(c)] = x;
  }

  void build_adjacency() {
    adj_.assign(m_ + n_, {});
    for (std::size_t b = 0; b < basis_.size(); ++b) {
      adj_[basis_[b].row].push_back(b);
      adj_[m_ + basis_[b].col].push_back(b);
    }
  }

  void compute_potentials() {
    build_adjacency();
    u_.assign(m_, 0.0);
    v_.assign(n_, 0.0);
    std::vector<bool> done(m_ + n_, false);
    std::deque<std::size_t> queue{0};
    done[0] = true;
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (std::size_t b : adj_[node]) {
        const Cell& c = basis_[b];
        const std::size_t other = node < m_ ? m_ + c.col : c.row;
        if (done[other]) continue;
        done[other] = true;
        if (node < m_) {
          v_[c.col] = p_.cost_at(c.row, c.col) - u_[c.row];
        } else {
          u_[c.row] = p_.cost_at(c.row, c.col) - v_[c.col];
        }
        queue.push_back(other);
      }
    }
  }

  std::optional<Cell> price(bool bland) const {
    std::optional<Cell> best;
    double best_d = -eps_;
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        if (basic_[i * n_ + j]) continue;
        const double d = p_.cost_at(i, j) - u_[i] - v_[j];
        if (d < best_d) {
          if (bland) return Cell{i, j};
          best_d = d;
          best = Cell{i, j};
        }
      }
    }
    return best;
  }

  // Tree path from the entering cell's column back to its row, as basis
  // indices ordered from the column side.
  std::vector<std::size_t> tree_path(const Cell& entering) const {
    const std::size_t start = m_ + entering.col;
    const std::size_t goal = entering.row;
    std::vector<std::ptrdiff_t> via(m_ + n_, -1);
    std::vector<bool> seen(m_ + n_, false);
    std::deque<std::size_t> queue{start};
    seen[start] = true;
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      if (node == goal) break;
      for (std::size_t b : adj_[node]) {
        const Cell& c = basis_[b];
        const std::size_t other = node < m_ ? m_ + c.col : c.row;
        if (seen[other]) continue;
        seen[other] = true;
        via[other] = static_cast<std::ptrdiff_t>(b);
        queue.push_back(other);
      }
    }
    std::vector<std::size_t> path;
    for (std::size_t node = goal; node != start;) {
      const auto b = static_cast<std::size_t>(via[node]);
      path.push_back(b);
      const Cell& c = basis_[b];
      node = node < m_ ? m_ + c.col : c.row;
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

  void pivot(const Cell& entering, bool bland) {
    const auto path = tree_path(entering);
    // Signs alternate around the cycle starting with the entering cell (+):
    // path[0], path[2], ... lose flow.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = path.front();
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const std::size_t b = path[k];
      const double f = flow_[idx(basis_[b])];
      if (f < theta || (bland && f == theta && idx(basis_[b]) < idx(basis_[leaving]))) {
        theta = f;
        leaving = b;
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      double& f = flow_[idx(basis_[path[k]])];
      f = (k % 2 == 0) ? std::max(0.0, f - theta) : f + theta;
    }
    flow_[idx(basis_[leaving])] = 0.0;
    basic_[idx(basis_[leaving])] = false;
    basis_[leaving] = entering;
    basic_[idx(entering)] = true;
    flow_[idx(entering)] = theta;
  }

  const TransportProblem& p_;
  std::size_t m_;
  std::size_t n_;
  double eps_ = 0;
  std::vector<double> flow_;
  std::vector<bool> basic_;
  std::vector<Cell> basis_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<double> u_;
  std::vector<double> v_;
};

}  // namespace

TransportSolution solve_transport(const TransportProblem& problem) {
  problem.validate();
  return Simplex(problem).run();
}

}  // namespace qgen::wmd
