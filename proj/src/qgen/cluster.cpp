#include "qgen/cluster.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

#include "qgen/error.hpp"

namespace qgen::cluster {

Linkage parse_linkage(const std::string& name) {
  if (name == "average") return Linkage::kAverage;
  if (name == "complete") return Linkage::kComplete;
  if (name == "single") return Linkage::kSingle;
  fail(ErrorCode::kInvalidArgument, "unknown linkage '" + name + "'");
}

std::string linkage_name(Linkage linkage) {
  switch (linkage) {
    case Linkage::kAverage: return "average";
    case Linkage::kComplete: return "complete";
    case Linkage::kSingle: return "single";
  }
  return "average";
}

Dendrogram agglomerate(const wmd::DistanceMatrix& matrix, Linkage linkage) {
  const int n = static_cast<int>(matrix.size());
  if (n == 0) fail(ErrorCode::kInvalidArgument, "cannot cluster an empty distance matrix");
  matrix.validate();

  // Clusters are keyed by their smallest member index (`rep`). link[a][b]
  // holds the pairwise-distance sum for average linkage, otherwise the
  // linkage distance itself.
  std::vector<std::vector<double>> link(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) link[i][j] = matrix.at(i, j);
  }
  std::vector<int> active(n);
  std::vector<int> size(n, 1);
  std::vector<int> node(n);
  for (int i = 0; i < n; ++i) active[i] = node[i] = i;

  auto value = [&](int a, int b) {
    return linkage == Linkage::kAverage ? link[a][b] / (static_cast<double>(size[a]) * size[b])
                                        : link[a][b];
  };

  Dendrogram out;
  out.leaves = n;
  for (int step = 0; step < n - 1; ++step) {
    int best_a = -1;
    int best_b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < active.size(); ++x) {
      for (std::size_t y = x + 1; y < active.size(); ++y) {
        const double d = value(active[x], active[y]);
        if (d < best) {
          best = d;
          best_a = active[x];
          best_b = active[y];
        }
      }
    }
    out.merges.push_back({step, node[best_a], node[best_b], best});

    for (int c : active) {
      if (c == best_a || c == best_b) continue;
      double merged = 0;
      switch (linkage) {
        case Linkage::kAverage: merged = link[best_a][c] + link[best_b][c]; break;
        case Linkage::kComplete: merged = std::max(link[best_a][c], link[best_b][c]); break;
        case Linkage::kSingle: merged = std::min(link[best_a][c], link[best_b][c]); break;
      }
      link[best_a][c] = link[c][best_a] = merged;
    }
    size[best_a] += size[best_b];
    node[best_a] = n + step;
    active.erase(std::find(active.begin(), active.end(), best_b));
  }
  return out;
}

Partition cut(const Dendrogram& dendrogram, int k) {
  const int n = dendrogram.leaves;
  if (k < 1 || k > n) {
    fail(ErrorCode::kInvalidArgument,
         "cluster count " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::vector<int>> members(static_cast<std::size_t>(2 * n));
  std::vector<bool> alive(static_cast<std::size_t>(2 * n), false);
  for (int i = 0; i < n; ++i) {
    members[i] = {i};
    alive[i] = true;
  }
  for (int s = 0; s < n - k; ++s) {
    const Merge& m = dendrogram.merges.at(static_cast<std::size_t>(s));
    auto& dst = members[static_cast<std::size_t>(n + s)];
    dst = members[m.left];
    dst.insert(dst.end(), members[m.right].begin(), members[m.right].end());
    std::sort(dst.begin(), dst.end());
    alive[m.left] = alive[m.right] = false;
    alive[static_cast<std::size_t>(n + s)] = true;
  }
  Partition p;
  p.k = k;
  for (std::size_t id = 0; id < members.size(); ++id) {
    if (alive[id]) p.members.push_back(members[id]);
  }
  std::sort(p.members.begin(), p.members.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  p.assignment.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t c = 0; c < p.members.size(); ++c) {
    for (int m : p.members[c]) p.assignment[static_cast<std::size_t>(m)] = static_cast<int>(c);
  }
  return p;
}

Partition partition_from_assignment(const std::vector<int>& assignment) {
  Partition p;
  p.assignment = assignment;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const int c = assignment[i];
    if (c < 0 || c > static_cast<int>(p.members.size())) {
      fail(ErrorCode::kFormat, "cluster ids must follow the smallest member");
    }
    if (c == static_cast<int>(p.members.size())) p.members.emplace_back();
    p.members[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
  }
  p.k = static_cast<int>(p.members.size());
  return p;
}

int max_cluster_size(const Partition& partition) {
  std::size_t best = 0;
  for (const auto& m : partition.members) best = std::max(best, m.size());
  return static_cast<int>(best);
}

std::string cluster_label(const std::vector<int>& members, const std::vector<std::string>& names) {
  std::vector<std::string> picked;
  for (int m : members) picked.push_back(names.at(static_cast<std::size_t>(m)));
  std::stable_sort(picked.begin(), picked.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  if (picked.size() > 3) picked.resize(3);
  std::string out;
  for (std::size_t i = 0; i < picked.size(); ++i) {
    if (i) out += '/';
    out += picked[i];
  }
  return out;
}

void write_partition_tsv(std::ostream& out, const Partition& partition,
                         const std::vector<std::string>& names) {
  out << "symptom\tcluster_id\tcluster_label\n";
  for (std::size_t i = 0; i < partition.assignment.size(); ++i) {
    const int c = partition.assignment[i];
    out << names.at(i) << '\t' << c << '\t'
        << cluster_label(partition.members[static_cast<std::size_t>(c)], names) << '\n';
  }
}

}  // namespace qgen::cluster
