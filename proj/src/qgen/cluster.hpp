#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qgen/wmd.hpp"

namespace qgen::cluster {

enum class Linkage { kAverage, kComplete, kSingle };

Linkage parse_linkage(const std::string& name);
std::string linkage_name(Linkage linkage);

// One agglomeration step. Leaves are nodes 0..n-1; the cluster created at
// step s is node n + s. left < right by smallest member index.
struct Merge {
  int step = 0;
  int left = 0;
  int right = 0;
  double distance = 0.0;
  bool operator==(const Merge&) const = default;
};

struct Dendrogram {
  int leaves = 0;
  std::vector<Merge> merges;
};

struct Partition {
  int k = 0;
  std::vector<int> assignment;             // symptom index -> cluster id
  std::vector<std::vector<int>> members;   // cluster id -> sorted member indices
};

// Deterministic agglomerative clustering over a precomputed distance matrix.
// Among equally close cluster pairs, the one with the smallest
// (min member of first, min member of second) pair merges first.
Dendrogram agglomerate(const wmd::DistanceMatrix& matrix, Linkage linkage = Linkage::kAverage);

// Partition after the first n - k merges. Cluster ids follow the smallest
// member index.
Partition cut(const Dendrogram& dendrogram, int k);

// Rebuilds members from an assignment whose ids follow the smallest member.
Partition partition_from_assignment(const std::vector<int>& assignment);

int max_cluster_size(const Partition& partition);

// "/"-joined shortest three member names.
std::string cluster_label(const std::vector<int>& members, const std::vector<std::string>& names);

// TSV: symptom, cluster_id, cluster_label.
void write_partition_tsv(std::ostream& out, const Partition& partition,
                         const std::vector<std::string>& names);

}  // namespace qgen::cluster
