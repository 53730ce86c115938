#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace qgen::dtree {

// Binary feature matrix with boolean labels (true = condition).
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<std::string> feature_names);

  void add_row(std::string id, std::vector<std::uint8_t> features, bool label);

  std::size_t size() const { return rows_.size(); }
  std::size_t n_features() const { return feature_names_.size(); }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::uint8_t>& row(std::size_t i) const { return rows_[i]; }
  bool label(std::size_t i) const { return labels_[i]; }
  const std::vector<bool>& labels() const { return labels_; }
  std::size_t positives() const;

 private:
  std::vector<std::string> feature_names_;
  std::vector<std::string> ids_;
  std::vector<std::vector<std::uint8_t>> rows_;
  std::vector<bool> labels_;
};

struct Node {
  int feature = -1;  // -1 marks a leaf
  int yes = -1;      // child taken when the feature is 1
  int no = -1;
  int n_condition = 0;
  int n_control = 0;
  int depth = 0;

  bool is_leaf() const { return feature < 0; }
  int samples() const { return n_condition + n_control; }
  double probability() const;
  bool operator==(const Node&) const = default;
};

struct PathStep {
  int node = 0;
  int feature = 0;
  bool answer = false;
  bool operator==(const PathStep&) const = default;
};

// Root-to-leaf sequence of answered questions.
struct Path {
  int leaf = 0;
  std::vector<PathStep> steps;
  int n_condition = 0;
  int n_control = 0;
  double probability = 0.0;
};

struct TrainOptions {
  int max_depth = 6;
  int min_leaf = 1;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<std::string> feature_names, std::vector<Node> nodes, int max_depth);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  std::size_t n_features() const { return feature_names_.size(); }
  int max_depth() const { return max_depth_; }
  int depth() const;
  std::size_t leaf_count() const;

  int leaf_for(std::span<const std::uint8_t> features) const;
  // Leaf fraction of condition rows; with `laplace`, (c + 1) / (n + 2).
  double predict_proba(std::span<const std::uint8_t> features, bool laplace = false) const;

  // One path per leaf, in preorder (yes branch first).
  std::vector<Path> export_paths() const;

  nlohmann::json to_json() const;
  static DecisionTree from_json(const nlohmann::json& j);

  bool operator==(const DecisionTree&) const = default;

 private:
  void validate() const;

  std::vector<std::string> feature_names_;
  std::vector<Node> nodes_;  // preorder; nodes_[0] is the root
  int max_depth_ = 6;
};

// Greedy CART with Gini impurity. Deterministic: among equal-gain splits the
// lowest feature index wins. Single-class input yields a single leaf.
DecisionTree train(const Dataset& data, const TrainOptions& options = {});

// Gini decrease of splitting (pos, neg) into yes/no children.
double gini_gain(int yes_pos, int yes_neg, int no_pos, int no_neg);

// Held-out score of every row under leave-one-out training.
std::vector<double> loocv_scores(const Dataset& data, const TrainOptions& options = {},
                                 int jobs = 1);
double loocv_auc(const Dataset& data, const TrainOptions& options = {}, int jobs = 1);

}  // namespace qgen::dtree
