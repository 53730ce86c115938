#include "qgen/dtree.hpp"

#include <bit>
#include <functional>

#include <spdlog/spdlog.h>

#include "qgen/error.hpp"
#include "qgen/metrics.hpp"
#include "qgen/parallel.hpp"

namespace qgen::dtree {

using json = nlohmann::json;

Dataset::Dataset(std::vector<std::string> feature_names)
    : feature_names_(std::move(feature_names)) {}

void Dataset::add_row(std::string id, std::vector<std::uint8_t> features, bool label) {
  if (features.size() != feature_names_.size()) {
    fail(ErrorCode::kInvalidArgument,
         "dataset row '" + id + "' has " + std::to_string(features.size()) +
             " features, expected " + std::to_string(feature_names_.size()));
  }
  for (auto& f : features) f = f ? 1 : 0;
  ids_.push_back(std::move(id));
  rows_.push_back(std::move(features));
  labels_.push_back(label);
}

std::size_t Dataset::positives() const {
  std::size_t n = 0;
  for (bool l : labels_) n += l ? 1 : 0;
  return n;
}

double Node::probability() const {
  const int n = samples();
  return n == 0 ? 0.0 : static_cast<double>(n_condition) / n;
}

double gini_gain(int yes_pos, int yes_neg, int no_pos, int no_neg) {
  auto gini = [](double p, double q) {
    const double n = p + q;
    if (n == 0) return 0.0;
    return 1.0 - (p / n) * (p / n) - (q / n) * (q / n);
  };
  const double n_yes = yes_pos + yes_neg;
  const double n_no = no_pos + no_neg;
  const double n = n_yes + n_no;
  if (n == 0) return 0.0;
  const double parent = gini(yes_pos + no_pos, yes_neg + no_neg);
  return parent - (n_yes / n) * gini(yes_pos, yes_neg) - (n_no / n) * gini(no_pos, no_neg);
}

namespace {

using Bits = std::vector<std::uint64_t>;

struct BitMatrix {
  std::size_t n_rows = 0;
  std::size_t words = 0;
  std::vector<Bits> columns;
  Bits labels;

  explicit BitMatrix(const Dataset& data)
      : n_rows(data.size()),
        words((data.size() + 63) / 64),
        columns(data.n_features(), Bits(words, 0)),
        labels(words, 0) {
    for (std::size_t r = 0; r < n_rows; ++r) {
      const auto bit = std::uint64_t{1} << (r % 64);
      if (data.label(r)) labels[r / 64] |= bit;
      const auto& row = data.row(r);
      for (std::size_t f = 0; f < row.size(); ++f) {
        if (row[f]) columns[f][r / 64] |= bit;
      }
    }
  }

  Bits all_rows() const {
    Bits mask(words, ~std::uint64_t{0});
    if (n_rows % 64) mask.back() = (std::uint64_t{1} << (n_rows % 64)) - 1;
    if (n_rows == 0) mask.clear();
    return mask;
  }
};

int popcount(const Bits& a) {
  int n = 0;
  for (auto w : a) n += std::popcount(w);
  return n;
}

int popcount_and(const Bits& a, const Bits& b) {
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += std::popcount(a[i] & b[i]);
  return n;
}

int popcount_and3(const Bits& a, const Bits& b, const Bits& c) {
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += std::popcount(a[i] & b[i] & c[i]);
  return n;
}

using Wide = __int128;

// Gini gain ordering without rounding: a split's weighted child impurity is
// n - S where S = (p_y^2 + q_y^2) / n_y + (p_n^2 + q_n^2) / n_n, so larger S
// means larger gain. S is held as an exact fraction.
struct SplitScore {
  Wide num = 0;
  Wide den = 1;

  static SplitScore of(int yp, int yq, int np, int nq) {
    const Wide ny = yp + yq;
    const Wide nn = np + nq;
    const Wide sy = Wide(yp) * yp + Wide(yq) * yq;
    const Wide sn = Wide(np) * np + Wide(nq) * nq;
    return {sy * nn + sn * ny, ny * nn};
  }
  bool greater(const SplitScore& o) const { return num * o.den > o.num * den; }
};

class Builder {
 public:
  Builder(const BitMatrix& m, const TrainOptions& opt) : m_(m), opt_(opt) {}

  std::vector<Node> build(const Bits& mask) {
    nodes_.clear();
    grow(mask, 0);
    return std::move(nodes_);
  }

 private:
  int grow(const Bits& mask, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const int n = popcount(mask);
    const int pos = popcount_and(mask, m_.labels);
    {
      Node& node = nodes_.back();
      node.n_condition = pos;
      node.n_control = n - pos;
      node.depth = depth;
    }
    if (depth >= opt_.max_depth || pos == 0 || pos == n || n < 2 * opt_.min_leaf) return id;

    // Impure nodes split on the best valid feature even at zero gain, so
    // distinct rows can always be separated (XOR-style data has no single
    // improving split).
    SplitScore best;
    int best_feature = -1;
    Bits yes(m_.words);
    for (std::size_t f = 0; f < m_.columns.size(); ++f) {
      const auto& col = m_.columns[f];
      const int n_yes = popcount_and(mask, col);
      const int n_no = n - n_yes;
      if (n_yes < opt_.min_leaf || n_no < opt_.min_leaf || n_yes == 0 || n_no == 0) continue;
      const int yes_pos = popcount_and3(mask, col, m_.labels);
      const SplitScore s =
          SplitScore::of(yes_pos, n_yes - yes_pos, pos - yes_pos, n_no - (pos - yes_pos));
      if (best_feature < 0 || s.greater(best)) {
        best = s;
        best_feature = static_cast<int>(f);
      }
    }
    if (best_feature < 0) return id;

    const auto& col = m_.columns[static_cast<std::size_t>(best_feature)];
    Bits no(m_.words);
    for (std::size_t w = 0; w < m_.words; ++w) {
      yes[w] = mask[w] & col[w];
      no[w] = mask[w] & ~col[w];
    }
    nodes_[static_cast<std::size_t>(id)].feature = best_feature;
    const int yes_id = grow(yes, depth + 1);
    nodes_[static_cast<std::size_t>(id)].yes = yes_id;
    const int no_id = grow(no, depth + 1);
    nodes_[static_cast<std::size_t>(id)].no = no_id;
    return id;
  }

  const BitMatrix& m_;
  const TrainOptions& opt_;
  std::vector<Node> nodes_;
};

void check_options(const TrainOptions& options) {
  if (options.max_depth < 0) fail(ErrorCode::kInvalidArgument, "max_depth must be >= 0");
  if (options.min_leaf < 1) fail(ErrorCode::kInvalidArgument, "min_leaf must be >= 1");
}

}  // namespace

DecisionTree::DecisionTree(std::vector<std::string> feature_names, std::vector<Node> nodes,
                           int max_depth)
    : feature_names_(std::move(feature_names)), nodes_(std::move(nodes)), max_depth_(max_depth) {
  validate();
}

void DecisionTree::validate() const {
  if (nodes_.empty()) fail(ErrorCode::kFormat, "decision tree has no nodes");
  const int n = static_cast<int>(nodes_.size());
  std::vector<int> seen(nodes_.size(), 0);
  std::function<void(int, int)> visit = [&](int id, int depth) {
    if (id < 0 || id >= n) fail(ErrorCode::kFormat, "decision tree child index out of range");
    if (seen[static_cast<std::size_t>(id)]++) fail(ErrorCode::kFormat, "decision tree node reached twice");
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.n_condition < 0 || node.n_control < 0) {
      fail(ErrorCode::kFormat, "decision tree node has negative counts");
    }
    if (depth > max_depth_) fail(ErrorCode::kFormat, "decision tree exceeds its max depth");
    if (node.is_leaf()) return;
    if (static_cast<std::size_t>(node.feature) >= feature_names_.size()) {
      fail(ErrorCode::kFormat, "decision tree feature index out of range");
    }
    visit(node.yes, depth + 1);
    visit(node.no, depth + 1);
    const Node& y = nodes_[static_cast<std::size_t>(node.yes)];
    const Node& o = nodes_[static_cast<std::size_t>(node.no)];
    if (y.n_condition + o.n_condition != node.n_condition ||
        y.n_control + o.n_control != node.n_control) {
      fail(ErrorCode::kFormat, "decision tree child counts do not sum to parent");
    }
  };
  visit(0, 0);
  for (int s : seen) {
    if (!s) fail(ErrorCode::kFormat, "decision tree has unreachable nodes");
  }
}

int DecisionTree::depth() const {
  int d = 0;
  for (const auto& node : nodes_) d = std::max(d, node.depth);
  return d;
}

std::size_t DecisionTree::leaf_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes_) n += node.is_leaf() ? 1 : 0;
  return n;
}

int DecisionTree::leaf_for(std::span<const std::uint8_t> features) const {
  if (features.size() != feature_names_.size()) {
    fail(ErrorCode::kInvalidArgument,
         "feature vector has " + std::to_string(features.size()) + " entries, tree expects " +
             std::to_string(feature_names_.size()));
  }
  int id = 0;
  while (!nodes_[static_cast<std::size_t>(id)].is_leaf()) {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    id = features[static_cast<std::size_t>(node.feature)] ? node.yes : node.no;
  }
  return id;
}

double DecisionTree::predict_proba(std::span<const std::uint8_t> features, bool laplace) const {
  const Node& leaf = node(leaf_for(features));
  if (laplace) return (leaf.n_condition + 1.0) / (leaf.samples() + 2.0);
  return leaf.probability();
}

std::vector<Path> DecisionTree::export_paths() const {
  std::vector<Path> out;
  std::vector<PathStep> trail;
  std::function<void(int)> walk = [&](int id) {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.is_leaf()) {
      out.push_back({id, trail, node.n_condition, node.n_control, node.probability()});
      return;
    }
    trail.push_back({id, node.feature, true});
    walk(node.yes);
    trail.back().answer = false;
    walk(node.no);
    trail.pop_back();
  };
  walk(0);
  return out;
}

json DecisionTree::to_json() const {
  json nodes = json::array();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    json j = {{"id", i}, {"depth", n.depth}, {"n_condition", n.n_condition},
              {"n_control", n.n_control}};
    if (n.is_leaf()) {
      j["leaf"] = true;
      j["probability"] = n.probability();
    } else {
      j["leaf"] = false;
      j["feature"] = n.feature;
      j["yes"] = n.yes;
      j["no"] = n.no;
    }
    nodes.push_back(std::move(j));
  }
  return {{"max_depth", max_depth_}, {"features", feature_names_}, {"nodes", std::move(nodes)}};
}

DecisionTree DecisionTree::from_json(const json& j) {
  try {
    std::vector<Node> nodes;
    for (const auto& jn : j.at("nodes")) {
      Node n;
      if (jn.at("id").get<std::size_t>() != nodes.size()) {
        fail(ErrorCode::kFormat, "decision tree node ids must be sequential");
      }
      n.depth = jn.at("depth").get<int>();
      n.n_condition = jn.at("n_condition").get<int>();
      n.n_control = jn.at("n_control").get<int>();
      if (!jn.at("leaf").get<bool>()) {
        n.feature = jn.at("feature").get<int>();
        n.yes = jn.at("yes").get<int>();
        n.no = jn.at("no").get<int>();
        if (n.feature < 0) fail(ErrorCode::kFormat, "internal node with negative feature");
      }
      nodes.push_back(n);
    }
    return DecisionTree(j.at("features").get<std::vector<std::string>>(), std::move(nodes),
                        j.at("max_depth").get<int>());
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed decision tree: ") + e.what());
  }
}

DecisionTree train(const Dataset& data, const TrainOptions& options) {
  check_options(options);
  if (data.size() == 0) fail(ErrorCode::kInvalidArgument, "cannot train on an empty dataset");
  const std::size_t pos = data.positives();
  if (pos == 0 || pos == data.size()) {
    spdlog::warn("training data has a single class; tree is one leaf");
  }
  const BitMatrix m(data);
  Builder builder(m, options);
  return DecisionTree(data.feature_names(), builder.build(m.all_rows()), options.max_depth);
}

std::vector<double> loocv_scores(const Dataset& data, const TrainOptions& options, int jobs) {
  check_options(options);
  const BitMatrix m(data);
  const Bits all = m.all_rows();
  std::vector<double> scores(data.size());
  std::atomic<int> degenerate_folds{0};
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    Bits mask = all;
    mask[i / 64] &= ~(std::uint64_t{1} << (i % 64));
    Builder builder(m, options);
    const auto nodes = builder.build(mask);
    if (nodes.size() == 1 && (nodes[0].n_condition == 0 || nodes[0].n_control == 0)) {
      ++degenerate_folds;
    }
    // Walk the fold tree directly; no need to materialize a DecisionTree.
    int id = 0;
    while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
      const Node& n = nodes[static_cast<std::size_t>(id)];
      id = data.row(i)[static_cast<std::size_t>(n.feature)] ? n.yes : n.no;
    }
    scores[i] = nodes[static_cast<std::size_t>(id)].probability();
  });
  if (degenerate_folds > 0) {
    spdlog::warn("{} leave-one-out folds had a single training class; scored with the prior",
                 degenerate_folds.load());
  }
  return scores;
}

double loocv_auc(const Dataset& data, const TrainOptions& options, int jobs) {
  if (data.size() < 4) fail(ErrorCode::kInvalidArgument, "loocv_auc needs at least 4 rows");
  const std::size_t pos = data.positives();
  if (pos == 0 || pos == data.size()) {
    fail(ErrorCode::kDegenerate, "loocv_auc needs both classes");
  }
  const auto scores = loocv_scores(data, options, jobs);
  return metrics::auc(scores, data.labels());
}

}  // namespace qgen::dtree
