#include <gtest/gtest.h>

#include <numeric>

#include "expect_error.hpp"
#include "oracles.hpp"
#include "qgen/dtree.hpp"
#include "qgen/metrics.hpp"

namespace {

using qgen::ErrorCode;
using namespace qgen::dtree;

Dataset make(const std::vector<std::vector<std::uint8_t>>& rows, const std::vector<bool>& labels) {
  std::vector<std::string> names;
  for (std::size_t f = 0; f < rows.at(0).size(); ++f) names.push_back("f" + std::to_string(f));
  Dataset d(names);
  for (std::size_t i = 0; i < rows.size(); ++i) d.add_row("r" + std::to_string(i), rows[i], labels[i]);
  return d;
}

// Reference CART: minimizes weighted child impurity p*q/n summed over the
// children, compared as exact fractions; lowest feature index on ties.
struct RefBuilder {
  const Dataset& d;
  int max_depth;
  int min_leaf;
  std::vector<Node> nodes;

  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    long long p = 0;
    for (auto r : rows) p += d.label(r) ? 1 : 0;
    const long long n = static_cast<long long>(rows.size());
    nodes[id].n_condition = static_cast<int>(p);
    nodes[id].n_control = static_cast<int>(n - p);
    nodes[id].depth = depth;
    if (depth >= max_depth || p == 0 || p == n || n < 2 * min_leaf) return id;
    long long bnum = 0, bden = 1;
    int bf = -1;
    for (std::size_t f = 0; f < d.n_features(); ++f) {
      long long ny = 0, py = 0;
      for (auto r : rows) {
        if (d.row(r)[f]) {
          ++ny;
          py += d.label(r) ? 1 : 0;
        }
      }
      const long long nn = n - ny, pn = p - py;
      if (ny < min_leaf || nn < min_leaf || ny == 0 || nn == 0) continue;
      const long long num = py * (ny - py) * nn + pn * (nn - pn) * ny;
      const long long den = ny * nn;
      if (bf < 0 || num * bden < bnum * den) {
        bnum = num;
        bden = den;
        bf = static_cast<int>(f);
      }
    }
    if (bf < 0) return id;
    std::vector<std::size_t> yes, no;
    for (auto r : rows) (d.row(r)[bf] ? yes : no).push_back(r);
    nodes[id].feature = bf;
    const int y = grow(yes, depth + 1);
    nodes[id].yes = y;
    const int o = grow(no, depth + 1);
    nodes[id].no = o;
    return id;
  }
};

TEST(Gini, WorkedExamples) {
  // Stated split: parent 2+/2- (Gini 0.5), yes 2+/1-, no 0+/1-.
  EXPECT_NEAR(gini_gain(2, 1, 0, 1), 0.5 - 0.75 * (4.0 / 9), 1e-15);
  EXPECT_NEAR(gini_gain(2, 1, 0, 1), 1.0 / 6, 1e-15);
  // Parent 3+/1- (Gini 0.375), yes 2+/1-, no 1+/0-: 0.375 - 0.75 * 0.444 = 0.0417.
  EXPECT_NEAR(gini_gain(2, 1, 1, 0), 0.375 - 0.75 * (4.0 / 9), 1e-15);
  EXPECT_NEAR(gini_gain(2, 1, 1, 0), 0.0417, 5e-5);
}

TEST(Train, SplitWithPositiveGainIsAccepted) {
  const auto d = make({{1}, {1}, {1}, {0}}, {true, true, false, true});
  const auto t = train(d);
  ASSERT_FALSE(t.node(0).is_leaf());
  EXPECT_EQ(t.node(t.node(0).yes).samples(), 3);
}

TEST(Train, SeparableFeatureGivesDepthOneTree) {
  const auto d = make({{0, 1}, {0, 1}, {1, 0}, {1, 1}, {0, 0}}, {false, false, true, true, false});
  const auto t = train(d);
  EXPECT_EQ(t.depth(), 1);
  EXPECT_EQ(t.node(0).feature, 0);
  EXPECT_EQ(t.node(t.node(0).yes).probability(), 1.0);
  EXPECT_EQ(t.node(t.node(0).no).probability(), 0.0);
  const auto paths = t.export_paths();
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0].steps, (std::vector<PathStep>{{0, 0, true}}));
  EXPECT_EQ(paths[1].steps.size(), 1u);
}

TEST(Train, PureInputIsSingleLeaf) {
  const auto t = train(make({{0}, {1}, {1}}, {true, true, true}));
  EXPECT_EQ(t.nodes().size(), 1u);
  EXPECT_EQ(t.export_paths().size(), 1u);
  EXPECT_TRUE(t.export_paths()[0].steps.empty());
  EXPECT_EQ(t.predict_proba(std::vector<std::uint8_t>{0}), 1.0);
}

TEST(Predict, LeafFractionAndPrior) {
  std::vector<std::vector<std::uint8_t>> rows(10, {0});
  std::vector<bool> labels(10, true);
  labels[8] = labels[9] = false;
  const auto t = train(make(rows, labels));
  EXPECT_DOUBLE_EQ(t.predict_proba(std::vector<std::uint8_t>{1}), 0.8);
  EXPECT_DOUBLE_EQ(t.predict_proba(std::vector<std::uint8_t>{0}, true), 9.0 / 12);
  EXPECT_QGEN_ERROR(t.predict_proba(std::vector<std::uint8_t>{0, 1}), ErrorCode::kInvalidArgument, "");
}

TEST(Train, RejectsBadOptionsAndEmptyData) {
  const auto d = make({{0}, {1}}, {true, false});
  EXPECT_QGEN_ERROR(train(d, {-1, 1}), ErrorCode::kInvalidArgument, "max_depth");
  EXPECT_QGEN_ERROR(train(d, {6, 0}), ErrorCode::kInvalidArgument, "min_leaf");
  EXPECT_QGEN_ERROR(train(Dataset({"f"})), ErrorCode::kInvalidArgument, "empty");
}

TEST(Loocv, SeparableDataScoresOne) {
  qgen::Rng rng(401);
  Dataset d({"noise", "signal"});
  for (int i = 0; i < 40; ++i) {
    const bool y = i % 2 == 0;
    d.add_row("r" + std::to_string(i), {static_cast<std::uint8_t>(rng.below(2)), y ? std::uint8_t{1} : std::uint8_t{0}}, y);
  }
  EXPECT_EQ(loocv_auc(d), 1.0);
}

TEST(Loocv, ShuffledLabelsNearChance) {
  // Planted data, then labels permuted: the permutation null.
  qgen::Rng rng(402);
  auto d = qgen_test::random_binary_dataset(rng, 200, 10);
  std::vector<bool> labels;
  for (std::size_t i = 0; i < d.size(); ++i) labels.push_back(d.row(i)[0] == 1);
  rng.shuffle(labels);
  Dataset shuffled(d.feature_names());
  for (std::size_t i = 0; i < d.size(); ++i) shuffled.add_row(d.id(i), d.row(i), labels[i]);
  const double auc = loocv_auc(shuffled);
  EXPECT_GE(auc, 0.4);
  EXPECT_LE(auc, 0.6);
}

TEST(Loocv, ParallelFoldsAgree) {
  qgen::Rng rng(403);
  const auto d = qgen_test::random_binary_dataset(rng, 80, 6);
  EXPECT_EQ(loocv_scores(d, {}, 1), loocv_scores(d, {}, 3));
}

TEST(Loocv, Errors) {
  EXPECT_QGEN_ERROR(loocv_auc(make({{0}, {1}, {1}}, {true, false, true})), ErrorCode::kInvalidArgument, "4 rows");
  EXPECT_QGEN_ERROR(loocv_auc(make({{0}, {1}, {1}, {0}}, {true, true, true, true})), ErrorCode::kDegenerate, "");
}

TEST(TreeProperty, RandomDatasets) {
  qgen::Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(120));
    const int f = 1 + static_cast<int>(rng.below(12));
    const auto d = qgen_test::random_binary_dataset(rng, n, f, 0.2 + 0.6 * rng.uniform());
    TrainOptions opt;
    opt.min_leaf = 1 + static_cast<int>(rng.below(3));
    const auto t = train(d, opt);

    int leaf_total = 0;
    for (const auto& node : t.nodes()) {
      if (node.is_leaf()) leaf_total += node.samples();
      EXPECT_GE(node.probability(), 0.0);
      EXPECT_LE(node.probability(), 1.0);
    }
    EXPECT_EQ(leaf_total, n);
    EXPECT_LE(t.depth(), 6);
    EXPECT_EQ(t.export_paths().size(), t.leaf_count());
    for (const auto& p : t.export_paths()) EXPECT_LE(p.steps.size(), 6u);

    RefBuilder ref{d, opt.max_depth, opt.min_leaf, {}};
    std::vector<std::size_t> all(d.size());
    std::iota(all.begin(), all.end(), 0);
    ref.grow(all, 0);
    EXPECT_EQ(t.nodes(), ref.nodes) << "trial " << trial;

    // Training is a pure function of the data.
    EXPECT_EQ(train(d, opt), t);
    EXPECT_EQ(DecisionTree::from_json(t.to_json()), t);

    // Training AUC is at least the constant predictor's.
    if (d.positives() > 0 && d.positives() < d.size()) {
      std::vector<double> s;
      for (std::size_t i = 0; i < d.size(); ++i) s.push_back(t.predict_proba(d.row(i)));
      EXPECT_GE(qgen::metrics::auc(s, d.labels()), 0.5);
    }
  }
}

TEST(TreeProperty, DistinctRowsAreMemorized) {
  // Unlimited depth over distinct feature vectors: every row lands in a pure leaf.
  qgen::Rng rng(405);
  for (int trial = 0; trial < 30; ++trial) {
    Dataset d({"a", "b", "c", "d", "e"});
    for (int v = 0; v < 32; ++v) {
      if (!rng.bernoulli(0.6)) continue;
      std::vector<std::uint8_t> x(5);
      for (int b = 0; b < 5; ++b) x[b] = (v >> b) & 1;
      d.add_row("v" + std::to_string(v), x, rng.bernoulli(0.5));
    }
    if (d.size() == 0) continue;
    const auto t = train(d, {64, 1});
    for (std::size_t i = 0; i < d.size(); ++i) {
      EXPECT_EQ(t.predict_proba(d.row(i)), d.label(i) ? 1.0 : 0.0);
    }
  }
}

TEST(TreeJson, RejectsCorruptTrees) {
  const auto t = train(make({{0}, {1}, {1}, {0}}, {false, true, true, false}));
  auto j = t.to_json();
  j["nodes"][1]["n_condition"] = 5;
  EXPECT_QGEN_ERROR(DecisionTree::from_json(j), ErrorCode::kFormat, "");
}

}  // namespace
