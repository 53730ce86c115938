#include "qgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "qgen/error.hpp"

namespace qgen::metrics {

double auc(std::span<const ScoredLabel> data) {
  std::vector<ScoredLabel> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score < b.score; });

  double n_pos = 0;
  double n_neg = 0;
  for (const auto& d : sorted) (d.positive ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) {
    fail(ErrorCode::kDegenerate, "auc requires both classes");
  }

  // Walk tie groups in ascending score order. Each positive gets full credit
  // for negatives strictly below and half credit for tied negatives.
  double concordant2 = 0;  // doubled to stay integral
  double neg_below = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    double pos_tied = 0;
    double neg_tied = 0;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      (sorted[j].positive ? pos_tied : neg_tied) += 1;
      ++j;
    }
    concordant2 += pos_tied * (2 * neg_below + neg_tied);
    neg_below += neg_tied;
    i = j;
  }
  return (concordant2 / 2) / (n_pos * n_neg);
}

double auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::kInvalidArgument, "auc: scores and labels differ in length");
  }
  std::vector<ScoredLabel> data(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) data[i] = {scores[i], labels[i]};
  return auc(data);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(ErrorCode::kInvalidArgument, "pearson: length mismatch");
  }
  if (x.size() < 2) {
    fail(ErrorCode::kInvalidArgument, "pearson: need at least 2 observations");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0;
  double my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0;
  double sxx = 0;
  double syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) {
    fail(ErrorCode::kDegenerate, "undefined correlation");
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

double cohen_kappa(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::kInvalidArgument, "cohen_kappa: length mismatch");
  }
  if (a.empty()) {
    fail(ErrorCode::kInvalidArgument, "cohen_kappa: empty labelings");
  }
  const double n = static_cast<double>(a.size());
  std::map<int, double> freq_a;
  std::map<int, double> freq_b;
  double agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    freq_a[a[i]] += 1;
    freq_b[b[i]] += 1;
    if (a[i] == b[i]) agree += 1;
  }
  const double p_o = agree / n;
  double p_e = 0;
  for (const auto& [label, count] : freq_a) {
    auto it = freq_b.find(label);
    if (it != freq_b.end()) p_e += (count / n) * (it->second / n);
  }
  if (p_e == 1.0) {
    // Both raters used one identical category throughout.
    return p_o == 1.0 ? 1.0 : 0.0;
  }
  return (p_o - p_e) / (1.0 - p_e);
}

double intra_rater(std::span<const RepeatedScore> scores) {
  std::vector<double> first;
  std::vector<double> second;
  for (const auto& s : scores) {
    if (!s.first || !s.second) continue;
    first.push_back(*s.first);
    second.push_back(*s.second);
  }
  if (first.size() < 2) {
    fail(ErrorCode::kDegenerate, "intra_rater: fewer than 2 usable repeated pairs");
  }
  return pearson(first, second);
}

}  // namespace qgen::metrics
