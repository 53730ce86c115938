#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qgen::metrics {

struct ScoredLabel {
  double score = 0.0;
  bool positive = false;
};

// Mann-Whitney ROC AUC: P(score_pos > score_neg), ties count one half.
// Throws kDegenerate unless both classes are present.
double auc(std::span<const ScoredLabel> data);
double auc(std::span<const double> scores, const std::vector<bool>& labels);

// Product-moment correlation. Throws kDegenerate "undefined correlation" when
// either side is constant, kInvalidArgument on length mismatch or n < 2.
double pearson(std::span<const double> x, std::span<const double> y);

// Chance-corrected agreement over arbitrary categorical labels.
double cohen_kappa(std::span<const int> a, std::span<const int> b);

// A repeated-item pair; nullopt marks a "Not enough information" response.
struct RepeatedScore {
  std::string path_id;
  std::optional<int> first;
  std::optional<int> second;
};

// Pearson between first and second showings. Pairs with an NEI on either
// side are dropped; fewer than two usable pairs throws kDegenerate.
double intra_rater(std::span<const RepeatedScore> scores);

}  // namespace qgen::metrics
