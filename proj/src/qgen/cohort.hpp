#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgen/corpus.hpp"
#include "qgen/dtree.hpp"
#include "qgen/symptoms.hpp"

namespace qgen::cohort {

// Manual self-report labels. A user may be labeled by several labelers; the
// first row in file order is the training label.
struct LabelTable {
  std::map<std::string, bool> labels;
  // Users labeled by at least two distinct labelers: first two labels.
  std::vector<std::pair<int, int>> dual;

  static LabelTable read_tsv(std::istream& in);
};

// Cohen's kappa over the dual-labeled users. Throws kDegenerate without any.
double labeler_agreement(const LabelTable& table);

std::set<std::string> default_stopwords();
std::set<std::string> load_stopwords(const std::string& path);

// Top `size` tokens by document frequency over the given documents, minus
// stopwords and pure digits; ties lexicographic.
std::vector<std::string> build_vocabulary(const std::vector<std::string>& documents,
                                          const std::set<std::string>& stopwords,
                                          std::size_t size = 500);

struct CohortFeatures {
  std::vector<std::uint8_t> bow;  // presence per vocabulary word
  bool has_external_link = false;
  corpus::InteractionCounts counts;  // within condition subreddits
};

CohortFeatures extract_features(const corpus::UserRecord& user,
                                const std::vector<std::string>& vocab,
                                const corpus::SubredditSet& condition_subs);

// Decision tree over bag-of-words presence, the link flag, and interaction
// counts binarized at their training medians.
class SelfReportClassifier {
 public:
  SelfReportClassifier() = default;
  SelfReportClassifier(std::vector<std::string> vocab, std::vector<double> medians,
                       dtree::DecisionTree tree);

  static std::vector<std::string> feature_names(const std::vector<std::string>& vocab);
  std::vector<std::uint8_t> binarize(const CohortFeatures& f) const;
  double score(const CohortFeatures& f) const;

  const std::vector<std::string>& vocab() const { return vocab_; }
  const std::vector<double>& medians() const { return medians_; }
  const dtree::DecisionTree& tree() const { return tree_; }

  nlohmann::json to_json() const;
  static SelfReportClassifier from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> vocab_;
  std::vector<double> medians_;  // submissions, comments, replies, words
  dtree::DecisionTree tree_;
};

struct TrainedClassifier {
  SelfReportClassifier model;
  double loocv_auc = 0.0;
  std::vector<double> heldout_scores;
  std::vector<bool> labels;
};

struct LabeledFeatures {
  std::string author;
  CohortFeatures features;
  bool label = false;
};

// Needs at least two examples of each class ("degenerate labels" otherwise).
TrainedClassifier train_selfreport_classifier(const std::vector<LabeledFeatures>& labeled,
                                              const std::vector<std::string>& vocab,
                                              const dtree::TrainOptions& options = {},
                                              int jobs = 1);

// kControlCandidate: scored below threshold. kUnlabeled: never scored.
enum class CohortLabel { kCondition, kControlCandidate, kUnlabeled };

struct CohortLabeling {
  double threshold = 0.5;
  std::map<std::string, double> scores;
  std::map<std::string, CohortLabel> labels;

  std::vector<std::string> condition_users() const;
  std::size_t count(CohortLabel label) const;

  void write_tsv(std::ostream& out) const;
  static CohortLabeling read_tsv(std::istream& in);
};

// score >= threshold marks the condition; threshold must lie in (0, 1).
CohortLabeling label_cohort(const std::map<std::string, double>& scores, double threshold = 0.5);

struct RateSummary {
  double true_positive_rate = 0.0;
  double false_positive_rate = 0.0;
};

RateSummary implied_rates(const std::vector<double>& scores, const std::vector<bool>& labels,
                          double threshold);

struct ControlOptions {
  std::string medical_subreddit = "AskDocs";
  int min_posts = 2;
  int min_words = 80;
};

// Users who mentioned a top symptom in the medical subreddit, never posted in
// a condition subreddit, wrote >= min_posts posts, and wrote >= min_words
// words across the relevant subreddits. Throws kDegenerate when none qualify.
std::vector<const corpus::UserRecord*> select_controls(
    const corpus::Corpus& corpus, const std::vector<std::string>& symptom_top,
    const symptoms::SymptomLexicon& lexicon, const corpus::SubredditSet& condition_subs,
    const corpus::SubredditSet& relevant_subs, const ControlOptions& options = {});

}  // namespace qgen::cohort
