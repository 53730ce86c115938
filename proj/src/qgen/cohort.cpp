#include "qgen/cohort.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "qgen/error.hpp"
#include "qgen/metrics.hpp"
#include "qgen/text.hpp"

namespace qgen::cohort {

extern const char* const kStopwordData;  // generated from data/stopwords.txt

LabelTable LabelTable::read_tsv(std::istream& in) {
  LabelTable t;
  std::map<std::string, std::vector<std::pair<std::string, int>>> by_user;
  std::vector<std::string> order;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto f = text::split(line, '\t');
    if (line_no == 1 && f[0] == "author") continue;
    if (f.size() < 2 || f.size() > 3 || (f[1] != "0" && f[1] != "1")) {
      fail(ErrorCode::kFormat, "labels:" + std::to_string(line_no) +
                                   ": expected author, label(1/0), labeler_id");
    }
    const std::string labeler = f.size() == 3 ? f[2] : "";
    auto& rows = by_user[f[0]];
    if (rows.empty()) order.push_back(f[0]);
    rows.emplace_back(labeler, f[1] == "1" ? 1 : 0);
  }
  for (const auto& author : order) {
    const auto& rows = by_user[author];
    t.labels[author] = rows.front().second == 1;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].first != rows.front().first) {
        t.dual.emplace_back(rows.front().second, rows[i].second);
        break;
      }
    }
  }
  return t;
}

double labeler_agreement(const LabelTable& table) {
  if (table.dual.empty()) fail(ErrorCode::kDegenerate, "no dual-labeled users");
  std::vector<int> a;
  std::vector<int> b;
  for (auto [x, y] : table.dual) {
    a.push_back(x);
    b.push_back(y);
  }
  return metrics::cohen_kappa(a, b);
}

namespace {

std::set<std::string> parse_stopwords(std::istream& in) {
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto w = text::lower(text::trim(line));
    if (!w.empty() && w[0] != '#') out.insert(w);
  }
  return out;
}

bool all_digits(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace

std::set<std::string> default_stopwords() {
  std::istringstream in(kStopwordData);
  return parse_stopwords(in);
}

std::set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read stopwords: " + path);
  return parse_stopwords(in);
}

std::vector<std::string> build_vocabulary(const std::vector<std::string>& documents,
                                          const std::set<std::string>& stopwords,
                                          std::size_t size) {
  std::map<std::string, int> df;
  for (const auto& doc : documents) {
    auto toks = text::tokens(doc);
    std::set<std::string> unique(toks.begin(), toks.end());
    for (const auto& t : unique) {
      if (!stopwords.count(t) && !all_digits(t)) ++df[t];
    }
  }
  std::vector<std::pair<std::string, int>> ranked(df.begin(), df.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > size) ranked.resize(size);
  std::vector<std::string> vocab;
  for (auto& [w, _] : ranked) vocab.push_back(w);
  return vocab;
}

CohortFeatures extract_features(const corpus::UserRecord& user,
                                const std::vector<std::string>& vocab,
                                const corpus::SubredditSet& condition_subs) {
  CohortFeatures f;
  std::set<std::string> seen;
  for (const corpus::Post* p : user.posts) {
    if (!condition_subs.contains(p->subreddit)) continue;
    const std::string t = p->text();
    if (text::contains_url(t)) f.has_external_link = true;
    for (auto& tok : text::tokens(t)) seen.insert(std::move(tok));
  }
  f.bow.reserve(vocab.size());
  for (const auto& w : vocab) f.bow.push_back(seen.count(w) ? 1 : 0);
  f.counts = user.counts_in(condition_subs);
  return f;
}

SelfReportClassifier::SelfReportClassifier(std::vector<std::string> vocab,
                                           std::vector<double> medians, dtree::DecisionTree tree)
    : vocab_(std::move(vocab)), medians_(std::move(medians)), tree_(std::move(tree)) {
  if (medians_.size() != 4) fail(ErrorCode::kInvalidArgument, "classifier needs 4 medians");
  if (tree_.n_features() != vocab_.size() + 5) {
    fail(ErrorCode::kInvalidArgument, "classifier tree does not match its vocabulary");
  }
}

std::vector<std::string> SelfReportClassifier::feature_names(const std::vector<std::string>& vocab) {
  std::vector<std::string> names;
  for (const auto& w : vocab) names.push_back("word:" + w);
  names.push_back("has_external_link");
  names.push_back("submissions_above_median");
  names.push_back("comments_above_median");
  names.push_back("replies_above_median");
  names.push_back("words_above_median");
  return names;
}

namespace {

std::vector<std::uint8_t> binarize_with(const CohortFeatures& f, const std::vector<double>& med) {
  std::vector<std::uint8_t> row = f.bow;
  row.push_back(f.has_external_link ? 1 : 0);
  row.push_back(f.counts.submissions > med[0] ? 1 : 0);
  row.push_back(f.counts.comments > med[1] ? 1 : 0);
  row.push_back(f.counts.replies_received > med[2] ? 1 : 0);
  row.push_back(f.counts.words > med[3] ? 1 : 0);
  return row;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

std::vector<std::uint8_t> SelfReportClassifier::binarize(const CohortFeatures& f) const {
  if (f.bow.size() != vocab_.size()) {
    fail(ErrorCode::kInvalidArgument, "feature vector does not match classifier vocabulary");
  }
  return binarize_with(f, medians_);
}

double SelfReportClassifier::score(const CohortFeatures& f) const {
  return tree_.predict_proba(binarize(f));
}

nlohmann::json SelfReportClassifier::to_json() const {
  return {{"vocab", vocab_}, {"medians", medians_}, {"tree", tree_.to_json()}};
}

SelfReportClassifier SelfReportClassifier::from_json(const nlohmann::json& j) {
  try {
    return SelfReportClassifier(j.at("vocab").get<std::vector<std::string>>(),
                                j.at("medians").get<std::vector<double>>(),
                                dtree::DecisionTree::from_json(j.at("tree")));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed classifier: ") + e.what());
  }
}

TrainedClassifier train_selfreport_classifier(const std::vector<LabeledFeatures>& labeled,
                                              const std::vector<std::string>& vocab,
                                              const dtree::TrainOptions& options, int jobs) {
  std::size_t pos = 0;
  for (const auto& l : labeled) pos += l.label ? 1 : 0;
  if (pos < 2 || labeled.size() - pos < 2) {
    fail(ErrorCode::kDegenerate, "degenerate labels: need at least 2 examples of each class");
  }
  std::vector<std::vector<double>> columns(4);
  for (const auto& l : labeled) {
    columns[0].push_back(l.features.counts.submissions);
    columns[1].push_back(l.features.counts.comments);
    columns[2].push_back(l.features.counts.replies_received);
    columns[3].push_back(l.features.counts.words);
  }
  std::vector<double> medians;
  for (auto& c : columns) medians.push_back(median(c));

  dtree::Dataset data(SelfReportClassifier::feature_names(vocab));
  for (const auto& l : labeled) {
    data.add_row(l.author, binarize_with(l.features, medians), l.label);
  }
  TrainedClassifier out;
  out.model = SelfReportClassifier(vocab, medians, dtree::train(data, options));
  out.labels = data.labels();
  if (data.size() >= 4) {
    out.heldout_scores = dtree::loocv_scores(data, options, jobs);
    out.loocv_auc = metrics::auc(out.heldout_scores, out.labels);
  }
  return out;
}

std::vector<std::string> CohortLabeling::condition_users() const {
  std::vector<std::string> out;
  for (const auto& [author, label] : labels) {
    if (label == CohortLabel::kCondition) out.push_back(author);
  }
  return out;
}

std::size_t CohortLabeling::count(CohortLabel label) const {
  std::size_t n = 0;
  for (const auto& [_, l] : labels) n += l == label ? 1 : 0;
  return n;
}

void CohortLabeling::write_tsv(std::ostream& out) const {
  out << "# threshold=" << std::setprecision(17) << threshold << '\n';
  out << "author\tscore\tlabel\n";
  for (const auto& [author, score] : scores) {
    const auto l = labels.at(author);
    out << author << '\t' << std::setprecision(17) << score << '\t'
        << (l == CohortLabel::kCondition ? "condition" : "control-candidate") << '\n';
  }
}

CohortLabeling CohortLabeling::read_tsv(std::istream& in) {
  CohortLabeling c;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# threshold=", 0) == 0) {
      c.threshold = std::stod(line.substr(12));
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    auto f = text::split(line, '\t');
    if (f.size() != 3) fail(ErrorCode::kFormat, "cohort table: malformed row");
    c.scores[f[0]] = std::stod(f[1]);
    c.labels[f[0]] = f[2] == "condition" ? CohortLabel::kCondition : CohortLabel::kControlCandidate;
  }
  return c;
}

CohortLabeling label_cohort(const std::map<std::string, double>& scores, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "threshold must lie in (0, 1)");
  }
  CohortLabeling c;
  c.threshold = threshold;
  c.scores = scores;
  for (const auto& [author, s] : scores) {
    c.labels[author] = s >= threshold ? CohortLabel::kCondition : CohortLabel::kControlCandidate;
  }
  return c;
}

RateSummary implied_rates(const std::vector<double>& scores, const std::vector<bool>& labels,
                          double threshold) {
  double tp = 0, fp = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool fired = scores[i] >= threshold;
    if (labels[i]) {
      ++pos;
      tp += fired ? 1 : 0;
    } else {
      ++neg;
      fp += fired ? 1 : 0;
    }
  }
  return {pos > 0 ? tp / pos : 0.0, neg > 0 ? fp / neg : 0.0};
}

std::vector<const corpus::UserRecord*> select_controls(
    const corpus::Corpus& corpus, const std::vector<std::string>& symptom_top,
    const symptoms::SymptomLexicon& lexicon, const corpus::SubredditSet& condition_subs,
    const corpus::SubredditSet& relevant_subs, const ControlOptions& options) {
  if (symptom_top.empty()) fail(ErrorCode::kInvalidArgument, "select_controls: no symptoms given");
  std::set<std::size_t> wanted;
  for (const auto& s : symptom_top) {
    const auto idx = lexicon.index_of(s);
    if (idx < 0) fail(ErrorCode::kNotFound, "control symptom not in lexicon: " + s);
    wanted.insert(static_cast<std::size_t>(idx));
  }
  const corpus::SubredditSet medical{options.medical_subreddit};

  std::vector<const corpus::UserRecord*> out;
  for (const auto& [author, user] : corpus.users()) {
    if (user.posted_in(condition_subs)) continue;
    if (user.total_posts() < options.min_posts) continue;
    if (user.counts_in(relevant_subs).words < options.min_words) continue;
    bool mentioned = false;
    for (const corpus::Post* p : user.posts) {
      if (!medical.contains(p->subreddit)) continue;
      for (std::size_t idx : lexicon.match(p->text())) {
        if (wanted.count(idx)) {
          mentioned = true;
          break;
        }
      }
      if (mentioned) break;
    }
    if (mentioned) out.push_back(&user);
  }
  if (out.empty()) fail(ErrorCode::kDegenerate, "control group empty");
  return out;
}

}  // namespace qgen::cohort
