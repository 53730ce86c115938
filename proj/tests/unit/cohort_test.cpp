#include <gtest/gtest.h>

#include <sstream>

#include "expect_error.hpp"
#include "qgen/cohort.hpp"
#include "qgen/random.hpp"

namespace {

using qgen::ErrorCode;
using namespace qgen::cohort;
using qgen::corpus::Post;
using qgen::corpus::PostKind;
using qgen::corpus::SubredditSet;

Post make_post(std::string id, std::string author, std::string subreddit, std::int64_t t,
               std::string body, PostKind kind = PostKind::kSubmission) {
  Post p;
  p.id = std::move(id);
  p.author = std::move(author);
  p.subreddit = std::move(subreddit);
  p.created_utc = t;
  p.body = std::move(body);
  p.kind = kind;
  if (kind == PostKind::kComment) p.parent_id = "t3_none";
  return p;
}

std::string words(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += "word ";
  return s;
}

TEST(Features, BagOfWordsLinksAndCounts) {
  std::vector<Post> posts{make_post("a", "u", "endo", 1, "Pain, pain relief! https://example.com")};
  posts.push_back(make_post("b", "u", "endo", 2, words(200)));
  posts.push_back(make_post("c", "u", "endo", 3, words(100), PostKind::kComment));
  posts.push_back(make_post("d", "u", "endo", 4, words(99), PostKind::kComment));
  posts.push_back(make_post("e", "u", "endo", 5, words(97), PostKind::kComment));
  posts.push_back(make_post("f", "u", "Health", 6, "surgery"));
  qgen::corpus::Corpus c(posts);
  const auto f = extract_features(*c.user("u"), {"pain", "relief", "surgery"}, SubredditSet{"endo"});
  EXPECT_EQ(f.bow, (std::vector<std::uint8_t>{1, 1, 0}));
  EXPECT_TRUE(f.has_external_link);
  EXPECT_EQ(f.counts.submissions, 2);
  EXPECT_EQ(f.counts.comments, 3);
  EXPECT_EQ(f.counts.words, 500);
}

TEST(FeaturesProperty, InvariantToPostOrder) {
  qgen::Rng rng(701);
  const std::vector<std::string> vocab{"pain", "doctor", "diagnosed", "surgery", "i"};
  for (int t = 0; t < 30; ++t) {
    std::vector<Post> posts;
    for (int i = 0; i < 12; ++i) {
      std::string body;
      for (int w = 0; w < 4; ++w) body += vocab[rng.below(vocab.size())] + " ";
      posts.push_back(make_post("p" + std::to_string(i), "u", rng.bernoulli(0.7) ? "endo" : "x",
                                static_cast<std::int64_t>(1 + rng.below(5)), body));
    }
    qgen::corpus::Corpus a(posts);
    rng.shuffle(posts);
    qgen::corpus::Corpus b(posts);
    const auto fa = extract_features(*a.user("u"), vocab, SubredditSet{"endo"});
    const auto fb = extract_features(*b.user("u"), vocab, SubredditSet{"endo"});
    EXPECT_EQ(fa.bow, fb.bow);
    EXPECT_EQ(fa.counts, fb.counts);
  }
}

TEST(Vocabulary, DocumentFrequencyMinusStopwordsAndDigits) {
  const auto v = build_vocabulary({"the pain pain 2019", "pain doctor", "doctor surgery the"},
                                  {"the"}, 2);
  EXPECT_EQ(v, (std::vector<std::string>{"doctor", "pain"}));
  const auto sw = default_stopwords();
  EXPECT_TRUE(sw.count("the"));
  EXPECT_FALSE(sw.count("pain"));
}

LabeledFeatures lf(std::string author, std::vector<std::uint8_t> bow, bool label) {
  LabeledFeatures l;
  l.author = std::move(author);
  l.features.bow = std::move(bow);
  l.label = label;
  return l;
}

TEST(Classifier, SeparableWordGivesPerfectLoocv) {
  std::vector<LabeledFeatures> data;
  for (int i = 0; i < 20; ++i) data.push_back(lf("u" + std::to_string(i), {i % 2 == 0 ? std::uint8_t{1} : std::uint8_t{0}, std::uint8_t(i % 3 == 0)}, i % 2 == 0));
  const auto t = train_selfreport_classifier(data, {"diagnosed", "pain"});
  EXPECT_EQ(t.loocv_auc, 1.0);
  EXPECT_EQ(t.model.tree().node(0).feature, 0);
  CohortFeatures probe;
  probe.bow = {1, 0};
  EXPECT_EQ(t.model.score(probe), 1.0);
  const auto back = SelfReportClassifier::from_json(t.model.to_json());
  EXPECT_EQ(back.tree(), t.model.tree());
  EXPECT_EQ(back.medians(), t.model.medians());
}

TEST(Classifier, ShuffledLabelsNearChance) {
  qgen::Rng rng(702);
  std::vector<LabeledFeatures> data;
  for (int i = 0; i < 100; ++i) {
    std::vector<std::uint8_t> bow(8);
    for (auto& b : bow) b = rng.bernoulli(0.5);
    data.push_back(lf("u" + std::to_string(i), bow, bow[0] == 1));
  }
  std::vector<bool> labels;
  for (const auto& d : data) labels.push_back(d.label);
  rng.shuffle(labels);
  for (std::size_t i = 0; i < data.size(); ++i) data[i].label = labels[i];
  const auto t = train_selfreport_classifier(data, {"a", "b", "c", "d", "e", "f", "g", "h"});
  EXPECT_NEAR(t.loocv_auc, 0.5, 0.15);
}

TEST(Classifier, DegenerateLabels) {
  std::vector<LabeledFeatures> data{lf("a", {1}, true), lf("b", {0}, true), lf("c", {0}, false)};
  EXPECT_QGEN_ERROR(train_selfreport_classifier(data, {"w"}), ErrorCode::kDegenerate,
                    "degenerate labels");
}

TEST(LabelCohort, InclusiveThreshold) {
  const auto c = label_cohort({{"a", 0.5}, {"b", 0.4999}, {"c", 1.0}}, 0.5);
  EXPECT_EQ(c.labels.at("a"), CohortLabel::kCondition);
  EXPECT_EQ(c.labels.at("b"), CohortLabel::kControlCandidate);
  EXPECT_EQ(c.condition_users(), (std::vector<std::string>{"a", "c"}));
  EXPECT_TRUE(label_cohort({{"a", 0.0}, {"b", 0.0}}).condition_users().empty());
  EXPECT_QGEN_ERROR(label_cohort({}, 1.0), ErrorCode::kInvalidArgument, "threshold");
  EXPECT_QGEN_ERROR(label_cohort({}, 0.0), ErrorCode::kInvalidArgument, "threshold");

  std::stringstream ss;
  c.write_tsv(ss);
  const auto back = CohortLabeling::read_tsv(ss);
  EXPECT_EQ(back.scores, c.scores);
  EXPECT_EQ(back.labels, c.labels);
  EXPECT_EQ(back.threshold, 0.5);
}

TEST(LabelCohort, ThousandsOfUsersCounts) {
  // 2,136 scored users of which 1,368 reach the threshold.
  std::map<std::string, double> scores;
  for (int i = 0; i < 2136; ++i) scores["u" + std::to_string(i)] = i < 1368 ? 0.5 + (i % 50) / 100.0 : (i % 50) / 100.0;
  const auto c = label_cohort(scores);
  EXPECT_EQ(c.count(CohortLabel::kCondition), 1368u);
  EXPECT_EQ(c.count(CohortLabel::kControlCandidate), 768u);
}

TEST(LabelCohortProperty, MonotoneInThreshold) {
  qgen::Rng rng(703);
  for (int t = 0; t < 100; ++t) {
    std::map<std::string, double> scores;
    for (int i = 0; i < 30; ++i) scores["u" + std::to_string(i)] = static_cast<double>(rng.below(11)) / 10;
    const double lo = 0.05 + 0.9 * rng.uniform();
    const double hi = lo + (0.999 - lo) * rng.uniform();
    const auto a = label_cohort(scores, lo);
    const auto b = label_cohort(scores, hi);
    for (const auto& u : b.condition_users()) EXPECT_EQ(a.labels.at(u), CohortLabel::kCondition);
  }
}

TEST(Labels, FirstRowTrainsAndDualPairsFeedKappa) {
  std::istringstream in("author\tlabel\tlabeler\nu1\t1\tA\nu1\t0\tB\nu2\t0\tA\nu3\t1\tA\nu3\t1\tA\n");
  const auto t = LabelTable::read_tsv(in);
  EXPECT_EQ(t.labels.size(), 3u);
  EXPECT_TRUE(t.labels.at("u1"));
  ASSERT_EQ(t.dual.size(), 1u);  // u3's second row is the same labeler
  EXPECT_EQ(t.dual[0], (std::pair<int, int>{1, 0}));
  std::istringstream bad("u1\tmaybe\n");
  EXPECT_QGEN_ERROR(LabelTable::read_tsv(bad), ErrorCode::kFormat, "labels:1");
  EXPECT_QGEN_ERROR(labeler_agreement(LabelTable{}), ErrorCode::kDegenerate, "");
}

TEST(Labels, FortySevenDualLabeledUsersKappa) {
  LabelTable t;
  auto add = [&](int n, int a, int b) {
    for (int i = 0; i < n; ++i) t.dual.emplace_back(a, b);
  };
  add(35, 1, 1);
  add(2, 1, 0);
  add(3, 0, 1);
  add(7, 0, 0);
  ASSERT_EQ(t.dual.size(), 47u);
  EXPECT_NEAR(labeler_agreement(t), 0.67, 0.01);
}

TEST(Rates, TruePositiveAndFalsePositive) {
  const auto r = implied_rates({0.9, 0.5, 0.2, 0.7, 0.1}, {true, true, true, false, false}, 0.5);
  EXPECT_DOUBLE_EQ(r.true_positive_rate, 2.0 / 3);
  EXPECT_DOUBLE_EQ(r.false_positive_rate, 0.5);
}

class Controls : public ::testing::Test {
 protected:
  void SetUp() override {
    std::istringstream in("pain\t\nanxiety\t\nbloating\t\n");
    lexicon = qgen::symptoms::SymptomLexicon::parse(in);
  }
  std::vector<std::string> select(std::vector<Post> posts, int min_posts = 2) {
    qgen::corpus::Corpus c(std::move(posts));
    ControlOptions o;
    o.min_posts = min_posts;
    std::vector<std::string> out;
    for (const auto* u : select_controls(c, {"pain", "anxiety", "bloating"}, lexicon,
                                         SubredditSet{"endo"}, SubredditSet{"AskDocs", "Health"}, o)) {
      out.push_back(u->author);
    }
    return out;
  }
  qgen::symptoms::SymptomLexicon lexicon;
};

TEST_F(Controls, AllPredicatesHold) {
  std::vector<Post> posts{make_post("a", "ok", "AskDocs", 1, "terrible bloating"),
                          make_post("b", "ok", "Health", 2, words(120)),
                          make_post("c", "ok", "Gaming", 3, "gg"),
                          make_post("d", "filler", "AskDocs", 1, "pain " + words(100)),
                          make_post("e", "filler", "AskDocs", 2, words(10))};
  EXPECT_EQ(select(posts), (std::vector<std::string>{"filler", "ok"}));
}

TEST_F(Controls, RejectionsAndBoundaries) {
  std::vector<Post> posts{
      // single post
      make_post("a", "one", "AskDocs", 1, "pain " + words(100)),
      // posted in a condition subreddit
      make_post("b", "endo_user", "AskDocs", 1, "pain " + words(100)),
      make_post("c", "endo_user", "endo", 2, "hello"),
      // mention outside the medical subreddit only
      make_post("d", "elsewhere", "Health", 1, "pain " + words(100)),
      make_post("e", "elsewhere", "AskDocs", 2, "question"),
      // 79 relevant words in total
      make_post("f", "short", "AskDocs", 1, "pain " + words(77)),
      make_post("g", "short", "Gaming", 2, words(300)),
      make_post("h", "short", "Health", 3, "x"),
      // exactly 80: kept
      make_post("i", "exact", "AskDocs", 1, "pain " + words(78)),
      make_post("j", "exact", "Health", 2, "x"),
  };
  EXPECT_EQ(select(posts), (std::vector<std::string>{"exact"}));
}

TEST_F(Controls, EmptyGroupThrows) {
  EXPECT_QGEN_ERROR(select({make_post("a", "one", "AskDocs", 1, "pain " + words(100))}),
                    ErrorCode::kDegenerate, "control group empty");
}

}  // namespace
