#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "expect_error.hpp"
#include "qgen/random.hpp"
#include "qgen/symptoms.hpp"

namespace {

using qgen::ErrorCode;
using namespace qgen::symptoms;
using qgen::corpus::Post;

SymptomLexicon lex(const std::string& tsv) {
  std::istringstream in(tsv);
  return SymptomLexicon::parse(in);
}

TEST(Lexicon, SynonymsMergeUnderCanonical) {
  const auto l = lex("canonical\tsynonym\tsource\nweight loss\tlose weight\nweight loss\tlosing weight\n");
  ASSERT_EQ(l.size(), 1u);
  EXPECT_EQ(l.entries()[0].synonyms, (std::set<std::string>{"lose weight", "losing weight"}));
  EXPECT_EQ(l.entries()[0].sources, (std::set<std::string>{"external-lexicon"}));
}

TEST(Lexicon, EmptyFileGivesEmptyLexicon) { EXPECT_TRUE(lex("").empty()); }

TEST(Lexicon, ConflictNamesBothCanonicals) {
  EXPECT_QGEN_ERROR(lex("fatigue\ttired\nsleepiness\ttired\n"), ErrorCode::kConflict, "fatigue");
  EXPECT_QGEN_ERROR(lex("fatigue\ttired\nsleepiness\ttired\n"), ErrorCode::kConflict, "sleepiness");
  // A canonical cannot also be another canonical's synonym.
  EXPECT_QGEN_ERROR(lex("fatigue\ttired\ntired\t\n"), ErrorCode::kConflict, "tired");
}

TEST(Lexicon, LoadMergesFilesWithSources) {
  const std::string a = ::testing::TempDir() + "/lex_a.tsv";
  const std::string b = ::testing::TempDir() + "/lex_b.tsv";
  std::ofstream(a) << "pain\taching\texternal-lexicon\n";
  std::ofstream(b) << "pain\tsore\tcohort-stage\nbloating\t\tcohort-stage\n";
  const auto l = SymptomLexicon::load({a, b});
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(l.entries()[0].sources, (std::set<std::string>{"cohort-stage", "external-lexicon"}));
  EXPECT_EQ(l.index_of("Bloating"), 1);
  EXPECT_EQ(l.index_of("nausea"), -1);
  EXPECT_QGEN_ERROR(SymptomLexicon::load({"/missing.tsv"}), ErrorCode::kIo, "/missing.tsv");
}

TEST(Match, Examples) {
  const auto l = lex("weight loss\tlosing weight\npain\t\nchest pain\t\nstomach pain\t\n");
  EXPECT_EQ(match_symptoms("I keep Losing weight lately", l), (std::set<std::string>{"weight loss"}));
  EXPECT_TRUE(match_symptoms("the painter", l).empty());
  const auto l2 = lex("chest pain\t\nstomach pain\t\n");
  EXPECT_EQ(match_symptoms("chest pain and stomach pain", l2),
            (std::set<std::string>{"chest pain", "stomach pain"}));
  EXPECT_EQ(match_symptoms("chest, pain!", l2), (std::set<std::string>{"chest pain"}));
  EXPECT_TRUE(match_symptoms("chest and pain", l2).empty());
}

TEST(MatchProperty, ConcatenationIsSuperset) {
  const auto l = lex("weight loss\tlose weight\npain\t\nchest pain\t\nheadache\thead pounding\nfatigue\t\n");
  const std::vector<std::string> vocab{"weight", "loss", "lose", "pain", "chest", "head",
                                       "pounding", "fatigue", "the", "and"};
  qgen::Rng rng(601);
  auto gen = [&] {
    std::string s;
    const auto n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) s += vocab[rng.below(vocab.size())] + " ";
    return s;
  };
  for (int t = 0; t < 500; ++t) {
    const auto a = gen(), b = gen();
    const auto both = match_symptoms(a + " " + b, l);
    for (const auto& s : match_symptoms(a, l)) EXPECT_TRUE(both.count(s));
    for (const auto& s : match_symptoms(b, l)) EXPECT_TRUE(both.count(s));
  }
}

struct Fixture {
  std::unique_ptr<qgen::corpus::Corpus> corpus;
  std::vector<const qgen::corpus::UserRecord*> users() const {
    std::vector<const qgen::corpus::UserRecord*> out;
    for (const auto& [_, u] : corpus->users()) out.push_back(&u);
    return out;
  }
};

Post post(std::string id, std::string author, std::string body) {
  Post p;
  p.id = std::move(id);
  p.author = std::move(author);
  p.subreddit = "Health";
  p.created_utc = 10;
  p.body = std::move(body);
  return p;
}

PostSelector all_posts() {
  return [](const qgen::corpus::UserRecord& u) { return u.posts; };
}

TEST(Profile, BinaryMentionsAndCounts) {
  const auto l = lex("pain\t\nanxiety\t\n");
  std::vector<Post> posts{post("a", "u1", "pain today")};
  for (int i = 0; i < 5; ++i) posts.push_back(post("b" + std::to_string(i), "u2", "pain again"));
  posts.push_back(post("c", "u3", "nothing"));
  qgen::corpus::Corpus c(posts);
  Fixture f{std::make_unique<qgen::corpus::Corpus>(std::move(c))};
  const auto p = profile_population(f.users(), l, all_posts());
  EXPECT_EQ(p.users, (std::vector<std::string>{"u1", "u2", "u3"}));
  EXPECT_EQ(p.user_counts, (std::vector<int>{2, 0}));
  EXPECT_EQ(p.mentions[1], (std::vector<std::uint8_t>{1, 0}));
  EXPECT_EQ(mentioned_symptoms(p), (std::vector<std::string>{"pain"}));

  std::stringstream ss;
  const std::map<std::string, bool> labels{{"u1", true}, {"u2", false}, {"u3", false}};
  p.write_tsv(ss, &labels);
  std::map<std::string, bool> back_labels;
  const auto back = SymptomProfile::read_tsv(ss, &back_labels);
  EXPECT_EQ(back.mentions, p.mentions);
  EXPECT_EQ(back.user_counts, p.user_counts);
  EXPECT_EQ(back_labels, labels);
  EXPECT_EQ(p.user_index("u2"), 1u);
  EXPECT_QGEN_ERROR(p.user_index("zz"), ErrorCode::kNotFound, "zz");
}

TEST(ProfileProperty, DuplicatePostsAndJobsDoNotMatter) {
  const auto l = lex("pain\taching\nanxiety\tpanic\nbloating\t\n");
  const std::vector<std::string> vocab{"pain", "aching", "panic", "bloating", "fine", "day"};
  qgen::Rng rng(602);
  for (int t = 0; t < 30; ++t) {
    std::vector<Post> posts;
    for (int i = 0; i < 40; ++i) {
      std::string body;
      for (int w = 0; w < 3; ++w) body += vocab[rng.below(vocab.size())] + " ";
      posts.push_back(post("p" + std::to_string(i), "u" + std::to_string(rng.below(10)), body));
    }
    auto doubled = posts;
    for (auto p : posts) {
      p.id += "_copy";
      doubled.push_back(p);
    }
    Fixture a{std::make_unique<qgen::corpus::Corpus>(posts)};
    Fixture b{std::make_unique<qgen::corpus::Corpus>(doubled)};
    const auto pa = profile_population(a.users(), l, all_posts());
    const auto pb = profile_population(b.users(), l, all_posts(), 4);
    EXPECT_EQ(pa.mentions, pb.mentions);
    EXPECT_EQ(pa.user_counts, pb.user_counts);
    for (int c : pa.user_counts) EXPECT_LE(c, static_cast<int>(pa.users.size()));
  }
}

TEST(TopSymptoms, OrderAndTies) {
  SymptomProfile p;
  p.symptoms = {"rash", "bloating", "pain", "anxiety"};
  p.user_counts = {1, 5, 10, 7};
  EXPECT_EQ(top_symptoms(p, 3), (std::vector<std::string>{"pain", "anxiety", "bloating"}));
  EXPECT_EQ(top_symptoms(p, 1), (std::vector<std::string>{"pain"}));
  EXPECT_EQ(top_symptoms(p, 10).size(), 4u);
  p.user_counts = {2, 2, 2, 2};
  EXPECT_EQ(top_symptoms(p, 4), (std::vector<std::string>{"anxiety", "bloating", "pain", "rash"}));
  EXPECT_QGEN_ERROR(top_symptoms(p, 0), ErrorCode::kInvalidArgument, "");
}

}  // namespace
