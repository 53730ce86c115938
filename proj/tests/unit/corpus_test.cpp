#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "expect_error.hpp"
#include "qgen/corpus.hpp"
#include "qgen/random.hpp"

namespace {

using qgen::ErrorCode;
using namespace qgen::corpus;

std::string words(int n, const std::string& w = "word") {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + w;
  return s;
}

Post sub(std::string id, std::string author, std::string subreddit, std::int64_t t, std::string body) {
  Post p;
  p.id = std::move(id);
  p.author = std::move(author);
  p.subreddit = std::move(subreddit);
  p.created_utc = t;
  p.body = std::move(body);
  return p;
}

Post comment(std::string id, std::string author, std::string subreddit, std::int64_t t,
             std::string body, std::string parent) {
  Post p = sub(std::move(id), std::move(author), std::move(subreddit), t, std::move(body));
  p.kind = PostKind::kComment;
  p.parent_id = std::move(parent);
  return p;
}

std::vector<Post> parse(const std::string& text, PostKind kind, ParseStats* stats = nullptr) {
  std::istringstream in(text);
  std::vector<Post> out;
  auto s = parse_dump(in, kind, [&](Post&& p) { out.push_back(std::move(p)); });
  if (stats) *stats = s;
  return out;
}

TEST(ParseDump, SubmissionFieldsMap) {
  const auto posts = parse(
      R"({"id":"x1","author":"a","subreddit":"endo","created_utc":100,"title":"t","selftext":"hello world"})",
      PostKind::kSubmission);
  ASSERT_EQ(posts.size(), 1u);
  EXPECT_EQ(posts[0].kind, PostKind::kSubmission);
  EXPECT_EQ(posts[0].body, "hello world");
  EXPECT_EQ(posts[0].title, "t");
  EXPECT_EQ(posts[0].created_utc, 100);
}

TEST(ParseDump, MissingAuthorIsSkipped) {
  ParseStats st;
  const auto posts = parse(
      "{\"id\":\"x1\",\"subreddit\":\"e\",\"created_utc\":1,\"selftext\":\"a\"}\n"
      "{\"id\":\"x2\",\"author\":\"b\",\"subreddit\":\"e\",\"created_utc\":1,\"selftext\":\"a\"}\n",
      PostKind::kSubmission, &st);
  EXPECT_EQ(posts.size(), 1u);
  EXPECT_EQ(st.malformed, 1u);
  EXPECT_EQ(st.parsed, 1u);
}

TEST(ParseDump, EmptyInputAndFormatMismatch) {
  ParseStats st;
  EXPECT_TRUE(parse("", PostKind::kSubmission, &st).empty());
  EXPECT_EQ(st.lines, 0u);
  // Submissions parsed as comments lack parent_id: every line is malformed.
  const std::string subs =
      R"({"id":"x1","author":"a","subreddit":"e","created_utc":1,"selftext":"b"})";
  EXPECT_QGEN_ERROR(parse(subs + "\n" + subs, PostKind::kComment), ErrorCode::kFormat,
                    "format mismatch");
  EXPECT_QGEN_ERROR(parse_dump("/nonexistent/file.jsonl", PostKind::kComment, [](Post&&) {}),
                    ErrorCode::kIo, "/nonexistent/file.jsonl");
}

TEST(ParseDump, CommentsNeedParentAndPositiveTime) {
  ParseStats st;
  parse("{\"id\":\"c\",\"author\":\"a\",\"subreddit\":\"e\",\"created_utc\":0,\"body\":\"b\",\"parent_id\":\"t3_x\"}\n"
        "{\"id\":\"d\",\"author\":\"a\",\"subreddit\":\"e\",\"created_utc\":5,\"body\":\"b\",\"parent_id\":\"t3_x\"}\n",
        PostKind::kComment, &st);
  EXPECT_EQ(st.malformed, 1u);
}

TEST(ParseDumpProperty, RoundTrip) {
  qgen::Rng rng(501);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Post> subs, comments;
    for (int i = 0; i < 20; ++i) {
      Post p = sub("s" + std::to_string(i), "u" + std::to_string(rng.below(5)),
                   "r" + std::to_string(rng.below(3)), 1 + static_cast<std::int64_t>(rng.below(1000)),
                   words(static_cast<int>(rng.below(10)), "x\"y\n"));
      p.title = "title " + std::to_string(i);
      subs.push_back(p);
      comments.push_back(comment("c" + std::to_string(i), p.author, p.subreddit, p.created_utc + 1,
                                 "reply \t tab", "t3_s" + std::to_string(rng.below(20))));
    }
    std::stringstream a, b;
    write_dump(a, subs, PostKind::kSubmission);
    write_dump(b, comments, PostKind::kComment);
    EXPECT_EQ(parse(a.str(), PostKind::kSubmission), subs);
    EXPECT_EQ(parse(b.str(), PostKind::kComment), comments);
  }
}

TEST(WordRule, EightyWordBoundary) {
  const QualifyOptions opt;
  EXPECT_EQ(sub("a", "u", "r", 1, words(80)).words(), 80);
  EXPECT_TRUE(qualifies(sub("a", "u", "r", 1, words(80)), opt));
  EXPECT_FALSE(qualifies(sub("a", "u", "r", 1, words(79)), opt));
  // Title words count.
  Post titled = sub("a", "u", "r", 1, words(79));
  titled.title = "one";
  EXPECT_TRUE(qualifies(titled, opt));
  QualifyOptions only_subs;
  only_subs.submissions_only = true;
  EXPECT_FALSE(qualifies(comment("c", "u", "r", 1, words(100), "t3_a"), only_subs));
}

TEST(PriorPosts, StrictTimestampRule) {
  Corpus c({sub("a", "u", "Fitness", 50, words(90)), sub("b", "u", "endo", 100, "diagnosed"),
            sub("c", "u", "Health", 100, words(90)), sub("d", "u", "Health", 150, words(90)),
            sub("e", "u", "Health", 99, words(90))});
  const SubredditSet cond{"endo"};
  std::vector<std::string> ids;
  for (const Post* p : prior_posts(*c.user("u"), cond)) ids.push_back(p->id);
  EXPECT_EQ(ids, (std::vector<std::string>{"a", "e"}));
}

TEST(PriorPosts, NoConditionPostsKeepsAllQualifying) {
  Corpus c({sub("a", "u", "Fitness", 50, words(90)), sub("b", "u", "Health", 10, words(12)),
            sub("c", "u", "Health", 900, words(80))});
  std::vector<std::string> ids;
  for (const Post* p : prior_posts(*c.user("u"), SubredditSet{"endo"})) ids.push_back(p->id);
  EXPECT_EQ(ids, (std::vector<std::string>{"a", "c"}));
}

TEST(PriorPostsProperty, RemovingPostsNeverAddsPriorPosts) {
  qgen::Rng rng(502);
  const SubredditSet cond{"endo"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Post> posts;
    const int n = 2 + static_cast<int>(rng.below(10));
    for (int i = 0; i < n; ++i) {
      const bool in_cond = rng.bernoulli(0.3);
      posts.push_back(sub("p" + std::to_string(i), "u", in_cond ? "endo" : "Health",
                          1 + static_cast<std::int64_t>(rng.below(20)),
                          words(75 + static_cast<int>(rng.below(10)))));
    }
    auto ids = [&](std::vector<Post> ps) {
      Corpus c(std::move(ps));
      std::set<std::string> out;
      for (const Post* p : prior_posts(*c.user("u"), cond)) out.insert(p->id);
      return out;
    };
    const auto full = ids(posts);
    // Only non-condition posts are removed; dropping the first condition
    // post moves the cutoff later and can legitimately add prior posts.
    std::vector<std::size_t> removable;
    for (std::size_t i = 0; i < posts.size(); ++i) {
      if (!cond.contains(posts[i].subreddit)) removable.push_back(i);
    }
    if (removable.empty()) continue;
    auto fewer = posts;
    fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(removable[rng.below(removable.size())]));
    if (fewer.empty()) continue;
    for (const auto& id : ids(fewer)) EXPECT_TRUE(full.count(id)) << id;
  }
}

TEST(SubredditSet, CaseAndPrefixInsensitive) {
  const SubredditSet s{"/r/Endo", "endometriosis"};
  EXPECT_TRUE(s.contains("endo"));
  EXPECT_TRUE(s.contains("r/ENDOMETRIOSIS/"));
  EXPECT_FALSE(s.contains("endo2"));
}

TEST(Corpus, IndexesUsersRepliesAndDuplicates) {
  Corpus c({sub("s1", "alice", "endo", 10, "two words"), sub("s1", "alice", "endo", 10, "dup"),
            comment("c1", "bob", "endo", 11, "one two three", "t3_s1"),
            comment("c2", "alice", "endo", 12, "self reply", "t1_c1"),
            comment("c3", "alice", "endo", 13, "own post", "t3_s1"),
            comment("c4", "bob", "endo", 14, "orphan", "t3_missing")});
  EXPECT_EQ(c.duplicates_dropped(), 1u);
  ASSERT_NE(c.user("alice"), nullptr);
  const auto a = c.user("alice")->counts_in(SubredditSet{"endo"});
  EXPECT_EQ(a, (InteractionCounts{1, 2, 1, 6}));
  const auto b = c.user("bob")->counts_in(SubredditSet{"endo"});
  EXPECT_EQ(b.replies_received, 1);
  EXPECT_EQ(c.user("nobody"), nullptr);
}

TEST(Corpus, SaveLoadRoundTrip) {
  const std::string path = ::testing::TempDir() + "/corpus_roundtrip.jsonl";
  Corpus c({sub("s1", "a", "x", 10, "b"), comment("c1", "b", "x", 11, "c", "t3_s1")});
  c.save(path);
  const auto d = Corpus::load(path);
  EXPECT_EQ(d.posts(), c.posts());
  EXPECT_EQ(d.user("a")->by_subreddit.at("x").replies_received, 1);
}

std::vector<const UserRecord*> users_of(const Corpus& c) {
  std::vector<const UserRecord*> out;
  for (const auto& [_, u] : c.users()) out.push_back(&u);
  return out;
}

TEST(Shortlist, RankedByDistinctPriorUsers) {
  std::vector<Post> posts;
  for (int u = 0; u < 3; ++u) {
    const std::string a = "u" + std::to_string(u);
    posts.push_back(sub(a + "a", a, "AskDocs", 10, words(90)));
    posts.push_back(sub(a + "b", a, "AskDocs", 11, words(90)));
    posts.push_back(sub(a + "e", a, "endo", 100, "hi"));
  }
  posts.push_back(sub("u0s", "u0", "sex", 20, words(90)));
  posts.push_back(sub("u1late", "u1", "late", 200, words(90)));
  posts.push_back(sub("u1short", "u1", "short", 20, words(10)));
  Corpus c(std::move(posts));
  const auto s = build_shortlist("endometriosis", users_of(c), SubredditSet{"endo"});
  ASSERT_EQ(s.entries.size(), 2u);
  EXPECT_EQ(s.entries[0].subreddit, "AskDocs");
  EXPECT_EQ(s.entries[0].users, 3);
  EXPECT_EQ(s.entries[1].subreddit, "sex");
  EXPECT_EQ(s.entries[1].users, 1);
  EXPECT_QGEN_ERROR(build_shortlist("x", {}, SubredditSet{"endo"}), ErrorCode::kInvalidArgument,
                    "empty");
}

TEST(Shortlist, TruncatesToThirteen) {
  std::vector<Post> posts;
  for (int s = 0; s < 15; ++s) {
    for (int u = 0; u <= s; ++u) {
      const std::string a = "u" + std::to_string(u);
      posts.push_back(sub("p" + std::to_string(s) + "_" + a, a, "sub" + std::to_string(s), 10, words(80)));
    }
  }
  Corpus c(std::move(posts));
  const auto s = build_shortlist("x", users_of(c), SubredditSet{"endo"});
  EXPECT_EQ(s.entries.size(), 13u);
  EXPECT_EQ(s.entries.front().subreddit, "sub14");
  std::stringstream ss;
  s.write_tsv(ss);
  const auto back = SubredditShortlist::read_tsv(ss);
  EXPECT_EQ(back.condition, "x");
  ASSERT_EQ(back.entries.size(), 13u);
  EXPECT_EQ(back.entries[3].users, s.entries[3].users);
}

TEST(ShortlistProperty, InvariantUnderPostOrder) {
  qgen::Rng rng(503);
  std::vector<Post> posts;
  for (int i = 0; i < 200; ++i) {
    const std::string a = "u" + std::to_string(rng.below(30));
    const bool cond = rng.bernoulli(0.2);
    posts.push_back(sub("p" + std::to_string(i), a, cond ? "endo" : "s" + std::to_string(rng.below(20)),
                        1 + static_cast<std::int64_t>(rng.below(50)), words(70 + static_cast<int>(rng.below(20)))));
  }
  const Corpus c1(posts);
  const auto base = build_shortlist("x", users_of(c1), SubredditSet{"endo"});
  for (int trial = 0; trial < 10; ++trial) {
    rng.shuffle(posts);
    const Corpus c2(posts);
    const auto s = build_shortlist("x", users_of(c2), SubredditSet{"endo"});
    ASSERT_EQ(s.entries.size(), base.entries.size());
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
      EXPECT_EQ(s.entries[i].subreddit, base.entries[i].subreddit);
      EXPECT_EQ(s.entries[i].users, base.entries[i].users);
    }
  }
}

TEST(Relevance, SamplingAndAnnotations) {
  std::vector<Post> posts;
  for (int i = 0; i < 4; ++i) posts.push_back(sub("a" + std::to_string(i), "u", "AskDocs", 10 + i, words(85)));
  for (int i = 0; i < 20; ++i) posts.push_back(sub("b" + std::to_string(i), "u", "Health", 10 + i, words(85)));
  posts.push_back(sub("e", "u", "endo", 1000, "hi"));
  Corpus c(std::move(posts));
  const auto users = users_of(c);
  auto s = build_shortlist("x", users, SubredditSet{"endo"});
  const auto rows = sample_for_relevance(s, users, SubredditSet{"endo"}, 10, 7);
  int askdocs = 0, health = 0;
  for (const auto& r : rows) (r.subreddit == "AskDocs" ? askdocs : health) += 1;
  EXPECT_EQ(askdocs, 4);
  EXPECT_EQ(health, 10);

  std::stringstream a, b;
  write_annotation_sheet(a, rows);
  write_annotation_sheet(b, sample_for_relevance(s, users, SubredditSet{"endo"}, 10, 7));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str().find(kRelevanceQuestion), std::string::npos);

  auto filled = read_annotation_sheet(a);
  ASSERT_EQ(filled.size(), rows.size());
  for (auto& r : filled) r.answer = r.subreddit == "AskDocs" ? "no" : "";
  for (auto& r : filled) {
    if (r.subreddit == "Health") {
      r.answer = "yes";
      break;
    }
  }
  apply_annotations(s, filled);
  EXPECT_TRUE(s.relevant().contains("Health"));
  EXPECT_FALSE(s.relevant().contains("AskDocs"));
  EXPECT_TRUE(s.unannotated().empty());
}

}  // namespace
