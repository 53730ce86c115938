#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace qgen::corpus {

enum class PostKind { kSubmission, kComment };

struct Post {
  std::string id;
  std::string author;
  std::string subreddit;
  std::int64_t created_utc = 0;
  PostKind kind = PostKind::kSubmission;
  std::string title;  // empty for comments
  std::string body;
  std::optional<std::string> parent_id;

  // Title and body joined; what word counts and symptom matching see.
  std::string text() const;
  int words() const;
  bool operator==(const Post&) const = default;
};

struct ParseStats {
  std::size_t lines = 0;
  std::size_t parsed = 0;
  std::size_t malformed = 0;
};

// Streams Pushshift-style line-delimited JSON. Malformed lines are skipped and
// counted; more than half malformed raises kFormat "format mismatch".
ParseStats parse_dump(const std::string& path, PostKind format,
                      const std::function<void(Post&&)>& sink);
ParseStats parse_dump(std::istream& in, PostKind format,
                      const std::function<void(Post&&)>& sink);

// Inverse of parse_dump for well-formed posts of one kind.
void write_dump(std::ostream& out, const std::vector<Post>& posts, PostKind format);

// Case-insensitive set of subreddit names; "/r/" prefixes are ignored.
class SubredditSet {
 public:
  SubredditSet() = default;
  SubredditSet(std::initializer_list<std::string> names);
  explicit SubredditSet(const std::vector<std::string>& names);

  bool contains(const std::string& name) const;
  bool empty() const { return names_.empty(); }
  const std::set<std::string>& names() const { return names_; }

  static std::string key(const std::string& name);

 private:
  std::set<std::string> names_;
};

struct InteractionCounts {
  int submissions = 0;
  int comments = 0;
  int replies_received = 0;
  int words = 0;

  InteractionCounts& operator+=(const InteractionCounts& o);
  bool operator==(const InteractionCounts&) const = default;
};

struct UserRecord {
  std::string author;
  std::vector<const Post*> posts;  // ascending (created_utc, id)
  std::map<std::string, InteractionCounts> by_subreddit;

  int total_posts() const { return static_cast<int>(posts.size()); }
  InteractionCounts counts_in(const SubredditSet& subs) const;
  bool posted_in(const SubredditSet& subs) const;
  std::optional<std::int64_t> first_post_in(const SubredditSet& subs) const;
};

// Owns posts and the per-author index built over them. Immutable after
// construction; moving keeps UserRecord post pointers valid.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Post> posts);
  Corpus(const Corpus&) = delete;
  Corpus& operator=(const Corpus&) = delete;
  Corpus(Corpus&&) = default;
  Corpus& operator=(Corpus&&) = default;

  const std::vector<Post>& posts() const { return *posts_; }
  const std::map<std::string, UserRecord>& users() const { return users_; }
  const UserRecord* user(const std::string& author) const;
  std::size_t duplicates_dropped() const { return duplicates_; }

  // Normalized store: one JSON object per line.
  void save(const std::string& path) const;
  static Corpus load(const std::string& path);

 private:
  std::unique_ptr<std::vector<Post>> posts_ = std::make_unique<std::vector<Post>>();
  std::map<std::string, UserRecord> users_;
  std::size_t duplicates_ = 0;
};

struct QualifyOptions {
  int min_words = 80;
  bool submissions_only = false;
};

bool qualifies(const Post& post, const QualifyOptions& options);

// Qualifying posts outside the condition subreddits strictly before the user's
// first condition-subreddit post (all of them when there is none).
std::vector<const Post*> prior_posts(const UserRecord& user, const SubredditSet& condition,
                                     const QualifyOptions& options = {});

enum class Relevance { kUnannotated, kRelevant, kIrrelevant };

struct ShortlistEntry {
  std::string subreddit;
  int users = 0;
  Relevance relevance = Relevance::kUnannotated;
};

struct SubredditShortlist {
  std::string condition;
  std::vector<ShortlistEntry> entries;  // descending users, then name

  SubredditSet relevant() const;
  std::vector<std::string> unannotated() const;

  void write_tsv(std::ostream& out) const;
  static SubredditShortlist read_tsv(std::istream& in);
};

struct ShortlistOptions {
  std::size_t top = 13;
  QualifyOptions qualify;
};

SubredditShortlist build_shortlist(const std::string& condition,
                                   const std::vector<const UserRecord*>& cohort,
                                   const SubredditSet& condition_subs,
                                   const ShortlistOptions& options = {});

inline constexpr const char* kRelevanceQuestion =
    "If you had the problem described in the post, would you consult a doctor?";

struct AnnotationRow {
  std::string subreddit;
  std::string post_id;
  std::string text;
  std::string answer;  // yes / no / empty
};

// Seeded sample of up to n_per qualifying prior posts per shortlisted
// subreddit, drawn from the cohort.
std::vector<AnnotationRow> sample_for_relevance(const SubredditShortlist& shortlist,
                                                const std::vector<const UserRecord*>& cohort,
                                                const SubredditSet& condition_subs,
                                                std::size_t n_per, std::uint64_t seed,
                                                const QualifyOptions& options = {});

void write_annotation_sheet(std::ostream& out, const std::vector<AnnotationRow>& rows);
std::vector<AnnotationRow> read_annotation_sheet(std::istream& in);

// Any "yes" marks a subreddit relevant; otherwise any "no" marks it
// irrelevant; otherwise it stays unannotated.
void apply_annotations(SubredditShortlist& shortlist, const std::vector<AnnotationRow>& rows);

}  // namespace qgen::corpus
