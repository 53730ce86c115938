#include "qgen/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "qgen/error.hpp"
#include "qgen/random.hpp"
#include "qgen/text.hpp"

namespace qgen::corpus {

using json = nlohmann::json;

std::string Post::text() const {
  if (title.empty()) return body;
  if (body.empty()) return title;
  return title + "\n" + body;
}

int Post::words() const { return text::word_count(title) + text::word_count(body); }

namespace {

std::optional<std::string> string_field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

std::optional<std::int64_t> time_field(const json& j) {
  auto it = j.find("created_utc");
  if (it == j.end()) return std::nullopt;
  if (it->is_number_integer()) return it->get<std::int64_t>();
  if (it->is_number_float()) return static_cast<std::int64_t>(it->get<double>());
  if (it->is_string()) {
    try {
      std::size_t used = 0;
      const auto s = it->get<std::string>();
      const auto v = std::stoll(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

std::string strip_fullname(const std::string& id) {
  // Reddit fullnames carry a type prefix: t1_ comment, t3_ submission.
  if (id.size() > 3 && id[0] == 't' && id[2] == '_') return id.substr(3);
  return id;
}

std::optional<Post> decode(const std::string& line, PostKind format) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  Post p;
  p.kind = format;
  auto id = string_field(j, "id");
  auto author = string_field(j, "author");
  auto sub = string_field(j, "subreddit");
  auto t = time_field(j);
  if (!id || id->empty() || !author || author->empty() || !sub || sub->empty() || !t || *t <= 0) {
    return std::nullopt;
  }
  p.id = *id;
  p.author = *author;
  p.subreddit = *sub;
  p.created_utc = *t;
  if (format == PostKind::kSubmission) {
    p.title = string_field(j, "title").value_or("");
    p.body = string_field(j, "selftext").value_or("");
  } else {
    auto body = string_field(j, "body");
    auto parent = string_field(j, "parent_id");
    if (!body || !parent || parent->empty()) return std::nullopt;
    p.body = *body;
    p.parent_id = *parent;
  }
  return p;
}

}  // namespace

ParseStats parse_dump(std::istream& in, PostKind format, const std::function<void(Post&&)>& sink) {
  ParseStats stats;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    ++stats.lines;
    auto post = decode(line, format);
    if (!post) {
      ++stats.malformed;
      continue;
    }
    ++stats.parsed;
    sink(std::move(*post));
  }
  if (stats.lines > 0 && stats.malformed * 2 > stats.lines) {
    fail(ErrorCode::kFormat, "format mismatch: " + std::to_string(stats.malformed) + " of " +
                                 std::to_string(stats.lines) + " lines malformed");
  }
  return stats;
}

ParseStats parse_dump(const std::string& path, PostKind format,
                      const std::function<void(Post&&)>& sink) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read dump file: " + path);
  try {
    return parse_dump(in, format, sink);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void write_dump(std::ostream& out, const std::vector<Post>& posts, PostKind format) {
  for (const auto& p : posts) {
    json j = {{"id", p.id}, {"author", p.author}, {"subreddit", p.subreddit},
              {"created_utc", p.created_utc}};
    if (format == PostKind::kSubmission) {
      j["title"] = p.title;
      j["selftext"] = p.body;
    } else {
      j["body"] = p.body;
      j["parent_id"] = p.parent_id.value_or("");
    }
    out << j.dump() << '\n';
  }
}

SubredditSet::SubredditSet(std::initializer_list<std::string> names) {
  for (const auto& n : names) names_.insert(key(n));
}

SubredditSet::SubredditSet(const std::vector<std::string>& names) {
  for (const auto& n : names) {
    if (!text::trim(n).empty()) names_.insert(key(n));
  }
}

std::string SubredditSet::key(const std::string& name) {
  std::string s = text::lower(text::trim(name));
  if (s.rfind("/r/", 0) == 0) s = s.substr(3);
  if (s.rfind("r/", 0) == 0) s = s.substr(2);
  while (!s.empty() && s.back() == '/') s.pop_back();
  return s;
}

bool SubredditSet::contains(const std::string& name) const { return names_.count(key(name)) > 0; }

InteractionCounts& InteractionCounts::operator+=(const InteractionCounts& o) {
  submissions += o.submissions;
  comments += o.comments;
  replies_received += o.replies_received;
  words += o.words;
  return *this;
}

InteractionCounts UserRecord::counts_in(const SubredditSet& subs) const {
  InteractionCounts total;
  for (const auto& [name, c] : by_subreddit) {
    if (subs.contains(name)) total += c;
  }
  return total;
}

bool UserRecord::posted_in(const SubredditSet& subs) const {
  return std::any_of(posts.begin(), posts.end(),
                     [&](const Post* p) { return subs.contains(p->subreddit); });
}

std::optional<std::int64_t> UserRecord::first_post_in(const SubredditSet& subs) const {
  std::optional<std::int64_t> first;
  for (const Post* p : posts) {
    if (subs.contains(p->subreddit) && (!first || p->created_utc < *first)) first = p->created_utc;
  }
  return first;
}

Corpus::Corpus(std::vector<Post> posts) {
  std::unordered_map<std::string, std::size_t> by_id;
  posts_->reserve(posts.size());
  for (auto& p : posts) {
    if (by_id.count(p.id)) {
      ++duplicates_;
      continue;
    }
    by_id.emplace(p.id, posts_->size());
    posts_->push_back(std::move(p));
  }
  if (duplicates_ > 0) spdlog::warn("dropped {} posts with duplicate ids", duplicates_);

  for (const auto& p : *posts_) {
    auto& u = users_[p.author];
    u.author = p.author;
    u.posts.push_back(&p);
    auto& c = u.by_subreddit[p.subreddit];
    (p.kind == PostKind::kSubmission ? c.submissions : c.comments) += 1;
    c.words += p.words();
  }
  // Replies are resolved only against posts present in this corpus.
  for (const auto& p : *posts_) {
    if (p.kind != PostKind::kComment || !p.parent_id) continue;
    auto it = by_id.find(strip_fullname(*p.parent_id));
    if (it == by_id.end()) continue;
    const Post& parent = (*posts_)[it->second];
    if (parent.author == p.author) continue;
    users_[parent.author].by_subreddit[parent.subreddit].replies_received += 1;
  }
  for (auto& [_, u] : users_) {
    std::sort(u.posts.begin(), u.posts.end(), [](const Post* a, const Post* b) {
      return a->created_utc != b->created_utc ? a->created_utc < b->created_utc : a->id < b->id;
    });
  }
}

const UserRecord* Corpus::user(const std::string& author) const {
  auto it = users_.find(author);
  return it == users_.end() ? nullptr : &it->second;
}

void Corpus::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write corpus store: " + path);
  for (const auto& p : *posts_) {
    json j = {{"id", p.id},
              {"author", p.author},
              {"subreddit", p.subreddit},
              {"created_utc", p.created_utc},
              {"kind", p.kind == PostKind::kSubmission ? "submission" : "comment"},
              {"title", p.title},
              {"body", p.body}};
    if (p.parent_id) j["parent_id"] = *p.parent_id;
    out << j.dump() << '\n';
  }
}

Corpus Corpus::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read corpus store: " + path);
  std::vector<Post> posts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Post p;
      p.id = j.at("id").get<std::string>();
      p.author = j.at("author").get<std::string>();
      p.subreddit = j.at("subreddit").get<std::string>();
      p.created_utc = j.at("created_utc").get<std::int64_t>();
      p.kind = j.at("kind").get<std::string>() == "comment" ? PostKind::kComment
                                                            : PostKind::kSubmission;
      p.title = j.at("title").get<std::string>();
      p.body = j.at("body").get<std::string>();
      if (j.contains("parent_id")) p.parent_id = j.at("parent_id").get<std::string>();
      posts.push_back(std::move(p));
    } catch (const json::exception& e) {
      fail(ErrorCode::kFormat, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Corpus(std::move(posts));
}

bool qualifies(const Post& post, const QualifyOptions& options) {
  if (options.submissions_only && post.kind != PostKind::kSubmission) return false;
  return post.words() >= options.min_words;
}

std::vector<const Post*> prior_posts(const UserRecord& user, const SubredditSet& condition,
                                     const QualifyOptions& options) {
  const auto cutoff = user.first_post_in(condition);
  std::vector<const Post*> out;
  for (const Post* p : user.posts) {
    if (condition.contains(p->subreddit)) continue;
    if (cutoff && p->created_utc >= *cutoff) continue;
    if (!qualifies(*p, options)) continue;
    out.push_back(p);
  }
  return out;
}

SubredditSet SubredditShortlist::relevant() const {
  std::vector<std::string> names;
  for (const auto& e : entries) {
    if (e.relevance == Relevance::kRelevant) names.push_back(e.subreddit);
  }
  return SubredditSet(names);
}

std::vector<std::string> SubredditShortlist::unannotated() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.relevance == Relevance::kUnannotated) out.push_back(e.subreddit);
  }
  return out;
}

namespace {

const char* relevance_name(Relevance r) {
  switch (r) {
    case Relevance::kRelevant: return "relevant";
    case Relevance::kIrrelevant: return "irrelevant";
    case Relevance::kUnannotated: return "unannotated";
  }
  return "unannotated";
}

}  // namespace

void SubredditShortlist::write_tsv(std::ostream& out) const {
  out << "# condition=" << condition << '\n';
  out << "subreddit\tusers\trelevance\n";
  for (const auto& e : entries) {
    out << e.subreddit << '\t' << e.users << '\t' << relevance_name(e.relevance) << '\n';
  }
}

SubredditShortlist SubredditShortlist::read_tsv(std::istream& in) {
  SubredditShortlist s;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# condition=", 0) == 0) {
      s.condition = line.substr(12);
      continue;
    }
    if (line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    auto f = text::split(line, '\t');
    if (f.size() != 3) fail(ErrorCode::kFormat, "shortlist: malformed row '" + line + "'");
    ShortlistEntry e{f[0], std::stoi(f[1]), Relevance::kUnannotated};
    if (f[2] == "relevant") e.relevance = Relevance::kRelevant;
    if (f[2] == "irrelevant") e.relevance = Relevance::kIrrelevant;
    s.entries.push_back(std::move(e));
  }
  return s;
}

SubredditShortlist build_shortlist(const std::string& condition,
                                   const std::vector<const UserRecord*>& cohort,
                                   const SubredditSet& condition_subs,
                                   const ShortlistOptions& options) {
  if (cohort.empty()) fail(ErrorCode::kInvalidArgument, "build_shortlist: cohort is empty");
  std::map<std::string, std::set<std::string>> users_by_sub;
  for (const UserRecord* u : cohort) {
    for (const Post* p : prior_posts(*u, condition_subs, options.qualify)) {
      users_by_sub[p->subreddit].insert(u->author);
    }
  }
  SubredditShortlist s;
  s.condition = condition;
  for (const auto& [name, users] : users_by_sub) {
    s.entries.push_back({name, static_cast<int>(users.size()), Relevance::kUnannotated});
  }
  std::sort(s.entries.begin(), s.entries.end(), [](const auto& a, const auto& b) {
    return a.users != b.users ? a.users > b.users : a.subreddit < b.subreddit;
  });
  if (s.entries.size() > options.top) s.entries.resize(options.top);
  return s;
}

std::vector<AnnotationRow> sample_for_relevance(const SubredditShortlist& shortlist,
                                                const std::vector<const UserRecord*>& cohort,
                                                const SubredditSet& condition_subs,
                                                std::size_t n_per, std::uint64_t seed,
                                                const QualifyOptions& options) {
  std::map<std::string, std::vector<const Post*>> candidates;
  for (const UserRecord* u : cohort) {
    for (const Post* p : prior_posts(*u, condition_subs, options)) {
      candidates[p->subreddit].push_back(p);
    }
  }
  Rng rng(seed);
  std::vector<AnnotationRow> rows;
  for (const auto& e : shortlist.entries) {
    auto& pool = candidates[e.subreddit];
    std::sort(pool.begin(), pool.end(), [](const Post* a, const Post* b) { return a->id < b->id; });
    for (std::size_t i : rng.sample(pool.size(), n_per)) {
      rows.push_back({e.subreddit, pool[i]->id, pool[i]->text(), ""});
    }
  }
  return rows;
}

void write_annotation_sheet(std::ostream& out, const std::vector<AnnotationRow>& rows) {
  out << "# question: " << kRelevanceQuestion << '\n';
  out << "subreddit\tpost_id\ttext\tanswer\n";
  for (const auto& r : rows) {
    out << r.subreddit << '\t' << r.post_id << '\t' << text::tsv_escape(r.text) << '\t'
        << r.answer << '\n';
  }
}

std::vector<AnnotationRow> read_annotation_sheet(std::istream& in) {
  std::vector<AnnotationRow> rows;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    auto f = text::split(line, '\t');
    if (f.size() < 3 || f.size() > 4) {
      fail(ErrorCode::kFormat, "annotation sheet: malformed row '" + line.substr(0, 60) + "'");
    }
    AnnotationRow r{f[0], f[1], f[2], f.size() == 4 ? text::lower(text::trim(f[3])) : ""};
    if (!r.answer.empty() && r.answer != "yes" && r.answer != "no") {
      fail(ErrorCode::kFormat, "annotation sheet: answer must be yes, no or blank, got '" +
                                   r.answer + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void apply_annotations(SubredditShortlist& shortlist, const std::vector<AnnotationRow>& rows) {
  for (auto& e : shortlist.entries) {
    bool yes = false;
    bool no = false;
    for (const auto& r : rows) {
      if (SubredditSet::key(r.subreddit) != SubredditSet::key(e.subreddit)) continue;
      yes = yes || r.answer == "yes";
      no = no || r.answer == "no";
    }
    e.relevance = yes ? Relevance::kRelevant : no ? Relevance::kIrrelevant : Relevance::kUnannotated;
  }
}

}  // namespace qgen::corpus
