#include "qgen/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "qgen/corpus.hpp"
#include "qgen/error.hpp"
#include "qgen/random.hpp"
#include "qgen/text.hpp"

namespace qgen::synth {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

// Filler vocabulary; shares no token with any default symptom phrase.
const std::vector<std::string> kFiller = {
    "today",   "really",  "think",  "maybe",   "week",    "work",    "friend",  "help",
    "anyone",  "know",    "thanks", "advice",  "started", "lately",  "going",   "still",
    "bit",     "home",    "trying", "months",  "weekend", "coffee",  "walk",    "dog",
    "family",  "weather", "garden", "recipe",  "book",    "music",   "plans",   "morning",
    "evening", "office",  "school", "car",     "city",    "water",   "dinner",  "movie",
    "job",     "partner", "kids",   "holiday", "train",   "phone",   "game",    "project",
    "class",   "shop",    "street", "friends", "story",   "idea",    "change",  "routine",
    "simple",  "quiet",   "busy",   "early",   "late",    "usually", "honestly", "anyway"};

constexpr std::int64_t kEpoch = 1500000000;
constexpr std::int64_t kUserSpan = 10000;

std::string filler(Rng& rng, int words) {
  std::vector<std::string> out;
  for (int i = 0; i < words; ++i) out.push_back(kFiller[rng.below(kFiller.size())]);
  return text::join(out, " ");
}

std::vector<std::string> split_list(const std::string& s, char delim) {
  std::vector<std::string> out;
  for (const auto& part : text::split(s, delim)) {
    auto t = text::trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

struct Writer {
  std::vector<corpus::Post> submissions;
  std::vector<corpus::Post> comments;
  int next_id = 0;

  corpus::Post& submit(const std::string& author, const std::string& sub, std::int64_t t,
                       std::string title, std::string body) {
    corpus::Post p;
    p.id = fmt::format("s{:06d}", next_id++);
    p.author = author;
    p.subreddit = sub;
    p.created_utc = t;
    p.title = std::move(title);
    p.body = std::move(body);
    submissions.push_back(std::move(p));
    return submissions.back();
  }

  void comment(const std::string& author, const std::string& sub, std::int64_t t,
               const std::string& parent, std::string body) {
    corpus::Post p;
    p.id = fmt::format("c{:06d}", next_id++);
    p.author = author;
    p.subreddit = sub;
    p.created_utc = t;
    p.kind = corpus::PostKind::kComment;
    p.body = std::move(body);
    p.parent_id = "t3_" + parent;
    comments.push_back(std::move(p));
  }
};

// Symptom phrases one user mentions in prior posts.
std::vector<std::string> draw_mentions(const SynthSpec& spec, Rng& rng, bool condition) {
  std::vector<std::string> out;
  for (const auto& g : spec.groups) {
    if (g.mention_all) {
      for (const auto& ph : g.phrases) {
        if (rng.bernoulli(g.base)) out.push_back(ph);
      }
      continue;
    }
    const double p = condition ? condition_rate(spec, g) : control_rate(spec, g);
    if (rng.bernoulli(p)) out.push_back(g.phrases[rng.below(g.phrases.size())]);
  }
  return out;
}

// Prior posts spread over the general subreddits, each at least 85 words.
void write_prior_posts(const SynthSpec& spec, Rng& rng, Writer& w, const std::string& author,
                       std::int64_t t0, const std::vector<std::string>& mentions) {
  const int n = spec.prior_posts_min +
                static_cast<int>(rng.below(
                    static_cast<std::uint64_t>(spec.prior_posts_max - spec.prior_posts_min + 1)));
  std::vector<std::vector<std::string>> per_post(static_cast<std::size_t>(n));
  for (const auto& m : mentions) per_post[rng.below(static_cast<std::uint64_t>(n))].push_back(m);
  for (int j = 0; j < n; ++j) {
    std::string body = filler(rng, 85 + static_cast<int>(rng.below(30)));
    for (const auto& m : per_post[static_cast<std::size_t>(j)]) {
      body += " and i have had " + m + " for a while " + filler(rng, 5);
    }
    const auto& sub = spec.other_subreddits[rng.below(spec.other_subreddits.size())];
    w.submit(author, sub, t0 + 100 * j, filler(rng, 4), std::move(body));
  }
}

}  // namespace

std::vector<SymptomGroup> SynthSpec::default_groups() {
  return {
      {{"pain", "aching", "soreness"}, false, true, 0.9},
      {{"weight loss", "lose weight", "losing weight"}, true, false, 0.3},
      {{"bloating", "bloated", "swollen belly"}, true, false, 0.3},
      {{"anxiety", "anxious", "panic attacks"}, false, false, 0.2},
      {{"fatigue", "exhaustion", "always tired"}, false, false, 0.2},
      {{"headache", "migraines", "head pounding"}, false, false, 0.2},
      {{"nausea", "nauseous", "feel sick"}, false, false, 0.2},
      {{"stiff joints", "joint stiffness", "achy joints"}, false, false, 0.2},
      {{"heavy periods", "painful periods", "period cramps"}, true, false, 0.3},
      {{"insomnia", "trouble sleeping", "sleepless nights"}, false, false, 0.2},
  };
}

double condition_rate(const SynthSpec& spec, const SymptomGroup& g) {
  if (!g.signal) return g.base;
  return spec.signal_base + spec.strength * (1.0 - spec.signal_base);
}

double control_rate(const SynthSpec& spec, const SymptomGroup& g) {
  if (!g.signal) return g.base;
  return spec.signal_base * (1.0 - spec.strength);
}

void SynthSpec::validate() const {
  auto prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::kConfig, fmt::format("{} must lie in [0, 1]", what));
  };
  prob(strength, "strength");
  prob(signal_base, "signal_base");
  if (n_condition < 1 || n_control < 1) fail(ErrorCode::kConfig, "need condition and control users");
  if (n_noise < 0 || n_distractor < 0) fail(ErrorCode::kConfig, "user counts must be >= 0");
  if (n_labeled < 4 || n_dual < 0 || n_dual > n_labeled) {
    fail(ErrorCode::kConfig, "need n_labeled >= 4 and 0 <= n_dual <= n_labeled");
  }
  if (prior_posts_min < 1 || prior_posts_max < prior_posts_min) {
    fail(ErrorCode::kConfig, "bad prior post range");
  }
  if (condition_subreddits.empty() || other_subreddits.empty()) {
    fail(ErrorCode::kConfig, "subreddit lists must be nonempty");
  }
  if (groups.empty()) fail(ErrorCode::kConfig, "no symptom groups");
  if (dimension != 0 && dimension < static_cast<int>(groups.size())) {
    fail(ErrorCode::kConfig, "dimension must be 0 or at least the number of groups");
  }
  std::map<std::string, std::size_t> owner;
  std::set<std::string> filler(kFiller.begin(), kFiller.end());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    prob(groups[g].base, "group base rate");
    if (groups[g].phrases.empty()) fail(ErrorCode::kConfig, "empty symptom group");
    for (const auto& ph : groups[g].phrases) {
      for (const auto& tok : text::tokens(ph)) {
        if (filler.count(tok)) fail(ErrorCode::kConfig, "symptom word '" + tok + "' is a filler word");
        auto [it, fresh] = owner.try_emplace(tok, g);
        if (!fresh && it->second != g) {
          fail(ErrorCode::kConfig, "symptom word '" + tok + "' appears in two groups");
        }
      }
    }
  }
}

SynthSpec SynthSpec::load(const std::string& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  SynthSpec spec;
  static const std::set<std::string> kKnown = {
      "condition",  "condition_subreddits", "other_subreddits", "medical_subreddit",
      "n_condition", "n_control",           "n_noise",          "n_distractor",
      "n_labeled",  "n_dual",               "strength",         "signal_base",
      "prior_posts_min", "prior_posts_max", "dimension",        "vector_noise",
      "seed"};
  for (const auto& [section, body] : tree) {
    if (section != "synth" && section != "groups") {
      fail(ErrorCode::kConfig, path + ": unknown section [" + section + "]");
    }
  }
  try {
    if (auto s = tree.get_child_optional("synth")) {
      for (const auto& [key, _] : *s) {
        if (!kKnown.count(key)) fail(ErrorCode::kConfig, path + ": unknown key synth." + key);
      }
      spec.condition = s->get("condition", spec.condition);
      if (auto v = s->get_optional<std::string>("condition_subreddits")) {
        spec.condition_subreddits = split_list(*v, ',');
      }
      if (auto v = s->get_optional<std::string>("other_subreddits")) {
        spec.other_subreddits = split_list(*v, ',');
      }
      spec.medical_subreddit = s->get("medical_subreddit", spec.medical_subreddit);
      spec.n_condition = s->get("n_condition", spec.n_condition);
      spec.n_control = s->get("n_control", spec.n_control);
      spec.n_noise = s->get("n_noise", spec.n_noise);
      spec.n_distractor = s->get("n_distractor", spec.n_distractor);
      spec.n_labeled = s->get("n_labeled", spec.n_labeled);
      spec.n_dual = s->get("n_dual", spec.n_dual);
      spec.strength = s->get("strength", spec.strength);
      spec.signal_base = s->get("signal_base", spec.signal_base);
      spec.prior_posts_min = s->get("prior_posts_min", spec.prior_posts_min);
      spec.prior_posts_max = s->get("prior_posts_max", spec.prior_posts_max);
      spec.dimension = s->get("dimension", spec.dimension);
      spec.vector_noise = s->get("vector_noise", spec.vector_noise);
      spec.seed = s->get("seed", spec.seed);
    }
    // [groups] name = kind; phrase | phrase ...   (kind: signal, plain, common)
    if (auto g = tree.get_child_optional("groups")) {
      spec.groups.clear();
      for (const auto& [name, node] : *g) {
        const auto parts = split_list(node.data(), ';');
        if (parts.size() != 2) {
          fail(ErrorCode::kConfig, path + ": group " + name + ": expected 'kind; phrase|phrase'");
        }
        SymptomGroup grp;
        grp.phrases = split_list(parts[1], '|');
        for (auto& ph : grp.phrases) ph = text::normalize(ph);
        if (parts[0] == "signal") {
          grp.signal = true;
          grp.base = spec.signal_base;
        } else if (parts[0] == "common") {
          grp.mention_all = true;
          grp.base = 0.9;
        } else if (parts[0] != "plain") {
          fail(ErrorCode::kConfig, path + ": group " + name + ": unknown kind '" + parts[0] + "'");
        }
        spec.groups.push_back(std::move(grp));
      }
    }
  } catch (const pt::ptree_bad_data& e) {
    fail(ErrorCode::kConfig, path + ": " + e.what());
  }
  spec.validate();
  return spec;
}

SynthOutput generate(const SynthSpec& spec, const std::string& dir) {
  spec.validate();
  fs::create_directories(dir);
  Rng rng(spec.seed);
  Writer w;

  int user_no = 0;
  auto next_user = [&] { return fmt::format("u{:05d}", user_no++); };
  const auto& cond_sub = spec.condition_subreddits;

  std::vector<std::string> condition_users, noise_users;
  std::vector<std::string> condition_posts;  // submission ids for replies
  for (int i = 0; i < spec.n_condition; ++i) {
    const auto author = next_user();
    const std::int64_t t0 = kEpoch + kUserSpan * user_no;
    write_prior_posts(spec, rng, w, author, t0, draw_mentions(spec, rng, true));
    std::string body = "i was diagnosed with " + spec.condition + " last month " + filler(rng, 30);
    if (rng.bernoulli(0.3)) body += " https://example.org/info/" + std::to_string(i);
    auto& post = w.submit(author, cond_sub[rng.below(cond_sub.size())], t0 + 5000,
                          "finally diagnosed", std::move(body));
    condition_posts.push_back(post.id);
    // After the first condition post; must never reach the profile.
    const auto& late = spec.groups.back().phrases.front();
    w.submit(author, spec.other_subreddits[rng.below(spec.other_subreddits.size())], t0 + 6000,
             filler(rng, 4), filler(rng, 90) + " and now " + late);
    condition_users.push_back(author);
  }
  for (int i = 0; i < spec.n_noise; ++i) {
    const auto author = next_user();
    const std::int64_t t0 = kEpoch + kUserSpan * user_no;
    write_prior_posts(spec, rng, w, author, t0, {});
    const auto& parent = condition_posts[rng.below(condition_posts.size())];
    w.comment(author, cond_sub[rng.below(cond_sub.size())], t0 + 5000, parent,
              "my sister thinks she might have it " + filler(rng, 12));
    w.submit(author, cond_sub[rng.below(cond_sub.size())], t0 + 5100, "question",
             "asking for my sister " + filler(rng, 30));
    noise_users.push_back(author);
  }
  const auto& common = spec.groups.front().phrases;
  for (int i = 0; i < spec.n_control; ++i) {
    const auto author = next_user();
    const std::int64_t t0 = kEpoch + kUserSpan * user_no;
    write_prior_posts(spec, rng, w, author, t0, draw_mentions(spec, rng, false));
    w.submit(author, spec.medical_subreddit, t0 + 5000, "quick question",
             "should i worry about " + common[rng.below(common.size())] + " " + filler(rng, 20));
  }
  for (int i = 0; i < spec.n_distractor; ++i) {
    const auto author = next_user();
    const std::int64_t t0 = kEpoch + kUserSpan * user_no;
    if (i % 2 == 0) {
      // Mentions a symptom but has a single post.
      w.submit(author, spec.medical_subreddit, t0, "quick question",
               "should i worry about " + common.front() + " " + filler(rng, 20));
    } else {
      write_prior_posts(spec, rng, w, author, t0, {});
      w.submit(author, spec.medical_subreddit, t0 + 5000, "quick question", filler(rng, 25));
    }
  }

  // Labels: a third noise users (capped), the rest condition users.
  const int n_lab_noise = std::min(spec.n_noise, spec.n_labeled / 3);
  const int n_lab_cond = std::min(spec.n_condition, spec.n_labeled - n_lab_noise);
  std::vector<std::pair<std::string, int>> labeled;
  for (auto idx : rng.sample(condition_users.size(), static_cast<std::size_t>(n_lab_cond))) {
    labeled.emplace_back(condition_users[idx], 1);
  }
  for (auto idx : rng.sample(noise_users.size(), static_cast<std::size_t>(n_lab_noise))) {
    labeled.emplace_back(noise_users[idx], 0);
  }
  rng.shuffle(labeled);

  SynthOutput out;
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
  out.submissions = path("submissions.jsonl");
  out.comments = path("comments.jsonl");
  out.labels = path("labels.tsv");
  out.lexicon = path("lexicon.tsv");
  out.vectors = path("vectors.txt");
  out.groups = path("groups.tsv");
  out.config = path("pipeline.ini");

  auto open = [](const std::string& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) fail(ErrorCode::kIo, "cannot write " + p);
    return f;
  };
  {
    auto f = open(out.submissions);
    corpus::write_dump(f, w.submissions, corpus::PostKind::kSubmission);
  }
  {
    auto f = open(out.comments);
    corpus::write_dump(f, w.comments, corpus::PostKind::kComment);
  }
  {
    auto f = open(out.labels);
    f << "author\tlabel\tlabeler_id\n";
    for (const auto& [a, l] : labeled) f << a << '\t' << l << "\tL1\n";
    for (int i = 0; i < spec.n_dual && i < static_cast<int>(labeled.size()); ++i) {
      const auto& [a, l] = labeled[static_cast<std::size_t>(i)];
      f << a << '\t' << (rng.bernoulli(0.1) ? 1 - l : l) << "\tL2\n";
    }
  }
  {
    auto f = open(out.lexicon);
    f << "canonical\tsynonym\tsource\n";
    for (const auto& g : spec.groups) {
      for (const auto& ph : g.phrases) f << ph << "\t\tsynth\n";
    }
  }
  {
    auto f = open(out.groups);
    f << "symptom\tgroup\n";
    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
      for (const auto& ph : spec.groups[g].phrases) f << ph << '\t' << g << '\n';
    }
  }
  {
    const std::size_t dim =
        spec.dimension > 0 ? static_cast<std::size_t>(spec.dimension) : spec.groups.size();
    std::map<std::string, std::size_t> word_group;
    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
      for (const auto& ph : spec.groups[g].phrases) {
        for (const auto& tok : text::tokens(ph)) word_group.emplace(tok, g);
      }
    }
    auto f = open(out.vectors);
    for (const auto& [word, g] : word_group) {
      f << word;
      for (std::size_t d = 0; d < dim; ++d) {
        const double center = d == g ? 3.0 : 0.0;
        const double noise = (2.0 * rng.uniform() - 1.0) * spec.vector_noise;
        f << ' ' << fmt::format("{:.6f}", center + noise);
      }
      f << '\n';
    }
  }
  {
    auto f = open(out.config);
    f << "[pipeline]\n"
      << "condition = " << spec.condition << "\n"
      << "seed = " << spec.seed << "\n"
      << "out_dir = out\n\n"
      << "[corpus]\n"
      << "submissions = submissions.jsonl\n"
      << "comments = comments.jsonl\n"
      << "condition_subreddits = " << text::join(spec.condition_subreddits, ", ") << "\n"
      << "assume_relevant = true\n\n"
      << "[cohort]\n"
      << "labels = labels.tsv\n"
      << "medical_subreddit = " << spec.medical_subreddit << "\n\n"
      << "[symptoms]\n"
      << "lexicon = lexicon.tsv\n\n"
      << "[wmd]\n"
      << "embeddings = vectors.txt\n";
  }
  return out;
}

}  // namespace qgen::synth
