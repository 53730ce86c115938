#include "qgen/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "qgen/cluster.hpp"
#include "qgen/cohort.hpp"
#include "qgen/corpus.hpp"
#include "qgen/error.hpp"
#include "qgen/hash.hpp"
#include "qgen/quest.hpp"
#include "qgen/symptoms.hpp"
#include "qgen/text.hpp"
#include "qgen/valid.hpp"
#include "qgen/wmd.hpp"

namespace qgen::pipeline {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using json = nlohmann::json;

namespace {

// ---- config binding --------------------------------------------------------

struct Field {
  const char* section;
  const char* key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

std::string resolve(const PipelineConfig& c, const std::string& raw) {
  if (raw.empty()) return raw;
  fs::path p(raw);
  return (p.is_absolute() ? p : fs::path(c.base_dir) / p).lexically_normal().string();
}

std::string relative(const PipelineConfig& c, const std::string& p) {
  if (p.empty()) return p;
  return fs::path(p).lexically_relative(c.base_dir).generic_string();
}

std::vector<std::string> list(const std::string& v) {
  std::vector<std::string> out;
  for (const auto& part : text::split(v, ',')) {
    auto t = text::trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

template <typename T>
T number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) fail(ErrorCode::kConfig, "config: " + key + ": not a number: '" + v + "'");
  return out;
}

bool boolean(const std::string& key, const std::string& v) {
  const auto s = text::lower(v);
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  fail(ErrorCode::kConfig, "config: " + key + ": not a boolean: '" + v + "'");
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

#define QG_STR(sec, name)                                                                  \
  Field {                                                                                  \
    sec, #name, [](PipelineConfig& c, const std::string& v) { c.name = v; },               \
        [](const PipelineConfig& c) { return c.name; }                                     \
  }
#define QG_PATH(sec, name)                                                                 \
  Field {                                                                                  \
    sec, #name, [](PipelineConfig& c, const std::string& v) { c.name = resolve(c, v); },   \
        [](const PipelineConfig& c) { return relative(c, c.name); }                        \
  }
#define QG_PATHS(sec, name)                                                                \
  Field {                                                                                  \
    sec, #name,                                                                            \
        [](PipelineConfig& c, const std::string& v) {                                      \
          c.name.clear();                                                                  \
          for (const auto& p : list(v)) c.name.push_back(resolve(c, p));                   \
        },                                                                                 \
        [](const PipelineConfig& c) {                                                      \
          std::vector<std::string> r;                                                      \
          for (const auto& p : c.name) r.push_back(relative(c, p));                        \
          return text::join(r, ",");                                                       \
        }                                                                                  \
  }
#define QG_LIST(sec, name)                                                                 \
  Field {                                                                                  \
    sec, #name, [](PipelineConfig& c, const std::string& v) { c.name = list(v); },         \
        [](const PipelineConfig& c) { return text::join(c.name, ","); }                    \
  }
#define QG_INT(sec, name)                                                                  \
  Field {                                                                                  \
    sec, #name, [](PipelineConfig& c, const std::string& v) { c.name = number<int>(#name, v); }, \
        [](const PipelineConfig& c) { return std::to_string(c.name); }                     \
  }
#define QG_DOUBLE(sec, name)                                                               \
  Field {                                                                                  \
    sec, #name,                                                                            \
        [](PipelineConfig& c, const std::string& v) { c.name = number<double>(#name, v); }, \
        [](const PipelineConfig& c) { return num(c.name); }                                \
  }
#define QG_BOOL(sec, name)                                                                 \
  Field {                                                                                  \
    sec, #name, [](PipelineConfig& c, const std::string& v) { c.name = boolean(#name, v); }, \
        [](const PipelineConfig& c) { return std::string(c.name ? "true" : "false"); }     \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      QG_STR("pipeline", condition),
      Field{"pipeline", "seed",
            [](PipelineConfig& c, const std::string& v) { c.seed = number<std::uint64_t>("seed", v); },
            [](const PipelineConfig& c) { return std::to_string(c.seed); }},
      QG_PATHS("corpus", submissions),
      QG_PATHS("corpus", comments),
      QG_LIST("corpus", condition_subreddits),
      QG_INT("corpus", min_words),
      QG_BOOL("corpus", submissions_only),
      QG_INT("corpus", shortlist_top),
      QG_INT("corpus", relevance_sample),
      QG_PATH("corpus", annotations),
      QG_BOOL("corpus", assume_relevant),
      QG_PATH("cohort", labels),
      QG_PATH("cohort", stopwords),
      QG_INT("cohort", vocabulary_size),
      QG_DOUBLE("cohort", threshold),
      QG_INT("cohort", classifier_depth),
      QG_STR("cohort", medical_subreddit),
      QG_INT("cohort", control_min_posts),
      QG_INT("cohort", control_symptoms),
      QG_PATHS("symptoms", lexicon),
      QG_PATH("wmd", embeddings),
      QG_STR("wmd", ground),
      Field{"wmd", "sentinel",
            [](PipelineConfig& c, const std::string& v) { c.sentinel = number<double>("sentinel", v); },
            [](const PipelineConfig& c) { return c.sentinel ? num(*c.sentinel) : std::string(); }},
      QG_INT("quest", k_min),
      QG_INT("quest", k_stride),
      QG_INT("quest", max_depth),
      QG_STR("quest", linkage),
      QG_DOUBLE("quest", max_cluster_frac),
      QG_PATH("quest", overrides),
      QG_INT("quest", evidence_per_symptom),
      Field{"valid", "sheet_seed",
            [](PipelineConfig& c, const std::string& v) {
              c.sheet_seed = number<std::uint64_t>("sheet_seed", v);
            },
            [](const PipelineConfig& c) {
              return c.sheet_seed ? std::to_string(*c.sheet_seed) : std::string();
            }},
      QG_PATH("valid", scores),
  };
  return kFields;
}

#undef QG_STR
#undef QG_PATH
#undef QG_PATHS
#undef QG_LIST
#undef QG_INT
#undef QG_DOUBLE
#undef QG_BOOL

void check_values(const PipelineConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::kConfig, "config: " + what);
  };
  need(!c.condition.empty(), "pipeline.condition is required");
  need(!c.submissions.empty() || !c.comments.empty(), "corpus.submissions or corpus.comments is required");
  need(!c.condition_subreddits.empty(), "corpus.condition_subreddits is required");
  need(!c.labels.empty(), "cohort.labels is required");
  need(!c.lexicon.empty(), "symptoms.lexicon is required");
  need(!c.embeddings.empty(), "wmd.embeddings is required");
  need(c.min_words >= 0, "corpus.min_words must be >= 0");
  need(c.shortlist_top >= 1, "corpus.shortlist_top must be >= 1");
  need(c.relevance_sample >= 0, "corpus.relevance_sample must be >= 0");
  need(c.threshold > 0.0 && c.threshold < 1.0, "cohort.threshold must lie in (0, 1)");
  need(c.vocabulary_size >= 1, "cohort.vocabulary_size must be >= 1");
  need(c.classifier_depth >= 1, "cohort.classifier_depth must be >= 1");
  need(c.control_min_posts >= 1, "cohort.control_min_posts must be >= 1");
  need(c.control_symptoms >= 1, "cohort.control_symptoms must be >= 1");
  need(c.ground == "euclidean" || c.ground == "cosine", "wmd.ground must be euclidean or cosine");
  need(!c.sentinel || *c.sentinel >= 0.0, "wmd.sentinel must be >= 0");
  need(c.k_min >= 1, "quest.k_min must be >= 1");
  need(c.k_stride >= 1, "quest.k_stride must be >= 1");
  need(c.max_depth >= 1, "quest.max_depth must be >= 1");
  need(c.max_cluster_frac > 0.0 && c.max_cluster_frac <= 1.0, "quest.max_cluster_frac must lie in (0, 1]");
  need(c.evidence_per_symptom >= 0, "quest.evidence_per_symptom must be >= 0");
  need(c.jobs >= 1, "jobs must be >= 1");
  try {
    cluster::parse_linkage(c.linkage);
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, std::string("config: quest.linkage: ") + e.what());
  }
}

}  // namespace

PipelineConfig PipelineConfig::parse(const std::string& ini_text, const std::string& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(ini_text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::kConfig, std::string("config: ") + e.what());
  }
  PipelineConfig c;
  c.base_dir = fs::absolute(base_dir.empty() ? "." : base_dir).lexically_normal().string();
  bool have_seed = false;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      fail(ErrorCode::kConfig, "config: key '" + section + "' outside a section");
    }
    for (const auto& [key, value] : body) {
      const std::string v = text::trim(value.data());
      if (section == "pipeline" && key == "out_dir") {
        c.out_dir = resolve(c, v);
        continue;
      }
      if (section == "pipeline" && key == "jobs") {
        c.jobs = number<int>("jobs", v);
        continue;
      }
      const Field* f = nullptr;
      for (const auto& cand : fields()) {
        if (section == cand.section && key == cand.key) f = &cand;
      }
      if (!f) fail(ErrorCode::kConfig, "config: unknown key " + section + "." + key);
      if (v.empty()) continue;
      f->set(c, v);
      if (section == "pipeline" && key == "seed") have_seed = true;
    }
  }
  if (!have_seed) fail(ErrorCode::kConfig, "config: pipeline.seed is required");
  if (c.out_dir == "out") c.out_dir = resolve(c, "out");
  check_values(c);
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot read config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), fs::absolute(path).parent_path().string());
}

void PipelineConfig::check_inputs() const {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& p : submissions) files.emplace_back("corpus.submissions", p);
  for (const auto& p : comments) files.emplace_back("corpus.comments", p);
  for (const auto& p : lexicon) files.emplace_back("symptoms.lexicon", p);
  files.emplace_back("cohort.labels", labels);
  files.emplace_back("wmd.embeddings", embeddings);
  if (!annotations.empty()) files.emplace_back("corpus.annotations", annotations);
  if (!stopwords.empty()) files.emplace_back("cohort.stopwords", stopwords);
  if (!overrides.empty()) files.emplace_back("quest.overrides", overrides);
  if (!scores.empty()) files.emplace_back("valid.scores", scores);
  std::vector<std::string> missing;
  for (const auto& [key, p] : files) {
    if (!fs::is_regular_file(p)) missing.push_back(key + " = " + p);
  }
  if (!missing.empty()) {
    fail(ErrorCode::kConfig, "missing input files: " + text::join(missing, "; "));
  }
}

std::string PipelineConfig::canonical() const {
  std::string out;
  for (const auto& f : fields()) {
    // Scores are a report-stage input; its stamp hashes the file itself.
    if (f.section == std::string("valid") && f.key == std::string("scores")) continue;
    out += fmt::format("{}.{}={}\n", f.section, f.key, f.get(*this));
  }
  return out;
}

std::string PipelineConfig::hash() const { return sha256_hex(canonical()); }

// ---- stages ------------------------------------------------------------------

namespace {

struct Context {
  const PipelineConfig& cfg;
  const Pipeline& pipe;
  std::string config_hash;

  std::string p(const std::string& a) const { return pipe.path(a); }
  corpus::SubredditSet condition_subs() const { return corpus::SubredditSet(cfg.condition_subreddits); }
  corpus::QualifyOptions qualify() const { return {cfg.min_words, cfg.submissions_only}; }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path + " (run the earlier stages first)");
  return in;
}

json read_json(const std::string& path) {
  auto in = open_in(path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::kFormat, path + ": not valid JSON");
  return j;
}

symptoms::SymptomLexicon lexicon(const Context& c) { return symptoms::SymptomLexicon::load(c.cfg.lexicon); }

cohort::CohortLabeling read_labeling(const Context& c) {
  auto in = open_in(c.p("cohort.tsv"));
  return cohort::CohortLabeling::read_tsv(in);
}

corpus::SubredditShortlist read_shortlist(const Context& c) {
  auto in = open_in(c.p("shortlist.tsv"));
  return corpus::SubredditShortlist::read_tsv(in);
}

std::vector<std::string> read_controls(const Context& c) {
  auto in = open_in(c.p("controls.tsv"));
  std::vector<std::string> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    out.push_back(line);
  }
  return out;
}

std::vector<const corpus::UserRecord*> records(const corpus::Corpus& corpus,
                                               const std::vector<std::string>& authors) {
  std::vector<const corpus::UserRecord*> out;
  for (const auto& a : authors) {
    if (const auto* u = corpus.user(a)) out.push_back(u);
  }
  return out;
}

// Cohort: qualifying prior posts in relevant subreddits.
symptoms::PostSelector cohort_selector(const Context& c, corpus::SubredditSet relevant) {
  return [cond = c.condition_subs(), q = c.qualify(), relevant](const corpus::UserRecord& u) {
    std::vector<const corpus::Post*> out;
    for (const auto* p : corpus::prior_posts(u, cond, q)) {
      if (relevant.contains(p->subreddit)) out.push_back(p);
    }
    return out;
  };
}

// Controls: qualifying posts in relevant subreddits.
symptoms::PostSelector control_selector(const Context& c, corpus::SubredditSet relevant) {
  return [q = c.qualify(), relevant](const corpus::UserRecord& u) {
    std::vector<const corpus::Post*> out;
    for (const auto* p : u.posts) {
      if (relevant.contains(p->subreddit) && corpus::qualifies(*p, q)) out.push_back(p);
    }
    return out;
  };
}

std::map<std::string, std::string> read_kv(const std::string& path) {
  auto in = open_in(path);
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = text::split(line, '\t');
    if (f.size() == 2) out[f[0]] = f[1];
  }
  return out;
}

void stage_ingest(const Context& c) {
  std::vector<corpus::Post> posts;
  std::ostringstream stats;
  stats << "file\tlines\tparsed\tmalformed\n";
  auto ingest = [&](const std::string& path, corpus::PostKind kind) {
    const auto s = corpus::parse_dump(path, kind, [&](corpus::Post&& p) { posts.push_back(std::move(p)); });
    stats << relative(c.cfg, path) << '\t' << s.lines << '\t' << s.parsed << '\t' << s.malformed << '\n';
    if (s.malformed > 0) spdlog::warn("{}: skipped {} malformed lines", path, s.malformed);
  };
  for (const auto& p : c.cfg.submissions) ingest(p, corpus::PostKind::kSubmission);
  for (const auto& p : c.cfg.comments) ingest(p, corpus::PostKind::kComment);
  corpus::Corpus corpus(std::move(posts));
  if (corpus.duplicates_dropped() > 0) {
    spdlog::warn("dropped {} duplicate post ids", corpus.duplicates_dropped());
  }
  corpus.save(c.p("posts.jsonl"));
  stats << "# posts=" << corpus.posts().size() << " users=" << corpus.users().size()
        << " duplicates=" << corpus.duplicates_dropped() << '\n';
  open_out(c.p("ingest.tsv")) << stats.str();
  spdlog::info("ingest: {} posts by {} users", corpus.posts().size(), corpus.users().size());
}

void stage_cohort(const Context& c) {
  const auto corpus = corpus::Corpus::load(c.p("posts.jsonl"));
  const auto cond = c.condition_subs();
  cohort::LabelTable table;
  {
    auto in = open_in(c.cfg.labels);
    table = cohort::LabelTable::read_tsv(in);
  }
  const auto stop = c.cfg.stopwords.empty() ? cohort::default_stopwords()
                                            : cohort::load_stopwords(c.cfg.stopwords);

  std::vector<const corpus::UserRecord*> posters;
  for (const auto& [author, user] : corpus.users()) {
    if (user.posted_in(cond)) posters.push_back(&user);
  }
  if (posters.empty()) fail(ErrorCode::kDegenerate, "nobody posted in the condition subreddits");

  std::vector<std::string> documents;
  std::vector<std::pair<const corpus::UserRecord*, bool>> labeled;
  int missing = 0;
  for (const auto& [author, label] : table.labels) {
    const auto* u = corpus.user(author);
    if (!u || !u->posted_in(cond)) {
      ++missing;
      continue;
    }
    std::string doc;
    for (const auto* p : u->posts) {
      if (cond.contains(p->subreddit)) doc += p->text() + "\n";
    }
    documents.push_back(std::move(doc));
    labeled.emplace_back(u, label);
  }
  if (missing > 0) spdlog::warn("{} labeled users have no condition-subreddit posts; ignored", missing);

  const auto vocab = cohort::build_vocabulary(documents, stop, static_cast<std::size_t>(c.cfg.vocabulary_size));
  std::vector<cohort::LabeledFeatures> feats;
  for (const auto& [u, label] : labeled) {
    feats.push_back({u->author, cohort::extract_features(*u, vocab, cond), label});
  }
  const auto trained = cohort::train_selfreport_classifier(
      feats, vocab, {c.cfg.classifier_depth, 1}, c.cfg.jobs);

  std::map<std::string, double> scores;
  for (const auto* u : posters) {
    auto it = table.labels.find(u->author);
    scores[u->author] = it != table.labels.end()
                            ? (it->second ? 1.0 : 0.0)
                            : trained.model.score(cohort::extract_features(*u, vocab, cond));
  }
  const auto labeling = cohort::label_cohort(scores, c.cfg.threshold);

  open_out(c.p("classifier.json")) << trained.model.to_json().dump(1) << '\n';
  {
    auto out = open_out(c.p("cohort.tsv"));
    labeling.write_tsv(out);
  }
  auto out = open_out(c.p("cohort_report.tsv"));
  out << "# config_hash=" << c.config_hash << '\n';
  out << "metric\tvalue\n";
  out << "labeled_users\t" << feats.size() << '\n';
  out << "loocv_auc\t" << num(trained.loocv_auc) << '\n';
  std::string kappa = "NA";
  if (!table.dual.empty()) kappa = num(cohort::labeler_agreement(table));
  out << "labeler_kappa\t" << kappa << '\n';
  if (!trained.heldout_scores.empty()) {
    const auto rates = cohort::implied_rates(trained.heldout_scores, trained.labels, c.cfg.threshold);
    out << "true_positive_rate\t" << num(rates.true_positive_rate) << '\n';
    out << "false_positive_rate\t" << num(rates.false_positive_rate) << '\n';
  }
  out << "condition_users\t" << labeling.count(cohort::CohortLabel::kCondition) << '\n';
  out << "below_threshold\t" << labeling.count(cohort::CohortLabel::kControlCandidate) << '\n';
  spdlog::info("cohort: {} condition users, classifier LOOCV AUC {:.3f}",
               labeling.count(cohort::CohortLabel::kCondition), trained.loocv_auc);
}

void stage_shortlist(const Context& c) {
  const auto corpus = corpus::Corpus::load(c.p("posts.jsonl"));
  const auto cohort_users = records(corpus, read_labeling(c).condition_users());
  auto shortlist = corpus::build_shortlist(
      c.cfg.condition, cohort_users, c.condition_subs(),
      {static_cast<std::size_t>(c.cfg.shortlist_top), c.qualify()});
  {
    const auto rows = corpus::sample_for_relevance(shortlist, cohort_users, c.condition_subs(),
                                                   static_cast<std::size_t>(c.cfg.relevance_sample),
                                                   c.cfg.seed, c.qualify());
    auto out = open_out(c.p("relevance_sheet.tsv"));
    corpus::write_annotation_sheet(out, rows);
  }
  if (!c.cfg.annotations.empty()) {
    auto in = open_in(c.cfg.annotations);
    corpus::apply_annotations(shortlist, corpus::read_annotation_sheet(in));
  }
  if (c.cfg.assume_relevant) {
    for (auto& e : shortlist.entries) {
      if (e.relevance == corpus::Relevance::kUnannotated) e.relevance = corpus::Relevance::kRelevant;
    }
  }
  {
    auto out = open_out(c.p("shortlist.tsv"));
    shortlist.write_tsv(out);
  }
  const auto pending = shortlist.unannotated();
  if (!pending.empty()) {
    fail(ErrorCode::kConfig,
         "relevance annotations missing for: " + text::join(pending, ", ") +
             "; answer relevance_sheet.tsv and set corpus.annotations, or set corpus.assume_relevant");
  }
  if (shortlist.relevant().empty()) fail(ErrorCode::kDegenerate, "no relevant subreddits");
}

void stage_controls(const Context& c) {
  const auto corpus = corpus::Corpus::load(c.p("posts.jsonl"));
  const auto lex = lexicon(c);
  const auto relevant = read_shortlist(c).relevant();
  const auto cohort_users = records(corpus, read_labeling(c).condition_users());
  const auto profile = symptoms::profile_population(cohort_users, lex, cohort_selector(c, relevant), c.cfg.jobs);
  const auto top = symptoms::top_symptoms(profile, static_cast<std::size_t>(c.cfg.control_symptoms));
  const auto controls = cohort::select_controls(
      corpus, top, lex, c.condition_subs(), relevant,
      {c.cfg.medical_subreddit, c.cfg.control_min_posts, c.cfg.min_words});
  auto out = open_out(c.p("controls.tsv"));
  out << "# symptoms=" << text::join(top, "|") << '\n';
  out << "author\n";
  for (const auto* u : controls) out << u->author << '\n';
  spdlog::info("controls: {} users mentioning {}", controls.size(), text::join(top, ", "));
}

struct Population {
  std::vector<const corpus::UserRecord*> users;
  std::map<std::string, bool> labels;
  symptoms::PostSelector select;
};

// Cohort members need at least one selected prior post; controls come from
// the controls stage. Labels: true = condition.
Population population(const Context& c, const corpus::Corpus& corpus) {
  const auto relevant = read_shortlist(c).relevant();
  auto cohort_sel = cohort_selector(c, relevant);
  auto control_sel = control_selector(c, relevant);
  Population pop;
  for (const auto* u : records(corpus, read_labeling(c).condition_users())) {
    if (cohort_sel(*u).empty()) continue;
    pop.users.push_back(u);
    pop.labels[u->author] = true;
  }
  for (const auto* u : records(corpus, read_controls(c))) {
    if (pop.labels.count(u->author)) continue;
    pop.users.push_back(u);
    pop.labels[u->author] = false;
  }
  pop.select = [cohort_sel, control_sel, labels = pop.labels](const corpus::UserRecord& u) {
    return labels.at(u.author) ? cohort_sel(u) : control_sel(u);
  };
  return pop;
}

void stage_profile(const Context& c) {
  const auto corpus = corpus::Corpus::load(c.p("posts.jsonl"));
  const auto pop = population(c, corpus);
  const auto profile = symptoms::profile_population(pop.users, lexicon(c), pop.select, c.cfg.jobs);
  auto out = open_out(c.p("profile.tsv"));
  profile.write_tsv(out, &pop.labels);
  std::size_t cond = 0;
  for (const auto& [_, l] : pop.labels) cond += l ? 1 : 0;
  spdlog::info("profile: {} condition, {} control users; {} symptoms mentioned", cond,
               pop.labels.size() - cond, symptoms::mentioned_symptoms(profile).size());
}

symptoms::SymptomProfile read_profile(const Context& c, std::map<std::string, bool>& labels) {
  auto in = open_in(c.p("profile.tsv"));
  return symptoms::SymptomProfile::read_tsv(in, &labels);
}

void stage_distances(const Context& c) {
  std::map<std::string, bool> labels;
  const auto profile = read_profile(c, labels);
  const auto names = symptoms::mentioned_symptoms(profile);
  const auto store = wmd::EmbeddingStore::load(c.cfg.embeddings);
  wmd::MatrixOptions opts;
  opts.ground = c.cfg.ground == "cosine" ? wmd::GroundDistance::kCosine : wmd::GroundDistance::kEuclidean;
  opts.sentinel = c.cfg.sentinel;
  opts.jobs = c.cfg.jobs;
  const auto matrix = wmd::distance_matrix(names, store, opts);
  auto out = open_out(c.p("distances.tsv"));
  matrix.write_tsv(out);
}

void stage_sweep(const Context& c) {
  std::map<std::string, bool> labels;
  const auto profile = read_profile(c, labels);
  wmd::DistanceMatrix matrix;
  {
    auto in = open_in(c.p("distances.tsv"));
    matrix = wmd::DistanceMatrix::read_tsv(in);
  }
  quest::SweepOptions opts;
  opts.k_min = c.cfg.k_min;
  opts.k_stride = c.cfg.k_stride;
  opts.linkage = cluster::parse_linkage(c.cfg.linkage);
  opts.tree = {c.cfg.max_depth, 1};
  opts.jobs = c.cfg.jobs;
  const auto result = quest::sweep(profile, matrix, labels, opts);
  open_out(c.p("sweep.json")) << result.to_json().dump() << '\n';
  {
    auto out = open_out(c.p("sweep.tsv"));
    out << "# config_hash=" << c.config_hash << '\n';
    result.write_tsv(out);
  }
  const auto op = quest::select_operating_point(result, c.cfg.max_cluster_frac);
  auto out = open_out(c.p("curve.tsv"));
  out << "# config_hash=" << c.config_hash << '\n';
  quest::emit_curve(out, result.curve(), op);
  spdlog::info("sweep: {} values of k; selected k={} (AUC {:.3f}{})", result.entries.size(), op.k,
               op.auc, op.relaxed ? ", size cap relaxed" : "");
}

void stage_build(const Context& c) {
  const auto sweep = quest::SweepResult::from_json(read_json(c.p("sweep.json")));
  const auto op = quest::select_operating_point(sweep, c.cfg.max_cluster_frac);
  std::map<int, std::string> overrides;
  if (!c.cfg.overrides.empty()) {
    auto in = open_in(c.cfg.overrides);
    overrides = quest::read_overrides(in);
  }
  quest::Provenance prov;
  prov.corpus_hash = sha256_file(c.p("posts.jsonl"));
  prov.lexicon_hash = sha256_files(c.cfg.lexicon);
  prov.embeddings_hash = sha256_file(c.cfg.embeddings);
  prov.config_hash = c.config_hash;
  prov.seed = c.cfg.seed;
  prov.linkage = c.cfg.linkage;
  const auto q = quest::build_questionnaire(c.cfg.condition, sweep, op, overrides, prov);
  q.save(c.p("questionnaire.json"));
  open_out(c.p("questionnaire.md")) << quest::to_markdown(q);

  const auto corpus = corpus::Corpus::load(c.p("posts.jsonl"));
  const auto pop = population(c, corpus);
  std::vector<const corpus::UserRecord*> cohort_users;
  for (const auto* u : pop.users) {
    if (pop.labels.at(u->author)) cohort_users.push_back(u);
  }
  const auto lex = lexicon(c);
  const auto evidence = quest::collect_evidence(q, cohort_users, pop.select, lex,
                                                static_cast<std::size_t>(c.cfg.evidence_per_symptom),
                                                c.cfg.seed);
  {
    auto out = open_out(c.p("evidence.tsv"));
    quest::write_evidence_tsv(out, evidence);
  }

  const auto report = read_kv(c.p("cohort_report.tsv"));
  valid::BuildRow row;
  row.condition = c.cfg.condition;
  row.cohort = static_cast<int>(cohort_users.size());
  row.control = static_cast<int>(pop.users.size() - cohort_users.size());
  row.clusters = op.k;
  row.symptoms = sweep.n_symptoms;
  row.auc = std::stod(report.at("loocv_auc"));
  auto out = open_out(c.p("table1.tsv"));
  out << "# config_hash=" << c.config_hash << '\n';
  out << valid::build_table_header() << '\n' << valid::format_row(row) << '\n';
  spdlog::info("build: questionnaire {} with {} paths", q.id, q.paths().size());
}

void stage_sheet(const Context& c) {
  const auto q = quest::Questionnaire::load(c.p("questionnaire.json"));
  const auto sheet = valid::generate_sheet(q, c.cfg.sheet_seed.value_or(c.cfg.seed));
  auto j = sheet.to_json();
  j["config_hash"] = c.config_hash;
  open_out(c.p("sheet.json")) << j.dump(1) << '\n';
  auto out = open_out(c.p("sheet.tsv"));
  sheet.write_tsv(out);
}

void stage_report(const Context& c) {
  if (c.cfg.scores.empty()) fail(ErrorCode::kConfig, "valid.scores is not set");
  const auto q = quest::Questionnaire::load(c.p("questionnaire.json"));
  const std::vector<valid::ScoringSheet> sheets{valid::ScoringSheet::from_json(read_json(c.p("sheet.json")))};
  auto in = open_in(c.cfg.scores);
  const auto records = valid::read_scores_tsv(in, c.cfg.scores);
  const auto table = valid::ingest_scores(sheets, records);
  const auto report = valid::validation_report(q, sheets, table);
  {
    auto out = open_out(c.p("report.tsv"));
    report.write_tsv(out);
  }
  open_out(c.p("report.md")) << report.to_markdown();
  open_out(c.p("table2.tsv")) << valid::questionnaire_table_header() << '\n'
                              << valid::format_row(valid::QuestionnaireRow{
                                     q.condition, q.auc, *report.mean_pearson})
                              << '\n';
  auto out = open_out(c.p("reliability.tsv"));
  out << valid::reliability_table_header() << '\n';
  if (report.mean_reliability) {
    out << valid::format_row(valid::ReliabilityRow{q.condition, *report.mean_reliability}) << '\n';
  }
}

struct StageSpec {
  std::function<void(const Context&)> run;
  std::vector<std::string> artifacts_in;                                  // under out_dir
  std::function<std::vector<std::string>(const PipelineConfig&)> files_in;  // config inputs
  std::vector<std::string> outputs;
};

const std::map<std::string, StageSpec>& stages() {
  using V = std::vector<std::string>;
  static const std::map<std::string, StageSpec> kStages = {
      {"ingest",
       {stage_ingest, {},
        [](const PipelineConfig& c) {
          V v = c.submissions;
          v.insert(v.end(), c.comments.begin(), c.comments.end());
          return v;
        },
        {"posts.jsonl", "ingest.tsv"}}},
      {"cohort",
       {stage_cohort, {"posts.jsonl"},
        [](const PipelineConfig& c) {
          V v{c.labels};
          if (!c.stopwords.empty()) v.push_back(c.stopwords);
          return v;
        },
        {"classifier.json", "cohort.tsv", "cohort_report.tsv"}}},
      {"shortlist",
       {stage_shortlist, {"posts.jsonl", "cohort.tsv"},
        [](const PipelineConfig& c) { return c.annotations.empty() ? V{} : V{c.annotations}; },
        {"shortlist.tsv", "relevance_sheet.tsv"}}},
      {"controls",
       {stage_controls, {"posts.jsonl", "cohort.tsv", "shortlist.tsv"},
        [](const PipelineConfig& c) { return c.lexicon; }, {"controls.tsv"}}},
      {"profile",
       {stage_profile, {"posts.jsonl", "cohort.tsv", "shortlist.tsv", "controls.tsv"},
        [](const PipelineConfig& c) { return c.lexicon; }, {"profile.tsv"}}},
      {"distances",
       {stage_distances, {"profile.tsv"}, [](const PipelineConfig& c) { return V{c.embeddings}; },
        {"distances.tsv"}}},
      {"sweep",
       {stage_sweep, {"profile.tsv", "distances.tsv"}, [](const PipelineConfig&) { return V{}; },
        {"sweep.json", "sweep.tsv", "curve.tsv"}}},
      {"build",
       {stage_build,
        {"sweep.json", "posts.jsonl", "cohort.tsv", "shortlist.tsv", "controls.tsv", "cohort_report.tsv"},
        [](const PipelineConfig& c) {
          V v = c.lexicon;
          v.push_back(c.embeddings);
          if (!c.overrides.empty()) v.push_back(c.overrides);
          return v;
        },
        {"questionnaire.json", "questionnaire.md", "evidence.tsv", "table1.tsv"}}},
      {"sheet",
       {stage_sheet, {"questionnaire.json"}, [](const PipelineConfig&) { return V{}; },
        {"sheet.json", "sheet.tsv"}}},
      {"report",
       {stage_report, {"questionnaire.json", "sheet.json"},
        [](const PipelineConfig& c) { return c.scores.empty() ? V{} : V{c.scores}; },
        {"report.tsv", "report.md", "table2.tsv", "reliability.tsv"}}},
  };
  return kStages;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {}

std::string Pipeline::path(const std::string& artifact) const {
  return (fs::path(config_.out_dir) / artifact).string();
}

StageResult Pipeline::run_stage(const std::string& name, bool force) {
  auto it = stages().find(name);
  if (it == stages().end()) fail(ErrorCode::kInvalidArgument, "unknown stage: " + name);
  const StageSpec& spec = it->second;
  const Context ctx{config_, *this, config_.hash()};
  try {
    fs::create_directories(fs::path(config_.out_dir) / ".stamps");
    std::string key = name + "\n" + ctx.config_hash + "\n";
    for (const auto& a : spec.artifacts_in) key += a + "=" + sha256_file(path(a)) + "\n";
    for (const auto& f : spec.files_in(config_)) key += f + "=" + sha256_file(f) + "\n";
    const std::string stamp_path = path(".stamps/" + name);
    const std::string stamp = sha256_hex(key);

    bool fresh = !force;
    if (fresh) {
      std::ifstream in(stamp_path);
      std::string old;
      fresh = in && std::getline(in, old) && old == stamp;
    }
    for (const auto& o : spec.outputs) fresh = fresh && fs::exists(path(o));
    if (fresh) {
      spdlog::info("{}: up to date", name);
      return {name, true};
    }
    fs::remove(stamp_path);
    spec.run(ctx);
    open_out(stamp_path) << stamp << '\n';
    return {name, false};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw Error(ErrorCode::kConfig, name + ": " + e.what());
    throw Error(ErrorCode::kStage, "stage " + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kStage, "stage " + name + ": " + e.what());
  }
}

std::vector<StageResult> Pipeline::run_all(bool force) {
  config_.check_inputs();
  std::vector<StageResult> out;
  for (const auto& name : stage_names()) {
    if (name == "report" && config_.scores.empty()) continue;
    out.push_back(run_stage(name, force));
  }
  return out;
}

}  // namespace qgen::pipeline
