#pragma once

// Small self-contained world for quest/valid/service tests: six symptoms on
// a line, users whose label follows "pain" with some noise.

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "qgen/corpus.hpp"
#include "qgen/quest.hpp"
#include "qgen/random.hpp"
#include "qgen/symptoms.hpp"
#include "qgen/wmd.hpp"

namespace qgen_test {

inline const std::vector<std::string> kWorldSymptoms{"pain", "bloating", "fatigue",
                                                     "nausea", "rash", "cramps"};

struct World {
  std::unique_ptr<qgen::corpus::Corpus> corpus;
  qgen::symptoms::SymptomLexicon lexicon;
  qgen::symptoms::SymptomProfile profile;
  std::map<std::string, bool> labels;
  qgen::wmd::DistanceMatrix matrix;

  std::vector<const qgen::corpus::UserRecord*> users() const {
    std::vector<const qgen::corpus::UserRecord*> out;
    for (const auto& [_, u] : corpus->users()) out.push_back(&u);
    return out;
  }
};

// Only posts in "Health" count; "Other" posts are noise the selector drops.
inline qgen::symptoms::PostSelector health_posts() {
  return [](const qgen::corpus::UserRecord& u) {
    std::vector<const qgen::corpus::Post*> out;
    for (const auto* p : u.posts) {
      if (p->subreddit == "Health") out.push_back(p);
    }
    return out;
  };
}

// `noise` is the chance the pain mention disagrees with the label.
inline World make_world(std::uint64_t seed, int n_users = 40, double noise = 0.1) {
  qgen::Rng rng(seed);
  std::string lex = "canonical\tsynonym\n";
  for (const auto& s : kWorldSymptoms) lex += s + "\t\n";
  std::istringstream in(lex);

  World w;
  w.lexicon = qgen::symptoms::SymptomLexicon::parse(in);
  std::vector<qgen::corpus::Post> posts;
  for (int u = 0; u < n_users; ++u) {
    const std::string author = "user" + std::to_string(100 + u);
    const bool label = u % 2 == 0;
    w.labels[author] = label;
    std::string body = "today i noticed";
    const bool pain = rng.bernoulli(noise) ? !label : label;
    if (pain) body += " pain";
    for (std::size_t s = 1; s < kWorldSymptoms.size(); ++s) {
      if (rng.bernoulli(0.35)) body += " and " + kWorldSymptoms[s];
    }
    qgen::corpus::Post p;
    p.id = author + "_h";
    p.author = author;
    p.subreddit = "Health";
    p.created_utc = 10;
    p.body = body;
    posts.push_back(p);
    p.id = author + "_o";
    p.subreddit = "Other";
    p.body = "random rash and cramps and nausea";
    posts.push_back(p);
  }
  w.corpus = std::make_unique<qgen::corpus::Corpus>(std::move(posts));
  w.profile = qgen::symptoms::profile_population(w.users(), w.lexicon, health_posts());

  const std::vector<double> xs{0, 1.1, 5, 6.3, 20, 21.7};
  std::vector<double> values;
  for (double a : xs) {
    for (double b : xs) values.push_back(std::abs(a - b));
  }
  w.matrix = qgen::wmd::DistanceMatrix(kWorldSymptoms, values);
  return w;
}

inline qgen::quest::Provenance world_provenance() {
  qgen::quest::Provenance p;
  p.corpus_hash = "c0ffee";
  p.lexicon_hash = "1ex1c0";
  p.embeddings_hash = "e3b0c4";
  p.config_hash = "abc123";
  p.seed = 7;
  p.linkage = "average";
  return p;
}

inline qgen::quest::Questionnaire world_questionnaire(const World& w, int k = 6,
                                                      const std::map<int, std::string>& overrides = {}) {
  const auto s = qgen::quest::sweep(w.profile, w.matrix, w.labels);
  qgen::quest::OperatingPoint op;
  op.k = k;
  op.auc = s.at_k(k).auc;
  return qgen::quest::build_questionnaire("Endometriosis", s, op, overrides, world_provenance());
}

}  // namespace qgen_test
