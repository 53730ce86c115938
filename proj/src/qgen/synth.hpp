#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qgen::synth {

struct SymptomGroup {
  std::vector<std::string> phrases;
  bool signal = false;
  // Every member is drawn independently with `base` probability for both
  // groups, instead of one member per group mention.
  bool mention_all = false;
  double base = 0.2;
};

struct SynthSpec {
  std::string condition = "endometriosis";
  std::vector<std::string> condition_subreddits{"endometriosis", "Endo"};
  std::vector<std::string> other_subreddits{"AskWomen",  "Health", "Fitness",   "Anxiety",
                                            "nutrition", "sleep",  "migraine",  "Parenting",
                                            "CasualConversation"};
  std::string medical_subreddit = "AskDocs";
  int n_condition = 200;
  int n_control = 200;
  int n_noise = 40;        // condition-subreddit posters without a self-report
  int n_distractor = 20;   // AskDocs posters failing the control rules
  int n_labeled = 60;      // manually labeled users (condition + noise)
  int n_dual = 20;         // of which labeled twice
  double strength = 0.9;
  double signal_base = 0.3;
  int prior_posts_min = 3;
  int prior_posts_max = 5;
  int dimension = 0;       // 0 = one axis per group
  double vector_noise = 0.01;
  std::uint64_t seed = 1;
  std::vector<SymptomGroup> groups = default_groups();

  static std::vector<SymptomGroup> default_groups();
  // INI file with a [synth] section; unknown keys are rejected.
  static SynthSpec load(const std::string& path);
  void validate() const;
};

struct SynthOutput {
  std::string submissions;  // file paths
  std::string comments;
  std::string labels;
  std::string lexicon;
  std::string vectors;
  std::string groups;       // ground truth: symptom, group
  std::string config;       // ready-to-run pipeline config
};

// Deterministic for a fixed spec: writes all files under `dir`.
SynthOutput generate(const SynthSpec& spec, const std::string& dir);

// Probability that a user mentions a given group, for the two populations.
double condition_rate(const SynthSpec& spec, const SymptomGroup& g);
double control_rate(const SynthSpec& spec, const SymptomGroup& g);

}  // namespace qgen::synth
