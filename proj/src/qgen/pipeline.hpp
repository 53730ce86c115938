#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qgen::pipeline {

struct PipelineConfig {
  // [pipeline]
  std::string condition;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int jobs = 1;

  // [corpus]
  std::vector<std::string> submissions;
  std::vector<std::string> comments;
  std::vector<std::string> condition_subreddits;
  int min_words = 80;
  bool submissions_only = false;
  int shortlist_top = 13;
  int relevance_sample = 5;
  std::string annotations;  // filled relevance sheet, optional
  bool assume_relevant = false;

  // [cohort]
  std::string labels;
  std::string stopwords;  // optional; built-in list otherwise
  int vocabulary_size = 500;
  double threshold = 0.5;
  int classifier_depth = 6;
  std::string medical_subreddit = "AskDocs";
  int control_min_posts = 2;
  int control_symptoms = 3;

  // [symptoms]
  std::vector<std::string> lexicon;

  // [wmd]
  std::string embeddings;
  std::string ground = "euclidean";
  std::optional<double> sentinel;

  // [quest]
  int k_min = 5;
  int k_stride = 1;
  int max_depth = 6;
  std::string linkage = "average";
  double max_cluster_frac = 0.1;
  std::string overrides;  // optional
  int evidence_per_symptom = 3;

  // [valid]
  std::optional<std::uint64_t> sheet_seed;
  std::string scores;  // optional

  std::string base_dir;  // directory relative paths were resolved against

  // Relative paths resolve against the config file's directory. Throws
  // kConfig on unknown keys, bad values or a missing seed.
  static PipelineConfig load(const std::string& path);
  static PipelineConfig parse(const std::string& ini_text, const std::string& base_dir);

  // Every referenced input file exists (kConfig otherwise).
  void check_inputs() const;

  // Canonical key=value rendering; out_dir, jobs and valid.scores are
  // excluded so the hash names the experiment, not where or how fast it ran
  // or which scores arrived later.
  std::string canonical() const;
  std::string hash() const;
};

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> kNames = {"ingest",  "cohort",    "shortlist",
                                                  "controls", "profile",  "distances",
                                                  "sweep",   "build",     "sheet",
                                                  "report"};
  return kNames;
}

struct StageResult {
  std::string stage;
  bool skipped = false;  // outputs already matched the input stamp
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  std::string path(const std::string& artifact) const;

  // Runs one stage; its inputs must exist. Failures throw Error with kStage
  // and the stage name.
  StageResult run_stage(const std::string& name, bool force = false);

  // ingest through sheet, plus report when scores are configured.
  std::vector<StageResult> run_all(bool force = false);

 private:
  PipelineConfig config_;
};

}  // namespace qgen::pipeline
