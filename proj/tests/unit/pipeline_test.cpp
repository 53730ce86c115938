#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "expect_error.hpp"
#include "json.hpp"
#include "qgen/pipeline.hpp"
#include "qgen/quest.hpp"
#include "qgen/synth.hpp"
#include "qgen/valid.hpp"

namespace {

namespace fs = std::filesystem;
using qgen::ErrorCode;
using namespace qgen::pipeline;

const std::string kMinimal =
    "[pipeline]\ncondition = gout\nseed = 3\n"
    "[corpus]\nsubmissions = s.jsonl\ncondition_subreddits = gout\n"
    "[cohort]\nlabels = labels.tsv\n"
    "[symptoms]\nlexicon = a.tsv, b.tsv\n"
    "[wmd]\nembeddings = vec.txt\n";

// kMinimal with `line` added to `section`.
std::string minimal_with(const std::string& section, const std::string& line) {
  const std::string head = "[" + section + "]\n";
  auto s = kMinimal;
  const auto at = s.find(head);
  if (at == std::string::npos) return s + head + line + "\n";
  return s.insert(at + head.size(), line + "\n");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Config, ParsesAndResolvesRelativePaths) {
  const auto c = PipelineConfig::parse(kMinimal, "/data/run");
  EXPECT_EQ(c.condition, "gout");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.submissions, (std::vector<std::string>{"/data/run/s.jsonl"}));
  EXPECT_EQ(c.lexicon, (std::vector<std::string>{"/data/run/a.tsv", "/data/run/b.tsv"}));
  EXPECT_EQ(c.out_dir, "/data/run/out");
  EXPECT_EQ(c.min_words, 80);
  EXPECT_EQ(c.threshold, 0.5);
  EXPECT_EQ(c.k_min, 5);
  EXPECT_EQ(c.max_cluster_frac, 0.1);
  EXPECT_EQ(c.control_symptoms, 3);
  EXPECT_EQ(c.shortlist_top, 13);
}

TEST(Config, Errors) {
  EXPECT_QGEN_ERROR(PipelineConfig::parse("[pipeline]\ncondition = gout\n", "/"), ErrorCode::kConfig,
                    "pipeline.seed is required");
  EXPECT_QGEN_ERROR(PipelineConfig::parse(minimal_with("quest", "kmin = 3"), "/"), ErrorCode::kConfig,
                    "unknown key quest.kmin");
  EXPECT_QGEN_ERROR(PipelineConfig::parse(minimal_with("quest", "k_min = five"), "/"), ErrorCode::kConfig,
                    "not a number");
  EXPECT_QGEN_ERROR(PipelineConfig::parse(minimal_with("cohort", "threshold = 1.0"), "/"),
                    ErrorCode::kConfig, "threshold");
  EXPECT_QGEN_ERROR(PipelineConfig::parse(minimal_with("quest", "linkage = ward"), "/"),
                    ErrorCode::kConfig, "linkage");
  EXPECT_QGEN_ERROR(PipelineConfig::parse(minimal_with("corpus", "assume_relevant = maybe"), "/"),
                    ErrorCode::kConfig, "not a boolean");
  EXPECT_QGEN_ERROR(PipelineConfig::load("/nonexistent/pipeline.ini"), ErrorCode::kConfig,
                    "cannot read config");
}

TEST(Config, HashIgnoresWhereAndHowFast) {
  const auto a = PipelineConfig::parse(kMinimal, "/data/run");
  const auto b = PipelineConfig::parse(
      minimal_with("pipeline", "out_dir = /elsewhere\njobs = 8") + "[valid]\nscores = s.tsv\n",
      "/data/run");
  EXPECT_EQ(b.jobs, 8);
  EXPECT_EQ(b.out_dir, "/elsewhere");
  EXPECT_EQ(a.hash(), b.hash());
  const auto c = PipelineConfig::parse(minimal_with("quest", "k_min = 6"), "/data/run");
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash().size(), 64u);
}

struct SynthRun {
  std::string dir;
  PipelineConfig config;
};

SynthRun synth_run(const std::string& name, int jobs = 1) {
  const auto dir = (fs::path(::testing::TempDir()) / ("pipe_" + name)).string();
  fs::remove_all(dir);
  qgen::synth::SynthSpec spec;
  spec.n_condition = 80;
  spec.n_control = 80;
  spec.n_noise = 20;
  spec.n_labeled = 40;
  spec.n_dual = 10;
  const auto out = qgen::synth::generate(spec, dir);
  auto config = PipelineConfig::load(out.config);
  config.jobs = jobs;
  return {dir, config};
}

TEST(Pipeline, MissingEmbeddingsFailsBeforeAnyStage) {
  auto run = synth_run("missing");
  fs::remove(run.config.embeddings);
  Pipeline p(run.config);
  EXPECT_QGEN_ERROR(p.run_all(), ErrorCode::kConfig, "wmd.embeddings");
  EXPECT_FALSE(fs::exists(p.path("posts.jsonl")));
}

TEST(Pipeline, UnannotatedShortlistIsAConfigError) {
  auto run = synth_run("annot");
  run.config.assume_relevant = false;
  Pipeline p(run.config);
  EXPECT_QGEN_ERROR(p.run_all(), ErrorCode::kConfig, "relevance annotations missing");
  // The sheet to answer has been written.
  EXPECT_TRUE(fs::exists(p.path("relevance_sheet.tsv")));
}

TEST(Pipeline, StageErrorsNameTheStage) {
  auto run = synth_run("order");
  Pipeline p(run.config);
  EXPECT_QGEN_ERROR(p.run_stage("cohort"), ErrorCode::kStage, "stage cohort");
  EXPECT_QGEN_ERROR(p.run_stage("polish"), ErrorCode::kInvalidArgument, "unknown stage");
}

TEST(Pipeline, EndToEndStampsAndProvenance) {
  auto run = synth_run("e2e");
  Pipeline p(run.config);
  const auto first = p.run_all();
  ASSERT_EQ(first.size(), stage_names().size() - 1);  // no scores configured
  for (const auto& r : first) EXPECT_FALSE(r.skipped) << r.stage;

  const auto again = p.run_all();
  for (const auto& r : again) EXPECT_TRUE(r.skipped) << r.stage;
  for (const auto& r : p.run_all(true)) EXPECT_FALSE(r.skipped) << r.stage;

  // Touching one input reruns its stage and everything downstream of a changed artifact.
  std::ofstream(run.config.labels, std::ios::app) << "\n";
  const auto after = p.run_all();
  EXPECT_TRUE(after[0].skipped);
  EXPECT_FALSE(after[1].skipped);

  const auto hash = run.config.hash();
  const auto q = qgen::quest::Questionnaire::load(p.path("questionnaire.json"));
  EXPECT_EQ(q.provenance.config_hash, hash);
  EXPECT_EQ(q.provenance.seed, run.config.seed);
  EXPECT_EQ(q.provenance.corpus_hash.size(), 64u);
  EXPECT_GE(q.auc, 0.9);
  for (const char* artifact : {"sweep.tsv", "table1.tsv"}) {
    EXPECT_EQ(slurp(p.path(artifact)).rfind("# config_hash=" + hash + "\n", 0), 0u) << artifact;
  }
  const auto table1 = slurp(p.path("table1.tsv"));
  EXPECT_NE(table1.find(qgen::valid::build_table_header()), std::string::npos);
  EXPECT_NE(table1.find("endometriosis\t80\t80\t" + std::to_string(q.features.size()) + "\t30\t"),
            std::string::npos);

  const auto sheet = qgen::valid::ScoringSheet::from_json(nlohmann::json::parse(slurp(p.path("sheet.json"))));
  EXPECT_EQ(sheet.questionnaire_id, q.id);
  EXPECT_EQ(sheet.items.size(), q.paths().size() + q.paths().size() / 2);

  // Scores arrive: the report stage runs and renders the summary rows.
  std::vector<qgen::valid::ScoreRecord> recs;
  std::int64_t t = 1;
  for (const auto& it : sheet.items) {
    const double prob = q.paths()[it.path].probability;
    recs.push_back({"doc1", it.item_id, 1 + static_cast<int>(4 * prob), t++});
    recs.push_back({"doc2", it.item_id, prob > 0.5 ? 4 : 2, t++});
  }
  const auto scores = run.dir + "/scores.tsv";
  {
    std::ofstream out(scores);
    qgen::valid::write_scores_tsv(out, recs);
  }
  auto cfg = run.config;
  cfg.scores = scores;
  Pipeline with_scores(cfg);
  const auto results = with_scores.run_all();
  // Adding scores leaves the questionnaire and sheet untouched.
  for (std::size_t i = 0; i + 1 < results.size(); ++i) EXPECT_TRUE(results[i].skipped) << results[i].stage;
  EXPECT_EQ(results.back().stage, "report");
  EXPECT_FALSE(results.back().skipped);
  const auto table2 = slurp(with_scores.path("table2.tsv"));
  EXPECT_EQ(table2.rfind(qgen::valid::questionnaire_table_header(), 0), 0u);
  EXPECT_TRUE(fs::exists(with_scores.path("report.md")));
}

TEST(Pipeline, OutDirAndJobsDoNotChangeArtifacts) {
  auto a = synth_run("same_a");
  auto b = synth_run("same_b", 3);
  EXPECT_EQ(a.config.hash(), b.config.hash());
  Pipeline pa(a.config), pb(b.config);
  pa.run_all();
  pb.run_all();
  for (const char* artifact : {"questionnaire.json", "sweep.json", "sweep.tsv", "sheet.json"}) {
    EXPECT_EQ(slurp(pa.path(artifact)), slurp(pb.path(artifact))) << artifact;
  }
}

}  // namespace
