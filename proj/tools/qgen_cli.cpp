// qgen command-line front end. Talks to the library through the C API only.
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qgen/qgen.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

int exit_code(qg_status s) {
  if (s == QG_OK) return 0;
  return s == QG_CONFIG ? kExitConfig : kExitStage;
}

int report(qg_status s, const char* what) {
  if (s != QG_OK) std::fprintf(stderr, "qgen: %s: %s\n", what, qg_last_error());
  return exit_code(s);
}

struct Common {
  std::string config;
  std::string out_dir;
  int jobs = 1;
  bool force = false;
  bool assume_relevant = false;
};

int open_pipeline(const Common& c, qg_pipeline** p) {
  qg_status s = qg_pipeline_open(c.config.c_str(), p);
  if (s != QG_OK) return report(s, "config");
  if (c.jobs > 1 && (s = qg_pipeline_set_jobs(*p, c.jobs)) != QG_OK) return report(s, "config");
  if (!c.out_dir.empty() && (s = qg_pipeline_set_out_dir(*p, c.out_dir.c_str())) != QG_OK) {
    return report(s, "config");
  }
  if (c.assume_relevant && (s = qg_pipeline_set_assume_relevant(*p, 1)) != QG_OK) {
    return report(s, "config");
  }
  return 0;
}

int run_stage(const Common& c, const std::string& stage) {
  qg_pipeline* p = nullptr;
  if (int rc = open_pipeline(c, &p)) {
    qg_pipeline_free(p);
    return rc;
  }
  int rc = 0;
  if (qg_status s = qg_pipeline_check_inputs(p); s != QG_OK) {
    rc = report(s, "config");
  } else {
    int skipped = 0;
    const qg_status s2 = qg_pipeline_run_stage(p, stage.c_str(), c.force ? 1 : 0, &skipped);
    rc = report(s2, stage.c_str());
    if (rc == 0) std::printf("%s: %s\n", stage.c_str(), skipped ? "up to date" : "done");
  }
  qg_pipeline_free(p);
  return rc;
}

int run_all(const Common& c) {
  qg_pipeline* p = nullptr;
  if (int rc = open_pipeline(c, &p)) {
    qg_pipeline_free(p);
    return rc;
  }
  const int rc = report(qg_pipeline_run(p, c.force ? 1 : 0), "pipeline");
  if (rc == 0) {
    char* q = nullptr;
    if (qg_pipeline_artifact(p, "questionnaire.json", &q) == QG_OK) {
      std::printf("questionnaire: %s\n", q);
      qg_string_free(q);
    }
  }
  qg_pipeline_free(p);
  return rc;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "pipeline config file")->required()->check(CLI::ExistingFile);
  app->add_option("-o,--out", c.out_dir, "output directory (overrides pipeline.out_dir)");
  app->add_option("-j,--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  app->add_flag("-f,--force", c.force, "rerun even when outputs are up to date");
  app->add_flag("--assume-relevant", c.assume_relevant, "treat unannotated subreddits as relevant");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build screening questionnaires from social-media posts"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(qg_version()));
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  Common common;
  std::string action;

  auto* run = app.add_subcommand("run", "run every stage");
  add_common(run, common);

  const std::map<std::string, std::string> stage_help = {
      {"ingest", "parse dumps into the normalized post store"},
      {"cohort", "train the self-report classifier and label the cohort"},
      {"shortlist", "rank subreddits and write the relevance sheet"},
      {"controls", "select the control group"},
      {"profile", "build per-user symptom profiles"},
      {"distances", "pairwise symptom distances"},
      {"sweep", "cluster and train a tree for each k"},
      {"build", "select k and write the questionnaire"},
  };
  std::vector<std::pair<std::string, CLI::App*>> stage_cmds;
  for (const auto& [name, help] : stage_help) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, common);
    stage_cmds.emplace_back(name, cmd);
  }

  // sheet/report work either as pipeline stages or standalone on files.
  std::string q_path, sheet_path, scores_path, out_path, tsv_path;
  std::uint64_t seed = 0;
  auto* sheet = app.add_subcommand("sheet", "generate a doctor scoring sheet");
  sheet->add_option("-c,--config", common.config, "pipeline config (stage mode)");
  sheet->add_option("-o,--out", common.out_dir, "output directory (stage mode)");
  sheet->add_flag("-f,--force", common.force);
  sheet->add_option("-q,--questionnaire", q_path, "questionnaire JSON (standalone mode)");
  sheet->add_option("-s,--seed", seed, "shuffle seed (standalone mode)");
  sheet->add_option("--json", out_path, "sheet JSON output (standalone mode)");
  sheet->add_option("--tsv", tsv_path, "rater-facing TSV output (standalone mode)");

  auto* rep = app.add_subcommand("report", "validation report from doctor scores");
  rep->add_option("-c,--config", common.config, "pipeline config (stage mode)");
  rep->add_option("-o,--out", common.out_dir, "output directory");
  rep->add_flag("-f,--force", common.force);
  rep->add_option("-q,--questionnaire", q_path, "questionnaire JSON (standalone mode)");
  rep->add_option("--sheet", sheet_path, "sheet JSON (standalone mode)");
  rep->add_option("--scores", scores_path, "score TSV (standalone mode)");

  double max_frac = 0.1;
  auto* curve = app.add_subcommand("curve", "AUC-vs-k plot data with the selected point");
  curve->add_option("--sweep", sheet_path, "sweep TSV")->required()->check(CLI::ExistingFile);
  curve->add_option("--out", out_path, "output TSV")->required();
  curve->add_option("--max-frac", max_frac, "largest cluster as a fraction of symptoms");

  std::string data_dir, event_log, host = "127.0.0.1", cors, token;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP service for questionnaires and scoring");
  serve->add_option("--data", data_dir, "directory of questionnaire JSON files")->required();
  serve->add_option("--port", port, "port");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--log", event_log, "append-only event log");
  serve->add_option("--cors-origin", cors, "allowed browser origin");
  serve->add_option("--rater-token", token, "token required on score submissions");

  std::string spec_path;
  auto* synth = app.add_subcommand("synth", "synthetic corpus tools");
  synth->require_subcommand(1);
  auto* gen = synth->add_subcommand("generate", "write a planted-signal corpus");
  gen->add_option("--spec", spec_path, "synth spec INI")->check(CLI::ExistingFile);
  gen->add_option("--out", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  const std::map<std::string, int> levels = {{"trace", 0}, {"debug", 1}, {"info", 2},
                                             {"warn", 3},  {"error", 4}, {"off", 6}};
  qg_set_log_level(levels.at(log_level));

  if (run->parsed()) return run_all(common);
  for (const auto& [name, cmd] : stage_cmds) {
    if (cmd->parsed()) return run_stage(common, name);
  }

  if (sheet->parsed()) {
    if (!common.config.empty()) return run_stage(common, "sheet");
    if (q_path.empty() || out_path.empty()) {
      std::fprintf(stderr, "qgen: sheet needs --config, or --questionnaire and --json\n");
      return kExitConfig;
    }
    qg_questionnaire* q = nullptr;
    if (int rc = report(qg_questionnaire_load(q_path.c_str(), &q), "questionnaire")) return rc;
    const int rc = report(qg_sheet_write(q, seed, out_path.c_str(), tsv_path.empty() ? nullptr : tsv_path.c_str()),
                          "sheet");
    qg_questionnaire_free(q);
    return rc;
  }

  if (rep->parsed()) {
    if (!common.config.empty()) return run_stage(common, "report");
    if (q_path.empty() || sheet_path.empty() || scores_path.empty() || common.out_dir.empty()) {
      std::fprintf(stderr, "qgen: report needs --config, or --questionnaire, --sheet, --scores and --out\n");
      return kExitConfig;
    }
    qg_questionnaire* q = nullptr;
    if (int rc = report(qg_questionnaire_load(q_path.c_str(), &q), "questionnaire")) return rc;
    const int rc = report(
        qg_report_write(q, sheet_path.c_str(), scores_path.c_str(), common.out_dir.c_str()), "report");
    qg_questionnaire_free(q);
    return rc;
  }

  if (curve->parsed()) {
    int k = 0;
    const int rc = report(qg_curve_write(sheet_path.c_str(), max_frac, out_path.c_str(), &k), "curve");
    if (rc == 0) std::printf("selected k=%d\n", k);
    return rc;
  }

  if (serve->parsed()) {
    qg_service_options opts{data_dir.c_str(), event_log.empty() ? nullptr : event_log.c_str(),
                            cors.empty() ? nullptr : cors.c_str(), token.empty() ? nullptr : token.c_str()};
    qg_service* svc = nullptr;
    if (int rc = report(qg_service_create(&opts, &svc), "serve")) return rc;
    std::printf("listening on http://%s:%d\n", host.c_str(), port);
    std::fflush(stdout);
    const int rc = report(qg_service_listen(svc, host.c_str(), port), "serve");
    qg_service_free(svc);
    return rc;
  }

  if (gen->parsed()) {
    const int rc = report(qg_synth_generate(spec_path.empty() ? nullptr : spec_path.c_str(), out_path.c_str()),
                          "synth");
    if (rc == 0) std::printf("wrote %s\n", out_path.c_str());
    return rc;
  }
  return 0;
}
