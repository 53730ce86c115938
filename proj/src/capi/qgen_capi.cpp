#include "qgen/qgen.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <spdlog/spdlog.h>

#include "qgen/error.hpp"
#include "qgen/metrics.hpp"
#include "qgen/pipeline.hpp"
#include "qgen/quest.hpp"
#include "qgen/service.hpp"
#include "qgen/synth.hpp"
#include "qgen/transport.hpp"
#include "qgen/valid.hpp"
#include "qgen/wmd.hpp"

struct qg_pipeline {
  qgen::pipeline::Pipeline impl;
};

struct qg_questionnaire {
  qgen::quest::Questionnaire impl;
};

struct qg_embeddings {
  qgen::wmd::EmbeddingStore impl;
};

struct qg_service {
  std::unique_ptr<qgen::service::Service> impl;
};

namespace {

thread_local std::string g_last_error;

qg_status to_status(qgen::ErrorCode code) {
  return static_cast<qg_status>(static_cast<int>(code));
}

template <typename Fn>
qg_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return QG_OK;
  } catch (const qgen::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return QG_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return QG_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) qgen::fail(qgen::ErrorCode::kInvalidArgument, what);
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) qgen::fail(qgen::ErrorCode::kIo, "cannot write " + path);
  return out;
}

// Pipeline holds its config by value; rebuild it after an edit.
template <typename Fn>
void edit_config(qg_pipeline* p, Fn&& fn) {
  auto cfg = p->impl.config();
  fn(cfg);
  p->impl = qgen::pipeline::Pipeline(std::move(cfg));
}

}  // namespace

extern "C" {

const char* qg_last_error(void) { return g_last_error.c_str(); }

const char* qg_version(void) { return "0.3.0"; }

void qg_set_log_level(int level) {
  spdlog::set_level(static_cast<spdlog::level::level_enum>(std::clamp(level, 0, 6)));
}

void qg_string_free(char* s) { std::free(s); }

qg_status qg_pipeline_open(const char* config_path, qg_pipeline** out) {
  return guarded([&] {
    require(config_path && out, "null argument");
    *out = new qg_pipeline{qgen::pipeline::Pipeline(qgen::pipeline::PipelineConfig::load(config_path))};
  });
}

void qg_pipeline_free(qg_pipeline* p) { delete p; }

qg_status qg_pipeline_set_jobs(qg_pipeline* p, int jobs) {
  return guarded([&] {
    require(p, "null pipeline");
    require(jobs >= 1, "jobs must be >= 1");
    edit_config(p, [&](auto& c) { c.jobs = jobs; });
  });
}

qg_status qg_pipeline_set_out_dir(qg_pipeline* p, const char* dir) {
  return guarded([&] {
    require(p && dir && *dir, "null argument");
    edit_config(p, [&](auto& c) { c.out_dir = std::filesystem::absolute(dir).lexically_normal().string(); });
  });
}

qg_status qg_pipeline_set_assume_relevant(qg_pipeline* p, int assume) {
  return guarded([&] {
    require(p, "null pipeline");
    edit_config(p, [&](auto& c) { c.assume_relevant = assume != 0; });
  });
}

qg_status qg_pipeline_check_inputs(const qg_pipeline* p) {
  return guarded([&] {
    require(p, "null pipeline");
    p->impl.config().check_inputs();
  });
}

qg_status qg_pipeline_artifact(const qg_pipeline* p, const char* name, char** out) {
  return guarded([&] {
    require(p && name && out, "null argument");
    *out = dup(p->impl.path(name));
  });
}

qg_status qg_pipeline_config_hash(const qg_pipeline* p, char** out) {
  return guarded([&] {
    require(p && out, "null argument");
    *out = dup(p->impl.config().hash());
  });
}

qg_status qg_pipeline_run_stage(qg_pipeline* p, const char* stage, int force, int* skipped) {
  return guarded([&] {
    require(p && stage, "null argument");
    const auto r = p->impl.run_stage(stage, force != 0);
    if (skipped) *skipped = r.skipped ? 1 : 0;
  });
}

qg_status qg_pipeline_run(qg_pipeline* p, int force) {
  return guarded([&] {
    require(p, "null pipeline");
    p->impl.run_all(force != 0);
  });
}

qg_status qg_questionnaire_load(const char* path, qg_questionnaire** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new qg_questionnaire{qgen::quest::Questionnaire::load(path)};
  });
}

void qg_questionnaire_free(qg_questionnaire* q) { delete q; }

const char* qg_questionnaire_id(const qg_questionnaire* q) { return q ? q->impl.id.c_str() : ""; }

size_t qg_questionnaire_feature_count(const qg_questionnaire* q) {
  return q ? q->impl.features.size() : 0;
}

size_t qg_questionnaire_path_count(const qg_questionnaire* q) {
  return q ? q->impl.paths().size() : 0;
}

qg_status qg_questionnaire_predict(const qg_questionnaire* q, const uint8_t* features,
                                   size_t n_features, double* probability) {
  return guarded([&] {
    require(q && features && probability, "null argument");
    *probability = q->impl.tree.predict_proba({features, n_features});
  });
}

qg_status qg_questionnaire_markdown(const qg_questionnaire* q, char** out) {
  return guarded([&] {
    require(q && out, "null argument");
    *out = dup(qgen::quest::to_markdown(q->impl));
  });
}

qg_status qg_sheet_write(const qg_questionnaire* q, uint64_t seed, const char* json_path,
                         const char* tsv_path) {
  return guarded([&] {
    require(q && json_path, "null argument");
    const auto sheet = qgen::valid::generate_sheet(q->impl, seed);
    open_out(json_path) << sheet.to_json().dump(1) << '\n';
    if (tsv_path) {
      auto out = open_out(tsv_path);
      sheet.write_tsv(out);
    }
  });
}

qg_status qg_report_write(const qg_questionnaire* q, const char* sheet_path,
                          const char* scores_path, const char* out_dir) {
  return guarded([&] {
    require(q && sheet_path && scores_path && out_dir, "null argument");
    std::ifstream sin(sheet_path);
    if (!sin) qgen::fail(qgen::ErrorCode::kIo, std::string("cannot read ") + sheet_path);
    auto j = nlohmann::json::parse(sin, nullptr, false);
    if (j.is_discarded()) qgen::fail(qgen::ErrorCode::kFormat, std::string(sheet_path) + ": not valid JSON");
    const std::vector<qgen::valid::ScoringSheet> sheets{qgen::valid::ScoringSheet::from_json(j)};
    std::ifstream in(scores_path);
    if (!in) qgen::fail(qgen::ErrorCode::kIo, std::string("cannot read ") + scores_path);
    const auto table = qgen::valid::ingest_scores(sheets, qgen::valid::read_scores_tsv(in, scores_path));
    const auto report = qgen::valid::validation_report(q->impl, sheets, table);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    {
      auto out = open_out((dir / "report.tsv").string());
      report.write_tsv(out);
    }
    open_out((dir / "report.md").string()) << report.to_markdown();
    open_out((dir / "table2.tsv").string())
        << qgen::valid::questionnaire_table_header() << '\n'
        << qgen::valid::format_row(
               qgen::valid::QuestionnaireRow{q->impl.condition, q->impl.auc, *report.mean_pearson})
        << '\n';
    auto out = open_out((dir / "reliability.tsv").string());
    out << qgen::valid::reliability_table_header() << '\n';
    if (report.mean_reliability) {
      out << qgen::valid::format_row(
                 qgen::valid::ReliabilityRow{q->impl.condition, *report.mean_reliability})
          << '\n';
    }
  });
}

qg_status qg_curve_write(const char* sweep_tsv, double max_cluster_frac, const char* out_path,
                         int* selected_k) {
  return guarded([&] {
    require(sweep_tsv && out_path, "null argument");
    std::ifstream in(sweep_tsv);
    if (!in) qgen::fail(qgen::ErrorCode::kIo, std::string("cannot read ") + sweep_tsv);
    const auto curve = qgen::quest::read_curve_tsv(in);
    if (curve.empty()) qgen::fail(qgen::ErrorCode::kInvalidArgument, "empty sweep");
    int n = 0;
    for (const auto& p : curve) n = std::max(n, p.k);
    const auto op = qgen::quest::select_operating_point(curve, n, max_cluster_frac);
    auto out = open_out(out_path);
    qgen::quest::emit_curve(out, curve, op);
    if (selected_k) *selected_k = op.k;
  });
}

qg_status qg_embeddings_load(const char* path, qg_embeddings** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new qg_embeddings{qgen::wmd::EmbeddingStore::load(path)};
  });
}

void qg_embeddings_free(qg_embeddings* e) { delete e; }

qg_status qg_wmd(const qg_embeddings* e, const char* a, const char* b, qg_ground ground,
                 double* distance, int* defined) {
  return guarded([&] {
    require(e && a && b && distance && defined, "null argument");
    require(ground == QG_GROUND_EUCLIDEAN || ground == QG_GROUND_COSINE, "unknown ground distance");
    const auto d = qgen::wmd::wmd(a, b, e->impl,
                                  ground == QG_GROUND_COSINE ? qgen::wmd::GroundDistance::kCosine
                                                             : qgen::wmd::GroundDistance::kEuclidean);
    *defined = d ? 1 : 0;
    if (d) *distance = *d;
  });
}

qg_status qg_solve_transport(const double* supply, size_t m, const double* demand, size_t n,
                             const double* cost, double* plan, double* total) {
  return guarded([&] {
    require(supply && demand && cost && total, "null argument");
    qgen::wmd::TransportProblem prob;
    prob.supply.assign(supply, supply + m);
    prob.demand.assign(demand, demand + n);
    prob.cost.assign(cost, cost + m * n);
    const auto sol = qgen::wmd::solve_transport(prob);
    *total = sol.cost;
    if (plan) std::copy(sol.plan.begin(), sol.plan.end(), plan);
  });
}

qg_status qg_auc(const double* scores, const uint8_t* labels, size_t n, double* out) {
  return guarded([&] {
    require(scores && labels && out, "null argument");
    std::vector<bool> l(labels, labels + n);
    *out = qgen::metrics::auc(std::span<const double>(scores, n), l);
  });
}

qg_status qg_pearson(const double* x, const double* y, size_t n, double* out) {
  return guarded([&] {
    require(x && y && out, "null argument");
    *out = qgen::metrics::pearson({x, n}, {y, n});
  });
}

qg_status qg_cohen_kappa(const int* a, const int* b, size_t n, double* out) {
  return guarded([&] {
    require(a && b && out, "null argument");
    *out = qgen::metrics::cohen_kappa({a, n}, {b, n});
  });
}

qg_status qg_synth_generate(const char* spec_path, const char* out_dir) {
  return guarded([&] {
    require(out_dir, "null output directory");
    const auto spec = spec_path ? qgen::synth::SynthSpec::load(spec_path) : qgen::synth::SynthSpec{};
    qgen::synth::generate(spec, out_dir);
  });
}

qg_status qg_service_create(const qg_service_options* options, qg_service** out) {
  return guarded([&] {
    require(options && out, "null argument");
    qgen::service::ServiceOptions o;
    if (options->data_dir) o.data_dir = options->data_dir;
    if (options->event_log) o.event_log = options->event_log;
    if (options->cors_origin) o.cors_origin = options->cors_origin;
    if (options->rater_token) o.rater_token = options->rater_token;
    *out = new qg_service{std::make_unique<qgen::service::Service>(std::move(o))};
  });
}

void qg_service_free(qg_service* s) { delete s; }

qg_status qg_service_start(qg_service* s, const char* host, int port, int* bound_port) {
  return guarded([&] {
    require(s && host, "null argument");
    const int p = s->impl->start(host, port);
    if (bound_port) *bound_port = p;
  });
}

qg_status qg_service_listen(qg_service* s, const char* host, int port) {
  return guarded([&] {
    require(s && host, "null argument");
    if (!s->impl->listen(host, port)) {
      qgen::fail(qgen::ErrorCode::kIo, "cannot listen on " + std::string(host) + ":" + std::to_string(port));
    }
  });
}

void qg_service_stop(qg_service* s) {
  if (s) s->impl->stop();
}

}  // extern "C"
