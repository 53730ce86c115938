#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgen/cluster.hpp"
#include "qgen/corpus.hpp"
#include "qgen/dtree.hpp"
#include "qgen/symptoms.hpp"
#include "qgen/wmd.hpp"

namespace qgen::quest {

struct CurvePoint {
  int k = 0;
  double auc = 0.0;
  int max_cluster_size = 0;
};

struct SweepEntry {
  int k = 0;
  double auc = 0.0;
  int max_cluster_size = 0;
  cluster::Partition partition;
  dtree::DecisionTree tree;  // trained on all rows
};

struct SweepResult {
  int n_symptoms = 0;
  std::vector<std::string> symptoms;  // matrix order
  std::vector<SweepEntry> entries;    // ascending k

  const SweepEntry& at_k(int k) const;

  // Curve TSV: k, auc, max_cluster_size.
  void write_tsv(std::ostream& out) const;
  std::vector<CurvePoint> curve() const;

  // Full result including partitions and trees.
  nlohmann::json to_json() const;
  static SweepResult from_json(const nlohmann::json& j);
};

std::vector<CurvePoint> read_curve_tsv(std::istream& in);

struct SweepOptions {
  int k_min = 5;
  int k_stride = 1;  // k_max is always evaluated
  cluster::Linkage linkage = cluster::Linkage::kAverage;
  dtree::TrainOptions tree;
  int jobs = 1;
};

// Binary "user mentioned any symptom of cluster c" features. `symptoms` names
// the partition's members; each must be a profile column.
dtree::Dataset cluster_dataset(const symptoms::SymptomProfile& profile,
                               const std::map<std::string, bool>& labels,
                               const std::vector<std::string>& symptoms,
                               const cluster::Partition& partition);

SweepResult sweep(const symptoms::SymptomProfile& profile, const wmd::DistanceMatrix& matrix,
                  const std::map<std::string, bool>& labels, const SweepOptions& options = {});

struct OperatingPoint {
  int k = 0;
  double auc = 0.0;
  int max_cluster_size = 0;
  bool relaxed = false;  // no entry met the size cap
};

// Highest AUC among entries whose largest cluster has at most
// ceil(max_frac * n_symptoms) members; ties go to the larger k.
OperatingPoint select_operating_point(const std::vector<CurvePoint>& curve, int n_symptoms,
                                      double max_frac = 0.1);
OperatingPoint select_operating_point(const SweepResult& sweep, double max_frac = 0.1);

// Plot data for the AUC-vs-k curve: one `point` row per k plus a `marker`
// row at the selected operating point.
void emit_curve(std::ostream& out, const std::vector<CurvePoint>& curve, const OperatingPoint& op);

// "Did the patient mention that he\she <members joined by ' or '>?"
std::string template_question(const std::vector<std::string>& members);

// node id -> question text.
std::map<int, std::string> read_overrides(std::istream& in);

struct Feature {
  int cluster_id = 0;
  std::vector<std::string> members;
  std::string label;
  bool operator==(const Feature&) const = default;
};

struct Provenance {
  std::string corpus_hash;
  std::string lexicon_hash;
  std::string embeddings_hash;
  std::string config_hash;
  std::uint64_t seed = 0;
  int k = 0;
  std::string linkage;
  bool operator==(const Provenance&) const = default;
};

struct Question {
  std::string text;
  bool overridden = false;
  bool operator==(const Question&) const = default;
};

struct Questionnaire {
  std::string id;
  std::string condition;
  dtree::DecisionTree tree;
  std::vector<Feature> features;          // tree feature index -> cluster
  std::map<int, Question> questions;      // internal node id -> question
  double auc = 0.0;
  int n_symptoms = 0;
  Provenance provenance;

  std::vector<dtree::Path> paths() const { return tree.export_paths(); }
  // One "Q? yes/no" line per step.
  std::vector<std::string> render_path(const dtree::Path& path) const;

  // Throws kFormat if an internal node lacks a question or an override names
  // a leaf or missing node.
  void validate() const;

  nlohmann::json to_json() const;
  static Questionnaire from_json(const nlohmann::json& j);
  static Questionnaire load(const std::string& path);
  void save(const std::string& path) const;

  bool operator==(const Questionnaire&) const = default;
};

Questionnaire build_questionnaire(const std::string& condition, const SweepResult& sweep,
                                  const OperatingPoint& op,
                                  const std::map<int, std::string>& overrides,
                                  const Provenance& provenance);

std::string to_markdown(const Questionnaire& q);

struct EvidenceRow {
  int node = 0;
  std::string symptom;
  std::string post_id;
  std::string author;
  std::string snippet;
};

// Up to per_symptom seeded-random posts per symptom of every question node,
// drawn only from the selected posts; snippets span +-15 words around the
// first mention.
std::vector<EvidenceRow> collect_evidence(const Questionnaire& q,
                                          const std::vector<const corpus::UserRecord*>& users,
                                          const symptoms::PostSelector& select,
                                          const symptoms::SymptomLexicon& lexicon,
                                          std::size_t per_symptom, std::uint64_t seed);

void write_evidence_tsv(std::ostream& out, const std::vector<EvidenceRow>& rows);

}  // namespace qgen::quest
