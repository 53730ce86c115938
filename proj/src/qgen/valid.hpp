#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgen/quest.hpp"

namespace qgen::valid {

struct SheetItem {
  std::string item_id;
  int path = 0;  // index into Questionnaire::paths()
  std::vector<std::string> lines;
  bool operator==(const SheetItem&) const = default;
};

struct ScoringSheet {
  std::string questionnaire_id;
  std::uint64_t seed = 0;
  std::vector<SheetItem> items;
  std::map<std::string, std::string> duplicate_of;  // second showing -> first

  const SheetItem* find(const std::string& item_id) const;

  // `with_duplicates` false gives the rater-facing form.
  nlohmann::json to_json(bool with_duplicates = true) const;
  static ScoringSheet from_json(const nlohmann::json& j);
  // One line per item: item_id, then the Q/A lines joined by " | ".
  void write_tsv(std::ostream& out) const;

  bool operator==(const ScoringSheet&) const = default;
};

// Every path once plus floor(50%) of paths shown a second time, seeded
// shuffle with repeats at least two positions apart. Fewer than two paths
// throws kInvalidArgument.
ScoringSheet generate_sheet(const quest::Questionnaire& q, std::uint64_t seed);

// nullopt = "Not enough information".
using Score = std::optional<int>;

// Accepts "1".."5" or "NEI" (case-insensitive); anything else throws
// kInvalidArgument with the reason.
Score parse_score(const std::string& s);
std::string format_score(const Score& s);

struct ScoreRecord {
  std::string rater;
  std::string item_id;
  Score score;
  std::int64_t timestamp = 0;
};

// TSV: rater_id, item_id, score, timestamp (header optional).
std::vector<ScoreRecord> read_scores_tsv(std::istream& in, const std::string& origin = "<stream>");
void write_scores_tsv(std::ostream& out, const std::vector<ScoreRecord>& records);

struct ScoreCell {
  Score score;
  std::int64_t timestamp = 0;
};

struct RaterScores {
  std::map<std::string, ScoreCell> items;  // item_id -> latest
  std::size_t expected = 0;                // items on the rater's sheet(s)
  bool complete() const { return items.size() >= expected; }
};

struct ScoreTable {
  std::map<std::string, RaterScores> raters;
  // (rater, item) pairs where two records shared the winning timestamp.
  std::vector<std::pair<std::string, std::string>> tie_flags;
};

// Items may come from several sheets (one per seed). Unknown item ids throw
// kNotFound listing every offender.
ScoreTable ingest_scores(std::span<const ScoringSheet> sheets, const std::vector<ScoreRecord>& records);

struct RaterReport {
  std::string rater;
  std::optional<double> pearson;      // first showings vs leaf probability
  std::optional<double> reliability;  // first vs second showing
  int scored = 0;
  int nei = 0;
  bool complete = false;
};

struct ValidationReport {
  std::string questionnaire_id;
  std::string condition;
  double questionnaire_auc = 0.0;
  std::vector<RaterReport> raters;
  std::optional<double> mean_pearson;
  std::optional<double> mean_reliability;
  std::optional<double> pooled_pearson;
  int nei = 0;

  void write_tsv(std::ostream& out) const;
  std::string to_markdown() const;
  nlohmann::json to_json() const;
};

// Throws kDegenerate when no rater yields a defined correlation.
ValidationReport validation_report(const quest::Questionnaire& q,
                                   std::span<const ScoringSheet> sheets, const ScoreTable& table);

// Summary rows, two decimals.
struct BuildRow {
  std::string condition;
  int cohort = 0;
  int control = 0;
  int clusters = 0;
  int symptoms = 0;
  double auc = 0.0;
};
struct QuestionnaireRow {
  std::string condition;
  double auc = 0.0;
  double correlation = 0.0;
};
struct ReliabilityRow {
  std::string condition;
  double consistency = 0.0;
};

std::string build_table_header();
std::string format_row(const BuildRow& r);
std::string questionnaire_table_header();
std::string format_row(const QuestionnaireRow& r);
std::string reliability_table_header();
std::string format_row(const ReliabilityRow& r);

}  // namespace qgen::valid
