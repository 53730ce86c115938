#include "qgen/valid.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "qgen/error.hpp"
#include "qgen/hash.hpp"
#include "qgen/metrics.hpp"
#include "qgen/random.hpp"
#include "qgen/text.hpp"

namespace qgen::valid {

using json = nlohmann::json;

namespace {

constexpr int kShuffleAttempts = 200;

bool repeats_separated(const std::vector<int>& order) {
  std::map<int, int> last;
  for (int i = 0; i < static_cast<int>(order.size()); ++i) {
    auto [it, fresh] = last.try_emplace(order[static_cast<std::size_t>(i)], i);
    if (!fresh && i - it->second < 2) return false;
  }
  return true;
}

}  // namespace

const SheetItem* ScoringSheet::find(const std::string& item_id) const {
  for (const auto& it : items) {
    if (it.item_id == item_id) return &it;
  }
  return nullptr;
}

json ScoringSheet::to_json(bool with_duplicates) const {
  json ji = json::array();
  for (const auto& it : items) {
    json e = {{"item_id", it.item_id}, {"lines", it.lines}};
    if (with_duplicates) e["path"] = it.path;
    ji.push_back(std::move(e));
  }
  json j = {{"questionnaire_id", questionnaire_id}, {"seed", seed}, {"items", ji}};
  if (with_duplicates) j["duplicate_of"] = duplicate_of;
  return j;
}

ScoringSheet ScoringSheet::from_json(const json& j) {
  try {
    ScoringSheet s;
    s.questionnaire_id = j.at("questionnaire_id").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("items")) {
      s.items.push_back({e.at("item_id").get<std::string>(), e.at("path").get<int>(),
                         e.at("lines").get<std::vector<std::string>>()});
    }
    s.duplicate_of = j.at("duplicate_of").get<std::map<std::string, std::string>>();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed scoring sheet: ") + e.what());
  }
}

void ScoringSheet::write_tsv(std::ostream& out) const {
  out << "item_id\tquestions\n";
  for (const auto& it : items) {
    out << it.item_id << '\t' << text::tsv_escape(text::join(it.lines, " | ")) << '\n';
  }
}

ScoringSheet generate_sheet(const quest::Questionnaire& q, std::uint64_t seed) {
  const auto paths = q.paths();
  const int n = static_cast<int>(paths.size());
  if (n < 2) fail(ErrorCode::kInvalidArgument, "scoring sheet needs at least 2 paths");

  Rng rng(seed);
  auto repeated = rng.sample(static_cast<std::size_t>(n), static_cast<std::size_t>(n / 2));
  std::sort(repeated.begin(), repeated.end());

  std::vector<int> order;
  for (int p = 0; p < n; ++p) order.push_back(p);
  for (auto p : repeated) order.push_back(static_cast<int>(p));

  bool placed = false;
  for (int attempt = 0; attempt < kShuffleAttempts && !placed; ++attempt) {
    rng.shuffle(order);
    placed = repeats_separated(order);
  }
  if (!placed) {
    // Originals in shuffled order, then the repeats in the same relative order.
    std::vector<int> firsts(static_cast<std::size_t>(n));
    std::iota(firsts.begin(), firsts.end(), 0);
    rng.shuffle(firsts);
    order = firsts;
    for (int p : firsts) {
      if (std::binary_search(repeated.begin(), repeated.end(), static_cast<std::size_t>(p))) {
        order.push_back(p);
      }
    }
  }

  ScoringSheet sheet;
  sheet.questionnaire_id = q.id;
  sheet.seed = seed;
  std::map<int, std::string> first_item;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const int p = order[pos];
    SheetItem item;
    item.path = p;
    item.item_id =
        "i" + sha256_hex(fmt::format("{}|{}|{}|{}", q.id, seed, pos, p)).substr(0, 12);
    item.lines = q.render_path(paths[static_cast<std::size_t>(p)]);
    auto [it, fresh] = first_item.try_emplace(p, item.item_id);
    if (!fresh) sheet.duplicate_of[item.item_id] = it->second;
    sheet.items.push_back(std::move(item));
  }
  return sheet;
}

Score parse_score(const std::string& raw) {
  const std::string s = text::trim(raw);
  if (text::lower(s) == "nei") return std::nullopt;
  if (s.size() == 1 && s[0] >= '1' && s[0] <= '5') return s[0] - '0';
  fail(ErrorCode::kInvalidArgument, "score '" + s + "' is not 1-5 or NEI");
}

std::string format_score(const Score& s) { return s ? std::to_string(*s) : "NEI"; }

std::vector<ScoreRecord> read_scores_tsv(std::istream& in, const std::string& origin) {
  std::vector<ScoreRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto f = text::split(line, '\t');
    if (line_no == 1 && f[0] == "rater_id") continue;
    const auto where = origin + ":" + std::to_string(line_no);
    if (f.size() != 4) fail(ErrorCode::kFormat, where + ": expected 4 columns");
    ScoreRecord r;
    r.rater = f[0];
    r.item_id = f[1];
    try {
      r.score = parse_score(f[2]);
    } catch (const Error& e) {
      fail(ErrorCode::kInvalidArgument, where + ": " + e.what());
    }
    try {
      std::size_t used = 0;
      r.timestamp = std::stoll(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument(f[3]);
    } catch (const std::exception&) {
      fail(ErrorCode::kFormat, where + ": bad timestamp '" + f[3] + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_scores_tsv(std::ostream& out, const std::vector<ScoreRecord>& records) {
  out << "rater_id\titem_id\tscore\ttimestamp\n";
  for (const auto& r : records) {
    out << r.rater << '\t' << r.item_id << '\t' << format_score(r.score) << '\t' << r.timestamp
        << '\n';
  }
}

namespace {

struct ItemRef {
  const ScoringSheet* sheet;
  const SheetItem* item;
};

std::map<std::string, ItemRef> index_items(std::span<const ScoringSheet> sheets) {
  std::map<std::string, ItemRef> out;
  for (const auto& s : sheets) {
    for (const auto& it : s.items) out[it.item_id] = {&s, &it};
  }
  return out;
}

}  // namespace

ScoreTable ingest_scores(std::span<const ScoringSheet> sheets,
                         const std::vector<ScoreRecord>& records) {
  const auto items = index_items(sheets);
  std::set<std::string> unknown;
  for (const auto& r : records) {
    if (!items.count(r.item_id)) unknown.insert(r.item_id);
    if (r.score && (*r.score < 1 || *r.score > 5)) {
      fail(ErrorCode::kInvalidArgument, "score " + std::to_string(*r.score) + " out of range");
    }
  }
  if (!unknown.empty()) {
    fail(ErrorCode::kNotFound,
         "unknown item ids: " + text::join({unknown.begin(), unknown.end()}, ", "));
  }

  ScoreTable table;
  std::map<std::string, std::set<const ScoringSheet*>> sheets_seen;
  std::set<std::pair<std::string, std::string>> ties;
  for (const auto& r : records) {
    auto& rater = table.raters[r.rater];
    sheets_seen[r.rater].insert(items.at(r.item_id).sheet);
    auto [it, fresh] = rater.items.try_emplace(r.item_id, ScoreCell{r.score, r.timestamp});
    if (fresh) continue;
    if (r.timestamp > it->second.timestamp) {
      it->second = {r.score, r.timestamp};
      ties.erase({r.rater, r.item_id});
    } else if (r.timestamp == it->second.timestamp) {
      it->second.score = r.score;
      ties.insert({r.rater, r.item_id});
    }
  }
  for (auto& [name, rater] : table.raters) {
    for (const auto* s : sheets_seen[name]) rater.expected += s->items.size();
  }
  table.tie_flags.assign(ties.begin(), ties.end());
  for (const auto& [rater, item] : table.tie_flags) {
    spdlog::warn("rater {} item {}: several scores share one timestamp; kept the last", rater, item);
  }
  return table;
}

ValidationReport validation_report(const quest::Questionnaire& q,
                                   std::span<const ScoringSheet> sheets, const ScoreTable& table) {
  const auto paths = q.paths();
  const auto items = index_items(sheets);

  ValidationReport report;
  report.questionnaire_id = q.id;
  report.condition = q.condition;
  report.questionnaire_auc = q.auc;

  std::vector<double> pooled_scores, pooled_probs;
  std::vector<double> pearsons, reliabilities;
  for (const auto& [name, rater] : table.raters) {
    RaterReport rr;
    rr.rater = name;
    rr.complete = rater.complete();
    // path -> (first showing, second showing)
    std::map<int, std::pair<std::optional<Score>, std::optional<Score>>> by_path;
    for (const auto& [item_id, cell] : rater.items) {
      const auto& ref = items.at(item_id);
      ++(cell.score ? rr.scored : rr.nei);
      auto& slot = by_path[ref.item->path];
      auto dup = ref.sheet->duplicate_of.find(item_id);
      (dup == ref.sheet->duplicate_of.end() ? slot.first : slot.second) = cell.score;
    }
    std::vector<double> scores, probs;
    std::vector<metrics::RepeatedScore> repeats;
    for (const auto& [path, pair] : by_path) {
      if (pair.first && *pair.first) {
        scores.push_back(**pair.first);
        probs.push_back(paths[static_cast<std::size_t>(path)].probability);
      }
      if (pair.first && pair.second) {
        repeats.push_back({std::to_string(path), *pair.first, *pair.second});
      }
    }
    pooled_scores.insert(pooled_scores.end(), scores.begin(), scores.end());
    pooled_probs.insert(pooled_probs.end(), probs.begin(), probs.end());
    try {
      rr.pearson = metrics::pearson(scores, probs);
      pearsons.push_back(*rr.pearson);
    } catch (const Error&) {
      spdlog::warn("rater {}: correlation undefined ({} numeric scores); excluded", name,
                   scores.size());
    }
    try {
      rr.reliability = metrics::intra_rater(repeats);
      reliabilities.push_back(*rr.reliability);
    } catch (const Error&) {
    }
    report.nei += rr.nei;
    report.raters.push_back(std::move(rr));
  }
  if (pearsons.empty()) {
    fail(ErrorCode::kDegenerate, "no rater scored two paths with distinct probabilities");
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  report.mean_pearson = mean(pearsons);
  if (!reliabilities.empty()) report.mean_reliability = mean(reliabilities);
  try {
    report.pooled_pearson = metrics::pearson(pooled_scores, pooled_probs);
  } catch (const Error&) {
  }
  return report;
}

namespace {

std::string opt2(const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : "NA"; }
std::string opt17(const std::optional<double>& v) { return v ? fmt::format("{:.17g}", *v) : "NA"; }

}  // namespace

void ValidationReport::write_tsv(std::ostream& out) const {
  out << "rater\tpearson\treliability\tscored\tnei\tcomplete\n";
  for (const auto& r : raters) {
    out << r.rater << '\t' << opt17(r.pearson) << '\t' << opt17(r.reliability) << '\t' << r.scored
        << '\t' << r.nei << '\t' << (r.complete ? "yes" : "no") << '\n';
  }
  out << "#mean\t" << opt17(mean_pearson) << '\t' << opt17(mean_reliability) << "\t\t" << nei
      << "\t\n";
  out << "#pooled\t" << opt17(pooled_pearson) << "\t\t\t\t\n";
}

std::string ValidationReport::to_markdown() const {
  std::string out;
  out += fmt::format("# Validation report: {} ({})\n\n", condition, questionnaire_id);
  out += "| Condition | AUC questionnaire | Avg. correlation doctor and questionnaire |\n";
  out += "|---|---|---|\n";
  out += fmt::format("| {} | {:.2f} | {} |\n\n", condition, questionnaire_auc, opt2(mean_pearson));
  out += fmt::format("Pooled correlation: {}. Mean rater consistency: {}. NEI responses: {}.\n\n",
                     opt2(pooled_pearson), opt2(mean_reliability), nei);
  out += "| Rater | Correlation | Consistency | Scored | NEI | Complete |\n";
  out += "|---|---|---|---|---|---|\n";
  for (const auto& r : raters) {
    out += fmt::format("| {} | {} | {} | {} | {} | {} |\n", r.rater, opt2(r.pearson),
                       opt2(r.reliability), r.scored, r.nei, r.complete ? "yes" : "no");
  }
  return out;
}

json ValidationReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json jr = json::array();
  for (const auto& r : raters) {
    jr.push_back({{"rater", r.rater},
                  {"pearson", opt(r.pearson)},
                  {"reliability", opt(r.reliability)},
                  {"scored", r.scored},
                  {"nei", r.nei},
                  {"complete", r.complete}});
  }
  return {{"questionnaire_id", questionnaire_id},
          {"condition", condition},
          {"questionnaire_auc", questionnaire_auc},
          {"mean_pearson", opt(mean_pearson)},
          {"mean_reliability", opt(mean_reliability)},
          {"pooled_pearson", opt(pooled_pearson)},
          {"nei", nei},
          {"raters", jr}};
}

std::string build_table_header() {
  return "condition\tcondition_cohort\tcontrol_group\tclusters\tsymptoms\tauc";
}

std::string format_row(const BuildRow& r) {
  return fmt::format("{}\t{}\t{}\t{}\t{}\t{:.2f}", r.condition, r.cohort, r.control, r.clusters,
                     r.symptoms, r.auc);
}

std::string questionnaire_table_header() { return "condition\tauc_questionnaire\tavg_correlation"; }

std::string format_row(const QuestionnaireRow& r) {
  return fmt::format("{}\t{:.2f}\t{:.2f}", r.condition, r.auc, r.correlation);
}

std::string reliability_table_header() { return "condition\tconsistency"; }

std::string format_row(const ReliabilityRow& r) {
  return fmt::format("{}\t{:.2f}", r.condition, r.consistency);
}

}  // namespace qgen::valid
