#include "qgen/quest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "qgen/error.hpp"
#include "qgen/hash.hpp"
#include "qgen/parallel.hpp"
#include "qgen/random.hpp"
#include "qgen/text.hpp"

namespace qgen::quest {

using json = nlohmann::json;

const SweepEntry& SweepResult::at_k(int k) const {
  for (const auto& e : entries) {
    if (e.k == k) return e;
  }
  fail(ErrorCode::kNotFound, "sweep has no entry for k=" + std::to_string(k));
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

void SweepResult::write_tsv(std::ostream& out) const {
  out << "k\tauc\tmax_cluster_size\n";
  for (const auto& e : entries) {
    out << e.k << '\t' << fmt_double(e.auc) << '\t' << e.max_cluster_size << '\n';
  }
}

std::vector<CurvePoint> SweepResult::curve() const {
  std::vector<CurvePoint> out;
  for (const auto& e : entries) out.push_back({e.k, e.auc, e.max_cluster_size});
  return out;
}

json SweepResult::to_json() const {
  json je = json::array();
  for (const auto& e : entries) {
    je.push_back({{"k", e.k},
                  {"auc", e.auc},
                  {"max_cluster_size", e.max_cluster_size},
                  {"assignment", e.partition.assignment},
                  {"tree", e.tree.to_json()}});
  }
  return {{"n_symptoms", n_symptoms}, {"symptoms", symptoms}, {"entries", je}};
}

SweepResult SweepResult::from_json(const json& j) {
  try {
    SweepResult r;
    r.n_symptoms = j.at("n_symptoms").get<int>();
    r.symptoms = j.at("symptoms").get<std::vector<std::string>>();
    for (const auto& je : j.at("entries")) {
      SweepEntry e;
      e.k = je.at("k").get<int>();
      e.auc = je.at("auc").get<double>();
      e.max_cluster_size = je.at("max_cluster_size").get<int>();
      e.partition = cluster::partition_from_assignment(je.at("assignment").get<std::vector<int>>());
      e.tree = dtree::DecisionTree::from_json(je.at("tree"));
      r.entries.push_back(std::move(e));
    }
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed sweep: ") + e.what());
  }
}

std::vector<CurvePoint> read_curve_tsv(std::istream& in) {
  std::vector<CurvePoint> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    auto f = text::split(line, '\t');
    if (f.size() != 3) fail(ErrorCode::kFormat, "sweep curve: malformed row '" + line + "'");
    try {
      out.push_back({std::stoi(f[0]), std::stod(f[1]), std::stoi(f[2])});
    } catch (const std::exception&) {
      fail(ErrorCode::kFormat, "sweep curve: malformed row '" + line + "'");
    }
  }
  return out;
}

dtree::Dataset cluster_dataset(const symptoms::SymptomProfile& profile,
                               const std::map<std::string, bool>& labels,
                               const std::vector<std::string>& symptom_names,
                               const cluster::Partition& partition) {
  std::vector<std::size_t> column(symptom_names.size());
  for (std::size_t i = 0; i < symptom_names.size(); ++i) {
    auto it = std::find(profile.symptoms.begin(), profile.symptoms.end(), symptom_names[i]);
    if (it == profile.symptoms.end()) {
      fail(ErrorCode::kNotFound, "clustered symptom missing from profile: " + symptom_names[i]);
    }
    column[i] = static_cast<std::size_t>(it - profile.symptoms.begin());
  }
  std::vector<std::string> names;
  for (const auto& members : partition.members) {
    names.push_back(cluster::cluster_label(members, symptom_names));
  }
  dtree::Dataset data(std::move(names));
  for (std::size_t u = 0; u < profile.users.size(); ++u) {
    auto it = labels.find(profile.users[u]);
    if (it == labels.end()) fail(ErrorCode::kNotFound, "no label for user " + profile.users[u]);
    std::vector<std::uint8_t> row(partition.members.size(), 0);
    for (std::size_t c = 0; c < partition.members.size(); ++c) {
      for (int m : partition.members[c]) {
        if (profile.mentions[u][column[static_cast<std::size_t>(m)]]) {
          row[c] = 1;
          break;
        }
      }
    }
    data.add_row(profile.users[u], std::move(row), it->second);
  }
  return data;
}

SweepResult sweep(const symptoms::SymptomProfile& profile, const wmd::DistanceMatrix& matrix,
                  const std::map<std::string, bool>& labels, const SweepOptions& options) {
  const int n = static_cast<int>(matrix.size());
  if (n < options.k_min) {
    fail(ErrorCode::kInvalidArgument, "only " + std::to_string(n) + " symptoms; need at least " +
                                          std::to_string(options.k_min));
  }
  if (options.k_min < 1 || options.k_stride < 1) {
    fail(ErrorCode::kInvalidArgument, "k_min and k_stride must be >= 1");
  }
  const auto dendrogram = cluster::agglomerate(matrix, options.linkage);

  std::vector<int> ks;
  for (int k = options.k_min; k <= n; k += options.k_stride) ks.push_back(k);
  if (ks.back() != n) ks.push_back(n);

  SweepResult result;
  result.n_symptoms = n;
  result.symptoms = matrix.labels();
  result.entries.resize(ks.size());
  // Parallel over k; each entry runs its folds serially.
  parallel_for(ks.size(), options.jobs, [&](std::size_t i) {
    SweepEntry& e = result.entries[i];
    e.k = ks[i];
    e.partition = cluster::cut(dendrogram, e.k);
    e.max_cluster_size = cluster::max_cluster_size(e.partition);
    const auto data = cluster_dataset(profile, labels, matrix.labels(), e.partition);
    e.tree = dtree::train(data, options.tree);
    e.auc = dtree::loocv_auc(data, options.tree, 1);
  });
  return result;
}

OperatingPoint select_operating_point(const std::vector<CurvePoint>& curve, int n_symptoms,
                                      double max_frac) {
  if (curve.empty()) fail(ErrorCode::kInvalidArgument, "empty sweep");
  const int cap = static_cast<int>(std::ceil(max_frac * n_symptoms - 1e-12));
  const CurvePoint* best = nullptr;
  for (const auto& p : curve) {
    if (p.max_cluster_size > cap) continue;
    if (!best || p.auc > best->auc || (p.auc == best->auc && p.k > best->k)) best = &p;
  }
  if (best) return {best->k, best->auc, best->max_cluster_size, false};

  spdlog::warn("no clustering keeps every cluster within {} symptoms; using the smallest maximum",
               cap);
  for (const auto& p : curve) {
    if (!best || p.max_cluster_size < best->max_cluster_size ||
        (p.max_cluster_size == best->max_cluster_size &&
         (p.auc > best->auc || (p.auc == best->auc && p.k > best->k)))) {
      best = &p;
    }
  }
  return {best->k, best->auc, best->max_cluster_size, true};
}

OperatingPoint select_operating_point(const SweepResult& sweep, double max_frac) {
  return select_operating_point(sweep.curve(), sweep.n_symptoms, max_frac);
}

void emit_curve(std::ostream& out, const std::vector<CurvePoint>& curve, const OperatingPoint& op) {
  if (curve.empty()) fail(ErrorCode::kInvalidArgument, "empty sweep");
  out << "series\tk\tauc\n";
  for (const auto& p : curve) out << "point\t" << p.k << '\t' << fmt_double(p.auc) << '\n';
  out << "marker\t" << op.k << '\t' << fmt_double(op.auc) << '\n';
}

namespace {

std::string stem_key(const std::string& phrase) {
  std::vector<std::string> toks = text::tokens(phrase);
  for (auto& t : toks) {
    if (t.size() > 3 && t.back() == 's' && t[t.size() - 2] != 's') t.pop_back();
  }
  return text::join(toks, " ");
}

}  // namespace

std::string template_question(const std::vector<std::string>& members) {
  if (members.empty()) fail(ErrorCode::kInvalidArgument, "question needs at least one symptom");
  std::vector<std::string> kept;
  std::set<std::string> seen;
  for (const auto& m : members) {
    if (seen.insert(stem_key(m)).second) kept.push_back(m);
  }
  return "Did the patient mention that he\\she " + text::join(kept, " or ") + "?";
}

std::map<int, std::string> read_overrides(std::istream& in) {
  std::map<int, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto f = text::split(line, '\t');
    if (line_no == 1 && f[0] == "node_id") continue;
    if (f.size() != 2 || text::trim(f[1]).empty()) {
      fail(ErrorCode::kFormat, "overrides:" + std::to_string(line_no) + ": expected node_id, question_text");
    }
    try {
      out[std::stoi(f[0])] = text::trim(f[1]);
    } catch (const std::exception&) {
      fail(ErrorCode::kFormat, "overrides:" + std::to_string(line_no) + ": bad node id '" + f[0] + "'");
    }
  }
  return out;
}

std::vector<std::string> Questionnaire::render_path(const dtree::Path& path) const {
  std::vector<std::string> out;
  for (const auto& step : path.steps) {
    out.push_back(questions.at(step.node).text + " " + (step.answer ? "yes" : "no"));
  }
  return out;
}

void Questionnaire::validate() const {
  if (features.size() != tree.n_features()) {
    fail(ErrorCode::kFormat, "questionnaire feature list does not match its tree");
  }
  for (std::size_t id = 0; id < tree.nodes().size(); ++id) {
    const auto& node = tree.nodes()[id];
    auto it = questions.find(static_cast<int>(id));
    if (!node.is_leaf() && (it == questions.end() || it->second.text.empty())) {
      fail(ErrorCode::kFormat, "question node " + std::to_string(id) + " has no text");
    }
  }
  for (const auto& [id, _] : questions) {
    if (id < 0 || static_cast<std::size_t>(id) >= tree.nodes().size() ||
        tree.nodes()[static_cast<std::size_t>(id)].is_leaf()) {
      fail(ErrorCode::kFormat, "question text attached to non-question node " + std::to_string(id));
    }
  }
}

json Questionnaire::to_json() const {
  json jf = json::array();
  for (std::size_t i = 0; i < features.size(); ++i) {
    jf.push_back({{"index", i},
                  {"cluster_id", features[i].cluster_id},
                  {"label", features[i].label},
                  {"members", features[i].members}});
  }
  json jq = json::array();
  for (const auto& [node, q] : questions) {
    jq.push_back({{"node", node}, {"text", q.text}, {"overridden", q.overridden}});
  }
  json jp = json::array();
  for (const auto& p : paths()) {
    json steps = json::array();
    for (const auto& s : p.steps) {
      steps.push_back({{"node", s.node}, {"answer", s.answer ? "yes" : "no"}});
    }
    jp.push_back({{"leaf", p.leaf},
                  {"steps", steps},
                  {"n_condition", p.n_condition},
                  {"n_control", p.n_control},
                  {"probability", p.probability}});
  }
  return {{"format", "qgen-questionnaire/1"},
          {"id", id},
          {"condition", condition},
          {"auc", auc},
          {"n_symptoms", n_symptoms},
          {"features", jf},
          {"questions", jq},
          {"tree", tree.to_json()},
          {"paths", jp},
          {"provenance",
           {{"corpus_hash", provenance.corpus_hash},
            {"lexicon_hash", provenance.lexicon_hash},
            {"embeddings_hash", provenance.embeddings_hash},
            {"config_hash", provenance.config_hash},
            {"seed", provenance.seed},
            {"k", provenance.k},
            {"linkage", provenance.linkage}}}};
}

Questionnaire Questionnaire::from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "qgen-questionnaire/1") {
      fail(ErrorCode::kFormat, "unsupported questionnaire format");
    }
    Questionnaire q;
    q.id = j.at("id").get<std::string>();
    q.condition = j.at("condition").get<std::string>();
    q.auc = j.at("auc").get<double>();
    q.n_symptoms = j.at("n_symptoms").get<int>();
    q.tree = dtree::DecisionTree::from_json(j.at("tree"));
    for (const auto& f : j.at("features")) {
      q.features.push_back({f.at("cluster_id").get<int>(),
                            f.at("members").get<std::vector<std::string>>(),
                            f.at("label").get<std::string>()});
    }
    for (const auto& jq : j.at("questions")) {
      q.questions[jq.at("node").get<int>()] = {jq.at("text").get<std::string>(),
                                               jq.at("overridden").get<bool>()};
    }
    const auto& p = j.at("provenance");
    q.provenance = {p.at("corpus_hash").get<std::string>(),
                    p.at("lexicon_hash").get<std::string>(),
                    p.at("embeddings_hash").get<std::string>(),
                    p.at("config_hash").get<std::string>(),
                    p.at("seed").get<std::uint64_t>(),
                    p.at("k").get<int>(),
                    p.at("linkage").get<std::string>()};
    q.validate();
    return q;
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed questionnaire: ") + e.what());
  }
}

Questionnaire Questionnaire::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read questionnaire: " + path);
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::kFormat, path + ": not valid JSON");
  try {
    return from_json(j);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void Questionnaire::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write questionnaire: " + path);
  out << to_json().dump(2) << '\n';
}

Questionnaire build_questionnaire(const std::string& condition, const SweepResult& sweep,
                                  const OperatingPoint& op,
                                  const std::map<int, std::string>& overrides,
                                  const Provenance& provenance) {
  const SweepEntry& entry = sweep.at_k(op.k);
  Questionnaire q;
  q.condition = condition;
  q.tree = entry.tree;
  q.auc = entry.auc;
  q.n_symptoms = sweep.n_symptoms;
  q.provenance = provenance;
  q.provenance.k = op.k;
  for (std::size_t c = 0; c < entry.partition.members.size(); ++c) {
    Feature f;
    f.cluster_id = static_cast<int>(c);
    for (int m : entry.partition.members[c]) {
      f.members.push_back(sweep.symptoms[static_cast<std::size_t>(m)]);
    }
    f.label = cluster::cluster_label(entry.partition.members[c], sweep.symptoms);
    q.features.push_back(std::move(f));
  }
  for (const auto& [id, _] : overrides) {
    if (id < 0 || static_cast<std::size_t>(id) >= q.tree.nodes().size() ||
        q.tree.node(id).is_leaf()) {
      fail(ErrorCode::kInvalidArgument, "override references non-question node " + std::to_string(id));
    }
  }
  for (std::size_t id = 0; id < q.tree.nodes().size(); ++id) {
    const auto& node = q.tree.nodes()[id];
    if (node.is_leaf()) continue;
    auto it = overrides.find(static_cast<int>(id));
    if (it != overrides.end()) {
      q.questions[static_cast<int>(id)] = {it->second, true};
    } else {
      q.questions[static_cast<int>(id)] = {
          template_question(q.features[static_cast<std::size_t>(node.feature)].members), false};
    }
  }
  std::string slug;
  for (char c : text::lower(condition)) slug.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '-');
  q.id = slug + "-" + sha256_hex(q.tree.to_json().dump() + provenance.config_hash).substr(0, 8);
  q.validate();
  return q;
}

std::string to_markdown(const Questionnaire& q) {
  std::string out;
  out += fmt::format("# {} screening questionnaire\n\n", q.condition);
  out += fmt::format("Questionnaire id: `{}`. Clusters: {}. Symptoms: {}. LOOCV AUC: {:.2f}.\n\n",
                     q.id, q.features.size(), q.n_symptoms, q.auc);
  const auto paths = q.paths();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& p = paths[i];
    out += fmt::format("## Path {}\n\n", i + 1);
    if (p.steps.empty()) out += "(no questions)\n";
    for (std::size_t s = 0; s < p.steps.size(); ++s) {
      out += fmt::format("{}. {} **{}**\n", s + 1, q.questions.at(p.steps[s].node).text,
                         p.steps[s].answer ? "Yes" : "No");
    }
    out += fmt::format("\nProbability of {}: {:.2f} ({} condition / {} control)\n\n", q.condition,
                       p.probability, p.n_condition, p.n_control);
  }
  return out;
}

namespace {

// First occurrence of any phrase of `entry` in `toks`: (start, length).
std::optional<std::pair<std::size_t, std::size_t>> locate(const std::vector<std::string>& toks,
                                                          const symptoms::LexiconEntry& entry) {
  std::vector<std::vector<std::string>> phrases{text::split_ws(entry.canonical)};
  for (const auto& s : entry.synonyms) phrases.push_back(text::split_ws(s));
  for (std::size_t i = 0; i < toks.size(); ++i) {
    for (const auto& ph : phrases) {
      if (i + ph.size() <= toks.size() &&
          std::equal(ph.begin(), ph.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) {
        return std::pair{i, ph.size()};
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<EvidenceRow> collect_evidence(const Questionnaire& q,
                                          const std::vector<const corpus::UserRecord*>& users,
                                          const symptoms::PostSelector& select,
                                          const symptoms::SymptomLexicon& lexicon,
                                          std::size_t per_symptom, std::uint64_t seed) {
  // symptom index -> candidate posts, ordered by id
  std::map<std::size_t, std::vector<const corpus::Post*>> by_symptom;
  for (const auto* u : users) {
    for (const corpus::Post* p : select(*u)) {
      for (std::size_t idx : lexicon.match(p->text())) by_symptom[idx].push_back(p);
    }
  }
  for (auto& [_, posts] : by_symptom) {
    std::sort(posts.begin(), posts.end(),
              [](const auto* a, const auto* b) { return a->id < b->id; });
  }
  Rng rng(seed);
  std::vector<EvidenceRow> rows;
  for (const auto& [node, _] : q.questions) {
    const auto& feature = q.features[static_cast<std::size_t>(q.tree.node(node).feature)];
    for (const auto& symptom : feature.members) {
      const auto idx = lexicon.index_of(symptom);
      if (idx < 0) fail(ErrorCode::kNotFound, "questionnaire symptom not in lexicon: " + symptom);
      const auto& pool = by_symptom[static_cast<std::size_t>(idx)];
      const auto& entry = lexicon.entries()[static_cast<std::size_t>(idx)];
      for (std::size_t pick : rng.sample(pool.size(), per_symptom)) {
        const corpus::Post* p = pool[pick];
        const auto toks = text::tokens(p->text());
        std::string snippet;
        if (auto hit = locate(toks, entry)) {
          const std::size_t from = hit->first >= 15 ? hit->first - 15 : 0;
          const std::size_t to = std::min(toks.size(), hit->first + hit->second + 15);
          snippet = text::join({toks.begin() + static_cast<std::ptrdiff_t>(from),
                                toks.begin() + static_cast<std::ptrdiff_t>(to)},
                               " ");
        }
        rows.push_back({node, symptom, p->id, p->author, snippet});
      }
    }
  }
  return rows;
}

void write_evidence_tsv(std::ostream& out, const std::vector<EvidenceRow>& rows) {
  out << "node_id\tsymptom\tpost_id\tauthor\tsnippet\n";
  for (const auto& r : rows) {
    out << r.node << '\t' << r.symptom << '\t' << r.post_id << '\t' << r.author << '\t'
        << text::tsv_escape(r.snippet) << '\n';
  }
}

}  // namespace qgen::quest
