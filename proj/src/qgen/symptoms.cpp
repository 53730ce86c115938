#include "qgen/symptoms.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <spdlog/spdlog.h>

#include "qgen/error.hpp"
#include "qgen/parallel.hpp"
#include "qgen/text.hpp"

namespace qgen::symptoms {

SymptomLexicon SymptomLexicon::load(const std::vector<std::string>& paths) {
  SymptomLexicon lex;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::kIo, "cannot read lexicon: " + path);
    lex.merge(parse(in, path));
  }
  return lex;
}

SymptomLexicon SymptomLexicon::parse(std::istream& in, const std::string& origin) {
  SymptomLexicon lex;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty() || line[0] == '#') continue;
    auto f = text::split(line, '\t');
    if (line_no == 1 && text::lower(text::trim(f[0])) == "canonical") continue;
    if (f.size() < 1 || f.size() > 3 || text::trim(f[0]).empty()) {
      fail(ErrorCode::kFormat, origin + ":" + std::to_string(line_no) + ": malformed lexicon row");
    }
    lex.add(f[0], f.size() > 1 ? f[1] : "", f.size() > 2 ? text::trim(f[2]) : "external-lexicon");
  }
  if (lex.empty()) spdlog::warn("lexicon {} is empty", origin);
  return lex;
}

std::size_t SymptomLexicon::entry_for(const std::string& canonical) {
  auto it = by_canonical_.find(canonical);
  if (it != by_canonical_.end()) return it->second;
  if (auto taken = by_phrase_.find(canonical); taken != by_phrase_.end()) {
    fail(ErrorCode::kConflict, "symptom phrase '" + canonical + "' maps to both '" +
                                   entries_[taken->second].canonical + "' and '" + canonical + "'");
  }
  const std::size_t idx = entries_.size();
  entries_.push_back({canonical, {}, {}});
  by_canonical_.emplace(canonical, idx);
  claim(canonical, idx);
  return idx;
}

void SymptomLexicon::claim(const std::string& phrase, std::size_t entry) {
  auto [it, inserted] = by_phrase_.emplace(phrase, entry);
  if (!inserted) {
    if (it->second == entry) return;
    fail(ErrorCode::kConflict, "symptom phrase '" + phrase + "' maps to both '" +
                                   entries_[it->second].canonical + "' and '" +
                                   entries_[entry].canonical + "'");
  }
  auto toks = text::split_ws(phrase);
  auto& bucket = by_first_token_[toks.front()];
  bucket.emplace_back(std::move(toks), entry);
  std::stable_sort(bucket.begin(), bucket.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
}

void SymptomLexicon::add(const std::string& canonical_raw, const std::string& synonym_raw,
                         const std::string& source) {
  const std::string canonical = text::normalize(canonical_raw);
  if (canonical.empty()) fail(ErrorCode::kFormat, "empty canonical symptom");
  const std::string synonym = text::normalize(synonym_raw);
  // Claim the synonym before creating a new entry so a conflict leaves the
  // lexicon untouched.
  if (!synonym.empty() && synonym != canonical) {
    auto it = by_phrase_.find(synonym);
    if (it != by_phrase_.end() && entries_[it->second].canonical != canonical) {
      fail(ErrorCode::kConflict, "symptom phrase '" + synonym + "' maps to both '" +
                                     entries_[it->second].canonical + "' and '" + canonical + "'");
    }
  }
  const std::size_t idx = entry_for(canonical);
  if (!source.empty()) entries_[idx].sources.insert(source);
  if (!synonym.empty() && synonym != canonical) {
    claim(synonym, idx);
    entries_[idx].synonyms.insert(synonym);
  }
}

void SymptomLexicon::merge(const SymptomLexicon& other) {
  for (const auto& e : other.entries_) {
    for (const auto& src : e.sources.empty() ? std::set<std::string>{""} : e.sources) {
      add(e.canonical, "", src);
      for (const auto& syn : e.synonyms) add(e.canonical, syn, src);
    }
  }
}

std::vector<std::string> SymptomLexicon::canonicals() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.canonical);
  return out;
}

std::ptrdiff_t SymptomLexicon::index_of(const std::string& canonical) const {
  auto it = by_canonical_.find(text::normalize(canonical));
  return it == by_canonical_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

std::set<std::size_t> SymptomLexicon::match(const std::string& input) const {
  std::set<std::size_t> found;
  const auto toks = text::tokens(input);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    auto it = by_first_token_.find(toks[i]);
    if (it == by_first_token_.end()) continue;
    for (const auto& [phrase, entry] : it->second) {
      if (i + phrase.size() > toks.size()) continue;
      if (std::equal(phrase.begin(), phrase.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) {
        found.insert(entry);
      }
    }
  }
  return found;
}

std::set<std::string> match_symptoms(const std::string& text, const SymptomLexicon& lexicon) {
  std::set<std::string> out;
  for (std::size_t idx : lexicon.match(text)) out.insert(lexicon.entries()[idx].canonical);
  return out;
}

std::size_t SymptomProfile::user_index(const std::string& user) const {
  auto it = std::lower_bound(users.begin(), users.end(), user);
  if (it == users.end() || *it != user) fail(ErrorCode::kNotFound, "user not profiled: " + user);
  return static_cast<std::size_t>(it - users.begin());
}

void SymptomProfile::write_tsv(std::ostream& out, const std::map<std::string, bool>* labels) const {
  out << "user";
  if (labels) out << "\tlabel";
  for (const auto& s : symptoms) out << '\t' << s;
  out << '\n';
  for (std::size_t u = 0; u < users.size(); ++u) {
    out << users[u];
    if (labels) out << '\t' << (labels->at(users[u]) ? 1 : 0);
    for (auto v : mentions[u]) out << '\t' << static_cast<int>(v);
    out << '\n';
  }
}

SymptomProfile SymptomProfile::read_tsv(std::istream& in, std::map<std::string, bool>* labels) {
  SymptomProfile p;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kFormat, "profile: missing header");
  auto header = text::split(line, '\t');
  const bool has_label = header.size() > 1 && header[1] == "label";
  const std::size_t first = has_label ? 2 : 1;
  p.symptoms.assign(header.begin() + static_cast<std::ptrdiff_t>(first), header.end());
  p.user_counts.assign(p.symptoms.size(), 0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = text::split(line, '\t');
    if (f.size() != header.size()) fail(ErrorCode::kFormat, "profile: ragged row for " + f[0]);
    p.users.push_back(f[0]);
    if (has_label && labels) (*labels)[f[0]] = f[1] == "1";
    std::vector<std::uint8_t> row;
    for (std::size_t j = first; j < f.size(); ++j) {
      row.push_back(f[j] == "1" ? 1 : 0);
      p.user_counts[j - first] += row.back();
    }
    p.mentions.push_back(std::move(row));
  }
  if (!std::is_sorted(p.users.begin(), p.users.end())) {
    fail(ErrorCode::kFormat, "profile: users must be sorted");
  }
  return p;
}

SymptomProfile profile_population(const std::vector<const corpus::UserRecord*>& users,
                                  const SymptomLexicon& lexicon, const PostSelector& select,
                                  int jobs) {
  std::vector<const corpus::UserRecord*> sorted(users.begin(), users.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->author < b->author; });
  sorted.erase(std::unique(sorted.begin(), sorted.end(),
                           [](const auto* a, const auto* b) { return a->author == b->author; }),
               sorted.end());

  SymptomProfile p;
  p.symptoms = lexicon.canonicals();
  p.mentions.assign(sorted.size(), std::vector<std::uint8_t>(lexicon.size(), 0));
  parallel_for(sorted.size(), jobs, [&](std::size_t u) {
    for (const corpus::Post* post : select(*sorted[u])) {
      for (std::size_t idx : lexicon.match(post->text())) p.mentions[u][idx] = 1;
    }
  });
  p.user_counts.assign(lexicon.size(), 0);
  for (std::size_t u = 0; u < sorted.size(); ++u) {
    p.users.push_back(sorted[u]->author);
    for (std::size_t s = 0; s < lexicon.size(); ++s) p.user_counts[s] += p.mentions[u][s];
  }
  return p;
}

std::vector<std::string> top_symptoms(const SymptomProfile& profile, std::size_t k) {
  if (k < 1) fail(ErrorCode::kInvalidArgument, "top_symptoms: k must be >= 1");
  if (k > profile.symptoms.size()) {
    spdlog::warn("requested top {} symptoms but lexicon has {}", k, profile.symptoms.size());
  }
  std::vector<std::size_t> order(profile.symptoms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (profile.user_counts[a] != profile.user_counts[b]) {
      return profile.user_counts[a] > profile.user_counts[b];
    }
    return profile.symptoms[a] < profile.symptoms[b];
  });
  if (order.size() > k) order.resize(k);
  std::vector<std::string> out;
  for (std::size_t i : order) out.push_back(profile.symptoms[i]);
  return out;
}

std::vector<std::string> mentioned_symptoms(const SymptomProfile& profile) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < profile.symptoms.size(); ++i) {
    if (profile.user_counts[i] > 0) out.push_back(profile.symptoms[i]);
  }
  return out;
}

}  // namespace qgen::symptoms
