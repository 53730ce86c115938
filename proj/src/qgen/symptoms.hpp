#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "qgen/corpus.hpp"

namespace qgen::symptoms {

struct LexiconEntry {
  std::string canonical;
  std::set<std::string> synonyms;  // normalized; excludes the canonical itself
  std::set<std::string> sources;   // e.g. external-lexicon, cohort-stage
};

// Canonical symptom phrases with synonyms. Every phrase (canonical or
// synonym) maps to exactly one canonical.
class SymptomLexicon {
 public:
  SymptomLexicon() = default;

  // TSV columns canonical, synonym, source. Several files merge into one
  // lexicon; a phrase claimed by two canonicals throws kConflict.
  static SymptomLexicon load(const std::vector<std::string>& paths);
  static SymptomLexicon parse(std::istream& in, const std::string& origin = "<stream>");

  void add(const std::string& canonical, const std::string& synonym, const std::string& source);
  void merge(const SymptomLexicon& other);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<LexiconEntry>& entries() const { return entries_; }
  std::vector<std::string> canonicals() const;
  std::ptrdiff_t index_of(const std::string& canonical) const;

  // Canonical indices mentioned in text: case-insensitive contiguous
  // whole-token matching after punctuation normalization.
  std::set<std::size_t> match(const std::string& text) const;

 private:
  std::size_t entry_for(const std::string& canonical);
  void claim(const std::string& phrase, std::size_t entry);

  std::vector<LexiconEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_canonical_;
  std::unordered_map<std::string, std::size_t> by_phrase_;
  // first token -> (phrase tokens, entry), longest phrases first
  std::unordered_map<std::string, std::vector<std::pair<std::vector<std::string>, std::size_t>>>
      by_first_token_;
};

// Canonical phrases mentioned in text.
std::set<std::string> match_symptoms(const std::string& text, const SymptomLexicon& lexicon);

struct SymptomProfile {
  std::vector<std::string> symptoms;  // lexicon canonicals, in lexicon order
  std::vector<std::string> users;     // sorted
  std::vector<std::vector<std::uint8_t>> mentions;  // users x symptoms, 0/1
  std::vector<int> user_counts;                     // distinct users per symptom

  std::size_t user_index(const std::string& user) const;

  // user x symptom 0/1 matrix with an optional label column.
  void write_tsv(std::ostream& out, const std::map<std::string, bool>* labels = nullptr) const;
  static SymptomProfile read_tsv(std::istream& in, std::map<std::string, bool>* labels = nullptr);
};

using PostSelector = std::function<std::vector<const corpus::Post*>(const corpus::UserRecord&)>;

SymptomProfile profile_population(const std::vector<const corpus::UserRecord*>& users,
                                  const SymptomLexicon& lexicon, const PostSelector& select,
                                  int jobs = 1);

// Top k canonicals by distinct-user count; ties lexicographic.
std::vector<std::string> top_symptoms(const SymptomProfile& profile, std::size_t k);

// Canonicals with at least one mentioning user, in profile order.
std::vector<std::string> mentioned_symptoms(const SymptomProfile& profile);

}  // namespace qgen::symptoms
