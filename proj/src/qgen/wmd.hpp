#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qgen/transport.hpp"

namespace qgen::wmd {

enum class GroundDistance { kEuclidean, kCosine };

// Read-only word vectors keyed by lowercase word. OOV words are dropped by
// phrase_to_distribution.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  // Text format: `word v1 ... vd` per line. Duplicate words: last one wins.
  static EmbeddingStore load(const std::string& path);
  static EmbeddingStore parse(std::istream& in, const std::string& origin = "<stream>");

  void add(std::string word, std::vector<double> vec);

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return index_.size(); }
  const std::vector<double>* find(std::string_view word) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<double>> vectors_;
};

// nBOW distribution over the in-vocabulary tokens of a phrase.
struct Distribution {
  std::vector<std::string> words;
  std::vector<double> weights;
  bool empty() const { return words.empty(); }
};

// Tokenizes, drops OOV tokens, merges repeats. An all-OOV phrase yields an
// empty distribution.
Distribution phrase_to_distribution(std::string_view phrase, const EmbeddingStore& store);

double ground_distance(const std::vector<double>& a, const std::vector<double>& b,
                       GroundDistance kind);

// Word Mover's Distance. nullopt when either phrase has no in-vocabulary token.
std::optional<double> wmd(std::string_view a, std::string_view b, const EmbeddingStore& store,
                          GroundDistance kind = GroundDistance::kEuclidean);

// Same, over prepared distributions.
std::optional<double> wmd(const Distribution& a, const Distribution& b,
                          const EmbeddingStore& store,
                          GroundDistance kind = GroundDistance::kEuclidean);

class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  DistanceMatrix(std::vector<std::string> labels, std::vector<double> values);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  double at(std::size_t i, std::size_t j) const { return values_[i * size() + j]; }
  const std::vector<double>& values() const { return values_; }

  // Symmetric within 1e-9, zero diagonal, nonnegative.
  void validate() const;

  void write_tsv(std::ostream& out) const;
  static DistanceMatrix read_tsv(std::istream& in);

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
};

struct MatrixOptions {
  GroundDistance ground = GroundDistance::kEuclidean;
  // Distance assigned to pairs involving an all-OOV phrase. Unset: the
  // largest finite pairwise distance, or 1e6 when there is none.
  std::optional<double> sentinel;
  int jobs = 1;
};

// One solve per unordered pair; requires deduplicated symptoms.
DistanceMatrix distance_matrix(const std::vector<std::string>& symptoms,
                               const EmbeddingStore& store, const MatrixOptions& options = {});

}  // namespace qgen::wmd
