#include "qgen/wmd.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "qgen/error.hpp"
#include "qgen/parallel.hpp"
#include "qgen/text.hpp"

namespace qgen::wmd {

EmbeddingStore EmbeddingStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read embeddings: " + path);
  return parse(in, path);
}

EmbeddingStore EmbeddingStore::parse(std::istream& in, const std::string& origin) {
  EmbeddingStore store;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = text::split_ws(line);
    if (fields.empty()) continue;
    std::vector<double> vec;
    vec.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(fields[i], &used));
        if (used != fields[i].size()) throw std::invalid_argument(fields[i]);
      } catch (const std::exception&) {
        fail(ErrorCode::kFormat, origin + ":" + std::to_string(line_no) +
                                     ": bad vector component '" + fields[i] + "'");
      }
    }
    if (vec.empty()) {
      fail(ErrorCode::kFormat, origin + ":" + std::to_string(line_no) + ": word without vector");
    }
    if (store.dim_ != 0 && vec.size() != store.dim_) {
      fail(ErrorCode::kFormat, origin + ":" + std::to_string(line_no) + ": dimension " +
                                   std::to_string(vec.size()) + " differs from " +
                                   std::to_string(store.dim_));
    }
    store.add(fields[0], std::move(vec));
  }
  if (store.size() == 0) fail(ErrorCode::kFormat, origin + ": no vectors");
  return store;
}

void EmbeddingStore::add(std::string word, std::vector<double> vec) {
  if (vec.empty()) fail(ErrorCode::kInvalidArgument, "embedding dimension must be >= 1");
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) fail(ErrorCode::kInvalidArgument, "embedding dimension mismatch");
  word = text::lower(word);
  auto it = index_.find(word);
  if (it != index_.end()) {
    spdlog::warn("duplicate embedding for '{}'; keeping the last one", word);
    vectors_[it->second] = std::move(vec);
    return;
  }
  index_.emplace(std::move(word), vectors_.size());
  vectors_.push_back(std::move(vec));
}

const std::vector<double>* EmbeddingStore::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

Distribution phrase_to_distribution(std::string_view phrase, const EmbeddingStore& store) {
  std::map<std::string, int> counts;
  int total = 0;
  for (auto& tok : text::tokens(phrase)) {
    if (!store.find(tok)) continue;
    ++counts[tok];
    ++total;
  }
  Distribution d;
  for (auto& [word, c] : counts) {
    d.words.push_back(word);
    d.weights.push_back(static_cast<double>(c) / total);
  }
  return d;
}

double ground_distance(const std::vector<double>& a, const std::vector<double>& b,
                       GroundDistance kind) {
  if (kind == GroundDistance::kEuclidean) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }
  double dot = 0;
  double na = 0;
  double nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 1.0;
  return std::max(0.0, 1.0 - dot / std::sqrt(na * nb));
}

std::optional<double> wmd(const Distribution& a, const Distribution& b,
                          const EmbeddingStore& store, GroundDistance kind) {
  if (a.empty() || b.empty()) return std::nullopt;
  if (a.words == b.words && a.weights == b.weights) return 0.0;
  TransportProblem p;
  p.supply = a.weights;
  p.demand = b.weights;
  p.cost.reserve(a.words.size() * b.words.size());
  for (const auto& wa : a.words) {
    for (const auto& wb : b.words) {
      p.cost.push_back(wa == wb ? 0.0 : ground_distance(*store.find(wa), *store.find(wb), kind));
    }
  }
  return solve_transport(p).cost;
}

std::optional<double> wmd(std::string_view a, std::string_view b, const EmbeddingStore& store,
                          GroundDistance kind) {
  return wmd(phrase_to_distribution(a, store), phrase_to_distribution(b, store), store, kind);
}

DistanceMatrix::DistanceMatrix(std::vector<std::string> labels, std::vector<double> values)
    : labels_(std::move(labels)), values_(std::move(values)) {
  if (values_.size() != labels_.size() * labels_.size()) {
    fail(ErrorCode::kInvalidArgument, "distance matrix size does not match labels");
  }
}

void DistanceMatrix::validate() const {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    if (at(i, i) != 0.0) fail(ErrorCode::kInvalidArgument, "distance matrix diagonal must be 0");
    for (std::size_t j = 0; j < n; ++j) {
      if (!(at(i, j) >= 0) || !std::isfinite(at(i, j))) {
        fail(ErrorCode::kInvalidArgument, "distance matrix entries must be finite and >= 0");
      }
      if (std::abs(at(i, j) - at(j, i)) > 1e-9) {
        fail(ErrorCode::kInvalidArgument, "distance matrix is not symmetric");
      }
    }
  }
}

void DistanceMatrix::write_tsv(std::ostream& out) const {
  out << "symptom";
  for (const auto& l : labels_) out << '\t' << l;
  out << '\n';
  std::ostringstream cell;
  for (std::size_t i = 0; i < size(); ++i) {
    out << labels_[i];
    for (std::size_t j = 0; j < size(); ++j) {
      cell.str({});
      cell << std::setprecision(17) << at(i, j);
      out << '\t' << cell.str();
    }
    out << '\n';
  }
}

DistanceMatrix DistanceMatrix::read_tsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kFormat, "distance matrix: missing header");
  auto header = text::split(line, '\t');
  std::vector<std::string> labels(header.begin() + 1, header.end());
  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = text::split(line, '\t');
    if (fields.size() != labels.size() + 1 || row >= labels.size() || fields[0] != labels[row]) {
      fail(ErrorCode::kFormat, "distance matrix: malformed row " + std::to_string(row + 1));
    }
    for (std::size_t j = 1; j < fields.size(); ++j) values.push_back(std::stod(fields[j]));
    ++row;
  }
  if (row != labels.size()) fail(ErrorCode::kFormat, "distance matrix: missing rows");
  DistanceMatrix m(std::move(labels), std::move(values));
  m.validate();
  return m;
}

DistanceMatrix distance_matrix(const std::vector<std::string>& symptoms,
                               const EmbeddingStore& store, const MatrixOptions& options) {
  const std::size_t n = symptoms.size();
  {
    std::set<std::string> unique(symptoms.begin(), symptoms.end());
    if (unique.size() != n) fail(ErrorCode::kInvalidArgument, "symptoms must be deduplicated");
  }
  std::vector<Distribution> dists;
  dists.reserve(n);
  for (const auto& s : symptoms) dists.push_back(phrase_to_distribution(s, store));

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  std::vector<std::optional<double>> solved(pairs.size());
  parallel_for(pairs.size(), options.jobs, [&](std::size_t k) {
    solved[k] = wmd(dists[pairs[k].first], dists[pairs[k].second], store, options.ground);
  });

  double sentinel = 0;
  if (options.sentinel) {
    sentinel = *options.sentinel;
  } else {
    bool any = false;
    for (const auto& d : solved) {
      if (d) {
        sentinel = std::max(sentinel, *d);
        any = true;
      }
    }
    if (!any) sentinel = 1e6;
  }
  std::size_t oov = 0;
  for (const auto& d : dists) oov += d.empty() ? 1 : 0;
  if (oov > 0) spdlog::warn("{} symptom(s) have no in-vocabulary words; using sentinel {}", oov, sentinel);

  std::vector<double> values(n * n, 0.0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    const double d = solved[k].value_or(sentinel);
    values[i * n + j] = d;
    values[j * n + i] = d;
  }
  return DistanceMatrix(symptoms, std::move(values));
}

}  // namespace qgen::wmd
