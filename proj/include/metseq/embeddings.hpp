#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "metseq/corpus.hpp"
#include "metseq/types.hpp"

namespace metseq {

enum class OovPolicy { Zero, Mean, NamedUnknown };

/// Reserved key consulted under the NamedUnknown policy.
inline constexpr const char* kUnknownToken = "<unk>";

/// Type-level embedding table. Vectors are rows of one dense matrix; tokens
/// keep their file order so serialization round-trips.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(Index dim, OovPolicy policy) : dim_(dim), policy_(policy) {}

  Index dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  OovPolicy oov_policy() const { return policy_; }
  void set_oov_policy(OovPolicy policy) { policy_ = policy; }
  std::size_t n_duplicates() const { return n_duplicates_; }

  /// Inserts or overwrites (last occurrence wins).
  void insert(const std::string& token, const Vector& vector);
  bool contains(const std::string& token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  const Vector& stored(const std::string& token) const;

  /// Mean of all stored vectors (the Mean policy fallback).
  const Vector& mean() const;

  friend EmbeddingTable load_static(std::istream& in);

 private:
  Index dim_ = 0;
  OovPolicy policy_ = OovPolicy::Zero;
  std::vector<std::string> tokens_;
  std::vector<Vector> rows_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t n_duplicates_ = 0;
  mutable Vector mean_;
  mutable bool mean_valid_ = false;
};

/// Parses the whitespace-separated text layout: one token per line followed
/// by its components.
EmbeddingTable load_static(std::istream& in);
EmbeddingTable load_static_file(const std::string& path);
void save_static(const EmbeddingTable& table, std::ostream& out);
void save_static_file(const EmbeddingTable& table, const std::string& path);

/// Exact-match lookup on the lowercased token; on miss the table's OOV
/// policy decides the result.
Vector embed_token(const EmbeddingTable& table, std::string_view token);

/// Elementwise sum per group; output i corresponds to group i's word so the
/// feature length of a sequence matches its label length.
std::vector<Vector> sum_subword_vectors(
    const std::vector<std::pair<std::size_t, std::vector<Vector>>>& groups);

/// Occurrence-level vectors keyed by (sample id, token index), loaded from a
/// precomputed file and validated for full coverage of a corpus.
class ContextualVectors {
 public:
  Index dim() const { return dim_; }
  const Matrix& sample_matrix(const std::string& sample_id) const;
  Vector at(const std::string& sample_id, std::size_t token_index) const;

  friend ContextualVectors load_contextual(std::istream& in, const Corpus& corpus);

 private:
  Index dim_ = 0;
  std::unordered_map<std::string, Matrix> per_sample_;
};

ContextualVectors load_contextual(std::istream& in, const Corpus& corpus);
ContextualVectors load_contextual_file(const std::string& path, const Corpus& corpus);

}  // namespace metseq
