#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "metseq/corpus.hpp"
#include "metseq/embeddings.hpp"
#include "metseq/types.hpp"

namespace metseq {

/// Lemma-class co-occurrence counts around metonymic spans. Marginals always
/// equal the row/column sums of the joint table (also after thresholding).
struct CooccurrenceCounts {
  std::map<std::pair<std::string, Label>, std::int64_t> joint;
  std::map<std::string, std::int64_t> word_totals;
  std::map<Label, std::int64_t> class_totals;
  std::int64_t grand_total = 0;

  void add(const std::string& word, Label cls, std::int64_t count = 1);
  /// Drops words with word_total < min_count and recomputes all marginals.
  void apply_threshold(std::int64_t min_count);
};

/// Counts lowercased lemmas of up to `window` tokens on each side of every
/// metonymic span (span tokens excluded, truncated at sample bounds) against
/// the span's fine class, then applies the word-frequency threshold.
CooccurrenceCounts collect_contexts(const Corpus& corpus, int window,
                                    std::int64_t min_count);

/// NPMI(w,c) = ln(p(w,c)/(p(w)p(c))) / -ln(p(w,c)) with maximum-likelihood
/// probabilities; absent when joint(w,c) = 0; 1 in the degenerate
/// p(w,c) = 1 case. Always in [-1, 1].
std::optional<double> npmi(const CooccurrenceCounts& counts,
                           const std::string& word, Label cls);

struct AssociationTable {
  std::map<std::pair<std::string, Label>, double> scores;
};

AssociationTable npmi_table(const CooccurrenceCounts& counts);

/// Descending by score, ties broken lexicographically by word.
std::vector<std::pair<std::string, double>> top_k_words(
    const AssociationTable& table, Label cls, std::size_t k);

struct CosineReport {
  double mean = 0.0;
  std::size_t n_pairs = 0;
  std::vector<std::string> dropped;  // words absent from the table
};

/// Mean cosine similarity over all unordered distinct pairs of the words
/// found in the table; the cosine of a zero vector with anything is 0.
CosineReport avg_pairwise_cosine(const std::vector<std::string>& words,
                                 const EmbeddingTable& table);

}  // namespace metseq
