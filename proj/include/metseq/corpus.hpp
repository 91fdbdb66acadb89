#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metseq/types.hpp"

namespace metseq {

/// One annotated token. Linguistic annotations are input columns, not
/// computed here. head_index is 0-based within the containing sentence;
/// kRootHead marks the dependency root.
struct Token {
  std::string surface;
  std::string lemma;
  std::string pos;
  std::string dep_role;
  int head_index = kRootHead;

  static constexpr int kRootHead = -1;

  bool operator==(const Token&) const = default;
};

/// Span annotation over sample-level token indices, end exclusive.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  Label label = Label::LIT;

  bool operator==(const Span&) const = default;
};

struct Sample {
  std::string id;
  std::vector<Token> tokens;
  std::vector<Label> gold;
  std::vector<Span> pmw_spans;
  /// Token indices that start a new sentence (index 0 is implicit).
  std::vector<std::size_t> sentence_breaks;

  std::size_t size() const { return tokens.size(); }
  std::size_t n_sentences() const {
    return tokens.empty() ? 0 : sentence_breaks.size() + 1;
  }
  /// [begin, end) of the sentence containing token i.
  std::pair<std::size_t, std::size_t> sentence_bounds(std::size_t i) const;
  /// Sample-level index of token i's dependency head, or nullopt for root.
  std::optional<std::size_t> head_of(std::size_t i) const;

  bool operator==(const Sample&) const = default;
};

struct Corpus {
  std::vector<Sample> samples;
  LabelScheme scheme;

  std::size_t size() const { return samples.size(); }
};

struct CorpusStats {
  std::size_t n_samples = 0;
  std::size_t n_sentences = 0;
  double avg_sample_length_tokens = 0.0;
  std::size_t n_tokens = 0;
  std::size_t n_unique_tokens = 0;
  std::map<Label, std::size_t> per_label_token_counts;
  /// count(LIT) / count(non-LIT); absent when there are no positive tokens.
  std::optional<double> majority_minority_ratio;
};

/// Expands span annotations into one label per token: span tokens carry the
/// span label, everything else is LIT. Spans must be in bounds, non-LIT and
/// non-overlapping.
std::vector<Label> relabel(std::size_t n_tokens, const std::vector<Span>& spans);

/// Checks every Sample invariant; throws ValidationError naming the sample.
void validate_sample(const Sample& sample);

Corpus parse_corpus(std::istream& in);
void serialize_corpus(const Corpus& corpus, std::ostream& out);

Corpus load_corpus_file(const std::string& path);
void save_corpus_file(const Corpus& corpus, const std::string& path);

struct SplitResult {
  Corpus train, val, test;
  std::vector<std::string> warnings;
};

/// Partitions the corpus so that every lowercased metonymic surface form
/// lands in at most one partition. Groups of samples tied together by shared
/// span surfaces are shuffled by seed and greedily assigned to the partition
/// with the most remaining capacity.
SplitResult split_disjoint(const Corpus& corpus,
                           const std::array<double, 3>& ratios,
                           std::uint64_t seed);

CorpusStats compute_stats(const Corpus& corpus);

/// Lowercased surface text of a span (used for split disjointness).
std::string span_surface(const Sample& sample, const Span& span);

}  // namespace metseq
