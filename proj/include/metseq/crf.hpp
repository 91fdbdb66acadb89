#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "metseq/corpus.hpp"
#include "metseq/types.hpp"

namespace metseq {

enum class FeatureGroup { Surface, Syntactic, Ngram, Grammatical };

std::string_view feature_group_name(FeatureGroup group);

/// Group encoded by the canonical name prefix: `sur:`/`bnd` -> Surface,
/// `pos:` -> Syntactic, `lem:` -> Ngram, `dep:`/`dephead:` -> Grammatical.
FeatureGroup feature_group(std::string_view name);

/// Canonical feature names for token i with context offsets up to +-radius.
/// Offset 0 carries the surface predicates (emitted only when true), POS,
/// dependency role and (role, head lemma); context offsets add the lemma;
/// out-of-bounds offsets emit `bnd@+-k`. The result is sorted and
/// duplicate-free.
std::vector<std::string> extract_features(const Sample& sample, std::size_t i,
                                          int radius);

/// Linear-chain CRF: per-position feature weights plus label transition
/// weights. Score of a labeling is
///   sum_t unary(F_t, y_t) + sum_{t>0} transition(y_{t-1}, y_t).
struct CrfModel {
  std::vector<Label> labels;
  std::vector<std::string> feature_names;  // index order
  std::unordered_map<std::string, Index> feature_index;
  Matrix unary;       // n_features x n_labels
  Matrix transition;  // n_labels x n_labels
  double l2 = 0.1;
  int context_radius = 2;

  Index n_labels() const { return static_cast<Index>(labels.size()); }
  Index n_features() const { return static_cast<Index>(feature_names.size()); }
  Index label_index(Label label) const;
  /// Known feature names -> indices; unknown names are dropped (they score 0).
  std::vector<Index> resolve(const std::vector<std::string>& names) const;
};

/// Builds a model skeleton (zero weights) over the given feature names.
CrfModel make_crf_model(std::vector<Label> labels,
                        std::vector<std::string> feature_names, double l2,
                        int context_radius);

/// Active feature indices per position.
using FeatureSeq = std::vector<std::vector<Index>>;

FeatureSeq featurize(const CrfModel& model, const Sample& sample);

/// Per-position unary score matrix (T x L).
Matrix unary_scores(const CrfModel& model, const FeatureSeq& features);

double crf_score(const CrfModel& model, const FeatureSeq& features,
                 const std::vector<int>& labels);

struct Marginals {
  double log_z = 0.0;
  Matrix unary;                  // T x L, rows sum to 1
  std::vector<Matrix> pairwise;  // T-1 entries, each L x L
};

/// Forward-backward in log space.
Marginals log_partition_and_marginals(const CrfModel& model,
                                      const FeatureSeq& features);

struct CrfInstance {
  FeatureSeq features;
  std::vector<int> gold;
};

// Flat parameter order: unary (column-major), then transition (column-major).
Index crf_param_count(const CrfModel& model);
Vector crf_get_params(const CrfModel& model);
void crf_set_params(CrfModel& model, const Vector& params);

/// Regularized negative log-likelihood over the batch and its gradient:
/// loss = sum (logZ - score(gold)) + l2*||w||^2,
/// grad = (expected - empirical counts) + 2*l2*w.
std::pair<double, Vector> nll_and_gradient(const CrfModel& model,
                                           const std::vector<CrfInstance>& batch);

struct CrfHyper {
  double l2 = 0.1;
  int max_iters = 200;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
};

struct CrfTrainResult {
  CrfModel model;
  std::vector<double> loss_trace;  // accepted iterations, non-increasing
};

/// Full-batch gradient descent with a backtracking line search (the step is
/// halved until the regularized NLL decreases).
CrfTrainResult train_crf(const Corpus& train, int radius, const CrfHyper& hyper,
                         Granularity granularity = Granularity::Fine);

/// Max-score labeling; among ties returns the lexicographically smallest
/// label-index sequence (lowest label index wins, earliest position first).
std::vector<int> viterbi_indices(const CrfModel& model,
                                 const FeatureSeq& features);
std::vector<Label> viterbi(const CrfModel& model, const FeatureSeq& features);

std::vector<Label> crf_predict(const CrfModel& model, const Sample& sample);

struct RankedFeature {
  std::string name;
  FeatureGroup group;
  double importance;  // max over labels of |unary weight|
};

struct FeatureRanking {
  std::vector<RankedFeature> top;
  std::map<FeatureGroup, double> shares;  // fraction of top entries per group
  std::string note;                       // set when k exceeds feature count
};

FeatureRanking rank_informative_features(const CrfModel& model, std::size_t k);

void save_crf(const CrfModel& model, std::ostream& out);
CrfModel load_crf(std::istream& in);
void save_crf_file(const CrfModel& model, const std::string& path);
CrfModel load_crf_file(const std::string& path);

}  // namespace metseq
