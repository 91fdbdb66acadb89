#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "metseq/corpus.hpp"
#include "metseq/embeddings.hpp"
#include "metseq/rng.hpp"
#include "metseq/types.hpp"

namespace metseq {

/// Gated recurrent cell parameters:
///   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
///   r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
///   c_t = tanh(Wc x_t + Uc (r_t . h_{t-1}) + bc)
///   h_t = (1 - z_t) . h_{t-1} + z_t . c_t,  h_0 = 0.
struct RecurrentParams {
  Matrix w_update, u_update;
  Vector b_update;
  Matrix w_reset, u_reset;
  Vector b_reset;
  Matrix w_cand, u_cand;
  Vector b_cand;

  Index input_dim() const { return w_update.cols(); }
  Index hidden_dim() const { return w_update.rows(); }

  static RecurrentParams zeros(Index input, Index hidden);
};

/// One hidden state per input row; an empty input yields an empty result
/// (the designated final state is then the zero vector).
Matrix recurrent_forward(const RecurrentParams& params, const Matrix& inputs);
Vector recurrent_final_state(const RecurrentParams& params, const Matrix& inputs);

struct AffineClassifier {
  Matrix weight;  // n_labels x feature_dim
  Vector bias;
};

Vector log_softmax(const Vector& logits);

/// Full-sequence labeler: a forward pass and a backward pass over the token
/// vectors; position t is classified from [fwd h_t ; bwd h_t].
struct SeqModel {
  std::vector<Label> labels;
  RecurrentParams fwd, bwd;
  AffineClassifier cls;

  Index n_labels() const { return static_cast<Index>(labels.size()); }
  Index input_dim() const { return fwd.input_dim(); }
  Index hidden_dim() const { return fwd.hidden_dim(); }
};

/// Per-token log-probabilities, one row per position; rows log-sum to 0.
Matrix seqlab_forward(const SeqModel& model, const Matrix& inputs);

enum class WindowSides { One, Both };

std::string_view window_sides_name(WindowSides sides);
WindowSides parse_window_sides(std::string_view name);

/// Per-side context budgets for a window of length n: `One` means n tokens
/// on each side, `Both` splits n across the two sides (left gets the odd
/// token).
std::pair<int, int> side_budgets(int n, WindowSides sides);

/// Target-masked context classifier: the left window runs left-to-right, the
/// right window runs right-to-left (adjacent token last, mirroring the left
/// recurrence); the two final states are concatenated and classified. The
/// target token's vector is never an input.
struct WindowModel {
  std::vector<Label> labels;
  RecurrentParams left, right;
  AffineClassifier cls;
  int n = 5;
  WindowSides sides = WindowSides::One;

  Index n_labels() const { return static_cast<Index>(labels.size()); }
  Index input_dim() const { return left.input_dim(); }
  Index hidden_dim() const { return left.hidden_dim(); }
};

/// Rows [max(0,i-n_left) .. i-1] and [i+1 .. min(len-1, i+n_right)] of the
/// sample's vectors, both in textual order; the target row is excluded and
/// windows truncate at the sample bounds.
std::pair<Matrix, Matrix> extract_window(const Matrix& vectors, std::size_t i,
                                         int n_left, int n_right);
inline std::pair<Matrix, Matrix> extract_window(const Matrix& vectors,
                                                std::size_t i, int n) {
  return extract_window(vectors, i, n, n);
}

Vector window_forward(const WindowModel& model, const Matrix& left,
                      const Matrix& right);

/// Keeps every non-majority instance and exactly round(fraction*M) majority
/// instances chosen by seeded shuffle; the retained list is re-shuffled.
/// Instances must expose a `label` member.
template <typename Inst>
std::vector<Inst> downsample_majority(const std::vector<Inst>& instances,
                                      double fraction, Label majority_label,
                                      std::uint64_t seed);

struct TrainConfig {
  double downsample_fraction = 0.15;
  double learning_rate = 0.1;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
  Granularity granularity = Granularity::Coarse;
  Index hidden_dim = 64;
  int window_n = 5;
  WindowSides window_sides = WindowSides::One;
};

/// Produces the per-sample token vector matrix (one row per token).
using TokenVectorFn = std::function<Matrix(const Sample&)>;

TokenVectorFn make_static_source(const EmbeddingTable& table);
TokenVectorFn make_contextual_source(const ContextualVectors& vectors);

struct TrainedSeq {
  SeqModel model;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

struct TrainedWindow {
  WindowModel model;
  std::vector<double> loss_trace;
};

/// Mini-batch SGD over whole samples (no downsampling).
TrainedSeq train_seqlab(const Corpus& train, const TokenVectorFn& vectors,
                        Index input_dim, const TrainConfig& config);

/// Mini-batch SGD over per-token instances, majority class downsampled.
TrainedWindow train_window(const Corpus& train, const TokenVectorFn& vectors,
                           Index input_dim, const TrainConfig& config);

std::vector<Label> seqlab_predict(const SeqModel& model, const Matrix& inputs);
std::vector<Label> window_predict(const WindowModel& model, const Matrix& inputs);

// Flat parameter vectors (canonical order: recurrent blocks, then classifier).
Index seq_param_count(const SeqModel& model);
Vector seq_get_params(const SeqModel& model);
void seq_set_params(SeqModel& model, const Vector& params);
Index window_param_count(const WindowModel& model);
Vector window_get_params(const WindowModel& model);
void window_set_params(WindowModel& model, const Vector& params);

/// Mean cross-entropy over the sequence and its gradient.
std::pair<double, Vector> seq_loss_and_gradient(const SeqModel& model,
                                                const Matrix& inputs,
                                                const std::vector<int>& gold);
/// Cross-entropy of one window instance and its gradient.
std::pair<double, Vector> window_loss_and_gradient(const WindowModel& model,
                                                   const Matrix& left,
                                                   const Matrix& right, int gold);
std::pair<double, Vector> classifier_loss_and_gradient(
    const AffineClassifier& cls, const Vector& input, int gold);

/// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1)
/// with central differences of width eps.
double gradient_check(const SeqModel& model, const Matrix& inputs,
                      const std::vector<int>& gold, double eps);
double gradient_check(const WindowModel& model, const Matrix& left,
                      const Matrix& right, int gold, double eps);
double gradient_check(const AffineClassifier& cls, const Vector& input, int gold,
                      double eps);

void save_seq(const SeqModel& model, std::ostream& out);
SeqModel load_seq(std::istream& in);
void save_window(const WindowModel& model, std::ostream& out);
WindowModel load_window(std::istream& in);
void save_seq_file(const SeqModel& model, const std::string& path);
SeqModel load_seq_file(const std::string& path);
void save_window_file(const WindowModel& model, const std::string& path);
WindowModel load_window_file(const std::string& path);

/// Peeks at a model file header: "seqlab" or "window".
std::string neural_model_kind(const std::string& path);

// --- template implementation ---

namespace detail {
std::size_t round_half_up(double value);
}

template <typename Inst>
std::vector<Inst> downsample_majority(const std::vector<Inst>& instances,
                                      double fraction, Label majority_label,
                                      std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0) {
    throw ValidationError("downsample fraction must lie in (0, 1]");
  }
  std::vector<Inst> minority, majority;
  for (const Inst& inst : instances) {
    (inst.label == majority_label ? majority : minority).push_back(inst);
  }
  Rng rng(seed);
  rng.shuffle(majority);
  const std::size_t keep =
      detail::round_half_up(fraction * static_cast<double>(majority.size()));
  std::vector<Inst> kept = std::move(minority);
  kept.insert(kept.end(), majority.begin(),
              majority.begin() + static_cast<std::ptrdiff_t>(
                                     std::min(keep, majority.size())));
  rng.shuffle(kept);
  return kept;
}

}  // namespace metseq
