#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metseq/corpus.hpp"
#include "metseq/crf.hpp"
#include "metseq/embeddings.hpp"
#include "metseq/eval.hpp"
#include "metseq/neural.hpp"
#include "metseq/types.hpp"

namespace metseq {

inline constexpr const char* kToolkitVersion = "0.1.0";

/// Synthetic corpus recipe: every sample contains one candidate token drawn
/// from a surface pool shared across classes; a positive sample's class is
/// signaled only by cue words placed within 3 tokens of the candidate.
/// weak_cue_fraction positives carry a single cue instead of three;
/// decoy_rate negatives place one stray cue next to their (literal)
/// candidate. The emitted table clusters cue vectors around a per-class
/// centroid and keeps all other words near the origin.
struct SynthSpec {
  std::size_t n_samples = 1000;
  std::size_t tokens_per_sample = 12;
  std::map<Label, std::vector<std::string>> cue_lexicons;  // empty -> built-in
  double majority_ratio = 11.0;
  std::uint64_t seed = 0;
  Index dim = 16;
  double weak_cue_fraction = 0.0;
  double decoy_rate = 0.0;
};

struct SynthResult {
  Corpus corpus;
  EmbeddingTable table;
};

SynthResult generate_synthetic_corpus(const SynthSpec& spec);

std::map<Label, std::vector<std::string>> default_cue_lexicons();

enum class ModelKind { Crf, SeqLab, Window };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

enum class EmbeddingsKind { Static, Contextual };

/// Flat key-value experiment description (tab- or space-separated lines,
/// '#' comments). seed and the corpus/model keys are mandatory.
struct ExperimentConfig {
  std::string train_path, val_path, test_path;
  EmbeddingsKind embeddings_kind = EmbeddingsKind::Static;
  std::string embeddings_path;
  ModelKind model_kind = ModelKind::Crf;
  Granularity granularity = Granularity::Fine;
  std::uint64_t seed = 0;
  std::string out_dir;

  // model hyperparameters (defaults match the training modules)
  int window_n = 5;
  WindowSides window_sides = WindowSides::One;
  Index hidden_dim = 64;
  int epochs = 10;
  double learning_rate = 0.1;
  int batch_size = 32;
  double downsample_fraction = 0.15;
  double l2 = 0.1;
  int radius = 2;
  int max_iters = 200;
  double tolerance = 1e-6;

  /// Canonical text form (sorted keys); hashed into the run manifest.
  std::string canonical_text() const;

  TrainConfig train_config() const;
};

ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::string& path);

struct SweepEntry {
  double value;
  MetricsReport report;
};

struct SweepResult {
  std::vector<SweepEntry> entries;  // one per requested parameter value
  double best_value = 0.0;          // argmax of micro F1 on validation
};

/// Trains one window model per downsampling fraction (fresh seed-derived
/// initialization each) and evaluates on validation.
SweepResult sweep_downsample(const Corpus& train, const Corpus& val,
                             const TokenVectorFn& vectors, Index input_dim,
                             const TrainConfig& base,
                             const std::vector<double>& fractions);
SweepResult sweep_downsample(const ExperimentConfig& config,
                             const std::vector<double>& fractions);

/// Trains one window model per context length n.
SweepResult sweep_window(const Corpus& train, const Corpus& val,
                         const TokenVectorFn& vectors, Index input_dim,
                         const TrainConfig& base, const std::vector<int>& sizes);
SweepResult sweep_window(const ExperimentConfig& config,
                         const std::vector<int>& sizes);

void write_sweep_report(std::ostream& out, const std::string& parameter,
                        const SweepResult& result);

struct RunResult {
  MetricsReport val_primary, test_primary;  // at the configured granularity
  std::optional<MetricsReport> val_coarse, test_coarse;  // projection, fine runs
  std::string model_path, val_report_path, test_report_path, manifest_path;
};

/// Trains per config, evaluates validation and test, and writes the reports,
/// the serialized model and a run manifest under out.dir. Reports and model
/// files are byte-identical across runs with the same config and seed.
RunResult run_experiment(const ExperimentConfig& config);

}  // namespace metseq
