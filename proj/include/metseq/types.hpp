#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metseq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Token-level label. The fine set is {LIT, INSTITUTE, ARTIFACT, TEAM,
/// EVENT}; MET only appears in coarse-projected sequences.
enum class Label : std::uint8_t {
  LIT = 0,
  INSTITUTE = 1,
  ARTIFACT = 2,
  TEAM = 3,
  EVENT = 4,
  MET = 5,
};

inline constexpr std::array<Label, 5> kFineLabels = {
    Label::LIT, Label::INSTITUTE, Label::ARTIFACT, Label::TEAM, Label::EVENT};
inline constexpr std::array<Label, 2> kCoarseLabels = {Label::LIT, Label::MET};

std::string_view label_name(Label label);
Label parse_label(std::string_view name);
bool is_fine_label(Label label);

/// LIT stays LIT, every other label maps to MET.
inline Label to_coarse(Label label) {
  return label == Label::LIT ? Label::LIT : Label::MET;
}

enum class Granularity { Coarse, Fine };

std::string_view granularity_name(Granularity g);
Granularity parse_granularity(std::string_view name);

/// Ordered label set for one granularity plus the fine->coarse projection.
struct LabelScheme {
  std::vector<Label> fine{kFineLabels.begin(), kFineLabels.end()};
  std::vector<Label> coarse{kCoarseLabels.begin(), kCoarseLabels.end()};

  const std::vector<Label>& labels(Granularity g) const {
    return g == Granularity::Fine ? fine : coarse;
  }
  /// Positive (metonymic) classes for evaluation: everything but LIT.
  std::vector<Label> positives(Granularity g) const;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace metseq
