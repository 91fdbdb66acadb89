#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "metseq/types.hpp"

namespace metseq {

struct ClassCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Token-level confusion counts per positive class. LIT is never counted.
struct ConfusionCounts {
  std::map<Label, ClassCounts> per_class;

  ConfusionCounts& operator+=(const ConfusionCounts& other);
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  std::map<Label, Prf> per_class;
  Prf micro;
  Prf macro;
  Granularity granularity = Granularity::Coarse;
};

std::vector<Label> project_coarse(const std::vector<Label>& labels);

ConfusionCounts confusion(const std::vector<Label>& gold,
                          const std::vector<Label>& pred,
                          const std::vector<Label>& positive);

/// P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R); 0 whenever the
/// denominator is 0. Micro pools counts over the positive classes; macro is
/// the unweighted mean of the per-class values.
MetricsReport metrics(const ConfusionCounts& counts);

/// Convenience: confusion + metrics over aligned per-sample label sequences.
MetricsReport evaluate(const std::vector<std::vector<Label>>& gold,
                       const std::vector<std::vector<Label>>& pred,
                       Granularity granularity);

/// Tab-separated report: per-setting P/R/F1 rows followed by a
/// machine-readable key-value block.
void write_report(std::ostream& out, const std::string& setting,
                  const MetricsReport& report);

}  // namespace metseq
