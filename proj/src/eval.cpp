#include "metseq/eval.hpp"

#include <ostream>

#include "metseq/text.hpp"

namespace metseq {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  for (const auto& [label, counts] : other.per_class) {
    ClassCounts& mine = per_class[label];
    mine.tp += counts.tp;
    mine.fp += counts.fp;
    mine.fn += counts.fn;
  }
  return *this;
}

std::vector<Label> project_coarse(const std::vector<Label>& labels) {
  std::vector<Label> out;
  out.reserve(labels.size());
  for (Label l : labels) out.push_back(to_coarse(l));
  return out;
}

ConfusionCounts confusion(const std::vector<Label>& gold,
                          const std::vector<Label>& pred,
                          const std::vector<Label>& positive) {
  if (gold.size() != pred.size()) {
    throw ValidationError("confusion: gold and pred lengths differ (" +
                          std::to_string(gold.size()) + " vs " +
                          std::to_string(pred.size()) + ")");
  }
  ConfusionCounts counts;
  for (Label c : positive) {
    if (c == Label::LIT) {
      throw ValidationError("confusion: LIT is never a counted class");
    }
    counts.per_class[c];  // materialize so zero-support classes appear
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (auto& [c, cc] : counts.per_class) {
      if (gold[i] == c && pred[i] == c) {
        ++cc.tp;
      } else if (pred[i] == c && gold[i] != c) {
        ++cc.fp;
      } else if (gold[i] == c && pred[i] != c) {
        ++cc.fn;
      }
    }
  }
  return counts;
}

namespace {

Prf prf_from_counts(double tp, double fp, double fn) {
  Prf m;
  m.precision = (tp + fp) > 0.0 ? tp / (tp + fp) : 0.0;
  m.recall = (tp + fn) > 0.0 ? tp / (tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

}  // namespace

MetricsReport metrics(const ConfusionCounts& counts) {
  MetricsReport report;
  double tp = 0.0, fp = 0.0, fn = 0.0;
  double sum_p = 0.0, sum_r = 0.0, sum_f = 0.0;
  for (const auto& [label, cc] : counts.per_class) {
    const Prf m = prf_from_counts(static_cast<double>(cc.tp),
                                  static_cast<double>(cc.fp),
                                  static_cast<double>(cc.fn));
    report.per_class[label] = m;
    tp += static_cast<double>(cc.tp);
    fp += static_cast<double>(cc.fp);
    fn += static_cast<double>(cc.fn);
    sum_p += m.precision;
    sum_r += m.recall;
    sum_f += m.f1;
  }
  report.micro = prf_from_counts(tp, fp, fn);
  const double k = static_cast<double>(counts.per_class.size());
  if (k > 0.0) {
    report.macro.precision = sum_p / k;
    report.macro.recall = sum_r / k;
    report.macro.f1 = sum_f / k;
  }
  return report;
}

MetricsReport evaluate(const std::vector<std::vector<Label>>& gold,
                       const std::vector<std::vector<Label>>& pred,
                       Granularity granularity) {
  if (gold.size() != pred.size()) {
    throw ValidationError("evaluate: sample counts differ");
  }
  const LabelScheme scheme;
  const std::vector<Label> positive = scheme.positives(granularity);
  ConfusionCounts total;
  for (Label c : positive) total.per_class[c];
  for (std::size_t s = 0; s < gold.size(); ++s) {
    total += confusion(gold[s], pred[s], positive);
  }
  MetricsReport report = metrics(total);
  report.granularity = granularity;
  return report;
}

void write_report(std::ostream& out, const std::string& setting,
                  const MetricsReport& report) {
  const std::string g(granularity_name(report.granularity));
  out << "setting\tclass\tP\tR\tF1\n";
  for (const auto& [label, m] : report.per_class) {
    out << setting << '.' << g << '\t' << label_name(label) << '\t'
        << format_fixed(m.precision, 2) << '\t' << format_fixed(m.recall, 2)
        << '\t' << format_fixed(m.f1, 2) << '\n';
  }
  out << setting << '.' << g << "\tmicro\t" << format_fixed(report.micro.precision, 2)
      << '\t' << format_fixed(report.micro.recall, 2) << '\t'
      << format_fixed(report.micro.f1, 2) << '\n';
  out << setting << '.' << g << "\tmacro\t" << format_fixed(report.macro.precision, 2)
      << '\t' << format_fixed(report.macro.recall, 2) << '\t'
      << format_fixed(report.macro.f1, 2) << '\n';
  out << '\n';
  const auto kv = [&](const std::string& key, double value) {
    out << setting << '.' << g << '.' << key << '\t' << format_fixed(value, 6)
        << '\n';
  };
  for (const auto& [label, m] : report.per_class) {
    const std::string cls = to_lower(label_name(label));
    kv(cls + ".precision", m.precision);
    kv(cls + ".recall", m.recall);
    kv(cls + ".f1", m.f1);
  }
  kv("micro.precision", report.micro.precision);
  kv("micro.recall", report.micro.recall);
  kv("micro.f1", report.micro.f1);
  kv("macro.precision", report.macro.precision);
  kv("macro.recall", report.macro.recall);
  kv("macro.f1", report.macro.f1);
}

}  // namespace metseq
