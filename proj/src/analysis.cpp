#include "metseq/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "metseq/text.hpp"

namespace metseq {

void CooccurrenceCounts::add(const std::string& word, Label cls,
                             std::int64_t count) {
  joint[{word, cls}] += count;
  word_totals[word] += count;
  class_totals[cls] += count;
  grand_total += count;
}

void CooccurrenceCounts::apply_threshold(std::int64_t min_count) {
  CooccurrenceCounts kept;
  for (const auto& [key, count] : joint) {
    if (word_totals.at(key.first) >= min_count) {
      kept.add(key.first, key.second, count);
    }
  }
  *this = std::move(kept);
}

CooccurrenceCounts collect_contexts(const Corpus& corpus, int window,
                                    std::int64_t min_count) {
  if (window < 1) throw ValidationError("collect_contexts: window must be >= 1");
  if (min_count < 1) {
    throw ValidationError("collect_contexts: min_count must be >= 1");
  }
  CooccurrenceCounts counts;
  for (const Sample& sample : corpus.samples) {
    for (const Span& span : sample.pmw_spans) {
      const long long lo =
          std::max<long long>(0, static_cast<long long>(span.start) - window);
      const long long hi = std::min<long long>(
          static_cast<long long>(sample.tokens.size()),
          static_cast<long long>(span.end) + window);
      for (long long j = lo; j < hi; ++j) {
        if (j >= static_cast<long long>(span.start) &&
            j < static_cast<long long>(span.end)) {
          continue;  // the span itself is not its own context
        }
        counts.add(to_lower(sample.tokens[static_cast<std::size_t>(j)].lemma),
                   span.label);
      }
    }
  }
  counts.apply_threshold(min_count);
  return counts;
}

std::optional<double> npmi(const CooccurrenceCounts& counts,
                           const std::string& word, Label cls) {
  const auto it = counts.joint.find({word, cls});
  if (it == counts.joint.end() || it->second == 0) return std::nullopt;
  const double grand = static_cast<double>(counts.grand_total);
  const double p_wc = static_cast<double>(it->second) / grand;
  const double p_w = static_cast<double>(counts.word_totals.at(word)) / grand;
  const double p_c = static_cast<double>(counts.class_totals.at(cls)) / grand;
  if (p_wc >= 1.0) return 1.0;  // degenerate single-pair table
  const double pmi = std::log(p_wc / (p_w * p_c));
  return pmi / -std::log(p_wc);
}

AssociationTable npmi_table(const CooccurrenceCounts& counts) {
  AssociationTable table;
  for (const auto& [key, count] : counts.joint) {
    if (count == 0) continue;
    const auto score = npmi(counts, key.first, key.second);
    if (score) table.scores[key] = *score;
  }
  return table;
}

std::vector<std::pair<std::string, double>> top_k_words(
    const AssociationTable& table, Label cls, std::size_t k) {
  if (cls == Label::LIT || !is_fine_label(cls)) {
    throw ValidationError("top_k_words: '" + std::string(label_name(cls)) +
                          "' is not a counted class");
  }
  if (k < 1) throw ValidationError("top_k_words: k must be >= 1");
  std::vector<std::pair<std::string, double>> entries;
  for (const auto& [key, score] : table.scores) {
    if (key.second == cls) entries.emplace_back(key.first, score);
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (entries.size() > k) entries.resize(k);
  return entries;
}

CosineReport avg_pairwise_cosine(const std::vector<std::string>& words,
                                 const EmbeddingTable& table) {
  CosineReport report;
  std::vector<Vector> kept;
  for (const std::string& word : words) {
    const std::string key = to_lower(word);
    if (table.contains(key)) {
      kept.push_back(table.stored(key));
    } else {
      report.dropped.push_back(word);
    }
  }
  if (kept.size() < 2) {
    throw ValidationError(
        "avg_pairwise_cosine: fewer than 2 of the words are in the table");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) {
      const double na = kept[i].norm();
      const double nb = kept[j].norm();
      const double cos =
          (na > 0.0 && nb > 0.0) ? kept[i].dot(kept[j]) / (na * nb) : 0.0;
      sum += cos;
      ++report.n_pairs;
    }
  }
  report.mean = sum / static_cast<double>(report.n_pairs);
  return report;
}

}  // namespace metseq
