#include "metseq/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "metseq/rng.hpp"
#include "metseq/text.hpp"

namespace metseq {

std::pair<std::size_t, std::size_t> Sample::sentence_bounds(std::size_t i) const {
  std::size_t begin = 0;
  std::size_t end = tokens.size();
  for (std::size_t b : sentence_breaks) {
    if (b <= i) {
      begin = b;
    } else {
      end = b;
      break;
    }
  }
  return {begin, end};
}

std::optional<std::size_t> Sample::head_of(std::size_t i) const {
  const int h = tokens[i].head_index;
  if (h == Token::kRootHead) return std::nullopt;
  return sentence_bounds(i).first + static_cast<std::size_t>(h);
}

std::vector<Label> relabel(std::size_t n_tokens, const std::vector<Span>& spans) {
  std::vector<Label> labels(n_tokens, Label::LIT);
  for (const Span& span : spans) {
    if (span.start >= span.end || span.end > n_tokens) {
      throw ValidationError("span out of bounds");
    }
    if (span.label == Label::LIT || !is_fine_label(span.label)) {
      throw ValidationError("span label must be a fine metonymic class");
    }
    for (std::size_t i = span.start; i < span.end; ++i) {
      if (labels[i] != Label::LIT) {
        throw ValidationError("overlapping spans");
      }
      labels[i] = span.label;
    }
  }
  return labels;
}

void validate_sample(const Sample& sample) {
  const auto fail = [&](const std::string& what) {
    throw ValidationError("sample '" + sample.id + "': " + what);
  };
  if (sample.tokens.empty()) fail("has no tokens");
  if (sample.gold.size() != sample.tokens.size()) {
    fail("gold length does not match token count");
  }
  for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
    if (sample.tokens[i].surface.empty()) fail("empty surface");
    if (!is_fine_label(sample.gold[i])) fail("gold label must be fine-grained");
  }
  std::size_t prev_break = 0;
  for (std::size_t b : sample.sentence_breaks) {
    if (b == 0 || b >= sample.tokens.size() || b <= prev_break) {
      fail("sentence breaks must be strictly increasing interior indices");
    }
    prev_break = b;
  }
  for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
    const int h = sample.tokens[i].head_index;
    if (h == Token::kRootHead) continue;
    const auto [begin, end] = sample.sentence_bounds(i);
    if (h < 0 || begin + static_cast<std::size_t>(h) >= end) {
      fail("head index out of sentence bounds");
    }
    if (begin + static_cast<std::size_t>(h) == i) fail("token is its own head");
  }
  std::vector<Label> expected;
  try {
    expected = relabel(sample.tokens.size(), sample.pmw_spans);
  } catch (const ValidationError& e) {
    fail(e.what());
  }
  if (expected != sample.gold) fail("gold labels inconsistent with spans");
  for (std::size_t i = 1; i < sample.pmw_spans.size(); ++i) {
    if (sample.pmw_spans[i - 1].start > sample.pmw_spans[i].start) {
      fail("spans must be sorted by start");
    }
  }
}

namespace {

struct LineReader {
  std::istream& in;
  std::size_t line_no = 0;
  bool next(std::string& line) {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
};

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

Corpus parse_corpus(std::istream& in) {
  Corpus corpus;
  std::unordered_set<std::string> seen_ids;
  LineReader reader{in};
  std::string line;

  Sample sample;
  std::vector<std::optional<Label>> explicit_labels;
  bool in_sample = false;
  bool boundary_pending = false;
  bool tokens_started = false;

  const auto finish_sample = [&]() {
    std::sort(sample.pmw_spans.begin(), sample.pmw_spans.end(),
              [](const Span& a, const Span& b) { return a.start < b.start; });
    if (sample.tokens.empty()) {
      throw ValidationError("sample '" + sample.id + "': has no tokens");
    }
    try {
      sample.gold = relabel(sample.tokens.size(), sample.pmw_spans);
    } catch (const ValidationError& e) {
      throw ValidationError("sample '" + sample.id + "': " + e.what());
    }
    for (std::size_t i = 0; i < explicit_labels.size(); ++i) {
      if (explicit_labels[i] && *explicit_labels[i] != sample.gold[i]) {
        throw ValidationError("sample '" + sample.id +
                              "': explicit label column disagrees with spans at token " +
                              std::to_string(i));
      }
    }
    validate_sample(sample);
    if (!seen_ids.insert(sample.id).second) {
      throw ValidationError("duplicate sample id '" + sample.id + "'");
    }
    corpus.samples.push_back(std::move(sample));
  };

  while (reader.next(line)) {
    if (!in_sample) {
      if (trim(line).empty()) continue;
      const auto fields = split_tabs(line);
      if (fields[0] != "#sample" || fields.size() != 2 || fields[1].empty()) {
        parse_fail(reader.line_no, "expected '#sample<TAB><id>'");
      }
      sample = Sample{};
      sample.id = std::string(fields[1]);
      explicit_labels.clear();
      in_sample = true;
      boundary_pending = false;
      tokens_started = false;
      continue;
    }
    if (trim(line).empty()) {
      boundary_pending = true;
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields[0] == "#end") {
      finish_sample();
      in_sample = false;
      continue;
    }
    if (fields[0] == "#sample") {
      parse_fail(reader.line_no, "sample '" + sample.id + "' not terminated by #end");
    }
    if (fields[0] == "#span") {
      if (tokens_started) {
        parse_fail(reader.line_no, "span lines must precede token lines");
      }
      if (fields.size() != 4) {
        parse_fail(reader.line_no, "expected '#span<TAB>start<TAB>end<TAB>LABEL'");
      }
      const auto start = parse_int(fields[1]);
      const auto end = parse_int(fields[2]);
      if (!start || !end || *start < 0 || *end < 0) {
        parse_fail(reader.line_no, "span indices must be non-negative integers");
      }
      Label label = Label::LIT;
      try {
        label = parse_label(fields[3]);
      } catch (const ParseError& e) {
        parse_fail(reader.line_no, e.what());
      }
      if (label == Label::LIT || !is_fine_label(label)) {
        parse_fail(reader.line_no, "span label must be a fine metonymic class");
      }
      if (*end <= *start) {
        parse_fail(reader.line_no, "span end must exceed start");
      }
      sample.pmw_spans.push_back(Span{static_cast<std::size_t>(*start),
                                      static_cast<std::size_t>(*end), label});
      continue;
    }
    // Token line.
    if (fields.size() != 5 && fields.size() != 6) {
      parse_fail(reader.line_no, "expected 5 or 6 tab-separated token fields, got " +
                                     std::to_string(fields.size()));
    }
    if (fields[0].empty()) parse_fail(reader.line_no, "empty surface field");
    Token token;
    token.surface = std::string(fields[0]);
    token.lemma = std::string(fields[1]);
    token.pos = std::string(fields[2]);
    token.dep_role = std::string(fields[3]);
    if (fields[4] == "_") {
      token.head_index = Token::kRootHead;
    } else {
      const auto head = parse_int(fields[4]);
      if (!head || *head < 0) {
        parse_fail(reader.line_no, "head index must be '_' or a non-negative integer");
      }
      token.head_index = static_cast<int>(*head);
    }
    std::optional<Label> explicit_label;
    if (fields.size() == 6) {
      try {
        explicit_label = parse_label(fields[5]);
      } catch (const ParseError& e) {
        parse_fail(reader.line_no, e.what());
      }
    }
    if (boundary_pending && !sample.tokens.empty()) {
      sample.sentence_breaks.push_back(sample.tokens.size());
    }
    boundary_pending = false;
    tokens_started = true;
    sample.tokens.push_back(std::move(token));
    explicit_labels.push_back(explicit_label);
  }
  if (in_sample) {
    throw ParseError("unexpected end of input: sample '" + sample.id +
                     "' not terminated by #end");
  }
  return corpus;
}

void serialize_corpus(const Corpus& corpus, std::ostream& out) {
  for (const Sample& sample : corpus.samples) {
    out << "#sample\t" << sample.id << '\n';
    for (const Span& span : sample.pmw_spans) {
      out << "#span\t" << span.start << '\t' << span.end << '\t'
          << label_name(span.label) << '\n';
    }
    std::size_t next_break = 0;
    for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
      if (next_break < sample.sentence_breaks.size() &&
          sample.sentence_breaks[next_break] == i) {
        out << '\n';
        ++next_break;
      }
      const Token& t = sample.tokens[i];
      out << t.surface << '\t' << t.lemma << '\t' << t.pos << '\t' << t.dep_role
          << '\t';
      if (t.head_index == Token::kRootHead) {
        out << '_';
      } else {
        out << t.head_index;
      }
      out << '\n';
    }
    out << "#end\n";
  }
}

Corpus load_corpus_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open corpus file: " + path);
  return parse_corpus(in);
}

void save_corpus_file(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write corpus file: " + path);
  serialize_corpus(corpus, out);
}

std::string span_surface(const Sample& sample, const Span& span) {
  std::string text;
  for (std::size_t i = span.start; i < span.end; ++i) {
    if (!text.empty()) text += ' ';
    text += sample.tokens[i].surface;
  }
  return to_lower(text);
}

SplitResult split_disjoint(const Corpus& corpus,
                           const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
  if (corpus.samples.empty()) {
    throw ValidationError("split_disjoint: corpus is empty");
  }
  for (double r : ratios) {
    if (r <= 0.0) throw ValidationError("split_disjoint: ratios must be positive");
  }

  // Union-find over samples: samples sharing a span surface must co-locate.
  const std::size_t n = corpus.samples.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  const auto unite = [&](std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };

  std::unordered_map<std::string, std::size_t> surface_owner;
  for (std::size_t s = 0; s < n; ++s) {
    for (const Span& span : corpus.samples[s].pmw_spans) {
      const std::string key = span_surface(corpus.samples[s], span);
      const auto [it, inserted] = surface_owner.emplace(key, s);
      if (!inserted) unite(it->second, s);
    }
  }

  // Groups keyed by root, ordered by first member for a canonical pre-shuffle
  // order.
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::size_t, std::size_t> root_to_group;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t root = find(s);
    const auto [it, inserted] = root_to_group.emplace(root, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(s);
  }

  Rng rng(seed);
  rng.shuffle(groups);

  const double total = ratios[0] + ratios[1] + ratios[2];
  std::array<double, 3> target{};
  for (int p = 0; p < 3; ++p) {
    target[p] = ratios[p] / total * static_cast<double>(n);
  }

  SplitResult result;
  result.train.scheme = corpus.scheme;
  result.val.scheme = corpus.scheme;
  result.test.scheme = corpus.scheme;
  std::array<double, 3> assigned{};
  std::array<std::vector<std::size_t>, 3> members;

  const double largest_allowed =
      *std::max_element(target.begin(), target.end());
  for (const auto& group : groups) {
    int best = 0;
    double best_capacity = target[0] - assigned[0];
    for (int p = 1; p < 3; ++p) {
      const double capacity = target[p] - assigned[p];
      if (capacity > best_capacity) {
        best = p;
        best_capacity = capacity;
      }
    }
    if (static_cast<double>(group.size()) > largest_allowed) {
      result.warnings.push_back(
          "group of " + std::to_string(group.size()) +
          " samples sharing metonymic surfaces exceeds the largest partition; "
          "partition sizes will deviate from the requested ratios");
    }
    assigned[best] += static_cast<double>(group.size());
    for (std::size_t s : group) members[best].push_back(s);
  }

  for (int p = 0; p < 3; ++p) std::sort(members[p].begin(), members[p].end());
  Corpus* outs[3] = {&result.train, &result.val, &result.test};
  for (int p = 0; p < 3; ++p) {
    for (std::size_t s : members[p]) outs[p]->samples.push_back(corpus.samples[s]);
  }
  return result;
}

CorpusStats compute_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.n_samples = corpus.samples.size();
  for (Label l : kFineLabels) stats.per_label_token_counts[l] = 0;
  std::unordered_set<std::string> unique;
  for (const Sample& sample : corpus.samples) {
    stats.n_sentences += sample.n_sentences();
    stats.n_tokens += sample.tokens.size();
    for (const Token& t : sample.tokens) unique.insert(t.surface);
    for (Label l : sample.gold) ++stats.per_label_token_counts[l];
  }
  stats.n_unique_tokens = unique.size();
  if (stats.n_samples > 0) {
    stats.avg_sample_length_tokens =
        static_cast<double>(stats.n_tokens) / static_cast<double>(stats.n_samples);
  }
  std::size_t positives = 0;
  for (const auto& [label, count] : stats.per_label_token_counts) {
    if (label != Label::LIT) positives += count;
  }
  if (positives > 0) {
    stats.majority_minority_ratio =
        static_cast<double>(stats.per_label_token_counts[Label::LIT]) /
        static_cast<double>(positives);
  }
  return stats;
}

}  // namespace metseq
