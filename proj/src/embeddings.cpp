#include "metseq/embeddings.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "metseq/text.hpp"

namespace metseq {

void EmbeddingTable::insert(const std::string& token, const Vector& vector) {
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw ValidationError("embedding dimensionality mismatch for token '" +
                          token + "'");
  }
  const auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (inserted) {
    tokens_.push_back(token);
    rows_.push_back(vector);
  } else {
    rows_[it->second] = vector;
    ++n_duplicates_;
  }
  mean_valid_ = false;
}

bool EmbeddingTable::contains(const std::string& token) const {
  return index_.count(token) > 0;
}

const Vector& EmbeddingTable::stored(const std::string& token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) {
    throw ValidationError("token not stored in table: '" + token + "'");
  }
  return rows_[it->second];
}

const Vector& EmbeddingTable::mean() const {
  if (!mean_valid_) {
    mean_ = Vector::Zero(dim_);
    for (const Vector& row : rows_) mean_ += row;
    if (!rows_.empty()) mean_ /= static_cast<double>(rows_.size());
    mean_valid_ = true;
  }
  return mean_;
}

EmbeddingTable load_static(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected 'token v1 ... vd'");
    }
    const Index d = static_cast<Index>(fields.size()) - 1;
    if (table.dim_ != 0 && d != table.dim_) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": inconsistent dimensionality (" + std::to_string(d) +
                       " vs " + std::to_string(table.dim_) + ")");
    }
    Vector v(d);
    for (Index i = 0; i < d; ++i) {
      const auto value = parse_double(fields[static_cast<std::size_t>(i) + 1]);
      if (!value) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": non-numeric vector component '" +
                         std::string(fields[static_cast<std::size_t>(i) + 1]) + "'");
      }
      v[i] = *value;
    }
    table.insert(std::string(fields[0]), v);
  }
  if (table.size() == 0) throw ParseError("no entries in embedding stream");
  table.mean();  // fix the Mean fallback at load time
  return table;
}

EmbeddingTable load_static_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open embedding file: " + path);
  return load_static(in);
}

void save_static(const EmbeddingTable& table, std::ostream& out) {
  for (const std::string& token : table.tokens()) {
    out << token;
    const Vector& v = table.stored(token);
    for (Index i = 0; i < v.size(); ++i) out << ' ' << format_fixed(v[i], 6);
    out << '\n';
  }
}

void save_static_file(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write embedding file: " + path);
  save_static(table, out);
}

Vector embed_token(const EmbeddingTable& table, std::string_view token) {
  const std::string key = to_lower(token);
  if (table.contains(key)) return table.stored(key);
  switch (table.oov_policy()) {
    case OovPolicy::Zero:
      return Vector::Zero(table.dim());
    case OovPolicy::Mean:
      return table.mean();
    case OovPolicy::NamedUnknown:
      if (!table.contains(kUnknownToken)) {
        throw ConfigError(
            "oov policy NAMED_UNKNOWN requires a stored '<unk>' vector");
      }
      return table.stored(kUnknownToken);
  }
  throw std::logic_error("unreachable oov policy");
}

std::vector<Vector> sum_subword_vectors(
    const std::vector<std::pair<std::size_t, std::vector<Vector>>>& groups) {
  std::vector<Vector> words;
  words.reserve(groups.size());
  Index dim = -1;
  for (const auto& [word_index, pieces] : groups) {
    if (pieces.empty()) {
      throw ValidationError("empty subword group for word index " +
                            std::to_string(word_index));
    }
    Vector sum = pieces.front();
    if (dim < 0) dim = sum.size();
    for (std::size_t i = 1; i < pieces.size(); ++i) sum += pieces[i];
    if (sum.size() != dim) {
      throw ValidationError("subword dimensionality mismatch at word index " +
                            std::to_string(word_index));
    }
    words.push_back(std::move(sum));
  }
  return words;
}

const Matrix& ContextualVectors::sample_matrix(const std::string& sample_id) const {
  const auto it = per_sample_.find(sample_id);
  if (it == per_sample_.end()) {
    throw ValidationError("no contextual vectors for sample '" + sample_id + "'");
  }
  return it->second;
}

Vector ContextualVectors::at(const std::string& sample_id,
                             std::size_t token_index) const {
  const Matrix& m = sample_matrix(sample_id);
  if (static_cast<Index>(token_index) >= m.rows()) {
    throw ValidationError("token index out of range for sample '" + sample_id +
                          "'");
  }
  return m.row(static_cast<Index>(token_index));
}

ContextualVectors load_contextual(std::istream& in, const Corpus& corpus) {
  std::string line;
  std::size_t line_no = 0;
  Index dim = 0;
  bool subword = false;
  bool saw_dim = false;

  // (sample, index) -> accumulated vector + line count.
  std::unordered_map<std::string, std::vector<Vector>> acc;
  std::unordered_map<std::string, std::vector<std::size_t>> counts;
  std::unordered_map<std::string, std::size_t> sample_sizes;
  for (const Sample& sample : corpus.samples) {
    sample_sizes[sample.id] = sample.tokens.size();
    acc[sample.id].assign(sample.tokens.size(), Vector());
    counts[sample.id].assign(sample.tokens.size(), 0);
  }

  std::string prev_id;
  long long prev_index = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_tabs(line);
    if (fields[0] == "#dim") {
      if (fields.size() != 2 || !parse_int(fields[1]) || *parse_int(fields[1]) <= 0) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected '#dim<TAB><d>' with positive d");
      }
      dim = static_cast<Index>(*parse_int(fields[1]));
      saw_dim = true;
      continue;
    }
    if (fields[0] == "#granularity") {
      if (fields.size() != 2 || (fields[1] != "word" && fields[1] != "subword")) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected '#granularity<TAB>word|subword'");
      }
      subword = fields[1] == "subword";
      continue;
    }
    if (!saw_dim) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": '#dim' header must precede vector lines");
    }
    if (fields.size() != 3) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected '<sample_id><TAB><token_index><TAB>v1 ... vd'");
    }
    const std::string sample_id(fields[0]);
    const auto index = parse_int(fields[1]);
    if (!index || *index < 0) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": token index must be a non-negative integer");
    }
    const auto components = split_ws(fields[2]);
    if (static_cast<Index>(components.size()) != dim) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(dim) + " components, got " +
                       std::to_string(components.size()));
    }
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) {
      const auto value = parse_double(components[static_cast<std::size_t>(i)]);
      if (!value) {
        throw ParseError("line " + std::to_string(line_no) +
                         ": non-numeric vector component");
      }
      v[i] = *value;
    }
    const auto size_it = sample_sizes.find(sample_id);
    if (size_it == sample_sizes.end()) continue;  // unused sample, skip
    const std::size_t idx = static_cast<std::size_t>(*index);
    if (idx >= size_it->second) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": token index " + std::to_string(idx) +
                            " out of range for sample '" + sample_id + "'");
    }
    const bool continues_group =
        subword && sample_id == prev_id && *index == prev_index;
    if (counts[sample_id][idx] > 0 && !continues_group) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate vector for (" + sample_id + ", " +
                            std::to_string(idx) + ")");
    }
    if (counts[sample_id][idx] == 0) {
      acc[sample_id][idx] = v;
    } else {
      acc[sample_id][idx] += v;  // subword pieces summed into the word vector
    }
    ++counts[sample_id][idx];
    prev_id = sample_id;
    prev_index = *index;
  }
  if (!saw_dim) throw ParseError("missing '#dim' header");

  // Coverage check: every (sample, token) present exactly once.
  std::vector<std::string> gaps;
  for (const Sample& sample : corpus.samples) {
    const auto& c = counts[sample.id];
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i] == 0) {
        gaps.push_back("(" + sample.id + ", " + std::to_string(i) + ")");
        if (gaps.size() >= 10) break;
      }
    }
    if (gaps.size() >= 10) break;
  }
  if (!gaps.empty()) {
    std::string msg = "contextual vectors do not cover the corpus; first gaps:";
    for (const std::string& g : gaps) msg += " " + g;
    throw ValidationError(msg);
  }

  ContextualVectors result;
  result.dim_ = dim;
  for (const Sample& sample : corpus.samples) {
    Matrix m(static_cast<Index>(sample.tokens.size()), dim);
    const auto& rows = acc[sample.id];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      m.row(static_cast<Index>(i)) = rows[i];
    }
    result.per_sample_.emplace(sample.id, std::move(m));
  }
  return result;
}

ContextualVectors load_contextual_file(const std::string& path,
                                       const Corpus& corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open contextual vector file: " + path);
  return load_contextual(in, corpus);
}

}  // namespace metseq
