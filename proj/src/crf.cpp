#include "metseq/crf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "metseq/io.hpp"
#include "metseq/text.hpp"

namespace metseq {

std::string_view feature_group_name(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::Surface: return "SURFACE";
    case FeatureGroup::Syntactic: return "SYNTACTIC";
    case FeatureGroup::Ngram: return "NGRAM";
    case FeatureGroup::Grammatical: return "GRAMMATICAL";
  }
  throw std::logic_error("unreachable feature group");
}

FeatureGroup feature_group(std::string_view name) {
  if (name.starts_with("sur:") || name.starts_with("bnd@")) {
    return FeatureGroup::Surface;
  }
  if (name.starts_with("pos:")) return FeatureGroup::Syntactic;
  if (name.starts_with("lem:")) return FeatureGroup::Ngram;
  if (name.starts_with("dep:") || name.starts_with("dephead:")) {
    return FeatureGroup::Grammatical;
  }
  throw ValidationError("unrecognized feature name: " + std::string(name));
}

namespace {

std::string offset_suffix(int offset) {
  if (offset == 0) return "@0";
  if (offset > 0) return "@+" + std::to_string(offset);
  return "@" + std::to_string(offset);
}

void token_features(const Sample& sample, std::size_t j, int offset,
                    std::vector<std::string>& out) {
  const Token& token = sample.tokens[j];
  const std::string at = offset_suffix(offset);
  if (all_letters(token.surface)) out.push_back("sur:is_alpha" + at);
  if (all_digits(token.surface)) out.push_back("sur:is_digit" + at);
  if (all_punct(token.surface)) out.push_back("sur:is_punct" + at);
  if (all_upper(token.surface)) out.push_back("sur:is_upper" + at);
  if (starts_upper(token.surface)) out.push_back("sur:init_upper" + at);
  out.push_back("pos:" + token.pos + at);
  out.push_back("dep:" + token.dep_role + at);
  const auto head = sample.head_of(j);
  const std::string head_lemma = head ? sample.tokens[*head].lemma : "<ROOT>";
  out.push_back("dephead:(" + token.dep_role + "," + head_lemma + ")" + at);
  if (offset != 0) out.push_back("lem:" + token.lemma + at);
}

}  // namespace

std::vector<std::string> extract_features(const Sample& sample, std::size_t i,
                                          int radius) {
  if (i >= sample.tokens.size()) {
    throw ValidationError("extract_features: token index out of range");
  }
  std::vector<std::string> features;
  for (int offset = -radius; offset <= radius; ++offset) {
    const long long j = static_cast<long long>(i) + offset;
    if (j < 0 || j >= static_cast<long long>(sample.tokens.size())) {
      features.push_back("bnd" + offset_suffix(offset));
      continue;
    }
    token_features(sample, static_cast<std::size_t>(j), offset, features);
  }
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end()), features.end());
  return features;
}

Index CrfModel::label_index(Label label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return static_cast<Index>(i);
  }
  throw ValidationError("label not in model: " + std::string(label_name(label)));
}

std::vector<Index> CrfModel::resolve(const std::vector<std::string>& names) const {
  std::vector<Index> ids;
  ids.reserve(names.size());
  for (const std::string& name : names) {
    const auto it = feature_index.find(name);
    if (it != feature_index.end()) ids.push_back(it->second);
  }
  return ids;
}

CrfModel make_crf_model(std::vector<Label> labels,
                        std::vector<std::string> feature_names, double l2,
                        int context_radius) {
  CrfModel model;
  model.labels = std::move(labels);
  model.feature_names = std::move(feature_names);
  for (std::size_t i = 0; i < model.feature_names.size(); ++i) {
    model.feature_index.emplace(model.feature_names[i], static_cast<Index>(i));
  }
  model.unary = Matrix::Zero(model.n_features(), model.n_labels());
  model.transition = Matrix::Zero(model.n_labels(), model.n_labels());
  model.l2 = l2;
  model.context_radius = context_radius;
  return model;
}

FeatureSeq featurize(const CrfModel& model, const Sample& sample) {
  FeatureSeq features(sample.tokens.size());
  for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
    features[i] = model.resolve(extract_features(sample, i, model.context_radius));
  }
  return features;
}

Matrix unary_scores(const CrfModel& model, const FeatureSeq& features) {
  const Index T = static_cast<Index>(features.size());
  Matrix scores = Matrix::Zero(T, model.n_labels());
  for (Index t = 0; t < T; ++t) {
    for (Index f : features[static_cast<std::size_t>(t)]) {
      scores.row(t) += model.unary.row(f);
    }
  }
  return scores;
}

double crf_score(const CrfModel& model, const FeatureSeq& features,
                 const std::vector<int>& labels) {
  if (labels.size() != features.size()) {
    throw ValidationError("crf_score: label/feature length mismatch");
  }
  const Matrix scores = unary_scores(model, features);
  double total = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    total += scores(static_cast<Index>(t), labels[t]);
    if (t > 0) total += model.transition(labels[t - 1], labels[t]);
  }
  return total;
}

namespace {

double log_sum_exp(const Vector& x) {
  const double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

}  // namespace

Marginals log_partition_and_marginals(const CrfModel& model,
                                      const FeatureSeq& features) {
  const Index T = static_cast<Index>(features.size());
  const Index L = model.n_labels();
  if (T == 0) throw ValidationError("log_partition: empty sequence");
  const Matrix scores = unary_scores(model, features);

  Matrix alpha(T, L), beta(T, L);
  alpha.row(0) = scores.row(0);
  for (Index t = 1; t < T; ++t) {
    for (Index l = 0; l < L; ++l) {
      const Vector prev = alpha.row(t - 1).transpose() + model.transition.col(l);
      alpha(t, l) = scores(t, l) + log_sum_exp(prev);
    }
  }
  beta.row(T - 1).setZero();
  for (Index t = T - 2; t >= 0; --t) {
    for (Index m = 0; m < L; ++m) {
      const Vector next = model.transition.row(m).transpose() +
                          scores.row(t + 1).transpose() +
                          beta.row(t + 1).transpose();
      beta(t, m) = log_sum_exp(next);
    }
  }

  Marginals result;
  result.log_z = log_sum_exp(alpha.row(T - 1).transpose());
  result.unary = ((alpha + beta).array() - result.log_z).exp().matrix();
  result.pairwise.reserve(static_cast<std::size_t>(T > 0 ? T - 1 : 0));
  for (Index t = 1; t < T; ++t) {
    Matrix pm(L, L);
    for (Index m = 0; m < L; ++m) {
      for (Index l = 0; l < L; ++l) {
        pm(m, l) = std::exp(alpha(t - 1, m) + model.transition(m, l) +
                            scores(t, l) + beta(t, l) - result.log_z);
      }
    }
    result.pairwise.push_back(std::move(pm));
  }
  return result;
}

Index crf_param_count(const CrfModel& model) {
  return model.unary.size() + model.transition.size();
}

Vector crf_get_params(const CrfModel& model) {
  Vector params(crf_param_count(model));
  params.head(model.unary.size()) =
      Eigen::Map<const Vector>(model.unary.data(), model.unary.size());
  params.tail(model.transition.size()) = Eigen::Map<const Vector>(
      model.transition.data(), model.transition.size());
  return params;
}

void crf_set_params(CrfModel& model, const Vector& params) {
  if (params.size() != crf_param_count(model)) {
    throw ValidationError("crf_set_params: size mismatch");
  }
  Eigen::Map<Vector>(model.unary.data(), model.unary.size()) =
      params.head(model.unary.size());
  Eigen::Map<Vector>(model.transition.data(), model.transition.size()) =
      params.tail(model.transition.size());
}

std::pair<double, Vector> nll_and_gradient(
    const CrfModel& model, const std::vector<CrfInstance>& batch) {
  if (batch.empty()) throw ValidationError("nll_and_gradient: empty batch");
  const Index L = model.n_labels();
  double loss = 0.0;
  Matrix grad_unary = Matrix::Zero(model.unary.rows(), model.unary.cols());
  Matrix grad_trans = Matrix::Zero(L, L);

  for (const CrfInstance& inst : batch) {
    const Marginals marg = log_partition_and_marginals(model, inst.features);
    loss += marg.log_z - crf_score(model, inst.features, inst.gold);
    const Index T = static_cast<Index>(inst.features.size());
    for (Index t = 0; t < T; ++t) {
      // expected minus empirical feature counts
      for (Index f : inst.features[static_cast<std::size_t>(t)]) {
        grad_unary.row(f) += marg.unary.row(t);
        grad_unary(f, inst.gold[static_cast<std::size_t>(t)]) -= 1.0;
      }
      if (t > 0) {
        grad_trans += marg.pairwise[static_cast<std::size_t>(t - 1)];
        grad_trans(inst.gold[static_cast<std::size_t>(t - 1)],
                   inst.gold[static_cast<std::size_t>(t)]) -= 1.0;
      }
    }
  }

  loss += model.l2 * (model.unary.squaredNorm() + model.transition.squaredNorm());
  grad_unary += 2.0 * model.l2 * model.unary;
  grad_trans += 2.0 * model.l2 * model.transition;

  Vector grad(crf_param_count(model));
  grad.head(grad_unary.size()) =
      Eigen::Map<const Vector>(grad_unary.data(), grad_unary.size());
  grad.tail(grad_trans.size()) =
      Eigen::Map<const Vector>(grad_trans.data(), grad_trans.size());
  return {loss, std::move(grad)};
}

CrfTrainResult train_crf(const Corpus& train, int radius, const CrfHyper& hyper,
                         Granularity granularity) {
  if (train.samples.empty()) throw ValidationError("train_crf: empty corpus");

  std::set<std::string> names;
  for (const Sample& sample : train.samples) {
    for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
      for (std::string& name : extract_features(sample, i, radius)) {
        names.insert(std::move(name));
      }
    }
  }
  if (names.empty()) throw ValidationError("train_crf: empty feature space");

  const LabelScheme scheme;
  CrfModel model = make_crf_model(
      scheme.labels(granularity),
      std::vector<std::string>(names.begin(), names.end()), hyper.l2, radius);

  std::vector<CrfInstance> batch;
  batch.reserve(train.samples.size());
  for (const Sample& sample : train.samples) {
    CrfInstance inst;
    inst.features = featurize(model, sample);
    inst.gold.reserve(sample.gold.size());
    for (Label l : sample.gold) {
      inst.gold.push_back(static_cast<int>(model.label_index(
          granularity == Granularity::Coarse ? to_coarse(l) : l)));
    }
    batch.push_back(std::move(inst));
  }

  CrfTrainResult result;
  Vector params = crf_get_params(model);
  auto [loss, grad] = nll_and_gradient(model, batch);
  result.loss_trace.push_back(loss);

  double step = 1.0;
  for (int iter = 0; iter < hyper.max_iters; ++iter) {
    bool accepted = false;
    double new_loss = loss;
    Vector new_grad;
    while (step > 1e-20) {
      const Vector candidate = params - step * grad;
      crf_set_params(model, candidate);
      auto [cand_loss, cand_grad] = nll_and_gradient(model, batch);
      if (cand_loss < loss) {
        params = candidate;
        new_loss = cand_loss;
        new_grad = std::move(cand_grad);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent step exists at representable sizes
    const double improvement = (loss - new_loss) / std::max(std::abs(loss), 1.0);
    loss = new_loss;
    grad = std::move(new_grad);
    result.loss_trace.push_back(loss);
    step = std::min(step * 2.0, 1.0);
    if (improvement < hyper.tolerance) break;
  }
  crf_set_params(model, params);
  result.model = std::move(model);
  return result;
}

std::vector<int> viterbi_indices(const CrfModel& model,
                                 const FeatureSeq& features) {
  const Index T = static_cast<Index>(features.size());
  const Index L = model.n_labels();
  if (T == 0) throw ValidationError("viterbi: empty sequence");
  const Matrix scores = unary_scores(model, features);

  // best_to(t, l): best score of a completion from position t given y_t = l
  // (excluding position t's own unary score).
  Matrix best_to = Matrix::Zero(T, L);
  for (Index t = T - 2; t >= 0; --t) {
    for (Index m = 0; m < L; ++m) {
      double best = -std::numeric_limits<double>::infinity();
      for (Index l = 0; l < L; ++l) {
        const double v = model.transition(m, l) + scores(t + 1, l) + best_to(t + 1, l);
        if (v > best) best = v;
      }
      best_to(t, m) = best;
    }
  }

  // Greedy construction keeps the lexicographically smallest argmax: scanning
  // labels in ascending order with a strict improvement test prefers the
  // lowest index at every (earliest-first) position.
  std::vector<int> path(static_cast<std::size_t>(T));
  int prev = -1;
  for (Index t = 0; t < T; ++t) {
    int best_label = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (Index l = 0; l < L; ++l) {
      const double trans = (t == 0) ? 0.0 : model.transition(prev, l);
      const double v = trans + scores(t, l) + best_to(t, l);
      if (v > best) {
        best = v;
        best_label = static_cast<int>(l);
      }
    }
    path[static_cast<std::size_t>(t)] = best_label;
    prev = best_label;
  }
  return path;
}

std::vector<Label> viterbi(const CrfModel& model, const FeatureSeq& features) {
  std::vector<Label> labels;
  for (int idx : viterbi_indices(model, features)) {
    labels.push_back(model.labels[static_cast<std::size_t>(idx)]);
  }
  return labels;
}

std::vector<Label> crf_predict(const CrfModel& model, const Sample& sample) {
  return viterbi(model, featurize(model, sample));
}

FeatureRanking rank_informative_features(const CrfModel& model, std::size_t k) {
  FeatureRanking ranking;
  std::vector<RankedFeature> all;
  all.reserve(model.feature_names.size());
  for (Index f = 0; f < model.n_features(); ++f) {
    const std::string& name = model.feature_names[static_cast<std::size_t>(f)];
    all.push_back(RankedFeature{name, feature_group(name),
                                model.unary.row(f).cwiseAbs().maxCoeff()});
  }
  std::sort(all.begin(), all.end(), [](const RankedFeature& a, const RankedFeature& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    return a.name < b.name;
  });
  if (k > all.size()) {
    ranking.note = "requested top-" + std::to_string(k) + " but only " +
                   std::to_string(all.size()) + " features exist";
    k = all.size();
  }
  ranking.top.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
  for (FeatureGroup g : {FeatureGroup::Surface, FeatureGroup::Syntactic,
                         FeatureGroup::Ngram, FeatureGroup::Grammatical}) {
    ranking.shares[g] = 0.0;
  }
  for (const RankedFeature& f : ranking.top) {
    ranking.shares[f.group] += 1.0;
  }
  if (!ranking.top.empty()) {
    for (auto& [group, share] : ranking.shares) {
      share /= static_cast<double>(ranking.top.size());
    }
  }
  return ranking;
}

void save_crf(const CrfModel& model, std::ostream& out) {
  out << "metseq-crf\tv1\n";
  out << "labels";
  for (Label l : model.labels) out << '\t' << label_name(l);
  out << '\n';
  char l2_buf[64];
  std::snprintf(l2_buf, sizeof(l2_buf), "%.17g", model.l2);
  out << "l2\t" << l2_buf << '\n';
  out << "radius\t" << model.context_radius << '\n';
  out << "n_features\t" << model.feature_names.size() << '\n';
  for (const std::string& name : model.feature_names) out << name << '\n';
  const Index count = crf_param_count(model);
  out << "payload\t" << count << '\n';
  const Vector params = crf_get_params(model);
  write_le_block(out, params.data(), count);
}

CrfModel load_crf(std::istream& in) {
  const std::string magic = expect_line(in, "crf model header");
  if (magic != "metseq-crf\tv1") {
    throw ParseError("not a metseq-crf v1 model file");
  }
  const auto labels_line = split_tabs(expect_line(in, "label list"));
  if (labels_line.empty() || labels_line[0] != "labels" || labels_line.size() < 2) {
    throw ParseError("crf model: malformed label list");
  }
  std::vector<Label> labels;
  for (std::size_t i = 1; i < labels_line.size(); ++i) {
    labels.push_back(parse_label(labels_line[i]));
  }
  const auto l2_line = split_tabs(expect_line(in, "l2"));
  if (l2_line.size() != 2 || l2_line[0] != "l2" || !parse_double(l2_line[1])) {
    throw ParseError("crf model: malformed l2 line");
  }
  const auto radius_line = split_tabs(expect_line(in, "radius"));
  if (radius_line.size() != 2 || radius_line[0] != "radius" ||
      !parse_int(radius_line[1])) {
    throw ParseError("crf model: malformed radius line");
  }
  const auto nfeat_line = split_tabs(expect_line(in, "n_features"));
  if (nfeat_line.size() != 2 || nfeat_line[0] != "n_features" ||
      !parse_int(nfeat_line[1])) {
    throw ParseError("crf model: malformed n_features line");
  }
  const long long n_features = *parse_int(nfeat_line[1]);
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(n_features));
  for (long long i = 0; i < n_features; ++i) {
    names.push_back(expect_line(in, "feature name"));
  }
  CrfModel model = make_crf_model(std::move(labels), std::move(names),
                                  *parse_double(l2_line[1]),
                                  static_cast<int>(*parse_int(radius_line[1])));
  const auto payload_line = split_tabs(expect_line(in, "payload"));
  if (payload_line.size() != 2 || payload_line[0] != "payload" ||
      !parse_int(payload_line[1]) ||
      *parse_int(payload_line[1]) != crf_param_count(model)) {
    throw ParseError("crf model: payload size mismatch");
  }
  Vector params(crf_param_count(model));
  read_le_block(in, params.data(), params.size());
  crf_set_params(model, params);
  return model;
}

void save_crf_file(const CrfModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write model file: " + path);
  save_crf(model, out);
}

CrfModel load_crf_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file: " + path);
  return load_crf(in);
}

}  // namespace metseq
