#include "metseq/neural.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "metseq/io.hpp"
#include "metseq/text.hpp"

namespace metseq {

namespace detail {

std::size_t round_half_up(double value) {
  return static_cast<std::size_t>(std::floor(value + 0.5));
}

}  // namespace detail

RecurrentParams RecurrentParams::zeros(Index input, Index hidden) {
  RecurrentParams p;
  p.w_update = Matrix::Zero(hidden, input);
  p.u_update = Matrix::Zero(hidden, hidden);
  p.b_update = Vector::Zero(hidden);
  p.w_reset = Matrix::Zero(hidden, input);
  p.u_reset = Matrix::Zero(hidden, hidden);
  p.b_reset = Vector::Zero(hidden);
  p.w_cand = Matrix::Zero(hidden, input);
  p.u_cand = Matrix::Zero(hidden, hidden);
  p.b_cand = Vector::Zero(hidden);
  return p;
}

namespace {

inline Vector sigmoid(const Vector& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

// Forward states plus the gate activations needed for backpropagation.
struct RnnTrace {
  Matrix h;  // T x H
  Matrix z, r, c;
};

RnnTrace rnn_forward(const RecurrentParams& p, const Matrix& inputs) {
  const Index T = inputs.rows();
  const Index H = p.hidden_dim();
  if (T > 0 && inputs.cols() != p.input_dim()) {
    throw ValidationError("recurrent input dimensionality mismatch: got " +
                          std::to_string(inputs.cols()) + ", expected " +
                          std::to_string(p.input_dim()));
  }
  RnnTrace trace;
  trace.h.resize(T, H);
  trace.z.resize(T, H);
  trace.r.resize(T, H);
  trace.c.resize(T, H);
  Vector h_prev = Vector::Zero(H);
  for (Index t = 0; t < T; ++t) {
    const Vector x = inputs.row(t);
    const Vector z = sigmoid(p.w_update * x + p.u_update * h_prev + p.b_update);
    const Vector r = sigmoid(p.w_reset * x + p.u_reset * h_prev + p.b_reset);
    const Vector c =
        (p.w_cand * x + p.u_cand * (r.array() * h_prev.array()).matrix() + p.b_cand)
            .array()
            .tanh();
    const Vector h =
        ((1.0 - z.array()) * h_prev.array() + z.array() * c.array()).matrix();
    trace.z.row(t) = z;
    trace.r.row(t) = r;
    trace.c.row(t) = c;
    trace.h.row(t) = h;
    h_prev = h;
  }
  return trace;
}

// Accumulates parameter gradients for d(loss)/d(h_t) given in dh_outside.
void rnn_backward(const RecurrentParams& p, const Matrix& inputs,
                  const RnnTrace& trace, const Matrix& dh_outside,
                  RecurrentParams& grad) {
  const Index T = inputs.rows();
  const Index H = p.hidden_dim();
  Vector carry = Vector::Zero(H);
  for (Index t = T - 1; t >= 0; --t) {
    const Vector x = inputs.row(t);
    const Vector h_prev =
        t > 0 ? Vector(trace.h.row(t - 1)) : Vector(Vector::Zero(H));
    const Vector z = trace.z.row(t);
    const Vector r = trace.r.row(t);
    const Vector c = trace.c.row(t);
    const Vector dh = Vector(dh_outside.row(t)) + carry;

    const Vector dz = (dh.array() * (c - h_prev).array()).matrix();
    const Vector dc = (dh.array() * z.array()).matrix();
    Vector dh_prev = (dh.array() * (1.0 - z.array())).matrix();

    const Vector da_c = (dc.array() * (1.0 - c.array().square())).matrix();
    grad.w_cand += da_c * x.transpose();
    grad.u_cand += da_c * (r.array() * h_prev.array()).matrix().transpose();
    grad.b_cand += da_c;
    const Vector drh = p.u_cand.transpose() * da_c;
    const Vector dr = (drh.array() * h_prev.array()).matrix();
    dh_prev += (drh.array() * r.array()).matrix();

    const Vector da_r = (dr.array() * r.array() * (1.0 - r.array())).matrix();
    grad.w_reset += da_r * x.transpose();
    grad.u_reset += da_r * h_prev.transpose();
    grad.b_reset += da_r;
    dh_prev += p.u_reset.transpose() * da_r;

    const Vector da_z = (dz.array() * z.array() * (1.0 - z.array())).matrix();
    grad.w_update += da_z * x.transpose();
    grad.u_update += da_z * h_prev.transpose();
    grad.b_update += da_z;
    dh_prev += p.u_update.transpose() * da_z;

    carry = dh_prev;
  }
}

template <typename F>
void visit(RecurrentParams& p, F&& f) {
  f(p.w_update);
  f(p.u_update);
  f(p.b_update);
  f(p.w_reset);
  f(p.u_reset);
  f(p.b_reset);
  f(p.w_cand);
  f(p.u_cand);
  f(p.b_cand);
}

template <typename F>
void visit(const RecurrentParams& p, F&& f) {
  visit(const_cast<RecurrentParams&>(p), [&](auto& m) { f(std::as_const(m)); });
}

template <typename Model, typename F>
void visit_model(Model& m, F&& f) {
  visit(m.first_block(), f);
  visit(m.second_block(), f);
  f(m.cls.weight);
  f(m.cls.bias);
}

// Adapters so SeqModel and WindowModel share the flatten helpers.
struct SeqView {
  SeqModel& m;
  RecurrentParams& first_block() { return m.fwd; }
  RecurrentParams& second_block() { return m.bwd; }
  AffineClassifier& cls_ref() { return m.cls; }
};

template <typename ModelView>
Index view_param_count(ModelView view) {
  Index count = 0;
  const auto add = [&](const auto& block) { count += block.size(); };
  visit(view.first_block(), add);
  visit(view.second_block(), add);
  add(view.cls_ref().weight);
  add(view.cls_ref().bias);
  return count;
}

template <typename ModelView>
Vector view_get_params(ModelView view) {
  Vector params(view_param_count(view));
  Index offset = 0;
  const auto put = [&](const auto& block) {
    params.segment(offset, block.size()) =
        Eigen::Map<const Vector>(block.data(), block.size());
    offset += block.size();
  };
  visit(view.first_block(), put);
  visit(view.second_block(), put);
  put(view.cls_ref().weight);
  put(view.cls_ref().bias);
  return params;
}

template <typename ModelView>
void view_set_params(ModelView view, const Vector& params) {
  if (params.size() != view_param_count(view)) {
    throw ValidationError("parameter vector size mismatch");
  }
  Index offset = 0;
  const auto take = [&](auto& block) {
    Eigen::Map<Vector>(block.data(), block.size()) =
        params.segment(offset, block.size());
    offset += block.size();
  };
  visit(view.first_block(), take);
  visit(view.second_block(), take);
  take(view.cls_ref().weight);
  take(view.cls_ref().bias);
}

struct WindowView {
  WindowModel& m;
  RecurrentParams& first_block() { return m.left; }
  RecurrentParams& second_block() { return m.right; }
  AffineClassifier& cls_ref() { return m.cls; }
};

Matrix reverse_rows(const Matrix& m) { return m.colwise().reverse(); }

}  // namespace

Matrix recurrent_forward(const RecurrentParams& params, const Matrix& inputs) {
  return rnn_forward(params, inputs).h;
}

Vector recurrent_final_state(const RecurrentParams& params, const Matrix& inputs) {
  if (inputs.rows() == 0) return Vector::Zero(params.hidden_dim());
  return rnn_forward(params, inputs).h.bottomRows(1).transpose();
}

Vector log_softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

Matrix seqlab_forward(const SeqModel& model, const Matrix& inputs) {
  const Index T = inputs.rows();
  if (T == 0) throw ValidationError("seqlab_forward: empty sequence");
  const Matrix fwd_h = recurrent_forward(model.fwd, inputs);
  const Matrix bwd_h = reverse_rows(recurrent_forward(model.bwd, reverse_rows(inputs)));
  Matrix logp(T, model.n_labels());
  Vector features(2 * model.hidden_dim());
  for (Index t = 0; t < T; ++t) {
    features << fwd_h.row(t).transpose(), bwd_h.row(t).transpose();
    logp.row(t) = log_softmax(model.cls.weight * features + model.cls.bias);
  }
  return logp;
}

std::string_view window_sides_name(WindowSides sides) {
  return sides == WindowSides::One ? "one" : "both";
}

WindowSides parse_window_sides(std::string_view name) {
  if (name == "one") return WindowSides::One;
  if (name == "both") return WindowSides::Both;
  throw ParseError("unknown window_sides value: " + std::string(name));
}

std::pair<int, int> side_budgets(int n, WindowSides sides) {
  if (sides == WindowSides::One) return {n, n};
  return {(n + 1) / 2, n / 2};
}

std::pair<Matrix, Matrix> extract_window(const Matrix& vectors, std::size_t i,
                                         int n_left, int n_right) {
  const Index T = vectors.rows();
  if (static_cast<Index>(i) >= T) {
    throw ValidationError("extract_window: index out of range");
  }
  const Index pos = static_cast<Index>(i);
  const Index lo = std::max<Index>(0, pos - n_left);
  const Index hi = std::min<Index>(T - 1, pos + n_right);
  Matrix left = vectors.middleRows(lo, pos - lo);
  Matrix right = vectors.middleRows(pos + 1, hi - pos);
  return {std::move(left), std::move(right)};
}

Vector window_forward(const WindowModel& model, const Matrix& left,
                      const Matrix& right) {
  const Vector left_final = recurrent_final_state(model.left, left);
  // Right context runs toward the target so the final state reflects the
  // adjacent token, mirroring the left recurrence.
  const Vector right_final =
      recurrent_final_state(model.right, reverse_rows(right));
  Vector features(2 * model.hidden_dim());
  features << left_final, right_final;
  return log_softmax(model.cls.weight * features + model.cls.bias);
}

TokenVectorFn make_static_source(const EmbeddingTable& table) {
  return [&table](const Sample& sample) {
    Matrix m(static_cast<Index>(sample.tokens.size()), table.dim());
    for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
      m.row(static_cast<Index>(i)) = embed_token(table, sample.tokens[i].surface);
    }
    return m;
  };
}

TokenVectorFn make_contextual_source(const ContextualVectors& vectors) {
  return [&vectors](const Sample& sample) {
    return vectors.sample_matrix(sample.id);
  };
}

Index seq_param_count(const SeqModel& model) {
  return view_param_count(SeqView{const_cast<SeqModel&>(model)});
}

Vector seq_get_params(const SeqModel& model) {
  return view_get_params(SeqView{const_cast<SeqModel&>(model)});
}

void seq_set_params(SeqModel& model, const Vector& params) {
  view_set_params(SeqView{model}, params);
}

Index window_param_count(const WindowModel& model) {
  return view_param_count(WindowView{const_cast<WindowModel&>(model)});
}

Vector window_get_params(const WindowModel& model) {
  return view_get_params(WindowView{const_cast<WindowModel&>(model)});
}

void window_set_params(WindowModel& model, const Vector& params) {
  view_set_params(WindowView{model}, params);
}

namespace {

// Cross-entropy summed over positions; gradients written into grad_* blocks.
double seq_loss_grad_sum(const SeqModel& model, const Matrix& inputs,
                         const std::vector<int>& gold, RecurrentParams& g_fwd,
                         RecurrentParams& g_bwd, AffineClassifier& g_cls) {
  const Index T = inputs.rows();
  const Index H = model.hidden_dim();
  const Matrix rev_inputs = reverse_rows(inputs);
  const RnnTrace fwd = rnn_forward(model.fwd, inputs);
  const RnnTrace bwd = rnn_forward(model.bwd, rev_inputs);
  const Matrix bwd_h = reverse_rows(bwd.h);

  double loss = 0.0;
  Matrix d_fwd_h = Matrix::Zero(T, H);
  Matrix d_bwd_h_aligned = Matrix::Zero(T, H);
  Vector features(2 * H);
  for (Index t = 0; t < T; ++t) {
    features << fwd.h.row(t).transpose(), bwd_h.row(t).transpose();
    const Vector logp = log_softmax(model.cls.weight * features + model.cls.bias);
    const int y = gold[static_cast<std::size_t>(t)];
    loss -= logp[y];
    Vector dlogits = logp.array().exp().matrix();
    dlogits[y] -= 1.0;
    g_cls.weight += dlogits * features.transpose();
    g_cls.bias += dlogits;
    const Vector dfeat = model.cls.weight.transpose() * dlogits;
    d_fwd_h.row(t) = dfeat.head(H);
    d_bwd_h_aligned.row(t) = dfeat.tail(H);
  }
  rnn_backward(model.fwd, inputs, fwd, d_fwd_h, g_fwd);
  rnn_backward(model.bwd, rev_inputs, bwd, reverse_rows(d_bwd_h_aligned), g_bwd);
  return loss;
}

double window_loss_grad_sum(const WindowModel& model, const Matrix& left,
                            const Matrix& right, int gold,
                            RecurrentParams& g_left, RecurrentParams& g_right,
                            AffineClassifier& g_cls) {
  const Index H = model.hidden_dim();
  const Matrix right_rev = reverse_rows(right);
  const RnnTrace lt = rnn_forward(model.left, left);
  const RnnTrace rt = rnn_forward(model.right, right_rev);
  const Vector left_final =
      left.rows() > 0 ? Vector(lt.h.bottomRows(1).transpose()) : Vector(Vector::Zero(H));
  const Vector right_final =
      right.rows() > 0 ? Vector(rt.h.bottomRows(1).transpose()) : Vector(Vector::Zero(H));
  Vector features(2 * H);
  features << left_final, right_final;
  const Vector logp = log_softmax(model.cls.weight * features + model.cls.bias);
  const double loss = -logp[gold];
  Vector dlogits = logp.array().exp().matrix();
  dlogits[gold] -= 1.0;
  g_cls.weight += dlogits * features.transpose();
  g_cls.bias += dlogits;
  const Vector dfeat = model.cls.weight.transpose() * dlogits;
  if (left.rows() > 0) {
    Matrix dh = Matrix::Zero(left.rows(), H);
    dh.row(left.rows() - 1) = dfeat.head(H);
    rnn_backward(model.left, left, lt, dh, g_left);
  }
  if (right.rows() > 0) {
    Matrix dh = Matrix::Zero(right.rows(), H);
    dh.row(right.rows() - 1) = dfeat.tail(H);
    rnn_backward(model.right, right_rev, rt, dh, g_right);
  }
  return loss;
}

Vector flatten_grads(const RecurrentParams& a, const RecurrentParams& b,
                     const AffineClassifier& cls) {
  Index count = 0;
  const auto add = [&](const auto& m) { count += m.size(); };
  visit(a, add);
  visit(b, add);
  add(cls.weight);
  add(cls.bias);
  Vector flat(count);
  Index offset = 0;
  const auto put = [&](const auto& m) {
    flat.segment(offset, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    offset += m.size();
  };
  visit(a, put);
  visit(b, put);
  put(cls.weight);
  put(cls.bias);
  return flat;
}

AffineClassifier zero_classifier_like(const AffineClassifier& cls) {
  return AffineClassifier{Matrix::Zero(cls.weight.rows(), cls.weight.cols()),
                          Vector::Zero(cls.bias.size())};
}

}  // namespace

std::pair<double, Vector> seq_loss_and_gradient(const SeqModel& model,
                                                const Matrix& inputs,
                                                const std::vector<int>& gold) {
  if (static_cast<Index>(gold.size()) != inputs.rows() || inputs.rows() == 0) {
    throw ValidationError("seq_loss_and_gradient: gold/input length mismatch");
  }
  RecurrentParams g_fwd = RecurrentParams::zeros(model.input_dim(), model.hidden_dim());
  RecurrentParams g_bwd = RecurrentParams::zeros(model.input_dim(), model.hidden_dim());
  AffineClassifier g_cls = zero_classifier_like(model.cls);
  const double loss =
      seq_loss_grad_sum(model, inputs, gold, g_fwd, g_bwd, g_cls);
  const double scale = 1.0 / static_cast<double>(inputs.rows());
  Vector grad = flatten_grads(g_fwd, g_bwd, g_cls) * scale;
  return {loss * scale, std::move(grad)};
}

std::pair<double, Vector> window_loss_and_gradient(const WindowModel& model,
                                                   const Matrix& left,
                                                   const Matrix& right, int gold) {
  RecurrentParams g_left = RecurrentParams::zeros(model.input_dim(), model.hidden_dim());
  RecurrentParams g_right = RecurrentParams::zeros(model.input_dim(), model.hidden_dim());
  AffineClassifier g_cls = zero_classifier_like(model.cls);
  const double loss =
      window_loss_grad_sum(model, left, right, gold, g_left, g_right, g_cls);
  return {loss, flatten_grads(g_left, g_right, g_cls)};
}

std::pair<double, Vector> classifier_loss_and_gradient(
    const AffineClassifier& cls, const Vector& input, int gold) {
  const Vector logp = log_softmax(cls.weight * input + cls.bias);
  Vector dlogits = logp.array().exp().matrix();
  dlogits[gold] -= 1.0;
  Vector grad(cls.weight.size() + cls.bias.size());
  Matrix gw = dlogits * input.transpose();
  grad.head(gw.size()) = Eigen::Map<const Vector>(gw.data(), gw.size());
  grad.tail(dlogits.size()) = dlogits;
  return {-logp[gold], std::move(grad)};
}

namespace {

double max_relative_error(const Vector& analytic, const Vector& numeric) {
  double worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) {
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1.0});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace

double gradient_check(const SeqModel& model, const Matrix& inputs,
                      const std::vector<int>& gold, double eps) {
  const auto [loss, analytic] = seq_loss_and_gradient(model, inputs, gold);
  (void)loss;
  SeqModel probe = model;
  Vector params = seq_get_params(model);
  Vector numeric(params.size());
  for (Index i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    seq_set_params(probe, params);
    const double up = seq_loss_and_gradient(probe, inputs, gold).first;
    params[i] = saved - eps;
    seq_set_params(probe, params);
    const double down = seq_loss_and_gradient(probe, inputs, gold).first;
    params[i] = saved;
    numeric[i] = (up - down) / (2.0 * eps);
  }
  return max_relative_error(analytic, numeric);
}

double gradient_check(const WindowModel& model, const Matrix& left,
                      const Matrix& right, int gold, double eps) {
  const auto [loss, analytic] = window_loss_and_gradient(model, left, right, gold);
  (void)loss;
  WindowModel probe = model;
  Vector params = window_get_params(model);
  Vector numeric(params.size());
  for (Index i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    window_set_params(probe, params);
    const double up = window_loss_and_gradient(probe, left, right, gold).first;
    params[i] = saved - eps;
    window_set_params(probe, params);
    const double down = window_loss_and_gradient(probe, left, right, gold).first;
    params[i] = saved;
    numeric[i] = (up - down) / (2.0 * eps);
  }
  return max_relative_error(analytic, numeric);
}

double gradient_check(const AffineClassifier& cls, const Vector& input, int gold,
                      double eps) {
  const auto [loss, analytic] = classifier_loss_and_gradient(cls, input, gold);
  (void)loss;
  AffineClassifier probe = cls;
  const auto loss_at = [&]() {
    return classifier_loss_and_gradient(probe, input, gold).first;
  };
  Vector numeric(analytic.size());
  Index k = 0;
  const auto probe_block = [&](auto& block) {
    for (Index i = 0; i < block.size(); ++i, ++k) {
      const double saved = block.data()[i];
      block.data()[i] = saved + eps;
      const double up = loss_at();
      block.data()[i] = saved - eps;
      const double down = loss_at();
      block.data()[i] = saved;
      numeric[k] = (up - down) / (2.0 * eps);
    }
  };
  probe_block(probe.weight);
  probe_block(probe.bias);
  return max_relative_error(analytic, numeric);
}

namespace {

RecurrentParams init_recurrent(Index input, Index hidden, Rng& rng) {
  RecurrentParams p = RecurrentParams::zeros(input, hidden);
  visit(p, [&](auto& block) {
    for (Index i = 0; i < block.size(); ++i) {
      block.data()[i] = rng.uniform(-0.1, 0.1);
    }
  });
  return p;
}

AffineClassifier init_classifier(Index labels, Index features, Rng& rng) {
  AffineClassifier cls{Matrix(labels, features), Vector(labels)};
  for (Index i = 0; i < cls.weight.size(); ++i) {
    cls.weight.data()[i] = rng.uniform(-0.1, 0.1);
  }
  for (Index i = 0; i < cls.bias.size(); ++i) {
    cls.bias[i] = rng.uniform(-0.1, 0.1);
  }
  return cls;
}

int project_gold(Label label, Granularity granularity, const std::vector<Label>& labels) {
  const Label target =
      granularity == Granularity::Coarse ? to_coarse(label) : label;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == target) return static_cast<int>(i);
  }
  throw ValidationError("gold label outside the model label set");
}

void check_finite(double loss) {
  if (!std::isfinite(loss)) {
    throw ValidationError(
        "training diverged: non-finite loss (learning rate too high)");
  }
}

}  // namespace

TrainedSeq train_seqlab(const Corpus& train, const TokenVectorFn& vectors,
                        Index input_dim, const TrainConfig& config) {
  if (train.samples.empty()) throw ValidationError("train_seqlab: empty corpus");
  const LabelScheme scheme;
  TrainedSeq out;
  out.model.labels = scheme.labels(config.granularity);
  Rng rng(config.seed);
  out.model.fwd = init_recurrent(input_dim, config.hidden_dim, rng);
  out.model.bwd = init_recurrent(input_dim, config.hidden_dim, rng);
  out.model.cls = init_classifier(out.model.n_labels(), 2 * config.hidden_dim, rng);

  std::vector<Matrix> features;
  std::vector<std::vector<int>> gold;
  features.reserve(train.samples.size());
  for (const Sample& sample : train.samples) {
    features.push_back(vectors(sample));
    std::vector<int> g;
    g.reserve(sample.gold.size());
    for (Label l : sample.gold) {
      g.push_back(project_gold(l, config.granularity, out.model.labels));
    }
    gold.push_back(std::move(g));
  }

  std::vector<std::size_t> order(train.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const Index H = config.hidden_dim;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      RecurrentParams g_fwd = RecurrentParams::zeros(input_dim, H);
      RecurrentParams g_bwd = RecurrentParams::zeros(input_dim, H);
      AffineClassifier g_cls = zero_classifier_like(out.model.cls);
      double batch_loss = 0.0;
      std::size_t batch_tokens = 0;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t s = order[k];
        batch_loss += seq_loss_grad_sum(out.model, features[s], gold[s], g_fwd,
                                        g_bwd, g_cls);
        batch_tokens += gold[s].size();
      }
      check_finite(batch_loss);
      const double scale = config.learning_rate / static_cast<double>(batch_tokens);
      Vector params = seq_get_params(out.model);
      params -= scale * flatten_grads(g_fwd, g_bwd, g_cls);
      seq_set_params(out.model, params);
      epoch_loss += batch_loss;
      epoch_tokens += batch_tokens;
    }
    out.loss_trace.push_back(epoch_loss / static_cast<double>(epoch_tokens));
  }
  return out;
}

TrainedWindow train_window(const Corpus& train, const TokenVectorFn& vectors,
                           Index input_dim, const TrainConfig& config) {
  if (train.samples.empty()) throw ValidationError("train_window: empty corpus");
  const LabelScheme scheme;
  TrainedWindow out;
  out.model.labels = scheme.labels(config.granularity);
  out.model.n = config.window_n;
  out.model.sides = config.window_sides;
  Rng rng(config.seed);
  out.model.left = init_recurrent(input_dim, config.hidden_dim, rng);
  out.model.right = init_recurrent(input_dim, config.hidden_dim, rng);
  out.model.cls = init_classifier(out.model.n_labels(), 2 * config.hidden_dim, rng);

  std::vector<Matrix> features;
  features.reserve(train.samples.size());
  for (const Sample& sample : train.samples) features.push_back(vectors(sample));

  struct TokenInstance {
    std::size_t sample;
    std::size_t index;
    Label label;
  };
  std::vector<TokenInstance> instances;
  for (std::size_t s = 0; s < train.samples.size(); ++s) {
    const Sample& sample = train.samples[s];
    for (std::size_t i = 0; i < sample.tokens.size(); ++i) {
      const Label l = config.granularity == Granularity::Coarse
                          ? to_coarse(sample.gold[i])
                          : sample.gold[i];
      instances.push_back(TokenInstance{s, i, l});
    }
  }
  instances = downsample_majority(instances, config.downsample_fraction,
                                  Label::LIT, mix_seed(config.seed, 1));

  const auto [n_left, n_right] = side_budgets(config.window_n, config.window_sides);
  const Index H = config.hidden_dim;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(instances);
    double epoch_loss = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t start = 0; start < instances.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(
          instances.size(), start + static_cast<std::size_t>(config.batch_size));
      RecurrentParams g_left = RecurrentParams::zeros(input_dim, H);
      RecurrentParams g_right = RecurrentParams::zeros(input_dim, H);
      AffineClassifier g_cls = zero_classifier_like(out.model.cls);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const TokenInstance& inst = instances[k];
        const auto [left, right] =
            extract_window(features[inst.sample], inst.index, n_left, n_right);
        const int y = project_gold(inst.label, config.granularity, out.model.labels);
        batch_loss += window_loss_grad_sum(out.model, left, right, y, g_left,
                                           g_right, g_cls);
      }
      check_finite(batch_loss);
      const double scale =
          config.learning_rate / static_cast<double>(stop - start);
      Vector params = window_get_params(out.model);
      params -= scale * flatten_grads(g_left, g_right, g_cls);
      window_set_params(out.model, params);
      epoch_loss += batch_loss;
      epoch_count += stop - start;
    }
    out.loss_trace.push_back(epoch_loss / static_cast<double>(epoch_count));
  }
  return out;
}

std::vector<Label> seqlab_predict(const SeqModel& model, const Matrix& inputs) {
  const Matrix logp = seqlab_forward(model, inputs);
  std::vector<Label> pred;
  pred.reserve(static_cast<std::size_t>(logp.rows()));
  for (Index t = 0; t < logp.rows(); ++t) {
    int best = 0;
    for (Index l = 1; l < logp.cols(); ++l) {
      if (logp(t, l) > logp(t, best)) best = static_cast<int>(l);
    }
    pred.push_back(model.labels[static_cast<std::size_t>(best)]);
  }
  return pred;
}

std::vector<Label> window_predict(const WindowModel& model, const Matrix& inputs) {
  const auto [n_left, n_right] = side_budgets(model.n, model.sides);
  std::vector<Label> pred;
  pred.reserve(static_cast<std::size_t>(inputs.rows()));
  for (Index i = 0; i < inputs.rows(); ++i) {
    const auto [left, right] =
        extract_window(inputs, static_cast<std::size_t>(i), n_left, n_right);
    const Vector logp = window_forward(model, left, right);
    int best = 0;
    for (Index l = 1; l < logp.size(); ++l) {
      if (logp[l] > logp[best]) best = static_cast<int>(l);
    }
    pred.push_back(model.labels[static_cast<std::size_t>(best)]);
  }
  return pred;
}

namespace {

void write_labels_line(std::ostream& out, const std::vector<Label>& labels) {
  out << "labels";
  for (Label l : labels) out << '\t' << label_name(l);
  out << '\n';
}

std::vector<Label> read_labels_line(std::istream& in) {
  const auto fields = split_tabs(expect_line(in, "label list"));
  if (fields.size() < 2 || fields[0] != "labels") {
    throw ParseError("neural model: malformed label list");
  }
  std::vector<Label> labels;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    labels.push_back(parse_label(fields[i]));
  }
  return labels;
}

long long read_int_field(std::istream& in, const std::string& key) {
  const auto fields = split_tabs(expect_line(in, key));
  if (fields.size() != 2 || fields[0] != key || !parse_int(fields[1])) {
    throw ParseError("neural model: malformed '" + key + "' line");
  }
  return *parse_int(fields[1]);
}

void write_payload(std::ostream& out, const Vector& params) {
  out << "payload\t" << params.size() << '\n';
  write_le_block(out, params.data(), params.size());
}

Vector read_payload(std::istream& in, Index expected) {
  const auto fields = split_tabs(expect_line(in, "payload"));
  if (fields.size() != 2 || fields[0] != "payload" || !parse_int(fields[1]) ||
      *parse_int(fields[1]) != expected) {
    throw ParseError("neural model: payload size mismatch");
  }
  Vector params(expected);
  read_le_block(in, params.data(), expected);
  return params;
}

}  // namespace

void save_seq(const SeqModel& model, std::ostream& out) {
  out << "metseq-neural\tv1\nkind\tseqlab\n";
  write_labels_line(out, model.labels);
  out << "input_dim\t" << model.input_dim() << '\n';
  out << "hidden_dim\t" << model.hidden_dim() << '\n';
  write_payload(out, seq_get_params(model));
}

SeqModel load_seq(std::istream& in) {
  if (expect_line(in, "neural header") != "metseq-neural\tv1" ||
      expect_line(in, "kind") != "kind\tseqlab") {
    throw ParseError("not a metseq-neural v1 seqlab model");
  }
  SeqModel model;
  model.labels = read_labels_line(in);
  const Index input = static_cast<Index>(read_int_field(in, "input_dim"));
  const Index hidden = static_cast<Index>(read_int_field(in, "hidden_dim"));
  model.fwd = RecurrentParams::zeros(input, hidden);
  model.bwd = RecurrentParams::zeros(input, hidden);
  model.cls =
      AffineClassifier{Matrix::Zero(model.n_labels(), 2 * hidden),
                       Vector::Zero(model.n_labels())};
  seq_set_params(model, read_payload(in, seq_param_count(model)));
  return model;
}

void save_window(const WindowModel& model, std::ostream& out) {
  out << "metseq-neural\tv1\nkind\twindow\n";
  write_labels_line(out, model.labels);
  out << "input_dim\t" << model.input_dim() << '\n';
  out << "hidden_dim\t" << model.hidden_dim() << '\n';
  out << "n\t" << model.n << '\n';
  out << "sides\t" << window_sides_name(model.sides) << '\n';
  write_payload(out, window_get_params(model));
}

WindowModel load_window(std::istream& in) {
  if (expect_line(in, "neural header") != "metseq-neural\tv1" ||
      expect_line(in, "kind") != "kind\twindow") {
    throw ParseError("not a metseq-neural v1 window model");
  }
  WindowModel model;
  model.labels = read_labels_line(in);
  const Index input = static_cast<Index>(read_int_field(in, "input_dim"));
  const Index hidden = static_cast<Index>(read_int_field(in, "hidden_dim"));
  model.n = static_cast<int>(read_int_field(in, "n"));
  const auto sides = split_tabs(expect_line(in, "sides"));
  if (sides.size() != 2 || sides[0] != "sides") {
    throw ParseError("neural model: malformed 'sides' line");
  }
  model.sides = parse_window_sides(sides[1]);
  model.left = RecurrentParams::zeros(input, hidden);
  model.right = RecurrentParams::zeros(input, hidden);
  model.cls =
      AffineClassifier{Matrix::Zero(model.n_labels(), 2 * hidden),
                       Vector::Zero(model.n_labels())};
  window_set_params(model, read_payload(in, window_param_count(model)));
  return model;
}

void save_seq_file(const SeqModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write model file: " + path);
  save_seq(model, out);
}

SeqModel load_seq_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file: " + path);
  return load_seq(in);
}

void save_window_file(const WindowModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write model file: " + path);
  save_window(model, out);
}

WindowModel load_window_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file: " + path);
  return load_window(in);
}

std::string neural_model_kind(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file: " + path);
  if (expect_line(in, "neural header") != "metseq-neural\tv1") {
    throw ParseError("not a metseq-neural v1 model: " + path);
  }
  const auto kind = split_tabs(expect_line(in, "kind"));
  if (kind.size() != 2 || kind[0] != "kind") {
    throw ParseError("neural model: malformed kind line");
  }
  return std::string(kind[1]);
}

}  // namespace metseq
