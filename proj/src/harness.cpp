#include "metseq/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "metseq/rng.hpp"
#include "metseq/text.hpp"

namespace metseq {

std::map<Label, std::vector<std::string>> default_cue_lexicons() {
  return {
      {Label::INSTITUTE,
       {"university", "college", "professor", "degree", "campus", "faculty"}},
      {Label::ARTIFACT,
       {"squadron", "cathedral", "airport", "aircraft", "hangar", "runway"}},
      {Label::TEAM, {"club", "match", "league", "goal", "season", "striker"}},
      {Label::EVENT, {"battle", "festival", "siege", "regiment", "parade", "truce"}},
  };
}

namespace {

constexpr std::size_t kFillerVocab = 120;
constexpr std::size_t kPoolVocab = 10;
constexpr std::size_t kMinSampleLength = 8;
constexpr int kCueReach = 3;  // cues land within this many tokens of the candidate

std::string filler_word(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%03zu", i);
  return buf;
}

std::string pool_word(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "place%02zu", i);
  return buf;
}

Token make_token(const std::string& surface, const std::string& pos,
                 std::size_t position) {
  Token t;
  t.surface = surface;
  t.lemma = surface;
  t.pos = pos;
  t.dep_role = position == 0 ? "root" : "dep";
  t.head_index = position == 0 ? Token::kRootHead : static_cast<int>(position - 1);
  return t;
}

}  // namespace

SynthResult generate_synthetic_corpus(const SynthSpec& spec) {
  if (spec.tokens_per_sample < kMinSampleLength) {
    throw ValidationError("generate_synthetic_corpus: tokens_per_sample must be >= " +
                          std::to_string(kMinSampleLength));
  }
  if (spec.majority_ratio <= 0.0) {
    throw ValidationError("generate_synthetic_corpus: impossible ratio");
  }
  const auto lexicons =
      spec.cue_lexicons.empty() ? default_cue_lexicons() : spec.cue_lexicons;
  std::vector<Label> classes;
  for (const auto& [label, words] : lexicons) {
    if (label == Label::LIT || !is_fine_label(label) || words.empty()) {
      throw ValidationError("generate_synthetic_corpus: bad cue lexicon");
    }
    classes.push_back(label);
  }
  // Lexicons must be disjoint.
  {
    std::set<std::string> seen;
    for (const auto& [label, words] : lexicons) {
      for (const std::string& w : words) {
        if (!seen.insert(w).second) {
          throw ValidationError(
              "generate_synthetic_corpus: cue lexicons are not disjoint ('" + w +
              "')");
        }
      }
    }
  }

  SynthResult result;
  Rng rng(spec.seed);
  const std::size_t S = spec.n_samples;
  const std::size_t T = spec.tokens_per_sample;

  std::size_t n_positive = 0;
  long long delta = 0;  // filler tokens to add (+) or remove (-) overall
  if (S > 0) {
    const double total = static_cast<double>(S * T);
    n_positive = detail::round_half_up(total / (spec.majority_ratio + 1.0));
    if (n_positive == 0 || n_positive > S) {
      throw ValidationError("generate_synthetic_corpus: impossible ratio " +
                            std::to_string(spec.majority_ratio) + " for " +
                            std::to_string(S) + " samples of " +
                            std::to_string(T) + " tokens");
    }
    // Adjust literal mass so the token-level ratio lands on the target.
    const long long lit_target = static_cast<long long>(detail::round_half_up(
        spec.majority_ratio * static_cast<double>(n_positive)));
    const long long lit_now = static_cast<long long>(S * T - n_positive);
    delta = lit_target - lit_now;
    const long long n_negative = static_cast<long long>(S - n_positive);
    const long long removable =
        n_negative * static_cast<long long>(T - kMinSampleLength);
    if (delta < 0 && -delta > removable) {
      throw ValidationError("generate_synthetic_corpus: impossible ratio");
    }
  }

  std::vector<char> positive(S, 0);
  std::fill(positive.begin(),
            positive.begin() + static_cast<std::ptrdiff_t>(n_positive), 1);
  rng.shuffle(positive);

  // Spread the length adjustment over negative samples, one token each.
  std::vector<long long> length_adjust(S, 0);
  if (delta != 0) {
    std::vector<std::size_t> negatives;
    for (std::size_t s = 0; s < S; ++s) {
      if (!positive[s]) negatives.push_back(s);
    }
    long long remaining = delta;
    std::size_t cursor = 0;
    while (remaining != 0 && !negatives.empty()) {
      const std::size_t s = negatives[cursor];
      if (remaining > 0) {
        ++length_adjust[s];
        --remaining;
      } else if (length_adjust[s] >
                 -static_cast<long long>(T - kMinSampleLength)) {
        --length_adjust[s];
        ++remaining;
      }
      cursor = (cursor + 1) % negatives.size();
    }
    if (remaining != 0) {
      throw ValidationError("generate_synthetic_corpus: impossible ratio");
    }
  }

  for (std::size_t s = 0; s < S; ++s) {
    Sample sample;
    sample.id = "synth-" + std::to_string(s);
    const std::size_t len =
        static_cast<std::size_t>(static_cast<long long>(T) + length_adjust[s]);
    for (std::size_t i = 0; i < len; ++i) {
      sample.tokens.push_back(
          make_token(filler_word(rng.below(kFillerVocab)), "NN", i));
    }
    // One candidate token per sample, surface shared across classes.
    const std::size_t lo = static_cast<std::size_t>(kCueReach);
    const std::size_t hi = len - 1 - static_cast<std::size_t>(kCueReach);
    const std::size_t target = lo + rng.below(hi - lo + 1);
    sample.tokens[target] = make_token(pool_word(rng.below(kPoolVocab)), "NNP", target);

    const auto place_cues = [&](Label cls, std::size_t count) {
      std::vector<long long> offsets;
      for (long long o = -kCueReach; o <= kCueReach; ++o) {
        if (o != 0) offsets.push_back(o);
      }
      rng.shuffle(offsets);
      const auto& words = lexicons.at(cls);
      for (std::size_t c = 0; c < count && c < offsets.size(); ++c) {
        const std::size_t pos =
            static_cast<std::size_t>(static_cast<long long>(target) + offsets[c]);
        sample.tokens[pos] =
            make_token(words[rng.below(words.size())], "NN", pos);
      }
    };

    if (positive[s]) {
      const Label cls = classes[rng.below(classes.size())];
      const bool weak = rng.uniform() < spec.weak_cue_fraction;
      place_cues(cls, weak ? 1 : 3);
      sample.pmw_spans.push_back(Span{target, target + 1, cls});
    } else if (rng.uniform() < spec.decoy_rate) {
      place_cues(classes[rng.below(classes.size())], 1);
    }
    sample.gold = relabel(sample.tokens.size(), sample.pmw_spans);
    result.corpus.samples.push_back(std::move(sample));
  }

  // Embedding table: class centroids on the first axes, cues clustered
  // around them, everything else near the origin.
  result.table = EmbeddingTable(spec.dim, OovPolicy::Zero);
  const auto noise_vector = [&](double scale) {
    Vector v(spec.dim);
    for (Index i = 0; i < spec.dim; ++i) v[i] = rng.normal() * scale;
    return v;
  };
  for (std::size_t i = 0; i < kFillerVocab; ++i) {
    result.table.insert(filler_word(i), noise_vector(0.2));
  }
  for (std::size_t i = 0; i < kPoolVocab; ++i) {
    result.table.insert(pool_word(i), noise_vector(0.2));
  }
  Index axis = 0;
  for (const auto& [label, words] : lexicons) {
    Vector centroid = Vector::Zero(spec.dim);
    centroid[axis % spec.dim] = 2.0;
    ++axis;
    for (const std::string& w : words) {
      result.table.insert(w, centroid + noise_vector(0.15));
    }
  }
  return result;
}

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Crf: return "crf";
    case ModelKind::SeqLab: return "seqlab";
    case ModelKind::Window: return "window";
  }
  throw std::logic_error("unreachable model kind");
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "crf") return ModelKind::Crf;
  if (name == "seqlab") return ModelKind::SeqLab;
  if (name == "window") return ModelKind::Window;
  throw ConfigError("unknown model kind: " + std::string(name));
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig tc;
  tc.downsample_fraction = downsample_fraction;
  tc.learning_rate = learning_rate;
  tc.epochs = epochs;
  tc.batch_size = batch_size;
  tc.seed = seed;
  tc.granularity = granularity;
  tc.hidden_dim = hidden_dim;
  tc.window_n = window_n;
  tc.window_sides = window_sides;
  return tc;
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream out;
  out << "corpus.train\t" << train_path << '\n'
      << "corpus.val\t" << val_path << '\n'
      << "corpus.test\t" << test_path << '\n'
      << "downsample.fraction\t" << format_fixed(downsample_fraction, 6) << '\n'
      << "embeddings.kind\t"
      << (embeddings_kind == EmbeddingsKind::Static ? "static" : "contextual")
      << '\n'
      << "embeddings.path\t" << embeddings_path << '\n'
      << "granularity\t" << granularity_name(granularity) << '\n'
      << "model.batch_size\t" << batch_size << '\n'
      << "model.epochs\t" << epochs << '\n'
      << "model.hidden_dim\t" << hidden_dim << '\n'
      << "model.kind\t" << model_kind_name(model_kind) << '\n'
      << "model.l2\t" << format_fixed(l2, 6) << '\n'
      << "model.learning_rate\t" << format_fixed(learning_rate, 6) << '\n'
      << "model.max_iters\t" << max_iters << '\n'
      << "model.n\t" << window_n << '\n'
      << "model.radius\t" << radius << '\n'
      << "model.tolerance\t" << format_fixed(tolerance, 12) << '\n'
      << "out.dir\t" << out_dir << '\n'
      << "seed\t" << seed << '\n'
      << "window.sides\t" << window_sides_name(window_sides) << '\n';
  return out.str();
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig config;
  bool saw_seed = false, saw_train = false, saw_val = false, saw_test = false;
  bool saw_kind = false, saw_out = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto fields = split_ws(stripped);
    if (fields.size() != 2) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key value'");
    }
    const std::string key(fields[0]);
    const std::string value(fields[1]);
    const auto as_int = [&]() {
      const auto v = parse_int(value);
      if (!v) {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": integer expected for " + key);
      }
      return *v;
    };
    const auto as_double = [&]() {
      const auto v = parse_double(value);
      if (!v) {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": number expected for " + key);
      }
      return *v;
    };
    if (key == "corpus.train") {
      config.train_path = value;
      saw_train = true;
    } else if (key == "corpus.val") {
      config.val_path = value;
      saw_val = true;
    } else if (key == "corpus.test") {
      config.test_path = value;
      saw_test = true;
    } else if (key == "embeddings.kind") {
      if (value == "static") {
        config.embeddings_kind = EmbeddingsKind::Static;
      } else if (value == "contextual") {
        config.embeddings_kind = EmbeddingsKind::Contextual;
      } else {
        throw ConfigError("embeddings.kind must be static or contextual");
      }
    } else if (key == "embeddings.path") {
      config.embeddings_path = value;
    } else if (key == "model.kind") {
      config.model_kind = parse_model_kind(value);
      saw_kind = true;
    } else if (key == "granularity") {
      config.granularity = parse_granularity(value);
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(as_int());
      saw_seed = true;
    } else if (key == "out.dir") {
      config.out_dir = value;
      saw_out = true;
    } else if (key == "model.n") {
      config.window_n = static_cast<int>(as_int());
    } else if (key == "window.sides") {
      config.window_sides = parse_window_sides(value);
    } else if (key == "model.hidden_dim") {
      config.hidden_dim = static_cast<Index>(as_int());
    } else if (key == "model.epochs") {
      config.epochs = static_cast<int>(as_int());
    } else if (key == "model.learning_rate") {
      config.learning_rate = as_double();
    } else if (key == "model.batch_size") {
      config.batch_size = static_cast<int>(as_int());
    } else if (key == "downsample.fraction") {
      config.downsample_fraction = as_double();
    } else if (key == "model.l2") {
      config.l2 = as_double();
    } else if (key == "model.radius") {
      config.radius = static_cast<int>(as_int());
    } else if (key == "model.max_iters") {
      config.max_iters = static_cast<int>(as_int());
    } else if (key == "model.tolerance") {
      config.tolerance = as_double();
    } else {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    }
  }
  if (!saw_train || !saw_val || !saw_test) {
    throw ConfigError("config must name corpus.train, corpus.val and corpus.test");
  }
  if (!saw_kind) throw ConfigError("config must name model.kind");
  if (!saw_seed) throw ConfigError("config must name a seed");
  if (!saw_out) throw ConfigError("config must name out.dir");
  return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_experiment_config(in);
}

namespace {

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw ConfigError("stage '" + name + "': " + e.what());
  }
}

MetricsReport evaluate_predictions(const Corpus& corpus,
                                   const std::vector<std::vector<Label>>& pred,
                                   Granularity granularity) {
  std::vector<std::vector<Label>> gold;
  gold.reserve(corpus.samples.size());
  for (const Sample& sample : corpus.samples) {
    gold.push_back(granularity == Granularity::Coarse
                       ? project_coarse(sample.gold)
                       : sample.gold);
  }
  std::vector<std::vector<Label>> projected;
  const std::vector<std::vector<Label>>* used = &pred;
  if (granularity == Granularity::Coarse) {
    projected.reserve(pred.size());
    for (const auto& p : pred) projected.push_back(project_coarse(p));
    used = &projected;
  }
  return evaluate(gold, *used, granularity);
}

}  // namespace

SweepResult sweep_downsample(const Corpus& train, const Corpus& val,
                             const TokenVectorFn& vectors, Index input_dim,
                             const TrainConfig& base,
                             const std::vector<double>& fractions) {
  SweepResult result;
  double best_f1 = -1.0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    if (fractions[k] <= 0.0 || fractions[k] > 1.0) {
      throw ValidationError("sweep_downsample: fractions must lie in (0, 1]");
    }
    TrainConfig config = base;
    config.downsample_fraction = fractions[k];
    config.seed = mix_seed(base.seed, k);
    const TrainedWindow trained = train_window(train, vectors, input_dim, config);
    std::vector<std::vector<Label>> pred;
    pred.reserve(val.samples.size());
    for (const Sample& sample : val.samples) {
      pred.push_back(window_predict(trained.model, vectors(sample)));
    }
    MetricsReport report = evaluate_predictions(val, pred, base.granularity);
    if (report.micro.f1 > best_f1) {
      best_f1 = report.micro.f1;
      result.best_value = fractions[k];
    }
    result.entries.push_back(SweepEntry{fractions[k], std::move(report)});
  }
  return result;
}

SweepResult sweep_window(const Corpus& train, const Corpus& val,
                         const TokenVectorFn& vectors, Index input_dim,
                         const TrainConfig& base, const std::vector<int>& sizes) {
  SweepResult result;
  double best_f1 = -1.0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] < 1) {
      throw ValidationError("sweep_window: sizes must be >= 1");
    }
    TrainConfig config = base;
    config.window_n = sizes[k];
    config.seed = mix_seed(base.seed, k);
    const TrainedWindow trained = train_window(train, vectors, input_dim, config);
    std::vector<std::vector<Label>> pred;
    pred.reserve(val.samples.size());
    for (const Sample& sample : val.samples) {
      pred.push_back(window_predict(trained.model, vectors(sample)));
    }
    MetricsReport report = evaluate_predictions(val, pred, base.granularity);
    if (report.micro.f1 > best_f1) {
      best_f1 = report.micro.f1;
      result.best_value = static_cast<double>(sizes[k]);
    }
    result.entries.push_back(
        SweepEntry{static_cast<double>(sizes[k]), std::move(report)});
  }
  return result;
}

namespace {

struct LoadedEmbeddings {
  EmbeddingTable table;
  ContextualVectors contextual;
  TokenVectorFn source;
  Index dim = 0;
};

LoadedEmbeddings load_embeddings(const ExperimentConfig& config,
                                 const std::vector<const Corpus*>& corpora) {
  LoadedEmbeddings loaded;
  if (config.embeddings_path.empty()) {
    throw ConfigError("embeddings.path is required for neural models");
  }
  if (config.embeddings_kind == EmbeddingsKind::Static) {
    loaded.table = load_static_file(config.embeddings_path);
    loaded.source = make_static_source(loaded.table);
    loaded.dim = loaded.table.dim();
  } else {
    Corpus combined;
    for (const Corpus* c : corpora) {
      combined.samples.insert(combined.samples.end(), c->samples.begin(),
                              c->samples.end());
    }
    loaded.contextual = load_contextual_file(config.embeddings_path, combined);
    loaded.source = make_contextual_source(loaded.contextual);
    loaded.dim = loaded.contextual.dim();
  }
  return loaded;
}

}  // namespace

SweepResult sweep_downsample(const ExperimentConfig& config,
                             const std::vector<double>& fractions) {
  const Corpus train = stage("load train corpus",
                             [&] { return load_corpus_file(config.train_path); });
  const Corpus val =
      stage("load val corpus", [&] { return load_corpus_file(config.val_path); });
  const LoadedEmbeddings emb = stage(
      "load embeddings", [&] { return load_embeddings(config, {&train, &val}); });
  return stage("sweep", [&] {
    return sweep_downsample(train, val, emb.source, emb.dim,
                            config.train_config(), fractions);
  });
}

SweepResult sweep_window(const ExperimentConfig& config,
                         const std::vector<int>& sizes) {
  const Corpus train = stage("load train corpus",
                             [&] { return load_corpus_file(config.train_path); });
  const Corpus val =
      stage("load val corpus", [&] { return load_corpus_file(config.val_path); });
  const LoadedEmbeddings emb = stage(
      "load embeddings", [&] { return load_embeddings(config, {&train, &val}); });
  return stage("sweep", [&] {
    return sweep_window(train, val, emb.source, emb.dim, config.train_config(),
                        sizes);
  });
}

void write_sweep_report(std::ostream& out, const std::string& parameter,
                        const SweepResult& result) {
  out << parameter << "\tP\tR\tF1\n";
  for (const SweepEntry& entry : result.entries) {
    out << format_fixed(entry.value, 4) << '\t'
        << format_fixed(entry.report.micro.precision, 2) << '\t'
        << format_fixed(entry.report.micro.recall, 2) << '\t'
        << format_fixed(entry.report.micro.f1, 2) << '\n';
  }
  out << '\n';
  for (const SweepEntry& entry : result.entries) {
    const std::string prefix = parameter + "." + format_fixed(entry.value, 4);
    out << prefix << ".micro.precision\t"
        << format_fixed(entry.report.micro.precision, 6) << '\n';
    out << prefix << ".micro.recall\t"
        << format_fixed(entry.report.micro.recall, 6) << '\n';
    out << prefix << ".micro.f1\t" << format_fixed(entry.report.micro.f1, 6)
        << '\n';
  }
  out << "best." << parameter << '\t' << format_fixed(result.best_value, 4)
      << '\n';
}

RunResult run_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();

  stage("validate config", [&] {
    for (const std::string* path :
         {&config.train_path, &config.val_path, &config.test_path}) {
      if (!fs::exists(*path)) {
        throw ConfigError("corpus path does not exist: " + *path);
      }
    }
    if (config.model_kind != ModelKind::Crf &&
        !fs::exists(config.embeddings_path)) {
      throw ConfigError("embeddings path does not exist: " +
                        config.embeddings_path);
    }
    return 0;
  });

  const Corpus train = stage("load train corpus",
                             [&] { return load_corpus_file(config.train_path); });
  const Corpus val =
      stage("load val corpus", [&] { return load_corpus_file(config.val_path); });
  const Corpus test =
      stage("load test corpus", [&] { return load_corpus_file(config.test_path); });

  fs::create_directories(config.out_dir);
  RunResult result;
  result.model_path = (fs::path(config.out_dir) / "model.bin").string();
  result.val_report_path = (fs::path(config.out_dir) / "report.val.tsv").string();
  result.test_report_path =
      (fs::path(config.out_dir) / "report.test.tsv").string();
  result.manifest_path = (fs::path(config.out_dir) / "manifest.tsv").string();

  std::vector<std::vector<Label>> val_pred, test_pred;
  if (config.model_kind == ModelKind::Crf) {
    const CrfTrainResult trained = stage("train crf", [&] {
      CrfHyper hyper;
      hyper.l2 = config.l2;
      hyper.max_iters = config.max_iters;
      hyper.tolerance = config.tolerance;
      hyper.seed = config.seed;
      return train_crf(train, config.radius, hyper, config.granularity);
    });
    stage("save model", [&] {
      save_crf_file(trained.model, result.model_path);
      return 0;
    });
    stage("predict", [&] {
      for (const Sample& s : val.samples) {
        val_pred.push_back(crf_predict(trained.model, s));
      }
      for (const Sample& s : test.samples) {
        test_pred.push_back(crf_predict(trained.model, s));
      }
      return 0;
    });
  } else {
    const LoadedEmbeddings emb = stage("load embeddings", [&] {
      return load_embeddings(config, {&train, &val, &test});
    });
    if (config.model_kind == ModelKind::SeqLab) {
      const TrainedSeq trained = stage("train seqlab", [&] {
        return train_seqlab(train, emb.source, emb.dim, config.train_config());
      });
      stage("save model", [&] {
        save_seq_file(trained.model, result.model_path);
        return 0;
      });
      stage("predict", [&] {
        for (const Sample& s : val.samples) {
          val_pred.push_back(seqlab_predict(trained.model, emb.source(s)));
        }
        for (const Sample& s : test.samples) {
          test_pred.push_back(seqlab_predict(trained.model, emb.source(s)));
        }
        return 0;
      });
    } else {
      const TrainedWindow trained = stage("train window", [&] {
        return train_window(train, emb.source, emb.dim, config.train_config());
      });
      stage("save model", [&] {
        save_window_file(trained.model, result.model_path);
        return 0;
      });
      stage("predict", [&] {
        for (const Sample& s : val.samples) {
          val_pred.push_back(window_predict(trained.model, emb.source(s)));
        }
        for (const Sample& s : test.samples) {
          test_pred.push_back(window_predict(trained.model, emb.source(s)));
        }
        return 0;
      });
    }
  }

  stage("evaluate", [&] {
    result.val_primary = evaluate_predictions(val, val_pred, config.granularity);
    result.test_primary =
        evaluate_predictions(test, test_pred, config.granularity);
    if (config.granularity == Granularity::Fine) {
      result.val_coarse =
          evaluate_predictions(val, val_pred, Granularity::Coarse);
      result.test_coarse =
          evaluate_predictions(test, test_pred, Granularity::Coarse);
    }
    return 0;
  });

  stage("write reports", [&] {
    std::ofstream val_out(result.val_report_path, std::ios::binary);
    if (!val_out) throw ConfigError("cannot write " + result.val_report_path);
    write_report(val_out, "val", result.val_primary);
    if (result.val_coarse) write_report(val_out, "val", *result.val_coarse);
    std::ofstream test_out(result.test_report_path, std::ios::binary);
    if (!test_out) throw ConfigError("cannot write " + result.test_report_path);
    write_report(test_out, "test", result.test_primary);
    if (result.test_coarse) write_report(test_out, "test", *result.test_coarse);
    return 0;
  });

  const auto t1 = std::chrono::steady_clock::now();
  stage("write manifest", [&] {
    std::ofstream out(result.manifest_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + result.manifest_path);
    char hash_buf[32];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a64(config.canonical_text())));
    out << "config_hash\t" << hash_buf << '\n';
    out << "seed\t" << config.seed << '\n';
    out << "version\t" << kToolkitVersion << '\n';
    out << "wall_time_ms\t"
        << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()
        << '\n';
    return 0;
  });
  return result;
}

}  // namespace metseq
