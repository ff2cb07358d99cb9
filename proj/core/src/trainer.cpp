#include "splitpit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "splitpit/error.hpp"
#include "splitpit/inference.hpp"

namespace splitpit {

void TrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("train.lambda must lie in [0, 1]");
  if (!(lr_peak > 0.0) || !std::isfinite(lr_peak)) throw ValidationError("train.lr must be positive");
  if (epochs == 0) throw ValidationError("train.epochs must be positive");
  if (batch_size == 0) throw ValidationError("train.batch_size must be positive");
  if (multitask && batch_size % 2 != 0) {
    throw ValidationError("train.batch_size must be even when multi-task batching is on");
  }
  if (!(clip_norm >= 0.0)) throw ValidationError("train.clip must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("Adam epsilon must be positive");
  if (max_vocab <= kReservedTokens) throw ValidationError("data.max_vocab must exceed the reserved tokens");
  if (valid_beam == 0) throw ValidationError("train.valid_beam must be positive");
  ModelConfig probe = model;
  probe.vocab_size = max_vocab;
  probe.validate();
}

EncodedPair encode_pair(const Vocabulary& vocab, const ComplexSimplePair& pair) {
  EncodedPair out{make_source(vocab, pair.source), {}};
  for (const auto& simple : pair.simples) out.simples.push_back(encode_target(vocab, out.source, simple));
  return out;
}

EncodedFactExample encode_fact_example(const Vocabulary& vocab, const SentenceFactPair& example) {
  const Fact& f = example.fact;
  return {vocab.encode(example.sentence), {vocab.encode(f.arg1), vocab.encode(f.relation), vocab.encode(f.arg2), f.label}};
}

MultitaskLoss multitask_loss(const SplitModel& model, std::span<const EncodedPair> pairs,
                             std::span<const EncodedFactExample> facts, const Batch& batch, double lambda,
                             const PitConfig& pit, Rng& rng) {
  if (batch.split.empty() && batch.facts.empty()) throw ValidationError("multitask_loss: empty batch");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("multitask_loss: lambda must lie in [0, 1]");

  MultitaskLoss out;
  std::vector<ad::Tensor> gen_terms;
  for (std::size_t i : batch.split) {
    PitResult r = pit_loss(model, pairs[i], pit, rng);
    gen_terms.push_back(r.loss);
    out.pit.push_back(std::move(r));
  }
  std::vector<ad::Tensor> cls_terms;
  for (std::size_t j : batch.facts) {
    const EncodedFactExample& ex = facts[j];
    cls_terms.push_back(model.fact_loss(ex.sentence, ex.fact));
  }
  auto total_of = [](const std::vector<ad::Tensor>& terms) {
    return terms.empty() ? ad::Tensor::scalar(0.0) : ad::sum(ad::concat(std::span<const ad::Tensor>(terms)));
  };
  out.generation = total_of(gen_terms);
  out.classification = total_of(cls_terms);
  out.total = ad::add(ad::scale(out.generation, lambda), ad::scale(out.classification, 1.0 - lambda));
  return out;
}

double learning_rate(const TrainConfig& config, std::size_t step) {
  if (config.warmup_steps == 0) return config.lr_peak;
  const double ramp = static_cast<double>(step) / static_cast<double>(config.warmup_steps);
  return config.lr_peak * std::min(ramp, 1.0);
}

AdamState AdamState::zeros(const ModelParams& params) {
  AdamState s;
  for (const auto& t : params.values()) {
    s.m.emplace_back(t.size(), 0.0);
    s.v.emplace_back(t.size(), 0.0);
  }
  return s;
}

void adam_step(ModelParams& params, std::span<const std::vector<double>> grads, std::size_t step,
               const TrainConfig& config, AdamState& state) {
  if (step == 0) throw ValidationError("adam_step: step index starts at 1");
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ValidationError("adam_step: gradient/state count does not match the parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != params.value(i).size()) {
      throw ShapeError("adam_step: gradient size mismatch for " + params.name(i));
    }
    for (double g : grads[i]) {
      if (!std::isfinite(g)) throw ValidationError("adam_step: non-finite gradient for " + params.name(i));
    }
  }

  const double lr = learning_rate(config, step);
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const ad::Tensor& current = params.value(i);
    std::vector<double> updated(current.data().begin(), current.data().end());
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < updated.size(); ++j) {
      const double g = grads[i][j];
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g * g;
      updated[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config.adam_eps);
    }
    params.set(i, ad::Tensor(current.shape(), std::move(updated)));
  }
}

double clip_gradients(std::span<std::vector<double>> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double x : g) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto& g : grads) {
      for (double& x : g) x *= factor;
    }
  }
  return norm;
}

std::string StepRecord::to_line() const {
  std::ostringstream s;
  s << std::setprecision(17) << "step=" << step << " epoch=" << epoch << " L=" << loss << " L_G=" << generation
    << " L_C=" << classification << " lr=" << lr << " grad_norm=" << grad_norm << " clipped=" << (clipped ? 1 : 0)
    << " assignments=" << assignments << " chosen=";
  bool first = true;
  for (const auto& [index, count] : chosen) {
    s << (first ? "" : ",") << index << ':' << count;
    first = false;
  }
  if (first) s << '-';
  return s.str();
}

std::string EpochRecord::to_line() const {
  std::ostringstream s;
  s << std::setprecision(17) << "epoch=" << epoch << " mean_L=" << mean_loss;
  if (valid_bleu) s << " valid_bleu=" << *valid_bleu;
  if (valid_exact) s << " valid_exact=" << *valid_exact;
  return s.str();
}

void TrainLog::append(const StepRecord& record) {
  steps_.push_back(record);
  if (sink_) *sink_ << record.to_line() << '\n';
}

void TrainLog::append(const EpochRecord& record) {
  epochs_.push_back(record);
  if (sink_) *sink_ << record.to_line() << std::endl;
}

std::vector<SentenceFactPair> facts_for(std::span<const SentenceFactPair> facts,
                                        std::span<const ComplexSimplePair> pairs) {
  std::set<Tokens> sources;
  for (const auto& p : pairs) sources.insert(p.source);
  std::vector<SentenceFactPair> out;
  for (const auto& f : facts) {
    if (sources.count(f.sentence)) out.push_back(f);
  }
  return out;
}

double fact_accuracy(const SplitModel& model, const Vocabulary& vocab, std::span<const SentenceFactPair> facts) {
  if (facts.empty()) throw ValidationError("fact_accuracy: no examples");
  const SplitModel frozen = model.detached();
  std::size_t correct = 0;
  for (const auto& f : facts) {
    const EncodedFactExample ex = encode_fact_example(vocab, f);
    const bool predicted = frozen.fact_probability(ex.sentence, ex.fact) >= 0.5;
    if (predicted == ex.fact.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(facts.size());
}

TrainResult train(const TrainConfig& config, std::span<const ComplexSimplePair> train_pairs,
                  std::span<const ComplexSimplePair> valid_pairs, std::span<const SentenceFactPair> facts,
                  TrainLog& log) {
  config.validate();
  if (train_pairs.empty()) throw ValidationError("train: no training pairs");
  if (config.multitask && facts.empty()) throw ValidationError("train: multi-task training needs fact examples");

  const Vocabulary vocab = build_vocab(train_pairs, config.max_vocab);
  ModelConfig model_config = config.model;
  model_config.vocab_size = vocab.size();
  model_config.validate();

  Rng init_rng = Rng::derive(config.seed, "model.init");
  ModelParams params = ModelParams::init(model_config, init_rng);

  std::vector<EncodedPair> pairs;
  pairs.reserve(train_pairs.size());
  for (const auto& p : train_pairs) {
    if (p.source.size() > model_config.max_source_len) {
      throw ValidationError("train: source longer than model.max_source_len (" + std::to_string(p.source.size()) +
                            " tokens)");
    }
    pairs.push_back(encode_pair(vocab, p));
  }
  std::vector<EncodedFactExample> fact_examples;
  if (config.multitask) {
    for (const auto& f : facts) fact_examples.push_back(encode_fact_example(vocab, f));
  }

  BatchIterator batches(pairs.size(), fact_examples.size(), config.batch_size, config.multitask,
                        Rng::derive_seed(config.seed, "batch"));
  Rng pit_rng = Rng::derive(config.seed, "pit");
  AdamState adam = AdamState::zeros(params);
  const double lambda = config.multitask ? config.lambda : 1.0;

  TrainResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t n_steps = 0;
    for (const Batch& batch : batches.next_epoch()) {
      ++step;
      ad::Tape tape;
      const SplitModel model(model_config, params, tape);
      const MultitaskLoss loss = multitask_loss(model, pairs, fact_examples, batch, lambda, config.pit, pit_rng);
      tape.backward(loss.total);
      std::vector<std::vector<double>> grads = parameter_gradients(model, tape);
      const double norm = clip_gradients(grads, config.clip_norm);
      adam_step(params, grads, step, config, adam);

      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.loss = loss.total.item();
      rec.generation = loss.generation.item();
      rec.classification = loss.classification.item();
      rec.lr = learning_rate(config, step);
      rec.grad_norm = norm;
      rec.clipped = config.clip_norm > 0.0 && norm > config.clip_norm;
      for (const auto& r : loss.pit) {
        rec.assignments = std::max(rec.assignments, r.assignments);
        ++rec.chosen[r.chosen_index];
      }
      log.append(rec);
      loss_sum += rec.loss;
      ++n_steps;
    }

    EpochRecord erec;
    erec.epoch = epoch;
    erec.mean_loss = loss_sum / static_cast<double>(n_steps);
    const Checkpoint current{model_config, vocab, params};
    bool improved = false;
    if (config.validate_every && !valid_pairs.empty() && epoch % config.validate_every == 0) {
      const SplitModel model(model_config, params);
      const EvalResult eval = evaluate(model, vocab, valid_pairs, config.valid_beam, config.pit.max_k);
      erec.valid_bleu = eval.report.bleu;
      erec.valid_exact = eval.exact_match;
      if (!result.best_valid_bleu || eval.report.bleu > *result.best_valid_bleu) {
        result.best_valid_bleu = eval.report.bleu;
        result.best_model = current;
        improved = true;
      }
    }
    log.append(erec);
    if (!config.checkpoint_path.empty()) {
      save_checkpoint(config.checkpoint_path, current);
      if (improved) save_checkpoint(config.checkpoint_path + ".best", current);
    }
  }

  result.final_model = Checkpoint{model_config, vocab, params};
  if (!result.best_valid_bleu) result.best_model = result.final_model;
  return result;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean(xs);
  double sq = 0.0;
  for (double x : xs) sq += (x - mu) * (x - mu);
  return std::sqrt(sq / static_cast<double>(xs.size() - 1));
}

std::vector<AblationRow> ablation_run(const TrainConfig& base, std::span<const ComplexSimplePair> train_pairs,
                                      std::span<const ComplexSimplePair> valid_pairs,
                                      std::span<const SentenceFactPair> facts, std::span<const PitMode> modes,
                                      std::span<const std::uint64_t> seeds, std::size_t eval_beam) {
  if (modes.empty() || seeds.empty()) throw ValidationError("ablation_run: need at least one mode and one seed");
  if (valid_pairs.empty()) throw ValidationError("ablation_run: no held-out pairs");
  std::vector<AblationRow> rows;
  for (PitMode mode : modes) {
    AblationRow row;
    row.mode = mode;
    for (std::uint64_t seed : seeds) {
      TrainConfig config = base;
      config.seed = seed;
      config.pit.mode = mode;
      config.validate_every = 0;
      config.checkpoint_path.clear();
      TrainLog log;
      const TrainResult trained = train(config, train_pairs, valid_pairs, facts, log);
      const SplitModel model(trained.final_model.config, trained.final_model.params);
      row.bleu.push_back(
          evaluate(model, trained.final_model.vocab, valid_pairs, eval_beam, config.pit.max_k).report.bleu);
    }
    row.mean = mean(row.bleu);
    row.stddev = sample_stddev(row.bleu);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
  std::ostringstream s;
  s << "mode     runs  bleu_mean  bleu_std\n" << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    s << std::left << std::setw(8) << to_string(r.mode) << ' ' << std::right << std::setw(4) << r.bleu.size()
      << "  " << std::setw(9) << r.mean << "  " << std::setw(8) << r.stddev << '\n';
  }
  return s.str();
}

}  // namespace splitpit
