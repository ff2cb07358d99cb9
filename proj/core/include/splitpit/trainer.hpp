#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitpit/autodiff.hpp"
#include "splitpit/checkpoint.hpp"
#include "splitpit/data.hpp"
#include "splitpit/model.hpp"
#include "splitpit/pit.hpp"
#include "splitpit/rng.hpp"
#include "splitpit/vocab.hpp"

namespace splitpit {

struct TrainConfig {
  /// Weight of the generation loss; 1 - lambda goes to fact classification.
  double lambda = 0.5;
  double lr_peak = 5e-4;
  std::size_t warmup_steps = 8000;
  std::size_t epochs = 30;
  /// Examples per step. With multitask on, half are split pairs and half facts.
  std::size_t batch_size = 64;
  bool multitask = true;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  PitConfig pit;
  /// vocab_size is filled from the vocabulary built at train time.
  ModelConfig model;
  std::size_t max_vocab = 5000;
  /// Epoch interval for validation BLEU; 0 disables validation.
  std::size_t validate_every = 1;
  std::size_t valid_beam = 1;
  /// Latest checkpoint, rewritten every epoch; the best one goes to
  /// checkpoint_path + ".best". Empty disables writing.
  std::string checkpoint_path;

  void validate() const;
};

/// A complex sentence, or a fact, prepared for the model.
EncodedPair encode_pair(const Vocabulary& vocab, const ComplexSimplePair& pair);

struct EncodedFactExample {
  std::vector<TokenId> sentence;
  EncodedFact fact;
};

EncodedFactExample encode_fact_example(const Vocabulary& vocab, const SentenceFactPair& example);

struct MultitaskLoss {
  ad::Tensor total;           // lambda * generation + (1 - lambda) * classification
  ad::Tensor generation;      // sum of PIT losses over the batch's split examples
  ad::Tensor classification;  // sum of fact BCE over the batch's fact examples
  std::vector<PitResult> pit;
};

MultitaskLoss multitask_loss(const SplitModel& model, std::span<const EncodedPair> pairs,
                             std::span<const EncodedFactExample> facts, const Batch& batch, double lambda,
                             const PitConfig& pit, Rng& rng);

/// lr_peak * min(step / warmup_steps, 1).
double learning_rate(const TrainConfig& config, std::size_t step);

/// First and second moments for every parameter.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState zeros(const ModelParams& params);
};

/// One bias-corrected Adam update at the given 1-based step.
void adam_step(ModelParams& params, std::span<const std::vector<double>> grads, std::size_t step,
               const TrainConfig& config, AdamState& state);

/// Scales grads in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_gradients(std::span<std::vector<double>> grads, double max_norm);

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double generation = 0.0;
  double classification = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;
  bool clipped = false;
  /// Largest number of orderings scored for one example in the step.
  std::size_t assignments = 0;
  /// chosen ordering index -> count over the step's split examples.
  std::map<std::size_t, std::size_t> chosen;

  std::string to_line() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> valid_bleu;
  std::optional<double> valid_exact;

  std::string to_line() const;
};

/// Append-only training log, mirrored line by line to an optional sink.
class TrainLog {
 public:
  TrainLog() = default;
  explicit TrainLog(std::ostream* sink) : sink_(sink) {}

  void append(const StepRecord& record);
  void append(const EpochRecord& record);
  const std::vector<StepRecord>& steps() const { return steps_; }
  const std::vector<EpochRecord>& epochs() const { return epochs_; }

 private:
  std::ostream* sink_ = nullptr;
  std::vector<StepRecord> steps_;
  std::vector<EpochRecord> epochs_;
};

struct TrainResult {
  Checkpoint final_model;
  /// Highest validation BLEU; the final model when validation is off.
  Checkpoint best_model;
  std::optional<double> best_valid_bleu;
};

/// Deterministic given (config, data). The vocabulary is built from
/// train_pairs; facts whose sentence is not a training source are still used.
TrainResult train(const TrainConfig& config, std::span<const ComplexSimplePair> train_pairs,
                  std::span<const ComplexSimplePair> valid_pairs, std::span<const SentenceFactPair> facts,
                  TrainLog& log);

/// Facts whose sentence is the source of one of the given pairs.
std::vector<SentenceFactPair> facts_for(std::span<const SentenceFactPair> facts,
                                        std::span<const ComplexSimplePair> pairs);

/// Fraction of examples where the classifier's p >= 0.5 agrees with the label.
double fact_accuracy(const SplitModel& model, const Vocabulary& vocab, std::span<const SentenceFactPair> facts);

struct AblationRow {
  PitMode mode = PitMode::kMin;
  std::vector<double> bleu;  // one per seed
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1); 0 for a single seed
};

/// Trains once per (mode, seed) and reports held-out BLEU of the final model.
std::vector<AblationRow> ablation_run(const TrainConfig& base, std::span<const ComplexSimplePair> train_pairs,
                                      std::span<const ComplexSimplePair> valid_pairs,
                                      std::span<const SentenceFactPair> facts, std::span<const PitMode> modes,
                                      std::span<const std::uint64_t> seeds, std::size_t eval_beam);

std::string format_ablation_table(std::span<const AblationRow> rows);

double mean(std::span<const double> xs);
/// Sample standard deviation; 0 for fewer than two values.
double sample_stddev(std::span<const double> xs);

}  // namespace splitpit
