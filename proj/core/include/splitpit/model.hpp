#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "splitpit/autodiff.hpp"
#include "splitpit/rng.hpp"
#include "splitpit/vocab.hpp"

namespace splitpit {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed = 32;
  std::size_t hidden = 64;
  /// Filters per width for both the sentence-summary and the fact CNN.
  std::size_t filters = 24;
  std::vector<std::size_t> filter_widths{3, 4, 5};
  /// Width of the classifier's hidden layer; 0 means `hidden`.
  std::size_t classifier_hidden = 0;
  std::size_t max_source_len = 128;
  /// Pins the copy gate p_gen to a constant. Not persisted in checkpoints.
  std::optional<double> copy_gate_override;

  void validate() const;
  std::size_t summary_size() const { return filters * filter_widths.size(); }
  std::size_t max_filter_width() const;
  std::size_t classifier_width() const { return classifier_hidden ? classifier_hidden : hidden; }

  bool operator==(const ModelConfig&) const = default;
};

/// Names and shapes of every learnable tensor, in storage order.
std::vector<std::pair<std::string, ad::Shape>> parameter_layout(const ModelConfig& config);

/// All learnable weights, in parameter_layout order.
class ModelParams {
 public:
  ModelParams() = default;

  /// Embeddings uniform with unit variance, weight matrices Glorot uniform,
  /// biases zero. Small embeddings leave the classifier unable to tell
  /// relation phrases apart.
  static ModelParams init(const ModelConfig& config, Rng& rng);
  static ModelParams zeros(const ModelConfig& config);

  std::size_t size() const { return values_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<ad::Tensor>& values() const { return values_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const ad::Tensor& value(std::size_t i) const { return values_.at(i); }
  const ad::Tensor& get(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  std::size_t total_values() const;

  /// Replaces entry i; the shape must not change.
  void set(std::size_t i, ad::Tensor value);
  void set(std::string_view name, ad::Tensor value) { set(index_of(name), std::move(value)); }

  /// Bitwise equality of names, shapes and values.
  bool operator==(const ModelParams& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor> values_;
};

struct LstmState {
  ad::Tensor h;
  ad::Tensor c;
};

/// One LSTM step. weights (e+d, 4d) act on [x; h]; gate order i, f, g, o.
LstmState lstm_step(const ad::Tensor& weights, const ad::Tensor& bias, const ad::Tensor& x,
                    const LstmState& state);

struct EncoderOutput {
  ad::Tensor hidden_states;  // (n, d)
  LstmState final_state;

  std::size_t length() const { return hidden_states.dim(0); }
  EncoderOutput detach() const;
};

struct AttentionResult {
  ad::Tensor context;  // (d)
  ad::Tensor weights;  // (n)
};

struct DecodeResult {
  /// Mixture over the vocabulary extended with the source's OOV words.
  ad::Tensor probs;
  LstmState state;
  ad::Tensor attention;
  ad::Tensor copy_gate;  // (1), p_gen
};

/// A fact triple in id form.
struct EncodedFact {
  std::vector<TokenId> arg1;
  std::vector<TokenId> relation;
  std::vector<TokenId> arg2;
  bool label = true;
};

/// Encoder E_s, attentional copy decoder D, sentence-summary CNN, fact
/// encoder E_f and fact classifier over one set of parameters. A model built
/// with a Tape registers every parameter as a leaf on it; otherwise all
/// computation is value-only.
class SplitModel {
 public:
  SplitModel(ModelConfig config, const ModelParams& params);
  SplitModel(ModelConfig config, const ModelParams& params, ad::Tape& tape);
  /// Uses the tensors as given (tracked or not), in parameter_layout order.
  SplitModel(ModelConfig config, std::vector<ad::Tensor> parameters);

  const ModelConfig& config() const { return config_; }
  /// Parameters as seen by this model (tape leaves when tracked).
  const std::vector<ad::Tensor>& parameters() const { return params_; }
  /// Same weights, value-only.
  SplitModel detached() const;

  EncoderOutput encode(std::span<const TokenId> source) const;
  AttentionResult attend(const ad::Tensor& query, const EncoderOutput& enc) const;
  DecodeResult decode_step(TokenId prev, const LstmState& state, const EncoderOutput& enc,
                           const SourceText& source) const;

  /// -sum log p(target[t] | target[<t]) for t >= 1; target starts with BOS.
  ad::Tensor target_nll(const EncoderOutput& enc, const SourceText& source,
                        std::span<const TokenId> target) const;
  ad::Tensor sequence_nll(const SourceText& source, std::span<const TokenId> target) const;

  /// h_s*: ReLU CNN + max-pool over the encoder states.
  ad::Tensor summarize(const EncoderOutput& enc) const;
  /// h_f: the same CNN shape over embeddings of arg1 ⊕ relation ⊕ arg2.
  ad::Tensor encode_fact(const EncodedFact& fact) const;
  ad::Tensor fact_logit(const ad::Tensor& summary, const ad::Tensor& fact_vector) const;
  ad::Tensor classify_fact(const ad::Tensor& summary, const ad::Tensor& fact_vector) const;
  /// Binary cross-entropy of the classifier on (sentence, fact).
  ad::Tensor fact_loss(std::span<const TokenId> sentence, const EncodedFact& fact) const;
  double fact_probability(std::span<const TokenId> sentence, const EncodedFact& fact) const;

 private:
  struct Conv {
    ad::Tensor weights;
    ad::Tensor bias;
    std::size_t width;
  };
  ad::Tensor cnn(const ad::Tensor& rows, std::span<const Conv> convs) const;
  void bind();

  ModelConfig config_;
  std::vector<ad::Tensor> params_;

  ad::Tensor embedding_;
  ad::Tensor enc_w_, enc_b_, dec_w_, dec_b_;
  ad::Tensor att_w_;
  ad::Tensor out_w_, out_b_, vocab_w_, vocab_b_;
  ad::Tensor gate_w_, gate_b_;
  std::vector<Conv> summary_convs_, fact_convs_;
  ad::Tensor cls_w1_, cls_b1_, cls_w2_, cls_b2_;
};

/// Flattened gradients of a tracked model's parameters after tape.backward().
std::vector<std::vector<double>> parameter_gradients(const SplitModel& model, const ad::Tape& tape);

}  // namespace splitpit
