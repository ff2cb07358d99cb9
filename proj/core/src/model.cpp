#include "splitpit/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "splitpit/error.hpp"

namespace splitpit {

using ad::Shape;
using ad::Tensor;

void ModelConfig::validate() const {
  if (vocab_size <= kReservedTokens) throw ValidationError("model: vocabulary has no regular tokens");
  if (embed == 0 || hidden == 0 || filters == 0) throw ValidationError("model: sizes must be positive");
  if (filter_widths.empty()) throw ValidationError("model: at least one filter width required");
  for (std::size_t w : filter_widths) {
    if (w == 0) throw ValidationError("model: filter widths must be positive");
  }
  if (max_source_len == 0) throw ValidationError("model: max_source_len must be positive");
  if (copy_gate_override && (*copy_gate_override < 0.0 || *copy_gate_override > 1.0)) {
    throw ValidationError("model: copy gate override must lie in [0,1]");
  }
}

std::size_t ModelConfig::max_filter_width() const {
  return *std::max_element(filter_widths.begin(), filter_widths.end());
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& c) {
  const std::size_t e = c.embed, d = c.hidden, v = c.vocab_size, f = c.filters;
  std::vector<std::pair<std::string, Shape>> layout = {
      {"embedding", {v, e}},
      {"encoder.w", {e + d, 4 * d}},
      {"encoder.b", {4 * d}},
      {"decoder.w", {e + d, 4 * d}},
      {"decoder.b", {4 * d}},
      {"attention.w", {d, d}},
      {"output.w", {2 * d, d}},
      {"output.b", {d}},
      {"vocab.w", {d, v}},
      {"vocab.b", {v}},
      {"copy_gate.w", {2 * d + e, 1}},
      {"copy_gate.b", {1}},
  };
  for (std::size_t w : c.filter_widths) {
    layout.push_back({"summary.conv" + std::to_string(w) + ".w", {w * d, f}});
    layout.push_back({"summary.conv" + std::to_string(w) + ".b", {f}});
  }
  for (std::size_t w : c.filter_widths) {
    layout.push_back({"fact.conv" + std::to_string(w) + ".w", {w * e, f}});
    layout.push_back({"fact.conv" + std::to_string(w) + ".b", {f}});
  }
  const std::size_t ch = c.classifier_width();
  layout.push_back({"classifier.w1", {2 * c.summary_size(), ch}});
  layout.push_back({"classifier.b1", {ch}});
  layout.push_back({"classifier.w2", {ch, 1}});
  layout.push_back({"classifier.b2", {1}});
  return layout;
}

// ---------------------------------------------------------------------------
// ModelParams

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams p;
  for (auto& [name, shape] : parameter_layout(config)) {
    std::vector<double> values(ad::numel(shape), 0.0);
    if (shape.size() == 2) {
      const double limit = name == "embedding" ? std::sqrt(3.0)
                                               : std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      for (double& x : values) x = rng.uniform(-limit, limit);
    }
    p.names_.push_back(name);
    p.values_.emplace_back(shape, std::move(values));
  }
  return p;
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  for (auto& [name, shape] : parameter_layout(config)) {
    p.names_.push_back(name);
    p.values_.push_back(Tensor::zeros(shape));
  }
  return p;
}

std::size_t ModelParams::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw ValidationError("unknown parameter '" + std::string(name) + "'");
}

const Tensor& ModelParams::get(std::string_view name) const { return values_[index_of(name)]; }

std::size_t ModelParams::total_values() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

void ModelParams::set(std::size_t i, Tensor value) {
  if (value.shape() != values_.at(i).shape()) {
    throw ShapeError("parameter " + names_[i] + ": shape " + ad::to_string(value.shape()) +
                     " does not match " + ad::to_string(values_[i].shape()));
  }
  values_[i] = value.detach();
}

bool ModelParams::operator==(const ModelParams& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const auto a = values_[i].data();
    const auto b = other.values_[i].data();
    if (values_[i].shape() != other.values_[i].shape()) return false;
    if (std::memcmp(a.data(), b.data(), a.size_bytes()) != 0) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

LstmState lstm_step(const Tensor& weights, const Tensor& bias, const Tensor& x, const LstmState& state) {
  const std::size_t d = state.h.size();
  if (state.c.size() != d || weights.rank() != 2 || weights.dim(1) != 4 * d ||
      weights.dim(0) != x.size() + d || bias.size() != 4 * d) {
    throw ShapeError("lstm_step: weights " + ad::to_string(weights.shape()) + " do not fit x " +
                     ad::to_string(x.shape()) + " and state " + ad::to_string(state.h.shape()));
  }
  const Tensor gates = ad::add(ad::matmul(ad::concat({x, state.h}), weights), bias);
  const Tensor i = ad::sigmoid(ad::slice(gates, 0, d));
  const Tensor f = ad::sigmoid(ad::slice(gates, d, 2 * d));
  const Tensor g = ad::tanh(ad::slice(gates, 2 * d, 3 * d));
  const Tensor o = ad::sigmoid(ad::slice(gates, 3 * d, 4 * d));
  const Tensor c = ad::add(ad::mul(f, state.c), ad::mul(i, g));
  return {ad::mul(o, ad::tanh(c)), c};
}

EncoderOutput EncoderOutput::detach() const {
  return {hidden_states.detach(), {final_state.h.detach(), final_state.c.detach()}};
}

// ---------------------------------------------------------------------------
// SplitModel

SplitModel::SplitModel(ModelConfig config, const ModelParams& params) : config_(std::move(config)) {
  config_.validate();
  params_ = params.values();
  bind();
}

SplitModel::SplitModel(ModelConfig config, const ModelParams& params, ad::Tape& tape)
    : config_(std::move(config)) {
  config_.validate();
  params_.reserve(params.size());
  for (const Tensor& v : params.values()) params_.push_back(tape.leaf(v));
  bind();
}

SplitModel::SplitModel(ModelConfig config, std::vector<Tensor> parameters)
    : config_(std::move(config)), params_(std::move(parameters)) {
  config_.validate();
  bind();
}

void SplitModel::bind() {
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw ShapeError("model: expected " + std::to_string(layout.size()) + " parameters, got " +
                     std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].second != params_[i].shape()) {
      throw ShapeError("model: parameter " + layout[i].first + " has shape " +
                       ad::to_string(params_[i].shape()) + ", expected " +
                       ad::to_string(layout[i].second));
    }
  }
  std::size_t k = 0;
  embedding_ = params_[k++];
  enc_w_ = params_[k++];
  enc_b_ = params_[k++];
  dec_w_ = params_[k++];
  dec_b_ = params_[k++];
  att_w_ = params_[k++];
  out_w_ = params_[k++];
  out_b_ = params_[k++];
  vocab_w_ = params_[k++];
  vocab_b_ = params_[k++];
  gate_w_ = params_[k++];
  gate_b_ = params_[k++];
  summary_convs_.clear();
  fact_convs_.clear();
  for (std::size_t w : config_.filter_widths) {
    summary_convs_.push_back({params_[k], params_[k + 1], w});
    k += 2;
  }
  for (std::size_t w : config_.filter_widths) {
    fact_convs_.push_back({params_[k], params_[k + 1], w});
    k += 2;
  }
  cls_w1_ = params_[k++];
  cls_b1_ = params_[k++];
  cls_w2_ = params_[k++];
  cls_b2_ = params_[k++];
}

SplitModel SplitModel::detached() const {
  SplitModel copy = *this;
  for (Tensor& p : copy.params_) p = p.detach();
  copy.bind();
  return copy;
}

EncoderOutput SplitModel::encode(std::span<const TokenId> source) const {
  if (source.empty()) throw ValidationError("encode: empty source sentence");
  if (source.size() > config_.max_source_len) {
    throw ValidationError("encode: source length " + std::to_string(source.size()) +
                          " exceeds maximum " + std::to_string(config_.max_source_len));
  }
  const Tensor embedded = ad::embedding(embedding_, source);
  LstmState state{Tensor::zeros({config_.hidden}), Tensor::zeros({config_.hidden})};
  std::vector<Tensor> rows;
  rows.reserve(source.size());
  for (std::size_t t = 0; t < source.size(); ++t) {
    const Tensor x = ad::reshape(ad::slice(embedded, t, t + 1), {config_.embed});
    state = lstm_step(enc_w_, enc_b_, x, state);
    rows.push_back(ad::reshape(state.h, {1, config_.hidden}));
  }
  return {ad::concat(rows), state};
}

AttentionResult SplitModel::attend(const Tensor& query, const EncoderOutput& enc) const {
  // score_i = h_i^T W q
  const Tensor projected = ad::matmul(att_w_, query);
  const Tensor weights = ad::softmax(ad::matmul(enc.hidden_states, projected));
  return {ad::matmul(weights, enc.hidden_states), weights};
}

DecodeResult SplitModel::decode_step(TokenId prev, const LstmState& state, const EncoderOutput& enc,
                                     const SourceText& source) const {
  const std::size_t vocab = config_.vocab_size;
  if (source.vocab_size != vocab || source.copy_ids.size() != enc.length()) {
    throw ValidationError("decode_step: source does not match the encoder output or vocabulary");
  }
  if (prev < 0 || static_cast<std::size_t>(prev) >= source.extended_size()) {
    throw ValidationError("decode_step: unknown previous token id " + std::to_string(prev));
  }
  const TokenId input_id = static_cast<std::size_t>(prev) < vocab ? prev : kUnk;
  const Tensor x = ad::reshape(ad::embedding(embedding_, std::span<const TokenId>(&input_id, 1)),
                               {config_.embed});
  LstmState next = lstm_step(dec_w_, dec_b_, x, state);
  AttentionResult att = attend(next.h, enc);

  const Tensor features = ad::concat({next.h, att.context});
  const Tensor hidden = ad::tanh(ad::add(ad::matmul(features, out_w_), out_b_));
  const Tensor p_vocab = ad::softmax(ad::add(ad::matmul(hidden, vocab_w_), vocab_b_));

  Tensor gate;
  if (config_.copy_gate_override) {
    gate = Tensor::scalar(*config_.copy_gate_override);
  } else {
    gate = ad::sigmoid(ad::add(ad::matmul(ad::concat({next.h, att.context, x}), gate_w_), gate_b_));
  }

  const std::size_t extended = source.extended_size();
  Tensor generated = p_vocab;
  if (extended > vocab) generated = ad::concat({p_vocab, Tensor::zeros({extended - vocab})});
  const Tensor copied = ad::scatter_add(att.weights, source.copy_ids, extended);
  const Tensor probs = ad::add(ad::mul(gate, generated),
                               ad::mul(ad::sub(Tensor::scalar(1.0), gate), copied));
  return {probs, std::move(next), att.weights, gate};
}

Tensor SplitModel::target_nll(const EncoderOutput& enc, const SourceText& source,
                              std::span<const TokenId> target) const {
  if (target.size() < 2) throw ValidationError("target_nll: target needs BOS and at least one token");
  if (target.front() != kBos) throw ValidationError("target_nll: target must start with BOS");
  LstmState state = enc.final_state;
  std::vector<Tensor> picked;
  picked.reserve(target.size() - 1);
  for (std::size_t t = 1; t < target.size(); ++t) {
    DecodeResult step = decode_step(target[t - 1], state, enc, source);
    const auto next = static_cast<std::size_t>(target[t]);
    if (target[t] < 0 || next >= step.probs.size()) {
      throw ValidationError("target_nll: target id " + std::to_string(target[t]) + " out of range");
    }
    picked.push_back(ad::slice(step.probs, next, next + 1));
    state = std::move(step.state);
  }
  return ad::scale(ad::sum(ad::log(ad::concat(picked))), -1.0);
}

Tensor SplitModel::sequence_nll(const SourceText& source, std::span<const TokenId> target) const {
  if (target.empty()) throw ValidationError("sequence_nll: empty target");
  return target_nll(encode(source.ids), source, target);
}

Tensor SplitModel::cnn(const Tensor& rows, std::span<const Conv> convs) const {
  Tensor input = rows;
  const std::size_t need = config_.max_filter_width();
  if (rows.dim(0) < need) {
    input = ad::concat({rows, Tensor::zeros({need - rows.dim(0), rows.dim(1)})});
  }
  std::vector<Tensor> pooled;
  pooled.reserve(convs.size());
  for (const Conv& conv : convs) {
    pooled.push_back(ad::max_pool_time(ad::relu(ad::conv1d(input, conv.weights, conv.bias, conv.width))));
  }
  return ad::concat(pooled);
}

Tensor SplitModel::summarize(const EncoderOutput& enc) const {
  return cnn(enc.hidden_states, summary_convs_);
}

Tensor SplitModel::encode_fact(const EncodedFact& fact) const {
  if (fact.arg1.empty() || fact.relation.empty() || fact.arg2.empty()) {
    throw ValidationError("encode_fact: fact fields must be non-empty");
  }
  std::vector<TokenId> ids;
  ids.reserve(fact.arg1.size() + fact.relation.size() + fact.arg2.size());
  ids.insert(ids.end(), fact.arg1.begin(), fact.arg1.end());
  ids.insert(ids.end(), fact.relation.begin(), fact.relation.end());
  ids.insert(ids.end(), fact.arg2.begin(), fact.arg2.end());
  return cnn(ad::embedding(embedding_, ids), fact_convs_);
}

Tensor SplitModel::fact_logit(const Tensor& summary, const Tensor& fact_vector) const {
  const std::size_t n = config_.summary_size();
  if (summary.size() != n || fact_vector.size() != n) {
    throw ShapeError("classify_fact: expected two vectors of length " + std::to_string(n) + ", got " +
                     ad::to_string(summary.shape()) + " and " + ad::to_string(fact_vector.shape()));
  }
  const Tensor joint = ad::concat({summary, fact_vector});
  const Tensor hidden = ad::tanh(ad::add(ad::matmul(joint, cls_w1_), cls_b1_));
  return ad::add(ad::matmul(hidden, cls_w2_), cls_b2_);
}

Tensor SplitModel::classify_fact(const Tensor& summary, const Tensor& fact_vector) const {
  return ad::sigmoid(fact_logit(summary, fact_vector));
}

Tensor SplitModel::fact_loss(std::span<const TokenId> sentence, const EncodedFact& fact) const {
  const Tensor logit = fact_logit(summarize(encode(sentence)), encode_fact(fact));
  // log p = log_softmax([0, z])[1], log(1-p) = log_softmax([0, z])[0]
  const Tensor log_probs = ad::log_softmax(ad::concat({Tensor::scalar(0.0), logit}));
  const std::size_t k = fact.label ? 1 : 0;
  return ad::scale(ad::slice(log_probs, k, k + 1), -1.0);
}

double SplitModel::fact_probability(std::span<const TokenId> sentence, const EncodedFact& fact) const {
  return classify_fact(summarize(encode(sentence)), encode_fact(fact)).item();
}

std::vector<std::vector<double>> parameter_gradients(const SplitModel& model, const ad::Tape& tape) {
  std::vector<std::vector<double>> grads;
  grads.reserve(model.parameters().size());
  for (const Tensor& p : model.parameters()) grads.push_back(tape.grad(p));
  return grads;
}

}  // namespace splitpit
