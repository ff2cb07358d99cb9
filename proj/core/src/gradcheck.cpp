#include "splitpit/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "splitpit/autodiff.hpp"
#include "splitpit/error.hpp"
#include "splitpit/model.hpp"
#include "splitpit/pit.hpp"
#include "splitpit/rng.hpp"
#include "splitpit/trainer.hpp"

namespace splitpit {

using ad::Tensor;

void GradCheckConfig::validate() const {
  if (hidden == 0 || embed == 0 || filters == 0) throw ValidationError("gradcheck: sizes must be positive");
  if (vocab < kReservedTokens + 4) {
    throw ValidationError("gradcheck.vocab must be at least " + std::to_string(kReservedTokens + 4));
  }
  if (!(eps > 0.0) || !(eps < 1e-2)) throw ValidationError("gradcheck.eps must lie in (0, 0.01)");
}

namespace {

Tensor random_tensor(Rng& rng, ad::Shape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(ad::numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

/// Entries bounded away from zero so relu stays differentiable under probing.
Tensor away_from_zero(Rng& rng, ad::Shape shape) {
  std::vector<double> v(ad::numel(shape));
  for (double& x : v) x = (rng.coin() ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

/// sum(out * w) for a fixed random w, so every output entry carries gradient.
Tensor project(const Tensor& out, const Tensor& w) { return ad::sum(ad::mul(out, w)); }

class Suite {
 public:
  explicit Suite(const GradCheckConfig& config) : config_(config), rng_(Rng::derive(config.seed, "gradcheck")) {}

  void op(const std::string& name, std::vector<Tensor> inputs, const std::function<Tensor(std::span<const Tensor>)>& fn) {
    const Tensor probe_out = fn(inputs);
    const Tensor w = random_tensor(rng_, probe_out.shape());
    auto f = [&](std::span<const Tensor> p) { return project(fn(p), w); };
    results_.push_back({name, ad::grad_check(f, inputs, config_.eps)});
  }

  void scalar(const std::string& name, std::vector<Tensor> inputs, const ad::ScalarFn& fn) {
    results_.push_back({name, ad::grad_check(fn, inputs, config_.eps)});
  }

  Rng& rng() { return rng_; }
  std::vector<GradCheckResult> take() { return std::move(results_); }

 private:
  GradCheckConfig config_;
  Rng rng_;
  std::vector<GradCheckResult> results_;
};

void op_kinds(Suite& s) {
  Rng& r = s.rng();
  s.op("matmul(m,k)x(k,n)", {random_tensor(r, {3, 4}), random_tensor(r, {4, 2})},
       [](auto p) { return ad::matmul(p[0], p[1]); });
  s.op("matmul(k)x(k,n)", {random_tensor(r, {4}), random_tensor(r, {4, 3})},
       [](auto p) { return ad::matmul(p[0], p[1]); });
  s.op("matmul(m,k)x(k)", {random_tensor(r, {3, 4}), random_tensor(r, {4})},
       [](auto p) { return ad::matmul(p[0], p[1]); });
  s.op("matmul(k)x(k)", {random_tensor(r, {5}), random_tensor(r, {5})}, [](auto p) { return ad::matmul(p[0], p[1]); });
  s.op("add", {random_tensor(r, {2, 3}), random_tensor(r, {2, 3})}, [](auto p) { return ad::add(p[0], p[1]); });
  s.op("add[1]", {random_tensor(r, {4}), random_tensor(r, {1})}, [](auto p) { return ad::add(p[0], p[1]); });
  s.op("sub", {random_tensor(r, {2, 3}), random_tensor(r, {2, 3})}, [](auto p) { return ad::sub(p[0], p[1]); });
  s.op("sub[1]", {random_tensor(r, {1}), random_tensor(r, {4})}, [](auto p) { return ad::sub(p[0], p[1]); });
  s.op("mul", {random_tensor(r, {2, 3}), random_tensor(r, {2, 3})}, [](auto p) { return ad::mul(p[0], p[1]); });
  s.op("mul[1]", {random_tensor(r, {1}), random_tensor(r, {3, 2})}, [](auto p) { return ad::mul(p[0], p[1]); });
  s.op("scale", {random_tensor(r, {3, 2})}, [](auto p) { return ad::scale(p[0], -1.7); });
  s.op("concat", {random_tensor(r, {2, 3}), random_tensor(r, {1, 3}), random_tensor(r, {3, 3})},
       [](auto p) { return ad::concat(p); });
  s.op("slice", {random_tensor(r, {5, 2})}, [](auto p) { return ad::slice(p[0], 1, 4); });
  s.op("reshape", {random_tensor(r, {2, 3})}, [](auto p) { return ad::reshape(p[0], {3, 2}); });
  s.op("sigmoid", {random_tensor(r, {2, 3}, -4.0, 4.0)}, [](auto p) { return ad::sigmoid(p[0]); });
  s.op("tanh", {random_tensor(r, {2, 3}, -2.0, 2.0)}, [](auto p) { return ad::tanh(p[0]); });
  s.op("relu", {away_from_zero(r, {2, 4})}, [](auto p) { return ad::relu(p[0]); });
  s.op("log", {random_tensor(r, {5}, 0.5, 2.0)}, [](auto p) { return ad::log(p[0]); });
  s.op("softmax(n)", {random_tensor(r, {5}, -2.0, 2.0)}, [](auto p) { return ad::softmax(p[0]); });
  s.op("softmax(m,n)", {random_tensor(r, {3, 4}, -2.0, 2.0)}, [](auto p) { return ad::softmax(p[0]); });
  s.op("log_softmax(n)", {random_tensor(r, {5}, -2.0, 2.0)}, [](auto p) { return ad::log_softmax(p[0]); });
  s.op("log_softmax(m,n)", {random_tensor(r, {3, 4}, -2.0, 2.0)}, [](auto p) { return ad::log_softmax(p[0]); });
  const std::vector<int> ids{2, 0, 2, 4};
  s.op("embedding", {random_tensor(r, {5, 3})}, [ids](auto p) { return ad::embedding(p[0], ids); });
  s.op("conv1d", {random_tensor(r, {6, 2}), random_tensor(r, {3 * 2, 4}), random_tensor(r, {4})},
       [](auto p) { return ad::conv1d(p[0], p[1], p[2], 3); });
  // A permutation of well-separated values: no ties under probing.
  {
    std::vector<double> v(12);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * static_cast<double>(i);
    r.shuffle(std::span(v));
    s.op("max_pool_time", {Tensor({4, 3}, v)}, [](auto p) { return ad::max_pool_time(p[0]); });
  }
  const std::vector<int> targets{1, 3, 1, 0};
  s.op("scatter_add", {random_tensor(r, {4})}, [targets](auto p) { return ad::scatter_add(p[0], targets, 5); });
  s.op("sum", {random_tensor(r, {2, 3})}, [](auto p) { return ad::sum(p[0]); });
  s.op("mean", {random_tensor(r, {2, 3})}, [](auto p) { return ad::mean(p[0]); });
}

void model_parts(Suite& s, const GradCheckConfig& config) {
  Rng& r = s.rng();
  ModelConfig mc;
  mc.vocab_size = config.vocab;
  mc.hidden = config.hidden;
  mc.embed = config.embed;
  mc.filters = config.filters;
  // Larger than the training init so that gradients are far from zero.
  std::vector<Tensor> params;
  for (const auto& [name, shape] : parameter_layout(mc)) params.push_back(random_tensor(r, shape, -0.5, 0.5));
  const std::size_t d = config.hidden;
  const std::size_t e = config.embed;

  s.op("lstm_step",
       {random_tensor(r, {e + d, 4 * d}, -0.5, 0.5), random_tensor(r, {4 * d}), random_tensor(r, {e}),
        random_tensor(r, {d}), random_tensor(r, {d})},
       [](auto p) {
         const LstmState next = lstm_step(p[0], p[1], p[2], LstmState{p[3], p[4]});
         return ad::concat({next.h, next.c});
       });

  // Words 5.. are in vocabulary; "zz" is out of vocabulary and exercises copy.
  Tokens words;
  for (std::size_t i = kReservedTokens; i < config.vocab; ++i) words.push_back("w" + std::to_string(i));
  const Vocabulary vocab = Vocabulary::from_words(words);
  const Tokens source_words{"w5", "w7", "zz", "w6", "w9"};
  const SourceText source = make_source(vocab, source_words);
  const std::vector<TokenId> simple_a = encode_target(vocab, source, Tokens{"w5", "w7", "zz"});
  const std::vector<TokenId> simple_b = encode_target(vocab, source, Tokens{"w6", "w9", "w8"});

  s.scalar("decode_step", params, [&](std::span<const Tensor> p) {
    const SplitModel m(mc, std::vector<Tensor>(p.begin(), p.end()));
    const EncoderOutput enc = m.encode(source.ids);
    const DecodeResult out = m.decode_step(kBos, enc.final_state, enc, source);
    const std::vector<int> picks{source.copy_ids[2], source.copy_ids[0]};
    return ad::sum(ad::log(ad::concat({ad::slice(out.probs, static_cast<std::size_t>(picks[0]), picks[0] + 1),
                                       ad::slice(out.probs, static_cast<std::size_t>(picks[1]), picks[1] + 1)})));
  });

  const std::vector<TokenId> target = with_boundaries(simple_a);
  s.scalar("target_nll", params, [&](std::span<const Tensor> p) {
    const SplitModel m(mc, std::vector<Tensor>(p.begin(), p.end()));
    return m.sequence_nll(source, target);
  });

  const EncodedFact fact{vocab.encode(Tokens{"w5"}), vocab.encode(Tokens{"w7", "w8"}), vocab.encode(Tokens{"w6"}), true};
  s.scalar("fact_loss", params, [&](std::span<const Tensor> p) {
    const SplitModel m(mc, std::vector<Tensor>(p.begin(), p.end()));
    return m.fact_loss(source.ids, fact);
  });

  const std::vector<EncodedPair> pairs{EncodedPair{source, {simple_a, simple_b}}};
  std::vector<EncodedFactExample> facts{{source.ids, fact}, {source.ids, fact}};
  facts[1].fact.relation = vocab.encode(Tokens{"w9"});
  facts[1].fact.label = false;
  const Batch batch{{0}, {0, 1}};
  s.scalar("pit_loss(min,K=2)", params, [&](std::span<const Tensor> p) {
    const SplitModel m(mc, std::vector<Tensor>(p.begin(), p.end()));
    Rng unused(0);
    return pit_loss(m, pairs[0], PitConfig{}, unused).loss;
  });
  s.scalar("multitask_loss(lambda=0.5,K=2)", params, [&](std::span<const Tensor> p) {
    const SplitModel m(mc, std::vector<Tensor>(p.begin(), p.end()));
    Rng unused(0);
    return multitask_loss(m, pairs, facts, batch, 0.5, PitConfig{}, unused).total;
  });
}

}  // namespace

std::vector<GradCheckResult> run_gradient_checks(const GradCheckConfig& config) {
  config.validate();
  Suite suite(config);
  op_kinds(suite);
  model_parts(suite, config);
  return suite.take();
}

}  // namespace splitpit
