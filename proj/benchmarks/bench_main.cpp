#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "splitpit/autodiff.hpp"
#include "splitpit/inference.hpp"
#include "splitpit/metrics.hpp"
#include "splitpit/model.hpp"
#include "splitpit/pit.hpp"
#include "splitpit/rng.hpp"
#include "splitpit/vocab.hpp"

namespace {

using namespace splitpit;

ad::Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> values(rows * cols);
  for (double& v : values) v = rng.uniform(-1.0, 1.0);
  return ad::Tensor::matrix(rows, cols, std::move(values));
}

/// Vocabulary of the reserved tokens plus w0..w{n-1}, with a model sized to it.
struct Setup {
  Vocabulary vocab;
  ModelConfig config;
  ModelParams params;
  SourceText source;

  explicit Setup(std::size_t hidden, std::size_t source_len = 20) {
    std::vector<std::string> words;
    for (int i = 0; i < 200; ++i) words.push_back("w" + std::to_string(i));
    vocab = Vocabulary::from_words(words);
    config.vocab_size = vocab.size();
    config.hidden = hidden;
    config.embed = hidden / 2;
    Rng rng(1);
    params = ModelParams::init(config, rng);
    Tokens sentence;
    for (std::size_t i = 0; i < source_len; ++i) sentence.push_back(words[rng.index(words.size())]);
    source = make_source(vocab, sentence);
  }
};

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const ad::Tensor a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(ad::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  const ad::Tensor a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) {
    ad::Tape tape;
    const ad::Tensor loss = ad::sum(ad::matmul(tape.leaf(a), tape.leaf(b)));
    tape.backward(loss);
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64);

void BM_DecodeStep(benchmark::State& state) {
  const Setup s(static_cast<std::size_t>(state.range(0)));
  const SplitModel model(s.config, s.params);
  const EncoderOutput enc = model.encode(s.source.ids);
  for (auto _ : state) benchmark::DoNotOptimize(model.decode_step(kBos, enc.final_state, enc, s.source));
}
BENCHMARK(BM_DecodeStep)->Arg(64)->Arg(128);

void BM_SequenceNllWithBackward(benchmark::State& state) {
  const Setup s(64);
  Rng rng(5);
  std::vector<TokenId> target{kBos};
  for (int i = 0; i < 20; ++i) target.push_back(static_cast<TokenId>(kReservedTokens + rng.index(200)));
  target.push_back(kEos);
  for (auto _ : state) {
    ad::Tape tape;
    const SplitModel model(s.config, s.params, tape);
    tape.backward(model.sequence_nll(s.source, target));
  }
}
BENCHMARK(BM_SequenceNllWithBackward)->Unit(benchmark::kMillisecond);

void BM_BeamSearch(benchmark::State& state) {
  const Setup s(64);
  const SplitModel model(s.config, s.params);
  const auto beam = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(beam_search(model, s.source, beam, 30));
}
BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(4)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_SentenceBleu(benchmark::State& state) {
  Rng rng(6);
  auto sentence = [&] {
    Tokens t;
    for (int i = 0; i < 30; ++i) t.push_back("w" + std::to_string(rng.index(40)));
    return t;
  };
  const Tokens hyp = sentence();
  std::vector<Tokens> refs;
  for (std::int64_t i = 0; i < state.range(0); ++i) refs.push_back(sentence());
  for (auto _ : state) benchmark::DoNotOptimize(sentence_bleu(hyp, refs));
}
BENCHMARK(BM_SentenceBleu)->Arg(1)->Arg(6);

}  // namespace
BENCHMARK_MAIN();
