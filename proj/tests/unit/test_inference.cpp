#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "splitpit/error.hpp"
#include "splitpit/inference.hpp"
#include "splitpit/pit.hpp"
#include "support.hpp"

namespace splitpit {
namespace {

using testing::numbered_vocab;
using testing::random_params;
using testing::random_words;
using testing::read_bytes;
using testing::TempDir;
using testing::tiny_config;
using testing::write_text;

/// Argmax decoding with the lower id winning ties.
Hypothesis greedy(const SplitModel& model, const SourceText& source, std::size_t max_len) {
  const EncoderOutput enc = model.encode(source.ids);
  LstmState state = enc.final_state;
  Hypothesis h;
  TokenId prev = kBos;
  for (std::size_t step = 0; step < max_len; ++step) {
    const DecodeResult out = model.decode_step(prev, state, enc, source);
    std::size_t best = 0;
    for (std::size_t t = 1; t < out.probs.size(); ++t) {
      if (out.probs[t] > out.probs[best]) best = t;
    }
    h.log_prob += std::log(out.probs[best]);
    prev = static_cast<TokenId>(best);
    h.tokens.push_back(prev);
    state = out.state;
    if (prev == kEos) {
      h.finished = true;
      break;
    }
  }
  return h;
}

/// Sum of per-step log-probabilities of a fixed continuation.
double teacher_forced(const SplitModel& model, const SourceText& source, const std::vector<TokenId>& tokens) {
  const EncoderOutput enc = model.encode(source.ids);
  LstmState state = enc.final_state;
  TokenId prev = kBos;
  double total = 0.0;
  for (TokenId t : tokens) {
    const DecodeResult out = model.decode_step(prev, state, enc, source);
    total += std::log(out.probs[static_cast<std::size_t>(t)]);
    state = out.state;
    prev = t;
  }
  return total;
}

class BeamTest : public ::testing::Test {
 protected:
  Vocabulary vocab = numbered_vocab(20);
  ModelConfig config = tiny_config(20);
};

TEST_F(BeamTest, BeamOneIsGreedy) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const SplitModel model(config, random_params(config, 300 + static_cast<std::uint64_t>(i), 0.6));
    const SourceText source = make_source(vocab, random_words(vocab, 1 + rng.index(8), rng));
    const std::size_t max_len = default_max_len(source.size());
    const Hypothesis beam = beam_search(model, source, 1, max_len);
    const Hypothesis ref = greedy(model, source, max_len);
    EXPECT_EQ(beam.tokens, ref.tokens) << i;
    EXPECT_EQ(beam.finished, ref.finished) << i;
    EXPECT_NEAR(beam.log_prob, ref.log_prob, 1e-12) << i;
  }
}

TEST(Beam, SaturatingBeamEqualsExhaustiveSearch) {
  const Vocabulary vocab = numbered_vocab(6);
  const ModelConfig config = tiny_config(6);
  const std::size_t max_len = 4;
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const SplitModel model(config, random_params(config, 40 + static_cast<std::uint64_t>(trial), 1.0));
    const SourceText source = make_source(vocab, Tokens(1 + rng.index(4), "w0"));
    const EncoderOutput enc = model.encode(source.ids);

    // Every sequence that ends in EOS within max_len, or runs to max_len without it.
    Hypothesis best;
    best.log_prob = -INFINITY;
    std::size_t visited = 0;
    std::function<void(std::vector<TokenId>&, LstmState, double)> dfs = [&](std::vector<TokenId>& seq,
                                                                             LstmState state, double score) {
      const bool done = !seq.empty() && seq.back() == kEos;
      if (done || seq.size() == max_len) {
        ++visited;
        if (score > best.log_prob) best = {seq, score, done};
        return;
      }
      const DecodeResult out = model.decode_step(seq.empty() ? kBos : seq.back(), state, enc, source);
      for (std::size_t t = 0; t < source.extended_size(); ++t) {
        seq.push_back(static_cast<TokenId>(t));
        dfs(seq, out.state, score + std::log(out.probs[t]));
        seq.pop_back();
      }
    };
    std::vector<TokenId> seq;
    dfs(seq, enc.final_state, 0.0);
    EXPECT_EQ(visited, 1u + 5u + 25u + 125u + 625u);

    const Hypothesis beam = beam_search(model, source, 1296, max_len);
    EXPECT_EQ(beam.tokens, best.tokens) << trial;
    EXPECT_EQ(beam.finished, best.finished) << trial;
    EXPECT_NEAR(beam.log_prob, best.log_prob, 1e-12) << trial;
  }
}

TEST_F(BeamTest, ScoreEqualsTeacherForcedRecomputation) {
  Rng rng(7);
  for (int i = 0; i < 40; ++i) {
    const SplitModel model(config, random_params(config, 700 + static_cast<std::uint64_t>(i), 0.6));
    const SourceText source = make_source(vocab, random_words(vocab, 1 + rng.index(8), rng));
    for (std::size_t beam : {1u, 4u, 12u}) {
      const Hypothesis h = beam_search(model, source, beam, default_max_len(source.size()));
      EXPECT_NEAR(h.log_prob, teacher_forced(model, source, h.tokens), 1e-10);
      EXPECT_EQ(h.finished, !h.tokens.empty() && h.tokens.back() == kEos);
      if (h.finished) {
        std::vector<TokenId> target{kBos};
        target.insert(target.end(), h.tokens.begin(), h.tokens.end());
        EXPECT_NEAR(-h.log_prob, model.sequence_nll(source, target).item(), 1e-10);
      }
    }
  }
}

TEST_F(BeamTest, WiderBeamScoresAtLeastAsWell) {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const SplitModel model(config, random_params(config, 900 + static_cast<std::uint64_t>(i), 0.6));
    const SourceText source = make_source(vocab, random_words(vocab, 1 + rng.index(8), rng));
    const std::size_t max_len = default_max_len(source.size());
    EXPECT_GE(beam_search(model, source, 12, max_len).log_prob, beam_search(model, source, 1, max_len).log_prob)
        << i;
  }
}

TEST_F(BeamTest, Deterministic) {
  const SplitModel model(config, random_params(config, 1, 0.6));
  const SourceText source = make_source(vocab, Tokens{"w1", "w2", "w3", "w4"});
  const Hypothesis a = beam_search(model, source, 12, 20);
  const Hypothesis b = beam_search(model, source, 12, 20);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.log_prob, b.log_prob);
}

TEST_F(BeamTest, TruncationAtMaxLenIsFlagged) {
  // Forbid EOS by pushing its output bias far down.
  ModelParams params = random_params(config, 2, 0.3);
  std::vector<double> bias(params.get("vocab.b").data().begin(), params.get("vocab.b").data().end());
  bias[kEos] = -50.0;
  params.set("vocab.b", ad::Tensor({bias.size()}, bias));
  ModelConfig c = config;
  c.copy_gate_override = 1.0;
  const SplitModel model(c, params);
  const Hypothesis h = beam_search(model, make_source(vocab, Tokens{"w1"}), 3, 5);
  EXPECT_FALSE(h.finished);
  EXPECT_EQ(h.tokens.size(), 5u);
}

TEST_F(BeamTest, InvalidArguments) {
  const SplitModel model(config, random_params(config, 3));
  const SourceText source = make_source(vocab, Tokens{"w1"});
  EXPECT_THROW(beam_search(model, make_source(vocab, Tokens{}), 4, 10), ValidationError);
  EXPECT_THROW(beam_search(model, source, 0, 10), ValidationError);
  EXPECT_THROW(beam_search(model, source, 4, 0), ValidationError);
}

TEST(Beam, DefaultMaxLen) {
  EXPECT_EQ(default_max_len(1), 12u);
  EXPECT_EQ(default_max_len(4), 20u);
  EXPECT_EQ(default_max_len(5), 22u);
}

TEST(SplitOutput, Definition) {
  EXPECT_EQ(split_output(Tokens{"a", "b", "[SEP]", "c"}), (std::vector<Tokens>{{"a", "b"}, {"c"}}));
  EXPECT_EQ(split_output(Tokens{"a", "b"}), (std::vector<Tokens>{{"a", "b"}}));
  EXPECT_TRUE(split_output(Tokens{"[SEP]", "[SEP]"}).empty());
  EXPECT_EQ(split_output(Tokens{"[SEP]", "a", "[SEP]", "[SEP]", "b", "[SEP]"}), (std::vector<Tokens>{{"a"}, {"b"}}));
  EXPECT_EQ(split_output(std::vector<TokenId>{7, kSep, 8, 9}), (std::vector<std::vector<TokenId>>{{7}, {8, 9}}));
}

TEST(SplitOutput, ThreeSentenceExample) {
  const Tokens out = tokenize(
      "He was a member of the European Convention . [SEP] European Convention drafted the European "
      "Constitution . [SEP] The European Constitution never entered into force .");
  EXPECT_EQ(split_output(out).size(), 3u);
}

TEST(SplitOutput, InvertsAssembleTarget) {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    std::vector<std::vector<TokenId>> simples(1 + rng.index(5));
    for (auto& s : simples) {
      for (std::size_t t = 0; t < 1 + rng.index(4); ++t) s.push_back(static_cast<TokenId>(5 + rng.index(10)));
    }
    Ordering identity(simples.size());
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    EXPECT_EQ(split_output(assemble_target(simples, identity)), simples);
  }
}

TEST(OrderFreeReferences, AllOrderingsUpToTheCap) {
  const ComplexSimplePair pair{{"x"}, {{"a"}, {"b"}, {"c"}}};
  const auto refs = order_free_references(pair, 6);
  EXPECT_EQ(refs.size(), 6u);
  EXPECT_EQ(refs[0], pair.simples);
  EXPECT_EQ(order_free_references(pair, 2).size(), 1u);
}

class SplitFileTest : public ::testing::Test {
 protected:
  Vocabulary vocab = numbered_vocab(20);
  ModelConfig config = tiny_config(20);
  SplitModel model{config, random_params(config, 5, 0.6)};
  TempDir dir;
};

TEST_F(SplitFileTest, EmptyInputGivesEmptyOutput) {
  write_text(dir.file("in.txt"), "");
  EXPECT_EQ(split_file(model, vocab, dir.file("in.txt"), dir.file("out.txt"), 4), 0u);
  EXPECT_EQ(read_bytes(dir.file("out.txt")), "");
}

TEST_F(SplitFileTest, OneOutputLinePerInputLine) {
  write_text(dir.file("in.txt"), "w1 w2 w3\nw4 unknownword w5\nw6\n");
  EXPECT_EQ(split_file(model, vocab, dir.file("in.txt"), dir.file("out.txt"), 3), 3u);
  const std::string text = read_bytes(dir.file("out.txt"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  // Line i matches a direct split of input line i.
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  const auto direct = split_sentence(model, vocab, Tokens{"w1", "w2", "w3"}, 3);
  std::string joined;
  for (std::size_t i = 0; i < direct.size(); ++i) joined += (i ? " [SEP] " : "") + join(direct[i]);
  EXPECT_EQ(line, joined);
}

TEST_F(SplitFileTest, MissingInputIsAnIoError) {
  EXPECT_THROW(split_file(model, vocab, dir.file("none.txt"), dir.file("out.txt"), 3), IoError);
}

TEST_F(SplitFileTest, BlankLineIsAFormatError) {
  write_text(dir.file("in.txt"), "w1\n\nw2\n");
  try {
    split_file(model, vocab, dir.file("in.txt"), dir.file("out.txt"), 3);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Evaluate, AgreesWithCorpusMetrics) {
  const Vocabulary vocab = numbered_vocab(20);
  const ModelConfig config = tiny_config(20);
  const SplitModel model(config, random_params(config, 6, 0.6));
  const std::vector<ComplexSimplePair> pairs{{{"w1", "w2"}, {{"w1"}, {"w2"}}}, {{"w3"}, {{"w3"}}}};
  const EvalResult r = evaluate(model, vocab, pairs, 2);
  ASSERT_EQ(r.outputs.size(), 2u);
  std::vector<std::vector<std::vector<Tokens>>> refs;
  for (const auto& p : pairs) refs.push_back(order_free_references(p, 6));
  const MetricsReport expect = corpus_metrics(r.outputs, refs);
  EXPECT_EQ(r.report.bleu, expect.bleu);
  EXPECT_EQ(r.report.simples_per_complex, expect.simples_per_complex);
  double exact = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto a = r.outputs[i];
    auto b = pairs[i].simples;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    exact += a == b;
  }
  EXPECT_EQ(r.exact_match, exact / 2.0);
}

}  // namespace
}  // namespace splitpit
