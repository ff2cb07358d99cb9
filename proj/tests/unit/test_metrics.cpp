#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "splitpit/error.hpp"
#include "splitpit/metrics.hpp"
#include "splitpit/rng.hpp"

namespace splitpit {
namespace {

/// Independent BLEU-4: n-grams keyed by joined strings, precisions multiplied
/// directly rather than summed in log space.
double oracle_bleu(const Tokens& hyp, const std::vector<Tokens>& refs) {
  if (hyp.empty()) return 0.0;
  auto grams = [](const Tokens& t, std::size_t n) {
    std::unordered_map<std::string, int> out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) {
      std::string key;
      for (std::size_t j = i; j < i + n; ++j) key += t[j] + '\x1f';
      ++out[key];
    }
    return out;
  };
  double product = 1.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = grams(hyp, n);
    int hits = 0, total = 0;
    for (const auto& [g, c] : h) {
      total += c;
      int best = 0;
      for (const auto& r : refs) {
        const auto rg = grams(r, n);
        const auto it = rg.find(g);
        if (it != rg.end()) best = std::max(best, it->second);
      }
      hits += std::min(c, best);
    }
    if (hits == 0 && n == 1) return 0.0;
    product *= hits == 0 ? 1.0 / (total + 1) : static_cast<double>(hits) / total;
  }
  // Closest reference length, shorter on ties.
  const long c = static_cast<long>(hyp.size());
  long r = -1;
  for (const auto& ref : refs) {
    const long len = static_cast<long>(ref.size());
    if (r < 0 || std::labs(len - c) < std::labs(r - c) || (std::labs(len - c) == std::labs(r - c) && len < r)) {
      r = len;
    }
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::pow(product, 0.25);
}

Tokens random_sentence(Rng& rng, std::size_t max_len) {
  static const char* const words[] = {"a", "b", "c", "d", "e", "[SEP]"};
  Tokens t;
  const std::size_t n = 1 + rng.index(max_len);
  for (std::size_t i = 0; i < n; ++i) t.emplace_back(words[rng.index(6)]);
  return t;
}

TEST(SentenceBleu, IdenticalIsOne) {
  const Tokens s{"the", "cat", "sat", "on", "the", "mat"};
  EXPECT_EQ(sentence_bleu(s, std::vector<Tokens>{s}), 1.0);
  EXPECT_EQ(sentence_bleu(s, std::vector<Tokens>{{"x"}, s}), 1.0);
}

TEST(SentenceBleu, NoSharedUnigramIsZero) {
  EXPECT_EQ(sentence_bleu(Tokens{"x", "y", "z"}, std::vector<Tokens>{{"a", "b", "c"}}), 0.0);
  EXPECT_EQ(sentence_bleu(Tokens{}, std::vector<Tokens>{{"a"}}), 0.0);
}

TEST(SentenceBleu, HandCountedExample) {
  // 1-gram 3/3, 2-gram 2/2, 3-gram 1/1, no 4-grams so (0+1)/(0+1); BP = e^(1-4/3).
  const double expect = std::exp(1.0 - 4.0 / 3.0);
  EXPECT_NEAR(sentence_bleu(Tokens{"the", "cat", "sat"}, std::vector<Tokens>{{"the", "cat", "sat", "down"}}), expect,
              1e-15);
}

TEST(SentenceBleu, HandCountedSmoothedExample) {
  // hyp a b c d e vs ref a b x d e: 1-gram 4/5, 2-gram 2/4, 3-gram 0/3 -> 1/4, 4-gram 0/2 -> 1/3.
  const double expect = std::pow(0.8 * 0.5 * 0.25 * (1.0 / 3.0), 0.25);
  EXPECT_NEAR(sentence_bleu(Tokens{"a", "b", "c", "d", "e"}, std::vector<Tokens>{{"a", "b", "x", "d", "e"}}), expect,
              1e-15);
}

TEST(SentenceBleu, ClipsAgainstTheMaxCountOverReferences) {
  // "a" appears at most twice in any one reference, so 2 of 3 unigrams match.
  const Tokens hyp{"a", "a", "a"};
  const std::vector<Tokens> refs{{"a", "a", "b"}, {"a", "c", "c"}};
  EXPECT_NEAR(sentence_bleu(hyp, refs), oracle_bleu(hyp, refs), 1e-15);
}

TEST(SentenceBleu, ZeroReferencesThrows) {
  EXPECT_THROW(sentence_bleu(Tokens{"a"}, std::vector<Tokens>{}), ValidationError);
}

TEST(SentenceBleu, MatchesBruteForceOracle) {
  Rng rng(2019);
  for (int i = 0; i < 50; ++i) {
    const Tokens hyp = random_sentence(rng, 14);
    std::vector<Tokens> refs;
    for (std::size_t r = 0; r < 1 + rng.index(3); ++r) refs.push_back(random_sentence(rng, 14));
    const double got = sentence_bleu(hyp, refs);
    EXPECT_NEAR(got, oracle_bleu(hyp, refs), 1e-12) << i;
    EXPECT_GE(got, 0.0);
    EXPECT_LE(got, 1.0);
  }
}

TEST(SentenceBleu, InvariantUnderTokenRelabeling) {
  Rng rng(7);
  const std::map<std::string, std::string> relabel{{"a", "q"}, {"b", "r"}, {"c", "a"}, {"d", "b"},
                                                   {"e", "s"}, {"[SEP]", "t"}};
  auto apply = [&](const Tokens& t) {
    Tokens out;
    for (const auto& w : t) out.push_back(relabel.at(w));
    return out;
  };
  for (int i = 0; i < 30; ++i) {
    const Tokens hyp = random_sentence(rng, 10);
    const std::vector<Tokens> refs{random_sentence(rng, 10), random_sentence(rng, 10)};
    EXPECT_EQ(sentence_bleu(hyp, refs), sentence_bleu(apply(hyp), std::vector<Tokens>{apply(refs[0]), apply(refs[1])}));
  }
}

TEST(CorpusMetrics, ReferencesAgainstThemselves) {
  const std::vector<std::vector<Tokens>> outputs{{{"a", "b", "."}, {"c", "."}}, {{"d", "e", "f", "."}}};
  const std::vector<std::vector<std::vector<Tokens>>> refs{{outputs[0]}, {outputs[1]}};
  const MetricsReport r = corpus_metrics(outputs, refs);
  EXPECT_EQ(r.bleu, 1.0);
  EXPECT_EQ(r.simples_per_complex, 1.5);
  EXPECT_EQ(r.tokens_per_simple, 3.0);
  EXPECT_EQ(r.size, 2u);
}

TEST(CorpusMetrics, UnsplitOutputsGiveOneSimplePerComplex) {
  const std::vector<std::vector<Tokens>> outputs{{{"a", "b"}}, {{"c"}}, {{"d", "e"}}};
  const std::vector<std::vector<std::vector<Tokens>>> refs{
      {{{"a"}, {"b"}}}, {{{"c"}}}, {{{"d"}, {"e"}}}};
  EXPECT_EQ(corpus_metrics(outputs, refs).simples_per_complex, 1.0);
}

TEST(CorpusMetrics, ReproducesTheReferenceRowMeans) {
  // 10 inputs with 2 simples and 10 with 3: 50 simples, 2.5 per complex.
  // 45 simples of 11 tokens and 5 of 10 tokens: 545 / 50 = 10.9 per simple.
  std::vector<std::vector<Tokens>> refs_flat;
  std::size_t made = 0;
  for (int i = 0; i < 20; ++i) {
    std::vector<Tokens> simples;
    for (int k = 0; k < (i < 10 ? 2 : 3); ++k, ++made) {
      Tokens s;
      const std::size_t len = made < 5 ? 10 : 11;
      for (std::size_t t = 0; t < len; ++t) s.push_back("w" + std::to_string((i * 7 + k * 3 + t) % 13));
      simples.push_back(s);
    }
    refs_flat.push_back(simples);
  }
  std::vector<std::vector<std::vector<Tokens>>> refs;
  for (const auto& r : refs_flat) refs.push_back({r});
  const MetricsReport report = corpus_metrics(refs_flat, refs);
  EXPECT_EQ(report.simples_per_complex, 2.5);
  EXPECT_EQ(report.tokens_per_simple, 10.9);
  EXPECT_EQ(report.bleu, 1.0);
}

TEST(CorpusMetrics, SepTokensAreNotCounted) {
  const std::vector<std::vector<Tokens>> outputs{{{"a", "[SEP]", "b"}}};
  const std::vector<std::vector<std::vector<Tokens>>> refs{{{{"a"}, {"b"}}}};
  EXPECT_EQ(corpus_metrics(outputs, refs).tokens_per_simple, 2.0);
}

TEST(CorpusMetrics, ScoresAgainstEveryReference) {
  const std::vector<std::vector<Tokens>> outputs{{{"b", "."}, {"a", "."}}};
  const std::vector<std::vector<std::vector<Tokens>>> refs{{{{"a", "."}, {"b", "."}}, {{"b", "."}, {"a", "."}}}};
  EXPECT_EQ(corpus_metrics(outputs, refs).bleu, 1.0);
}

TEST(CorpusMetrics, AlignmentMismatchThrows) {
  const std::vector<std::vector<Tokens>> outputs{{{"a"}}};
  const std::vector<std::vector<std::vector<Tokens>>> refs{};
  EXPECT_THROW(corpus_metrics(outputs, refs), ValidationError);
}

TEST(CorpusMetrics, KeyValueLine) {
  MetricsReport r;
  r.bleu = 0.5;
  r.simples_per_complex = 2.0;
  r.tokens_per_simple = 10.25;
  EXPECT_EQ(r.to_key_values(), "bleu=0.5 s_per_c=2 t_per_s=10.25");
}

TEST(SplitHalf, Definition) {
  EXPECT_EQ(baseline_splithalf(Tokens{"a", "b", "c", "d"}), (std::vector<Tokens>{{"a", "b", "."}, {"c", "d"}}));
  EXPECT_EQ(baseline_splithalf(Tokens{"a", "b", "c", "d", "e"}),
            (std::vector<Tokens>{{"a", "b", "c", "."}, {"d", "e"}}));
  EXPECT_EQ(baseline_splithalf(Tokens{"a"}), (std::vector<Tokens>{{"a"}}));
}

TEST(SplitHalf, TwoSimplesPerComplexOnAnyCorpus) {
  Rng rng(3);
  std::vector<std::vector<Tokens>> outputs;
  std::vector<std::vector<std::vector<Tokens>>> refs;
  for (int i = 0; i < 40; ++i) {
    Tokens source = random_sentence(rng, 20);
    source.push_back("z");
    outputs.push_back(baseline_splithalf(source));
    refs.push_back({{source}});
  }
  EXPECT_EQ(corpus_metrics(outputs, refs).simples_per_complex, 2.0);
}

}  // namespace
}  // namespace splitpit
