#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "splitpit/vocab.hpp"

namespace splitpit {

/// Sentence-level BLEU-4 against one or more references.
///
/// Clipped n-gram precision uses, per n-gram, the maximum count over the
/// references. A zero precision for n >= 2 is add-one smoothed to
/// (0 + 1) / (total + 1); a zero unigram precision gives 0. The brevity
/// penalty uses the reference length closest to the hypothesis length
/// (shorter wins ties). An empty hypothesis scores 0.
double sentence_bleu(std::span<const std::string> hypothesis, std::span<const Tokens> references);

struct MetricsReport {
  double bleu = 0.0;
  double simples_per_complex = 0.0;  // #S/C
  double tokens_per_simple = 0.0;    // #T/S, SEP excluded
  std::size_t size = 0;

  std::string to_text() const;
  /// `bleu=... s_per_c=... t_per_s=...`
  std::string to_key_values() const;
};

/// Simples re-joined with " [SEP] " into one token sequence.
Tokens join_simples(std::span<const Tokens> simples);

/// outputs[i] is the list of simple sentences produced for input i;
/// references[i] holds every acceptable reference for it, each a list of
/// simple sentences.
MetricsReport corpus_metrics(std::span<const std::vector<Tokens>> outputs,
                             std::span<const std::vector<std::vector<Tokens>>> references);

/// First ceil(n/2) tokens plus ".", then the rest. Inputs shorter than two
/// tokens pass through as one segment.
std::vector<Tokens> baseline_splithalf(std::span<const std::string> source);

}  // namespace splitpit
