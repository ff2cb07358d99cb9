#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "splitpit/data.hpp"
#include "splitpit/metrics.hpp"
#include "splitpit/model.hpp"
#include "splitpit/vocab.hpp"

namespace splitpit {

struct Hypothesis {
  /// Generated ids (BOS excluded); ends with EOS iff finished.
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  bool finished = false;
};

/// floor(2.5 * source_len) + 10.
std::size_t default_max_len(std::size_t source_len);

/// Highest cumulative log-probability hypothesis, no length normalization.
///
/// Each step expands every live hypothesis over the extended vocabulary and
/// keeps the best beam_size candidates (score, then lower token id, then
/// earlier beam). Candidates ending in EOS are frozen; the final choice is
/// over frozen and live hypotheses, preferring the lexicographically smaller
/// sequence on equal scores. A result that hit max_len without EOS has
/// finished == false.
Hypothesis beam_search(const SplitModel& model, const SourceText& source, std::size_t beam_size,
                       std::size_t max_len);

/// Splits on "[SEP]" and drops empty segments.
std::vector<Tokens> split_output(std::span<const std::string> tokens);
std::vector<std::vector<TokenId>> split_output(std::span<const TokenId> tokens);

/// Beam-decodes one complex sentence into surface-form simple sentences.
std::vector<Tokens> split_sentence(const SplitModel& model, const Vocabulary& vocab,
                                   std::span<const std::string> source, std::size_t beam_size,
                                   std::size_t max_len = 0);

/// Line i of output_path holds the split of line i of input_path, simples
/// joined by " [SEP] ". Returns the number of lines processed.
std::size_t split_file(const SplitModel& model, const Vocabulary& vocab, const std::string& input_path,
                       const std::string& output_path, std::size_t beam_size);

/// Every ordering of the stored simples (when K <= max_k; otherwise the
/// stored order alone) as acceptable references.
std::vector<std::vector<Tokens>> order_free_references(const ComplexSimplePair& pair, std::size_t max_k);

struct EvalResult {
  MetricsReport report;
  /// Fraction of outputs equal to the reference simples up to order.
  double exact_match = 0.0;
  std::vector<std::vector<Tokens>> outputs;
};

EvalResult evaluate(const SplitModel& model, const Vocabulary& vocab, std::span<const ComplexSimplePair> pairs,
                    std::size_t beam_size, std::size_t max_k = 6);

}  // namespace splitpit
