#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splitpit/autodiff.hpp"
#include "splitpit/model.hpp"
#include "splitpit/rng.hpp"
#include "splitpit/vocab.hpp"

namespace splitpit {

/// Which reference ordering supplies the generation loss.
enum class PitMode {
  kMin,     // permutation invariant training: lowest-loss ordering
  kMax,     // highest-loss ordering
  kRandom,  // uniformly drawn ordering, re-drawn on every visit
  kFixed,   // the stored reference order
};

PitMode parse_pit_mode(std::string_view text);
std::string_view to_string(PitMode mode);

struct PitConfig {
  PitMode mode = PitMode::kMin;
  std::size_t max_k = 6;
  /// Score K > max_k pairs in stored order instead of raising CapExceeded.
  bool fallback_to_fixed = false;
  /// Score every ordering even for RANDOM and FIXED.
  bool audit = false;
};

/// A complex sentence with its K reference simple sentences, in id form.
struct EncodedPair {
  SourceText source;
  std::vector<std::vector<TokenId>> simples;
};

using Ordering = std::vector<std::size_t>;

/// All K! orderings of 0..K-1 in lexicographic order. Throws CapExceeded
/// when K > cap.
std::vector<Ordering> enumerate_permutations(std::size_t k, std::size_t cap = 6);

/// simples[o1] ⊕ SEP ⊕ simples[o2] ⊕ ... ⊕ SEP ⊕ simples[oK].
std::vector<TokenId> assemble_target(std::span<const std::vector<TokenId>> simples,
                                     const Ordering& ordering);

/// BOS ⊕ tokens ⊕ EOS.
std::vector<TokenId> with_boundaries(std::span<const TokenId> tokens);

struct PitResult {
  ad::Tensor loss;
  Ordering chosen_order;
  std::size_t chosen_index = 0;  // into enumerate_permutations(K); 0 on fallback
  /// Summed NLL per ordering, in enumeration order; empty when only the
  /// chosen ordering was scored.
  std::vector<double> all_losses;
  std::size_t assignments = 0;  // orderings considered
  bool fell_back = false;
};

/// Generation loss of one pair under the given mode. The source is encoded
/// once; candidate orderings are scored value-only and only the selected
/// target is decoded on the model's tape, so gradients flow through it alone.
PitResult pit_loss(const SplitModel& model, const EncodedPair& pair, const PitConfig& config, Rng& rng);

}  // namespace splitpit
