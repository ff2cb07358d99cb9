#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "splitpit/rng.hpp"
#include "splitpit/vocab.hpp"

namespace splitpit {

/// A complex sentence and its K reference simple sentences.
struct ComplexSimplePair {
  Tokens source;
  std::vector<Tokens> simples;

  bool operator==(const ComplexSimplePair&) const = default;
};

/// ⟨arg1, relation, arg2⟩ with a truth label.
struct Fact {
  Tokens arg1;
  Tokens relation;
  Tokens arg2;
  bool label = true;

  bool operator==(const Fact&) const = default;
};

struct SentenceFactPair {
  Tokens sentence;
  Fact fact;

  bool operator==(const SentenceFactPair&) const = default;
};

struct CorpusStats {
  std::size_t pairs = 0;
  double simples_per_pair = 0.0;
  double tokens_per_simple = 0.0;
  std::size_t vocab_size = 0;
};

// --- Files ------------------------------------------------------------------
// Split corpus: one example per line, `complex \t s1 [SEP] s2 [SEP] ...`.
// Fact dataset: `sentence \t arg1 \t relation \t arg2 \t {1|0}`.

ComplexSimplePair parse_split_line(const std::string& line, const std::string& origin, std::size_t line_no);
std::string format_split_line(const ComplexSimplePair& pair);
std::vector<ComplexSimplePair> read_split_corpus(std::istream& in, const std::string& origin);
std::vector<ComplexSimplePair> load_split_corpus(const std::string& path);
void save_split_corpus(const std::string& path, std::span<const ComplexSimplePair> pairs);

std::string format_fact_line(const SentenceFactPair& pair);
std::vector<SentenceFactPair> read_fact_dataset(std::istream& in, const std::string& origin);
std::vector<SentenceFactPair> load_fact_dataset(const std::string& path);
void save_fact_dataset(const std::string& path, std::span<const SentenceFactPair> pairs);

void write_stats(std::ostream& out, const CorpusStats& stats);

// --- Vocabulary and statistics ---------------------------------------------

/// Reserved tokens first, then corpus tokens by descending frequency with
/// alphabetical tie-break, truncated to max_size entries in total.
Vocabulary build_vocab(std::span<const ComplexSimplePair> pairs, std::size_t max_size);

CorpusStats corpus_stats(std::span<const ComplexSimplePair> pairs, std::size_t vocab_size = 0);

/// Seeded shuffle, then the last round(fraction * n) pairs are held out.
std::pair<std::vector<ComplexSimplePair>, std::vector<ComplexSimplePair>> split_holdout(
    std::span<const ComplexSimplePair> pairs, double fraction, Rng& rng);

// --- Fact corruption --------------------------------------------------------

enum class Corruption { kRelation, kArgument };

inline constexpr int kCorruptionRetries = 16;

/// Negative fact: with equal probability swap the relation for another one
/// from relation_pool, or replace one word of arg1/arg2 with a different
/// word of the sentence. Throws when no change is found within the retry bound.
Fact corrupt_fact(const Fact& fact, std::span<const std::string> sentence,
                  std::span<const Tokens> relation_pool, Rng& rng, Corruption* used = nullptr);

/// One corrupted negative per positive, shuffled together.
std::vector<SentenceFactPair> make_fact_dataset(std::span<const SentenceFactPair> positives, Rng& rng);

// --- Synthetic corpus -------------------------------------------------------

struct SyntheticConfig {
  std::size_t n_entities = 40;
  std::size_t n_relations = 12;
  std::size_t n_pairs = 500;
  std::size_t max_facts = 3;
  /// Per-fact probability of a distractor phrase in the complex sentence.
  double noise = 0.0;

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<ComplexSimplePair> pairs;
  /// Positive sentence-fact pairs, one per fact of every complex sentence.
  std::vector<SentenceFactPair> facts;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& config, Rng& rng);

// --- Batching ---------------------------------------------------------------

struct Batch {
  std::vector<std::size_t> split;  // indices into the split dataset
  std::vector<std::size_t> facts;  // indices into the fact dataset
};

/// Epochs are passes over the split dataset. With multi-task batching every
/// batch pairs each split example with one fact example; the fact dataset is
/// recycled with a fresh shuffle whenever it runs out.
class BatchIterator {
 public:
  BatchIterator(std::size_t n_split, std::size_t n_facts, std::size_t batch_size, bool multitask,
                std::uint64_t seed);

  std::vector<Batch> next_epoch();

 private:
  std::size_t next_fact();

  std::size_t n_split_, n_facts_, per_batch_;
  bool multitask_;
  Rng split_rng_, fact_rng_;
  std::vector<std::size_t> fact_order_;
  std::size_t fact_cursor_ = 0;
};

}  // namespace splitpit
