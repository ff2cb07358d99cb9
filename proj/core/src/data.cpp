#include "splitpit/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "splitpit/error.hpp"

namespace splitpit {
namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  return in;
}

}  // namespace

// ---------------------------------------------------------------------------
// Split corpus

ComplexSimplePair parse_split_line(const std::string& raw, const std::string& origin, std::size_t line_no) {
  const std::string line = strip_cr(raw);
  const auto fields = split_fields(line, '\t');
  if (fields.size() != 2) throw FormatError(origin, line_no, "expected 'complex<TAB>simples'");
  ComplexSimplePair pair;
  pair.source = tokenize(fields[0]);
  if (pair.source.empty()) throw FormatError(origin, line_no, "empty complex sentence");
  Tokens current;
  for (std::string& tok : tokenize(fields[1])) {
    if (tok == kSepToken) {
      if (current.empty()) throw FormatError(origin, line_no, "empty simple sentence");
      pair.simples.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(std::move(tok));
    }
  }
  if (current.empty()) throw FormatError(origin, line_no, "empty simple sentence");
  pair.simples.push_back(std::move(current));
  return pair;
}

std::string format_split_line(const ComplexSimplePair& pair) {
  std::string line = join(pair.source);
  line += '\t';
  for (std::size_t i = 0; i < pair.simples.size(); ++i) {
    if (i) line += " [SEP] ";
    line += join(pair.simples[i]);
  }
  return line;
}

std::vector<ComplexSimplePair> read_split_corpus(std::istream& in, const std::string& origin) {
  std::vector<ComplexSimplePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    pairs.push_back(parse_split_line(line, origin, line_no));
  }
  return pairs;
}

std::vector<ComplexSimplePair> load_split_corpus(const std::string& path) {
  auto in = open_for_read(path);
  return read_split_corpus(in, path);
}

void save_split_corpus(const std::string& path, std::span<const ComplexSimplePair> pairs) {
  auto out = open_for_write(path);
  for (const auto& p : pairs) out << format_split_line(p) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Fact dataset

std::string format_fact_line(const SentenceFactPair& pair) {
  return join(pair.sentence) + '\t' + join(pair.fact.arg1) + '\t' + join(pair.fact.relation) + '\t' +
         join(pair.fact.arg2) + '\t' + (pair.fact.label ? "1" : "0");
}

std::vector<SentenceFactPair> read_fact_dataset(std::istream& in, const std::string& origin) {
  std::vector<SentenceFactPair> out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto fields = split_fields(strip_cr(raw), '\t');
    if (fields.size() != 5) {
      throw FormatError(origin, line_no, "expected 'sentence<TAB>arg1<TAB>relation<TAB>arg2<TAB>label'");
    }
    SentenceFactPair p;
    p.sentence = tokenize(fields[0]);
    p.fact.arg1 = tokenize(fields[1]);
    p.fact.relation = tokenize(fields[2]);
    p.fact.arg2 = tokenize(fields[3]);
    if (p.sentence.empty() || p.fact.arg1.empty() || p.fact.relation.empty() || p.fact.arg2.empty()) {
      throw FormatError(origin, line_no, "empty field");
    }
    if (fields[4] == "1") p.fact.label = true;
    else if (fields[4] == "0") p.fact.label = false;
    else throw FormatError(origin, line_no, "label must be 1 or 0");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<SentenceFactPair> load_fact_dataset(const std::string& path) {
  auto in = open_for_read(path);
  return read_fact_dataset(in, path);
}

void save_fact_dataset(const std::string& path, std::span<const SentenceFactPair> pairs) {
  auto out = open_for_write(path);
  for (const auto& p : pairs) out << format_fact_line(p) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

void write_stats(std::ostream& out, const CorpusStats& stats) {
  std::ostringstream s;
  s << std::setprecision(17);
  s << "pairs=" << stats.pairs << '\n'
    << "s_per_c=" << stats.simples_per_pair << '\n'
    << "t_per_s=" << stats.tokens_per_simple << '\n'
    << "vocab_size=" << stats.vocab_size << '\n';
  out << s.str();
}

// ---------------------------------------------------------------------------

Vocabulary build_vocab(std::span<const ComplexSimplePair> pairs, std::size_t max_size) {
  const Vocabulary reserved;
  std::map<std::string, std::size_t> counts;
  auto count = [&](const Tokens& tokens) {
    for (const auto& t : tokens) {
      if (!reserved.contains(t)) ++counts[t];
    }
  };
  for (const auto& p : pairs) {
    count(p.source);
    for (const auto& s : p.simples) count(s);
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is alphabetical, so a stable sort on count keeps ties alphabetical.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t room = max_size > kReservedTokens ? max_size - kReservedTokens : 0;
  std::vector<std::string> words;
  for (std::size_t i = 0; i < ranked.size() && i < room; ++i) words.push_back(ranked[i].first);
  return Vocabulary::from_words(words);
}

CorpusStats corpus_stats(std::span<const ComplexSimplePair> pairs, std::size_t vocab_size) {
  CorpusStats stats;
  stats.pairs = pairs.size();
  stats.vocab_size = vocab_size;
  std::size_t simples = 0, tokens = 0;
  for (const auto& p : pairs) {
    simples += p.simples.size();
    for (const auto& s : p.simples) tokens += s.size();
  }
  if (!pairs.empty()) stats.simples_per_pair = static_cast<double>(simples) / static_cast<double>(pairs.size());
  if (simples) stats.tokens_per_simple = static_cast<double>(tokens) / static_cast<double>(simples);
  return stats;
}

std::pair<std::vector<ComplexSimplePair>, std::vector<ComplexSimplePair>> split_holdout(
    std::span<const ComplexSimplePair> pairs, double fraction, Rng& rng) {
  if (fraction < 0.0 || fraction >= 1.0) throw ValidationError("holdout fraction must lie in [0,1)");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span(order));
  const auto held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pairs.size())));
  std::pair<std::vector<ComplexSimplePair>, std::vector<ComplexSimplePair>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < order.size() - held ? out.first : out.second).push_back(pairs[order[i]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fact corruption

Fact corrupt_fact(const Fact& fact, std::span<const std::string> sentence, std::span<const Tokens> relation_pool,
                  Rng& rng, Corruption* used) {
  if (sentence.empty()) throw ValidationError("corrupt_fact: empty sentence");
  const Corruption strategy = rng.coin() ? Corruption::kRelation : Corruption::kArgument;
  if (used) *used = strategy;

  for (int attempt = 0; attempt < kCorruptionRetries; ++attempt) {
    Fact out = fact;
    out.label = false;
    if (strategy == Corruption::kRelation) {
      if (relation_pool.empty()) break;
      const Tokens& r = relation_pool[rng.index(relation_pool.size())];
      if (r == fact.relation || r.empty()) continue;
      out.relation = r;
      return out;
    }
    Tokens& arg = rng.coin() ? out.arg1 : out.arg2;
    if (arg.empty()) continue;
    const std::size_t pos = rng.index(arg.size());
    std::vector<const std::string*> candidates;
    for (const auto& w : sentence) {
      if (w != arg[pos]) candidates.push_back(&w);
    }
    if (candidates.empty()) continue;
    arg[pos] = *candidates[rng.index(candidates.size())];
    return out;
  }
  throw Error("corrupt_fact: no valid " +
              std::string(strategy == Corruption::kRelation ? "relation" : "argument") + " corruption after " +
              std::to_string(kCorruptionRetries) + " attempts");
}

std::vector<SentenceFactPair> make_fact_dataset(std::span<const SentenceFactPair> positives, Rng& rng) {
  std::set<Tokens> relation_set;
  for (const auto& p : positives) {
    if (!p.fact.label) throw ValidationError("make_fact_dataset: inputs must be positive facts");
    relation_set.insert(p.fact.relation);
  }
  const std::vector<Tokens> relations(relation_set.begin(), relation_set.end());

  std::vector<SentenceFactPair> out;
  out.reserve(2 * positives.size());
  std::vector<Tokens> pool;
  for (const auto& p : positives) {
    pool.clear();
    for (const auto& r : relations) {
      if (r != p.fact.relation) pool.push_back(r);
    }
    out.push_back(p);
    out.push_back({p.sentence, corrupt_fact(p.fact, p.sentence, pool, rng)});
  }
  rng.shuffle(std::span(out));
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

void SyntheticConfig::validate() const {
  if (n_entities < 2) throw ValidationError("data.n_entities must be at least 2");
  if (n_relations < 1) throw ValidationError("data.n_relations must be positive");
  if (n_pairs < 1) throw ValidationError("data.n_pairs must be positive");
  if (max_facts < 1) throw ValidationError("data.max_facts must be positive");
  if (noise < 0.0 || noise > 1.0) throw ValidationError("data.noise must lie in [0,1]");
}

namespace {

struct RelationForms {
  Tokens simple;  // used in simple sentences: "X was born in Y ."
  Tokens fused;   // appositive used inside complex sentences: "X , born in Y , ..."
};

const std::vector<std::pair<const char*, const char*>>& relation_bank() {
  static const std::vector<std::pair<const char*, const char*>> bank = {
      {"was born in", "born in"},
      {"is located in", "located in"},
      {"was written by", "written by"},
      {"is a member of", "a member of"},
      {"was founded by", "founded by"},
      {"is the capital of", "the capital of"},
      {"is led by", "led by"},
      {"is married to", "married to"},
      {"works for", "working for"},
      {"plays for", "playing for"},
      {"was directed by", "directed by"},
      {"is part of", "part of"},
      {"studied at", "a former student of"},
      {"was built by", "built by"},
      {"is owned by", "owned by"},
      {"was published by", "published by"},
  };
  return bank;
}

std::vector<RelationForms> make_relations(std::size_t n) {
  std::vector<RelationForms> out;
  const auto& bank = relation_bank();
  for (std::size_t j = 0; j < n; ++j) {
    if (j < bank.size()) {
      out.push_back({tokenize(bank[j].first), tokenize(bank[j].second)});
    } else {
      const std::string link = "linked" + std::to_string(j);
      out.push_back({{"is", link, "to"}, {link, "to"}});
    }
  }
  return out;
}

std::vector<Tokens> make_entities(std::size_t n, Rng& rng) {
  static const char* const kSyllables[] = {"ka", "lo", "mi", "ren", "sa", "tu", "vel", "zor", "bi", "dan",
                                           "fe", "gor", "hal", "jin", "mar", "nel", "os", "pra", "qui", "rus"};
  constexpr std::size_t kCount = sizeof(kSyllables) / sizeof(kSyllables[0]);
  auto word = [&]() {
    std::string w = std::string(kSyllables[rng.index(kCount)]) + kSyllables[rng.index(kCount)];
    w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
  };
  std::set<Tokens> seen;
  std::set<std::string> first_words;
  std::vector<Tokens> out;
  while (out.size() < n) {
    Tokens name{word()};
    if (rng.coin()) name.push_back(word());
    // Distinct names, and no single-word name equal to another name's first word.
    if (seen.contains(name)) continue;
    if (name.size() == 1 && first_words.contains(name[0])) continue;
    if (name.size() == 2 && seen.contains(Tokens{name[0]})) continue;
    seen.insert(name);
    first_words.insert(name[0]);
    out.push_back(std::move(name));
  }
  return out;
}

void append(Tokens& out, const Tokens& more) { out.insert(out.end(), more.begin(), more.end()); }

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& config, Rng& rng) {
  config.validate();
  const std::vector<Tokens> entities = make_entities(config.n_entities, rng);
  const std::vector<RelationForms> relations = make_relations(config.n_relations);
  static const char* const kFillers[] = {"reportedly", "apparently", "indeed"};

  struct Triple {
    std::size_t subject, relation, object;
    bool operator<(const Triple& o) const {
      return std::tie(subject, relation, object) < std::tie(o.subject, o.relation, o.object);
    }
  };

  SyntheticCorpus corpus;
  corpus.pairs.reserve(config.n_pairs);
  for (std::size_t n = 0; n < config.n_pairs; ++n) {
    const std::size_t k = 1 + rng.index(config.max_facts);
    std::vector<Triple> facts;
    std::set<Triple> used;
    while (facts.size() < k) {
      Triple t{rng.index(entities.size()), rng.index(relations.size()), rng.index(entities.size())};
      if (t.subject == t.object || used.contains(t)) continue;
      used.insert(t);
      facts.push_back(t);
    }

    const std::size_t pattern = rng.index(3);
    Tokens complex;
    for (std::size_t i = 0; i < k; ++i) {
      const Triple& f = facts[i];
      if (i > 0) {
        if (pattern == 1) {
          complex.insert(complex.end(), {";", "moreover"});
        } else {
          complex.insert(complex.end(), {",", "and"});
        }
      }
      append(complex, entities[f.subject]);
      const bool filler = config.noise > 0.0 && rng.uniform() < config.noise;
      if (pattern == 2) {
        complex.push_back(",");
        if (filler) complex.push_back(kFillers[rng.index(3)]);
        append(complex, relations[f.relation].fused);
      } else {
        if (filler) complex.push_back(kFillers[rng.index(3)]);
        append(complex, relations[f.relation].simple);
      }
      append(complex, entities[f.object]);
      if (config.noise > 0.0 && rng.uniform() < config.noise) {
        // Distractor entity that takes part in none of the facts.
        std::size_t other = rng.index(entities.size());
        while (other == f.subject || other == f.object) other = rng.index(entities.size());
        complex.insert(complex.end(), {",", "according", "to"});
        append(complex, entities[other]);
      }
    }
    complex.push_back(".");

    ComplexSimplePair pair;
    pair.source = complex;
    for (const Triple& f : facts) {
      Tokens simple = entities[f.subject];
      append(simple, relations[f.relation].simple);
      append(simple, entities[f.object]);
      simple.push_back(".");
      pair.simples.push_back(std::move(simple));
      corpus.facts.push_back({complex, {entities[f.subject], relations[f.relation].simple, entities[f.object], true}});
    }
    // Stored reference order is random: the order-variance problem.
    rng.shuffle(std::span(pair.simples));
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Batching

BatchIterator::BatchIterator(std::size_t n_split, std::size_t n_facts, std::size_t batch_size, bool multitask,
                             std::uint64_t seed)
    : n_split_(n_split),
      n_facts_(n_facts),
      per_batch_(multitask ? batch_size / 2 : batch_size),
      multitask_(multitask),
      split_rng_(Rng::derive(seed, "batch.split")),
      fact_rng_(Rng::derive(seed, "batch.facts")) {
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (n_split == 0) throw ValidationError("batch iterator: split dataset is empty");
  if (multitask) {
    if (batch_size % 2 != 0) throw ValidationError("batch_size must be even when multi-task training is on");
    if (n_facts == 0) throw ValidationError("batch iterator: fact dataset is empty");
  }
}

std::size_t BatchIterator::next_fact() {
  if (fact_cursor_ == fact_order_.size()) {
    fact_order_.resize(n_facts_);
    std::iota(fact_order_.begin(), fact_order_.end(), std::size_t{0});
    fact_rng_.shuffle(std::span(fact_order_));
    fact_cursor_ = 0;
  }
  return fact_order_[fact_cursor_++];
}

std::vector<Batch> BatchIterator::next_epoch() {
  std::vector<std::size_t> order(n_split_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  split_rng_.shuffle(std::span(order));
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += per_batch_) {
    Batch b;
    const std::size_t end = std::min(order.size(), start + per_batch_);
    b.split.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
    if (multitask_) {
      for (std::size_t i = start; i < end; ++i) b.facts.push_back(next_fact());
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace splitpit
