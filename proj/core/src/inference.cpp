#include "splitpit/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "splitpit/error.hpp"
#include "splitpit/pit.hpp"

namespace splitpit {

std::size_t default_max_len(std::size_t source_len) { return (5 * source_len) / 2 + 10; }

namespace {

struct Live {
  std::vector<TokenId> tokens;
  double score = 0.0;
  LstmState state;
};

struct Candidate {
  double score;
  TokenId token;
  std::size_t beam;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.token != b.token) return a.token < b.token;
  return a.beam < b.beam;
}

bool better_final(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

}  // namespace

Hypothesis beam_search(const SplitModel& tracked_model, const SourceText& source, std::size_t beam_size,
                       std::size_t max_len) {
  if (beam_size == 0) throw ValidationError("beam_search: beam size must be at least 1");
  if (max_len == 0) throw ValidationError("beam_search: max_len must be at least 1");
  if (source.ids.empty()) throw ValidationError("beam_search: empty source sentence");

  const SplitModel model = tracked_model.detached();
  const EncoderOutput enc = model.encode(source.ids);
  const std::size_t vocab = source.extended_size();

  std::vector<Live> live{Live{{}, 0.0, enc.final_state}};
  std::vector<Hypothesis> finished;
  std::vector<Candidate> candidates;
  std::vector<LstmState> next_states;

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    candidates.clear();
    next_states.clear();
    for (std::size_t b = 0; b < live.size(); ++b) {
      const TokenId prev = live[b].tokens.empty() ? kBos : live[b].tokens.back();
      DecodeResult out = model.decode_step(prev, live[b].state, enc, source);
      const auto probs = out.probs.data();
      for (std::size_t t = 0; t < vocab; ++t) {
        candidates.push_back({live[b].score + std::log(probs[t]), static_cast<TokenId>(t), b});
      }
      next_states.push_back(std::move(out.state));
    }
    const std::size_t keep = std::min(beam_size, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      better);

    std::vector<Live> next;
    next.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      std::vector<TokenId> tokens = live[c.beam].tokens;
      tokens.push_back(c.token);
      if (c.token == kEos) {
        finished.push_back({std::move(tokens), c.score, true});
      } else {
        next.push_back({std::move(tokens), c.score, next_states[c.beam]});
      }
    }
    live = std::move(next);

    // Scores never increase, so nothing live can overtake a better finished hypothesis.
    if (!finished.empty() && !live.empty()) {
      double best_finished = -INFINITY, best_live = -INFINITY;
      for (const auto& h : finished) best_finished = std::max(best_finished, h.log_prob);
      for (const auto& l : live) best_live = std::max(best_live, l.score);
      if (best_finished > best_live) break;
    }
  }

  std::vector<Hypothesis> pool = std::move(finished);
  for (auto& l : live) pool.push_back({std::move(l.tokens), l.score, false});
  return *std::min_element(pool.begin(), pool.end(), better_final);
}

std::vector<Tokens> split_output(std::span<const std::string> tokens) {
  std::vector<Tokens> out;
  Tokens current;
  for (const auto& t : tokens) {
    if (t == kSepToken) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(t);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<std::vector<TokenId>> split_output(std::span<const TokenId> tokens) {
  std::vector<std::vector<TokenId>> out;
  std::vector<TokenId> current;
  for (TokenId t : tokens) {
    if (t == kSep) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(t);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<Tokens> split_sentence(const SplitModel& model, const Vocabulary& vocab,
                                   std::span<const std::string> source, std::size_t beam_size, std::size_t max_len) {
  const SourceText src = make_source(vocab, source);
  const Hypothesis best = beam_search(model, src, beam_size, max_len ? max_len : default_max_len(src.size()));
  std::span<const TokenId> ids(best.tokens);
  if (best.finished) ids = ids.first(ids.size() - 1);
  return split_output(decode_target(vocab, src, ids));
}

std::size_t split_file(const SplitModel& model, const Vocabulary& vocab, const std::string& input_path,
                       const std::string& output_path, std::size_t beam_size) {
  std::ifstream in(input_path, std::ios::binary);
  if (!in) throw IoError("cannot open input: " + input_path);
  std::ofstream out(output_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open output: " + output_path);

  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    ++count;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<Tokens> simples;
    try {
      const Tokens source = tokenize(line);
      if (source.empty()) throw ValidationError("empty complex sentence");
      simples = split_sentence(model, vocab, source, beam_size);
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(input_path, count, e.what());
    }
    for (std::size_t i = 0; i < simples.size(); ++i) {
      if (i) out << " [SEP] ";
      out << join(simples[i]);
    }
    out << '\n';
    if (!out) throw IoError(output_path + ": write failed at line " + std::to_string(count));
  }
  return count;
}

std::vector<std::vector<Tokens>> order_free_references(const ComplexSimplePair& pair, std::size_t max_k) {
  if (pair.simples.size() > max_k) return {pair.simples};
  std::vector<std::vector<Tokens>> refs;
  for (const Ordering& o : enumerate_permutations(pair.simples.size(), max_k)) {
    std::vector<Tokens> ref;
    for (std::size_t i : o) ref.push_back(pair.simples[i]);
    refs.push_back(std::move(ref));
  }
  return refs;
}

EvalResult evaluate(const SplitModel& model, const Vocabulary& vocab, std::span<const ComplexSimplePair> pairs,
                    std::size_t beam_size, std::size_t max_k) {
  EvalResult result;
  std::vector<std::vector<std::vector<Tokens>>> references;
  std::size_t exact = 0;
  const SplitModel frozen = model.detached();
  for (const auto& pair : pairs) {
    std::vector<Tokens> out = split_sentence(frozen, vocab, pair.source, beam_size);
    std::vector<Tokens> a = out, b = pair.simples;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a == b) ++exact;
    result.outputs.push_back(std::move(out));
    references.push_back(order_free_references(pair, max_k));
  }
  result.report = corpus_metrics(result.outputs, references);
  if (!pairs.empty()) result.exact_match = static_cast<double>(exact) / static_cast<double>(pairs.size());
  return result;
}

}  // namespace splitpit
