#include "splitpit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <sstream>

#include "splitpit/error.hpp"

namespace splitpit {
namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(std::span<const std::string> tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double sentence_bleu(std::span<const std::string> hypothesis, std::span<const Tokens> references) {
  if (references.empty()) throw ValidationError("sentence_bleu: at least one reference required");
  if (hypothesis.empty()) return 0.0;

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const NgramCounts hyp = count_ngrams(hypothesis, n);
    NgramCounts max_ref;
    for (const Tokens& ref : references) {
      for (const auto& [gram, c] : count_ngrams(ref, n)) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, c);
      }
    }
    std::size_t matched = 0;
    for (const auto& [gram, c] : hyp) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    const std::size_t total = hypothesis.size() >= n ? hypothesis.size() - n + 1 : 0;
    double precision = 0.0;
    if (matched > 0) {
      precision = static_cast<double>(matched) / static_cast<double>(total);
    } else if (n == 1) {
      return 0.0;
    } else {
      precision = 1.0 / static_cast<double>(total + 1);
    }
    log_sum += std::log(precision);
  }

  const std::size_t c = hypothesis.size();
  std::size_t r = references[0].size();
  for (const Tokens& ref : references) {
    const auto gap = [&](std::size_t len) { return len > c ? len - c : c - len; };
    if (gap(ref.size()) < gap(r) || (gap(ref.size()) == gap(r) && ref.size() < r)) r = ref.size();
  }
  const double brevity = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return brevity * std::exp(log_sum / 4.0);
}

Tokens join_simples(std::span<const Tokens> simples) {
  Tokens out;
  for (std::size_t i = 0; i < simples.size(); ++i) {
    if (i) out.emplace_back(kSepToken);
    out.insert(out.end(), simples[i].begin(), simples[i].end());
  }
  return out;
}

MetricsReport corpus_metrics(std::span<const std::vector<Tokens>> outputs,
                             std::span<const std::vector<std::vector<Tokens>>> references) {
  if (outputs.size() != references.size()) {
    throw ValidationError("corpus_metrics: " + std::to_string(outputs.size()) + " outputs for " +
                          std::to_string(references.size()) + " reference sets");
  }
  MetricsReport report;
  report.size = outputs.size();
  if (outputs.empty()) return report;

  double bleu_total = 0.0;
  std::size_t simples = 0, tokens = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    std::vector<Tokens> refs;
    refs.reserve(references[i].size());
    for (const auto& ref : references[i]) refs.push_back(join_simples(ref));
    bleu_total += sentence_bleu(join_simples(outputs[i]), refs);
    simples += outputs[i].size();
    for (const Tokens& s : outputs[i]) {
      tokens += static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](const std::string& t) { return t != kSepToken; }));
    }
  }
  const auto n = static_cast<double>(outputs.size());
  report.bleu = bleu_total / n;
  report.simples_per_complex = static_cast<double>(simples) / n;
  report.tokens_per_simple = simples ? static_cast<double>(tokens) / static_cast<double>(simples) : 0.0;
  return report;
}

std::string MetricsReport::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "examples  " << size << '\n'
      << "BLEU      " << bleu << '\n'
      << "#S/C      " << simples_per_complex << '\n'
      << "#T/S      " << tokens_per_simple << '\n';
  return out.str();
}

std::string MetricsReport::to_key_values() const {
  std::ostringstream out;
  out << std::setprecision(17) << "bleu=" << bleu << " s_per_c=" << simples_per_complex
      << " t_per_s=" << tokens_per_simple;
  return out.str();
}

std::vector<Tokens> baseline_splithalf(std::span<const std::string> source) {
  if (source.size() < 2) return {Tokens(source.begin(), source.end())};
  const std::size_t first = (source.size() + 1) / 2;
  Tokens a(source.begin(), source.begin() + static_cast<std::ptrdiff_t>(first));
  a.emplace_back(".");
  Tokens b(source.begin() + static_cast<std::ptrdiff_t>(first), source.end());
  return {std::move(a), std::move(b)};
}

}  // namespace splitpit
