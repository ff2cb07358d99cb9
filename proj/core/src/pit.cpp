#include "splitpit/pit.hpp"

#include <algorithm>
#include <numeric>

#include "splitpit/error.hpp"

namespace splitpit {

PitMode parse_pit_mode(std::string_view text) {
  if (text == "min") return PitMode::kMin;
  if (text == "max") return PitMode::kMax;
  if (text == "random") return PitMode::kRandom;
  if (text == "fixed") return PitMode::kFixed;
  throw ValidationError("unknown PIT mode '" + std::string(text) + "' (expected min, max, random or fixed)");
}

std::string_view to_string(PitMode mode) {
  switch (mode) {
    case PitMode::kMin: return "min";
    case PitMode::kMax: return "max";
    case PitMode::kRandom: return "random";
    case PitMode::kFixed: return "fixed";
  }
  return "?";
}

std::vector<Ordering> enumerate_permutations(std::size_t k, std::size_t cap) {
  if (k == 0) throw ValidationError("enumerate_permutations: K must be at least 1");
  if (k > cap) throw CapExceeded(k, cap);
  Ordering order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Ordering> out;
  do {
    out.push_back(order);
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

std::vector<TokenId> assemble_target(std::span<const std::vector<TokenId>> simples, const Ordering& ordering) {
  if (ordering.size() != simples.size()) {
    throw ValidationError("assemble_target: ordering has " + std::to_string(ordering.size()) +
                          " entries for " + std::to_string(simples.size()) + " sentences");
  }
  std::vector<bool> seen(simples.size(), false);
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < ordering.size(); ++i) {
    const std::size_t k = ordering[i];
    if (k >= simples.size() || seen[k]) throw ValidationError("assemble_target: not a permutation");
    seen[k] = true;
    if (i) out.push_back(kSep);
    out.insert(out.end(), simples[k].begin(), simples[k].end());
  }
  return out;
}

std::vector<TokenId> with_boundaries(std::span<const TokenId> tokens) {
  std::vector<TokenId> out;
  out.reserve(tokens.size() + 2);
  out.push_back(kBos);
  out.insert(out.end(), tokens.begin(), tokens.end());
  out.push_back(kEos);
  return out;
}

PitResult pit_loss(const SplitModel& model, const EncodedPair& pair, const PitConfig& config, Rng& rng) {
  const std::size_t k = pair.simples.size();
  if (k == 0) throw ValidationError("pit_loss: pair has no reference sentences");
  for (const auto& s : pair.simples) {
    if (s.empty()) throw ValidationError("pit_loss: empty reference sentence");
  }

  PitMode mode = config.mode;
  PitResult result;
  if (k > config.max_k && mode != PitMode::kFixed) {
    if (!config.fallback_to_fixed) throw CapExceeded(k, config.max_k);
    mode = PitMode::kFixed;
    result.fell_back = true;
  }

  const EncoderOutput enc = model.encode(pair.source.ids);
  auto target_for = [&](const Ordering& o) { return with_boundaries(assemble_target(pair.simples, o)); };

  if (mode == PitMode::kFixed && (!config.audit || k > config.max_k)) {
    Ordering identity(k);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    result.loss = model.target_nll(enc, pair.source, target_for(identity));
    result.chosen_order = std::move(identity);
    result.chosen_index = 0;
    result.assignments = 1;
    return result;
  }

  const std::vector<Ordering> orders = enumerate_permutations(k, config.max_k);
  std::size_t chosen = 0;
  if (mode == PitMode::kRandom) chosen = rng.index(orders.size());

  const bool score_all = mode == PitMode::kMin || mode == PitMode::kMax || config.audit;
  if (score_all) {
    const SplitModel frozen = model.detached();
    const EncoderOutput enc_values = enc.detach();
    result.all_losses.reserve(orders.size());
    for (const Ordering& o : orders) {
      result.all_losses.push_back(frozen.target_nll(enc_values, pair.source, target_for(o)).item());
    }
    if (mode == PitMode::kMin || mode == PitMode::kMax) {
      // Strict comparisons keep the lexicographically smallest ordering on ties.
      for (std::size_t i = 1; i < orders.size(); ++i) {
        const double cand = result.all_losses[i], best = result.all_losses[chosen];
        if (mode == PitMode::kMin ? cand < best : cand > best) chosen = i;
      }
    }
  }
  result.assignments = score_all ? orders.size() : 1;
  result.chosen_index = chosen;
  result.chosen_order = orders[chosen];
  result.loss = model.target_nll(enc, pair.source, target_for(orders[chosen]));
  return result;
}

}  // namespace splitpit
