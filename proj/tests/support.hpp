#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "splitpit/autodiff.hpp"
#include "splitpit/model.hpp"
#include "splitpit/rng.hpp"
#include "splitpit/vocab.hpp"

namespace splitpit::testing {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("splitpit-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline ModelConfig tiny_config(std::size_t vocab = 20, std::size_t hidden = 8, std::size_t embed = 6,
                               std::size_t filters = 3) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.hidden = hidden;
  c.embed = embed;
  c.filters = filters;
  return c;
}

/// Every entry uniform(-scale, scale); larger than the training init so
/// distributions are far from uniform.
inline ModelParams random_params(const ModelConfig& config, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  ModelParams params = ModelParams::zeros(config);
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<double> values(params.value(i).size());
    for (double& v : values) v = rng.uniform(-scale, scale);
    params.set(i, ad::Tensor(params.value(i).shape(), std::move(values)));
  }
  return params;
}

inline ad::Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> values(ad::numel(shape));
  for (double& v : values) v = rng.uniform(lo, hi);
  return ad::Tensor(std::move(shape), std::move(values));
}

/// Vocabulary with kReservedTokens reserved entries plus words w0, w1, ...
inline Vocabulary numbered_vocab(std::size_t size) {
  std::vector<std::string> words;
  for (std::size_t i = kReservedTokens; i < size; ++i) words.push_back("w" + std::to_string(i - kReservedTokens));
  return Vocabulary::from_words(words);
}

/// Random source of regular vocabulary words.
inline Tokens random_words(const Vocabulary& vocab, std::size_t length, Rng& rng) {
  Tokens words;
  for (std::size_t i = 0; i < length; ++i) {
    words.push_back(vocab.token(static_cast<TokenId>(kReservedTokens + rng.index(vocab.size() - kReservedTokens))));
  }
  return words;
}

}  // namespace splitpit::testing
