#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "splitpit/data.hpp"
#include "splitpit/gradcheck.hpp"
#include "splitpit/model.hpp"
#include "splitpit/pit.hpp"
#include "splitpit/trainer.hpp"

namespace splitpit::cli {

enum class ValueKind { kCount, kReal, kBool, kText, kCountList, kModeList, kMode };

struct KeySpec {
  std::string key;
  std::string default_value;
  ValueKind kind;
  std::string help;
};

/// Every accepted configuration key, in header order.
const std::vector<KeySpec>& schema();

/// Defaults, then a config file, then command-line overrides. Values are
/// type-checked as they are set; cross-field rules run in validate().
class RunConfig {
 public:
  RunConfig();

  /// Unknown keys and malformed values throw ValidationError.
  void set(const std::string& key, const std::string& value);
  /// Flat `key = value` lines; `#` starts a comment.
  void load(std::istream& in, const std::string& origin);
  void load_file(const std::string& path);

  const std::string& text(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::uint64_t seed() const;

  SyntheticConfig synthetic() const;
  ModelConfig model() const;
  PitConfig pit() const;
  TrainConfig train() const;
  GradCheckConfig gradcheck() const;
  std::vector<PitMode> ablate_modes() const;
  std::vector<std::uint64_t> ablate_seeds() const;

  /// Builds every module config and runs its checks.
  void validate() const;

  /// All keys as `key = value`, loadable as a config file.
  std::string header(const std::string& command) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace splitpit::cli
