#include "src/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "splitpit/error.hpp"

namespace splitpit::cli {

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = {
      {"seed", "1", ValueKind::kCount, "root seed; module streams are derived from it by name"},
      {"data.dir", "data", ValueKind::kText, "directory holding corpus.tsv, facts.tsv and stats.txt"},
      {"data.n_pairs", "500", ValueKind::kCount, "synthetic complex sentences to generate"},
      {"data.n_entities", "40", ValueKind::kCount, "synthetic entity inventory"},
      {"data.n_relations", "12", ValueKind::kCount, "synthetic relation inventory"},
      {"data.max_facts", "3", ValueKind::kCount, "facts per complex sentence, drawn from 1..max"},
      {"data.noise", "0", ValueKind::kReal, "per-fact probability of a distractor phrase"},
      {"data.max_vocab", "5000", ValueKind::kCount, "vocabulary cap including reserved tokens"},
      {"data.holdout", "0.1", ValueKind::kReal, "held-out fraction of the split corpus"},
      {"model.embed", "32", ValueKind::kCount, "embedding size"},
      {"model.hidden", "64", ValueKind::kCount, "LSTM hidden size"},
      {"model.filters", "24", ValueKind::kCount, "CNN filters per width"},
      {"model.filter_widths", "3,4,5", ValueKind::kCountList, "CNN filter widths"},
      {"model.classifier_hidden", "0", ValueKind::kCount, "fact classifier hidden width; 0 means model.hidden"},
      {"model.max_source_len", "128", ValueKind::kCount, "longest accepted source sentence"},
      {"train.lambda", "0.5", ValueKind::kReal, "generation loss weight"},
      {"train.lr", "0.0005", ValueKind::kReal, "peak learning rate"},
      {"train.warmup", "8000", ValueKind::kCount, "linear warmup steps"},
      {"train.epochs", "30", ValueKind::kCount, "passes over the training pairs"},
      {"train.batch_size", "64", ValueKind::kCount, "examples per step"},
      {"train.multitask", "true", ValueKind::kBool, "mix fact examples into every batch"},
      {"train.clip", "5", ValueKind::kReal, "global gradient-norm clip; 0 disables"},
      {"train.validate_every", "1", ValueKind::kCount, "epochs between validation runs; 0 disables"},
      {"train.valid_beam", "1", ValueKind::kCount, "beam size for validation decoding"},
      {"train.checkpoint", "model.ckpt", ValueKind::kText, "checkpoint path"},
      {"train.log", "train.log", ValueKind::kText, "training log path"},
      {"pit.mode", "min", ValueKind::kMode, "min, max, random or fixed"},
      {"pit.max_k", "6", ValueKind::kCount, "largest K whose permutations are enumerated"},
      {"pit.fallback", "false", ValueKind::kBool, "use the stored order when K exceeds pit.max_k"},
      {"pit.audit", "false", ValueKind::kBool, "score every ordering in all modes"},
      {"eval.model", "model.ckpt", ValueKind::kText, "checkpoint to evaluate or split with"},
      {"eval.data", "", ValueKind::kText, "split corpus to score; empty means the held-out part of data.dir"},
      {"eval.beam", "12", ValueKind::kCount, "beam size"},
      {"eval.report", "", ValueKind::kText, "also write the metrics report here"},
      {"eval.input", "", ValueKind::kText, "split: one complex sentence per line"},
      {"eval.output", "", ValueKind::kText, "split: output path"},
      {"ablate.modes", "min,random,max", ValueKind::kModeList, "PIT modes to compare"},
      {"ablate.seeds", "1,2,3,4,5", ValueKind::kCountList, "training seeds per mode"},
      {"gradcheck.hidden", "8", ValueKind::kCount, "hidden size of the checked model"},
      {"gradcheck.embed", "6", ValueKind::kCount, "embedding size of the checked model"},
      {"gradcheck.vocab", "20", ValueKind::kCount, "vocabulary size of the checked model"},
      {"gradcheck.filters", "3", ValueKind::kCount, "CNN filters per width of the checked model"},
      {"gradcheck.eps", "1e-05", ValueKind::kReal, "central-difference step"},
      {"gradcheck.tolerance", "0.0001", ValueKind::kReal, "largest accepted relative error"},
  };
  return keys;
}

namespace {

const KeySpec& spec_of(const std::string& key) {
  const auto& keys = schema();
  const auto it = std::find_if(keys.begin(), keys.end(), [&](const KeySpec& s) { return s.key == key; });
  if (it == keys.end()) throw ValidationError("unknown config key '" + key + "'");
  return *it;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_count(const std::string& s, std::uint64_t& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::istringstream in(s);
  in.imbue(std::locale::classic());
  in >> out;
  return in && in.peek() == std::char_traits<char>::eof() && std::isfinite(out);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) items.push_back(trim(item));
  return items;
}

std::string normalize(const KeySpec& spec, const std::string& raw) {
  const std::string value = trim(raw);
  auto bad = [&](const std::string& expected) {
    return ValidationError("config key '" + spec.key + "': expected " + expected + ", got '" + value + "'");
  };
  switch (spec.kind) {
    case ValueKind::kCount: {
      std::uint64_t n = 0;
      if (!parse_count(value, n)) throw bad("a non-negative integer");
      return std::to_string(n);
    }
    case ValueKind::kReal: {
      double x = 0.0;
      if (!parse_real(value, x)) throw bad("a finite number");
      return value;
    }
    case ValueKind::kBool:
      if (value == "true" || value == "1" || value == "yes" || value == "on") return "true";
      if (value == "false" || value == "0" || value == "no" || value == "off") return "false";
      throw bad("true or false");
    case ValueKind::kText:
      return value;
    case ValueKind::kMode:
      try {
        return std::string(to_string(parse_pit_mode(value)));
      } catch (const Error&) {
        throw bad("one of min, max, random, fixed");
      }
    case ValueKind::kCountList: {
      std::string out;
      const auto items = split_list(value);
      if (items.empty()) throw bad("a comma-separated list of integers");
      for (const auto& item : items) {
        std::uint64_t n = 0;
        if (!parse_count(item, n)) throw bad("a comma-separated list of integers");
        out += (out.empty() ? "" : ",") + std::to_string(n);
      }
      return out;
    }
    case ValueKind::kModeList: {
      std::string out;
      const auto items = split_list(value);
      if (items.empty()) throw bad("a comma-separated list of PIT modes");
      for (const auto& item : items) {
        try {
          out += (out.empty() ? "" : ",") + std::string(to_string(parse_pit_mode(item)));
        } catch (const Error&) {
          throw bad("a comma-separated list of PIT modes");
        }
      }
      return out;
    }
  }
  return value;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& spec : schema()) values_[spec.key] = spec.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec& spec = spec_of(key);
  values_[key] = normalize(spec, value);
}

void RunConfig::load(std::istream& in, const std::string& origin) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(origin, line_no, "expected 'key = value'");
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw FormatError(origin, line_no, e.what());
    }
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  load(in, path);
}

const std::string& RunConfig::text(const std::string& key) const {
  spec_of(key);
  return values_.at(key);
}

std::size_t RunConfig::count(const std::string& key) const {
  std::uint64_t n = 0;
  parse_count(text(key), n);
  return static_cast<std::size_t>(n);
}

double RunConfig::real(const std::string& key) const {
  double x = 0.0;
  parse_real(text(key), x);
  return x;
}

bool RunConfig::flag(const std::string& key) const { return text(key) == "true"; }

std::uint64_t RunConfig::seed() const {
  std::uint64_t n = 0;
  parse_count(text("seed"), n);
  return n;
}

SyntheticConfig RunConfig::synthetic() const {
  SyntheticConfig c;
  c.n_pairs = count("data.n_pairs");
  c.n_entities = count("data.n_entities");
  c.n_relations = count("data.n_relations");
  c.max_facts = count("data.max_facts");
  c.noise = real("data.noise");
  return c;
}

ModelConfig RunConfig::model() const {
  ModelConfig c;
  c.embed = count("model.embed");
  c.hidden = count("model.hidden");
  c.filters = count("model.filters");
  c.filter_widths.clear();
  for (const auto& item : split_list(text("model.filter_widths"))) {
    std::uint64_t n = 0;
    parse_count(item, n);
    c.filter_widths.push_back(static_cast<std::size_t>(n));
  }
  c.classifier_hidden = count("model.classifier_hidden");
  c.max_source_len = count("model.max_source_len");
  return c;
}

PitConfig RunConfig::pit() const {
  PitConfig c;
  c.mode = parse_pit_mode(text("pit.mode"));
  c.max_k = count("pit.max_k");
  c.fallback_to_fixed = flag("pit.fallback");
  c.audit = flag("pit.audit");
  return c;
}

TrainConfig RunConfig::train() const {
  TrainConfig c;
  c.lambda = real("train.lambda");
  c.lr_peak = real("train.lr");
  c.warmup_steps = count("train.warmup");
  c.epochs = count("train.epochs");
  c.batch_size = count("train.batch_size");
  c.multitask = flag("train.multitask");
  c.clip_norm = real("train.clip");
  c.validate_every = count("train.validate_every");
  c.valid_beam = count("train.valid_beam");
  c.checkpoint_path = text("train.checkpoint");
  c.seed = seed();
  c.pit = pit();
  c.model = model();
  c.max_vocab = count("data.max_vocab");
  return c;
}

GradCheckConfig RunConfig::gradcheck() const {
  GradCheckConfig c;
  c.hidden = count("gradcheck.hidden");
  c.embed = count("gradcheck.embed");
  c.vocab = count("gradcheck.vocab");
  c.filters = count("gradcheck.filters");
  c.eps = real("gradcheck.eps");
  c.seed = seed();
  return c;
}

std::vector<PitMode> RunConfig::ablate_modes() const {
  std::vector<PitMode> modes;
  for (const auto& item : split_list(text("ablate.modes"))) modes.push_back(parse_pit_mode(item));
  return modes;
}

std::vector<std::uint64_t> RunConfig::ablate_seeds() const {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(text("ablate.seeds"))) {
    std::uint64_t n = 0;
    parse_count(item, n);
    seeds.push_back(n);
  }
  return seeds;
}

void RunConfig::validate() const {
  synthetic().validate();
  train().validate();
  gradcheck().validate();
  const double holdout = real("data.holdout");
  if (!(holdout >= 0.0 && holdout < 1.0)) throw ValidationError("data.holdout must lie in [0, 1)");
  if (pit().max_k == 0) throw ValidationError("pit.max_k must be positive");
  if (count("data.max_facts") > pit().max_k) throw ValidationError("data.max_facts must not exceed pit.max_k");
  if (count("eval.beam") == 0) throw ValidationError("eval.beam must be positive");
  const double tol = real("gradcheck.tolerance");
  if (!(tol > 0.0)) throw ValidationError("gradcheck.tolerance must be positive");
}

std::string RunConfig::header(const std::string& command) const {
  std::ostringstream out;
  out << "# splitpit " << command << ": effective configuration\n";
  for (const auto& spec : schema()) out << spec.key << " = " << values_.at(spec.key) << '\n';
  out << "# end of configuration\n";
  return out.str();
}

}  // namespace splitpit::cli
