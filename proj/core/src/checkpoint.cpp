#include "splitpit/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "splitpit/error.hpp"

namespace splitpit {
namespace {

std::string widths_to_string(const std::vector<std::size_t>& widths) {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(widths[i]);
  }
  return s;
}

std::vector<std::size_t> parse_sizes(const std::string& text, const std::string& origin) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw Error(std::string(kCheckpointMagic) + " checkpoint " + origin + ": bad size list '" + text + "'");
    }
  }
  return out;
}

[[noreturn]] void corrupt(const std::string& origin, const std::string& why) {
  throw Error(std::string(kCheckpointMagic) + " checkpoint " + origin + ": " + why);
}

void put_double(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double get_double(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const ModelConfig& c = ckpt.config;
  out << kCheckpointMagic << '\n';
  out << "config embed=" << c.embed << " hidden=" << c.hidden << " filters=" << c.filters
      << " widths=" << widths_to_string(c.filter_widths) << " classifier_hidden=" << c.classifier_hidden
      << " max_source_len=" << c.max_source_len << '\n';
  out << "vocab " << ckpt.vocab.size() << '\n';
  for (const std::string& t : ckpt.vocab.tokens()) out << t << '\n';
  out << "params " << ckpt.params.size() << '\n';
  std::size_t offset = 0;
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto& shape = ckpt.params.value(i).shape();
    out << ckpt.params.name(i) << ' ' << widths_to_string(shape) << ' ' << offset << '\n';
    offset += ckpt.params.value(i).size() * sizeof(double);
  }
  out << "data " << offset << '\n';
  for (const auto& v : ckpt.params.values()) {
    for (double x : v.data()) put_double(out, x);
  }
}

Checkpoint read_checkpoint(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    corrupt(origin, "missing or wrong magic header (expected " + std::string(kCheckpointMagic) + ")");
  }

  Checkpoint ckpt;
  if (!std::getline(in, line) || line.rfind("config ", 0) != 0) corrupt(origin, "missing config line");
  {
    std::istringstream fields(line.substr(7));
    std::string kv;
    while (fields >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) corrupt(origin, "bad config entry '" + kv + "'");
      const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
      const auto sizes = parse_sizes(value, origin);
      if (key == "widths") {
        ckpt.config.filter_widths = sizes;
        continue;
      }
      if (sizes.size() != 1) corrupt(origin, "bad config value '" + kv + "'");
      if (key == "embed") ckpt.config.embed = sizes[0];
      else if (key == "hidden") ckpt.config.hidden = sizes[0];
      else if (key == "filters") ckpt.config.filters = sizes[0];
      else if (key == "classifier_hidden") ckpt.config.classifier_hidden = sizes[0];
      else if (key == "max_source_len") ckpt.config.max_source_len = sizes[0];
      else corrupt(origin, "unknown config key '" + key + "'");
    }
  }

  std::size_t count = 0;
  auto read_count = [&](const std::string& tag) {
    if (!std::getline(in, line) || line.rfind(tag + " ", 0) != 0) corrupt(origin, "missing '" + tag + "' section");
    const auto sizes = parse_sizes(line.substr(tag.size() + 1), origin);
    if (sizes.size() != 1) corrupt(origin, "bad '" + tag + "' count");
    return sizes[0];
  };

  count = read_count("vocab");
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) corrupt(origin, "truncated vocabulary");
    tokens.push_back(line);
  }
  if (count < kReservedTokens) corrupt(origin, "vocabulary lacks reserved tokens");
  {
    const Vocabulary reserved;
    for (std::size_t i = 0; i < kReservedTokens; ++i) {
      if (tokens[i] != reserved.tokens()[i]) corrupt(origin, "reserved token mismatch at id " + std::to_string(i));
    }
    ckpt.vocab = Vocabulary::from_words(std::span(tokens).subspan(kReservedTokens));
  }
  ckpt.config.vocab_size = ckpt.vocab.size();
  try {
    ckpt.config.validate();
  } catch (const Error& e) {
    corrupt(origin, e.what());
  }

  const auto layout = parameter_layout(ckpt.config);
  count = read_count("params");
  if (count != layout.size()) {
    corrupt(origin, "manifest lists " + std::to_string(count) + " parameters, model needs " +
                        std::to_string(layout.size()));
  }
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) corrupt(origin, "truncated manifest");
    std::istringstream fields(line);
    std::string name, shape_text;
    std::size_t offset = 0;
    if (!(fields >> name >> shape_text >> offset)) corrupt(origin, "bad manifest line '" + line + "'");
    const auto shape = parse_sizes(shape_text, origin);
    if (name != layout[i].first || shape != layout[i].second) {
      corrupt(origin, "manifest entry '" + line + "' does not match expected " + layout[i].first + " " +
                          ad::to_string(layout[i].second));
    }
    if (offset != expected_offset) corrupt(origin, "unexpected byte offset for " + name);
    expected_offset += ad::numel(shape) * sizeof(double);
  }
  const std::size_t total = read_count("data");
  if (total != expected_offset) corrupt(origin, "data size does not match manifest");

  std::vector<unsigned char> bytes(total);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(total));
  if (static_cast<std::size_t>(in.gcount()) != total) corrupt(origin, "truncated data section");

  ckpt.params = ModelParams::zeros(ckpt.config);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    std::vector<double> values(ad::numel(layout[i].second));
    for (double& v : values) {
      v = get_double(bytes.data() + pos);
      pos += 8;
    }
    ckpt.params.set(i, ad::Tensor(layout[i].second, std::move(values)));
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  write_checkpoint(out, ckpt);
  out.flush();
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  return read_checkpoint(in, path);
}

}  // namespace splitpit
