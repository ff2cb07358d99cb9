#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "splitpit/model.hpp"
#include "splitpit/vocab.hpp"

namespace splitpit {

inline constexpr std::string_view kCheckpointMagic = "SPLITPIT1";

struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
  ModelParams params;
};

// Layout: a text manifest followed by raw little-endian float64 arrays.
//
//   SPLITPIT1
//   config embed=32 hidden=64 filters=24 widths=3,4,5 classifier_hidden=0 max_source_len=128
//   vocab <N>
//   <one token per line, N lines>
//   params <P>
//   <name> <d0,d1> <byte offset into the data section>   (P lines)
//   data <total bytes>
//   <binary data>
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in, const std::string& origin = "<stream>");

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace splitpit
