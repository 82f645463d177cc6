#pragma once

#include <string>

#include "rnnbench/model.hpp"

namespace rnnbench {

// Self-describing binary container. All integers and the real64 tensor
// payloads are little-endian; round-trips are bit-exact.
//
//   bytes 0..7   magic "RNNBENCH"
//   u32          format version (1)
//   u32          meta entry count, then per entry: u32 key length, key
//                bytes, i64 value
//   u32          tensor count, then per entry: u32 name length, name bytes,
//                u64 element count, elements as raw real64
void save_checkpoint(const std::string& path, const SequenceModel& model);
SequenceModel load_checkpoint(const std::string& path);

}  // namespace rnnbench
