#pragma once

#include <filesystem>

#include "ecg/model.hpp"

namespace ecg {

// On-disk model format:
//   bytes 0-3   ASCII "ECGM"
//   u32 LE      version (currently 1)
//   u64 LE      header byte length
//   header      UTF-8 JSON {arch, input_length, label_names, tensors:
//               [{name, shape, byte_offset, byte_len}]}
//   payload     raw little-endian IEEE-754 f32 tensors in manifest order,
//               byte_offset relative to the payload start
// Save -> load round trips are bit-identical.
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace ecg
