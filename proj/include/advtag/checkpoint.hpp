#pragma once

// Model checkpoint container.
//
// Layout (all integers unsigned little-endian, reals IEEE-754 binary64
// little-endian, strings as u64 byte length followed by UTF-8 bytes):
//
//   magic      8 bytes  "ADVTAGCK"
//   version    u32      kCheckpointVersion
//   arch       u64 char_dim, char_hidden, word_dim, word_hidden, tag_count;
//              f64 dropout
//   scheme     string
//   vocab      words, chars, tags (u64 count + strings each);
//              word frequencies (u64 count + (string, i64) pairs);
//              char counts (u64 count + i64s); i64 unk word count
//   tables     words then chars: tensor, u64 count + f64 weights, u8 trainable
//   dense      u64 count, then (string name, tensor) per entry in
//              ModelParameters::dense_tensor_names() order
//
// A tensor is u64 rank, u64 extents, then f64 values in row-major order.
// Tables hold raw (un-normalized) embeddings.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "advtag/network.hpp"

namespace advtag {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_model(const Model& model, std::ostream& out);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(std::istream& in);
Model load_model(const std::filesystem::path& path);

}  // namespace advtag
