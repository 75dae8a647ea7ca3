#pragma once

#include <string>
#include <utility>

#include "headbias/model.hpp"

namespace headbias {

// Checkpoint file layout (all integers little-endian u32 unless noted,
// all parameters IEEE-754 binary64 little-endian):
//
//   offset 0   magic "HBCP" (4 bytes)
//   4          format version (currently 1)
//   8          class_count
//   12         input_dim
//   16         feature_dim
//   20         extractor layer count L
//   24         extractor frozen flag (1 byte, 0 or 1)
//   25         for each layer l = 0..L-1:
//                u32 out_dim, u32 in_dim,
//                f64 w[out_dim * in_dim] row-major, f64 b[out_dim]
//   ...        head: f64 w[class_count * feature_dim] row-major,
//                    f64 b[class_count]
//
// Malformed files raise FormatError carrying the byte offset at which
// reading failed.

void save_checkpoint(const std::string& path, const Classifier& model);

Classifier load_checkpoint(const std::string& path);

// Reads only the head (plus dimensions); used by audit and bias-dump, which
// never need the extractor.
std::pair<ClassificationHead, std::size_t> load_checkpoint_head(const std::string& path);

}  // namespace headbias
