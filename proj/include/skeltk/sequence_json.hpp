#pragma once

#include <filesystem>
#include <string>

#include "skeltk/sequence.hpp"

namespace skeltk {

// Document shape (see docs/formats.md):
// {
//   "format": "skeltk-sequence", "version": 1,
//   "label": int, "subject_id": int, "camera_id": int, "setup_id": int,
//   "source_id": string (optional),
//   "frames": [T][M][V][C] nested arrays of finite numbers
// }
// The loader pads M=1 documents to two body slots. Schema violations raise
// ParseError naming the offending field.
SkeletonSequence load_json_sequence(const std::string& text);
std::string write_json_sequence(const SkeletonSequence& seq);

SkeletonSequence load_sequence_file(const std::filesystem::path& path);
void save_sequence_file(const SkeletonSequence& seq, const std::filesystem::path& path);

}  // namespace skeltk
