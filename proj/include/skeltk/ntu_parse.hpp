#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "skeltk/sequence.hpp"

namespace skeltk {

// Metadata decoded from the SsssCcccPpppRrrrAaaa filename pattern.
// action is the 0-based class index (Aaaa minus one).
struct NtuFileMeta {
  int setup = 0;
  int camera = 0;
  int performer = 0;
  int replication = 0;
  int action = 0;
};

// Decodes e.g. "S001C001P001R001A043" (an extension, if present, is ignored).
NtuFileMeta parse_ntu_filename(std::string_view name);

// Parses the NTU skeleton text format: a frame-count line, then per frame a
// body count, and per body an info line, a joint-count line, and one
// coordinate row per joint. Keeps the first two bodies, zero-pads to M=2,
// takes the first three values (x y z) of each joint row.
SkeletonSequence parse_ntu_skeleton_file(std::string_view text, const NtuFileMeta& meta);

// Reads the file and derives metadata from its stem.
SkeletonSequence load_ntu_skeleton_file(const std::filesystem::path& path);

}  // namespace skeltk
