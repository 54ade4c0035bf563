#pragma once

#include <filesystem>

#include "vdscan/media.hpp"

namespace vdscan::detail {

/// Enforces the on-disk metadata invariants; throws CorruptHeader.
void validate_disk_meta(const VideoMeta& meta, const std::filesystem::path& source);

}  // namespace vdscan::detail
