#pragma once

#include "gsalign/gaussian_map.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gsalign {

/// Vertex properties written by save_map, in file order. f_rest_* are channel-major:
/// f_rest_{c * 15 + k - 1} holds SH coefficient k >= 1 of channel c.
const std::vector<std::string>& ply_property_names();

/// Writes a binary little-endian PLY with float properties.
void save_map(const std::filesystem::path& path, const GaussianMap& map);

/// Reads binary little-endian or ASCII PLY. Properties may be float or double and may
/// appear in any order; extra properties are ignored. Throws ParseError listing the
/// expected properties when any is missing.
GaussianMap load_map(const std::filesystem::path& path);

}  // namespace gsalign
