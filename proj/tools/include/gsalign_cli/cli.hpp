#pragma once

#include "gsalign/gaussian_map.hpp"
#include "gsalign/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gsalign::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (args[0] is the program name) and returns the exit code.
/// Normal output goes to `out`, diagnostics and usage text to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads a key=value config file into "--key value" arguments. '#' starts a comment.
/// Boolean values true/false turn into a bare "--key" or nothing.
std::vector<std::string> config_file_arguments(const std::string& path);

/// Scene for the backward benchmark: `n` splats whose footprints all cover the image
/// center, seen by an identity camera of the given size.
struct OverlapScene {
    GaussianMap map;
    Camera camera;
};
OverlapScene make_overlap_scene(int n, int size, std::uint64_t seed);

}  // namespace gsalign::cli
