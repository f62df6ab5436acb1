#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cigauge/multiplexing.hpp"

namespace cigauge {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitNumerical = 4,
  kExitDimension = 5,
};

// Entry point of the command-line tool. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// System tag parser shared with the bindings:
// impulse | box:L | flutter:CODE | kernel1d:FILE | kernel2d:FILE |
// scaled-id:S | lf-mura:P | disc:D. `geom` is the patch layout, used by the
// 2-D kernels and as the length of the 1-D ones.
MultiplexSystem parse_system(std::string_view tag, const PatchGeometry& geom);

// "a:b" (log-spaced, `points` values, or "a:b:n") or a comma list.
std::vector<double> parse_real_range(std::string_view text, std::size_t points);
// "a:b" (inclusive integers, optional ":step") or a comma list.
std::vector<std::size_t> parse_int_grid(std::string_view text);
// "8x8" or a bare side length.
PatchGeometry parse_patch(std::string_view text);

// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace cigauge
