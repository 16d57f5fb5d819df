#pragma once

// Shared framing for the .traj / .koop / .cyc files: an optional magic line,
// one line of JSON, then raw little-endian float64 blocks.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cycloop/matrix.hpp"

namespace cycloop::detail {

void write_header(std::ostream& out, std::string_view magic, const nlohmann::json& header);
void write_f64(std::ostream& out, std::span<const double> values);

// Reads the magic line (when non-empty) and the JSON header line.
nlohmann::json read_header(std::istream& in, std::string_view magic, const std::string& what);

// Reads exactly `count` values; FormatError names expected vs actual bytes.
Vector read_f64(std::istream& in, std::size_t count, const std::string& what);

// Bytes left between the current position and the end of the stream.
std::size_t remaining_bytes(std::istream& in);

std::ofstream open_for_write(const std::filesystem::path& path);
std::ifstream open_for_read(const std::filesystem::path& path);

}  // namespace cycloop::detail
