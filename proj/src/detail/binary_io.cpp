#include "detail/binary_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "cycloop/error.hpp"

namespace cycloop::detail {

namespace {

constexpr std::size_t kMaxHeaderBytes = 1 << 20;

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
}

}  // namespace

void write_header(std::ostream& out, std::string_view magic, const nlohmann::json& header) {
  if (!magic.empty()) out << magic << '\n';
  out << header.dump() << '\n';
}

void write_f64(std::ostream& out, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (double v : values) {
      const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
}

nlohmann::json read_header(std::istream& in, std::string_view magic, const std::string& what) {
  std::string line;
  if (!magic.empty()) {
    if (!std::getline(in, line) || line != magic) {
      throw FormatError(what + ": missing magic \"" + std::string(magic) + "\"");
    }
  }
  if (!std::getline(in, line) || line.size() > kMaxHeaderBytes) {
    throw FormatError(what + ": missing JSON header line");
  }
  try {
    auto header = nlohmann::json::parse(line);
    if (!header.is_object()) throw FormatError(what + ": header is not a JSON object");
    return header;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(what + ": malformed header: " + e.what());
  }
}

std::size_t remaining_bytes(std::istream& in) {
  const auto here = in.tellg();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  return static_cast<std::size_t>(end - here);
}

Vector read_f64(std::istream& in, std::size_t count, const std::string& what) {
  Vector values(count);
  const auto want = static_cast<std::streamsize>(count * sizeof(double));
  in.read(reinterpret_cast<char*>(values.data()), want);
  if (in.gcount() != want) {
    throw FormatError(what + ": truncated payload, expected " + std::to_string(want) +
                      " bytes, got " + std::to_string(in.gcount()));
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (double& v : values) v = std::bit_cast<double>(to_little(std::bit_cast<std::uint64_t>(v)));
  }
  return values;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace cycloop::detail
