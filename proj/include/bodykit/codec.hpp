#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bodykit::codec {

/// Appends values as little-endian IEEE-754 binary64.
void append_f64(std::string& out, std::span<const double> values);
void append_u32(std::string& out, std::span<const std::uint32_t> values);

/// Reads `count` little-endian values starting at `pos`, advancing it.
std::vector<double> read_f64(std::string_view bytes, std::size_t& pos, std::size_t count);
std::vector<std::uint32_t> read_u32(std::string_view bytes, std::size_t& pos, std::size_t count);

std::string base64_encode(std::string_view bytes);
/// Throws FormatError on malformed input.
std::string base64_decode(std::string_view text);

std::string encode_f64(std::span<const double> values);
std::vector<double> decode_f64(std::string_view text);

std::string sha256_hex(std::string_view bytes);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::string& path, std::string_view contents);
std::string read_file(const std::string& path);

}  // namespace bodykit::codec
