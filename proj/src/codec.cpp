#include "bodykit/codec.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bodykit/errors.hpp"

namespace bodykit::codec {

namespace {

template <class U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) r = (r << 8) | ((v >> (8 * i)) & 0xff);
    return r;
  }
}

template <class T, class U>
void append_raw(std::string& out, std::span<const T> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const U bits = to_little(std::bit_cast<U>(values[i]));
    std::memcpy(out.data() + start + i * sizeof(T), &bits, sizeof(T));
  }
}

template <class T, class U>
std::vector<T> read_raw(std::string_view bytes, std::size_t& pos, std::size_t count) {
  if (count > (bytes.size() - std::min(pos, bytes.size())) / sizeof(T))
    throw FormatError("", "unexpected end of data");
  std::vector<T> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    U bits;
    std::memcpy(&bits, bytes.data() + pos + i * sizeof(T), sizeof(T));
    out[i] = std::bit_cast<T>(to_little(bits));
  }
  pos += count * sizeof(T);
  return out;
}

}  // namespace

void append_f64(std::string& out, std::span<const double> values) {
  append_raw<double, std::uint64_t>(out, values);
}

void append_u32(std::string& out, std::span<const std::uint32_t> values) {
  append_raw<std::uint32_t, std::uint32_t>(out, values);
}

std::vector<double> read_f64(std::string_view bytes, std::size_t& pos, std::size_t count) {
  return read_raw<double, std::uint64_t>(bytes, pos, count);
}

std::vector<std::uint32_t> read_u32(std::string_view bytes, std::size_t& pos, std::size_t count) {
  return read_raw<std::uint32_t, std::uint32_t>(bytes, pos, count);
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw FormatError("", "base64 length is not a multiple of 4");
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw FormatError("", "invalid base64");
  std::size_t len = static_cast<std::size_t>(n);
  // EVP_DecodeBlock keeps the padding bytes.
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

std::string encode_f64(std::span<const double> values) {
  std::string raw;
  append_f64(raw, values);
  return base64_encode(raw);
}

std::vector<double> decode_f64(std::string_view text) {
  const std::string raw = base64_decode(text);
  if (raw.size() % 8 != 0) throw FormatError("", "byte length is not a multiple of 8");
  std::size_t pos = 0;
  return read_f64(raw, pos, raw.size() / 8);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open '" + tmp + "' for writing");
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw Error("write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace bodykit::codec
