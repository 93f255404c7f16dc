#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace nlap {

/// Writes through a sibling temporary file and renames it into place, so a
/// failed write never leaves a partial file at `path`.
void write_atomically(const std::filesystem::path& path, const std::function<void(const std::filesystem::path&)>& writer);

/// Same, for a text or binary stream writer.
void write_file_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer,
                           bool binary = false);

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Little-endian encoder for fixed-width scalars.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out_.write(reinterpret_cast<const char*>(bytes), sizeof(T));
  }

  void put_bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }

  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }

  template <typename T>
  void put_array(const T* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      put_bytes(data, n * sizeof(T));
    } else {
      for (std::size_t i = 0; i < n; ++i) put(data[i]);
    }
  }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  template <typename T>
  T get() {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char bytes[sizeof(T)];
    get_bytes(bytes, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }

  void get_bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError("unexpected end of file");
  }

  std::string get_string(std::size_t max_len = 1 << 20) {
    const auto n = get<std::uint32_t>();
    if (n > max_len) throw FormatError("string length out of range");
    std::string s(n, '\0');
    get_bytes(s.data(), n);
    return s;
  }

  template <typename T>
  void get_array(T* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      get_bytes(data, n * sizeof(T));
    } else {
      for (std::size_t i = 0; i < n; ++i) data[i] = get<T>();
    }
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace nlap
