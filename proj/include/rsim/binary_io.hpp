#pragma once

// Minimal little-endian binary container used by snapshots, datasets and
// policy checkpoints. Each file starts with a 4-byte magic tag and a u32
// format version; the remaining layout is defined by the writer of each type.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace rsim {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BinaryWriter {
 public:
  BinaryWriter(std::string_view magic, std::uint32_t version) {
    if (magic.size() != 4) throw std::invalid_argument("magic must be 4 bytes");
    bytes_.insert(bytes_.end(), magic.begin(), magic.end());
    put(version);
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put_vector(const std::vector<T>& v) {
    put<std::uint64_t>(v.size());
    const auto* p = reinterpret_cast<const char*>(v.data());
    bytes_.insert(bytes_.end(), p, p + v.size() * sizeof(T));
  }

  void put_string(std::string_view s) {
    put<std::uint64_t>(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  const std::vector<char>& bytes() const noexcept { return bytes_; }

  /// Writes to a temporary sibling and renames, so readers never observe a
  /// partial file.
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<char> bytes_;
};

class BinaryReader {
 public:
  BinaryReader(std::vector<char> bytes, std::string_view magic, std::uint32_t version);
  static BinaryReader open(const std::filesystem::path& path, std::string_view magic, std::uint32_t version);

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  std::vector<T> get_vector() {
    const auto n = get<std::uint64_t>();
    if (n > (bytes_.size() - pos_) / (sizeof(T) == 0 ? 1 : sizeof(T))) throw FormatError("truncated vector");
    std::vector<T> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(T));
    pos_ += n * sizeof(T);
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  void expect_end() const {
    if (!at_end()) throw FormatError("trailing bytes in container");
  }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) throw FormatError("unexpected end of container");
  }

  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace rsim
