#include "rsim/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace rsim {

void BinaryWriter::save(const std::filesystem::path& path) const {
  write_file_atomic(path, std::string_view(bytes_.data(), bytes_.size()));
}

BinaryReader::BinaryReader(std::vector<char> bytes, std::string_view magic, std::uint32_t version)
    : bytes_(std::move(bytes)) {
  if (bytes_.size() < 8 || std::string_view(bytes_.data(), 4) != magic)
    throw FormatError("not a '" + std::string(magic) + "' container");
  pos_ = 4;
  const auto v = get<std::uint32_t>();
  if (v != version)
    throw FormatError("unsupported '" + std::string(magic) + "' version " + std::to_string(v) + " (expected " +
                      std::to_string(version) + ")");
}

BinaryReader BinaryReader::open(const std::filesystem::path& path, std::string_view magic, std::uint32_t version) {
  return BinaryReader(read_file(path), magic, version);
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace rsim
