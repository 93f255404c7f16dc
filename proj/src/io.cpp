#include "nlap/io.hpp"

#include <fstream>
#include <system_error>

namespace nlap {

namespace fs = std::filesystem;

void write_atomically(const fs::path& path, const std::function<void(const fs::path&)>& writer) {
  fs::path tmp = path;
  tmp += ".tmp";
  try {
    writer(tmp);
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

void write_file_atomically(const fs::path& path, const std::function<void(std::ostream&)>& writer, bool binary) {
  write_atomically(path, [&](const fs::path& tmp) {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    writer(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  });
}

}  // namespace nlap
