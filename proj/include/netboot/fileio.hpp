#pragma once

// Atomic file output: content goes to a sibling temporary file that is renamed over the
// destination, so readers never observe a partially written artifact.

#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include "netboot/error.hpp"

namespace netboot::io {

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw InvalidArgument("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw InvalidArgument("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

/// Runs `writer` against an in-memory stream and stores the result atomically.
inline void write_atomic(const std::filesystem::path& path,
                         const std::function<void(std::ostream&)>& writer) {
  std::ostringstream buffer;
  writer(buffer);
  write_file_atomic(path, buffer.str());
}

}  // namespace netboot::io
