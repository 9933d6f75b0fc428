#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <system_error>

namespace linewalk {

/// Shortest round-trip decimal form of a double; locale independent.
inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

/// Raised for unreadable/unwritable files; carries the path for the message.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::filesystem::path path)
      : std::runtime_error(what + ": " + path.string()), path_(std::move(path)) {}
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// Writes `content` to `path` (creating parent directories), throwing IoError on failure.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace linewalk
