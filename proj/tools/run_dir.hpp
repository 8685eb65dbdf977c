#pragma once

#include <filesystem>
#include <string>

namespace wproj::cli {

/// Output directory that appears under its final name only once complete.
///
/// Files are written into a hidden staging directory next to the final
/// location. commit() renames it into place; fail() replaces the contents
/// with a single FAILED marker and renames that instead, so the final path
/// never holds a partial artifact set.
class RunDirectory {
 public:
  /// `parent` is created if needed; the final name is `name`, with a numeric
  /// suffix when it already exists.
  RunDirectory(const std::filesystem::path& parent, const std::string& name);
  ~RunDirectory();

  RunDirectory(const RunDirectory&) = delete;
  RunDirectory& operator=(const RunDirectory&) = delete;

  /// Path inside the staging directory.
  std::filesystem::path file(const std::string& name) const { return staging_ / name; }
  const std::filesystem::path& final_path() const { return final_; }

  void commit();
  void fail(const std::string& message);

 private:
  std::filesystem::path staging_;
  std::filesystem::path final_;
  bool done_ = false;
};

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Current UTC time as YYYYMMDDTHHMMSSZ.
std::string utc_timestamp();

}  // namespace wproj::cli
