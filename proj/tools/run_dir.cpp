#include "run_dir.hpp"

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <random>
#include <system_error>

#include "wproj/error.hpp"

namespace wproj::cli {

namespace fs = std::filesystem;

RunDirectory::RunDirectory(const fs::path& parent, const std::string& name) {
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + parent.string() + "': " + ec.message());
  final_ = parent / name;
  for (int k = 2; fs::exists(final_); ++k) final_ = parent / (name + "-" + std::to_string(k));
  // The staging name only needs to avoid collisions with concurrent runs.
  std::random_device rd;
  staging_ = parent / (".staging-" + final_.filename().string() + "-" + std::to_string(rd()));
  fs::create_directory(staging_, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + staging_.string() + "': " + ec.message());
}

RunDirectory::~RunDirectory() {
  if (!done_) {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
}

void RunDirectory::commit() {
  std::error_code ec;
  fs::rename(staging_, final_, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot move run directory into place: " + ec.message());
  done_ = true;
}

void RunDirectory::fail(const std::string& message) {
  std::error_code ec;
  fs::remove_all(staging_, ec);
  fs::create_directory(staging_, ec);
  {
    std::ofstream out(staging_ / "FAILED");
    out << message << '\n';
  }
  fs::rename(staging_, final_, ec);
  if (ec) fs::remove_all(staging_, ec);
  done_ = true;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k, h >>= 4) out[k] = digits[h & 0xf];
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

}  // namespace wproj::cli
