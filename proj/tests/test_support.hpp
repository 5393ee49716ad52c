#pragma once

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>
#include <utility>

#include "avq/error.hpp"

namespace test_support {

// Runs `fn`, requires that it throws avq::Error, and returns the code.
template <typename Fn>
avq::ErrorCode thrown_code(Fn&& fn) {
  try {
    std::forward<Fn>(fn)();
  } catch (const avq::Error& e) {
    return e.code();
  }
  FAIL("expected an avq::Error");
  return avq::ErrorCode::IoFailure;
}

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("avq-test-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace test_support
