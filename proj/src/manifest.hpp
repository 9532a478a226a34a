#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace crpsreg::cli {

/// Git blob object id: SHA-1 of "blob <size>\0" followed by the bytes.
std::string git_blob_sha1(std::string_view bytes);

/// Record of one CLI run, written as manifest.json into the output directory.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  /// Echoed option; also part of the hashed input bytes.
  void set_config(const std::string& key, nlohmann::json value);
  /// File contents that enter the input hash.
  void add_input(const std::string& name, std::string_view bytes);
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void set_threads(unsigned threads) { threads_ = threads; }
  void set_result(const std::string& key, nlohmann::json value);

  std::string input_hash() const;
  void write(const std::filesystem::path& dir) const;

 private:
  std::string command_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json results_ = nlohmann::json::object();
  std::string input_bytes_;
  nlohmann::json inputs_ = nlohmann::json::object();
  std::uint64_t seed_ = 0;
  unsigned threads_ = 0;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace crpsreg::cli
