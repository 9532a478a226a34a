#include "manifest.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include <openssl/evp.h>

#include "crpsreg/error.hpp"

#ifndef CRPSREG_VERSION
#define CRPSREG_VERSION "0.0.0"
#endif

namespace crpsreg::cli {

std::string git_blob_sha1(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest.data(), &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

RunManifest::RunManifest(std::string command)
    : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

void RunManifest::set_config(const std::string& key, nlohmann::json value) {
  config_[key] = std::move(value);
}

void RunManifest::add_input(const std::string& name, std::string_view bytes) {
  inputs_[name] = git_blob_sha1(bytes);
  input_bytes_ += name;
  input_bytes_ += '\n';
  input_bytes_.append(bytes);
}

void RunManifest::set_result(const std::string& key, nlohmann::json value) {
  results_[key] = std::move(value);
}

std::string RunManifest::input_hash() const {
  // Keys of a json object serialize in sorted order.
  const std::string config = config_.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  return git_blob_sha1(command_ + '\n' + config + '\n' + std::to_string(seed_) + '\n' +
                       input_bytes_);
}

void RunManifest::write(const std::filesystem::path& dir) const {
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  nlohmann::json j;
  j["tool"] = "crpsreg";
  j["tool_version"] = CRPSREG_VERSION;
  j["command"] = command_;
  j["config"] = config_;
  j["inputs"] = inputs_;
  j["input_hash"] = input_hash();
  j["master_seed"] = seed_;
  j["threads"] = threads_;
  j["results"] = results_;
  j["wall_clock_seconds"] = seconds;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw Error("cannot write " + (dir / "manifest.json").string());
  os << j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
}

}  // namespace crpsreg::cli
