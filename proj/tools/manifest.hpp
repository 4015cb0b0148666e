#pragma once

// Run manifests: config hash, input hashes and tool version, written into
// every output directory.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "granum/error.hpp"

namespace granum::tool {

inline constexpr const char* kVersion = "0.1.0";

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  }
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  void update(std::string_view s) { update(s.data(), s.size()); }
  void update_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::array<char, 1 << 16> buf{};
    while (in) {
      in.read(buf.data(), buf.size());
      update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
    std::string out;
    char b[3];
    for (unsigned i = 0; i < len; ++i) {
      std::snprintf(b, sizeof b, "%02x", md[i]);
      out += b;
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string sha256_of(std::string_view s) {
  Sha256 h;
  h.update(s);
  return h.hex();
}

/// A file hashes its bytes; a directory hashes its sorted relative paths and
/// the bytes of every regular file below it.
inline std::string sha256_of_path(const std::filesystem::path& p) {
  namespace fs = std::filesystem;
  Sha256 h;
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), p));
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      h.update(f.generic_string());
      h.update(std::string_view("\0", 1));
      h.update_file(p / f);
    }
  } else {
    h.update_file(p);
  }
  return h.hex();
}

/// Sets the "run" entry of dir/manifest.json, keeping any other keys a stage
/// already wrote there.
inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const nlohmann::ordered_json& config, const std::vector<std::filesystem::path>& inputs) {
  nlohmann::ordered_json run;
  run["tool"] = "granum";
  run["version"] = kVersion;
  run["command"] = command;
  run["config_sha256"] = sha256_of(config.dump());
  run["config"] = config;
  nlohmann::ordered_json ins = nlohmann::ordered_json::array();
  for (const auto& p : inputs) ins.push_back({{"path", p.generic_string()}, {"sha256", sha256_of_path(p)}});
  run["inputs"] = std::move(ins);

  const auto path = dir / "manifest.json";
  nlohmann::ordered_json manifest = nlohmann::ordered_json::object();
  if (std::ifstream in(path); in) {
    try {
      auto existing = nlohmann::ordered_json::parse(in);
      if (existing.is_object()) manifest = std::move(existing);
    } catch (const nlohmann::json::parse_error&) {
    }
  }
  manifest["run"] = std::move(run);
  std::ofstream out(path, std::ios::binary);
  out << manifest.dump(2) << '\n';
}

}  // namespace granum::tool
