#pragma once

// Run manifest: every artifact in the output directory with its SHA-256.
// Requires linking OpenSSL::Crypto.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsto/errors.hpp"

namespace gsto::io {

inline std::string sha256_hex(const std::string& data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
    throw Error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[md[k] >> 4];
    out += hex[md[k] & 0xF];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline constexpr const char* kManifestName = "manifest.json";

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::uintmax_t bytes = 0;
  std::string sha256;
};

/// Lists every regular file under `dir` except the manifest itself, sorted by path.
inline std::vector<ManifestEntry> scan_artifacts(const std::filesystem::path& dir) {
  std::vector<ManifestEntry> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), dir).generic_string();
    if (rel == kManifestName) continue;
    out.push_back({rel, e.file_size(), sha256_hex(read_file(e.path()))});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return out;
}

struct RunInfo {
  std::string command;
  std::string config_path;
  std::string config_hash;
  std::string out_dir;
  std::string started_utc;
  double wall_seconds = 0.0;
  int exit_code = 0;
};

inline nlohmann::json write_manifest(const std::filesystem::path& dir, const RunInfo& info) {
  nlohmann::json m;
  m["schema"] = "gsto-manifest/1";
  m["command"] = info.command;
  m["config_path"] = info.config_path;
  m["config_sha256"] = info.config_hash;
  m["out_dir"] = info.out_dir;
  m["started_utc"] = info.started_utc;
  m["wall_seconds"] = info.wall_seconds;
  m["exit_code"] = info.exit_code;
  m["files"] = nlohmann::json::array();
  for (const auto& e : scan_artifacts(dir)) {
    m["files"].push_back({{"path", e.path}, {"bytes", e.bytes}, {"sha256", e.sha256}});
  }
  std::ofstream out(dir / kManifestName, std::ios::binary);
  if (!out) throw Error("cannot write manifest in " + dir.string());
  out << m.dump(2) << '\n';
  return m;
}

}  // namespace gsto::io
