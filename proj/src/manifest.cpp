#include "snowflake/manifest.hpp"

#include <array>
#include <cstdio>
#include <memory>

#include <openssl/evp.h>

#include "snowflake/common.hpp"

namespace snowflake {

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1)
    throw NumericError("sha1 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string canonical_json(const nlohmann::json& j) { return j.dump(); }

RunManifest RunManifest::make(std::string command, std::string config_path, nlohmann::json effective_config,
                              std::uint64_t seed) {
  RunManifest m;
  m.command = std::move(command);
  m.config_path = std::move(config_path);
  m.config = std::move(effective_config);
  m.config_hash = git_blob_sha1(canonical_json(nlohmann::json{{"command", m.command}, {"config", m.config}}));
  m.seed = seed;
  return m;
}

void to_json(nlohmann::json& j, const RunManifest& m) {
  j = nlohmann::json{{"command", m.command},     {"config_path", m.config_path}, {"config_hash", m.config_hash},
                     {"outputs", m.outputs},     {"seed", m.seed},               {"config", m.config}};
}

}  // namespace snowflake
