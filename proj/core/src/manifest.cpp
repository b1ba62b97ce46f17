#include "hnmt/manifest.hpp"

#include "hnmt/tensor.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace hnmt {

std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 computation failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    const unsigned char b = digest[i];
    std::snprintf(buf, sizeof buf, "%02x", b);
    hex += buf;
  }
  return hex;
}

std::string git_blob_hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return git_blob_hash(ss.str());
}

void RunManifest::add_input(const std::filesystem::path& path) { inputs.emplace_back(path.string(), git_blob_hash_file(path)); }

std::string RunManifest::to_json() const {
  nlohmann::json in = nlohmann::json::array();
  for (const auto& [p, h] : inputs) in.push_back({{"path", p}, {"hash", h}});
  nlohmann::json j = {{"command", command}, {"config", config}, {"seed", seed},
                      {"inputs", in},       {"outputs", outputs}, {"wallclock", wallclock}};
  return j.dump(2);
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json() << "\n";
}

}  // namespace hnmt
