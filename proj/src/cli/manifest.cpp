#include "cli/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include "retrobleu/error.hpp"

namespace retrobleu::cli {

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["tool"] = "retrobleu";
  j["version"] = version;
  j["command"] = command;
  j["config"] = config;
  j["inputs"] = inputs;
  j["db"] = db ? nlohmann::ordered_json(*db) : nlohmann::ordered_json(nullptr);
  j["outputs"] = outputs;
  j["corpus_sha256"] = corpus_sha256;
  return j;
}

std::string fingerprint_files(std::span<const std::filesystem::path> files) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "cannot initialise SHA-256");
  }
  std::array<char, 1 << 16> buf;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot stat " + path.string());
    std::array<unsigned char, 8> len;
    for (int i = 0; i < 8; ++i) len[static_cast<std::size_t>(i)] = static_cast<unsigned char>(size >> (8 * i));
    EVP_DigestUpdate(ctx.get(), len.data(), len.size());
    while (in) {
      in.read(buf.data(), buf.size());
      if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    if (in.bad()) throw Error(ErrorCode::Io, "cannot read " + path.string());
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
  unsigned int digest_len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &digest_len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(digest_len * 2);
  for (unsigned int i = 0; i < digest_len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  return std::filesystem::path(output.string() + ".manifest.json");
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << manifest.to_json().dump(2) << '\n';
  if (!out.flush()) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

}  // namespace retrobleu::cli
