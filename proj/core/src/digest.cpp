#include "classnet/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>

#include "classnet/error.hpp"

namespace classnet {

namespace {

struct MdCtx {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  ~MdCtx() { EVP_MD_CTX_free(ctx); }
};

std::string hex(const unsigned char* p, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (unsigned i = 0; i < n; ++i) {
    out.push_back(digits[p[i] >> 4]);
    out.push_back(digits[p[i] & 0xf]);
  }
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  MdCtx md;
  std::array<unsigned char, EVP_MAX_MD_SIZE> buf{};
  unsigned len = 0;
  if (!md.ctx || EVP_DigestInit_ex(md.ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(md.ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(md.ctx, buf.data(), &len) != 1) {
    throw Error("sha256 failed");
  }
  return hex(buf.data(), len);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  MdCtx md;
  if (!md.ctx || EVP_DigestInit_ex(md.ctx, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  std::array<char, 1 << 16> chunk{};
  while (in) {
    in.read(chunk.data(), chunk.size());
    if (in.gcount() > 0 && EVP_DigestUpdate(md.ctx, chunk.data(), static_cast<std::size_t>(in.gcount())) != 1) {
      throw Error("sha256 failed");
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> buf{};
  unsigned len = 0;
  if (EVP_DigestFinal_ex(md.ctx, buf.data(), &len) != 1) throw Error("sha256 failed");
  return hex(buf.data(), len);
}

}  // namespace classnet
