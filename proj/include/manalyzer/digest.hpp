#pragma once

#include "manalyzer/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>

namespace manalyzer::digest {

namespace detail {

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using MdCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

inline std::string to_hex(const unsigned char* bytes, unsigned int length) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(kHex[bytes[i] >> 4]);
        out.push_back(kHex[bytes[i] & 0x0f]);
    }
    return out;
}

}  // namespace detail

// Incremental SHA-256, hex output.
class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            fail(Errc::io_error, "cannot initialise sha256");
    }

    Sha256& update(std::string_view data) {
        EVP_DigestUpdate(ctx_.get(), data.data(), data.size());
        return *this;
    }

    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
        unsigned int length = 0;
        EVP_DigestFinal_ex(ctx_.get(), out.data(), &length);
        return detail::to_hex(out.data(), length);
    }

private:
    detail::MdCtx ctx_;
};

inline std::string sha256(std::string_view data) { return Sha256{}.update(data).hex(); }

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_error, "cannot read " + path.string());
    Sha256 hasher;
    std::array<char, 1 << 15> buffer{};
    while (in) {
        in.read(buffer.data(), buffer.size());
        hasher.update(std::string_view(buffer.data(), static_cast<size_t>(in.gcount())));
    }
    return hasher.hex();
}

}  // namespace manalyzer::digest
