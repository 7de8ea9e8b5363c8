#include "evgw/password.hpp"

#include <array>
#include <charconv>
#include <optional>
#include <stdexcept>
#include <vector>

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

namespace evgw {

namespace {

constexpr std::string_view kScheme = "pbkdf2-sha256";
constexpr std::size_t kSaltBytes = 16;
constexpr std::size_t kHashBytes = 32;

std::string to_hex(const unsigned char* data, std::size_t size) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(size * 2);
    for (std::size_t i = 0; i < size; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0x0f]);
    }
    return out;
}

std::optional<std::vector<unsigned char>> from_hex(std::string_view text) {
    if (text.size() % 2 != 0) return std::nullopt;
    std::vector<unsigned char> out(text.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        unsigned value = 0;
        auto [ptr, ec] = std::from_chars(text.data() + 2 * i, text.data() + 2 * i + 2, value, 16);
        if (ec != std::errc{} || ptr != text.data() + 2 * i + 2) return std::nullopt;
        out[i] = static_cast<unsigned char>(value);
    }
    return out;
}

std::array<unsigned char, kHashBytes> derive(std::string_view password, const unsigned char* salt,
                                             std::size_t salt_size, int iterations) {
    std::array<unsigned char, kHashBytes> hash{};
    if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()), salt,
                          static_cast<int>(salt_size), iterations, EVP_sha256(),
                          static_cast<int>(hash.size()), hash.data()) != 1) {
        throw std::runtime_error("PBKDF2 derivation failed");
    }
    return hash;
}

struct ParsedDigest {
    int iterations = 0;
    std::vector<unsigned char> salt;
    std::vector<unsigned char> hash;
};

std::optional<ParsedDigest> parse(std::string_view digest) {
    std::array<std::string_view, 4> parts;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto sep = digest.find('$');
        if (i + 1 < parts.size()) {
            if (sep == std::string_view::npos) return std::nullopt;
            parts[i] = digest.substr(0, sep);
            digest.remove_prefix(sep + 1);
        } else {
            if (sep != std::string_view::npos) return std::nullopt;
            parts[i] = digest;
        }
    }
    if (parts[0] != kScheme) return std::nullopt;

    ParsedDigest out;
    auto [ptr, ec] = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), out.iterations);
    if (ec != std::errc{} || ptr != parts[1].data() + parts[1].size() || out.iterations < 1) {
        return std::nullopt;
    }
    auto salt = from_hex(parts[2]);
    auto hash = from_hex(parts[3]);
    if (!salt || salt->empty() || !hash || hash->size() != kHashBytes) return std::nullopt;
    out.salt = std::move(*salt);
    out.hash = std::move(*hash);
    return out;
}

}  // namespace

std::string make_password_digest(std::string_view password, int iterations) {
    if (iterations < 1) throw std::invalid_argument("iterations must be positive");
    std::array<unsigned char, kSaltBytes> salt{};
    if (RAND_bytes(salt.data(), static_cast<int>(salt.size())) != 1) {
        throw std::runtime_error("RAND_bytes failed");
    }
    const auto hash = derive(password, salt.data(), salt.size(), iterations);
    return std::string(kScheme) + '$' + std::to_string(iterations) + '$' +
           to_hex(salt.data(), salt.size()) + '$' + to_hex(hash.data(), hash.size());
}

bool verify_password(std::string_view digest, std::string_view password) {
    const auto parsed = parse(digest);
    if (!parsed) return false;
    const auto hash = derive(password, parsed->salt.data(), parsed->salt.size(), parsed->iterations);
    return CRYPTO_memcmp(hash.data(), parsed->hash.data(), hash.size()) == 0;
}

bool is_well_formed_digest(std::string_view digest) { return parse(digest).has_value(); }

}  // namespace evgw
