#pragma once

#include <string>
#include <string_view>

namespace evgw {

inline constexpr int kDefaultKdfIterations = 10000;

/// Salted PBKDF2-HMAC-SHA256 digest in the form
/// `pbkdf2-sha256$<iterations>$<salt hex>$<hash hex>`.
std::string make_password_digest(std::string_view password, int iterations = kDefaultKdfIterations);

/// False for a wrong password and for an unparseable digest.
bool verify_password(std::string_view digest, std::string_view password);

bool is_well_formed_digest(std::string_view digest);

}  // namespace evgw
