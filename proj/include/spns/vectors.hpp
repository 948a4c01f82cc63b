#pragma once

#include <string>
#include <vector>

#include "spns/bytes.hpp"
#include "spns/crypto.hpp"

namespace spns {

struct GoldenVector {
    std::string name;
    Bytes bytes;
};

/// Fixed RSA-2048 public key used wherever a golden vector needs an onion key.
OnionPublicKey fixed_onion_public_key();

/// Wire encodings built only from fixed inputs: cells, relay payloads under
/// a fixed key, a signed descriptor and an NSI URN.
std::vector<GoldenVector> golden_vectors();

/// Writes <name>.hex files (lowercase hex plus newline) into dir.
void write_golden_vectors(const std::string& dir);

} // namespace spns
