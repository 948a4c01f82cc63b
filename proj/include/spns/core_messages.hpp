#pragma once

#include <array>
#include <cstdint>

#include "spns/bytes.hpp"
#include "spns/cells.hpp"
#include "spns/directory.hpp"

namespace spns {

/// Context the master RAN attaches to each uplink message it hands the core.
struct CoreInfoRecord {
    std::array<std::uint8_t, 16> ue_identifier{};
    std::array<std::uint8_t, 8> bearer_context{};
    std::int32_t signal_quality = 0;
    std::array<std::uint8_t, 16> security_parameters{};
    std::uint64_t timestamp = 0;
    std::uint64_t uplink_packets = 0;
    std::uint64_t downlink_packets = 0;

    Bytes serialize() const;
    /// Throws MalformedInfo.
    static CoreInfoRecord deserialize(ByteView wire);

    friend bool operator==(const CoreInfoRecord&, const CoreInfoRecord&) = default;
};

namespace tags {
enum NgSetup : std::uint8_t { ng_e_ran = 1, ng_nssai = 2, ng_id_core = 3 };
enum CoreHeader : std::uint8_t { core_id = 1, core_info = 2 };
} // namespace tags

/// The master RAN to core link carries plain relay cells; their digest is
/// seeded from the link id so both ends agree without a handshake.
RunningDigest core_link_digest(std::uint32_t link_id);

/// Content of a core-bound uplink message before the data bytes:
/// u16 header length ‖ TLV(ID_CORE) ‖ TLV(info_core).
Bytes core_message_prefix(ByteView id_core, const CoreInfoRecord& info);

struct CoreMessage {
    Bytes id_core;
    CoreInfoRecord info;
    Bytes data;
};

/// Throws MalformedInfo.
CoreMessage parse_core_message(ByteView content);

struct NgSetupRequest {
    std::vector<HybridEnvelope> envelopes;
    Nssai nssai;
    Bytes id_core;

    Bytes serialize() const;
    /// Throws Malformed.
    static NgSetupRequest deserialize(ByteView wire);
};

} // namespace spns
