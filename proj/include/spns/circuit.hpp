#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "spns/cells.hpp"
#include "spns/crypto.hpp"
#include "spns/directory.hpp"
#include "spns/nsi.hpp"
#include "spns/rng.hpp"

namespace spns {

using UeIdentity = std::array<std::uint8_t, 16>;

/// Per-hop metadata block carried in the hop's own onion layer.
struct InfoRecord {
    Nssai nssai;
    Bytes slice_part_id;
    std::array<std::uint8_t, 8> bearer_context{};
    std::array<std::uint8_t, 16> security_info{};
    std::array<std::uint8_t, 8> rrc_config{};
    UeIdentity ue_identity{};
    std::uint64_t timestamp = 0;
    std::uint64_t seqnum = 0;
    std::uint8_t packet_type = 0;

    Bytes serialize() const;
    /// Throws MalformedInfo.
    static InfoRecord deserialize(ByteView wire);

    friend bool operator==(const InfoRecord&, const InfoRecord&) = default;
};

inline constexpr std::uint8_t kPacketTypeUserData = 1;

/// Target core hint: core address ‖ epoch ‖ core-key fingerprint (24 bytes).
struct TCore {
    Address core_address;
    std::uint64_t epoch = 0;
    std::array<std::uint8_t, 8> core_key_fingerprint{};

    static constexpr std::size_t kSize = 24;
    Bytes serialize() const;
    static TCore deserialize(ByteView wire);
    static TCore from_snapshot(const DirectorySnapshot& snapshot);
};

/// Plaintext of C_Core: T_core followed by the slice request the master RAN
/// forwards in its NG setup (NSSAI and the core's NSI segment).
struct CoreHint {
    TCore t_core;
    Nssai nssai;
    Bytes id_core;

    Bytes serialize() const;
    static CoreHint deserialize(ByteView wire);
};

/// Innermost-layer fields the last hop hands to the core.
struct TerminalPayload {
    Address core_address;
    Bytes id_core;
    Bytes data;

    Bytes serialize() const;
    /// Throws MalformedInfo.
    static TerminalPayload deserialize(ByteView wire);
};

// TLV tags of the handshake messages.
namespace tags {
enum Create : std::uint8_t { create_c_hop = 1, create_c_core = 2, create_e_ran = 3 };
enum Created : std::uint8_t { created_half_key = 1, created_confirm = 2, created_e_ran = 3 };
enum Extend : std::uint8_t { extend_address = 1, extend_c_hop = 2, extend_c_core = 3 };
} // namespace tags

enum class CircuitStatus { building, extending, established, failed, closed };

enum class CircuitEvent { hop_confirmed, confirm_mismatch, destroy_received, protocol_error, close_requested };

std::string_view to_string(CircuitStatus s);

/// The UE circuit state machine. Returns nullopt for transitions the
/// machine does not allow; final_hop says whether a confirmed hop was the last.
std::optional<CircuitStatus> circuit_transition(CircuitStatus from, CircuitEvent event, bool final_hop);

struct CircuitHop {
    RouterDescriptor descriptor;
    std::optional<DhKeyPair> pending_dh;
    std::optional<SessionKey> key;
    std::optional<RelayCrypto> crypto;
    std::array<std::uint8_t, 8> bearer_context{};
    std::array<std::uint8_t, 16> security_info{};
    std::array<std::uint8_t, 8> rrc_config{};
    UeIdentity ue_identity{};
};

struct CircuitConfig {
    UeIdentity ue_identity{};
    NsiId nsi;
    Nssai nssai;
    TCore t_core;
    const DhGroup* group = &DhGroup::modp2048();
    /// Test hook for the audit negative control: puts the real UE identity
    /// into every hop's info record instead of the circuit pseudonym.
    bool leak_identity_to_all_hops = false;
};

struct CircuitState {
    std::vector<CircuitHop> hops;
    std::uint32_t entry_link_id = 0;
    CircuitStatus status = CircuitStatus::building;
    NsiId nsi;
    std::uint64_t seq_counter = 0;

    CircuitConfig config;
    UeIdentity pseudonym{};
    /// Encrypted descriptors returned inside CREATED, kept for audit.
    std::vector<HybridEnvelope> returned_envelopes;

    /// Fresh circuit along the given path (entry first). Throws
    /// InvalidArgument on an empty path.
    static CircuitState create(std::vector<RouterDescriptor> path, CircuitConfig config, Rng& rng);
    /// Established circuit from already-negotiated hop keys, stream offsets
    /// at zero. Used to replay or test the data phase without a handshake.
    static CircuitState from_keys(std::vector<RouterDescriptor> path, const std::vector<SessionKey>& keys,
                                  CircuitConfig config, Rng& rng);

    std::size_t confirmed_hops() const;
    NsiPartition slices() const { return partition(nsi, hops.size()); }
    Bytes id_core() const { return slices().parts.back(); }
};

/// CREATE toward hops[0]: payload = TLV(C_hop = E_PK(g^x1)) [‖ TLV(C_core)
/// for a single-hop circuit]. Throws StateError if a CREATE is outstanding
/// or target is not the entry hop.
std::vector<Cell> build_create(CircuitState& circ, const RouterDescriptor& target, Rng& rng);

enum class CreatedOutcome { ignored, hop_established, circuit_established };

/// Completes the pending hop from a CREATED (or EXTENDED) payload. A payload
/// on a foreign link is ignored. Throws KeyConfirmMismatch (status -> failed).
CreatedOutcome handle_created(CircuitState& circ, std::uint32_t link_id, ByteView payload);

/// RELAY/EXTEND toward the last confirmed hop, body = TLV(address) ‖
/// TLV(C_hop) [‖ TLV(C_core) when next is the final hop].
std::vector<Cell> build_extend(CircuitState& circ, const RouterDescriptor& next, Rng& rng);

/// Relay payload addressed to hop `hop`: stamped with that hop's forward
/// digest, then layered from hop down to the entry.
RelayPayload seal_forward(CircuitState& circ, std::size_t hop, const RelayHeader& header);

/// Peels backward layers until some hop recognizes the payload. Throws
/// DigestMismatch if none does.
std::pair<std::size_t, RelayHeader> open_backward(CircuitState& circ, RelayPayload payload);

struct OnionMessage {
    /// Concatenated 498-byte relay payloads as they leave the UE.
    Bytes ciphertext;

    std::size_t cell_count() const { return ciphertext.size() / kCellPayloadSize; }
    std::vector<Cell> to_cells(std::uint32_t link_id) const;
};

/// E_K1(info_1 ‖ E_K2(info_2 ‖ ... ‖ ADDRESS_CORE ‖ ID_CORE ‖ data)). Each
/// layer begins with the hop's own length-framed info message in relay cells
/// that hop recognizes, followed by the next layer's cells. Throws
/// CircuitNotEstablished.
OnionMessage build_onion(CircuitState& circ, ByteView data, std::uint64_t timestamp);

struct PeeledLayer {
    InfoRecord info;
    /// Non-terminal hop: the next layer's ciphertext, bit-identical to what
    /// the UE produced. Terminal hop: serialized TerminalPayload.
    Bytes inner;
    bool terminal = false;
};

/// One hop's view: decrypts with its forward stream, consumes the cells it
/// recognizes and returns the rest. Throws DigestMismatch or MalformedInfo.
PeeledLayer peel_layer(RelayCrypto& hop, ByteView layer_ciphertext);

/// Parses the content of a hop's own data message: u16 info length ‖ info
/// ‖ tail. Throws MalformedInfo.
std::pair<InfoRecord, Bytes> parse_layer_message(ByteView content);

} // namespace spns
