#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "spns/bytes.hpp"
#include "spns/crypto.hpp"

struct evp_md_ctx_st;

namespace spns {

inline constexpr std::size_t kCellSize = 512;
inline constexpr std::size_t kCellHeaderSize = 14;
inline constexpr std::size_t kCellPayloadSize = kCellSize - kCellHeaderSize; // 498
inline constexpr std::size_t kRelayHeaderSize = 9;
inline constexpr std::size_t kRelayBodyMax = kCellPayloadSize - kRelayHeaderSize; // 489

/// Bit 7 of the epoch byte marks a cell whose payload continues in the next
/// cell of the same (link, command); the low 7 bits carry the epoch value.
inline constexpr std::uint8_t kMoreFragments = 0x80;

enum class CellCommand : std::uint8_t {
    create = 1,
    created = 2,
    relay = 3,
    destroy = 4,
    ng_setup = 5,
    ng_setup_ack = 6,
};

std::string_view to_string(CellCommand cmd);

enum class DestroyReason : std::uint8_t {
    protocol = 1,
    crypto = 2,
    duplicate_link = 3,
    unknown_next_hop = 4,
    epoch_mismatch = 5,
    attestation_failure = 6,
    single_ran_rejected = 7,
    digest_mismatch = 8,
    replay = 9,
    finished = 10,
    link_exhaustion = 11,
    unknown_session = 12,
};

std::string_view to_string(DestroyReason reason);

struct Cell {
    std::uint32_t link_id = 0;
    CellCommand command = CellCommand::relay;
    std::uint16_t payload_len = 0;
    std::uint8_t epoch = 0;
    std::array<std::uint8_t, kCellPayloadSize> payload{};

    ByteView body() const { return ByteView(payload).first(payload_len); }
    bool more_fragments() const { return (epoch & kMoreFragments) != 0; }
    std::uint8_t epoch_value() const { return epoch & 0x7f; }

    static Cell make(std::uint32_t link_id, CellCommand command, ByteView body, std::uint8_t epoch = 0);
    static Cell destroy(std::uint32_t link_id, DestroyReason reason);

    friend bool operator==(const Cell&, const Cell&) = default;
};

using WireCell = std::array<std::uint8_t, kCellSize>;

/// link_id (4) ‖ command (1) ‖ payload_len (2) ‖ epoch (1) ‖ reserved (6) ‖ payload (498).
WireCell encode_cell(const Cell& cell);
/// Throws BadLength, UnknownCommand or NonzeroReserved. Bytes past
/// payload_len are treated as padding and zeroed.
Cell decode_cell(ByteView wire);

// ---------------------------------------------------------------------------
// Relay sub-header, carried inside the (layer-encrypted) RELAY payload:
// relay_cmd (1) ‖ recognized (2) ‖ digest (4) ‖ body_len (2) ‖ body (≤ 489)

enum class RelayCommand : std::uint8_t {
    extend = 1,
    extended = 2,
    data = 3,
    end = 4,
};

struct RelayHeader {
    RelayCommand relay_cmd = RelayCommand::data;
    std::uint16_t recognized = 0;
    std::array<std::uint8_t, 4> digest{};
    Bytes body;

    friend bool operator==(const RelayHeader&, const RelayHeader&) = default;
};

using RelayPayload = std::array<std::uint8_t, kCellPayloadSize>;

/// Throws BodyOverflow when the body exceeds 489 bytes.
RelayPayload encode_relay(const RelayHeader& header);
/// Structural parse without recognition; throws Malformed on an unknown
/// command or an impossible body length.
RelayHeader parse_relay(ByteView payload);

/// Running SHA-256 over every relay payload this hop originated or
/// recognized in one direction; its first four bytes are the relay digest.
class RunningDigest {
public:
    RunningDigest(const SessionKey& key, Direction direction);
    /// Plain link digest for the unencrypted master-RAN → core hop.
    explicit RunningDigest(ByteView seed);
    RunningDigest(const RunningDigest& other);
    RunningDigest(RunningDigest&& other) noexcept;
    RunningDigest& operator=(const RunningDigest& other);
    RunningDigest& operator=(RunningDigest&& other) noexcept;
    ~RunningDigest();

    /// Fills in recognized = 0 and the digest, committing to the running hash.
    void stamp(RelayPayload& payload);
    /// Recognition test. On success the running hash advances; on failure it
    /// is left untouched so that the cell can be forwarded.
    std::optional<RelayHeader> try_recognize(const RelayPayload& payload);

private:
    std::array<std::uint8_t, 4> digest_after(const RelayPayload& payload, evp_md_ctx_st* scratch) const;

    evp_md_ctx_st* ctx_ = nullptr;
};

/// Tor-style recognition: NotRecognized (nullopt) when recognized != 0 or the
/// digest does not match, telling the node to forward without interpreting.
std::optional<RelayHeader> decode_relay(const RelayPayload& payload, RunningDigest& digest);

/// Per-hop symmetric state shared by the UE and one RAN.
struct RelayCrypto {
    LayerCipherState forward;
    LayerCipherState backward;
    RunningDigest forward_digest;
    RunningDigest backward_digest;

    explicit RelayCrypto(const SessionKey& key);
};

// ---------------------------------------------------------------------------
// Fragmentation of messages larger than one relay body.

struct Fragment {
    std::uint32_t seq = 0;
    Bytes body;
};

/// ceil(len / 489) fragments, or a single empty fragment for an empty message.
std::vector<Fragment> fragment(ByteView message);
/// Throws MissingFragment when sequence numbers are not 0..n-1 in order.
Bytes reassemble(std::span<const Fragment> fragments);

/// Relay messages are framed as u32 length ‖ content and then fragmented.
Bytes frame_message(ByteView content);

/// Collects relay bodies of one length-framed message.
class MessageAssembler {
public:
    explicit MessageAssembler(std::size_t max_content = 64u << 20) : max_content_(max_content) {}

    /// Appends a relay body. Throws Malformed on overrun or oversize.
    void feed(ByteView body);
    bool header_known() const { return total_.has_value(); }
    std::size_t expected() const { return total_.value_or(0); }
    /// Content bytes received so far (excludes the 4-byte length prefix).
    const Bytes& content() const { return content_; }
    bool complete() const { return total_ && content_.size() == *total_; }
    Bytes take();
    bool idle() const { return !total_ && prefix_.empty(); }

private:
    std::size_t max_content_;
    Bytes prefix_;
    std::optional<std::size_t> total_;
    Bytes content_;
};

// ---------------------------------------------------------------------------
// Multi-cell trains for unencrypted commands (CREATE, CREATED, NG_SETUP, ...)

std::vector<Cell> make_train(std::uint32_t link_id, CellCommand command, ByteView payload, std::uint8_t epoch = 0);

class TrainAssembler {
public:
    explicit TrainAssembler(std::size_t max_bytes = 256 * 1024) : max_bytes_(max_bytes) {}

    /// Returns the full payload once the last cell of a train arrives.
    std::optional<Bytes> feed(std::uint64_t peer, const Cell& cell);
    void drop(std::uint64_t peer, std::uint32_t link_id);

private:
    struct Key {
        std::uint64_t peer;
        std::uint32_t link;
        CellCommand cmd;
        auto operator<=>(const Key&) const = default;
    };
    std::size_t max_bytes_;
    std::map<Key, Bytes> pending_;
};

} // namespace spns
