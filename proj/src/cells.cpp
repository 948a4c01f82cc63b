#include "spns/cells.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstring>

namespace spns {

std::string_view to_string(CellCommand cmd)
{
    switch (cmd) {
    case CellCommand::create: return "CREATE";
    case CellCommand::created: return "CREATED";
    case CellCommand::relay: return "RELAY";
    case CellCommand::destroy: return "DESTROY";
    case CellCommand::ng_setup: return "NG_SETUP";
    case CellCommand::ng_setup_ack: return "NG_SETUP_ACK";
    }
    return "?";
}

std::string_view to_string(DestroyReason reason)
{
    switch (reason) {
    case DestroyReason::protocol: return "protocol";
    case DestroyReason::crypto: return "crypto";
    case DestroyReason::duplicate_link: return "duplicate_link";
    case DestroyReason::unknown_next_hop: return "unknown_next_hop";
    case DestroyReason::epoch_mismatch: return "epoch_mismatch";
    case DestroyReason::attestation_failure: return "attestation_failure";
    case DestroyReason::single_ran_rejected: return "single_ran_rejected";
    case DestroyReason::digest_mismatch: return "digest_mismatch";
    case DestroyReason::replay: return "replay";
    case DestroyReason::finished: return "finished";
    case DestroyReason::link_exhaustion: return "link_exhaustion";
    case DestroyReason::unknown_session: return "unknown_session";
    }
    return "?";
}

Cell Cell::make(std::uint32_t link_id, CellCommand command, ByteView body, std::uint8_t epoch)
{
    if (body.size() > kCellPayloadSize) throw Error(ErrorCode::BadLength, "cell payload exceeds 498 bytes");
    Cell c;
    c.link_id = link_id;
    c.command = command;
    c.payload_len = static_cast<std::uint16_t>(body.size());
    c.epoch = epoch;
    std::copy(body.begin(), body.end(), c.payload.begin());
    return c;
}

Cell Cell::destroy(std::uint32_t link_id, DestroyReason reason)
{
    const std::uint8_t code = static_cast<std::uint8_t>(reason);
    return make(link_id, CellCommand::destroy, ByteView(&code, 1));
}

WireCell encode_cell(const Cell& cell)
{
    if (cell.payload_len > kCellPayloadSize) throw Error(ErrorCode::BadLength, "payload_len exceeds 498");
    WireCell w{};
    put_u32(w, cell.link_id);
    w[4] = static_cast<std::uint8_t>(cell.command);
    put_u16(std::span(w).subspan(5), cell.payload_len);
    w[7] = cell.epoch;
    std::copy_n(cell.payload.begin(), cell.payload_len, w.begin() + kCellHeaderSize);
    return w;
}

Cell decode_cell(ByteView wire)
{
    if (wire.size() != kCellSize) throw Error(ErrorCode::BadLength, "cell must be exactly 512 bytes");
    Cell c;
    c.link_id = get_u32(wire);
    const auto cmd = wire[4];
    if (cmd < 1 || cmd > 6) throw Error(ErrorCode::UnknownCommand, "command code " + std::to_string(cmd));
    c.command = static_cast<CellCommand>(cmd);
    c.payload_len = get_u16(wire.subspan(5));
    if (c.payload_len > kCellPayloadSize) throw Error(ErrorCode::BadLength, "payload_len exceeds 498");
    c.epoch = wire[7];
    for (std::size_t i = 8; i < kCellHeaderSize; ++i)
        if (wire[i] != 0) throw Error(ErrorCode::NonzeroReserved, "reserved header byte set");
    std::copy_n(wire.begin() + kCellHeaderSize, c.payload_len, c.payload.begin());
    return c;
}

// ---------------------------------------------------------------------------

RelayPayload encode_relay(const RelayHeader& header)
{
    if (header.body.size() > kRelayBodyMax) throw Error(ErrorCode::BodyOverflow, "relay body exceeds 489 bytes");
    RelayPayload p{};
    p[0] = static_cast<std::uint8_t>(header.relay_cmd);
    put_u16(std::span(p).subspan(1), header.recognized);
    std::copy(header.digest.begin(), header.digest.end(), p.begin() + 3);
    put_u16(std::span(p).subspan(7), static_cast<std::uint16_t>(header.body.size()));
    std::copy(header.body.begin(), header.body.end(), p.begin() + kRelayHeaderSize);
    return p;
}

RelayHeader parse_relay(ByteView payload)
{
    if (payload.size() != kCellPayloadSize) throw Error(ErrorCode::BadLength, "relay payload must be 498 bytes");
    RelayHeader h;
    const auto cmd = payload[0];
    if (cmd < 1 || cmd > 4) throw Error(ErrorCode::Malformed, "unknown relay command");
    h.relay_cmd = static_cast<RelayCommand>(cmd);
    h.recognized = get_u16(payload.subspan(1));
    std::copy_n(payload.begin() + 3, 4, h.digest.begin());
    const auto len = get_u16(payload.subspan(7));
    if (len > kRelayBodyMax) throw Error(ErrorCode::Malformed, "relay body length exceeds 489");
    h.body.assign(payload.begin() + kRelayHeaderSize, payload.begin() + kRelayHeaderSize + len);
    return h;
}

namespace {

EVP_MD_CTX* new_md()
{
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::CryptoFailure, "EVP_DigestInit_ex");
    return ctx;
}

constexpr std::array<std::uint8_t, 4> kZeroDigest{};

} // namespace

RunningDigest::RunningDigest(const SessionKey& key, Direction direction) : ctx_(new_md())
{
    static constexpr std::string_view fwd = "spns-digest-forward";
    static constexpr std::string_view bwd = "spns-digest-backward";
    auto label = direction == Direction::forward ? fwd : bwd;
    EVP_DigestUpdate(ctx_, key.key_bytes.data(), key.key_bytes.size());
    EVP_DigestUpdate(ctx_, label.data(), label.size());
}

RunningDigest::RunningDigest(ByteView seed) : ctx_(new_md())
{
    EVP_DigestUpdate(ctx_, seed.data(), seed.size());
}

RunningDigest::RunningDigest(const RunningDigest& other) : ctx_(EVP_MD_CTX_new())
{
    if (!ctx_ || EVP_MD_CTX_copy_ex(ctx_, other.ctx_) != 1) throw Error(ErrorCode::CryptoFailure, "EVP_MD_CTX_copy_ex");
}

RunningDigest::RunningDigest(RunningDigest&& other) noexcept : ctx_(other.ctx_)
{
    other.ctx_ = nullptr;
}

RunningDigest& RunningDigest::operator=(const RunningDigest& other)
{
    if (this != &other) {
        RunningDigest copy(other);
        std::swap(ctx_, copy.ctx_);
    }
    return *this;
}

RunningDigest& RunningDigest::operator=(RunningDigest&& other) noexcept
{
    std::swap(ctx_, other.ctx_);
    return *this;
}

RunningDigest::~RunningDigest()
{
    EVP_MD_CTX_free(ctx_);
}

std::array<std::uint8_t, 4> RunningDigest::digest_after(const RelayPayload& payload, EVP_MD_CTX* scratch) const
{
    if (EVP_MD_CTX_copy_ex(scratch, ctx_) != 1) throw Error(ErrorCode::CryptoFailure, "EVP_MD_CTX_copy_ex");
    EVP_DigestUpdate(scratch, payload.data(), 3);
    EVP_DigestUpdate(scratch, kZeroDigest.data(), kZeroDigest.size());
    EVP_DigestUpdate(scratch, payload.data() + 7, payload.size() - 7);
    EVP_MD_CTX* finisher = EVP_MD_CTX_new();
    if (!finisher || EVP_MD_CTX_copy_ex(finisher, scratch) != 1) throw Error(ErrorCode::CryptoFailure, "EVP_MD_CTX_copy_ex");
    std::array<std::uint8_t, 32> full{};
    EVP_DigestFinal_ex(finisher, full.data(), nullptr);
    EVP_MD_CTX_free(finisher);
    std::array<std::uint8_t, 4> out{};
    std::copy_n(full.begin(), 4, out.begin());
    return out;
}

void RunningDigest::stamp(RelayPayload& payload)
{
    payload[1] = 0;
    payload[2] = 0;
    EVP_MD_CTX* scratch = EVP_MD_CTX_new();
    auto d = digest_after(payload, scratch);
    std::copy(d.begin(), d.end(), payload.begin() + 3);
    std::swap(ctx_, scratch);
    EVP_MD_CTX_free(scratch);
}

std::optional<RelayHeader> RunningDigest::try_recognize(const RelayPayload& payload)
{
    if (payload[1] != 0 || payload[2] != 0) return std::nullopt;
    EVP_MD_CTX* scratch = EVP_MD_CTX_new();
    auto d = digest_after(payload, scratch);
    if (!constant_time_equal(d, ByteView(payload).subspan(3, 4))) {
        EVP_MD_CTX_free(scratch);
        return std::nullopt;
    }
    RelayHeader h;
    try {
        h = parse_relay(payload);
    } catch (...) {
        EVP_MD_CTX_free(scratch);
        throw;
    }
    std::swap(ctx_, scratch);
    EVP_MD_CTX_free(scratch);
    return h;
}

std::optional<RelayHeader> decode_relay(const RelayPayload& payload, RunningDigest& digest)
{
    return digest.try_recognize(payload);
}

RelayCrypto::RelayCrypto(const SessionKey& key)
    : forward(key, Direction::forward),
      backward(key, Direction::backward),
      forward_digest(key, Direction::forward),
      backward_digest(key, Direction::backward)
{
}

// ---------------------------------------------------------------------------

std::vector<Fragment> fragment(ByteView message)
{
    std::vector<Fragment> out;
    if (message.empty()) {
        out.push_back(Fragment{0, {}});
        return out;
    }
    out.reserve((message.size() + kRelayBodyMax - 1) / kRelayBodyMax);
    for (std::size_t off = 0; off < message.size(); off += kRelayBodyMax) {
        auto n = std::min(kRelayBodyMax, message.size() - off);
        out.push_back(Fragment{static_cast<std::uint32_t>(out.size()), Bytes(message.begin() + off, message.begin() + off + n)});
    }
    return out;
}

Bytes reassemble(std::span<const Fragment> fragments)
{
    Bytes out;
    std::uint32_t expected = 0;
    for (const auto& f : fragments) {
        if (f.seq != expected) throw Error(ErrorCode::MissingFragment, "fragment " + std::to_string(expected) + " missing");
        if (f.body.size() > kRelayBodyMax) throw Error(ErrorCode::BodyOverflow, "fragment exceeds 489 bytes");
        append(out, f.body);
        ++expected;
    }
    if (expected == 0) throw Error(ErrorCode::MissingFragment, "no fragments");
    return out;
}

Bytes frame_message(ByteView content)
{
    ByteWriter w(4 + content.size());
    w.u32(static_cast<std::uint32_t>(content.size()));
    w.raw(content);
    return std::move(w).take();
}

void MessageAssembler::feed(ByteView body)
{
    std::size_t i = 0;
    while (!total_ && i < body.size()) {
        prefix_.push_back(body[i++]);
        if (prefix_.size() == 4) {
            total_ = get_u32(prefix_);
            if (*total_ > max_content_) throw Error(ErrorCode::Malformed, "relay message too large");
            content_.reserve(*total_);
        }
    }
    if (i == body.size()) return;
    if (content_.size() + (body.size() - i) > *total_) throw Error(ErrorCode::Malformed, "relay message overrun");
    content_.insert(content_.end(), body.begin() + static_cast<std::ptrdiff_t>(i), body.end());
}

Bytes MessageAssembler::take()
{
    if (!complete()) throw Error(ErrorCode::MissingFragment, "message incomplete");
    Bytes out = std::move(content_);
    content_.clear();
    prefix_.clear();
    total_.reset();
    return out;
}

std::vector<Cell> make_train(std::uint32_t link_id, CellCommand command, ByteView payload, std::uint8_t epoch)
{
    std::vector<Cell> cells;
    std::size_t off = 0;
    do {
        auto n = std::min(kCellPayloadSize, payload.size() - off);
        const bool more = off + n < payload.size();
        std::uint8_t e = static_cast<std::uint8_t>((epoch & 0x7f) | (more ? kMoreFragments : 0));
        cells.push_back(Cell::make(link_id, command, payload.subspan(off, n), e));
        off += n;
    } while (off < payload.size());
    return cells;
}

std::optional<Bytes> TrainAssembler::feed(std::uint64_t peer, const Cell& cell)
{
    Key key{peer, cell.link_id, cell.command};
    auto& buf = pending_[key];
    if (buf.size() + cell.payload_len > max_bytes_) {
        pending_.erase(key);
        throw Error(ErrorCode::Malformed, "cell train too long");
    }
    append(buf, cell.body());
    if (cell.more_fragments()) return std::nullopt;
    Bytes out = std::move(buf);
    pending_.erase(key);
    return out;
}

void TrainAssembler::drop(std::uint64_t peer, std::uint32_t link_id)
{
    std::erase_if(pending_, [&](const auto& kv) { return kv.first.peer == peer && kv.first.link == link_id; });
}

} // namespace spns
