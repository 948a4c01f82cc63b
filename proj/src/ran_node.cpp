#include "spns/ran_node.hpp"

#include <algorithm>

namespace spns {

std::string_view to_string(RoleHint r)
{
    switch (r) {
    case RoleHint::none: return "none";
    case RoleHint::secondary: return "secondary";
    case RoleHint::master: return "master";
    }
    return "?";
}

DestroyReason destroy_reason_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::DecryptionFailure:
    case ErrorCode::DegenerateHalfKey:
    case ErrorCode::KeyConfirmMismatch:
    case ErrorCode::CryptoFailure: return DestroyReason::crypto;
    case ErrorCode::DuplicateLink: return DestroyReason::duplicate_link;
    case ErrorCode::UnknownNextHop: return DestroyReason::unknown_next_hop;
    case ErrorCode::EpochMismatch: return DestroyReason::epoch_mismatch;
    case ErrorCode::AttestationFailure: return DestroyReason::attestation_failure;
    case ErrorCode::SingleRanRejected: return DestroyReason::single_ran_rejected;
    case ErrorCode::DigestMismatch: return DestroyReason::digest_mismatch;
    case ErrorCode::ReplayRejected: return DestroyReason::replay;
    case ErrorCode::LinkExhaustion: return DestroyReason::link_exhaustion;
    case ErrorCode::UnknownSession: return DestroyReason::unknown_session;
    default: return DestroyReason::protocol;
    }
}

RanNode::RanNode(RanConfig config, Rng rng, Clock clock)
    : config_(std::move(config)), rng_(std::move(rng)), clock_(std::move(clock)),
      log_(config_.descriptor.node_name, config_.audit)
{
}

RoleHint RanNode::role_hint(Address peer, std::uint32_t link) const
{
    auto it = circuits_.find(LinkKey{peer, link});
    return it == circuits_.end() ? RoleHint::none : it->second.role;
}

bool RanNode::link_in_use(const LinkKey& k) const
{
    return circuits_.contains(k) || by_down_.contains(k) || by_core_.contains(k);
}

std::uint32_t RanNode::allocate_link(Address peer)
{
    if (links_per_peer_[peer] >= config_.max_links_per_peer)
        throw Error(ErrorCode::LinkExhaustion, "no free link ids toward " + peer.to_string());
    for (int attempt = 0; attempt < 64; ++attempt) {
        auto id = rng_.u32();
        if (id != 0 && !link_in_use(LinkKey{peer, id})) {
            ++links_per_peer_[peer];
            return id;
        }
    }
    throw Error(ErrorCode::LinkExhaustion, "link id space exhausted toward " + peer.to_string());
}

void RanNode::teardown(const LinkKey& up, DestroyReason reason, std::string detail, Out& out, std::optional<LinkKey> skip)
{
    teardowns_.push_back(Teardown{up.link, reason, detail});
    log_.record("out", up.link, to_bytes(detail), "teardown");
    auto it = circuits_.find(up);
    std::vector<LinkKey> links{up};
    if (it != circuits_.end()) {
        if (it->second.down) links.push_back(*it->second.down);
        if (it->second.core) links.push_back(*it->second.core);
    }
    for (const auto& k : links) {
        if (skip && k == *skip) continue;
        out.push_back(Outbound{k.peer, Cell::destroy(k.link, reason)});
    }
    if (it == circuits_.end()) return;
    for (const auto& k : links) trains_.drop(k.peer.value, k.link);
    if (it->second.down) {
        by_down_.erase(*it->second.down);
        --links_per_peer_[it->second.down->peer];
    }
    if (it->second.core) {
        by_core_.erase(*it->second.core);
        --links_per_peer_[it->second.core->peer];
    }
    circuits_.erase(it);
}

std::vector<Outbound> RanNode::on_cell(Address from, const Cell& cell)
{
    Out out;
    const LinkKey key{from, cell.link_id};
    // The circuit to blame if handling fails; unset while no circuit exists.
    std::optional<LinkKey> owner;
    try {
        if (auto it = circuits_.find(key); it != circuits_.end()) {
            owner = key;
            auto& c = it->second;
            switch (cell.command) {
            case CellCommand::relay: handle_upstream_relay(c, cell, out); break;
            case CellCommand::destroy: teardown(key, DestroyReason::finished, "destroyed by upstream", out, key); break;
            case CellCommand::create: throw Error(ErrorCode::DuplicateLink, "CREATE on a live link");
            default: throw Error(ErrorCode::UnknownCommand, "unexpected command from upstream");
            }
        } else if (auto d = by_down_.find(key); d != by_down_.end()) {
            owner = d->second;
            handle_downstream(circuits_.at(d->second), key, cell, out);
        } else if (auto k = by_core_.find(key); k != by_core_.end()) {
            owner = k->second;
            handle_core(circuits_.at(k->second), cell, out);
        } else if (cell.command == CellCommand::create) {
            auto payload = trains_.feed(from.value, cell);
            if (payload) handle_create(from, cell, *payload, out);
        } else {
            log_.record("in", cell.link_id, cell.body(), "dropped");
        }
    } catch (const Error& e) {
        if (owner) {
            teardown(*owner, destroy_reason_for(e.code()), e.what(), out);
        } else {
            trains_.drop(from.value, cell.link_id);
            teardowns_.push_back(Teardown{cell.link_id, destroy_reason_for(e.code()), e.what()});
            out.push_back(Outbound{from, Cell::destroy(cell.link_id, destroy_reason_for(e.code()))});
        }
    }
    return out;
}

std::vector<SessionKey> RanNode::session_keys() const
{
    std::vector<SessionKey> out;
    for (const auto& [k, c] : circuits_) out.push_back(c.key);
    return out;
}

// ---------------------------------------------------------------------------
// Circuit creation

void RanNode::handle_create(Address from, const Cell& first, ByteView payload, Out& out)
{
    const LinkKey up{from, first.link_id};
    if (link_in_use(up)) throw Error(ErrorCode::DuplicateLink, "link id already in use");

    std::optional<ByteView> c_hop, c_core;
    std::vector<Bytes> envelopes;
    for (const auto& f : parse_tlvs(payload)) {
        if (f.tag == tags::create_c_hop && !c_hop) c_hop = f.value;
        else if (f.tag == tags::create_c_core && !c_core) c_core = f.value;
        else if (f.tag == tags::create_e_ran) envelopes.push_back(HybridEnvelope::decode(f.value).encode());
        else throw Error(ErrorCode::Malformed, "unexpected CREATE field");
    }
    if (!c_hop) throw Error(ErrorCode::Malformed, "CREATE without C_hop");

    const auto& group = *config_.group;
    const auto gx = hybrid_decrypt(config_.keys.onion, HybridEnvelope::decode(*c_hop));
    if (gx.size() != group.element_bytes()) throw Error(ErrorCode::DecryptionFailure, "half-key has the wrong width");
    log_.record("in", up.link, gx, "dh_half");
    const auto y = dh_generate(group, rng_);
    const auto key = dh_shared_secret(y, BigInt::from_bytes(gx), group);

    Circuit c(key);
    c.up = up;
    c.prior_envelopes = envelopes;

    ByteWriter created;
    created.tlv(tags::created_half_key, y.public_bytes(group));
    created.tlv(tags::created_confirm, key.confirmation_hash);

    std::vector<Outbound> ng;
    if (c_core) {
        auto plain = hybrid_decrypt(config_.keys.onion, HybridEnvelope::decode(*c_core));
        log_.record("in", up.link, plain, "core_hint");
        auto hint = CoreHint::deserialize(plain);
        const auto& snap = config_.snapshot;
        if (hint.t_core.epoch != snap.epoch || hint.t_core.core_key_fingerprint != snap.core_public.fingerprint())
            throw Error(ErrorCode::EpochMismatch, "T_core names core epoch " + std::to_string(hint.t_core.epoch) +
                                                      ", directory is at " + std::to_string(snap.epoch));
        if (hint.t_core.core_address != snap.core_address)
            throw Error(ErrorCode::UnknownNextHop, "T_core names an unknown core");

        auto self = hybrid_encrypt(snap.core_public, config_.descriptor.serialize(), rng_).encode();
        created.tlv(tags::created_e_ran, self);
        for (const auto& e : envelopes) created.tlv(tags::created_e_ran, e);

        NgSetupRequest req;
        for (const auto& e : envelopes) req.envelopes.push_back(HybridEnvelope::decode(e));
        req.envelopes.push_back(HybridEnvelope::decode(self));
        req.nssai = hint.nssai;
        req.id_core = hint.id_core;
        const auto ng_payload = req.serialize();

        const LinkKey core{snap.core_address, allocate_link(snap.core_address)};
        c.core = core;
        c.core_digest = core_link_digest(core.link);
        c.hint = std::move(hint);
        by_core_.emplace(core, up);
        log_.record("out", core.link, ng_payload, "ng_setup");
        const auto epoch = static_cast<std::uint8_t>(snap.epoch & 0x7f);
        for (auto& cell : make_train(core.link, CellCommand::ng_setup, ng_payload, epoch))
            ng.push_back(Outbound{core.peer, std::move(cell)});
        c.role = RoleHint::master;
    }

    // CREATED and NG setup leave together so that a circuit never exists
    // toward the UE without the core having been told about it.
    for (auto& cell : make_train(up.link, CellCommand::created, created.bytes())) out.push_back(Outbound{from, std::move(cell)});
    for (auto& o : ng) out.push_back(std::move(o));
    last_role_ = c.role;
    circuits_.emplace(up, std::move(c));
}

void RanNode::handle_extend(Circuit& c, ByteView content, Out& out)
{
    log_.record("in", c.up.link, content, "extend_body");
    if (c.down || c.core) throw Error(ErrorCode::StateError, "circuit already extended");
    std::optional<ByteView> addr, c_hop, c_core;
    for (const auto& f : parse_tlvs(content)) {
        if (f.tag == tags::extend_address && !addr) addr = f.value;
        else if (f.tag == tags::extend_c_hop && !c_hop) c_hop = f.value;
        else if (f.tag == tags::extend_c_core && !c_core) c_core = f.value;
        else throw Error(ErrorCode::Malformed, "unexpected EXTEND field");
    }
    if (!addr || !c_hop) throw Error(ErrorCode::Malformed, "EXTEND without address or C_hop");
    const auto next = Address::from_bytes(*addr);
    if (!config_.snapshot.find(next) || next == address())
        throw Error(ErrorCode::UnknownNextHop, "next hop " + next.to_string() + " is not in the directory");

    const LinkKey down{next, allocate_link(next)};
    ByteWriter create;
    create.tlv(tags::create_c_hop, *c_hop);
    if (c_core) create.tlv(tags::create_c_core, *c_core);
    for (const auto& e : c.prior_envelopes) create.tlv(tags::create_e_ran, e);
    create.tlv(tags::create_e_ran, hybrid_encrypt(config_.snapshot.core_public, config_.descriptor.serialize(), rng_).encode());

    c.down = down;
    c.role = RoleHint::secondary;
    last_role_ = c.role;
    by_down_.emplace(down, c.up);
    for (auto& cell : make_train(down.link, CellCommand::create, create.bytes())) out.push_back(Outbound{next, std::move(cell)});
}

// ---------------------------------------------------------------------------
// Relay traffic

void RanNode::handle_upstream_relay(Circuit& c, const Cell& cell, Out& out)
{
    if (cell.payload_len != kCellPayloadSize) throw Error(ErrorCode::BadLength, "relay cell must carry a full payload");
    RelayPayload p = cell.payload;
    c.crypto.forward.apply(p);

    // Once a data message header says more bytes follow than this hop's own
    // share, the remaining cells of the message are the next hop's layer.
    auto h = c.crypto.forward_digest.try_recognize(p);
    if (!h) {
        if (!c.down) throw Error(ErrorCode::DigestMismatch, "unrecognized relay cell at the last hop");
        log_.record("out", c.down->link, p, "forward");
        out.push_back(Outbound{c.down->peer, Cell::make(c.down->link, CellCommand::relay, p)});
        return;
    }
    log_.record("in", c.up.link, p, "relay_plain");
    switch (h->relay_cmd) {
    case RelayCommand::extend:
        c.control.feed(h->body);
        if (c.control.complete()) handle_extend(c, c.control.take(), out);
        break;
    case RelayCommand::data: handle_uplink_data(c, h->body, out); break;
    case RelayCommand::end: teardown(c.up, DestroyReason::finished, "closed by UE", out); break;
    default: throw Error(ErrorCode::Malformed, "unexpected relay command from upstream");
    }
}

void RanNode::handle_uplink_data(Circuit& c, ByteView body, Out& out)
{
    auto& u = c.uplink;
    if (u.header_done) {
        // Streaming the data bytes of a terminal message.
        if (u.received + body.size() > u.total) throw Error(ErrorCode::MalformedInfo, "data overruns its message");
        u.received += body.size();
        log_.record("out", c.core->link, body, "uplink_data");
        append(u.core_out, body);
        const bool done = u.received == u.total;
        flush_core(c, done, out);
        if (done) u = Uplink{};
        return;
    }

    append(u.head, body);
    if (u.head.size() < 4 + 2) return;
    u.total = get_u32(ByteView(u.head).first(4));
    if (u.total > (64u << 20)) throw Error(ErrorCode::MalformedInfo, "uplink message too large");
    const std::size_t info_len = get_u16(ByteView(u.head).subspan(4, 2));
    if (2 + info_len > u.total) throw Error(ErrorCode::MalformedInfo, "info length exceeds message");
    if (u.head.size() > 4 + u.total) throw Error(ErrorCode::MalformedInfo, "relay body past end of message");
    if (u.head.size() < 4 + 2 + info_len) return;

    const bool terminal = c.core.has_value();
    std::size_t header_len = 2 + info_len;
    std::optional<std::pair<Address, Bytes>> core_fields;
    if (terminal) {
        if (u.head.size() < 4 + header_len + 9) {
            if (u.head.size() == 4 + u.total) throw Error(ErrorCode::MalformedInfo, "terminal layer without core fields");
            return;
        }
        const std::size_t idlen = u.head[4 + header_len + 8];
        if (u.head.size() < 4 + header_len + 9 + idlen) return;
        if (idlen == 0) throw Error(ErrorCode::MalformedInfo, "empty ID_CORE");
        auto fields = ByteView(u.head).subspan(4 + header_len, 9 + idlen);
        log_.record("in", c.up.link, fields, "core_fields");
        core_fields.emplace(Address::from_bytes(fields.first(8)), Bytes(fields.begin() + 9, fields.end()));
        header_len += 9 + idlen;
    } else if (u.head.size() < 4 + u.total) {
        return;
    } else if (u.total != header_len) {
        throw Error(ErrorCode::MalformedInfo, "core fields in a non-terminal layer");
    }

    auto info_bytes = ByteView(u.head).subspan(6, info_len);
    log_.record("in", c.up.link, info_bytes, "info");
    auto info = InfoRecord::deserialize(info_bytes);
    if (info.seqnum <= c.last_seq)
        throw Error(ErrorCode::ReplayRejected, "sequence number " + std::to_string(info.seqnum) + " not after " +
                                                   std::to_string(c.last_seq));
    c.last_seq = info.seqnum;

    if (!terminal) {
        u = Uplink{};
        return;
    }

    if (core_fields->first != c.hint->t_core.core_address)
        throw Error(ErrorCode::UnknownNextHop, "core address does not match the circuit's core");
    if (core_fields->second != c.hint->id_core) throw Error(ErrorCode::MalformedInfo, "ID_CORE differs from the setup");

    ++c.uplink_packets;
    CoreInfoRecord ci;
    ci.ue_identifier = info.ue_identity;
    ci.bearer_context = info.bearer_context;
    ci.signal_quality = config_.signal_quality;
    ci.security_parameters = info.security_info;
    ci.timestamp = clock_();
    ci.uplink_packets = c.uplink_packets;
    ci.downlink_packets = 0;
    log_.record("out", c.core->link, ci.serialize(), "info_core");

    const std::size_t data_len = u.total - header_len;
    const auto prefix = core_message_prefix(core_fields->second, ci);
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(prefix.size() + data_len));
    w.raw(prefix);
    c.uplink.core_out = std::move(w).take();

    auto leftover = ByteView(u.head).subspan(4 + header_len);
    log_.record("out", c.core->link, leftover, "uplink_data");
    append(u.core_out, leftover);
    u.received = header_len + leftover.size();
    u.header_done = true;
    u.head.clear();
    const bool done = u.received == u.total;
    flush_core(c, done, out);
    if (done) u = Uplink{};
}

void RanNode::flush_core(Circuit& c, bool final, Out& out)
{
    auto& buf = c.uplink.core_out;
    std::size_t off = 0;
    while (buf.size() - off >= kRelayBodyMax || (final && off < buf.size())) {
        const auto n = std::min(kRelayBodyMax, buf.size() - off);
        RelayHeader h;
        h.relay_cmd = RelayCommand::data;
        h.body.assign(buf.begin() + static_cast<std::ptrdiff_t>(off), buf.begin() + static_cast<std::ptrdiff_t>(off + n));
        auto p = encode_relay(h);
        c.core_digest->stamp(p);
        out.push_back(Outbound{c.core->peer, Cell::make(c.core->link, CellCommand::relay, p)});
        off += n;
    }
    buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(off));
}

void RanNode::send_backward_message(Circuit& c, RelayCommand cmd, ByteView content, Out& out)
{
    for (auto& frag : fragment(frame_message(content))) {
        RelayHeader h;
        h.relay_cmd = cmd;
        h.body = std::move(frag.body);
        auto p = encode_relay(h);
        c.crypto.backward_digest.stamp(p);
        c.crypto.backward.apply(p);
        out.push_back(Outbound{c.up.peer, Cell::make(c.up.link, CellCommand::relay, p)});
    }
}

void RanNode::handle_downstream(Circuit& c, const LinkKey& from, const Cell& cell, Out& out)
{
    switch (cell.command) {
    case CellCommand::created: {
        auto payload = trains_.feed(from.peer.value, cell);
        if (!payload) return;
        log_.record("in", from.link, *payload, "created");
        send_backward_message(c, RelayCommand::extended, *payload, out);
        return;
    }
    case CellCommand::relay: {
        RelayPayload p = cell.payload;
        log_.record("in", from.link, p, "backward");
        c.crypto.backward.apply(p);
        out.push_back(Outbound{c.up.peer, Cell::make(c.up.link, CellCommand::relay, p)});
        return;
    }
    case CellCommand::destroy: {
        const auto reason = cell.payload_len ? static_cast<DestroyReason>(cell.payload[0]) : DestroyReason::protocol;
        teardown(c.up, reason, "destroyed by downstream", out, from);
        return;
    }
    default: throw Error(ErrorCode::UnknownCommand, "unexpected command from downstream");
    }
}

void RanNode::handle_core(Circuit& c, const Cell& cell, Out& out)
{
    switch (cell.command) {
    case CellCommand::ng_setup_ack: {
        auto payload = trains_.feed(c.core->peer.value, cell);
        if (!payload) return;
        log_.record("in", c.core->link, *payload, "ng_setup_ack");
        c.ng_token = std::move(*payload);
        return;
    }
    case CellCommand::destroy: {
        const auto reason = cell.payload_len ? static_cast<DestroyReason>(cell.payload[0]) : DestroyReason::protocol;
        teardown(c.up, reason, "destroyed by core", out, *c.core);
        return;
    }
    default: throw Error(ErrorCode::UnknownCommand, "unexpected command from core");
    }
}

} // namespace spns
