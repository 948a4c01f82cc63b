#include "spns/circuit.hpp"

#include <algorithm>

namespace spns {

namespace {

enum InfoTag : std::uint8_t {
    info_nssai = 1,
    info_slice_part = 2,
    info_bearer = 3,
    info_security = 4,
    info_rrc = 5,
    info_ue_identity = 6,
    info_timestamp = 7,
    info_seqnum = 8,
    info_packet_type = 9,
};

template <std::size_t N>
void copy_exact(std::array<std::uint8_t, N>& out, ByteView v, const char* what)
{
    if (v.size() != N) throw Error(ErrorCode::MalformedInfo, std::string(what) + " has wrong length");
    std::copy(v.begin(), v.end(), out.begin());
}

std::uint64_t read_u64_exact(ByteView v, const char* what)
{
    if (v.size() != 8) throw Error(ErrorCode::MalformedInfo, std::string(what) + " has wrong length");
    ByteReader r(v);
    return r.u64();
}

Bytes u64_bytes(std::uint64_t v)
{
    ByteWriter w;
    w.u64(v);
    return std::move(w).take();
}

std::vector<Cell> relay_message_cells(CircuitState& circ, std::size_t hop, RelayCommand cmd, ByteView content)
{
    std::vector<Cell> out;
    for (auto& frag : fragment(frame_message(content))) {
        RelayHeader h;
        h.relay_cmd = cmd;
        h.body = std::move(frag.body);
        auto payload = seal_forward(circ, hop, h);
        out.push_back(Cell::make(circ.entry_link_id, CellCommand::relay, payload));
    }
    return out;
}

void fail(CircuitState& circ, CircuitEvent ev)
{
    if (auto next = circuit_transition(circ.status, ev, false)) circ.status = *next;
}

} // namespace

Bytes InfoRecord::serialize() const
{
    ByteWriter w;
    w.tlv(info_nssai, nssai.bytes);
    w.tlv(info_slice_part, slice_part_id);
    w.tlv(info_bearer, bearer_context);
    w.tlv(info_security, security_info);
    w.tlv(info_rrc, rrc_config);
    w.tlv(info_ue_identity, ue_identity);
    w.tlv(info_timestamp, u64_bytes(timestamp));
    w.tlv(info_seqnum, u64_bytes(seqnum));
    const std::uint8_t pt = packet_type;
    w.tlv(info_packet_type, ByteView(&pt, 1));
    return std::move(w).take();
}

InfoRecord InfoRecord::deserialize(ByteView wire)
{
    std::vector<TlvField> f;
    try {
        f = parse_tlvs(wire);
    } catch (const Error&) {
        throw Error(ErrorCode::MalformedInfo, "info record truncated");
    }
    if (f.size() != 9) throw Error(ErrorCode::MalformedInfo, "info record field count");
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f[i].tag != i + 1) throw Error(ErrorCode::MalformedInfo, "info record field order");

    InfoRecord r;
    copy_exact(r.nssai.bytes, f[0].value, "nssai");
    if (f[1].value.empty() || f[1].value.size() > 16) throw Error(ErrorCode::MalformedInfo, "slice part length");
    r.slice_part_id.assign(f[1].value.begin(), f[1].value.end());
    copy_exact(r.bearer_context, f[2].value, "bearer context");
    copy_exact(r.security_info, f[3].value, "security info");
    copy_exact(r.rrc_config, f[4].value, "rrc config");
    copy_exact(r.ue_identity, f[5].value, "ue identity");
    r.timestamp = read_u64_exact(f[6].value, "timestamp");
    r.seqnum = read_u64_exact(f[7].value, "seqnum");
    if (f[8].value.size() != 1) throw Error(ErrorCode::MalformedInfo, "packet type length");
    r.packet_type = f[8].value[0];
    return r;
}

Bytes TCore::serialize() const
{
    ByteWriter w(kSize);
    w.raw(core_address.bytes());
    w.u64(epoch);
    w.raw(core_key_fingerprint);
    return std::move(w).take();
}

TCore TCore::deserialize(ByteView wire)
{
    if (wire.size() != kSize) throw Error(ErrorCode::Malformed, "T_core must be 24 bytes");
    ByteReader r(wire);
    TCore t;
    t.core_address = Address::from_bytes(r.raw(8));
    t.epoch = r.u64();
    auto fp = r.raw(8);
    std::copy(fp.begin(), fp.end(), t.core_key_fingerprint.begin());
    return t;
}

TCore TCore::from_snapshot(const DirectorySnapshot& snapshot)
{
    TCore t;
    t.core_address = snapshot.core_address;
    t.epoch = snapshot.epoch;
    t.core_key_fingerprint = snapshot.core_public.fingerprint();
    return t;
}

Bytes CoreHint::serialize() const
{
    return concat({t_core.serialize(), nssai.bytes, id_core});
}

CoreHint CoreHint::deserialize(ByteView wire)
{
    if (wire.size() < TCore::kSize + 4 + 1) throw Error(ErrorCode::Malformed, "core hint too short");
    CoreHint h;
    h.t_core = TCore::deserialize(wire.first(TCore::kSize));
    h.nssai = Nssai::from_bytes(wire.subspan(TCore::kSize, 4));
    auto id = wire.subspan(TCore::kSize + 4);
    h.id_core.assign(id.begin(), id.end());
    return h;
}

Bytes TerminalPayload::serialize() const
{
    if (id_core.empty() || id_core.size() > 255) throw Error(ErrorCode::InvalidArgument, "ID_CORE length");
    ByteWriter w(8 + 1 + id_core.size() + data.size());
    w.raw(core_address.bytes());
    w.u8(static_cast<std::uint8_t>(id_core.size()));
    w.raw(id_core);
    w.raw(data);
    return std::move(w).take();
}

TerminalPayload TerminalPayload::deserialize(ByteView wire)
{
    try {
        ByteReader r(wire);
        TerminalPayload t;
        t.core_address = Address::from_bytes(r.raw(8));
        const auto n = r.u8();
        if (n == 0) throw Error(ErrorCode::MalformedInfo, "empty ID_CORE");
        auto id = r.raw(n);
        t.id_core.assign(id.begin(), id.end());
        auto rest = r.rest();
        t.data.assign(rest.begin(), rest.end());
        return t;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::MalformedInfo) throw;
        throw Error(ErrorCode::MalformedInfo, "terminal payload truncated");
    }
}

// ---------------------------------------------------------------------------

std::string_view to_string(CircuitStatus s)
{
    switch (s) {
    case CircuitStatus::building: return "building";
    case CircuitStatus::extending: return "extending";
    case CircuitStatus::established: return "established";
    case CircuitStatus::failed: return "failed";
    case CircuitStatus::closed: return "closed";
    }
    return "?";
}

std::optional<CircuitStatus> circuit_transition(CircuitStatus from, CircuitEvent event, bool final_hop)
{
    const bool live = from == CircuitStatus::building || from == CircuitStatus::extending ||
                      from == CircuitStatus::established;
    switch (event) {
    case CircuitEvent::hop_confirmed:
        if (from == CircuitStatus::building || from == CircuitStatus::extending)
            return final_hop ? CircuitStatus::established : CircuitStatus::extending;
        return std::nullopt;
    case CircuitEvent::confirm_mismatch:
    case CircuitEvent::protocol_error:
    case CircuitEvent::destroy_received:
        if (live) return CircuitStatus::failed;
        return std::nullopt;
    case CircuitEvent::close_requested:
        if (from == CircuitStatus::established) return CircuitStatus::closed;
        return std::nullopt;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

CircuitState CircuitState::create(std::vector<RouterDescriptor> path, CircuitConfig config, Rng& rng)
{
    if (path.empty()) throw Error(ErrorCode::InvalidArgument, "circuit path is empty");
    if (!config.nsi.assigned()) throw Error(ErrorCode::InvalidArgument, "NSI ID is not assigned");
    partition(config.nsi, path.size()); // rejects paths too long to partition

    CircuitState c;
    c.nsi = config.nsi;
    c.config = config;
    rng.fill(c.pseudonym);
    do {
        c.entry_link_id = rng.u32();
    } while (c.entry_link_id == 0);

    for (std::size_t i = 0; i < path.size(); ++i) {
        CircuitHop h;
        h.descriptor = std::move(path[i]);
        rng.fill(h.bearer_context);
        rng.fill(h.security_info);
        rng.fill(h.rrc_config);
        h.ue_identity = (i == 0 || config.leak_identity_to_all_hops) ? config.ue_identity : c.pseudonym;
        c.hops.push_back(std::move(h));
    }
    return c;
}

CircuitState CircuitState::from_keys(std::vector<RouterDescriptor> path, const std::vector<SessionKey>& keys,
                                     CircuitConfig config, Rng& rng)
{
    if (keys.size() != path.size()) throw Error(ErrorCode::InvalidArgument, "one key per hop required");
    auto c = create(std::move(path), config, rng);
    for (std::size_t i = 0; i < keys.size(); ++i) {
        c.hops[i].key = keys[i];
        c.hops[i].crypto.emplace(keys[i]);
    }
    c.status = CircuitStatus::established;
    return c;
}

std::size_t CircuitState::confirmed_hops() const
{
    return static_cast<std::size_t>(
        std::count_if(hops.begin(), hops.end(), [](const CircuitHop& h) { return h.crypto.has_value(); }));
}

namespace {

Bytes core_hint_for(const CircuitState& circ)
{
    CoreHint hint{circ.config.t_core, circ.config.nssai, circ.id_core()};
    return hint.serialize();
}

} // namespace

std::vector<Cell> build_create(CircuitState& circ, const RouterDescriptor& target, Rng& rng)
{
    if (circ.status != CircuitStatus::building) throw Error(ErrorCode::StateError, "circuit is past the CREATE step");
    auto& hop = circ.hops.front();
    if (hop.pending_dh) throw Error(ErrorCode::StateError, "CREATE already outstanding");
    if (!(target == hop.descriptor)) throw Error(ErrorCode::StateError, "CREATE target is not the entry hop");

    const auto& group = *circ.config.group;
    hop.pending_dh = dh_generate(group, rng);
    ByteWriter w;
    w.tlv(tags::create_c_hop, hybrid_encrypt(target.onion_public, hop.pending_dh->public_bytes(group), rng).encode());
    if (circ.hops.size() == 1)
        w.tlv(tags::create_c_core, hybrid_encrypt(target.onion_public, core_hint_for(circ), rng).encode());
    return make_train(circ.entry_link_id, CellCommand::create, std::move(w).take());
}

CreatedOutcome handle_created(CircuitState& circ, std::uint32_t link_id, ByteView payload)
{
    if (link_id != circ.entry_link_id) return CreatedOutcome::ignored;
    auto it = std::find_if(circ.hops.begin(), circ.hops.end(), [](const CircuitHop& h) { return h.pending_dh.has_value(); });
    if (it == circ.hops.end()) return CreatedOutcome::ignored;
    const auto& group = *circ.config.group;

    std::optional<ByteView> half, confirm;
    std::vector<HybridEnvelope> envelopes;
    try {
        for (const auto& f : parse_tlvs(payload)) {
            if (f.tag == tags::created_half_key && !half) half = f.value;
            else if (f.tag == tags::created_confirm && !confirm) confirm = f.value;
            else if (f.tag == tags::created_e_ran) envelopes.push_back(HybridEnvelope::decode(f.value));
            else throw Error(ErrorCode::Malformed, "unexpected CREATED field");
        }
        if (!half || !confirm || half->size() != group.element_bytes() || confirm->size() != 32)
            throw Error(ErrorCode::Malformed, "CREATED is missing the half-key or confirmation");
    } catch (const Error&) {
        fail(circ, CircuitEvent::protocol_error);
        throw;
    }

    SessionKey key;
    try {
        key = dh_shared_secret(*it->pending_dh, BigInt::from_bytes(*half), group);
    } catch (const Error&) {
        fail(circ, CircuitEvent::protocol_error);
        throw;
    }
    if (!constant_time_equal(key.confirmation_hash, *confirm)) {
        fail(circ, CircuitEvent::confirm_mismatch);
        throw Error(ErrorCode::KeyConfirmMismatch, "hop " + it->descriptor.node_name + " failed key confirmation");
    }

    it->pending_dh.reset();
    it->key = key;
    it->crypto.emplace(key);
    for (auto& e : envelopes) circ.returned_envelopes.push_back(std::move(e));

    const bool final_hop = (it + 1) == circ.hops.end();
    circ.status = circuit_transition(circ.status, CircuitEvent::hop_confirmed, final_hop).value();
    return final_hop ? CreatedOutcome::circuit_established : CreatedOutcome::hop_established;
}

std::vector<Cell> build_extend(CircuitState& circ, const RouterDescriptor& next, Rng& rng)
{
    if (circ.status != CircuitStatus::extending) throw Error(ErrorCode::StateError, "circuit is not extending");
    const auto k = circ.confirmed_hops();
    if (k == 0 || k >= circ.hops.size()) throw Error(ErrorCode::StateError, "no hop left to extend to");
    auto& hop = circ.hops[k];
    if (hop.pending_dh) throw Error(ErrorCode::StateError, "EXTEND already outstanding");
    if (!(next == hop.descriptor)) throw Error(ErrorCode::StateError, "EXTEND target is not the next path hop");

    const auto& group = *circ.config.group;
    hop.pending_dh = dh_generate(group, rng);
    ByteWriter w;
    w.tlv(tags::extend_address, next.address.bytes());
    w.tlv(tags::extend_c_hop, hybrid_encrypt(next.onion_public, hop.pending_dh->public_bytes(group), rng).encode());
    if (k + 1 == circ.hops.size())
        w.tlv(tags::extend_c_core, hybrid_encrypt(next.onion_public, core_hint_for(circ), rng).encode());
    return relay_message_cells(circ, k - 1, RelayCommand::extend, w.bytes());
}

RelayPayload seal_forward(CircuitState& circ, std::size_t hop, const RelayHeader& header)
{
    if (hop >= circ.hops.size() || !circ.hops[hop].crypto) throw Error(ErrorCode::CircuitNotEstablished, "hop has no key");
    auto payload = encode_relay(header);
    circ.hops[hop].crypto->forward_digest.stamp(payload);
    for (std::size_t i = hop + 1; i-- > 0;) circ.hops[i].crypto->forward.apply(payload);
    return payload;
}

std::pair<std::size_t, RelayHeader> open_backward(CircuitState& circ, RelayPayload payload)
{
    for (std::size_t i = 0; i < circ.hops.size() && circ.hops[i].crypto; ++i) {
        auto& c = *circ.hops[i].crypto;
        c.backward.apply(payload);
        if (auto h = c.backward_digest.try_recognize(payload)) return {i, std::move(*h)};
    }
    throw Error(ErrorCode::DigestMismatch, "backward cell not recognized by any hop");
}

std::vector<Cell> OnionMessage::to_cells(std::uint32_t link_id) const
{
    std::vector<Cell> out;
    out.reserve(cell_count());
    for (std::size_t off = 0; off + kCellPayloadSize <= ciphertext.size(); off += kCellPayloadSize)
        out.push_back(Cell::make(link_id, CellCommand::relay, ByteView(ciphertext).subspan(off, kCellPayloadSize)));
    return out;
}

OnionMessage build_onion(CircuitState& circ, ByteView data, std::uint64_t timestamp)
{
    if (circ.status != CircuitStatus::established)
        throw Error(ErrorCode::CircuitNotEstablished, std::string("circuit is ") + std::string(to_string(circ.status)));
    const auto parts = circ.slices();
    const auto seq = ++circ.seq_counter;

    Bytes inner;
    for (std::size_t i = circ.hops.size(); i-- > 0;) {
        auto& hop = circ.hops[i];
        InfoRecord info;
        info.nssai = circ.config.nssai;
        info.slice_part_id = parts.parts[i];
        info.bearer_context = hop.bearer_context;
        info.security_info = hop.security_info;
        info.rrc_config = hop.rrc_config;
        info.ue_identity = hop.ue_identity;
        info.timestamp = timestamp;
        info.seqnum = seq;
        info.packet_type = kPacketTypeUserData;
        const auto info_bytes = info.serialize();

        ByteWriter content;
        content.u16(static_cast<std::uint16_t>(info_bytes.size()));
        content.raw(info_bytes);
        if (i + 1 == circ.hops.size())
            content.raw(TerminalPayload{circ.config.t_core.core_address, parts.parts.back(), Bytes(data.begin(), data.end())}
                            .serialize());

        const auto frags = fragment(frame_message(content.bytes()));
        Bytes layer;
        layer.reserve(frags.size() * kCellPayloadSize + inner.size());
        for (const auto& f : frags) {
            RelayHeader h;
            h.relay_cmd = RelayCommand::data;
            h.body = f.body;
            auto p = encode_relay(h);
            hop.crypto->forward_digest.stamp(p);
            append(layer, p);
        }
        append(layer, inner);
        hop.crypto->forward.apply(layer);
        inner = std::move(layer);
    }
    return OnionMessage{std::move(inner)};
}

std::pair<InfoRecord, Bytes> parse_layer_message(ByteView content)
{
    if (content.size() < 2) throw Error(ErrorCode::MalformedInfo, "layer message truncated");
    const auto n = get_u16(content.first(2));
    if (content.size() < 2u + n) throw Error(ErrorCode::MalformedInfo, "info record truncated");
    auto info = InfoRecord::deserialize(content.subspan(2, n));
    auto tail = content.subspan(2 + n);
    return {std::move(info), Bytes(tail.begin(), tail.end())};
}

PeeledLayer peel_layer(RelayCrypto& hop, ByteView layer_ciphertext)
{
    if (layer_ciphertext.empty() || layer_ciphertext.size() % kCellPayloadSize != 0)
        throw Error(ErrorCode::MalformedInfo, "layer is not a whole number of cells");

    MessageAssembler own;
    Bytes forwarded;
    bool own_done = false;
    for (std::size_t off = 0; off < layer_ciphertext.size(); off += kCellPayloadSize) {
        RelayPayload p;
        std::copy_n(layer_ciphertext.begin() + static_cast<std::ptrdiff_t>(off), kCellPayloadSize, p.begin());
        hop.forward.apply(p);
        if (own_done) {
            append(forwarded, p);
            continue;
        }
        auto h = hop.forward_digest.try_recognize(p);
        if (!h) throw Error(ErrorCode::DigestMismatch, "layer cell not recognized");
        if (h->relay_cmd != RelayCommand::data) throw Error(ErrorCode::MalformedInfo, "layer cell is not DATA");
        try {
            own.feed(h->body);
        } catch (const Error&) {
            throw Error(ErrorCode::MalformedInfo, "layer message overruns its length");
        }
        own_done = own.complete();
    }
    if (!own_done) throw Error(ErrorCode::MalformedInfo, "layer message truncated");

    auto [info, tail] = parse_layer_message(own.take());
    PeeledLayer out;
    out.info = std::move(info);
    if (forwarded.empty()) {
        TerminalPayload::deserialize(tail); // validates
        out.inner = std::move(tail);
        out.terminal = true;
    } else {
        if (!tail.empty()) throw Error(ErrorCode::MalformedInfo, "core fields in a non-terminal layer");
        out.inner = std::move(forwarded);
    }
    return out;
}

} // namespace spns
