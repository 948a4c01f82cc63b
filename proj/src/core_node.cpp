#include "spns/core_node.hpp"

#include <algorithm>
#include <set>

#include "spns/ran_node.hpp"

namespace spns {

namespace {

enum CoreInfoTag : std::uint8_t {
    ci_ue = 1,
    ci_bearer = 2,
    ci_signal = 3,
    ci_security = 4,
    ci_timestamp = 5,
    ci_uplink = 6,
    ci_downlink = 7,
};

template <std::size_t N>
void take_exact(std::array<std::uint8_t, N>& out, ByteView v)
{
    if (v.size() != N) throw Error(ErrorCode::MalformedInfo, "core info field has wrong length");
    std::copy(v.begin(), v.end(), out.begin());
}

std::uint64_t take_u64(ByteView v)
{
    if (v.size() != 8) throw Error(ErrorCode::MalformedInfo, "core info counter has wrong length");
    ByteReader r(v);
    return r.u64();
}

} // namespace

Bytes CoreInfoRecord::serialize() const
{
    ByteWriter w;
    w.tlv(ci_ue, ue_identifier);
    w.tlv(ci_bearer, bearer_context);
    std::array<std::uint8_t, 4> sq{};
    put_u32(sq, static_cast<std::uint32_t>(signal_quality));
    w.tlv(ci_signal, sq);
    w.tlv(ci_security, security_parameters);
    ByteWriter n;
    n.u64(timestamp);
    n.u64(uplink_packets);
    n.u64(downlink_packets);
    const auto& nb = n.bytes();
    w.tlv(ci_timestamp, ByteView(nb).first(8));
    w.tlv(ci_uplink, ByteView(nb).subspan(8, 8));
    w.tlv(ci_downlink, ByteView(nb).subspan(16, 8));
    return std::move(w).take();
}

CoreInfoRecord CoreInfoRecord::deserialize(ByteView wire)
{
    std::vector<TlvField> f;
    try {
        f = parse_tlvs(wire);
    } catch (const Error&) {
        throw Error(ErrorCode::MalformedInfo, "core info truncated");
    }
    if (f.size() != 7) throw Error(ErrorCode::MalformedInfo, "core info field count");
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f[i].tag != i + 1) throw Error(ErrorCode::MalformedInfo, "core info field order");
    CoreInfoRecord r;
    take_exact(r.ue_identifier, f[0].value);
    take_exact(r.bearer_context, f[1].value);
    if (f[2].value.size() != 4) throw Error(ErrorCode::MalformedInfo, "signal quality length");
    r.signal_quality = static_cast<std::int32_t>(get_u32(f[2].value));
    take_exact(r.security_parameters, f[3].value);
    r.timestamp = take_u64(f[4].value);
    r.uplink_packets = take_u64(f[5].value);
    r.downlink_packets = take_u64(f[6].value);
    return r;
}

RunningDigest core_link_digest(std::uint32_t link_id)
{
    std::array<std::uint8_t, 4> id{};
    put_u32(id, link_id);
    const auto seed = sha256({to_bytes("spns-core"), id});
    return RunningDigest(seed);
}

Bytes core_message_prefix(ByteView id_core, const CoreInfoRecord& info)
{
    ByteWriter hdr;
    hdr.tlv(tags::core_id, id_core);
    hdr.tlv(tags::core_info, info.serialize());
    ByteWriter w;
    w.u16(static_cast<std::uint16_t>(hdr.size()));
    w.raw(hdr.bytes());
    return std::move(w).take();
}

CoreMessage parse_core_message(ByteView content)
{
    if (content.size() < 2) throw Error(ErrorCode::MalformedInfo, "core message truncated");
    const std::size_t n = get_u16(content.first(2));
    if (content.size() < 2 + n) throw Error(ErrorCode::MalformedInfo, "core header truncated");
    std::vector<TlvField> f;
    try {
        f = parse_tlvs(content.subspan(2, n));
    } catch (const Error&) {
        throw Error(ErrorCode::MalformedInfo, "core header malformed");
    }
    if (f.size() != 2 || f[0].tag != tags::core_id || f[1].tag != tags::core_info)
        throw Error(ErrorCode::MalformedInfo, "core header fields");
    CoreMessage m;
    m.id_core.assign(f[0].value.begin(), f[0].value.end());
    m.info = CoreInfoRecord::deserialize(f[1].value);
    auto data = content.subspan(2 + n);
    m.data.assign(data.begin(), data.end());
    return m;
}

Bytes NgSetupRequest::serialize() const
{
    ByteWriter w;
    for (const auto& e : envelopes) w.tlv(tags::ng_e_ran, e.encode());
    w.tlv(tags::ng_nssai, nssai.bytes);
    w.tlv(tags::ng_id_core, id_core);
    return std::move(w).take();
}

NgSetupRequest NgSetupRequest::deserialize(ByteView wire)
{
    NgSetupRequest r;
    bool have_nssai = false, have_id = false;
    for (const auto& f : parse_tlvs(wire)) {
        if (f.tag == tags::ng_e_ran && !have_nssai) {
            r.envelopes.push_back(HybridEnvelope::decode(f.value));
        } else if (f.tag == tags::ng_nssai && !have_nssai) {
            r.nssai = Nssai::from_bytes(f.value);
            have_nssai = true;
        } else if (f.tag == tags::ng_id_core && have_nssai && !have_id) {
            r.id_core.assign(f.value.begin(), f.value.end());
            have_id = true;
        } else {
            throw Error(ErrorCode::Malformed, "unexpected NG setup field");
        }
    }
    if (!have_nssai || !have_id || r.id_core.empty()) throw Error(ErrorCode::Malformed, "NG setup missing slice request");
    return r;
}

// ---------------------------------------------------------------------------

CoreNode::CoreNode(CoreConfig config, Rng rng)
    : config_(std::move(config)), rng_(std::move(rng)), log_(config_.name, config_.audit)
{
}

void CoreNode::rotate_key(OnionKeyPair key, std::uint32_t epoch)
{
    config_.epoch_key = std::move(key);
    config_.epoch = epoch;
}

const CoreSession* CoreNode::session(ByteView id_core) const
{
    auto it = sessions_.find(Bytes(id_core.begin(), id_core.end()));
    return it == sessions_.end() ? nullptr : &it->second;
}

Bytes CoreNode::core_handle_ng_setup(Address from, std::uint32_t link, ByteView payload, std::uint8_t epoch)
{
    if (epoch != (config_.epoch & 0x7f))
        throw Error(ErrorCode::EpochMismatch, "NG setup for epoch " + std::to_string(epoch));
    const auto req = NgSetupRequest::deserialize(payload);

    std::vector<RouterDescriptor> attested;
    std::set<std::array<std::uint8_t, 32>> identities;
    for (const auto& env : req.envelopes) {
        RouterDescriptor d;
        try {
            auto plain = hybrid_decrypt(config_.epoch_key, env);
            log_.record("in", link, plain, "descriptor");
            d = RouterDescriptor::deserialize(plain);
        } catch (const Error& e) {
            throw Error(ErrorCode::AttestationFailure, std::string("RAN descriptor unreadable: ") + e.what());
        }
        if (!descriptor_verify(d)) throw Error(ErrorCode::AttestationFailure, "RAN descriptor signature invalid: " + d.node_name);
        if (config_.snapshot && !std::any_of(config_.snapshot->descriptors.begin(), config_.snapshot->descriptors.end(),
                                             [&](const RouterDescriptor& known) { return known == d; }))
            throw Error(ErrorCode::AttestationFailure, "RAN " + d.node_name + " is not in the directory");
        identities.insert(d.identity_public.bytes);
        attested.push_back(std::move(d));
    }
    if (identities.size() < 2)
        throw Error(ErrorCode::SingleRanRejected, std::to_string(identities.size()) + " distinct RAN identities attested");

    CoreSession s;
    s.id_core = req.id_core;
    s.nssai = req.nssai;
    rng_.fill(s.token);
    s.attested = std::move(attested);
    s.peer = from;
    s.link = link;
    sessions_[req.id_core] = s;
    links_.insert_or_assign(LinkKey{from, link}, LinkState{core_link_digest(link), MessageAssembler{}, req.id_core});
    return Bytes(s.token.begin(), s.token.end());
}

const Delivery& CoreNode::core_deliver(ByteView id_core, ByteView data, const CoreInfoRecord& info)
{
    auto it = sessions_.find(Bytes(id_core.begin(), id_core.end()));
    if (it == sessions_.end() || !it->second.active)
        throw Error(ErrorCode::UnknownSession, "no session for ID_CORE " + to_hex(id_core));
    ++it->second.messages;
    log_.record("in", it->second.link, info.serialize(), "info_core");
    log_.record("in", it->second.link, data, "data");

    Delivery d;
    d.id_core.assign(id_core.begin(), id_core.end());
    d.info = info;
    d.size = data.size();
    d.digest = sha256(data);
    if (config_.retain_data) d.data.assign(data.begin(), data.end());
    deliveries_.push_back(std::move(d));
    if (hook_) hook_(deliveries_.back());
    return deliveries_.back();
}

void CoreNode::handle_relay(const LinkKey& key, LinkState& link, const Cell& cell)
{
    if (cell.payload_len != kCellPayloadSize) throw Error(ErrorCode::BadLength, "relay cell must carry a full payload");
    auto h = link.digest.try_recognize(cell.payload);
    if (!h) throw Error(ErrorCode::DigestMismatch, "core link cell not recognized");
    if (h->relay_cmd != RelayCommand::data) throw Error(ErrorCode::Malformed, "unexpected relay command at core");
    link.message.feed(h->body);
    if (!link.message.complete()) return;
    auto content = link.message.take();
    auto m = parse_core_message(content);
    if (m.id_core != link.id_core) throw Error(ErrorCode::UnknownSession, "ID_CORE does not match the link's session");
    (void)key;
    core_deliver(m.id_core, m.data, m.info);
}

std::vector<Outbound> CoreNode::on_cell(Address from, const Cell& cell)
{
    std::vector<Outbound> out;
    const LinkKey key{from, cell.link_id};
    try {
        switch (cell.command) {
        case CellCommand::ng_setup: {
            auto payload = trains_.feed(from.value, cell);
            if (!payload) break;
            log_.record("in", cell.link_id, *payload, "ng_setup");
            auto token = core_handle_ng_setup(from, cell.link_id, *payload, cell.epoch_value());
            out.push_back(Outbound{from, Cell::make(cell.link_id, CellCommand::ng_setup_ack, token)});
            break;
        }
        case CellCommand::relay: {
            auto it = links_.find(key);
            if (it == links_.end()) throw Error(ErrorCode::UnknownSession, "relay on a link without NG setup");
            handle_relay(key, it->second, cell);
            break;
        }
        case CellCommand::destroy: {
            auto it = links_.find(key);
            if (it != links_.end()) {
                auto s = sessions_.find(it->second.id_core);
                if (s != sessions_.end() && s->second.peer == from && s->second.link == cell.link_id) s->second.active = false;
                links_.erase(it);
            }
            break;
        }
        default: throw Error(ErrorCode::UnknownCommand, "unexpected command at core");
        }
    } catch (const Error& e) {
        log_.record("out", cell.link_id, to_bytes(e.what()), "reject");
        trains_.drop(from.value, cell.link_id);
        links_.erase(key);
        out.push_back(Outbound{from, Cell::destroy(cell.link_id, destroy_reason_for(e.code()))});
    }
    return out;
}

} // namespace spns
