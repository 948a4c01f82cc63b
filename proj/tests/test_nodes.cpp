#include <doctest.h>

#include <set>

#include "spns/scenario.hpp"

using namespace spns;

namespace {

const NetworkKeys& keys()
{
    return NetworkKeys::shared(3);
}

Bytes train_payload(const std::vector<Cell>& cells)
{
    Bytes out;
    for (const auto& c : cells) append(out, c.body());
    return out;
}

std::vector<Cell> cells_with(const std::vector<Outbound>& out, CellCommand cmd)
{
    std::vector<Cell> r;
    for (const auto& o : out)
        if (o.cell.command == cmd) r.push_back(o.cell);
    return r;
}

std::optional<DestroyReason> destroy_in(const std::vector<Outbound>& out)
{
    for (const auto& o : out)
        if (o.cell.command == CellCommand::destroy) return static_cast<DestroyReason>(o.cell.payload[0]);
    return std::nullopt;
}

/// Two published RANs (ran-1, ran-2) plus a third key set that is not in
/// the directory, with the UE driven by hand against real RanNodes.
struct Bench {
    DirectorySnapshot snapshot;
    std::vector<RouterDescriptor> descriptors; // index 2 is unpublished
    Address ue = address_for("ue");

    explicit Bench(std::uint32_t epoch = 1)
    {
        Directory dir(keys().directory, keys().core_epoch.public_key(), address_for("core"), epoch);
        for (std::size_t i = 0; i < 3; ++i) {
            descriptors.push_back(descriptor_sign(make_descriptor(i, keys().rans[i], 0x01000001), keys().rans[i].identity));
            if (i < 2) dir.publish(descriptors.back());
        }
        snapshot = dir.fetch_snapshot();
    }

    RanNode ran(std::size_t i, std::size_t max_links = 1u << 16) const
    {
        RanConfig rc;
        rc.keys = keys().rans[i];
        rc.descriptor = descriptors[i];
        rc.snapshot = snapshot;
        rc.max_links_per_peer = max_links;
        return RanNode(rc, Rng(100 + i), [] { return std::uint64_t{1}; });
    }

    CircuitState circuit(std::vector<std::size_t> hops, std::uint64_t t_core_epoch = 1, std::uint64_t seed = 1) const
    {
        CircuitConfig cfg;
        Rng rng(seed);
        rng.fill(cfg.ue_identity);
        rng.fill(cfg.nsi.bytes);
        cfg.nsi.bytes[0] |= 1;
        cfg.nssai = Nssai::from_u32(0x01000001);
        cfg.t_core = TCore::from_snapshot(snapshot);
        cfg.t_core.epoch = t_core_epoch;
        std::vector<RouterDescriptor> path;
        for (auto h : hops) path.push_back(descriptors[h]);
        return CircuitState::create(path, cfg, rng);
    }

    static std::vector<Outbound> feed(RanNode& node, Address from, const std::vector<Cell>& cells)
    {
        std::vector<Outbound> out;
        for (const auto& c : cells) {
            auto o = node.on_cell(from, c);
            out.insert(out.end(), o.begin(), o.end());
        }
        return out;
    }
};

} // namespace

TEST_CASE("end-to-end handshake: UE and each RAN hold the same keys")
{
    Scenario s(ScenarioConfig{}, NetworkKeys::shared(2));
    s.build_circuit();
    const auto& circ = s.ue().circuit();
    REQUIRE(circ.status == CircuitStatus::established);
    REQUIRE(circ.hops.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        auto ks = s.hop(i).session_keys();
        REQUIRE(ks.size() == 1);
        CHECK(ks[0] == *circ.hops[i].key);
        CHECK(ks[0].confirmation_hash == circ.hops[i].key->confirmation_hash);
    }
    CHECK(s.hop(0).role_hint() == RoleHint::secondary);
    CHECK(s.hop(1).role_hint() == RoleHint::master);
    CHECK(s.core().session_count() == 1);
    // The UE keeps the descriptor envelopes returned in CREATED.
    CHECK(circ.returned_envelopes.size() == 2);
}

TEST_CASE("extend copies C_hop and C_core and appends a fresh E_RAN1")
{
    auto capture = [](std::uint64_t seed) {
        ScenarioConfig cfg;
        cfg.seed = seed;
        Scenario s(cfg, NetworkKeys::shared(2));
        std::vector<Cell> ue_relay, create_to_master;
        Address entry, master;
        s.net().set_tamper([&](Address from, Address to, const Cell& c) -> std::optional<Cell> {
            if (from == address_for("ue") && c.command == CellCommand::relay) ue_relay.push_back(c);
            if (c.command == CellCommand::create && from != address_for("ue")) create_to_master.push_back(c);
            return c;
        });
        s.build_circuit();
        RelayCrypto hop0(*s.ue().circuit().hops[0].key);
        MessageAssembler msg;
        for (auto c : ue_relay) {
            RelayPayload p = c.payload;
            hop0.forward.apply(p);
            auto h = hop0.forward_digest.try_recognize(p);
            REQUIRE(h.has_value());
            msg.feed(h->body);
        }
        REQUIRE(msg.complete());
        const auto extend_body = msg.take();
        auto extend = parse_tlvs(extend_body);
        auto create_payload = train_payload(create_to_master);
        auto create = parse_tlvs(create_payload);
        REQUIRE(extend.size() == 3);
        REQUIRE(create.size() == 3);
        CHECK(create[0].tag == tags::create_c_hop);
        CHECK(create[1].tag == tags::create_c_core);
        CHECK(create[2].tag == tags::create_e_ran);
        CHECK(Bytes(create[0].value.begin(), create[0].value.end()) == Bytes(extend[1].value.begin(), extend[1].value.end()));
        CHECK(Bytes(create[1].value.begin(), create[1].value.end()) == Bytes(extend[2].value.begin(), extend[2].value.end()));
        auto d = RouterDescriptor::deserialize(
            hybrid_decrypt(NetworkKeys::shared(2).core_epoch, HybridEnvelope::decode(create[2].value)));
        CHECK(d == s.ue().path()[0]);
        return Bytes(create[2].value.begin(), create[2].value.end());
    };
    auto a = capture(1);
    auto b = capture(2);
    CHECK(a != b);
}

TEST_CASE("master emits CREATED and NG_SETUP together")
{
    Bench b;
    auto master = b.ran(1);
    Rng rng(3);
    auto circ = b.circuit({1});
    auto out = Bench::feed(master, b.ue, build_create(circ, b.descriptors[1], rng));
    auto created = cells_with(out, CellCommand::created);
    auto ng = cells_with(out, CellCommand::ng_setup);
    REQUIRE(!created.empty());
    REQUIRE(!ng.empty());
    for (const auto& o : out) {
        if (o.cell.command == CellCommand::created) CHECK(o.to == b.ue);
        if (o.cell.command == CellCommand::ng_setup) CHECK(o.to == address_for("core"));
    }
    CHECK(master.role_hint() == RoleHint::master);
    CHECK(handle_created(circ, circ.entry_link_id, train_payload(created)) == CreatedOutcome::circuit_established);

    auto req = NgSetupRequest::deserialize(train_payload(ng));
    CHECK(req.id_core == circ.id_core());
    CHECK(req.nssai == Nssai::from_u32(0x01000001));
    REQUIRE(req.envelopes.size() == 1);
    auto d = RouterDescriptor::deserialize(hybrid_decrypt(keys().core_epoch, req.envelopes[0]));
    CHECK(d == b.descriptors[1]);
    CHECK(ng[0].epoch_value() == 1);
}

TEST_CASE("master rejects a stale core epoch")
{
    Bench b;
    auto master = b.ran(1);
    Rng rng(4);
    auto circ = b.circuit({1}, 7);
    auto out = Bench::feed(master, b.ue, build_create(circ, b.descriptors[1], rng));
    CHECK(cells_with(out, CellCommand::ng_setup).empty());
    CHECK(cells_with(out, CellCommand::created).empty());
    CHECK(destroy_in(out) == DestroyReason::epoch_mismatch);
    CHECK(master.circuit_count() == 0);
}

TEST_CASE("RAN error paths")
{
    Bench b;
    Rng rng(5);

    SUBCASE("garbage CREATE payload")
    {
        auto ran = b.ran(0);
        ByteWriter w;
        w.tlv(tags::create_c_hop, HybridEnvelope{rng.bytes(256), rng.bytes(150)}.encode());
        auto out = ran.on_cell(b.ue, Cell::make(9, CellCommand::create, w.bytes()));
        CHECK(destroy_in(out) == DestroyReason::crypto);
        CHECK(ran.circuit_count() == 0);
        auto junk = ran.on_cell(b.ue, Cell::make(10, CellCommand::create, rng.bytes(100)));
        CHECK(destroy_in(junk).has_value());
    }
    SUBCASE("replayed CREATE on a live link")
    {
        auto ran = b.ran(0);
        auto circ = b.circuit({0, 1});
        auto create = build_create(circ, b.descriptors[0], rng);
        auto first = Bench::feed(ran, b.ue, create);
        CHECK(!cells_with(first, CellCommand::created).empty());
        CHECK(ran.circuit_count() == 1);
        auto again = Bench::feed(ran, b.ue, create);
        CHECK(destroy_in(again) == DestroyReason::duplicate_link);
        CHECK(ran.circuit_count() == 0);
    }
    SUBCASE("extend to an unknown next hop")
    {
        auto ran = b.ran(0);
        auto circ = b.circuit({0, 2});
        auto created = Bench::feed(ran, b.ue, build_create(circ, b.descriptors[0], rng));
        REQUIRE(handle_created(circ, circ.entry_link_id, train_payload(cells_with(created, CellCommand::created))) ==
                CreatedOutcome::hop_established);
        auto out = Bench::feed(ran, b.ue, build_extend(circ, b.descriptors[2], rng));
        CHECK(cells_with(out, CellCommand::create).empty());
        CHECK(destroy_in(out) == DestroyReason::unknown_next_hop);
        CHECK(out.back().to == b.ue);
        CHECK(ran.circuit_count() == 0);
    }
    SUBCASE("link exhaustion")
    {
        auto ran = b.ran(0, 0);
        auto circ = b.circuit({0, 1});
        auto created = Bench::feed(ran, b.ue, build_create(circ, b.descriptors[0], rng));
        REQUIRE(handle_created(circ, circ.entry_link_id, train_payload(cells_with(created, CellCommand::created))) ==
                CreatedOutcome::hop_established);
        auto out = Bench::feed(ran, b.ue, build_extend(circ, b.descriptors[1], rng));
        CHECK(destroy_in(out) == DestroyReason::link_exhaustion);
    }
    SUBCASE("allocated link ids are unique per peer")
    {
        auto ran = b.ran(0);
        std::set<std::uint32_t> links;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto circ = b.circuit({0, 1}, 1, seed);
            auto created = Bench::feed(ran, b.ue, build_create(circ, b.descriptors[0], rng));
            REQUIRE(handle_created(circ, circ.entry_link_id, train_payload(cells_with(created, CellCommand::created))) ==
                    CreatedOutcome::hop_established);
            auto out = Bench::feed(ran, b.ue, build_extend(circ, b.descriptors[1], rng));
            auto creates = cells_with(out, CellCommand::create);
            REQUIRE(!creates.empty());
            links.insert(creates[0].link_id);
        }
        CHECK(links.size() == 5);
    }
}

TEST_CASE("data phase")
{
    Scenario s(ScenarioConfig{}, NetworkKeys::shared(2));
    s.build_circuit();
    Rng rng(6);

    SUBCASE("core receives the data and info_core")
    {
        auto data = rng.bytes(1024);
        s.send(data);
        const auto& d = s.core().deliveries().back();
        CHECK(d.data == data);
        CHECK(d.id_core == s.ue().circuit().id_core());
        CHECK(d.info.uplink_packets == 1);
        CHECK(d.info.downlink_packets == 0);
        CHECK(d.info.ue_identifier == s.ue().circuit().pseudonym);
        CHECK(d.info.ue_identifier != s.ue_identity());
        CHECK(d.info.signal_quality == -85);
        s.send(rng.bytes(10));
        CHECK(s.core().deliveries().back().info.uplink_packets == 2);
        CHECK(s.core().session(s.ue().circuit().id_core())->messages == 2);
    }
    SUBCASE("large and empty payloads")
    {
        s.send(rng.bytes(300000));
        s.send({});
        CHECK(s.core().deliveries().back().size == 0);
    }
    SUBCASE("replayed sequence number is rejected at the entry hop")
    {
        s.send(rng.bytes(100));
        s.ue().circuit().seq_counter = 0;
        s.net().send_all(s.ue().address(), s.ue().send(rng.bytes(100)));
        s.net().run_until_idle();
        REQUIRE(!s.hop(0).teardowns().empty());
        CHECK(s.hop(0).teardowns().back().reason == DestroyReason::replay);
        CHECK(s.core().deliveries().size() == 1);
        CHECK(s.ue().status() == CircuitStatus::failed);
        CHECK(s.ue().destroy_reason() == DestroyReason::replay);
        CHECK(s.hop(0).circuit_count() == 0);
        CHECK(s.hop(1).circuit_count() == 0);

        // Anything further on the dead link is dropped and logged.
        const auto before = s.hop(0).log().events().size();
        auto out = s.hop(0).on_cell(s.ue().address(), Cell::make(s.ue().circuit().entry_link_id, CellCommand::relay,
                                                                   Bytes(kCellPayloadSize, 1)));
        CHECK(out.empty());
        REQUIRE(s.hop(0).log().events().size() == before + 1);
        CHECK(s.hop(0).log().events().back().kind == "dropped");
    }
    SUBCASE("a corrupted relay cell tears the circuit down")
    {
        s.net().set_tamper([](Address, Address, const Cell& c) -> std::optional<Cell> {
            Cell x = c;
            if (x.command == CellCommand::relay) x.payload[100] ^= 1;
            return x;
        });
        s.net().send_all(s.ue().address(), s.ue().send(rng.bytes(100)));
        s.net().run_until_idle();
        CHECK(s.ue().status() == CircuitStatus::failed);
        CHECK(s.core().deliveries().empty());
        CHECK(s.hop(0).teardowns().back().reason == DestroyReason::digest_mismatch);
    }
    SUBCASE("close")
    {
        s.net().send_all(s.ue().address(), s.ue().close());
        s.net().run_until_idle();
        CHECK(s.ue().status() == CircuitStatus::closed);
        CHECK(s.hop(0).circuit_count() == 0);
        CHECK(s.hop(1).circuit_count() == 0);
        CHECK_FALSE(s.core().session(s.ue().circuit().id_core())->active);
        CHECK_THROWS_AS(s.ue().send(Bytes(1)), Error);
    }
}

TEST_CASE("multi-hop circuits")
{
    for (std::size_t hops : {1u, 3u, 4u}) {
        ScenarioConfig cfg;
        cfg.hops = hops;
        cfg.ran_count = std::max<std::size_t>(hops, 2);
        Scenario s(cfg, NetworkKeys::shared(cfg.ran_count));
        if (hops == 1) {
            // A single RAN cannot satisfy the two-RAN attestation rule.
            CHECK_THROWS_AS(s.build_circuit(), Error);
            continue;
        }
        s.build_circuit();
        Rng rng(hops);
        auto data = rng.bytes(5000);
        s.send(data);
        CHECK(s.core().deliveries().back().data == data);
        CHECK(s.hop(hops - 1).role_hint() == RoleHint::master);
        CHECK(s.core().session(s.ue().circuit().id_core())->attested.size() == hops);
    }
}

TEST_CASE("core attestation")
{
    const auto& k = keys();
    Bench b;
    CoreConfig cc;
    cc.address = address_for("core");
    cc.epoch_key = k.core_epoch;
    cc.epoch = 1;
    cc.snapshot = b.snapshot;
    CoreNode core(cc, Rng(1));
    Rng rng(7);

    auto env = [&](const RouterDescriptor& d) { return hybrid_encrypt(k.core_epoch.public_key(), d.serialize(), rng); };
    auto request = [&](std::vector<HybridEnvelope> e, Bytes id) {
        NgSetupRequest r;
        r.envelopes = std::move(e);
        r.nssai = Nssai::from_u32(0x01000001);
        r.id_core = std::move(id);
        return r.serialize();
    };
    auto code = [&](const Bytes& payload, std::uint8_t epoch = 1) -> std::optional<ErrorCode> {
        try {
            auto token = core.core_handle_ng_setup(b.descriptors[1].address, 5, payload, epoch);
            CHECK(token.size() == 16);
            return std::nullopt;
        } catch (const Error& e) {
            return e.code();
        }
    };

    auto tampered = b.descriptors[0];
    tampered.gnb_id ^= 1;
    CHECK(code(request({env(b.descriptors[0]), env(b.descriptors[1])}, Bytes(6, 1))) == std::nullopt);
    REQUIRE(core.session(Bytes(6, 1)) != nullptr);
    CHECK(core.session(Bytes(6, 1))->active);
    CHECK(core.session(Bytes(6, 1))->attested.size() == 2);
    CHECK(code(request({env(b.descriptors[0])}, Bytes(6, 2))) == ErrorCode::SingleRanRejected);
    CHECK(code(request({}, Bytes(6, 2))) == ErrorCode::SingleRanRejected);
    CHECK(code(request({env(b.descriptors[0]), env(b.descriptors[0])}, Bytes(6, 2))) == ErrorCode::SingleRanRejected);
    CHECK(code(request({env(tampered), env(b.descriptors[1])}, Bytes(6, 2))) == ErrorCode::AttestationFailure);
    CHECK(code(request({env(b.descriptors[2]), env(b.descriptors[1])}, Bytes(6, 2))) == ErrorCode::AttestationFailure);
    auto wrong_key = hybrid_encrypt(k.rans[0].onion.public_key(), b.descriptors[0].serialize(), rng);
    CHECK(code(request({wrong_key, env(b.descriptors[1])}, Bytes(6, 2))) == ErrorCode::AttestationFailure);
    CHECK(code(request({env(b.descriptors[0]), env(b.descriptors[1])}, Bytes(6, 2)), 2) == ErrorCode::EpochMismatch);
    CHECK(core.session(Bytes(6, 2)) == nullptr);
    CHECK(core.session_count() == 1);

    SUBCASE("delivery")
    {
        CoreInfoRecord info;
        info.uplink_packets = 1;
        auto data = rng.bytes(1024);
        const auto& d = core.core_deliver(Bytes(6, 1), data, info);
        CHECK(d.data == data);
        CHECK(d.digest == sha256(data));
        try {
            core.core_deliver(Bytes(6, 9), data, info);
            FAIL("delivered to an unknown session");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::UnknownSession);
        }
    }
    SUBCASE("rejection over the wire is a DESTROY")
    {
        auto cells = make_train(8, CellCommand::ng_setup, request({env(b.descriptors[0])}, Bytes(6, 3)), 1);
        std::vector<Outbound> out;
        for (const auto& c : cells) {
            auto o = core.on_cell(b.descriptors[1].address, c);
            out.insert(out.end(), o.begin(), o.end());
        }
        REQUIRE(out.size() == 1);
        CHECK(out[0].cell.command == CellCommand::destroy);
        CHECK(out[0].cell.payload[0] == static_cast<std::uint8_t>(DestroyReason::single_ran_rejected));
    }
    SUBCASE("epoch rotation")
    {
        core.rotate_key(k.rans[2].onion, 2);
        CHECK(core.epoch() == 2);
        auto fresh = [&](const RouterDescriptor& d) {
            return hybrid_encrypt(k.rans[2].onion.public_key(), d.serialize(), rng);
        };
        CHECK(code(request({fresh(b.descriptors[0]), fresh(b.descriptors[1])}, Bytes(6, 4)), 2) == std::nullopt);
        CHECK(code(request({env(b.descriptors[0]), env(b.descriptors[1])}, Bytes(6, 5)), 2) ==
              ErrorCode::AttestationFailure);
    }
}

TEST_CASE("core message framing")
{
    CoreInfoRecord info;
    info.signal_quality = -90;
    info.timestamp = 5;
    info.uplink_packets = 3;
    info.ue_identifier[0] = 7;
    CHECK(CoreInfoRecord::deserialize(info.serialize()) == info);
    auto content = core_message_prefix(Bytes(6, 0xcc), info);
    append(content, to_bytes("payload"));
    auto m = parse_core_message(content);
    CHECK(m.id_core == Bytes(6, 0xcc));
    CHECK(m.info == info);
    CHECK(m.data == to_bytes("payload"));
    CHECK_THROWS_AS(parse_core_message(ByteView(content).first(3)), Error);
}
