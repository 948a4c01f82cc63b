// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "spns/benchmark.hpp"
#include "spns/vectors.hpp"
#include "support/onion_oracle.hpp"
#include "support/ref_aes.hpp"

using namespace spns;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why)
    {
        if (pass) detail = why;
        pass = false;
    }
};

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// 1. End-to-end handshake
Outcome handshake()
{
    Outcome o;
    const auto t0 = Clock::now();
    Scenario s(ScenarioConfig{}, NetworkKeys::shared(2));
    s.build_circuit();
    const auto& circ = s.ue().circuit();
    for (std::size_t i = 0; i < circ.hops.size(); ++i) {
        auto ks = s.hop(i).session_keys();
        if (ks.size() != 1 || !circ.hops[i].key) {
            o.fail("hop " + std::to_string(i) + " holds no single session key");
            continue;
        }
        if (ks[0].key_bytes != circ.hops[i].key->key_bytes) o.fail("key mismatch at hop " + std::to_string(i));
        if (ks[0].confirmation_hash != circ.hops[i].key->confirmation_hash)
            o.fail("confirmation hash mismatch at hop " + std::to_string(i));
    }
    const double t = seconds_since(t0);
    if (t >= 5.0) o.fail("took " + std::to_string(t) + " s");
    if (o.pass) o.detail = "2 hops, keys and confirmation hashes equal, " + std::to_string(t) + " s";
    return o;
}

// 2. Peel equivalence
Outcome peel_equivalence()
{
    Outcome o;
    const auto& keys = NetworkKeys::shared(2);
    std::vector<RouterDescriptor> path;
    for (std::size_t i = 0; i < 2; ++i)
        path.push_back(descriptor_sign(make_descriptor(i, keys.rans[i], 0x01000001), keys.rans[i].identity));
    Rng rng(20);
    std::size_t total = 0;
    for (int trial = 0; trial < 200 && o.pass; ++trial) {
        CircuitConfig cfg;
        rng.fill(cfg.ue_identity);
        rng.fill(cfg.nsi.bytes);
        cfg.nsi.bytes[15] |= 1;
        cfg.nssai = Nssai::from_u32(0x01000001);
        cfg.t_core = TCore{address_for("core"), 1, keys.core_epoch.public_key().fingerprint()};
        std::vector<SessionKey> ks{SessionKey::from_key_bytes(rng.bytes(16)), SessionKey::from_key_bytes(rng.bytes(16))};
        auto circ = CircuitState::from_keys(path, ks, cfg, rng);
        // Edge sizes first, then uniform up to 1 MiB.
        static const std::size_t edges[] = {0, 1, 489, 490, 1u << 20};
        const std::size_t len = trial < 5 ? edges[trial] : rng.uniform((1u << 20) + 1);
        total += len;
        auto data = rng.bytes(len);
        auto onion = build_onion(circ, data, static_cast<std::uint64_t>(trial));

        std::vector<std::array<std::uint8_t, 16>> raw{ks[0].key_bytes, ks[1].key_bytes};
        oracle::Decrypted ref;
        try {
            ref = oracle::decrypt_all(raw, onion.ciphertext);
        } catch (const std::exception& e) {
            o.fail("oracle rejected trial " + std::to_string(trial) + ": " + e.what());
            break;
        }
        Bytes cur = onion.ciphertext;
        for (std::size_t h = 0; h < 2; ++h) {
            RelayCrypto hop(ks[h]);
            auto layer = peel_layer(hop, cur);
            auto [info, tail] = parse_layer_message(ref.hops[h].content);
            if (!(info == layer.info)) o.fail("info record differs at hop " + std::to_string(h));
            const Bytes& expect_inner = h == 0 ? ref.hops[h].forwarded : tail;
            if (layer.inner != expect_inner) o.fail("inner bytes differ at hop " + std::to_string(h));
            cur = layer.inner;
        }
        if (TerminalPayload::deserialize(cur).data != data) o.fail("terminal data differs");
    }
    if (o.pass) o.detail = "200 payloads, " + std::to_string(total) + " bytes, bit-identical";
    return o;
}

// 3. Anonymity audit
Outcome anonymity()
{
    Outcome o;
    auto audit_run = [](std::uint64_t seed, bool leak) {
        ScenarioConfig cfg;
        cfg.seed = seed;
        cfg.leak_identity_to_all_hops = leak;
        cfg.trace = false;
        Scenario s(cfg, NetworkKeys::shared(2));
        s.build_circuit();
        Rng rng(seed * 31 + 7);
        auto data = rng.bytes(1000 + rng.uniform(20000));
        s.send(data);
        std::vector<AuditEvent> events;
        for (auto* log : s.logs()) events.insert(events.end(), log->events().begin(), log->events().end());
        return run_audit(events, s.manifest(data));
    };
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        auto v = audit_run(seed, false);
        if (!v.pass) o.fail("seed " + std::to_string(seed) + ": " + v.summary());
    }
    auto control = audit_run(1, true);
    if (control.pass) o.fail("negative control (identity leak) passed the audit");
    if (o.pass)
        o.detail = "50 seeds clean; leak control FAIL with " + std::to_string(control.findings.size()) + " findings";
    return o;
}

// 4. Dual-connectivity attestation
Outcome attestation()
{
    Outcome o;
    const auto& keys = NetworkKeys::shared(3);
    Directory dir(keys.directory, keys.core_epoch.public_key(), address_for("core"), 1);
    std::vector<RouterDescriptor> d;
    for (std::size_t i = 0; i < 3; ++i) {
        d.push_back(descriptor_sign(make_descriptor(i, keys.rans[i], 0x01000001), keys.rans[i].identity));
        if (i < 2) dir.publish(d.back());
    }
    CoreConfig cc;
    cc.address = address_for("core");
    cc.epoch_key = keys.core_epoch;
    cc.epoch = 1;
    cc.snapshot = dir.fetch_snapshot();
    CoreNode core(cc, Rng(1));
    Rng rng(4);

    auto tampered = d[1];
    tampered.location_area ^= 1;
    struct Item {
        std::string name;
        HybridEnvelope env;
        int identity; // 0 or 1 for a valid RAN, -1 for a bad item
    };
    const auto& pk = keys.core_epoch.public_key();
    std::vector<Item> pool{
        {"D1", hybrid_encrypt(pk, d[0].serialize(), rng), 0},
        {"D2", hybrid_encrypt(pk, d[1].serialize(), rng), 1},
        {"D1 again", hybrid_encrypt(pk, d[0].serialize(), rng), 0},
        {"tampered D2", hybrid_encrypt(pk, tampered.serialize(), rng), -1},
        {"unlisted D3", hybrid_encrypt(pk, d[2].serialize(), rng), -1},
        {"wrong key", hybrid_encrypt(keys.rans[0].onion.public_key(), d[0].serialize(), rng), -1},
    };
    std::size_t accepted = 0, rejected = 0;
    for (std::uint32_t mask = 0; mask < (1u << pool.size()); ++mask) {
        NgSetupRequest req;
        req.nssai = Nssai::from_u32(0x01000001);
        req.id_core = {static_cast<std::uint8_t>(mask >> 8), static_cast<std::uint8_t>(mask), 1, 2, 3, 4};
        bool bad = false;
        std::set<int> ids;
        std::string names;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (!(mask & (1u << i))) continue;
            req.envelopes.push_back(pool[i].env);
            names += pool[i].name + ";";
            if (pool[i].identity < 0) bad = true;
            else ids.insert(pool[i].identity);
        }
        const bool expect_accept = !bad && ids.size() == 2;
        bool got_accept = false;
        try {
            core.core_handle_ng_setup(Address{7}, mask + 1, req.serialize(), 1);
            got_accept = true;
        } catch (const Error& e) {
            const bool expected_code = bad ? e.code() == ErrorCode::AttestationFailure
                                           : e.code() == ErrorCode::SingleRanRejected;
            if (!expected_code) o.fail("subset {" + names + "} rejected with " + std::string(to_string(e.code())));
        }
        if (got_accept != expect_accept)
            o.fail("subset {" + names + "} " + (got_accept ? "accepted" : "rejected"));
        const auto* sess = core.session(req.id_core);
        if ((sess != nullptr) != expect_accept) o.fail("session state wrong for {" + names + "}");
        (got_accept ? accepted : rejected)++;
    }
    if (o.pass)
        o.detail = std::to_string(1u << pool.size()) + " subsets: " + std::to_string(accepted) + " accepted, " +
                   std::to_string(rejected) + " rejected as expected";
    return o;
}

// 5. Linear scaling
Outcome scaling()
{
    Outcome o;
    const auto t0 = Clock::now();
    BenchmarkConfig cfg; // 1..14 Mb, 100 iterations, 10 Mb/s
    auto report = run_benchmark(cfg);
    const double t = seconds_since(t0);
    if (report.fit.r2 < 0.99) o.fail("R^2 " + std::to_string(report.fit.r2));
    double worst = 0;
    for (const auto& r : report.rows) {
        const double ideal = report.ideal_transfer_s(r.size_bits);
        const double dev = std::abs(r.transfer_s - ideal) / ideal;
        worst = std::max(worst, dev);
        if (dev > 0.05) o.fail("transfer of " + std::to_string(r.size_bits) + " bits off by " + std::to_string(dev * 100) + "%");
    }
    if (t >= 120.0) o.fail("took " + std::to_string(t) + " s");
    char buf[200];
    std::snprintf(buf, sizeof buf, "R^2 = %.8f, slope %.4e s/bit, worst transfer deviation %.3f%%, %.1f s", report.fit.r2,
                  report.fit.slope, worst * 100, t);
    if (o.pass) o.detail = buf;
    else o.detail += std::string(" (") + buf + ")";
    return o;
}

// 6. Wire stability
Outcome wire_stability()
{
    Outcome o;
    const fs::path dir = SPNS_GOLDEN_DIR;
    auto vectors = golden_vectors();
    for (const auto& v : vectors) {
        std::ifstream in(dir / (v.name + ".hex"));
        std::string text;
        std::getline(in, text);
        if (text != to_hex(v.bytes)) o.fail("golden vector " + v.name + " differs");
    }
    auto again = golden_vectors();
    for (std::size_t i = 0; i < vectors.size(); ++i)
        if (again[i].bytes != vectors[i].bytes) o.fail("vector " + vectors[i].name + " not reproducible");

    Rng rng(6);
    std::size_t decoded = 0, typed = 0;
    for (int i = 0; i < 100000; ++i) {
        Bytes w = rng.bytes(kCellSize);
        if (i % 2 == 0) {
            w[4] = static_cast<std::uint8_t>(1 + rng.uniform(7));
            w[5] = static_cast<std::uint8_t>(rng.uniform(3));
            std::fill(w.begin() + 8, w.begin() + 14, std::uint8_t{0});
        }
        try {
            auto c = decode_cell(w);
            if (c.payload_len > kCellPayloadSize) o.fail("decoded oversize payload_len");
            ++decoded;
        } catch (const Error&) {
            ++typed;
        } catch (...) {
            o.fail("untyped exception from decode_cell");
        }
    }
    if (o.pass)
        o.detail = std::to_string(vectors.size()) + " golden vectors identical; 1e5 fuzz cells: " + std::to_string(decoded) +
                   " decoded, " + std::to_string(typed) + " typed errors";
    return o;
}

// 7. Crypto oracles
Outcome crypto_oracles()
{
    Outcome o;
    const DhGroup toy(BigInt(23), BigInt(5));
    auto brute = [](std::uint64_t b, std::uint64_t e) {
        std::uint64_t r = 1;
        for (std::uint64_t i = 0; i < e; ++i) r = r * b % 23;
        return r;
    };
    std::size_t pairs = 0;
    for (std::uint64_t x = 2; x <= 20; ++x)
        for (std::uint64_t y = 2; y <= 20; ++y) {
            auto a = dh_keypair_from_secret(toy, BigInt(x));
            auto b = dh_keypair_from_secret(toy, BigInt(y));
            if (a.public_half.to_u64() != brute(5, x)) o.fail("g^x wrong for x=" + std::to_string(x));
            const auto expect = brute(brute(5, x), y);
            const bool degenerate_a = brute(5, x) == 1 || brute(5, x) == 22;
            const bool degenerate_b = brute(5, y) == 1 || brute(5, y) == 22;
            try {
                const auto k1 = dh_raw_secret(a, b.public_half, toy).to_u64();
                const auto k2 = dh_raw_secret(b, a.public_half, toy).to_u64();
                if (degenerate_a || degenerate_b) o.fail("degenerate half accepted");
                if (k1 != expect || k2 != expect) o.fail("shared secret wrong for x=" + std::to_string(x) + " y=" + std::to_string(y));
                ++pairs;
            } catch (const Error& e) {
                if (!(degenerate_a || degenerate_b) || e.code() != ErrorCode::DegenerateHalfKey)
                    o.fail("unexpected error " + std::string(e.what()));
            }
        }

    LayerCipherState zero(SessionKey::from_key_bytes(Bytes(16, 0)), Direction::forward);
    Bytes block(16, 0);
    zero.apply(block);
    const std::array<std::uint8_t, 16> zk{};
    const auto ref_block = ref::Aes128(zk.data()).encrypt(ref::Block{});
    if (!std::equal(block.begin(), block.end(), ref_block.begin())) o.fail("zero-key block differs from the reference");
    if (to_hex(block) != "66e94bd4ef8a2c3b884cfa59ca342b2e") o.fail("zero-key known answer mismatch");
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        auto key = SessionKey::from_key_bytes(rng.bytes(16));
        for (auto dir : {Direction::forward, Direction::backward}) {
            LayerCipherState st(key, dir);
            ref::Ctr ref(key.key_bytes.data(), LayerCipherState::initial_counter(dir));
            Bytes a = rng.bytes(1 + rng.uniform(3000));
            Bytes b = a;
            st.apply(a);
            ref.apply(b);
            if (a != b) o.fail("CTR stream differs from the reference");
        }
    }

    for (int i = 0; i < 10000; ++i) {
        NsiId id;
        rng.fill(id.bytes);
        const auto hops = 1 + rng.uniform(15);
        auto p = partition(id, hops);
        if (join(p) != id) o.fail("partition/join failed");
        if (from_urn(to_urn(p)) != p) o.fail("URN round trip failed");
    }
    if (o.pass)
        o.detail = "p=23 sweep " + std::to_string(pairs) + " non-degenerate pairs match; AES zero-key KAT; 1e4 NSI round trips";
    return o;
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 handshake key agreement", handshake},
        {"2 peel equivalence", peel_equivalence},
        {"3 anonymity audit", anonymity},
        {"4 dual-connectivity attestation", attestation},
        {"5 linear scaling", scaling},
        {"6 wire stability", wire_stability},
        {"7 crypto oracles", crypto_oracles},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << name << ": " << o.detail << std::endl;
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
