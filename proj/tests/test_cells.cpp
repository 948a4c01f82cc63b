#include <doctest.h>

#include "spns/cells.hpp"

using namespace spns;

namespace {

Cell random_cell(Rng& rng)
{
    Cell c;
    c.link_id = rng.u32();
    c.command = static_cast<CellCommand>(1 + rng.uniform(6));
    c.payload_len = static_cast<std::uint16_t>(rng.uniform(kCellPayloadSize + 1));
    c.epoch = static_cast<std::uint8_t>(rng.uniform(256));
    rng.fill(std::span(c.payload).first(c.payload_len));
    return c;
}

} // namespace

TEST_CASE("cell geometry")
{
    Rng rng(1);
    Cell c = Cell::make(1, CellCommand::create, rng.bytes(256));
    auto wire = encode_cell(c);
    CHECK(wire.size() == 512);
    CHECK(wire[0] == 0);
    CHECK(wire[1] == 0);
    CHECK(wire[2] == 0);
    CHECK(wire[3] == 1);
    CHECK(wire[4] == 1);
    CHECK(wire[5] == 0x01);
    CHECK(wire[6] == 0x00);
    for (std::size_t i = 8; i < 14; ++i) CHECK(wire[i] == 0);
    for (std::size_t i = 14 + 256; i < 512; ++i) CHECK(wire[i] == 0);
    CHECK(decode_cell(wire) == c);

    Cell empty = Cell::make(0, CellCommand::relay, {});
    CHECK(decode_cell(encode_cell(empty)) == empty);

    auto d = Cell::destroy(9, DestroyReason::replay);
    CHECK(d.payload_len == 1);
    CHECK(d.payload[0] == static_cast<std::uint8_t>(DestroyReason::replay));
    CHECK_THROWS_AS(Cell::make(1, CellCommand::relay, Bytes(499)), Error);
}

TEST_CASE("decode rejects malformed cells with typed errors")
{
    auto code_of = [](ByteView w) {
        try {
            decode_cell(w);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    auto wire = encode_cell(Cell::make(3, CellCommand::relay, Bytes(10, 1)));
    CHECK(code_of(ByteView(wire).first(511)) == ErrorCode::BadLength);
    Bytes longer(wire.begin(), wire.end());
    longer.push_back(0);
    CHECK(code_of(longer) == ErrorCode::BadLength);
    auto w = wire;
    w[4] = 0;
    CHECK(code_of(w) == ErrorCode::UnknownCommand);
    w[4] = 7;
    CHECK(code_of(w) == ErrorCode::UnknownCommand);
    w = wire;
    w[5] = 0x01;
    w[6] = 0xf3; // 499
    CHECK(code_of(w) == ErrorCode::BadLength);
    w = wire;
    w[13] = 1;
    CHECK(code_of(w) == ErrorCode::NonzeroReserved);
}

TEST_CASE("padding past payload_len is ignored on decode")
{
    auto wire = encode_cell(Cell::make(3, CellCommand::relay, Bytes(10, 1)));
    wire[511] = 0xee;
    auto c = decode_cell(wire);
    CHECK(c.payload_len == 10);
    CHECK(c.payload[497] == 0);
}

TEST_CASE("randomized encode/decode round trip")
{
    Rng rng(2);
    for (int i = 0; i < 100000; ++i) {
        auto c = random_cell(rng);
        REQUIRE(decode_cell(encode_cell(c)) == c);
    }
}

TEST_CASE("decode fuzz: typed errors only")
{
    Rng rng(3);
    std::size_t ok = 0, typed = 0;
    for (int i = 0; i < 100000; ++i) {
        Bytes w = rng.bytes(i % 50 == 0 ? rng.uniform(600) : kCellSize);
        // Bias a share of inputs toward the valid header space.
        if (w.size() == kCellSize && i % 2 == 0) {
            w[4] = static_cast<std::uint8_t>(1 + rng.uniform(7));
            w[5] = static_cast<std::uint8_t>(rng.uniform(3));
            std::fill(w.begin() + 8, w.begin() + 14, i % 4 == 0 ? 0 : w[8]);
        }
        try {
            auto c = decode_cell(w);
            CHECK(c.payload_len <= kCellPayloadSize);
            ++ok;
        } catch (const Error&) {
            ++typed;
        }
    }
    CHECK(ok + typed == 100000);
    CHECK(ok > 0);
}

TEST_CASE("relay header")
{
    Rng rng(4);
    RelayHeader h;
    h.relay_cmd = RelayCommand::extend;
    h.body = rng.bytes(100);
    CHECK(parse_relay(encode_relay(h)) == h);
    h.body = rng.bytes(489);
    CHECK(parse_relay(encode_relay(h)) == h);
    h.body = rng.bytes(490);
    try {
        encode_relay(h);
        FAIL("accepted 490-byte body");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BodyOverflow);
    }
}

TEST_CASE("relay recognition")
{
    Rng rng(5);
    auto key = SessionKey::from_key_bytes(rng.bytes(16));
    RunningDigest sender(key, Direction::forward), receiver(key, Direction::forward);

    SUBCASE("stamped payloads are recognized in order")
    {
        for (int i = 0; i < 50; ++i) {
            RelayHeader h;
            h.body = rng.bytes(rng.uniform(490));
            auto p = encode_relay(h);
            sender.stamp(p);
            auto got = decode_relay(p, receiver);
            REQUIRE(got.has_value());
            CHECK(got->body == h.body);
        }
    }
    SUBCASE("a tampered payload is not recognized and leaves the digest untouched")
    {
        RelayHeader h;
        h.body = rng.bytes(40);
        auto p = encode_relay(h);
        sender.stamp(p);
        auto bad = p;
        bad[20] ^= 1;
        CHECK_FALSE(decode_relay(bad, receiver).has_value());
        CHECK(decode_relay(p, receiver).has_value());
    }
    SUBCASE("random payloads are never recognized")
    {
        int false_hits = 0;
        for (int i = 0; i < 10000; ++i) {
            RelayPayload p;
            rng.fill(p);
            try {
                if (decode_relay(p, receiver)) ++false_hits;
            } catch (const Error&) {
                ++false_hits;
            }
        }
        CHECK(false_hits == 0);
    }
    SUBCASE("directions and keys are separated")
    {
        RunningDigest backward(key, Direction::backward);
        RunningDigest other(SessionKey::from_key_bytes(rng.bytes(16)), Direction::forward);
        RelayHeader h;
        auto p = encode_relay(h);
        sender.stamp(p);
        CHECK_FALSE(backward.try_recognize(p).has_value());
        CHECK_FALSE(other.try_recognize(p).has_value());
    }
}

TEST_CASE("fragmentation")
{
    Rng rng(6);
    CHECK(fragment({}).size() == 1);
    CHECK(fragment(Bytes(489)).size() == 1);
    CHECK(fragment(Bytes(490)).size() == 2);
    auto big = rng.bytes(1000000);
    auto frags = fragment(big);
    CHECK(frags.size() == 2045);
    for (std::size_t i = 0; i < frags.size(); ++i) {
        CHECK(frags[i].seq == i);
        CHECK(frags[i].body.size() <= kRelayBodyMax);
    }
    CHECK(reassemble(frags) == big);
    auto gap = frags;
    gap.erase(gap.begin() + 7);
    try {
        reassemble(gap);
        FAIL("accepted a gap");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingFragment);
    }
    for (std::size_t len = 0; len < 2000; len += 37) {
        auto m = rng.bytes(len);
        CHECK(reassemble(fragment(m)) == m);
    }
}

TEST_CASE("framed messages through the assembler")
{
    Rng rng(7);
    for (std::size_t len : {0u, 1u, 485u, 486u, 10000u}) {
        auto m = rng.bytes(len);
        MessageAssembler a;
        for (const auto& f : fragment(frame_message(m))) {
            CHECK_FALSE(a.complete());
            a.feed(f.body);
        }
        REQUIRE(a.complete());
        CHECK(a.take() == m);
        CHECK(a.idle());
    }
    MessageAssembler small(10);
    CHECK_THROWS_AS(small.feed(frame_message(Bytes(11))), Error);
    MessageAssembler over;
    auto framed = frame_message(Bytes(5));
    framed.push_back(1);
    CHECK_THROWS_AS(over.feed(framed), Error);
}

TEST_CASE("trains")
{
    Rng rng(8);
    auto payload = rng.bytes(1500);
    auto cells = make_train(4, CellCommand::created, payload, 3);
    CHECK(cells.size() == 4);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(cells[i].epoch_value() == 3);
        CHECK(cells[i].more_fragments() == (i + 1 < cells.size()));
    }
    TrainAssembler t;
    std::optional<Bytes> got;
    for (const auto& c : cells) {
        CHECK_FALSE(got.has_value());
        got = t.feed(1, c);
    }
    REQUIRE(got.has_value());
    CHECK(*got == payload);

    // Interleaved trains from different peers stay apart.
    auto other = make_train(4, CellCommand::created, Bytes(600, 9));
    TrainAssembler u;
    CHECK_FALSE(u.feed(1, cells[0]).has_value());
    CHECK_FALSE(u.feed(2, other[0]).has_value());
    CHECK(u.feed(2, other[1]) == Bytes(600, 9));

    TrainAssembler capped(1000);
    CHECK_FALSE(capped.feed(1, cells[0]).has_value());
    CHECK_FALSE(capped.feed(1, cells[1]).has_value());
    CHECK_THROWS_AS(capped.feed(1, cells[2]), Error);
}
