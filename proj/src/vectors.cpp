#include "spns/vectors.hpp"

#include <filesystem>
#include <fstream>

#include "spns/cells.hpp"
#include "spns/circuit.hpp"
#include "spns/directory.hpp"
#include "spns/nsi.hpp"

namespace spns {

namespace {

constexpr const char* kFixedOnionDer =
    "30820122300d06092a864886f70d01010105000382010f003082010a0282010100a7e3ed70f54428efdb5ac14ddf0f7f"
    "b519b9c598a36fc7cfd1fb5cf1ee5ba13e285a6fe40529771f6bfd47029e57dde32e957372a7d6c7d9f753396643d6a2"
    "7d02fe91cb4d193835325089aa939bf75728006b0cf6d37addc0934d1313d371024c65d2fd861e6a6bf62d5ceab9aa6d"
    "09e9d3647c213bc53a04de24098ef9aa31f97986abbd91e13eac162f4263905ddaf94cc369458da9000a590ab9f21893"
    "4c8f81c7d266c276dccfce64934c2def868e4a317e3cb1b28833fb01ecbad12d8cb63f8857e6ba16d972b381632b5bca"
    "a6d305c681aa1bf022bf2ce9d32a0b9d68014a0b33c8c6bdd4a885683ff7bec55d3b9aee30b102bb7bdfe7a30cc0baeb"
    "f50203010001";

Bytes counting(std::size_t n, std::uint8_t start = 0)
{
    Bytes b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>(start + i);
    return b;
}

Bytes wire(const Cell& c)
{
    auto w = encode_cell(c);
    return Bytes(w.begin(), w.end());
}

} // namespace

OnionPublicKey fixed_onion_public_key()
{
    return OnionPublicKey::from_der(from_hex(kFixedOnionDer));
}

std::vector<GoldenVector> golden_vectors()
{
    std::vector<GoldenVector> v;

    v.push_back({"cell_create", wire(Cell::make(0x01020304, CellCommand::create, counting(32), 1))});
    v.push_back({"cell_destroy", wire(Cell::destroy(0x00000007, DestroyReason::replay))});
    v.push_back({"cell_ng_setup_more", wire(Cell::make(0xa5a5a5a5, CellCommand::ng_setup, counting(kCellPayloadSize, 0x40), 3 | kMoreFragments))});

    RelayHeader h;
    h.relay_cmd = RelayCommand::data;
    h.body = to_bytes("spns relay body");
    auto plain = encode_relay(h);
    v.push_back({"relay_plain", Bytes(plain.begin(), plain.end())});

    const auto key = SessionKey::from_key_bytes(counting(16, 0x10));
    RelayCrypto rc(key);
    rc.forward_digest.stamp(plain);
    v.push_back({"relay_stamped", Bytes(plain.begin(), plain.end())});
    rc.forward.apply(plain);
    v.push_back({"cell_relay_encrypted", wire(Cell::make(0xdeadbeef, CellCommand::relay, plain))});

    const auto identity = IdentityKeyPair::from_seed(counting(32, 0x80));
    RouterDescriptor d;
    d.node_name = "golden-ran";
    d.gnb_id = 0x00abcdef;
    d.location_area = 0x1234;
    d.supported_nssai = {Nssai::from_u32(0x01000001), Nssai::from_u32(0x02000002)};
    d.slice_part = {0x01};
    d.onion_public = fixed_onion_public_key();
    d.address = Address{0x0102030405060708ull};
    d = descriptor_sign(d, identity);
    v.push_back({"descriptor", d.serialize()});

    NsiId id = NsiId::from_bytes(counting(16));
    v.push_back({"urn_2hop", to_bytes(to_urn(partition(id, 2)))});
    v.push_back({"urn_3hop", to_bytes(to_urn(partition(id, 3)))});

    InfoRecord info;
    info.nssai = Nssai::from_u32(0x01000001);
    info.slice_part_id = counting(5);
    info.bearer_context = {1, 2, 3, 4, 5, 6, 7, 8};
    info.ue_identity = {0xaa, 0xbb};
    info.timestamp = 1700000000000000ull;
    info.seqnum = 1;
    info.packet_type = kPacketTypeUserData;
    v.push_back({"info_record", info.serialize()});
    return v;
}

void write_golden_vectors(const std::string& dir)
{
    std::filesystem::create_directories(dir);
    for (const auto& g : golden_vectors()) {
        std::ofstream out(std::filesystem::path(dir) / (g.name + ".hex"));
        if (!out) throw Error(ErrorCode::Io, "cannot write " + g.name + ".hex");
        out << to_hex(g.bytes) << '\n';
    }
}

} // namespace spns
