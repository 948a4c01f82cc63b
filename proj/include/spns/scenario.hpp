#pragma once

#include <memory>

#include "spns/audit.hpp"
#include "spns/core_node.hpp"
#include "spns/ran_node.hpp"
#include "spns/simnet.hpp"
#include "spns/ue_client.hpp"

namespace spns {

/// Long-term keys of a test network. RSA generation cannot be driven by a
/// seed and is slow, so one set is made per process and reused; everything
/// seed-dependent is derived afterwards.
struct NetworkKeys {
    IdentityKeyPair directory;
    OnionKeyPair core_epoch;
    std::vector<NodeKeySet> rans;

    static NetworkKeys generate(std::size_t ran_count, Rng& rng);
    /// Process-wide keys for at least ran_count RANs.
    static const NetworkKeys& shared(std::size_t ran_count);
};

/// Deterministic 8-byte routing token for a node name.
Address address_for(std::string_view name);

struct ScenarioConfig {
    std::uint64_t seed = 1;
    std::size_t ran_count = 2;
    std::size_t hops = 2;
    std::uint32_t nssai = 0x01000001;
    LinkModel link;
    bool audit = true;
    bool trace = true;
    bool retain_data = true;
    bool leak_identity_to_all_hops = false;
    std::uint32_t epoch = 1;
};

/// A complete in-process network: directory, RANs, core and one UE over a
/// simulated network.
class Scenario {
public:
    Scenario(ScenarioConfig config, const NetworkKeys& keys);

    /// Runs the handshake to quiescence. Throws ScenarioFailure naming the
    /// phase if the circuit or the core session is not established.
    void build_circuit();
    /// Sends one uplink message and runs to quiescence. Throws
    /// ScenarioFailure unless the core received exactly `data`.
    void send(ByteView data);

    RanNode& ran(Address a);
    /// Path position: 0 is the UE's entry hop, hops-1 the master.
    RanNode& hop(std::size_t i);
    std::vector<AuditLog*> logs();
    /// Byte strings the audit must never find at the wrong node.
    SecretsManifest manifest(ByteView sent_data) const;

    const ScenarioConfig& config() const { return config_; }
    Directory& directory() { return *directory_; }
    const DirectorySnapshot& snapshot() const { return snapshot_; }
    SimNet& net() { return net_; }
    UeClient& ue() { return *ue_; }
    CoreNode& core() { return *core_; }
    std::vector<std::unique_ptr<RanNode>>& rans() { return rans_; }
    const UeIdentity& ue_identity() const { return ue_identity_; }
    const NsiId& nsi() const { return nsi_; }

private:
    ScenarioConfig config_;
    Rng rng_;
    SimNet net_;
    std::unique_ptr<Directory> directory_;
    DirectorySnapshot snapshot_;
    std::vector<std::unique_ptr<RanNode>> rans_;
    std::unique_ptr<CoreNode> core_;
    std::unique_ptr<UeClient> ue_;
    UeIdentity ue_identity_{};
    NsiId nsi_;
    std::size_t deliveries_before_ = 0;
};

/// Unsigned descriptor template for RAN i of a test network.
RouterDescriptor make_descriptor(std::size_t index, const NodeKeySet& keys, std::uint32_t nssai);

} // namespace spns
