#pragma once

#include <map>
#include <optional>

#include "spns/audit_log.hpp"
#include "spns/circuit.hpp"
#include "spns/reactor.hpp"

namespace spns {

struct UeConfig {
    UeIdentity ue_identity{};
    NsiId nsi;
    Nssai nssai;
    std::size_t hops = 2;
    std::uint64_t path_seed = 0;
    bool leak_identity_to_all_hops = false;
    const DhGroup* group = &DhGroup::modp2048();
};

/// The user equipment: picks a path from a verified snapshot, builds the
/// circuit hop by hop and sends onion-wrapped uplink data.
class UeClient : public Reactor {
public:
    /// Throws InvalidDescriptor if the snapshot does not verify under the
    /// pinned directory key, InsufficientRans if no path exists.
    UeClient(Address self, UeConfig config, const DirectorySnapshot& snapshot, const IdentityPublicKey& directory_key,
             Rng rng, Clock clock = wall_clock());

    Address address() const override { return self_; }
    std::vector<Outbound> on_cell(Address from, const Cell& cell) override;

    /// Sends the CREATE to the entry hop.
    std::vector<Outbound> start();
    /// Throws CircuitNotEstablished.
    std::vector<Outbound> send(ByteView data);
    /// RELAY END to the last hop, which tears the circuit down.
    std::vector<Outbound> close();

    const CircuitState& circuit() const { return circ_; }
    CircuitState& circuit() { return circ_; }
    CircuitStatus status() const { return circ_.status; }
    const std::vector<RouterDescriptor>& path() const { return path_; }
    std::optional<ErrorCode> failure() const { return failure_; }
    std::optional<DestroyReason> destroy_reason() const { return destroy_reason_; }
    AuditLog& log() { return log_; }

private:
    std::vector<Outbound> on_hop_ready(CreatedOutcome outcome);
    std::vector<Outbound> to_entry(std::vector<Cell> cells) const;
    std::vector<Outbound> fail_with(const Error& e);

    Address self_;
    UeConfig config_;
    Rng rng_;
    Clock clock_;
    std::vector<RouterDescriptor> path_;
    CircuitState circ_;
    TrainAssembler trains_;
    std::map<std::size_t, MessageAssembler> backward_;
    std::optional<ErrorCode> failure_;
    std::optional<DestroyReason> destroy_reason_;
    AuditLog log_;
};

} // namespace spns
