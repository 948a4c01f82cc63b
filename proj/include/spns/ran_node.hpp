#pragma once

#include <map>
#include <optional>

#include "spns/audit_log.hpp"
#include "spns/circuit.hpp"
#include "spns/core_messages.hpp"
#include "spns/reactor.hpp"

namespace spns {

enum class RoleHint { none, secondary, master };

std::string_view to_string(RoleHint r);

struct RanConfig {
    NodeKeySet keys;
    RouterDescriptor descriptor;
    DirectorySnapshot snapshot;
    std::size_t max_links_per_peer = 1u << 16;
    std::int32_t signal_quality = -85;
    bool audit = true;
    const DhGroup* group = &DhGroup::modp2048();
};

struct Teardown {
    std::uint32_t link = 0;
    DestroyReason reason = DestroyReason::protocol;
    std::string detail;
};

/// A gNB relay. Which role it plays (secondary or master) is decided per
/// circuit by what the CREATE carries: a C_core field makes it the master.
class RanNode : public Reactor {
public:
    RanNode(RanConfig config, Rng rng, Clock clock = wall_clock());

    Address address() const override { return config_.descriptor.address; }
    std::vector<Outbound> on_cell(Address from, const Cell& cell) override;

    /// Role of the circuit arriving on (peer, link), none if unknown.
    RoleHint role_hint(Address peer, std::uint32_t link) const;
    /// Role of the most recently created circuit.
    RoleHint role_hint() const { return last_role_; }
    std::size_t circuit_count() const { return circuits_.size(); }
    /// Session keys of every live circuit, in link order.
    std::vector<SessionKey> session_keys() const;
    const std::vector<Teardown>& teardowns() const { return teardowns_; }
    const RouterDescriptor& descriptor() const { return config_.descriptor; }
    void set_snapshot(DirectorySnapshot snapshot) { config_.snapshot = std::move(snapshot); }
    AuditLog& log() { return log_; }

private:
    struct LinkKey {
        Address peer;
        std::uint32_t link = 0;
        auto operator<=>(const LinkKey&) const = default;
    };

    struct Uplink {
        Bytes head;
        bool header_done = false;
        std::size_t total = 0;    // framed content length
        std::size_t received = 0; // content bytes seen so far
        Bytes core_out;           // bytes awaiting a full core-link relay body
    };

    struct Circuit {
        LinkKey up;
        SessionKey key;
        RelayCrypto crypto;
        RoleHint role = RoleHint::none;
        std::vector<Bytes> prior_envelopes;
        std::optional<LinkKey> down;
        std::optional<LinkKey> core;
        std::optional<RunningDigest> core_digest;
        std::optional<CoreHint> hint;
        Bytes ng_token;
        MessageAssembler control{64 * 1024};
        Uplink uplink;
        std::uint64_t last_seq = 0;
        std::uint64_t uplink_packets = 0;

        explicit Circuit(const SessionKey& k) : key(k), crypto(k) {}
    };

    using Out = std::vector<Outbound>;

    void handle_create(Address from, const Cell& first, ByteView payload, Out& out);
    void handle_upstream_relay(Circuit& c, const Cell& cell, Out& out);
    void handle_extend(Circuit& c, ByteView content, Out& out);
    void handle_uplink_data(Circuit& c, ByteView body, Out& out);
    void handle_downstream(Circuit& c, const LinkKey& from, const Cell& cell, Out& out);
    void handle_core(Circuit& c, const Cell& cell, Out& out);

    void send_backward_message(Circuit& c, RelayCommand cmd, ByteView content, Out& out);
    void flush_core(Circuit& c, bool final, Out& out);
    std::uint32_t allocate_link(Address peer);
    bool link_in_use(const LinkKey& k) const;
    /// DESTROY on every link of the circuit except `skip`, then forget it.
    void teardown(const LinkKey& up, DestroyReason reason, std::string detail, Out& out,
                  std::optional<LinkKey> skip = std::nullopt);

    RanConfig config_;
    Rng rng_;
    Clock clock_;
    AuditLog log_;
    TrainAssembler trains_;
    std::map<LinkKey, Circuit> circuits_;
    std::map<LinkKey, LinkKey> by_down_;
    std::map<LinkKey, LinkKey> by_core_;
    std::map<Address, std::size_t> links_per_peer_;
    std::vector<Teardown> teardowns_;
    RoleHint last_role_ = RoleHint::none;
};

DestroyReason destroy_reason_for(ErrorCode code);

} // namespace spns
