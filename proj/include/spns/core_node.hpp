#pragma once

#include <functional>
#include <map>
#include <optional>

#include "spns/audit_log.hpp"
#include "spns/core_messages.hpp"
#include "spns/reactor.hpp"

namespace spns {

struct CoreConfig {
    std::string name = "core";
    Address address;
    OnionKeyPair epoch_key;
    std::uint32_t epoch = 0;
    /// When present, attested descriptors must also appear in it.
    std::optional<DirectorySnapshot> snapshot;
    bool audit = true;
    /// Keep delivered payloads in memory; benchmarks turn this off.
    bool retain_data = true;
};

struct CoreSession {
    Bytes id_core;
    Nssai nssai;
    std::array<std::uint8_t, 16> token{};
    std::vector<RouterDescriptor> attested;
    Address peer;
    std::uint32_t link = 0;
    bool active = true;
    std::uint64_t messages = 0;
};

struct Delivery {
    Bytes id_core;
    CoreInfoRecord info;
    Bytes data;
    std::size_t size = 0;
    Sha256Digest digest{};
};

/// 5G core user-plane endpoint: attests the RANs of each new session and
/// accepts uplink data addressed to a registered ID_CORE.
class CoreNode : public Reactor {
public:
    CoreNode(CoreConfig config, Rng rng);

    Address address() const override { return config_.address; }
    std::vector<Outbound> on_cell(Address from, const Cell& cell) override;

    /// Decrypts and verifies the RAN descriptors and registers the session.
    /// Returns the ACK token. Throws AttestationFailure, SingleRanRejected,
    /// EpochMismatch or Malformed.
    Bytes core_handle_ng_setup(Address from, std::uint32_t link, ByteView payload, std::uint8_t epoch);

    /// Throws UnknownSession.
    const Delivery& core_deliver(ByteView id_core, ByteView data, const CoreInfoRecord& info);

    const CoreSession* session(ByteView id_core) const;
    std::size_t session_count() const { return sessions_.size(); }
    const std::vector<Delivery>& deliveries() const { return deliveries_; }
    void set_delivery_hook(std::function<void(const Delivery&)> hook) { hook_ = std::move(hook); }

    /// Installs the next epoch's short-term key.
    void rotate_key(OnionKeyPair key, std::uint32_t epoch);
    void set_snapshot(DirectorySnapshot snapshot) { config_.snapshot = std::move(snapshot); }
    std::uint32_t epoch() const { return config_.epoch; }
    AuditLog& log() { return log_; }

private:
    struct LinkKey {
        Address peer;
        std::uint32_t link = 0;
        auto operator<=>(const LinkKey&) const = default;
    };
    struct LinkState {
        RunningDigest digest;
        MessageAssembler message;
        Bytes id_core;
    };

    void handle_relay(const LinkKey& key, LinkState& link, const Cell& cell);

    CoreConfig config_;
    Rng rng_;
    AuditLog log_;
    TrainAssembler trains_;
    std::map<Bytes, CoreSession> sessions_;
    std::map<LinkKey, LinkState> links_;
    std::vector<Delivery> deliveries_;
    std::function<void(const Delivery&)> hook_;
};

} // namespace spns
