#include "spns/scenario.hpp"

#include <mutex>

namespace spns {

NetworkKeys NetworkKeys::generate(std::size_t ran_count, Rng& rng)
{
    NetworkKeys k{IdentityKeyPair::generate(rng), OnionKeyPair::generate(), {}};
    for (std::size_t i = 0; i < ran_count; ++i) k.rans.push_back(NodeKeySet::generate(rng));
    return k;
}

const NetworkKeys& NetworkKeys::shared(std::size_t ran_count)
{
    static std::mutex mu;
    static std::unique_ptr<NetworkKeys> keys;
    static Rng rng(std::uint64_t{0x5eed});
    std::lock_guard lock(mu);
    if (!keys) keys = std::make_unique<NetworkKeys>(generate(ran_count, rng));
    while (keys->rans.size() < ran_count) keys->rans.push_back(NodeKeySet::generate(rng));
    return *keys;
}

Address address_for(std::string_view name)
{
    const auto h = sha256({to_bytes("spns-node:"), to_bytes(name)});
    return Address::from_bytes(ByteView(h).first(8));
}

RouterDescriptor make_descriptor(std::size_t index, const NodeKeySet& keys, std::uint32_t nssai)
{
    RouterDescriptor d;
    d.node_name = "ran-" + std::to_string(index + 1);
    d.gnb_id = 0x100 + static_cast<std::uint32_t>(index);
    d.location_area = static_cast<std::uint16_t>(0x0101 + index);
    d.supported_nssai = {Nssai::from_u32(nssai)};
    d.slice_part = {static_cast<std::uint8_t>(index)};
    d.identity_public = keys.identity.public_key();
    d.onion_public = keys.onion.public_key();
    d.address = address_for(d.node_name);
    return d;
}

Scenario::Scenario(ScenarioConfig config, const NetworkKeys& keys)
    : config_(config), rng_(config.seed), net_(config.link)
{
    if (keys.rans.size() < config_.ran_count) throw Error(ErrorCode::InvalidArgument, "not enough RAN key sets");
    net_.set_tracing(config_.trace);
    const auto core_address = address_for("core");
    directory_ = std::make_unique<Directory>(keys.directory, keys.core_epoch.public_key(), core_address, config_.epoch);

    std::vector<RouterDescriptor> descriptors;
    for (std::size_t i = 0; i < config_.ran_count; ++i) {
        descriptors.push_back(descriptor_sign(make_descriptor(i, keys.rans[i], config_.nssai), keys.rans[i].identity));
        directory_->publish(descriptors.back());
    }
    snapshot_ = directory_->fetch_snapshot();

    for (std::size_t i = 0; i < config_.ran_count; ++i) {
        RanConfig rc;
        rc.keys = keys.rans[i];
        rc.descriptor = descriptors[i];
        rc.snapshot = snapshot_;
        rc.audit = config_.audit;
        rans_.push_back(std::make_unique<RanNode>(rc, rng_.derive(descriptors[i].node_name), net_.clock()));
        net_.attach(*rans_.back());
    }

    CoreConfig cc;
    cc.address = core_address;
    cc.epoch_key = keys.core_epoch;
    cc.epoch = config_.epoch;
    cc.snapshot = snapshot_;
    cc.audit = config_.audit;
    cc.retain_data = config_.retain_data;
    core_ = std::make_unique<CoreNode>(cc, rng_.derive("core"));
    net_.attach(*core_);

    rng_.fill(ue_identity_);
    do {
        rng_.fill(nsi_.bytes);
    } while (!nsi_.assigned());
    UeConfig uc;
    uc.ue_identity = ue_identity_;
    uc.nsi = nsi_;
    uc.nssai = Nssai::from_u32(config_.nssai);
    uc.hops = config_.hops;
    uc.path_seed = rng_.u64();
    uc.leak_identity_to_all_hops = config_.leak_identity_to_all_hops;
    ue_ = std::make_unique<UeClient>(address_for("ue"), uc, snapshot_, keys.directory.public_key(), rng_.derive("ue"),
                                     net_.clock());
    ue_->log().set_enabled(config_.audit);
    net_.attach(*ue_);
}

void Scenario::build_circuit()
{
    net_.send_all(ue_->address(), ue_->start());
    net_.run_until_idle();
    if (ue_->status() != CircuitStatus::established) {
        std::string why = "setup: circuit is " + std::string(to_string(ue_->status()));
        if (ue_->failure()) why += " (" + std::string(to_string(*ue_->failure())) + ")";
        if (ue_->destroy_reason()) why += " (destroyed: " + std::string(to_string(*ue_->destroy_reason())) + ")";
        throw Error(ErrorCode::ScenarioFailure, why);
    }
    if (!core_->session(ue_->circuit().id_core()))
        throw Error(ErrorCode::ScenarioFailure, "setup: core registered no session for the circuit");
    deliveries_before_ = core_->deliveries().size();
}

void Scenario::send(ByteView data)
{
    net_.send_all(ue_->address(), ue_->send(data));
    net_.run_until_idle();
    const auto& d = core_->deliveries();
    if (d.size() != deliveries_before_ + 1)
        throw Error(ErrorCode::ScenarioFailure, "transfer: core received " + std::to_string(d.size() - deliveries_before_) +
                                                    " messages, expected 1");
    deliveries_before_ = d.size();
    if (d.back().size != data.size() || d.back().digest != sha256(data))
        throw Error(ErrorCode::ScenarioFailure, "transfer: core egress differs from the sent data");
}

RanNode& Scenario::ran(Address a)
{
    for (auto& r : rans_)
        if (r->address() == a) return *r;
    throw Error(ErrorCode::UnknownEndpoint, "no RAN at " + a.to_string());
}

RanNode& Scenario::hop(std::size_t i)
{
    return ran(ue_->path().at(i).address);
}

std::vector<AuditLog*> Scenario::logs()
{
    std::vector<AuditLog*> out{&ue_->log()};
    for (auto& r : rans_) out.push_back(&r->log());
    out.push_back(&core_->log());
    return out;
}

SecretsManifest Scenario::manifest(ByteView sent_data) const
{
    SecretsManifest m;
    const auto& path = ue_->path();
    for (std::size_t i = 0; i < path.size(); ++i)
        m.roles[path[i].node_name] = i == 0 ? "secondary" : (i + 1 == path.size() ? "master" : "middle");
    m.roles[core_->log().node()] = "core";
    m.ue_identity.assign(ue_identity_.begin(), ue_identity_.end());
    const auto a = snapshot_.core_address.bytes();
    m.address_core.assign(a.begin(), a.end());
    m.id_core = ue_->circuit().id_core();
    m.data_samples = data_samples(sent_data);
    return m;
}

} // namespace spns
