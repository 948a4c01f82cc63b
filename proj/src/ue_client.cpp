#include "spns/ue_client.hpp"

#include <chrono>

namespace spns {

Clock wall_clock()
{
    return [] {
        using namespace std::chrono;
        return static_cast<std::uint64_t>(duration_cast<microseconds>(system_clock::now().time_since_epoch()).count());
    };
}

UeClient::UeClient(Address self, UeConfig config, const DirectorySnapshot& snapshot,
                   const IdentityPublicKey& directory_key, Rng rng, Clock clock)
    : self_(self), config_(config), rng_(std::move(rng)), clock_(std::move(clock)), log_("ue")
{
    if (!snapshot.verify(directory_key))
        throw Error(ErrorCode::InvalidDescriptor, "directory snapshot does not verify under the pinned key");
    path_ = select_hops(snapshot, config_.nssai, config_.hops, config_.path_seed);

    CircuitConfig cc;
    cc.ue_identity = config_.ue_identity;
    cc.nsi = config_.nsi;
    cc.nssai = config_.nssai;
    cc.t_core = TCore::from_snapshot(snapshot);
    cc.group = config_.group;
    cc.leak_identity_to_all_hops = config_.leak_identity_to_all_hops;
    circ_ = CircuitState::create(path_, cc, rng_);
}

std::vector<Outbound> UeClient::to_entry(std::vector<Cell> cells) const
{
    std::vector<Outbound> out;
    out.reserve(cells.size());
    for (auto& c : cells) out.push_back(Outbound{path_.front().address, std::move(c)});
    return out;
}

std::vector<Outbound> UeClient::fail_with(const Error& e)
{
    failure_ = e.code();
    if (auto next = circuit_transition(circ_.status, CircuitEvent::protocol_error, false)) circ_.status = *next;
    auto reason = e.code() == ErrorCode::KeyConfirmMismatch ? DestroyReason::crypto : DestroyReason::protocol;
    return to_entry({Cell::destroy(circ_.entry_link_id, reason)});
}

std::vector<Outbound> UeClient::start()
{
    return to_entry(build_create(circ_, path_.front(), rng_));
}

std::vector<Outbound> UeClient::on_hop_ready(CreatedOutcome outcome)
{
    if (outcome != CreatedOutcome::hop_established) return {};
    return to_entry(build_extend(circ_, path_[circ_.confirmed_hops()], rng_));
}

std::vector<Outbound> UeClient::on_cell(Address from, const Cell& cell)
{
    if (from != path_.front().address || cell.link_id != circ_.entry_link_id) {
        log_.record("in", cell.link_id, cell.body(), "dropped");
        return {};
    }
    try {
        switch (cell.command) {
        case CellCommand::created: {
            auto payload = trains_.feed(from.value, cell);
            if (!payload) return {};
            return on_hop_ready(handle_created(circ_, cell.link_id, *payload));
        }
        case CellCommand::relay: {
            RelayPayload p;
            std::copy(cell.payload.begin(), cell.payload.end(), p.begin());
            auto [hop, header] = open_backward(circ_, p);
            if (header.relay_cmd != RelayCommand::extended)
                throw Error(ErrorCode::Malformed, "unexpected backward relay command");
            auto& m = backward_[hop];
            m.feed(header.body);
            if (!m.complete()) return {};
            auto content = m.take();
            backward_.erase(hop);
            return on_hop_ready(handle_created(circ_, cell.link_id, content));
        }
        case CellCommand::destroy: {
            if (cell.payload_len >= 1) destroy_reason_ = static_cast<DestroyReason>(cell.payload[0]);
            if (auto next = circuit_transition(circ_.status, CircuitEvent::destroy_received, false)) circ_.status = *next;
            return {};
        }
        default:
            throw Error(ErrorCode::UnknownCommand, "unexpected command at UE");
        }
    } catch (const Error& e) {
        if (circ_.status == CircuitStatus::failed || circ_.status == CircuitStatus::closed) {
            failure_ = e.code();
            return {};
        }
        return fail_with(e);
    }
}

std::vector<Outbound> UeClient::send(ByteView data)
{
    auto onion = build_onion(circ_, data, clock_());
    return to_entry(onion.to_cells(circ_.entry_link_id));
}

std::vector<Outbound> UeClient::close()
{
    if (circ_.status != CircuitStatus::established) throw Error(ErrorCode::CircuitNotEstablished, "nothing to close");
    RelayHeader h;
    h.relay_cmd = RelayCommand::end;
    auto payload = seal_forward(circ_, circ_.hops.size() - 1, h);
    circ_.status = circuit_transition(circ_.status, CircuitEvent::close_requested, false).value();
    return to_entry({Cell::make(circ_.entry_link_id, CellCommand::relay, payload)});
}

} // namespace spns
