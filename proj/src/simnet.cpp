#include "spns/simnet.hpp"

#include <algorithm>
#include <cstdio>

namespace spns {

void LinkModel::validate() const
{
    if (bandwidth_bps == 0) throw Error(ErrorCode::InvalidArgument, "link bandwidth must be positive");
    if (max_jitter_us > 0 && !jitter_seed) throw Error(ErrorCode::InvalidArgument, "jitter needs a seed");
}

std::uint64_t LinkModel::cell_time_ns() const
{
    constexpr std::uint64_t bits = kCellSize * 8;
    return (bits * 1'000'000'000ull + bandwidth_bps - 1) / bandwidth_bps;
}

std::string TraceEvent::to_string() const
{
    char buf[160];
    std::snprintf(buf, sizeof buf, "%llu %s>%s %s link=%08x len=%u h=%s", static_cast<unsigned long long>(time_ns),
                  from.to_string().c_str(), to.to_string().c_str(), std::string(spns::to_string(command)).c_str(), link,
                  static_cast<unsigned>(payload_len), to_hex(cell_hash).c_str());
    return buf;
}

SimNet::SimNet(LinkModel default_link) : default_link_(default_link)
{
    default_link_.validate();
}

void SimNet::attach(Reactor& node)
{
    if (!nodes_.emplace(node.address(), &node).second)
        throw Error(ErrorCode::InvalidArgument, "endpoint " + node.address().to_string() + " registered twice");
}

void SimNet::set_link(Address from, Address to, LinkModel model)
{
    model.validate();
    auto& l = link(from, to);
    l.model = model;
    l.jitter.reset();
    if (model.jitter_seed) l.jitter.emplace(*model.jitter_seed);
}

SimNet::LinkState& SimNet::link(Address from, Address to)
{
    auto [it, inserted] = links_.try_emplace({from, to});
    if (inserted) {
        it->second.from = from;
        it->second.to = to;
        it->second.model = default_link_;
        if (default_link_.jitter_seed) {
            // Distinct but reproducible jitter stream per pair.
            Rng base(*default_link_.jitter_seed);
            it->second.jitter.emplace(base.derive(from.to_string() + ">" + to.to_string()));
        }
    }
    return it->second;
}

Clock SimNet::clock() const
{
    return [this] { return now_ / 1000; };
}

void SimNet::send(Address from, Address to, const Cell& cell)
{
    if (!nodes_.contains(from)) throw Error(ErrorCode::UnknownEndpoint, "unknown sender " + from.to_string());
    if (!nodes_.contains(to)) throw Error(ErrorCode::UnknownEndpoint, "unknown destination " + to.to_string());
    auto& l = link(from, to);
    const auto start = std::max(now_, l.busy_until);
    l.busy_until = start + l.model.cell_time_ns();
    auto arrival = l.busy_until + l.model.propagation_delay_us * 1000;
    if (l.jitter && l.model.max_jitter_us > 0) arrival += l.jitter->uniform(l.model.max_jitter_us * 1000 + 1);
    arrival = std::max(arrival, l.last_arrival);
    l.last_arrival = arrival;
    const auto seq = seq_++;
    if (l.in_flight.empty()) queue_.push(Head{arrival, seq, &l});
    l.in_flight.push_back(Pending{arrival, seq, cell});
}

void SimNet::send_all(Address from, const std::vector<Outbound>& out)
{
    for (const auto& o : out) send(from, o.to, o.cell);
}

bool SimNet::step()
{
    if (queue_.empty()) return false;
    auto& l = *queue_.top().link;
    queue_.pop();
    struct Event {
        std::uint64_t time;
        Address from;
        Address to;
        Cell cell;
    } ev{l.in_flight.front().time, l.from, l.to, l.in_flight.front().cell};
    l.in_flight.pop_front();
    if (!l.in_flight.empty()) queue_.push(Head{l.in_flight.front().time, l.in_flight.front().seq, &l});
    now_ = ev.time;

    if (tamper_) {
        auto changed = tamper_(ev.from, ev.to, ev.cell);
        if (!changed) return true;
        ev.cell = *changed;
    }
    if (tracing_) {
        TraceEvent t;
        t.time_ns = ev.time;
        t.from = ev.from;
        t.to = ev.to;
        t.command = ev.cell.command;
        t.link = ev.cell.link_id;
        t.payload_len = ev.cell.payload_len;
        const auto wire = encode_cell(ev.cell);
        const auto h = sha256(wire);
        std::copy_n(h.begin(), 4, t.cell_hash.begin());
        trace_.push_back(t);
    }
    ++delivered_;
    auto out = nodes_.at(ev.to)->on_cell(ev.from, ev.cell);
    send_all(ev.to, out);
    return true;
}

std::size_t SimNet::run_until_idle(std::size_t max_events)
{
    std::size_t n = 0;
    while (!queue_.empty()) {
        if (n >= max_events)
            throw Error(ErrorCode::LivelockDetected, "event cap of " + std::to_string(max_events) + " reached");
        step();
        ++n;
    }
    return n;
}

} // namespace spns
