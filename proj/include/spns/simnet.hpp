#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <vector>

#include "spns/reactor.hpp"
#include "spns/rng.hpp"

namespace spns {

struct LinkModel {
    std::uint64_t bandwidth_bps = 10'000'000;
    std::uint64_t propagation_delay_us = 100;
    /// Adds up to this much extra delay per cell, drawn from the jitter seed.
    /// Per-pair FIFO is preserved regardless.
    std::uint64_t max_jitter_us = 0;
    std::optional<std::uint64_t> jitter_seed;

    /// Throws InvalidArgument on zero bandwidth.
    void validate() const;
    /// Serialization time of one cell in nanoseconds (bandwidth-rounded up).
    std::uint64_t cell_time_ns() const;
};

struct TraceEvent {
    std::uint64_t time_ns = 0;
    Address from;
    Address to;
    CellCommand command = CellCommand::relay;
    std::uint32_t link = 0;
    std::uint16_t payload_len = 0;
    std::array<std::uint8_t, 4> cell_hash{};

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
    std::string to_string() const;
};

/// Deterministic single-threaded network over a virtual clock. Each directed
/// pair is a serial link: a cell starts transmitting once the previous cell
/// on that pair has left, and arrives one propagation delay after it was
/// fully transmitted.
class SimNet {
public:
    explicit SimNet(LinkModel default_link = {});

    /// Registers a node. The network does not own it.
    void attach(Reactor& node);
    /// Overrides the model of one directed pair.
    void set_link(Address from, Address to, LinkModel model);

    /// Schedules a cell. Throws UnknownEndpoint if either side is unknown.
    void send(Address from, Address to, const Cell& cell);
    void send_all(Address from, const std::vector<Outbound>& out);

    /// Processes events until none remain. Throws LivelockDetected when more
    /// than max_events are processed in this call.
    std::size_t run_until_idle(std::size_t max_events = 50'000'000);
    /// Processes one event; false when the queue is empty.
    bool step();

    std::uint64_t now_ns() const { return now_; }
    /// Microsecond clock reading the virtual time.
    Clock clock() const;

    void set_tracing(bool on) { tracing_ = on; }
    const std::vector<TraceEvent>& trace() const { return trace_; }
    std::size_t delivered() const { return delivered_; }

    /// Test hook: sees every cell at delivery time and may rewrite it or
    /// return nullopt to drop it.
    using Tamper = std::function<std::optional<Cell>(Address from, Address to, const Cell& cell)>;
    void set_tamper(Tamper t) { tamper_ = std::move(t); }

private:
    struct Pending {
        std::uint64_t time;
        std::uint64_t seq;
        Cell cell;
    };
    struct LinkState {
        Address from;
        Address to;
        LinkModel model;
        std::uint64_t busy_until = 0;
        std::uint64_t last_arrival = 0;
        std::optional<Rng> jitter;
        std::deque<Pending> in_flight;
    };
    // Arrivals on one link are already in time order, so the global queue
    // only holds the head of each busy link.
    struct Head {
        std::uint64_t time;
        std::uint64_t seq;
        LinkState* link;
    };
    struct Later {
        bool operator()(const Head& a, const Head& b) const
        {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };

    LinkState& link(Address from, Address to);

    LinkModel default_link_;
    std::map<Address, Reactor*> nodes_;
    std::map<std::pair<Address, Address>, LinkState> links_;
    std::priority_queue<Head, std::vector<Head>, Later> queue_;
    std::uint64_t now_ = 0;
    std::uint64_t seq_ = 0;
    bool tracing_ = true;
    std::vector<TraceEvent> trace_;
    std::size_t delivered_ = 0;
    Tamper tamper_;
};

} // namespace spns
