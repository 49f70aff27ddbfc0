#include "panel/simnet.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <queue>
#include <set>
#include <unordered_map>

#include "panel/checksum.hpp"
#include "panel/pcap.hpp"

namespace panel::sim {

namespace {

enum class NodeKind : std::uint8_t { Host, Landmark, LegacyHop, Vantage };

struct ResolvedRoute {
    Cidr prefix;
    int link = -1;
};

struct Node {
    NodeKind kind;
    std::string name;
    int type_index = 0;  // index into the per-kind vector
    std::vector<ResolvedRoute> routes;  // sorted most-specific first
};

struct Wire {
    int from = -1;
    int to = -1;
    SimTime latency = 0;
    std::string name;
};

// Everything about one packet in flight that the network itself would not
// carry; ground truth and bookkeeping only.
struct Meta {
    std::uint64_t session_uid = 0;
    std::uint64_t packet_uid = 0;
    bool upstream = true;
    int distance_from_landmark = -1;  // legacy hops since a landmark wrote the TTL
    int total_hops = 0;
    std::vector<std::string> trail;
};

struct Event {
    SimTime t = 0;
    std::uint64_t seq = 0;
    enum class Kind : std::uint8_t { Arrival, SessionStart, DataDue } kind = Kind::Arrival;
    int node = -1;
    int link = -1;
    std::size_t session = 0;
    std::size_t data_index = 0;
    std::shared_ptr<PacketView> pkt;
    std::shared_ptr<Meta> meta;

    bool operator>(const Event& other) const {
        if (t != other.t) return t > other.t;
        return seq > other.seq;
    }
};

std::uint32_t rel(std::uint32_t seq, std::uint32_t base) { return seq - base; }

// Per-session client automaton state.
struct ClientSession {
    const SessionScript* script = nullptr;
    std::uint64_t uid = 0;
    int host_node = -1;
    IpAddr server_ip = 0;
    std::uint16_t src_port = 0;
    std::uint32_t isn = 0;
    std::uint32_t next_seq = 0;     // next client seq to use (absolute)
    std::uint32_t server_rcv = 0;   // next expected server seq (absolute)
    std::uint32_t server_isn = 0;
    bool handshake_done = false;
    bool fin_sent = false;
    bool closed = false;
    SimTime syn_time = -1;
    SimTime start_time = 0;
    std::size_t data_sent = 0;
    std::size_t data_acked = 0;
    std::vector<SimTime> data_send_times;
    std::vector<SimTime> data_rtts;
    std::vector<std::uint32_t> valid_ack_rel;  // cumulative positions a server ack may take
    bool ack_ok = true;
    bool sack_ok = true;
    std::size_t echoes_received = 0;  // UDP
};

struct ServerPeerKey {
    IpAddr peer_ip;
    std::uint16_t peer_port;
    std::uint16_t local_port;
    L4Proto proto;
    bool operator==(const ServerPeerKey&) const = default;
};

struct ServerPeerKeyHash {
    std::size_t operator()(const ServerPeerKey& k) const {
        std::uint64_t v = (static_cast<std::uint64_t>(k.peer_ip) << 32) ^
                          (static_cast<std::uint64_t>(k.peer_port) << 16) ^ k.local_port ^
                          (static_cast<std::uint64_t>(k.proto) << 56);
        return std::hash<std::uint64_t>{}(v);
    }
};

struct ServerPeer {
    std::uint32_t isn = 0;
    std::uint32_t next_seq = 0;
    std::uint32_t rcv_next = 0;
    std::size_t data_seen = 0;
    std::size_t datagrams_seen = 0;
    bool fin_seen = false;
};

struct HostState {
    std::uint32_t isn_base = 0;
    std::uint32_t isn_count = 0;
    std::uint16_t ip_id_counter = 0;
    std::uint16_t next_port = 20001;
    std::unordered_map<ServerPeerKey, ServerPeer, ServerPeerKeyHash> peers;
};

class Simulator {
public:
    Simulator(const Topology& topo, const std::vector<SessionScript>& scripts, std::uint64_t seed,
              const RunOptions& options)
        : topo_(topo), scripts_(scripts), options_(options), master_(ChaChaRng::from_seed(seed)) {
        bundle_.seed = seed;
        build_graph();
        init_state();
    }

    TraceBundle run() {
        for (std::size_t i = 0; i < scripts_.size(); ++i) {
            Event e;
            e.t = scripts_[i].start;
            e.seq = next_seq_++;
            e.kind = Event::Kind::SessionStart;
            e.session = i;
            queue_.push(std::move(e));
        }
        while (!queue_.empty()) {
            Event e = queue_.top();
            queue_.pop();
            switch (e.kind) {
                case Event::Kind::SessionStart: on_session_start(e); break;
                case Event::Kind::DataDue: on_data_due(e); break;
                case Event::Kind::Arrival: on_arrival(e); break;
            }
        }
        for (auto& [name, idx] : landmark_engines_)
            bundle_.landmark_counters[name] = idx->counters();
        return std::move(bundle_);
    }

private:
    // ---- construction -----------------------------------------------------
    void build_graph() {
        topo_.validate();
        auto add_node = [&](NodeKind kind, const std::string& name, int ti) {
            if (name_to_node_.count(name)) throw ConfigError("duplicate node name: " + name);
            name_to_node_[name] = static_cast<int>(nodes_.size());
            nodes_.push_back(Node{kind, name, ti, {}});
        };
        for (std::size_t i = 0; i < topo_.hosts.size(); ++i)
            add_node(NodeKind::Host, topo_.hosts[i].name, static_cast<int>(i));
        for (std::size_t i = 0; i < topo_.landmarks.size(); ++i)
            add_node(NodeKind::Landmark, topo_.landmarks[i].name, static_cast<int>(i));
        for (std::size_t i = 0; i < topo_.legacy_hops.size(); ++i)
            add_node(NodeKind::LegacyHop, topo_.legacy_hops[i].name, static_cast<int>(i));
        for (std::size_t i = 0; i < topo_.vantages.size(); ++i)
            add_node(NodeKind::Vantage, topo_.vantages[i].name, static_cast<int>(i));

        for (const LinkDef& l : topo_.links) {
            Wire w;
            w.from = node_id(l.from);
            w.to = node_id(l.to);
            w.latency = l.latency;
            w.name = l.from + "->" + l.to;
            wires_.push_back(w);
        }
        for (const auto& [name, routes] : topo_.routes) {
            Node& n = nodes_[static_cast<std::size_t>(node_id(name))];
            for (const Route& r : routes) {
                int link = -1;
                const int via = node_id(r.via);
                for (std::size_t i = 0; i < wires_.size(); ++i)
                    if (wires_[i].from == node_id(name) && wires_[i].to == via)
                        link = static_cast<int>(i);
                if (link < 0)
                    throw ConfigError("route at " + name + " via " + r.via + " has no link");
                n.routes.push_back(ResolvedRoute{r.prefix, link});
            }
            std::stable_sort(n.routes.begin(), n.routes.end(),
                             [](const ResolvedRoute& a, const ResolvedRoute& b) {
                                 return a.prefix.prefix_len > b.prefix.prefix_len;
                             });
        }
    }

    void init_state() {
        for (auto& lm : topo_.landmarks) {
            const std::uint64_t engine_seed = master_();
            if (!lm.enabled) continue;
            LandmarkConfig cfg = lm.config;
            if (!cfg.seed) cfg.seed = seed_key_from_u64(engine_seed);
            landmark_engines_[lm.name] = std::make_unique<LandmarkEngine>(std::move(cfg));
        }
        host_state_.resize(topo_.hosts.size());
        for (auto& hs : host_state_) {
            hs.isn_base = static_cast<std::uint32_t>(master_());
            hs.ip_id_counter = static_cast<std::uint16_t>(master_());
        }
        sessions_.resize(scripts_.size());
        bundle_.sessions.resize(scripts_.size());
        for (std::size_t i = 0; i < scripts_.size(); ++i) {
            const SessionScript& s = scripts_[i];
            ClientSession& cs = sessions_[i];
            cs.script = &s;
            cs.uid = i;
            cs.host_node = node_id(s.client);
            cs.server_ip = host_model(node_id(s.server)).ip;
            HostState& hs = host_state_[static_cast<std::size_t>(nodes_[cs.host_node].type_index)];
            cs.src_port = hs.next_port++;
            if (hs.next_port < 20001) throw ConfigError("client port space exhausted");

            SessionRecord& rec = bundle_.sessions[i];
            rec.uid = i;
            rec.client = s.client;
            rec.server = s.server;
            rec.protocol = s.protocol;
            rec.client_port = cs.src_port;
        }
    }

    int node_id(const std::string& name) const {
        auto it = name_to_node_.find(name);
        if (it == name_to_node_.end()) throw ConfigError("unknown node: " + name);
        return it->second;
    }
    const HostModel& host_model(int node) const {
        return topo_.hosts[static_cast<std::size_t>(nodes_[static_cast<std::size_t>(node)].type_index)];
    }
    HostState& host_state(int node) {
        return host_state_[static_cast<std::size_t>(nodes_[static_cast<std::size_t>(node)].type_index)];
    }

    // ---- host stack model ---------------------------------------------------
    std::uint16_t next_ip_id(int host_node) {
        const HostModel& m = host_model(host_node);
        HostState& st = host_state(host_node);
        if (m.ip_id_mode == HostModel::IpIdMode::Sequential) return st.ip_id_counter++;
        return static_cast<std::uint16_t>(master_());
    }

    std::uint32_t next_isn(int host_node, SimTime now) {
        const HostModel& m = host_model(host_node);
        HostState& st = host_state(host_node);
        if (m.isn_mode == HostModel::IsnMode::Random) return static_cast<std::uint32_t>(master_());
        // Classic clock-driven ISN: per-connection bump plus a slow timer.
        return st.isn_base + 64000u * st.isn_count++ +
               static_cast<std::uint32_t>(now / millis(1)) * 250u;
    }

    PacketView make_packet(int src_host, IpAddr dst_ip, std::uint16_t sport, std::uint16_t dport,
                           L4Proto proto, std::uint8_t flags, std::uint32_t seq, std::uint32_t ack,
                           std::vector<std::uint8_t> payload,
                           const std::vector<SackBlock>& sack = {}) {
        PacketView p;
        p.protocol = proto;
        p.src_ip = host_model(src_host).ip;
        p.dst_ip = dst_ip;
        p.ttl = host_model(src_host).initial_ttl;
        p.ip_id = next_ip_id(src_host);
        p.df = true;
        p.src_port = sport;
        p.dst_port = dport;
        p.payload = std::move(payload);
        if (proto == L4Proto::Tcp) {
            p.tcp_seq = seq;
            p.tcp_ack = ack;
            p.tcp_flags = flags;
            p.tcp_window = 64000;
            if (!sack.empty()) {
                // NOP NOP SACK(len) blocks...
                p.tcp_options.assign(4 + 8 * sack.size(), 0);
                p.tcp_options[0] = 1;
                p.tcp_options[1] = 1;
                p.tcp_options[2] = 5;
                p.tcp_options[3] = static_cast<std::uint8_t>(2 + 8 * sack.size());
                p.sack_offset = 4;
                p.sack_blocks = sack;
                for (std::size_t i = 0; i < sack.size(); ++i) {
                    store_be32(p.tcp_options.data() + 4 + 8 * i, sack[i].left);
                    store_be32(p.tcp_options.data() + 4 + 8 * i + 4, sack[i].right);
                }
            }
        }
        refresh_checksums(p);
        p.l4_check = PacketView::ChecksumState::Valid;
        return p;
    }

    void send_from_host(int host_node, PacketView pkt, std::uint64_t session_uid, bool upstream,
                        SimTime now) {
        auto meta = std::make_shared<Meta>();
        meta->session_uid = session_uid;
        meta->packet_uid = next_packet_uid_++;
        meta->upstream = upstream;
        meta->trail.push_back(nodes_[static_cast<std::size_t>(host_node)].name);
        route_and_schedule(host_node, std::make_shared<PacketView>(std::move(pkt)), meta, now);
    }

    // ---- forwarding ---------------------------------------------------------
    void route_and_schedule(int node, const std::shared_ptr<PacketView>& pkt,
                            const std::shared_ptr<Meta>& meta, SimTime now) {
        const Node& n = nodes_[static_cast<std::size_t>(node)];
        const ResolvedRoute* match = nullptr;
        for (const ResolvedRoute& r : n.routes)
            if (r.prefix.contains(pkt->dst_ip)) {
                match = &r;
                break;
            }
        if (!match) {
            ++bundle_.unroutable_drops;
            bundle_.drops.push_back(
                {now, n.name, "unroutable:" + format_ip(pkt->dst_ip), meta->session_uid});
            return;
        }
        const Wire& w = wires_[static_cast<std::size_t>(match->link)];
        if (options_.pcap_dir) write_link_pcap(w, *pkt, now);
        Event e;
        e.t = now + w.latency;
        e.seq = next_seq_++;
        e.kind = Event::Kind::Arrival;
        e.node = w.to;
        e.link = match->link;
        e.pkt = pkt;
        e.meta = meta;
        queue_.push(std::move(e));
    }

    void write_link_pcap(const Wire& w, const PacketView& pkt, SimTime now) {
        auto it = link_pcaps_.find(w.name);
        if (it == link_pcaps_.end()) {
            std::string fname = w.name;
            for (char& c : fname)
                if (c == '>' || c == '-') c = '_';
            auto writer = std::make_unique<PcapWriter>(
                (std::filesystem::path(*options_.pcap_dir) / ("link_" + fname + ".pcap")).string(),
                linktype::kRawIp);
            it = link_pcaps_.emplace(w.name, std::move(writer)).first;
        }
        PcapRecord rec;
        rec.ts = now;
        rec.data = serialize_packet(pkt, {.recompute_checksums = false});
        it->second->write(rec);
    }

    // ---- node behavior ------------------------------------------------------
    void on_arrival(Event& e) {
        Node& n = nodes_[static_cast<std::size_t>(e.node)];
        Meta& meta = *e.meta;
        meta.trail.push_back(n.name);
        if (++meta.total_hops > 512) {
            ++bundle_.unroutable_drops;
            bundle_.drops.push_back({e.t, n.name, "hop-budget", meta.session_uid});
            return;
        }
        switch (n.kind) {
            case NodeKind::Host: deliver(e); return;
            case NodeKind::Vantage: on_vantage(e); return;
            case NodeKind::LegacyHop: on_legacy_hop(e, e.t); return;
            case NodeKind::Landmark: on_landmark(e); return;
        }
    }

    bool decrement_ttl(PacketView& pkt, const std::string& node, SimTime now,
                       std::uint64_t session_uid) {
        if (pkt.ttl <= 1) {
            ++bundle_.ttl_expired_drops;
            bundle_.drops.push_back({now, node, "ttl-expired", session_uid});
            return false;
        }
        const std::uint16_t old_word =
            static_cast<std::uint16_t>(pkt.ttl << 8 | static_cast<std::uint8_t>(pkt.protocol));
        --pkt.ttl;
        const std::uint16_t new_word =
            static_cast<std::uint16_t>(pkt.ttl << 8 | static_cast<std::uint8_t>(pkt.protocol));
        pkt.ip_checksum = incremental_checksum_update(old_word, new_word, pkt.ip_checksum);
        return true;
    }

    void on_legacy_hop(Event& e, SimTime now) {
        if (!decrement_ttl(*e.pkt, nodes_[static_cast<std::size_t>(e.node)].name, now,
                           e.meta->session_uid))
            return;
        if (e.meta->distance_from_landmark >= 0) ++e.meta->distance_from_landmark;
        route_and_schedule(e.node, e.pkt, e.meta, now);
    }

    void on_vantage(Event& e) {
        Node& n = nodes_[static_cast<std::size_t>(e.node)];
        const VantageNode& v = topo_.vantages[static_cast<std::size_t>(n.type_index)];
        const PacketView& p = *e.pkt;
        VantageObservation obs;
        obs.time = e.t;
        obs.link = e.link >= 0 ? wires_[static_cast<std::size_t>(e.link)].name : "local";
        obs.src_ip = p.src_ip;
        obs.dst_ip = p.dst_ip;
        obs.ttl = p.ttl;
        obs.ip_id = p.ip_id;
        obs.tcp_seq = p.is_tcp() ? p.tcp_seq : 0;
        obs.src_port = p.src_port;
        obs.dst_port = p.dst_port;
        auto& log = bundle_.observations[v.name];
        const std::uint64_t index = log.size();
        log.push_back(obs);
        bundle_.observation_truth[v.name].push_back(
            {e.meta->session_uid, e.meta->upstream, e.meta->distance_from_landmark});

        bool corrupted = false;
        for (const VantageNode::Action& a : v.actions) {
            if (a.at_index != index) continue;
            if (a.what == VantageNode::Action::What::Duplicate) {
                auto copy = std::make_shared<PacketView>(*e.pkt);
                auto meta2 = std::make_shared<Meta>(*e.meta);
                meta2->packet_uid = next_packet_uid_++;
                route_and_schedule(e.node, copy, meta2, e.t);
            } else {
                // Flip one header bit without fixing checksums.
                if (e.pkt->is_tcp())
                    e.pkt->tcp_seq ^= 1;
                else
                    e.pkt->ip_id ^= 1;
                corrupted = true;
            }
        }
        (void)corrupted;
        route_and_schedule(e.node, e.pkt, e.meta, e.t);
    }

    void on_landmark(Event& e) {
        Node& n = nodes_[static_cast<std::size_t>(e.node)];
        const LandmarkNode& lm = topo_.landmarks[static_cast<std::size_t>(n.type_index)];
        if (!lm.enabled) {
            // Pass-through mode: plain router.
            if (!decrement_ttl(*e.pkt, n.name, e.t, e.meta->session_uid)) return;
            if (e.meta->distance_from_landmark >= 0) ++e.meta->distance_from_landmark;
            route_and_schedule(e.node, e.pkt, e.meta, e.t);
            return;
        }
        LandmarkEngine& engine = *landmark_engines_.at(lm.name);
        LandmarkEngine::Result res;
        if (engine.owns(e.pkt->dst_ip))
            res = engine.process_downstream(*e.pkt, e.t);
        else
            res = engine.process_upstream(*e.pkt, e.t);
        if (LandmarkEngine::is_drop(res.status)) {
            bundle_.drops.push_back({e.t, n.name, drop_cause(res.status), e.meta->session_uid});
            return;
        }
        if (!engine.owns(e.pkt->dst_ip)) {
            // Upstream rewrite replaced the TTL: distance restarts here.
            e.meta->distance_from_landmark = 0;
        }
        const SimTime delay =
            res.establishment_event ? topo_.delays.establish : topo_.delays.forward;
        route_and_schedule(e.node, e.pkt, e.meta, e.t + delay);
    }

    static std::string drop_cause(LandmarkEngine::Status s) {
        switch (s) {
            case LandmarkEngine::Status::DropNoSession: return "no-session";
            case LandmarkEngine::Status::DropNoReverseEntry: return "no-reverse-entry";
            case LandmarkEngine::Status::DropCollision: return "collision";
            case LandmarkEngine::Status::DropTagSpaceExhausted: return "tag-space-exhausted";
            default: return "none";
        }
    }

    // ---- endpoint automata ----------------------------------------------------
    void on_session_start(const Event& e) {
        ClientSession& cs = sessions_[e.session];
        const SessionScript& s = *cs.script;
        cs.start_time = e.t;
        if (s.protocol == L4Proto::Tcp) {
            cs.isn = next_isn(cs.host_node, e.t);
            cs.next_seq = cs.isn + 1;
            cs.syn_time = e.t;
            bundle_.sessions[e.session].client_isn = cs.isn;
            cs.valid_ack_rel.push_back(1);  // SYN consumes one
            PacketView syn = make_packet(cs.host_node, cs.server_ip, cs.src_port, server_port(s),
                                         L4Proto::Tcp, tcpflags::kSyn, cs.isn, 0, {});
            send_from_host(cs.host_node, std::move(syn), cs.uid, true, e.t);
        } else {
            cs.handshake_done = true;
            for (std::size_t k = 0; k < s.data_offsets.size(); ++k)
                schedule_data(e.session, k, e.t + s.data_offsets[k]);
        }
        if (s.protocol == L4Proto::Tcp && s.data_offsets.empty()) {
            // Handshake-only session; FIN follows the handshake.
        }
    }

    static std::uint16_t server_port(const SessionScript& s) {
        return s.protocol == L4Proto::Tcp ? 80 : 53;
    }

    void schedule_data(std::size_t session, std::size_t k, SimTime when) {
        Event e;
        e.t = when;
        e.seq = next_seq_++;
        e.kind = Event::Kind::DataDue;
        e.session = session;
        e.data_index = k;
        queue_.push(std::move(e));
    }

    void on_data_due(const Event& e) {
        ClientSession& cs = sessions_[e.session];
        const SessionScript& s = *cs.script;
        if (s.protocol == L4Proto::Tcp) {
            auto payload = session_payload(cs.uid, true, e.data_index, s.payload_size);
            cs.valid_ack_rel.push_back(rel(cs.next_seq, cs.isn) +
                                       static_cast<std::uint32_t>(payload.size()));
            PacketView pkt = make_packet(cs.host_node, cs.server_ip, cs.src_port, server_port(s),
                                         L4Proto::Tcp, tcpflags::kAck | tcpflags::kPsh, cs.next_seq,
                                         cs.server_rcv, std::move(payload));
            cs.next_seq += s.payload_size;
            cs.data_send_times.push_back(e.t);
            ++cs.data_sent;
            send_from_host(cs.host_node, std::move(pkt), cs.uid, true, e.t);
        } else {
            auto payload = session_payload(cs.uid, true, e.data_index, s.payload_size);
            PacketView pkt = make_packet(cs.host_node, cs.server_ip, cs.src_port, server_port(s),
                                         L4Proto::Udp, 0, 0, 0, std::move(payload));
            cs.data_send_times.push_back(e.t);
            ++cs.data_sent;
            send_from_host(cs.host_node, std::move(pkt), cs.uid, true, e.t);
        }
    }

    void deliver(Event& e) {
        Node& n = nodes_[static_cast<std::size_t>(e.node)];
        const HostModel& host = host_model(e.node);
        PacketView& p = *e.pkt;
        if (p.dst_ip != host.ip) {
            ++bundle_.unroutable_drops;
            bundle_.drops.push_back({e.t, n.name, "stray-delivery", e.meta->session_uid});
            return;
        }
        if (!checksums_consistent(p)) {
            ++bundle_.checksum_drops;
            bundle_.drops.push_back({e.t, n.name, "bad-checksum", e.meta->session_uid});
            return;
        }
        DeliveryRecord rec;
        rec.time = e.t;
        rec.host = host.name;
        rec.session_uid = e.meta->session_uid;
        rec.upstream = e.meta->upstream;
        rec.src_ip = p.src_ip;
        rec.src_port = p.src_port;
        rec.payload = p.payload;
        bundle_.deliveries.push_back(std::move(rec));
        bundle_.hop_traces.push_back({e.meta->session_uid, e.meta->upstream, e.meta->trail});

        if (e.meta->upstream)
            server_receive(e);
        else
            client_receive(e);
    }

    static bool checksums_consistent(const PacketView& p) {
        auto bytes = serialize_packet(p);
        const std::size_t hl = p.header_length();
        if (load_be16(bytes.data() + 10) != p.ip_checksum) return false;
        if (p.non_first_fragment()) return true;
        if (p.is_udp() && p.l4_checksum == 0) return true;
        const std::size_t off = p.is_tcp() ? 16 : 6;
        return load_be16(bytes.data() + hl + off) == p.l4_checksum;
    }

    void server_receive(Event& e) {
        const PacketView& p = *e.pkt;
        ClientSession& cs = sessions_[e.meta->session_uid];
        const SessionScript& s = *cs.script;
        HostState& st = host_state(e.node);
        ServerPeerKey key{p.src_ip, p.src_port, p.dst_port, p.protocol};
        if (p.protocol == L4Proto::Udp) {
            ServerPeer& peer = st.peers[key];
            const std::size_t k = peer.datagrams_seen++;
            auto payload = session_payload(cs.uid, false, k, s.server_payload_size);
            PacketView echo = make_packet(e.node, p.src_ip, p.dst_port, p.src_port, L4Proto::Udp,
                                          0, 0, 0, std::move(payload));
            send_from_host(e.node, std::move(echo), cs.uid, false, e.t);
            return;
        }
        if (p.syn() && !p.ack_flag()) {
            ServerPeer peer;
            peer.isn = next_isn(e.node, e.t);
            peer.next_seq = peer.isn + 1;
            peer.rcv_next = p.tcp_seq + 1;
            st.peers[key] = peer;
            PacketView synack =
                make_packet(e.node, p.src_ip, p.dst_port, p.src_port, L4Proto::Tcp,
                            tcpflags::kSyn | tcpflags::kAck, peer.isn, peer.rcv_next, {});
            send_from_host(e.node, std::move(synack), cs.uid, false, e.t);
            return;
        }
        auto it = st.peers.find(key);
        if (it == st.peers.end()) return;  // landmark would have dropped this anyway
        ServerPeer& peer = it->second;
        if (!p.payload.empty()) {
            // In-order scripted exchange; duplicates must not regress.
            const std::uint32_t end = p.tcp_seq + static_cast<std::uint32_t>(p.payload.size());
            if (static_cast<std::int32_t>(end - peer.rcv_next) > 0) peer.rcv_next = end;
            const std::size_t k = peer.data_seen++;
            std::vector<SackBlock> sack;
            if (s.server_sack)
                sack.push_back({p.tcp_seq, p.tcp_seq + static_cast<std::uint32_t>(p.payload.size())});
            auto payload = session_payload(cs.uid, false, k, s.server_payload_size);
            PacketView reply = make_packet(
                e.node, p.src_ip, p.dst_port, p.src_port, L4Proto::Tcp,
                tcpflags::kAck | tcpflags::kPsh, peer.next_seq, peer.rcv_next, std::move(payload),
                sack);
            peer.next_seq += s.server_payload_size;
            send_from_host(e.node, std::move(reply), cs.uid, false, e.t);
            return;
        }
        if (p.tcp_flags & tcpflags::kFin) {
            peer.fin_seen = true;
            peer.rcv_next = p.tcp_seq + 1;
            PacketView finack =
                make_packet(e.node, p.src_ip, p.dst_port, p.src_port, L4Proto::Tcp,
                            tcpflags::kFin | tcpflags::kAck, peer.next_seq, peer.rcv_next, {});
            peer.next_seq += 1;
            send_from_host(e.node, std::move(finack), cs.uid, false, e.t);
            return;
        }
        // Pure ACK: nothing to do in a stack-free script.
    }

    void client_receive(Event& e) {
        const PacketView& p = *e.pkt;
        ClientSession& cs = sessions_[e.meta->session_uid];
        const SessionScript& s = *cs.script;
        SessionRecord& rec = bundle_.sessions[e.meta->session_uid];
        if (s.protocol == L4Proto::Udp) {
            const std::size_t k = cs.echoes_received++;
            if (k < cs.data_send_times.size()) {
                const SimTime rtt = e.t - cs.data_send_times[k];
                if (k == 0) rec.first_rtt = rtt;
                else cs.data_rtts.push_back(rtt);
                ++cs.data_acked;
            }
            finalize_if_done(cs, rec);
            return;
        }
        if (p.dst_port != cs.src_port) return;

        // Verify the restored ack sits on a cumulative position of the
        // client's own byte stream.
        const std::uint32_t ack_rel = rel(p.tcp_ack, cs.isn);
        if (p.ack_flag()) {
            bool ok = false;
            for (std::uint32_t v : cs.valid_ack_rel)
                if (ack_rel == v) ok = true;
            if (!ok) cs.ack_ok = false;
        }
        for (const SackBlock& sb : p.sack_blocks) {
            const std::uint32_t l = rel(sb.left, cs.isn);
            const std::uint32_t r = rel(sb.right, cs.isn);
            bool ok = false;
            for (std::size_t k = 0; k < cs.data_send_times.size(); ++k) {
                const std::uint32_t start = 1 + static_cast<std::uint32_t>(k) * s.payload_size;
                if (l == start && r == start + s.payload_size) ok = true;
            }
            if (!ok) cs.sack_ok = false;
        }

        if (p.syn() && p.ack_flag() && !cs.handshake_done) {
            cs.handshake_done = true;
            cs.server_isn = p.tcp_seq;
            cs.server_rcv = p.tcp_seq + 1;
            rec.first_rtt = e.t - cs.syn_time;
            PacketView ack = make_packet(cs.host_node, cs.server_ip, cs.src_port, server_port(s),
                                         L4Proto::Tcp, tcpflags::kAck, cs.next_seq, cs.server_rcv,
                                         {});
            send_from_host(cs.host_node, std::move(ack), cs.uid, true, e.t);
            for (std::size_t k = 0; k < s.data_offsets.size(); ++k)
                schedule_data(e.meta->session_uid, k,
                              std::max(e.t, cs.start_time + s.data_offsets[k]));
            maybe_send_fin(cs, e.t);
            return;
        }
        if (!p.payload.empty()) {
            const std::uint32_t end = p.tcp_seq + static_cast<std::uint32_t>(p.payload.size());
            if (static_cast<std::int32_t>(end - cs.server_rcv) > 0) cs.server_rcv = end;
            // Data replies acknowledge client data exchanges in order.
            if (cs.data_acked < cs.data_send_times.size()) {
                const SimTime rtt = e.t - cs.data_send_times[cs.data_acked];
                cs.data_rtts.push_back(rtt);
                ++cs.data_acked;
            }
            maybe_send_fin(cs, e.t);
            return;
        }
        if ((p.tcp_flags & tcpflags::kFin) && cs.fin_sent && !cs.closed) {
            cs.server_rcv = p.tcp_seq + 1;
            PacketView ack = make_packet(cs.host_node, cs.server_ip, cs.src_port, server_port(s),
                                         L4Proto::Tcp, tcpflags::kAck, cs.next_seq, cs.server_rcv,
                                         {});
            send_from_host(cs.host_node, std::move(ack), cs.uid, true, e.t);
            cs.closed = true;
            finalize_if_done(cs, rec);
            return;
        }
    }

    void maybe_send_fin(ClientSession& cs, SimTime now) {
        const SessionScript& s = *cs.script;
        if (cs.fin_sent || !cs.handshake_done) return;
        if (cs.data_sent < s.data_offsets.size() || cs.data_acked < s.data_offsets.size()) return;
        cs.valid_ack_rel.push_back(rel(cs.next_seq, cs.isn) + 1);  // FIN consumes one
        PacketView fin = make_packet(cs.host_node, cs.server_ip, cs.src_port, server_port(s),
                                     L4Proto::Tcp, tcpflags::kFin | tcpflags::kAck, cs.next_seq,
                                     cs.server_rcv, {});
        cs.next_seq += 1;
        cs.fin_sent = true;
        send_from_host(cs.host_node, std::move(fin), cs.uid, true, now);
    }

    void finalize_if_done(ClientSession& cs, SessionRecord& rec) {
        const SessionScript& s = *cs.script;
        const bool done = s.protocol == L4Proto::Tcp
                              ? cs.closed
                              : cs.data_acked >= s.data_offsets.size();
        if (!done) return;
        rec.completed = true;
        rec.data_packets_sent = cs.data_sent;
        rec.data_packets_acked = cs.data_acked;
        rec.ack_arithmetic_ok = cs.ack_ok;
        rec.sack_arithmetic_ok = cs.sack_ok;
        if (!cs.data_rtts.empty()) {
            SimTime total = 0;
            for (SimTime r : cs.data_rtts) total += r;
            rec.steady_rtt = total / static_cast<SimTime>(cs.data_rtts.size());
        }
    }

    const Topology& topo_;
    const std::vector<SessionScript>& scripts_;
    RunOptions options_;
    ChaChaRng master_;
    TraceBundle bundle_;

    std::vector<Node> nodes_;
    std::vector<Wire> wires_;
    std::map<std::string, int> name_to_node_;
    std::map<std::string, std::unique_ptr<LandmarkEngine>> landmark_engines_;
    std::vector<HostState> host_state_;
    std::vector<ClientSession> sessions_;
    std::map<std::string, std::unique_ptr<PcapWriter>> link_pcaps_;

    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t next_packet_uid_ = 0;
};

}  // namespace

std::vector<std::uint8_t> session_payload(std::uint64_t session_uid, bool upstream,
                                          std::size_t packet_index, std::size_t size) {
    std::vector<std::uint8_t> out(size);
    std::uint64_t state = session_uid * 2 + (upstream ? 0 : 1) + (packet_index << 32);
    for (std::size_t i = 0; i < size; ++i) {
        if (i % 8 == 0) splitmix64(state);
        out[i] = static_cast<std::uint8_t>(state >> (8 * (i % 8)));
    }
    return out;
}

void Topology::validate() const {
    std::set<std::string> names;
    auto check_name = [&](const std::string& n) {
        if (n.empty()) throw ConfigError("empty node name");
        if (!names.insert(n).second) throw ConfigError("duplicate node name: " + n);
    };
    for (const auto& h : hosts) check_name(h.name);
    for (const auto& l : landmarks) check_name(l.name);
    for (const auto& l : legacy_hops) check_name(l.name);
    for (const auto& v : vantages) check_name(v.name);

    for (const auto& l : links) {
        if (!names.count(l.from)) throw ConfigError("link from unknown node: " + l.from);
        if (!names.count(l.to)) throw ConfigError("link to unknown node: " + l.to);
        if (l.latency < 0) throw ConfigError("negative link latency");
    }
    for (const auto& [name, rs] : routes) {
        if (!names.count(name)) throw ConfigError("routes for unknown node: " + name);
        for (const Route& r : rs)
            if (!names.count(r.via)) throw ConfigError("route via unknown node: " + r.via);
    }
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
        if (!landmarks[i].enabled) continue;
        landmarks[i].config.validate();
        for (std::size_t j = i + 1; j < landmarks.size(); ++j) {
            if (!landmarks[j].enabled) continue;
            if (landmarks[i].config.pool_cidr.overlaps(landmarks[j].config.pool_cidr))
                throw ConfigError("landmark pools overlap: " + landmarks[i].name + ", " +
                                  landmarks[j].name);
        }
    }

    // Every host must reach every other within 255 hops (also catches loops).
    auto next_of = [&](const std::string& node, IpAddr dst) -> const std::string* {
        auto it = routes.find(node);
        if (it == routes.end()) return nullptr;
        const Route* best = nullptr;
        for (const Route& r : it->second)
            if (r.prefix.contains(dst) && (!best || r.prefix.prefix_len > best->prefix.prefix_len))
                best = &r;
        if (!best) return nullptr;
        for (const auto& l : links)
            if (l.from == node && l.to == best->via) return &best->via;
        throw ConfigError("route at " + node + " via " + best->via + " has no link");
    };
    for (const auto& from : hosts) {
        for (const auto& to : hosts) {
            if (from.name == to.name) continue;
            std::string at = from.name;
            bool arrived = false;
            for (int hops = 0; hops < 255; ++hops) {
                if (at == to.name) {
                    arrived = true;
                    break;
                }
                const std::string* nxt = next_of(at, to.ip);
                if (!nxt) break;
                at = *nxt;
            }
            if (at == to.name) arrived = true;
            if (!arrived)
                throw ConfigError("host " + to.name + " unreachable from " + from.name +
                                  " (loop or missing route)");
        }
    }
}

TraceBundle run(const Topology& topology, const std::vector<SessionScript>& scripts,
                std::uint64_t seed, const RunOptions& options) {
    for (const SessionScript& s : scripts) {
        for (std::size_t i = 1; i < s.data_offsets.size(); ++i)
            if (s.data_offsets[i] <= s.data_offsets[i - 1])
                throw ConfigError("session schedule times must be strictly increasing");
    }
    if (options.pcap_dir) std::filesystem::create_directories(*options.pcap_dir);
    Simulator sim(topology, scripts, seed, options);
    return sim.run();
}

bool reverse_path_landmarks_reversed(const TraceBundle& bundle) {
    std::set<std::string> landmark_names;
    for (const auto& [name, _] : bundle.landmark_counters) landmark_names.insert(name);
    std::map<std::uint64_t, std::vector<std::string>> up, down;
    bool ok = true;
    for (const HopTrace& t : bundle.hop_traces) {
        std::vector<std::string> lms;
        for (const std::string& n : t.nodes)
            if (landmark_names.count(n)) lms.push_back(n);
        auto& store = t.upstream ? up : down;
        auto it = store.find(t.session_uid);
        if (it == store.end())
            store.emplace(t.session_uid, lms);
        else if (it->second != lms)
            ok = false;  // inconsistent landmark set within one direction
    }
    for (const auto& [uid, lms] : down) {
        auto it = up.find(uid);
        if (it == up.end()) {
            ok = false;
            continue;
        }
        std::vector<std::string> rev(it->second.rbegin(), it->second.rend());
        if (lms != rev) ok = false;
    }
    return ok;
}

bool payload_integrity_ok(const TraceBundle& bundle, const std::vector<SessionScript>& scripts) {
    for (const DeliveryRecord& d : bundle.deliveries) {
        if (d.payload.empty()) continue;
        if (d.session_uid >= scripts.size()) return false;
        const SessionScript& s = scripts[d.session_uid];
        const std::size_t size = d.upstream ? s.payload_size : s.server_payload_size;
        if (d.payload.size() != size) return false;
        bool match = false;
        const std::size_t n = std::max<std::size_t>(s.data_offsets.size(), 1);
        for (std::size_t k = 0; k < n; ++k) {
            if (d.payload == session_payload(d.session_uid, d.upstream, k, size)) {
                match = true;
                break;
            }
        }
        if (!match) return false;
    }
    return true;
}

void TraceBundle::export_csv(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto open = [&](const std::string& name) {
        std::ofstream out(fs::path(dir) / name);
        if (!out) throw Error("cannot write " + name + " in " + dir);
        return out;
    };

    for (const auto& [vantage, log] : observations) {
        auto out = open("vantage_" + vantage + ".csv");
        out << "time_ns,link,src_ip,src_port,dst_ip,dst_port,ttl,ip_id,tcp_seq\n";
        for (const VantageObservation& o : log)
            out << o.time << ',' << o.link << ',' << format_ip(o.src_ip) << ',' << o.src_port
                << ',' << format_ip(o.dst_ip) << ',' << o.dst_port << ','
                << static_cast<int>(o.ttl) << ',' << o.ip_id << ',' << o.tcp_seq << '\n';
    }
    {
        auto out = open("sessions.csv");
        out << "uid,client,server,protocol,client_port,first_rtt_ns,steady_rtt_ns,"
               "data_sent,data_acked,completed,ack_ok,sack_ok\n";
        for (const SessionRecord& s : sessions)
            out << s.uid << ',' << s.client << ',' << s.server << ','
                << (s.protocol == L4Proto::Tcp ? "tcp" : "udp") << ',' << s.client_port << ','
                << s.first_rtt << ',' << s.steady_rtt << ',' << s.data_packets_sent << ','
                << s.data_packets_acked << ',' << (s.completed ? 1 : 0) << ','
                << (s.ack_arithmetic_ok ? 1 : 0) << ',' << (s.sack_arithmetic_ok ? 1 : 0) << '\n';
    }
    {
        auto out = open("counters.txt");
        for (const auto& [name, counters] : landmark_counters) {
            out << "[" << name << "]\n";
            for (const auto& [key, value] : counters) out << key << " = " << value << '\n';
        }
        out << "[simulator]\n";
        out << "ttl_expired_drops = " << ttl_expired_drops << '\n';
        out << "unroutable_drops = " << unroutable_drops << '\n';
        out << "checksum_drops = " << checksum_drops << '\n';
    }
    {
        auto out = open("drops.csv");
        out << "time_ns,node,cause,session_uid\n";
        for (const DropRecord& d : drops)
            out << d.time << ',' << d.node << ',' << d.cause << ',' << d.session_uid << '\n';
    }
}

}  // namespace panel::sim
