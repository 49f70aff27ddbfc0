#include "panel/landmark.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "panel/checksum.hpp"

namespace panel {

void LandmarkConfig::validate() const {
    if (pool_cidr.prefix_len < 0 || pool_cidr.prefix_len > 32)
        throw ConfigError("bad pool prefix length");
    if (tag_port_bits < 1 || tag_port_bits > 16)
        throw ConfigError("tag_port_bits must be in 1..16");
    if (pool_cidr.host_bits() + 16 < tag_bits())
        throw ConfigError("tag width exceeds pool host bits + 16");
    if (tag_bits() < 1 || tag_bits() > 48) throw ConfigError("tag width out of range");
    if (tcp_idle_timeout <= 0 || udp_idle_timeout <= 0 || flush_interval <= 0)
        throw ConfigError("timeouts must be positive");
    if (key_mode == KeyMode::TruncatedHash && (hash_key_bits < 1 || hash_key_bits > 63))
        throw ConfigError("hash key bits must be in 1..63");
    ttl.pmf.validate(1e-6);
}

LandmarkConfig LandmarkConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    LandmarkConfig cfg;
    bool saw_pool = false;
    std::string line;
    std::size_t lineno = 0;
    const auto dir = std::filesystem::path(path).parent_path();
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            auto last = s.find_last_not_of(" \t\r");
            s.erase(last == std::string::npos ? 0 : last + 1);
            return s;
        };
        if (trim(line).empty()) continue;
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "pool_cidr") {
                cfg.pool_cidr = Cidr::parse(value);
                saw_pool = true;
            } else if (key == "panel_prefixes") {
                std::stringstream ss(value);
                std::string item;
                while (std::getline(ss, item, ','))
                    if (!trim(item).empty()) cfg.panel_prefixes.push_back(Cidr::parse(trim(item)));
            } else if (key == "tcp_idle_timeout_s") {
                cfg.tcp_idle_timeout = seconds(std::stod(value));
            } else if (key == "udp_idle_timeout_s") {
                cfg.udp_idle_timeout = seconds(std::stod(value));
            } else if (key == "flush_interval_s") {
                cfg.flush_interval = seconds(std::stod(value));
            } else if (key == "key_mode") {
                if (value == "exact") {
                    cfg.key_mode = KeyMode::Exact;
                } else if (value.rfind("hash:", 0) == 0) {
                    cfg.key_mode = KeyMode::TruncatedHash;
                    cfg.hash_key_bits = std::stoi(value.substr(5));
                } else {
                    throw ConfigError("key_mode must be 'exact' or 'hash:<bits>'");
                }
            } else if (key == "ttl_file") {
                auto p = std::filesystem::path(value);
                if (p.is_relative()) p = dir / p;
                cfg.ttl = TtlDistribution{load_pmf_csv_file(p.string())};
            } else if (key == "ttl_fixed") {
                cfg.ttl = TtlDistribution{IntPmf::point_mass(std::stoi(value))};
            } else if (key == "tag_port_bits") {
                cfg.tag_port_bits = std::stoi(value);
            } else if (key == "seed") {
                cfg.seed = parse_seed_key(value);
            } else {
                throw ConfigError("unknown key '" + key + "'");
            }
        } catch (const InputError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!saw_pool) throw ConfigError(path + ": pool_cidr is required");
    cfg.validate();
    return cfg;
}

namespace {

ChaChaRng make_rng(const LandmarkConfig& cfg) {
    if (cfg.seed) return ChaChaRng(*cfg.seed, cfg.rng_stream);
    return ChaChaRng::from_entropy(cfg.rng_stream);
}

}  // namespace

LandmarkEngine::LandmarkEngine(LandmarkConfig cfg)
    : cfg_(std::move(cfg)),
      rng_(make_rng(cfg_)),
      fwd_exact_(16, FlowKeyHash{0, 0}),
      rev_exact_(16, FlowKeyHash{0, 0}) {
    cfg_.validate();
    hash_k0_ = rng_();
    hash_k1_ = rng_();
    fwd_exact_ = decltype(fwd_exact_)(16, FlowKeyHash{hash_k0_, hash_k1_});
    rev_exact_ = decltype(rev_exact_)(16, FlowKeyHash{hash_k0_, hash_k1_});
}

std::uint64_t LandmarkEngine::table_slot(const FlowKey& key) const {
    auto b = key.packed();
    std::uint64_t h = siphash24(hash_k0_, hash_k1_, b);
    if (cfg_.key_mode == KeyMode::TruncatedHash && cfg_.hash_key_bits < 64)
        h &= (std::uint64_t{1} << cfg_.hash_key_bits) - 1;
    return h;
}

LandmarkEngine::Handle* LandmarkEngine::find_forward(const FlowKey& key) {
    if (cfg_.key_mode == KeyMode::Exact) {
        auto it = fwd_exact_.find(key);
        return it == fwd_exact_.end() ? nullptr : &it->second;
    }
    auto it = fwd_hashed_.find(table_slot(key));
    if (it == fwd_hashed_.end() || !(it->second->key == key)) return nullptr;
    return &it->second;
}

LandmarkEngine::Handle* LandmarkEngine::find_reverse(const FlowKey& rkey) {
    if (cfg_.key_mode == KeyMode::Exact) {
        auto it = rev_exact_.find(rkey);
        return it == rev_exact_.end() ? nullptr : &it->second;
    }
    auto it = rev_hashed_.find(table_slot(rkey));
    if (it == rev_hashed_.end() || !(it->second->reverse_key() == rkey)) return nullptr;
    return &it->second;
}

bool LandmarkEngine::forward_slot_taken(const FlowKey& key) const {
    if (cfg_.key_mode == KeyMode::Exact) return fwd_exact_.count(key) != 0;
    return fwd_hashed_.count(table_slot(key)) != 0;
}

bool LandmarkEngine::reverse_slot_taken(const FlowKey& rkey) const {
    if (cfg_.key_mode == KeyMode::Exact) return rev_exact_.count(rkey) != 0;
    return rev_hashed_.count(table_slot(rkey)) != 0;
}

void LandmarkEngine::insert(const Handle& h) {
    if (cfg_.key_mode == KeyMode::Exact) {
        fwd_exact_.emplace(h->key, h);
        rev_exact_.emplace(h->reverse_key(), h);
    } else {
        fwd_hashed_.emplace(table_slot(h->key), h);
        rev_hashed_.emplace(table_slot(h->reverse_key()), h);
    }
    by_tag_.insert(h->tag.bits);
}

void LandmarkEngine::erase(const SessionEntry& e) {
    if (cfg_.key_mode == KeyMode::Exact) {
        fwd_exact_.erase(e.key);
        rev_exact_.erase(e.reverse_key());
    } else {
        fwd_hashed_.erase(table_slot(e.key));
        rev_hashed_.erase(table_slot(e.reverse_key()));
    }
    by_tag_.erase(e.tag.bits);
}

Tag LandmarkEngine::draw_tag(Status& failure) {
    const int width = cfg_.tag_bits();
    const std::uint64_t space = std::uint64_t{1} << width;
    if (by_tag_.size() >= space) {
        failure = Status::DropTagSpaceExhausted;
        return {};
    }
    // Rejection sampling, capped at 4x the tag space so worst-case
    // establishment work stays bounded.
    const std::uint64_t cap = 4 * space;
    for (std::uint64_t attempt = 0; attempt < cap; ++attempt) {
        const std::uint64_t bits = rng_.uniform_below(space);
        if (by_tag_.count(bits)) continue;
        Tag t;
        t.bits = bits;
        t.port = static_cast<std::uint16_t>(bits & ((std::uint64_t{1} << cfg_.tag_port_bits) - 1));
        t.pool_ip = cfg_.pool_cidr.base | static_cast<IpAddr>(bits >> cfg_.tag_port_bits);
        return t;
    }
    failure = Status::DropTagSpaceExhausted;
    return {};
}

LandmarkEngine::EstablishOutcome LandmarkEngine::establish_session(const PacketView& pkt,
                                                                   SimTime now) {
    // TCP sessions come into being on a pure SYN only.
    if (pkt.is_tcp() && (!pkt.syn() || pkt.ack_flag())) {
        ++n_.drop_no_session;
        return {nullptr, Status::DropNoSession};
    }
    const FlowKey key = FlowKey::of_packet(pkt);
    if (cfg_.key_mode == KeyMode::TruncatedHash && forward_slot_taken(key)) {
        ++n_.collisions;
        return {nullptr, Status::DropCollision};
    }

    Status failure = Status::Forwarded;
    const Tag tag = draw_tag(failure);
    if (failure == Status::DropTagSpaceExhausted) {
        ++n_.drop_tag_space_exhausted;
        return {nullptr, failure};
    }

    auto entry = std::make_shared<SessionEntry>();
    entry->key = key;
    entry->tag = tag;
    entry->ttl_draw = static_cast<std::uint8_t>(cfg_.ttl.pmf.sample(rng_));
    entry->created_at = entry->last_seen = now;
    entry->state = SessionState::Establishing;

    // First segment on the path: source not inside any configured segment
    // prefix (no list means always first). Only the first landmark
    // normalizes the fingerprintable source fields.
    bool first = true;
    for (const Cidr& c : cfg_.panel_prefixes)
        if (c.contains(pkt.src_ip)) {
            first = false;
            break;
        }
    if (first) {
        NormalizationOffsets off;
        off.ip_id_offset = static_cast<std::uint16_t>(rng_.uniform_below(1ull << 16));
        off.seq_offset = static_cast<std::uint32_t>(rng_.uniform_below(1ull << 32));
        entry->offsets = off;
    }

    if (cfg_.key_mode == KeyMode::TruncatedHash && reverse_slot_taken(entry->reverse_key())) {
        // The mirrored entry would evict a live session; reject instead.
        ++n_.reverse_collisions;
        return {nullptr, Status::DropCollision};
    }

    insert(entry);
    ++n_.establishments;
    return {entry.get(), Status::Forwarded};
}

namespace {

// One place for the incremental checksum bookkeeping around a field change.
struct ChecksumPatcher {
    PacketView& pkt;
    bool touch_l4;

    explicit ChecksumPatcher(PacketView& p)
        : pkt(p), touch_l4(!p.non_first_fragment() && !(p.is_udp() && p.l4_checksum == 0)) {}

    void ip_word(std::uint16_t old16, std::uint16_t new16) {
        pkt.ip_checksum = incremental_checksum_update(old16, new16, pkt.ip_checksum);
    }
    void l4_word(std::uint16_t old16, std::uint16_t new16) {
        if (touch_l4) pkt.l4_checksum = incremental_checksum_update(old16, new16, pkt.l4_checksum);
    }
    // Addresses sit in the IP header and the L4 pseudo-header.
    void address(IpAddr oldv, IpAddr newv) {
        pkt.ip_checksum = incremental_checksum_update32(oldv, newv, pkt.ip_checksum);
        if (touch_l4)
            pkt.l4_checksum = incremental_checksum_update32(oldv, newv, pkt.l4_checksum);
    }
    void l4_dword(std::uint32_t oldv, std::uint32_t newv) {
        if (touch_l4)
            pkt.l4_checksum = incremental_checksum_update32(oldv, newv, pkt.l4_checksum);
    }
};

}  // namespace

LandmarkEngine::Result LandmarkEngine::process_upstream(PacketView& pkt, SimTime now) {
    if (pkt.non_first_fragment()) {
        ++n_.fragment_passthrough;
        return {Status::PassthroughFragment, false};
    }
    const FlowKey key = FlowKey::of_packet(pkt);
    Handle* found = find_forward(key);
    bool established = false;
    if (!found) {
        auto outcome = establish_session(pkt, now);
        if (outcome.status != Status::Forwarded) return {outcome.status, false};
        found = find_forward(key);
        established = true;
    }
    SessionEntry& e = **found;

    ChecksumPatcher csum(pkt);
    csum.address(pkt.src_ip, e.tag.pool_ip);
    pkt.src_ip = e.tag.pool_ip;
    csum.l4_word(pkt.src_port, e.tag.port);
    pkt.src_port = e.tag.port;
    if (e.offsets) {
        const std::uint16_t new_id =
            static_cast<std::uint16_t>(pkt.ip_id + e.offsets->ip_id_offset);
        csum.ip_word(pkt.ip_id, new_id);
        pkt.ip_id = new_id;
        if (pkt.is_tcp()) {
            const std::uint32_t new_seq = pkt.tcp_seq + e.offsets->seq_offset;
            csum.l4_dword(pkt.tcp_seq, new_seq);
            pkt.tcp_seq = new_seq;
        }
    }
    // TTL is replaced (never decremented) with this session's draw.
    csum.ip_word(static_cast<std::uint16_t>(pkt.ttl << 8 | static_cast<std::uint8_t>(pkt.protocol)),
                 static_cast<std::uint16_t>(e.ttl_draw << 8 | static_cast<std::uint8_t>(pkt.protocol)));
    pkt.ttl = e.ttl_draw;

    e.last_seen = now;
    ++n_.upstream_packets;
    return {Status::Forwarded, established};
}

LandmarkEngine::Result LandmarkEngine::process_downstream(PacketView& pkt, SimTime now) {
    if (pkt.non_first_fragment()) {
        ++n_.fragment_passthrough;
        return {Status::PassthroughFragment, false};
    }
    const FlowKey rkey{pkt.dst_ip, pkt.src_ip, pkt.dst_port, pkt.src_port, pkt.protocol};
    Handle* found = find_reverse(rkey);
    if (!found) {
        ++n_.drop_no_reverse_entry;
        return {Status::DropNoReverseEntry, false};
    }
    SessionEntry& e = **found;

    ChecksumPatcher csum(pkt);
    csum.address(pkt.dst_ip, e.key.src_ip);
    pkt.dst_ip = e.key.src_ip;
    csum.l4_word(pkt.dst_port, e.key.src_port);
    pkt.dst_port = e.key.src_port;
    if (e.offsets && pkt.is_tcp()) {
        const std::uint32_t new_ack = pkt.tcp_ack - e.offsets->seq_offset;
        csum.l4_dword(pkt.tcp_ack, new_ack);
        pkt.tcp_ack = new_ack;
        for (SackBlock& sb : pkt.sack_blocks) {
            const std::uint32_t nl = sb.left - e.offsets->seq_offset;
            const std::uint32_t nr = sb.right - e.offsets->seq_offset;
            csum.l4_dword(sb.left, nl);
            csum.l4_dword(sb.right, nr);
            sb.left = nl;
            sb.right = nr;
        }
    }

    bool activated = false;
    if (e.state == SessionState::Establishing) {
        e.state = SessionState::Active;
        ++n_.activations;
        activated = true;
    }
    e.last_seen = now;
    ++n_.downstream_packets;
    return {Status::Forwarded, activated};
}

std::size_t LandmarkEngine::expire_sessions(SimTime now) {
    std::vector<Handle> stale;
    auto sweep = [&](const auto& table) {
        for (const auto& [k, h] : table) {
            const SimTime limit = h->key.protocol == L4Proto::Tcp ? cfg_.tcp_idle_timeout
                                                                  : cfg_.udp_idle_timeout;
            if (now - h->last_seen > limit) stale.push_back(h);
        }
    };
    if (cfg_.key_mode == KeyMode::Exact)
        sweep(fwd_exact_);
    else
        sweep(fwd_hashed_);
    for (const Handle& h : stale) erase(*h);
    n_.evictions += stale.size();
    return stale.size();
}

std::map<std::string, std::uint64_t> LandmarkEngine::counters() const {
    return {
        {"establishments", n_.establishments},
        {"activations", n_.activations},
        {"evictions", n_.evictions},
        {"collisions", n_.collisions},
        {"reverse_collisions", n_.reverse_collisions},
        {"drop_no_session", n_.drop_no_session},
        {"drop_no_reverse_entry", n_.drop_no_reverse_entry},
        {"drop_tag_space_exhausted", n_.drop_tag_space_exhausted},
        {"fragment_passthrough", n_.fragment_passthrough},
        {"upstream_packets", n_.upstream_packets},
        {"downstream_packets", n_.downstream_packets},
    };
}

void LandmarkEngine::debug_dump(std::ostream& out) const {
    std::vector<const SessionEntry*> entries;
    auto collect = [&](const auto& table) {
        for (const auto& [k, h] : table) entries.push_back(h.get());
    };
    if (cfg_.key_mode == KeyMode::Exact)
        collect(fwd_exact_);
    else
        collect(fwd_hashed_);
    std::sort(entries.begin(), entries.end(),
              [](const SessionEntry* a, const SessionEntry* b) { return a->key < b->key; });
    for (const SessionEntry* e : entries) {
        out << format_ip(e->key.src_ip) << '\t' << e->key.src_port << '\t'
            << format_ip(e->key.dst_ip) << '\t' << e->key.dst_port << '\t'
            << (e->key.protocol == L4Proto::Tcp ? "tcp" : "udp") << '\t'
            << format_ip(e->tag.pool_ip) << '\t' << e->tag.port << '\t'
            << static_cast<int>(e->ttl_draw) << '\t'
            << (e->offsets ? e->offsets->ip_id_offset : 0) << '\t'
            << (e->offsets ? e->offsets->seq_offset : 0) << '\t' << e->created_at << '\t'
            << e->last_seen << '\t'
            << (e->state == SessionState::Active ? "active" : "establishing") << '\n';
    }
}

}  // namespace panel
