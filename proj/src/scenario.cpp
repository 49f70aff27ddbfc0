#include "panel/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace panel::sim {

namespace {

using nlohmann::json;

SimTime time_field(const json& j, const std::string& us_key, const std::string& ms_key,
                   SimTime fallback) {
    if (j.contains(us_key)) return micros(j.at(us_key).get<double>());
    if (j.contains(ms_key)) return millis(j.at(ms_key).get<double>());
    return fallback;
}

TtlDistribution parse_ttl(const json& j, const std::filesystem::path& dir) {
    if (j.contains("fixed")) return TtlDistribution{IntPmf::point_mass(j.at("fixed").get<int>())};
    if (j.contains("csv")) {
        std::filesystem::path p = j.at("csv").get<std::string>();
        if (p.is_relative()) p = dir / p;
        return TtlDistribution{load_pmf_csv_file(p.string())};
    }
    if (j.contains("uniform")) {
        const auto& u = j.at("uniform");
        return TtlDistribution{IntPmf::uniform(u.at(0).get<int>(), u.at(1).get<int>())};
    }
    if (j.contains("values")) {
        //[[ttl, weight], ...] over a contiguous or gappy support
        std::map<int, double> rows;
        for (const auto& pair : j.at("values"))
            rows[pair.at(0).get<int>()] += pair.at(1).get<double>();
        const int lo = rows.begin()->first;
        const int hi = rows.rbegin()->first;
        std::vector<double> w(static_cast<std::size_t>(hi - lo) + 1, 0.0);
        for (const auto& [v, weight] : rows) w[static_cast<std::size_t>(v - lo)] = weight;
        return TtlDistribution{IntPmf(lo, std::move(w))};
    }
    throw ConfigError("ttl spec needs one of: fixed, csv, uniform, values");
}

}  // namespace

Scenario Scenario::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scenario: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    const auto dir = std::filesystem::path(path).parent_path();

    Scenario sc;
    try {
        sc.name = j.value("name", std::filesystem::path(path).stem().string());
        sc.default_seed = j.value("seed", 1ull);
        Topology& t = sc.topology;

        const SimTime default_latency =
            time_field(j, "default_link_latency_us", "default_link_latency_ms", micros(50));
        if (j.contains("delays")) {
            t.delays.establish =
                time_field(j.at("delays"), "establish_us", "establish_ms", t.delays.establish);
            t.delays.forward =
                time_field(j.at("delays"), "forward_us", "forward_ms", t.delays.forward);
        }

        for (const auto& h : j.value("hosts", json::array())) {
            HostModel m;
            m.name = h.at("name").get<std::string>();
            m.ip = parse_ip(h.at("ip").get<std::string>());
            m.initial_ttl = static_cast<std::uint8_t>(h.value("initial_ttl", 64));
            if (h.value("ip_id", "sequential") == std::string("random"))
                m.ip_id_mode = HostModel::IpIdMode::Random;
            if (h.value("isn", "clock") == std::string("random"))
                m.isn_mode = HostModel::IsnMode::Random;
            t.hosts.push_back(std::move(m));
        }

        std::vector<Cidr> all_pools;
        for (const auto& l : j.value("landmarks", json::array()))
            if (l.value("enabled", true))
                all_pools.push_back(Cidr::parse(l.at("pool").get<std::string>()));
        for (const auto& l : j.value("landmarks", json::array())) {
            LandmarkNode lm;
            lm.name = l.at("name").get<std::string>();
            lm.enabled = l.value("enabled", true);
            lm.config.pool_cidr = Cidr::parse(l.at("pool").get<std::string>());
            if (l.contains("prefixes")) {
                for (const auto& p : l.at("prefixes"))
                    lm.config.panel_prefixes.push_back(Cidr::parse(p.get<std::string>()));
            } else {
                // Default global list: every enabled landmark's pool.
                lm.config.panel_prefixes = all_pools;
            }
            if (l.contains("ttl")) lm.config.ttl = parse_ttl(l.at("ttl"), dir);
            if (l.contains("tcp_idle_timeout_s"))
                lm.config.tcp_idle_timeout = seconds(l.at("tcp_idle_timeout_s").get<double>());
            if (l.contains("udp_idle_timeout_s"))
                lm.config.udp_idle_timeout = seconds(l.at("udp_idle_timeout_s").get<double>());
            if (l.contains("key_mode")) {
                const std::string mode = l.at("key_mode").get<std::string>();
                if (mode == "exact") {
                    lm.config.key_mode = KeyMode::Exact;
                } else if (mode.rfind("hash:", 0) == 0) {
                    lm.config.key_mode = KeyMode::TruncatedHash;
                    lm.config.hash_key_bits = std::stoi(mode.substr(5));
                } else {
                    throw ConfigError("key_mode must be 'exact' or 'hash:<bits>'");
                }
            }
            if (l.contains("seed"))
                lm.config.seed = parse_seed_key(l.at("seed").is_string()
                                                    ? l.at("seed").get<std::string>()
                                                    : l.at("seed").dump());
            t.landmarks.push_back(std::move(lm));
        }

        for (const auto& h : j.value("legacy_hops", json::array())) {
            if (h.is_string())
                t.legacy_hops.push_back({h.get<std::string>()});
            else
                t.legacy_hops.push_back({h.at("name").get<std::string>()});
        }
        for (const auto& v : j.value("vantages", json::array())) {
            VantageNode vn;
            if (v.is_string()) {
                vn.name = v.get<std::string>();
            } else {
                vn.name = v.at("name").get<std::string>();
                for (const auto& a : v.value("actions", json::array())) {
                    VantageNode::Action act;
                    const std::string what = a.at("what").get<std::string>();
                    if (what == "duplicate")
                        act.what = VantageNode::Action::What::Duplicate;
                    else if (what == "corrupt-field")
                        act.what = VantageNode::Action::What::CorruptField;
                    else
                        throw ConfigError("action must be 'duplicate' or 'corrupt-field'");
                    act.at_index = a.at("index").get<std::uint64_t>();
                    vn.actions.push_back(act);
                }
            }
            t.vantages.push_back(std::move(vn));
        }

        for (const auto& l : j.value("links", json::array())) {
            LinkDef link;
            link.from = l.at("from").get<std::string>();
            link.to = l.at("to").get<std::string>();
            link.latency = time_field(l, "latency_us", "latency_ms", default_latency);
            t.links.push_back(std::move(link));
            if (l.value("bidirectional", false)) {
                LinkDef back = t.links.back();
                std::swap(back.from, back.to);
                t.links.push_back(std::move(back));
            }
        }

        for (const auto& [node, routes] : j.value("routes", json::object()).items()) {
            std::vector<Route> rs;
            for (const auto& r : routes)
                rs.push_back(Route{Cidr::parse(r.at("prefix").get<std::string>()),
                                   r.at("via").get<std::string>()});
            t.routes[node] = std::move(rs);
        }

        for (const auto& s : j.value("sessions", json::array())) {
            SessionScript base;
            base.server = s.at("server").get<std::string>();
            base.protocol =
                s.value("protocol", "tcp") == std::string("udp") ? L4Proto::Udp : L4Proto::Tcp;
            base.payload_size = s.value("payload", 64u);
            base.server_payload_size = s.value("server_payload", base.payload_size);
            base.server_sack = s.value("server_sack", false);
            const SimTime start = time_field(s, "start_us", "start_ms", 0);
            if (s.contains("data_offsets_ms"))
                for (const auto& off : s.at("data_offsets_ms"))
                    base.data_offsets.push_back(millis(off.get<double>()));
            if (s.contains("data_offsets_us"))
                for (const auto& off : s.at("data_offsets_us"))
                    base.data_offsets.push_back(micros(off.get<double>()));
            std::vector<std::string> clients;
            if (s.contains("clients"))
                for (const auto& c : s.at("clients")) clients.push_back(c.get<std::string>());
            else
                clients.push_back(s.at("client").get<std::string>());
            const std::uint64_t count = s.value("count", 1ull);
            const SimTime interval = time_field(s, "interval_us", "interval_ms", millis(1));
            for (std::uint64_t i = 0; i < count; ++i) {
                SessionScript script = base;
                script.client = clients[i % clients.size()];
                script.start = start + static_cast<SimTime>(i) * interval;
                sc.scripts.push_back(std::move(script));
            }
        }

        if (j.contains("adversary")) {
            const auto& a = j.at("adversary");
            for (const auto& v : a.value("distance_mi", json::array()))
                sc.adversary.distance_mi_vantages.push_back(v.get<std::string>());
            for (const auto& v : a.value("linkability", json::array()))
                sc.adversary.linkability_vantages.push_back(v.get<std::string>());
        }

        if (j.contains("expect")) {
            const auto& e = j.at("expect");
            auto& x = sc.expect;
            if (e.contains("payload_integrity"))
                x.payload_integrity = e.at("payload_integrity").get<bool>();
            if (e.contains("reverse_path_landmarks"))
                x.reverse_path_landmarks = e.at("reverse_path_landmarks").get<bool>();
            if (e.contains("zero_ttl_expiry")) x.zero_ttl_expiry = e.at("zero_ttl_expiry").get<bool>();
            if (e.contains("min_ttl_expired"))
                x.min_ttl_expired = e.at("min_ttl_expired").get<std::uint64_t>();
            if (e.contains("all_sessions_completed"))
                x.all_sessions_completed = e.at("all_sessions_completed").get<bool>();
            if (e.contains("first_to_steady_rtt")) {
                Scenario::Expectations::Range r;
                r.min = e.at("first_to_steady_rtt").at("min").get<double>();
                r.max = e.at("first_to_steady_rtt").at("max").get<double>();
                x.first_to_steady_rtt = r;
            }
            for (const auto& d : e.value("distance_mi", json::array())) {
                Scenario::Expectations::DistanceMi dm;
                dm.vantage = d.at("vantage").get<std::string>();
                if (d.contains("within_of_entropy"))
                    dm.within_of_entropy = d.at("within_of_entropy").get<double>();
                if (d.contains("max_bits")) dm.max_bits = d.at("max_bits").get<double>();
                x.distance_mi.push_back(std::move(dm));
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return sc;
}

ScenarioOutcome run_scenario(const Scenario& scenario, std::uint64_t seed,
                             const RunOptions& options) {
    ScenarioOutcome out;
    out.bundle = run(scenario.topology, scenario.scripts, seed, options);

    for (const std::string& v : scenario.adversary.distance_mi_vantages)
        out.distance_mi.push_back(adversary_distance_inference(out.bundle, v));
    for (const std::string& v : scenario.adversary.linkability_vantages)
        out.linkability.push_back(adversary_linkability(out.bundle, v, seed));

    auto check = [&](const std::string& name, bool ok, const std::string& detail) {
        out.expectations.push_back({name, ok, detail});
        if (!ok) out.all_passed = false;
    };
    const auto& x = scenario.expect;
    char buf[128];
    if (x.payload_integrity) {
        const bool ok = payload_integrity_ok(out.bundle, scenario.scripts) == *x.payload_integrity;
        check("payload_integrity", ok, "");
    }
    if (x.reverse_path_landmarks) {
        const bool ok =
            reverse_path_landmarks_reversed(out.bundle) == *x.reverse_path_landmarks;
        check("reverse_path_landmarks", ok, "");
    }
    if (x.zero_ttl_expiry) {
        std::snprintf(buf, sizeof buf, "ttl_expired=%llu",
                      static_cast<unsigned long long>(out.bundle.ttl_expired_drops));
        check("zero_ttl_expiry", (out.bundle.ttl_expired_drops == 0) == *x.zero_ttl_expiry, buf);
    }
    if (x.min_ttl_expired) {
        std::snprintf(buf, sizeof buf, "ttl_expired=%llu",
                      static_cast<unsigned long long>(out.bundle.ttl_expired_drops));
        check("min_ttl_expired", out.bundle.ttl_expired_drops >= *x.min_ttl_expired, buf);
    }
    if (x.all_sessions_completed) {
        bool all = true;
        for (const SessionRecord& s : out.bundle.sessions)
            if (!s.completed) all = false;
        check("all_sessions_completed", all == *x.all_sessions_completed, "");
    }
    if (x.first_to_steady_rtt) {
        double worst_low = 1e300, worst_high = 0.0;
        bool any = false;
        for (const SessionRecord& s : out.bundle.sessions) {
            if (s.first_rtt <= 0 || s.steady_rtt <= 0) continue;
            const double ratio =
                static_cast<double>(s.first_rtt) / static_cast<double>(s.steady_rtt);
            worst_low = std::min(worst_low, ratio);
            worst_high = std::max(worst_high, ratio);
            any = true;
        }
        std::snprintf(buf, sizeof buf, "ratio range [%.3f, %.3f]", worst_low, worst_high);
        check("first_to_steady_rtt",
              any && worst_low >= x.first_to_steady_rtt->min &&
                  worst_high <= x.first_to_steady_rtt->max,
              buf);
    }
    for (const auto& dm : x.distance_mi) {
        const DistanceMiReport* report = nullptr;
        for (const auto& r : out.distance_mi)
            if (r.vantage == dm.vantage) report = &r;
        if (!report) {
            check("distance_mi(" + dm.vantage + ")", false, "no report for vantage");
            continue;
        }
        bool ok = true;
        if (dm.within_of_entropy &&
            std::abs(report->mi_bits - report->distance_entropy_bits) > *dm.within_of_entropy)
            ok = false;
        if (dm.max_bits && report->mi_bits > *dm.max_bits) ok = false;
        std::snprintf(buf, sizeof buf, "mi=%.4f bits, H(distance)=%.4f bits, n=%zu",
                      report->mi_bits, report->distance_entropy_bits, report->sessions);
        check("distance_mi(" + dm.vantage + ")", ok, buf);
    }
    return out;
}

}  // namespace panel::sim
