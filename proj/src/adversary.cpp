#include "panel/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace panel::sim {

namespace {

double plug_in_mi(const std::vector<std::pair<int, int>>& samples) {
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> px, py;
    const double n = static_cast<double>(samples.size());
    for (const auto& s : samples) {
        joint[s] += 1.0 / n;
        px[s.first] += 1.0 / n;
        py[s.second] += 1.0 / n;
    }
    double mi = 0.0;
    for (const auto& [xy, p] : joint)
        mi += p * std::log2(p / (px[xy.first] * py[xy.second]));
    return mi < 0.0 ? 0.0 : mi;
}

double entropy_of_counts(const std::map<int, std::size_t>& counts, std::size_t total) {
    double h = 0.0;
    for (const auto& [_, c] : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
}

struct FourTuple {
    IpAddr src;
    std::uint16_t sport;
    IpAddr dst;
    std::uint16_t dport;
    auto operator<=>(const FourTuple&) const = default;
};

const std::vector<VantageObservation>& observations_at(const TraceBundle& bundle,
                                                       const std::string& vantage) {
    auto it = bundle.observations.find(vantage);
    if (it == bundle.observations.end())
        throw InputError("no observations at vantage: " + vantage);
    return it->second;
}

}  // namespace

DistanceMiReport adversary_distance_inference(const TraceBundle& bundle,
                                              const std::string& vantage) {
    const auto& obs = observations_at(bundle, vantage);
    const auto& truth = bundle.observation_truth.at(vantage);

    // One sample per session: the first post-landmark upstream observation.
    std::map<FourTuple, std::pair<int, int>> first_per_session;  // (distance, ttl)
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!truth[i].upstream || truth[i].distance_from_landmark < 0) continue;
        FourTuple key{obs[i].src_ip, obs[i].src_port, obs[i].dst_ip, obs[i].dst_port};
        first_per_session.emplace(key,
                                  std::pair<int, int>{truth[i].distance_from_landmark,
                                                      static_cast<int>(obs[i].ttl)});
    }
    if (first_per_session.size() < 100)
        throw InsufficientSamples("distance inference needs >= 100 sessions, have " +
                                  std::to_string(first_per_session.size()));

    std::vector<std::pair<int, int>> samples;
    std::map<int, std::size_t> distance_counts;
    samples.reserve(first_per_session.size());
    for (const auto& [_, dv] : first_per_session) {
        samples.push_back(dv);
        ++distance_counts[dv.first];
    }
    DistanceMiReport out;
    out.vantage = vantage;
    out.sessions = samples.size();
    out.mi_bits = plug_in_mi(samples);
    out.distance_entropy_bits = entropy_of_counts(distance_counts, samples.size());
    return out;
}

LinkabilityReport adversary_linkability(const TraceBundle& bundle, const std::string& vantage,
                                        std::uint64_t seed) {
    const auto& obs = observations_at(bundle, vantage);
    const auto& truth = bundle.observation_truth.at(vantage);

    // Do not trust packet direction: key sessions by the observed 4-tuple of
    // their first upstream appearance.
    struct SessionFeatures {
        std::uint64_t uid = 0;  // ground truth handle, for scoring only
        IpAddr src = 0;
        std::uint16_t sport = 0;
        std::uint16_t ip_id = 0;
        std::uint32_t isn = 0;
    };
    std::map<FourTuple, SessionFeatures> by_tuple;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!truth[i].upstream) continue;
        FourTuple key{obs[i].src_ip, obs[i].src_port, obs[i].dst_ip, obs[i].dst_port};
        if (by_tuple.count(key)) continue;
        SessionFeatures f;
        f.uid = truth[i].session_uid;
        f.src = obs[i].src_ip;
        f.sport = obs[i].src_port;
        f.ip_id = obs[i].ip_id;
        f.isn = obs[i].tcp_seq;
        by_tuple.emplace(key, f);
    }
    std::vector<SessionFeatures> sessions;
    sessions.reserve(by_tuple.size());
    for (const auto& [_, f] : by_tuple) sessions.push_back(f);
    const std::size_t n = sessions.size();
    if (n < 2) throw InsufficientSamples("linkability needs >= 2 sessions");

    std::vector<std::string> client_of(n);
    std::unordered_map<std::string, std::size_t> client_sessions;
    for (std::size_t i = 0; i < n; ++i) {
        client_of[i] = bundle.sessions.at(sessions[i].uid).client;
        ++client_sessions[client_of[i]];
    }
    bool any_pair = false;
    for (const auto& [_, c] : client_sessions)
        if (c >= 2) any_pair = true;
    if (!any_pair) throw InsufficientSamples("linkability needs two sessions from one client");

    // Analytic accuracy of uniform random pairing on this instance.
    double baseline = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        baseline += static_cast<double>(client_sessions[client_of[i]] - 1) /
                    static_cast<double>(n - 1);
    baseline /= static_cast<double>(n);

    LinkabilityReport out;
    out.vantage = vantage;
    out.sessions = n;
    out.baseline = baseline;

    auto score = [&](const std::string& name, auto partner_of) {
        LinkabilityReport::Heuristic h;
        h.name = name;
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = partner_of(i);
            h.pairs.emplace_back(sessions[i].uid, sessions[j].uid);
            if (client_of[i] == client_of[j]) ++correct;
        }
        h.accuracy = static_cast<double>(correct) / static_cast<double>(n);
        out.heuristics.push_back(std::move(h));
    };

    auto circular16 = [](std::uint16_t a, std::uint16_t b) {
        const std::uint16_t d = static_cast<std::uint16_t>(a - b);
        return std::min<std::uint32_t>(d, static_cast<std::uint16_t>(b - a));
    };
    auto circular32 = [](std::uint32_t a, std::uint32_t b) {
        const std::uint32_t d = a - b;
        return std::min<std::uint64_t>(d, b - a);
    };

    score("ip_id", [&](std::size_t i) {
        std::size_t best = i == 0 ? 1 : 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (circular16(sessions[i].ip_id, sessions[j].ip_id) <
                circular16(sessions[i].ip_id, sessions[best].ip_id))
                best = j;
        }
        return best;
    });
    score("isn", [&](std::size_t i) {
        std::size_t best = i == 0 ? 1 : 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (circular32(sessions[i].isn, sessions[j].isn) <
                circular32(sessions[i].isn, sessions[best].isn))
                best = j;
        }
        return best;
    });
    ChaChaRng pick_rng = ChaChaRng::from_seed(seed, 0x6C696E6B);  // independent stream
    score("addr_reuse", [&](std::size_t i) {
        std::vector<std::size_t> shared;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && sessions[j].src == sessions[i].src) shared.push_back(j);
        if (!shared.empty())
            return shared[pick_rng.uniform_below(shared.size())];
        std::size_t j = pick_rng.uniform_below(n - 1);
        return j >= i ? j + 1 : j;
    });
    return out;
}

}  // namespace panel::sim
