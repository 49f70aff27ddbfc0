#pragma once

#include "panel/simnet.hpp"

namespace panel::sim {

// Plug-in mutual information between true hop distance (to the landmark
// that last wrote the TTL) and observed TTL, one sample per session, over
// post-landmark upstream observations at one vantage. Refuses to estimate
// below 100 sessions (InsufficientSamples).
struct DistanceMiReport {
    std::string vantage;
    std::size_t sessions = 0;
    double mi_bits = 0.0;
    double distance_entropy_bits = 0.0;  // H of the empirical distance marginal
};

DistanceMiReport adversary_distance_inference(const TraceBundle& bundle,
                                              const std::string& vantage);

// Session-linking heuristics run on post-landmark observations only:
//   ip_id       nearest first-seen IP identification value
//   isn         nearest first-seen TCP sequence number
//   addr_reuse  shared source address (random pick inside the group)
// Accuracy is the fraction of sessions whose chosen partner truly belongs
// to the same client; `baseline` is the analytic accuracy of uniformly
// random pairing on the same instance.
struct LinkabilityReport {
    std::string vantage;
    std::size_t sessions = 0;
    double baseline = 0.0;
    struct Heuristic {
        std::string name;
        double accuracy = 0.0;
        // (session uid, chosen partner uid) pairs, for inspection.
        std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;
    };
    std::vector<Heuristic> heuristics;
};

LinkabilityReport adversary_linkability(const TraceBundle& bundle, const std::string& vantage,
                                        std::uint64_t seed);

}  // namespace panel::sim
