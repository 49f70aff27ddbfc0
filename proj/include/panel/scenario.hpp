#pragma once

#include <optional>

#include "panel/adversary.hpp"
#include "panel/simnet.hpp"

namespace panel::sim {

// One structured file describing topology, traffic scripts, adversary
// analyses to run, and declared expectations. Schema documented in
// docs/scenarios.md.
struct Scenario {
    std::string name;
    Topology topology;
    std::vector<SessionScript> scripts;
    std::uint64_t default_seed = 1;

    struct AdversaryRuns {
        std::vector<std::string> distance_mi_vantages;
        std::vector<std::string> linkability_vantages;
    } adversary;

    struct Expectations {
        std::optional<bool> payload_integrity;
        std::optional<bool> reverse_path_landmarks;
        std::optional<bool> zero_ttl_expiry;
        std::optional<std::uint64_t> min_ttl_expired;
        struct Range {
            double min = 0.0, max = 0.0;
        };
        std::optional<Range> first_to_steady_rtt;
        struct DistanceMi {
            std::string vantage;
            std::optional<double> within_of_entropy;  // |MI - H(distance)| <= x
            std::optional<double> max_bits;           // MI <= x
        };
        std::vector<DistanceMi> distance_mi;
        std::optional<bool> all_sessions_completed;
    } expect;

    static Scenario load_file(const std::string& path);
};

struct ExpectationResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ScenarioOutcome {
    TraceBundle bundle;
    std::vector<DistanceMiReport> distance_mi;
    std::vector<LinkabilityReport> linkability;
    std::vector<ExpectationResult> expectations;
    bool all_passed = true;
};

// Runs the scenario and evaluates each declared expectation.
ScenarioOutcome run_scenario(const Scenario& scenario, std::uint64_t seed,
                             const RunOptions& options = {});

}  // namespace panel::sim
