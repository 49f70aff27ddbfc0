#pragma once

#include <cstdint>

#include "panel/mutual_information.hpp"

namespace panel {

struct TtlOptimizeResult {
    TtlDistribution delta;
    double achieved_mi = 0.0;
    double baseline_mi = 0.0;  // MI of the uniform distribution on the same support
    MiVariant variant = MiVariant::AsWritten;
    int iterations = 0;     // iterations spent on the winning start
    int best_start = 0;     // 0 = uniform start, 1..restarts = random starts
    bool expiry_warning = false;  // fires iff t_min <= max hop distance
};

// Minimizes the objective over probability vectors on {t_min..t_max} by
// projected gradient descent (Euclidean projection back onto the simplex
// after every step, backtracking line search). Multi-start: the uniform
// start plus `restarts` random starts; ties broken by lowest start index.
// Stops a start when the projected-gradient norm drops below `tolerance`
// or after 10^4 iterations. Result masses below 1e-12 are clamped to zero
// and the vector renormalized.
//
// Guarantees achieved_mi <= baseline_mi + tolerance.
// Throws InputError on t_min > t_max or t outside [1, 255], and propagates
// InvalidDistribution.
TtlOptimizeResult optimize_ttl(const DistanceDistribution& dist, int t_min, int t_max,
                               MiVariant variant, double tolerance, int restarts,
                               std::uint64_t seed);

// Euclidean projection of an arbitrary vector onto the probability simplex.
// Exposed for tests.
std::vector<double> project_to_simplex(std::vector<double> v);

}  // namespace panel
