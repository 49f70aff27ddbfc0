#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "panel/common.hpp"
#include "panel/rng.hpp"

namespace panel {

// Probability mass function over a contiguous integer support [lo, hi].
// Interior zero-mass points are kept so supports stay contiguous.
class IntPmf {
public:
    IntPmf() = default;
    // Normalizes weights (sum may be any positive value). Throws
    // InvalidDistribution on negative mass or zero total.
    IntPmf(int lo, std::vector<double> weights);

    static IntPmf point_mass(int value) { return IntPmf(value, {1.0}); }
    static IntPmf uniform(int lo, int hi);

    int lo() const { return lo_; }
    int hi() const { return lo_ + static_cast<int>(pmf_.size()) - 1; }
    std::size_t size() const { return pmf_.size(); }
    double at(int value) const {
        if (value < lo() || value > hi()) return 0.0;
        return pmf_[static_cast<std::size_t>(value - lo_)];
    }
    const std::vector<double>& masses() const { return pmf_; }

    // Shannon entropy in bits.
    double entropy() const;
    // Checks masses are non-negative and sum to 1 within tol.
    void validate(double tol = 1e-6) const;

    int sample(ChaChaRng& rng) const;

    double total_variation(const IntPmf& other) const;

    bool operator==(const IntPmf&) const = default;

private:
    int lo_ = 0;
    std::vector<double> pmf_;
    std::vector<double> cdf_;
    void build_cdf();
};

// Hop-count distribution D. Support must start at >= 1.
struct DistanceDistribution {
    IntPmf pmf;
    explicit DistanceDistribution(IntPmf p);
    DistanceDistribution() = default;
};

// Initial-TTL distribution. Support within [1, 255]. `expiry_risk(d_max)`
// reports whether packets could die in flight (T_min <= d_max).
struct TtlDistribution {
    IntPmf pmf;
    explicit TtlDistribution(IntPmf p);
    TtlDistribution() = default;
    bool expiry_risk(int d_max) const { return pmf.lo() <= d_max; }
};

// CSV parsing for two-column "value,weight" rows; header row optional.
// Throws MalformedRow / EmptyInput. Used for both hop-count data
// ("hop_count,frequency") and TTL distributions ("ttl,probability").
IntPmf load_pmf_csv(std::istream& in, const std::string& name);
IntPmf load_pmf_csv_file(const std::string& path);

void write_pmf_csv(std::ostream& out, const IntPmf& pmf, const std::string& value_header,
                   const std::string& weight_header);

}  // namespace panel
