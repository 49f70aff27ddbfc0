#include "panel/ttl_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace panel {

std::vector<double> project_to_simplex(std::vector<double> v) {
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<>());
    double acc = 0.0, lambda = 0.0;
    int rho = 0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        acc += u[j];
        const double candidate = (1.0 - acc) / static_cast<double>(j + 1);
        if (u[j] + candidate > 0.0) {
            rho = static_cast<int>(j + 1);
            lambda = candidate;
        }
    }
    for (double& x : v) x = std::max(x + lambda, 0.0);
    return v;
}

namespace {

constexpr int kMaxIterations = 10000;
constexpr double kLog2e = 1.4426950408889634;  // 1/ln 2

// Objective machinery over the fixed support {t_min..t_max} against a fixed
// distance pmf. q is a mass vector on the TTL support.
struct Objective {
    int t_lo;
    const IntPmf* d;
    MiVariant variant;
    int z_lo, z_n;

    Objective(int t_min, int t_max, const IntPmf& dist, MiVariant v)
        : t_lo(t_min), d(&dist), variant(v) {
        z_lo = t_min - dist.hi();
        z_n = (t_max - dist.lo()) - z_lo + 1;
    }

    void z_marginal(const std::vector<double>& q, std::vector<double>& pz) const {
        pz.assign(static_cast<std::size_t>(z_n), 0.0);
        for (std::size_t ti = 0; ti < q.size(); ++ti) {
            if (q[ti] == 0.0) continue;
            const int t = t_lo + static_cast<int>(ti);
            for (int di = d->lo(); di <= d->hi(); ++di) {
                const double pd = d->at(di);
                if (pd == 0.0) continue;
                pz[static_cast<std::size_t>(t - di - z_lo)] += q[ti] * pd;
            }
        }
    }

    // AsWritten:     I(Z;T) = H(Z) - H(D)
    // AboutDistance: I(Z;D) = H(Z) - H(q)
    // (given T, Z is a bijection of D and vice versa).
    double value(const std::vector<double>& q, std::vector<double>& pz_scratch) const {
        z_marginal(q, pz_scratch);
        double h_z = 0.0;
        for (double p : pz_scratch)
            if (p > 0.0) h_z -= p * std::log2(p);
        double h_cond = 0.0;
        if (variant == MiVariant::AsWritten) {
            for (int di = d->lo(); di <= d->hi(); ++di) {
                const double pd = d->at(di);
                if (pd > 0.0) h_cond -= pd * std::log2(pd);
            }
        } else {
            for (double p : q)
                if (p > 0.0) h_cond -= p * std::log2(p);
        }
        return h_z - h_cond;
    }

    void gradient(const std::vector<double>& q, const std::vector<double>& pz,
                  std::vector<double>& g) const {
        g.assign(q.size(), 0.0);
        for (std::size_t ti = 0; ti < q.size(); ++ti) {
            const int t = t_lo + static_cast<int>(ti);
            double acc = 0.0;
            for (int di = d->lo(); di <= d->hi(); ++di) {
                const double pd = d->at(di);
                if (pd == 0.0) continue;
                const double pz_v = pz[static_cast<std::size_t>(t - di - z_lo)];
                acc -= pd * (std::log2(std::max(pz_v, 1e-300)) + kLog2e);
            }
            g[ti] = acc;
            if (variant == MiVariant::AboutDistance)
                g[ti] += std::log2(std::max(q[ti], 1e-300)) + kLog2e;
        }
    }
};

struct StartResult {
    std::vector<double> q;
    double value = 0.0;
    int iterations = 0;
};

StartResult descend(const Objective& obj, std::vector<double> q, double tolerance) {
    std::vector<double> pz, g, trial, pz_trial;
    double f = obj.value(q, pz);
    double step = 1.0;
    int iter = 0;
    for (; iter < kMaxIterations; ++iter) {
        obj.gradient(q, pz, g);
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            trial.resize(q.size());
            for (std::size_t i = 0; i < q.size(); ++i) trial[i] = q[i] - step * g[i];
            trial = project_to_simplex(std::move(trial));
            double f_trial = obj.value(trial, pz_trial);
            // Armijo on the gradient mapping.
            double decrease = 0.0;
            for (std::size_t i = 0; i < q.size(); ++i) decrease += g[i] * (q[i] - trial[i]);
            if (f_trial <= f - 1e-4 * decrease || f_trial < f - 1e-15) {
                double move = 0.0;
                for (std::size_t i = 0; i < q.size(); ++i) {
                    const double dxi = trial[i] - q[i];
                    move += dxi * dxi;
                }
                q.swap(trial);
                pz.swap(pz_trial);
                f = f_trial;
                accepted = true;
                if (std::sqrt(move) / step < tolerance) return {q, f, iter + 1};
                step *= 2.0;  // let the step grow back after cautious phases
                break;
            }
            step *= 0.5;
            if (step < 1e-18) return {q, f, iter + 1};
        }
        if (!accepted) return {q, f, iter + 1};
    }
    return {q, f, iter};
}

}  // namespace

TtlOptimizeResult optimize_ttl(const DistanceDistribution& dist, int t_min, int t_max,
                               MiVariant variant, double tolerance, int restarts,
                               std::uint64_t seed) {
    if (t_min > t_max) throw InputError("t_min > t_max");
    if (t_min < 1 || t_max > 255) throw InputError("TTL support must lie within [1, 255]");
    if (restarts < 0) throw InputError("restarts must be >= 0");
    if (tolerance <= 0.0) throw InputError("tolerance must be positive");
    dist.pmf.validate();

    const std::size_t n = static_cast<std::size_t>(t_max - t_min) + 1;
    Objective obj(t_min, t_max, dist.pmf, variant);

    TtlDistribution uniform{IntPmf::uniform(t_min, t_max)};
    const double baseline = mutual_information(uniform, dist, variant);

    StartResult best;
    int best_start = -1;
    for (int start = 0; start <= restarts; ++start) {
        std::vector<double> q0(n);
        if (start == 0) {
            std::fill(q0.begin(), q0.end(), 1.0 / static_cast<double>(n));
        } else {
            // Dirichlet(1): exponentials normalized.
            ChaChaRng rng = ChaChaRng::from_seed(seed, static_cast<std::uint64_t>(start));
            double total = 0.0;
            for (double& x : q0) {
                x = -std::log(1.0 - rng.uniform01());
                total += x;
            }
            for (double& x : q0) x /= total;
        }
        StartResult r = descend(obj, std::move(q0), tolerance);
        if (best_start < 0 || r.value < best.value) {
            best = std::move(r);
            best_start = start;
        }
    }

    // Clamp dust, renormalize, and report the MI of what we actually return.
    double total = 0.0;
    for (double& x : best.q) {
        if (x < 1e-12) x = 0.0;
        total += x;
    }
    for (double& x : best.q) x /= total;

    TtlOptimizeResult out;
    out.delta = TtlDistribution{IntPmf(t_min, best.q)};
    out.achieved_mi = mutual_information(out.delta, dist, variant);
    out.baseline_mi = baseline;
    out.variant = variant;
    out.iterations = best.iterations;
    out.best_start = best_start;
    out.expiry_warning = t_min <= dist.pmf.hi();
    if (out.achieved_mi > baseline + tolerance)
        throw Error("optimizer exceeded the uniform baseline; this is a bug");
    return out;
}

}  // namespace panel
