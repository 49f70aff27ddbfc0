#include "panel/mutual_information.hpp"

#include <cmath>
#include <vector>

namespace panel {

std::string to_string(MiVariant v) {
    return v == MiVariant::AsWritten ? "as-written" : "about-distance";
}

MiVariant mi_variant_from_string(const std::string& s) {
    if (s == "as-written") return MiVariant::AsWritten;
    if (s == "about-distance") return MiVariant::AboutDistance;
    throw ConfigError("unknown objective variant: " + s +
                      " (expected 'as-written' or 'about-distance')");
}

IntPmf observed_ttl_distribution(const TtlDistribution& delta, const DistanceDistribution& dist) {
    const IntPmf& t = delta.pmf;
    const IntPmf& d = dist.pmf;
    const int lo = t.lo() - d.hi();
    const int hi = t.hi() - d.lo();
    std::vector<double> z(static_cast<std::size_t>(hi - lo) + 1, 0.0);
    for (int ti = t.lo(); ti <= t.hi(); ++ti) {
        const double pt = t.at(ti);
        if (pt == 0.0) continue;
        for (int di = d.lo(); di <= d.hi(); ++di) {
            const double pd = d.at(di);
            if (pd == 0.0) continue;
            z[static_cast<std::size_t>(ti - di - lo)] += pt * pd;
        }
    }
    return IntPmf(lo, std::move(z));
}

namespace {

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

// Joint over (Z, X): rows indexed by z, columns by the conditioning
// variable (T or D). p(z, t) = P(T=t) P(D=t-z); p(z, d) = P(T=z+d) P(D=d).
struct Joint {
    int z_lo, x_lo;
    std::size_t nz, nx;
    std::vector<double> p;  // nz * nx, row-major
    double& at(std::size_t zi, std::size_t xi) { return p[zi * nx + xi]; }
    double at(std::size_t zi, std::size_t xi) const { return p[zi * nx + xi]; }
};

Joint build_joint(const TtlDistribution& delta, const DistanceDistribution& dist,
                  MiVariant variant) {
    delta.pmf.validate();
    dist.pmf.validate();
    const IntPmf& t = delta.pmf;
    const IntPmf& d = dist.pmf;
    Joint j;
    j.z_lo = t.lo() - d.hi();
    j.nz = static_cast<std::size_t>(t.hi() - d.lo() - j.z_lo) + 1;
    if (variant == MiVariant::AsWritten) {
        j.x_lo = t.lo();
        j.nx = t.size();
    } else {
        j.x_lo = d.lo();
        j.nx = d.size();
    }
    j.p.assign(j.nz * j.nx, 0.0);
    for (int ti = t.lo(); ti <= t.hi(); ++ti) {
        const double pt = t.at(ti);
        if (pt == 0.0) continue;
        for (int di = d.lo(); di <= d.hi(); ++di) {
            const double pd = d.at(di);
            if (pd == 0.0) continue;
            const std::size_t zi = static_cast<std::size_t>(ti - di - j.z_lo);
            const std::size_t xi = static_cast<std::size_t>(
                (variant == MiVariant::AsWritten ? ti : di) - j.x_lo);
            j.at(zi, xi) += pt * pd;
        }
    }
    return j;
}

}  // namespace

double mutual_information(const TtlDistribution& delta, const DistanceDistribution& dist,
                          MiVariant variant) {
    const Joint j = build_joint(delta, dist, variant);
    std::vector<double> pz(j.nz, 0.0), px(j.nx, 0.0);
    for (std::size_t zi = 0; zi < j.nz; ++zi)
        for (std::size_t xi = 0; xi < j.nx; ++xi) {
            pz[zi] += j.at(zi, xi);
            px[xi] += j.at(zi, xi);
        }
    double mi = 0.0;
    for (std::size_t zi = 0; zi < j.nz; ++zi)
        for (std::size_t xi = 0; xi < j.nx; ++xi) {
            const double pzx = j.at(zi, xi);
            if (pzx > 0.0) mi += pzx * std::log2(pzx / (pz[zi] * px[xi]));
        }
    return mi < 0.0 ? 0.0 : mi;  // clamp float dust
}

double mutual_information_entropy_form(const TtlDistribution& delta,
                                       const DistanceDistribution& dist, MiVariant variant) {
    const Joint j = build_joint(delta, dist, variant);
    std::vector<double> pz(j.nz, 0.0), px(j.nx, 0.0);
    double h_joint = 0.0;
    for (std::size_t zi = 0; zi < j.nz; ++zi)
        for (std::size_t xi = 0; xi < j.nx; ++xi) {
            const double pzx = j.at(zi, xi);
            pz[zi] += pzx;
            px[xi] += pzx;
            h_joint -= xlog2x(pzx);
        }
    double h_z = 0.0, h_x = 0.0;
    for (double p : pz) h_z -= xlog2x(p);
    for (double p : px) h_x -= xlog2x(p);
    return h_z + h_x - h_joint;
}

}  // namespace panel
