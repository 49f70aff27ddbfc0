#include "panel/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace panel {

IntPmf::IntPmf(int lo, std::vector<double> weights) : lo_(lo), pmf_(std::move(weights)) {
    if (pmf_.empty()) throw InvalidDistribution("empty support");
    double total = 0.0;
    for (double w : pmf_) {
        if (w < 0.0 || !std::isfinite(w)) throw InvalidDistribution("negative or non-finite mass");
        total += w;
    }
    if (total <= 0.0) throw InvalidDistribution("zero total mass");
    for (double& w : pmf_) w /= total;
    build_cdf();
}

IntPmf IntPmf::uniform(int lo, int hi) {
    if (hi < lo) throw InvalidDistribution("uniform with hi < lo");
    return IntPmf(lo, std::vector<double>(static_cast<std::size_t>(hi - lo) + 1, 1.0));
}

void IntPmf::build_cdf() {
    cdf_.resize(pmf_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf_.size(); ++i) {
        acc += pmf_[i];
        cdf_[i] = acc;
    }
    cdf_.back() = 1.0;
}

double IntPmf::entropy() const {
    double h = 0.0;
    for (double p : pmf_)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

void IntPmf::validate(double tol) const {
    double total = 0.0;
    for (double p : pmf_) {
        if (p < 0.0) throw InvalidDistribution("negative mass");
        total += p;
    }
    if (std::abs(total - 1.0) > tol) throw InvalidDistribution("mass sum off by more than tolerance");
}

int IntPmf::sample(ChaChaRng& rng) const {
    const double u = rng.uniform01();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return lo_ + static_cast<int>(it - cdf_.begin());
}

double IntPmf::total_variation(const IntPmf& other) const {
    const int lo = std::min(this->lo(), other.lo());
    const int hi = std::max(this->hi(), other.hi());
    double tv = 0.0;
    for (int v = lo; v <= hi; ++v) tv += std::abs(at(v) - other.at(v));
    return tv / 2.0;
}

DistanceDistribution::DistanceDistribution(IntPmf p) : pmf(std::move(p)) {
    if (pmf.lo() < 1) throw InvalidDistribution("hop distances must be >= 1");
}

TtlDistribution::TtlDistribution(IntPmf p) : pmf(std::move(p)) {
    if (pmf.lo() < 1 || pmf.hi() > 255)
        throw InvalidDistribution("TTL support must lie within [1, 255]");
}

IntPmf load_pmf_csv(std::istream& in, const std::string& name) {
    std::map<int, double> rows;
    std::string line;
    std::size_t lineno = 0;
    bool saw_data = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty() || trimmed[0] == '#') continue;
        auto comma = trimmed.find(',');
        if (comma == std::string::npos)
            throw MalformedRow(name + ":" + std::to_string(lineno) + ": expected two columns");
        std::string c0 = trimmed.substr(0, comma);
        std::string c1 = trimmed.substr(comma + 1);
        std::size_t used0 = 0, used1 = 0;
        int value = 0;
        double weight = 0.0;
        try {
            value = std::stoi(c0, &used0);
        } catch (const std::exception&) {
            if (!saw_data) continue;  // header row
            throw MalformedRow(name + ":" + std::to_string(lineno) + ": non-numeric value");
        }
        try {
            weight = std::stod(c1, &used1);
        } catch (const std::exception&) {
            throw MalformedRow(name + ":" + std::to_string(lineno) + ": non-numeric weight");
        }
        while (used0 < c0.size() && (c0[used0] == ' ' || c0[used0] == '\t')) ++used0;
        while (used1 < c1.size() && (c1[used1] == ' ' || c1[used1] == '\t')) ++used1;
        if (used0 != c0.size() || used1 != c1.size())
            throw MalformedRow(name + ":" + std::to_string(lineno) + ": trailing junk");
        if (weight < 0.0)
            throw MalformedRow(name + ":" + std::to_string(lineno) + ": negative weight");
        rows[value] += weight;
        saw_data = true;
    }
    if (rows.empty()) throw EmptyInput(name + ": no data rows");
    const int lo = rows.begin()->first;
    const int hi = rows.rbegin()->first;
    std::vector<double> weights(static_cast<std::size_t>(hi - lo) + 1, 0.0);
    for (auto& [v, w] : rows) weights[static_cast<std::size_t>(v - lo)] = w;
    return IntPmf(lo, std::move(weights));
}

IntPmf load_pmf_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open CSV: " + path);
    return load_pmf_csv(in, path);
}

void write_pmf_csv(std::ostream& out, const IntPmf& pmf, const std::string& value_header,
                   const std::string& weight_header) {
    out << value_header << ',' << weight_header << '\n';
    char buf[64];
    for (int v = pmf.lo(); v <= pmf.hi(); ++v) {
        std::snprintf(buf, sizeof buf, "%.17g", pmf.at(v));
        out << v << ',' << buf << '\n';
    }
}

}  // namespace panel
