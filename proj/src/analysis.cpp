#include "panel/analysis.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace panel {

namespace {

std::uint64_t checked_shift_mul(int key_bits, std::uint64_t entry_bytes) {
    if (key_bits < 0 || key_bits > 64) throw FieldOutOfRange("key_bits must be in 0..64");
    if (entry_bytes == 0) throw FieldOutOfRange("entry bytes must be positive");
    const unsigned __int128 slots = static_cast<unsigned __int128>(1) << key_bits;
    const unsigned __int128 bytes = slots * entry_bytes;
    if (bytes > ~static_cast<std::uint64_t>(0))
        throw FieldOutOfRange("table size overflows 64 bits");
    return static_cast<std::uint64_t>(bytes);
}

struct MeanStd {
    double mean = 0.0;
    double std_dev = 0.0;
};

MeanStd population_stats(const std::vector<double>& xs) {
    MeanStd out;
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std_dev = std::sqrt(ss / static_cast<double>(xs.size()));
    return out;
}

}  // namespace

TableMemory table_memory(const CapacityModel& model) {
    TableMemory out;
    out.forward_bytes = checked_shift_mul(model.key_bits, model.entry_bytes_forward);
    out.reverse_bytes = checked_shift_mul(model.key_bits, model.entry_bytes_reverse);
    if (out.forward_bytes > ~static_cast<std::uint64_t>(0) - out.reverse_bytes)
        throw FieldOutOfRange("total table size overflows 64 bits");
    out.total_bytes = out.forward_bytes + out.reverse_bytes;
    return out;
}

std::uint64_t pool_size_required(std::uint64_t concurrent_sessions, std::uint64_t ports_per_ip) {
    if (ports_per_ip == 0) throw FieldOutOfRange("ports_per_ip must be positive");
    if (concurrent_sessions == 0) return 0;
    return (concurrent_sessions - 1) / ports_per_ip + 1;
}

CollisionEstimate expected_collisions(std::uint64_t n_sessions, int key_bits) {
    if (key_bits < 0 || key_bits > 63) throw FieldOutOfRange("key_bits must be in 0..63");
    CollisionEstimate out;
    const double n = static_cast<double>(n_sessions);
    const double m = std::ldexp(1.0, key_bits);  // 2^k
    // Expected occupied slots after n inserts is m (1 - (1 - 1/m)^n); every
    // insert beyond an occupied slot is a rejected collision.
    const double occupied = m * -std::expm1(n * std::log1p(-1.0 / m));
    out.exact = n - occupied;
    if (out.exact < 0.0) out.exact = 0.0;
    out.approximate = n * n / (2.0 * m);
    return out;
}

AnonymityStats anonymity_stats(const std::vector<AsRecord>& records) {
    if (records.empty()) throw EmptyInput("no AS records");
    std::vector<double> totals, actives, fractions;
    totals.reserve(records.size());
    actives.reserve(records.size());
    fractions.reserve(records.size());
    for (const AsRecord& r : records) {
        if (r.active_ipv4 > r.total_ipv4)
            throw InputError("AS " + std::to_string(r.asn) + ": active exceeds total");
        totals.push_back(static_cast<double>(r.total_ipv4));
        actives.push_back(static_cast<double>(r.active_ipv4));
        fractions.push_back(r.total_ipv4 == 0
                                ? 0.0
                                : static_cast<double>(r.active_ipv4) /
                                      static_cast<double>(r.total_ipv4));
    }
    AnonymityStats out;
    out.records = records.size();
    const MeanStd t = population_stats(totals);
    const MeanStd a = population_stats(actives);
    const MeanStd f = population_stats(fractions);
    out.mean_total = t.mean;
    out.std_total = t.std_dev;
    out.mean_active = a.mean;
    out.std_active = a.std_dev;
    out.mean_active_fraction = f.mean;
    return out;
}

TwoHopResult two_hop_anonymity(const std::vector<TwoHopPath>& paths,
                               const std::vector<AsRecord>& records) {
    std::unordered_map<std::uint64_t, const AsRecord*> by_asn;
    for (const AsRecord& r : records) by_asn.emplace(r.asn, &r);
    auto lookup = [&](std::uint64_t asn) -> const AsRecord& {
        auto it = by_asn.find(asn);
        if (it == by_asn.end()) throw UnknownAsn("unknown ASN " + std::to_string(asn));
        return *it->second;
    };
    TwoHopResult out;
    std::vector<double> totals, actives;
    for (const TwoHopPath& p : paths) {
        const AsRecord& a = lookup(p.first_asn);
        const AsRecord& b = lookup(p.second_asn);
        TwoHopResult::Row row;
        row.path = p;
        row.total_sum = a.total_ipv4 + b.total_ipv4;
        row.active_sum = a.active_ipv4 + b.active_ipv4;
        out.per_path.push_back(row);
        totals.push_back(static_cast<double>(row.total_sum));
        actives.push_back(static_cast<double>(row.active_sum));
    }
    const MeanStd t = population_stats(totals);
    const MeanStd a = population_stats(actives);
    out.mean_total = t.mean;
    out.std_total = t.std_dev;
    out.mean_active = a.mean;
    out.std_active = a.std_dev;
    return out;
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t\r"));
        auto last = item.find_last_not_of(" \t\r");
        item.erase(last == std::string::npos ? 0 : last + 1);
        cols.push_back(item);
    }
    return cols;
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
    if (s.empty()) return false;
    if (s[0] == '-') throw NegativeCount("negative count: " + s);
    try {
        std::size_t used = 0;
        out = std::stoull(s, &used);
        return used == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

std::vector<AsRecord> load_as_records(std::istream& in, const std::string& name) {
    std::vector<AsRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto cols = split_csv_row(line);
        if (cols.size() != 3)
            throw MalformedRow(name + ":" + std::to_string(lineno) + ": expected 3 columns");
        AsRecord r;
        if (!parse_u64(cols[0], r.asn)) {
            if (out.empty() && lineno == 1) continue;  // header
            throw MalformedRow(name + ":" + std::to_string(lineno) + ": bad asn");
        }
        if (!parse_u64(cols[1], r.total_ipv4) || !parse_u64(cols[2], r.active_ipv4))
            throw MalformedRow(name + ":" + std::to_string(lineno) + ": bad count");
        if (r.active_ipv4 > r.total_ipv4)
            throw InputError(name + ":" + std::to_string(lineno) + ": active " +
                             std::to_string(r.active_ipv4) + " exceeds total " +
                             std::to_string(r.total_ipv4));
        out.push_back(r);
    }
    if (out.empty()) throw EmptyInput(name + ": no data rows");
    return out;
}

std::vector<AsRecord> load_as_records_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open CSV: " + path);
    return load_as_records(in, path);
}

std::vector<TwoHopPath> load_paths(std::istream& in, const std::string& name) {
    std::vector<TwoHopPath> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto cols = split_csv_row(line);
        if (cols.size() != 2)
            throw MalformedRow(name + ":" + std::to_string(lineno) + ": expected 2 columns");
        TwoHopPath p;
        if (!parse_u64(cols[0], p.first_asn)) {
            if (out.empty() && lineno == 1) continue;  // header
            throw MalformedRow(name + ":" + std::to_string(lineno) + ": bad asn");
        }
        if (!parse_u64(cols[1], p.second_asn))
            throw MalformedRow(name + ":" + std::to_string(lineno) + ": bad asn");
        out.push_back(p);
    }
    if (out.empty()) throw EmptyInput(name + ": no data rows");
    return out;
}

std::vector<TwoHopPath> load_paths_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open CSV: " + path);
    return load_paths(in, path);
}

}  // namespace panel
