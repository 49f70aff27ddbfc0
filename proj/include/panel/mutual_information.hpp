#pragma once

#include <string>

#include "panel/distribution.hpp"

namespace panel {

// The objective comes in two readings that differ on degenerate inputs:
//   AsWritten      I(T - D; T)  (leakage about the TTL draw itself)
//   AboutDistance  I(T - D; D)  (leakage about the hop distance)
// AsWritten is the default everywhere; switching requires an explicit flag
// and every report carries the label.
enum class MiVariant { AsWritten, AboutDistance };

std::string to_string(MiVariant v);
MiVariant mi_variant_from_string(const std::string& s);

// Exact mutual information in bits, computed from the joint distribution of
// (T - D, X) with X = T or X = D; T and D independent by construction,
// 0 log 0 = 0. Throws InvalidDistribution on malformed inputs.
double mutual_information(const TtlDistribution& delta, const DistanceDistribution& dist,
                          MiVariant variant);

// Cross-check route: I = H(Z) + H(X) - H(Z, X) from the same joint.
double mutual_information_entropy_form(const TtlDistribution& delta,
                                       const DistanceDistribution& dist, MiVariant variant);

// Distribution of Z = T - D (the TTL an observer at hop distance d sees).
IntPmf observed_ttl_distribution(const TtlDistribution& delta, const DistanceDistribution& dist);

}  // namespace panel
