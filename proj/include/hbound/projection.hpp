#pragma once

#include "hbound/core.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace hbound {

struct ProjectionParams {
    double alpha = -1.0;

    void validate() const { require(alpha < 0, "projection: alpha must be negative"); }
};

// Mass of a ray occupied on disjoint radial intervals (u_k, w_k): sum of log(w_k / u_k).
inline double ray_mass(const std::vector<std::pair<double, double>>& intervals)
{
    double l = 0;
    for (const auto& [u, w] : intervals) {
        require(u > 0, "ray_mass: interval touches the camera center");
        require(w >= u, "ray_mass: reversed interval");
        l += std::log(w / u);
    }
    return l;
}

// Probability of seeing background through a ray of mass ell.
inline double g(double ell, double alpha) { return std::exp(alpha * ell); }

// log P(q | ell); -infinity for foreground through an empty ray.
inline double log_p_q_given_ell(int q, double ell, double alpha)
{
    if (q == 0) return alpha * ell;
    if (ell <= 0) return -kInf;
    return std::log(-std::expm1(alpha * ell));
}

}  // namespace hbound
