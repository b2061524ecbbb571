#pragma once

#include "horolab/hypgeom.hpp"

#include <cmath>
#include <random>

namespace testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline horolab::HPoint random_point(std::mt19937_64& rng) {
    return {uniform(rng, -3.0, 3.0), std::exp(uniform(rng, -1.5, 1.5))};
}

/// Frame with Hopf coordinates drawn from a bounded box, endpoints distinct.
inline horolab::GroupElement random_frame(std::mt19937_64& rng) {
    for (;;) {
        const double a = uniform(rng, -5.0, 5.0), b = uniform(rng, -5.0, 5.0);
        if (std::abs(a - b) < 0.05) continue;
        return horolab::hopf_to_frame({horolab::BoundaryPoint(a), horolab::BoundaryPoint(b),
                                       uniform(rng, -2.0, 2.0)});
    }
}

/// Reference distance, written out independently of the library.
inline double ref_dist(const horolab::HPoint& p, const horolab::HPoint& q) {
    const double dx = p.x - q.x, dy = p.y - q.y;
    return std::acosh(1.0 + (dx * dx + dy * dy) / (2.0 * p.y * q.y));
}

} // namespace testing
