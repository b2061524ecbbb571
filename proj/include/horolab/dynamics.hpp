#pragma once

// Horocycle averages pushed by the geodesic flow, Lebesgue ratio averages,
// correlations, empirical transverse measures and the annulus error term.
// Observables are functions on the quotient: a frame is first reduced to the
// fundamental domain and the observable sees its Hopf coordinates.

#include "horolab/measures.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace horolab {

/// Function of the Hopf coordinates of a reduced frame.
using Observable = std::function<double(const HopfCoord&)>;

/// exp(1 - 1/(1 - u^2)) on |u| < 1, zero outside.
double bump(double u);

/// Product of three bumps centred at `center` with half-widths w_minus,
/// w_plus, w_t, scaled by `height`.
struct TestFunction {
    std::string id;
    HopfCoord center;
    double w_minus = 0.1;
    double w_plus = 0.1;
    double w_t = 0.5;
    double height = 1.0;

    double operator()(const HopfCoord& h) const;
    Observable observable() const;
};

/// Throws InvalidInput unless the centre is finite and every sampled frame
/// of the support has its base point in the fundamental domain, at least
/// `margin` (hyperbolic) away from every wall.
void validate_support(const SchottkyData& group, const TestFunction& f, double margin = 0.0);

Observable constant_observable(double c);

/// Bumps over ordered pairs of disks (xi_minus near disk a, xi_plus near
/// disk b), each covering the limit set inside its disks, with the t-window
/// centred in the range where the support stays `margin` away from the
/// walls. Pairs admitting no such window are skipped; at most `count`.
std::vector<TestFunction> test_suite(const SchottkyData& group, std::size_t count = 5,
                                     double margin = 0.2);

/// Hopf coordinates of the reduced frame. A frame within the boundary
/// tolerance of a wall is moved by a tiny horocycle step and retried.
HopfCoord reduced_hopf(const SchottkyData& group, const GroupElement& frame);

struct AverageResult {
    double value = 0.0;
    double r = 0.0;
    double t = 0.0;
    Weighting weighting = Weighting::PattersonSullivan;
    GroupElement frame;
    std::size_t atoms = 0;
};

/// (1/mass) sum over atoms with |s| <= r of weight(s) phi(F n_s a_t).
/// Throws EmptySupport when the ball carries no mass.
AverageResult m_average(const SchottkyData& group, const HorocycleConditional& c, double r,
                        double t, const Observable& phi);

/// Integrals of several observables over the same ball, sharing reductions.
std::vector<double> ball_integrals(const SchottkyData& group, const HorocycleConditional& c,
                                   double r, double t, const std::vector<Observable>& phis);

/// int phi(F n_s) ds / int psi(F n_s) ds over |s| <= r on a uniform midpoint
/// grid with `resolution` cells. Throws ZeroDenominator when the psi integral
/// is below 1e-12 times the ball length.
double ratio_average(const SchottkyData& group, const GroupElement& frame, double r,
                     const Observable& phi, const Observable& psi, int resolution);

/// int phi(F) psi(F a_t) dQ / Q(total).
double correlation(const SchottkyData& group, const QuadratureMeasure& q, double t,
                   const Observable& phi, const Observable& psi);

struct EmpiricalTransverse {
    std::vector<double> cells; ///< normalized crossing mass per transversal cell
    std::size_t crossings = 0;
};

/// Walks {F n_s : |s| <= r} with the given step; every maximal run of samples
/// inside the box on one domain copy is a crossing, recorded as a unit mass
/// at its transversal cell and divided by `ball_mass`. Throws LeakyBox when
/// more than 1% of the in-box samples lie within 1e-3 r0 of the box boundary.
EmpiricalTransverse empirical_transverse(const SchottkyData& group, const GroupElement& frame,
                                         const FlowBox& box, double r, double step,
                                         double ball_mass);

/// phi_bound * mass(r - r0 <= |s| <= r + r0) / mass(|s| <= r).
double annulus_error(const HorocycleConditional& c, double r, double r0, double phi_bound);

/// Radius actually used for a ball: r itself unless atoms within 1e-12 r of
/// the sphere |s| = r carry more than 1e-6 of the ball mass, in which case r
/// is multiplied by a seeded factor in [0.95, 1.05] until the sphere is clean.
double select_radius(const HorocycleConditional& c, double r, std::uint64_t seed);

/// Uniform double in [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng);

/// A frame with backward endpoint in the limit set (a random reduced word of
/// length `depth` applied to a fixed point), forward endpoint a uniformly
/// random direction at o landing outside every disk, and t = 0; then slid
/// along its N-orbit to the atom of nu_o with the smallest |s|, so that both
/// endpoints lie in the limit set.
GroupElement generic_frame(const SchottkyData& group, const AtomicBoundaryMeasure& nu_o,
                           std::mt19937_64& rng, int depth = 12);

/// sup over `times` of |M_1^t(phi)(F) - M_1^t(phi)(F')|, both conditionals
/// built from nu_o with the given resolution.
double equicontinuity_gap(const SchottkyData& group, const AtomicBoundaryMeasure& nu_o,
                          double delta, const GroupElement& f, const GroupElement& f_prime,
                          const std::vector<double>& times, const Observable& phi, int resolution);

} // namespace horolab
