#pragma once

// Quadratures of the Bowen-Margulis and Burger-Roblin measures in Hopf
// coordinates, conditional measures on horocycles, and flow boxes.
//
// Densities on G (o the base point, p the base point of (xi, eta, t)):
//   BM  exp(delta beta_xi(o,p) + delta beta_eta(o,p)) dnu_o(xi) dnu_o(eta) dt
//   BR  exp(delta beta_xi(o,p) + beta_eta(o,p))      dnu_o(xi) dlambda_o(eta) dt
// Both are restricted to frames whose base point lies in the fundamental
// domain, which represents the quotient measure.

#include "horolab/density.hpp"
#include "horolab/hypgeom.hpp"
#include "horolab/parallel.hpp"
#include "horolab/schottky.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace horolab {

enum class MeasureKind { BM, BR };

std::string to_string(MeasureKind kind);

struct QuadAtom {
    HopfCoord hopf;
    double weight = 0.0;
    std::uint32_t xi_index = 0;  ///< index into the backward boundary measure
    std::uint32_t eta_index = 0; ///< index into the forward boundary measure
    std::int32_t t_index = 0;    ///< t = t_min + (t_index + 1/2) t_step
};

struct QuadratureMeasure {
    std::vector<QuadAtom> atoms;
    MeasureKind kind = MeasureKind::BM;
    double t_min = 0.0;
    double t_max = 0.0;
    double t_step = 0.0;
    double delta = 0.0;
    std::string provenance;

    double total_mass() const;
    double grid_time(std::int32_t t_index) const { return t_min + (t_index + 0.5) * t_step; }
};

struct TimeWindow {
    double t_min = -4.0;
    double t_max = 4.0;
    double t_step = 0.05;
};

/// Open interval of times t for which the base point of (xi, eta, t) lies
/// outside every disk. Empty when both endpoints sit in the same disk.
std::optional<std::pair<double, double>> domain_time_range(const SchottkyData& group,
                                                           const BoundaryPoint& xi,
                                                           const BoundaryPoint& eta);

/// nu_o must be based at o. Pairs with xi == eta are skipped.
QuadratureMeasure bm_quadrature(const SchottkyData& group, const AtomicBoundaryMeasure& nu_o,
                                double delta, const TimeWindow& window);

QuadratureMeasure br_quadrature(const SchottkyData& group, const AtomicBoundaryMeasure& nu_o,
                                const AtomicBoundaryMeasure& lambda_o, double delta,
                                const TimeWindow& window);

/// sum over atoms of weight * f(atom), fixed-tree summation.
template <class F>
double integrate(const QuadratureMeasure& q, F&& f) {
    return parallel_sum(q.atoms.size(),
                        [&](std::size_t i) { return q.atoms[i].weight * f(q.atoms[i]); });
}

/// Columns xi_minus, xi_plus, t, weight, kind.
void write_csv(std::ostream& os, const QuadratureMeasure& q);

// ---------------------------------------------------------------------------
// Conditional measures on N-orbits.

enum class Weighting { PattersonSullivan, Lebesgue };

std::string to_string(Weighting w);

struct HorocycleAtom {
    double s = 0.0;
    double weight = 0.0;
};

/// A measure on {F n_s : |s| <= radius}, atoms sorted by s.
struct HorocycleConditional {
    GroupElement frame;
    std::vector<HorocycleAtom> atoms;
    double radius = 0.0;
    Weighting weighting = Weighting::PattersonSullivan;
    double exponent = 0.0; ///< conformal exponent: delta for PS, 1 for Lebesgue

    /// Mass of {|s| <= r}.
    double mass(double r) const;
    /// Mass of {lo <= |s| <= hi}.
    double shell_mass(double lo, double hi) const;
};

/// PS conditional on the horocycle through F. With resolution > 0 the atoms
/// of nu_o whose forward parameter s = 1 / F^{-1}(eta) lies in the window are
/// binned to the nearest of `resolution` equally spaced points of
/// [-radius, radius]; with resolution == 0 every atom keeps its own s. The
/// weight at s is exp(delta beta_{eta_s}(o, p_s)) times the binned nu_o mass,
/// eta_s and p_s being the forward endpoint and base point of F n_s.
/// Throws EmptySupport when no atom falls in the window.
HorocycleConditional bm_conditional(const GroupElement& frame, const AtomicBoundaryMeasure& nu_o,
                                    double delta, double radius, int resolution);

/// dn on [-radius, radius]: midpoints of `resolution` cells, weight = cell length.
HorocycleConditional lebesgue_conditional(const GroupElement& frame, double radius,
                                          int resolution);

/// Image of a conditional at F under the geodesic flow: the conditional at
/// F a_u with s -> s e^u and weights scaled by e^{exponent u}.
HorocycleConditional pushforward(const HorocycleConditional& c, double u);

/// Forward parameter of eta on the horocycle through F (eta = F n_s (inf)).
/// Returns +inf for eta == F(0).
double horocycle_parameter(const GroupElement& frame, const BoundaryPoint& eta);

// ---------------------------------------------------------------------------
// Flow boxes.

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const { return lo < x && x < hi; }
    double length() const { return hi - lo; }
    /// Distance from x to the nearest endpoint.
    double edge_distance(double x) const;
};

/// Product box I- x J x [t] in Hopf coordinates. Plaques are the slices
/// {xi_minus, t fixed}; the transversal is {xi_plus = xi_plus0} and is cut
/// into cells_xi x cells_t cells.
struct FlowBox {
    Interval xi_minus;
    Interval xi_plus;
    Interval t;
    double xi_plus0 = 0.0;
    double r0 = 1.0;
    int cells_xi = 2;
    int cells_t = 2;

    std::size_t cell_count() const {
        return static_cast<std::size_t>(cells_xi) * static_cast<std::size_t>(cells_t);
    }
    bool contains(const HopfCoord& h) const;
    /// Cell of the plaque through h; requires contains(h).
    std::size_t cell(const HopfCoord& h) const;
    /// Smallest coordinate distance from h to a face of the box.
    double face_distance(const HopfCoord& h) const;
};

/// Throws InvalidInput unless the box has finite, ordered intervals, xi_plus0
/// inside J, positive r0 and cell counts, and all sampled frames of the box
/// lie in the fundamental domain.
void validate_box(const SchottkyData& group, const FlowBox& box);

/// Mass of Q inside the box and inside its boundary shell of width 1e-3 r0.
struct BoxMass {
    double interior = 0.0;
    double shell = 0.0;
};
BoxMass box_mass(const FlowBox& box, const QuadratureMeasure& q);

/// Transverse measure of each cell: plaque masses divided by the leaf mass of
/// the plaque (the PS conditional mass of J for BM, its exact Lebesgue length
/// for BR). `nu_o` must be the forward measure the BM quadrature was built
/// from; it is ignored for BR. Throws LeakyBox when more than 1% of the box
/// mass lies in the boundary shell or cannot be assigned to a plaque.
std::vector<double> transverse_decompose(const FlowBox& box, const QuadratureMeasure& q,
                                         const AtomicBoundaryMeasure& nu_o);

/// The box with J replaced by its image under sliding every plaque along N by
/// s0, measured at the transversal centre.
FlowBox slide_box(const FlowBox& box, double s0);

} // namespace horolab
