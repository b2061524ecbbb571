#pragma once

// Boundary measures: Poincare series, critical exponent estimation,
// finite-cutoff Patterson-Sullivan measures and the Lebesgue (visual) family.

#include "horolab/hypgeom.hpp"
#include "horolab/schottky.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace horolab {

struct BoundaryAtom {
    BoundaryPoint xi;
    double weight = 0.0;
    /// Identifies the atom's origin: the encoded group word for orbit atoms,
    /// the direction index for Lebesgue atoms, the cylinder index after coarsening.
    std::uint64_t source = 0;
};

struct AtomicBoundaryMeasure {
    std::vector<BoundaryAtom> atoms; ///< sorted by xi, infinity last
    HPoint basepoint;
    double exponent = 0.0;
    int cutoff = 0;

    double total_mass() const;
    /// Sorts atoms by boundary coordinate (ties by source).
    void sort_atoms();
};

/// Encodes a word as sum code_i * (2m)^i; unique for the lengths used here.
std::uint64_t encode_word(const Word& w, std::size_t rank);

/// sum over |gamma| <= k of exp(-s d(o, gamma o)).
double poincare_partial(const SchottkyData& group, double s, int k);

/// d(o, gamma o) for every word, grouped by word length 0..k (lexicographic
/// order inside each level).
std::vector<std::vector<double>> orbit_distances_by_level(const SchottkyData& group, int k);

struct DeltaEstimate {
    enum class Method { Counting, SeriesBisection };

    double value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    Method method = Method::SeriesBisection;
    double counting = 0.0;  ///< slope of log N(R) over the complete range
    double bisection = 0.0; ///< crossing of the deepest level ratio
};

/// Requires k >= 6. Throws InsufficientDepth when the two brackets are disjoint.
DeltaEstimate estimate_delta(const SchottkyData& group, int k);

/// Patterson-Sullivan approximation from the word sphere |gamma| = k: atoms at
/// ray_endpoint(x, gamma o) with weight exp(-delta d(x, gamma o)) / Z, where Z
/// is the same sum taken at o (so the measure based at o has mass one).
AtomicBoundaryMeasure build_ps_measure(const SchottkyData& group, const HPoint& x, double delta,
                                       int k);

/// |log(w_y / w_x) - delta * busemann(xi, x, y)| over the word sphere of
/// length k, xi being the atom position seen from x. Streams the sphere
/// without materializing either measure.
std::vector<double> ps_cocycle_deviations(const SchottkyData& group, const HPoint& x,
                                          const HPoint& y, double delta, int k);

/// exp(busemann(xi, x, y)) = d lambda_y / d lambda_x (xi).
double lebesgue_density(const HPoint& x, const HPoint& y, const BoundaryPoint& xi);

/// `resolution` equally spaced directions at x, weight 2 pi / resolution each.
AtomicBoundaryMeasure discretize_lebesgue(const HPoint& x, int resolution);

/// Sorted, disjoint cylinder intervals gamma_{w'}(D_l) of a fixed word depth.
class CylinderPartition {
public:
    CylinderPartition(const SchottkyData& group, int depth);

    std::size_t size() const { return lo_.size(); }
    double lower(std::size_t i) const { return lo_[i]; }
    double upper(std::size_t i) const { return hi_[i]; }
    const Word& word(std::size_t i) const { return words_[i]; }
    /// Index of the cylinder containing xi, or of the nearest one.
    std::size_t locate(const BoundaryPoint& xi) const;
    /// Masses of a measure per cylinder.
    std::vector<double> masses(const AtomicBoundaryMeasure& m) const;

private:
    std::vector<double> lo_, hi_;
    std::vector<Word> words_;
};

/// Aggregates atoms by depth-`depth` cylinder; each cylinder becomes one atom
/// placed at the weighted median of its atoms (an original atom position).
AtomicBoundaryMeasure coarsen(const AtomicBoundaryMeasure& m, const CylinderPartition& cylinders);

/// CSV: a "# basepoint_x=..,basepoint_y=..,exponent=..,cutoff=.." line, then
/// a "xi,weight" header, then one row per atom ("inf" for infinity).
void write_csv(std::ostream& os, const AtomicBoundaryMeasure& m);
AtomicBoundaryMeasure read_boundary_csv(std::istream& is);

} // namespace horolab
