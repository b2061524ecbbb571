#pragma once

// Exact geometry of the upper half-plane model: distances, the PSL(2,R)
// action, Busemann functions, Hopf coordinates and the A / N flows.
//
// Conventions:
//   o = (0,1); the identity frame is the unit vector at o pointing to infinity.
//   a_t = diag(e^{t/2}, e^{-t/2}) acts on the right (geodesic flow).
//   n_s = [[1,0],[s,1]] acts on the right; a_t n_s a_{-t} = n_{s e^{-t}}, so
//   N-orbits are strong unstable leaves.
//   Hopf coordinates of F are (F(0), F(inf), busemann(F(0), F o, o)).

#include <iosfwd>

namespace horolab {

/// A point of the boundary circle R u {inf}.
class BoundaryPoint {
public:
    constexpr BoundaryPoint() = default;
    constexpr explicit BoundaryPoint(double x) : x_(x) {}

    static constexpr BoundaryPoint infinity() {
        BoundaryPoint p;
        p.infinite_ = true;
        return p;
    }

    constexpr bool is_infinite() const { return infinite_; }
    /// Finite coordinate. Meaningless for the point at infinity.
    constexpr double value() const { return x_; }

    friend constexpr bool operator==(const BoundaryPoint& a, const BoundaryPoint& b) {
        if (a.infinite_ || b.infinite_) return a.infinite_ && b.infinite_;
        return a.x_ == b.x_;
    }

    /// Strict order with infinity last.
    friend constexpr bool operator<(const BoundaryPoint& a, const BoundaryPoint& b) {
        if (a.infinite_) return false;
        if (b.infinite_) return true;
        return a.x_ < b.x_;
    }

private:
    double x_ = 0.0;
    bool infinite_ = false;
};

/// Distance on the circle R u {inf}; any finite point is at distance +inf from inf.
double boundary_gap(const BoundaryPoint& a, const BoundaryPoint& b);

/// A point of the upper half-plane; y > 0.
struct HPoint {
    double x = 0.0;
    double y = 1.0;

    HPoint() = default;
    HPoint(double x_, double y_);
};

inline const HPoint kBasePoint{0.0, 1.0};

/// Element of PSL(2,R). Every construction renormalizes to determinant one
/// and fixes the projective sign (first nonzero entry of a,b,c,d positive).
class GroupElement {
public:
    GroupElement() = default;
    /// Throws InvalidInput unless ad - bc > 0.
    GroupElement(double a, double b, double c, double d);

    static GroupElement identity() { return {}; }
    /// a_t = diag(e^{t/2}, e^{-t/2}).
    static GroupElement geodesic(double t);
    /// n_s = [[1,0],[s,1]].
    static GroupElement horocycle(double s);
    /// Stable horocycle [[1,s],[0,1]].
    static GroupElement stable_horocycle(double s);
    /// Rotation by pi about o, which flips the identity frame.
    static GroupElement flip();

    double a() const { return a_; }
    double b() const { return b_; }
    double c() const { return c_; }
    double d() const { return d_; }

    GroupElement inverse() const;
    double trace() const { return a_ + d_; }

    HPoint apply(const HPoint& z) const;
    BoundaryPoint apply(const BoundaryPoint& xi) const;

    /// Base point F o.
    HPoint base_point() const { return apply(kBasePoint); }

    friend GroupElement operator*(const GroupElement& lhs, const GroupElement& rhs);

    /// Largest entrywise difference, minimized over the projective sign.
    friend double max_entry_gap(const GroupElement& lhs, const GroupElement& rhs);

    /// |ad - bc - 1| relative to the entry scale max(1, |ad| + |bc|).
    double determinant_defect() const;

private:
    struct Unimodular {};
    // Entries already of determinant one up to rounding; only the sign is fixed.
    GroupElement(double a, double b, double c, double d, Unimodular);
    void canonicalize_sign();

    double a_ = 1.0, b_ = 0.0, c_ = 0.0, d_ = 1.0;
};

std::ostream& operator<<(std::ostream& os, const GroupElement& g);

/// Left-invariant distance proxy on G: Frobenius norm of F^{-1}G - I,
/// minimized over the projective sign.
double frame_distance(const GroupElement& f, const GroupElement& g);

struct HopfCoord {
    BoundaryPoint xi_minus;
    BoundaryPoint xi_plus;
    double t = 0.0;
};

double dist(const HPoint& p, const HPoint& q);

inline HPoint mobius_apply(const GroupElement& g, const HPoint& z) { return g.apply(z); }
inline BoundaryPoint mobius_apply(const GroupElement& g, const BoundaryPoint& xi) {
    return g.apply(xi);
}

/// Log of the Poisson kernel P(z, xi) = y / ((x - xi)^2 + y^2), P(z, inf) = y.
double log_poisson(const HPoint& z, const BoundaryPoint& xi);

/// beta_xi(p, q) = lim_{z -> xi} d(p,z) - d(q,z), via the Poisson kernel.
double busemann(const BoundaryPoint& xi, const HPoint& p, const HPoint& q);

HopfCoord frame_to_hopf(const GroupElement& frame);
/// Throws InvalidInput when xi_minus == xi_plus.
GroupElement hopf_to_frame(const HopfCoord& h);

/// Action of an isometry in Hopf coordinates: endpoints move by the boundary
/// action and t shifts by busemann(xi_minus, o, gamma^{-1} o).
HopfCoord isometry_on_hopf(const GroupElement& gamma, const HopfCoord& h);

/// F a_t.
GroupElement geodesic_flow(const GroupElement& frame, double t);
/// F n_s.
GroupElement horocycle_step(const GroupElement& frame, double s);

/// Forward endpoint of the geodesic ray from x through q (q != x).
BoundaryPoint ray_endpoint(const HPoint& x, const HPoint& q);

/// A frame based at x (no rotation chosen beyond the upper-triangular one).
GroupElement frame_at(const HPoint& x);

/// Boundary point seen from o in direction angle theta (theta = 0 points to inf).
BoundaryPoint direction_from_o(double theta);

} // namespace horolab
