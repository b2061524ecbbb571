#include "horolab/hypgeom.hpp"

#include "horolab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace horolab {

double boundary_gap(const BoundaryPoint& a, const BoundaryPoint& b) {
    if (a.is_infinite() && b.is_infinite()) return 0.0;
    if (a.is_infinite() || b.is_infinite()) return std::numeric_limits<double>::infinity();
    return std::abs(a.value() - b.value());
}

HPoint::HPoint(double x_, double y_) : x(x_), y(y_) {
    if (!(y_ > 0.0) || !std::isfinite(x_) || !std::isfinite(y_)) {
        throw InvalidInput("HPoint requires finite x and y > 0");
    }
}

GroupElement::GroupElement(double a, double b, double c, double d) {
    const double det = a * d - b * c;
    if (!(det > 0.0) || !std::isfinite(det)) {
        throw InvalidInput("GroupElement requires a positive, finite determinant");
    }
    const double s = 1.0 / std::sqrt(det);
    a_ = a * s;
    b_ = b * s;
    c_ = c * s;
    d_ = d * s;
    canonicalize_sign();
}

GroupElement::GroupElement(double a, double b, double c, double d, Unimodular)
    : a_(a), b_(b), c_(c), d_(d) {
    canonicalize_sign();
}

void GroupElement::canonicalize_sign() {
    const double lead = a_ != 0.0 ? a_ : (b_ != 0.0 ? b_ : (c_ != 0.0 ? c_ : d_));
    if (lead < 0.0) {
        a_ = -a_;
        b_ = -b_;
        c_ = -c_;
        d_ = -d_;
    }
}

double GroupElement::determinant_defect() const {
    const double scale = std::max(1.0, std::abs(a_ * d_) + std::abs(b_ * c_));
    return std::abs(a_ * d_ - b_ * c_ - 1.0) / scale;
}

GroupElement GroupElement::geodesic(double t) {
    return {std::exp(0.5 * t), 0.0, 0.0, std::exp(-0.5 * t)};
}

GroupElement GroupElement::horocycle(double s) { return {1.0, 0.0, s, 1.0}; }

GroupElement GroupElement::stable_horocycle(double s) { return {1.0, s, 0.0, 1.0}; }

GroupElement GroupElement::flip() { return {0.0, -1.0, 1.0, 0.0}; }

GroupElement GroupElement::inverse() const { return {d_, -b_, -c_, a_, Unimodular{}}; }

HPoint GroupElement::apply(const HPoint& z) const {
    // (az+b)/(cz+d) with det = 1: Im = y / |cz+d|^2.
    const double den_re = c_ * z.x + d_;
    const double den_im = c_ * z.y;
    const double n2 = den_re * den_re + den_im * den_im;
    const double num_re = a_ * z.x + b_;
    const double num_im = a_ * z.y;
    HPoint w;
    w.x = (num_re * den_re + num_im * den_im) / n2;
    w.y = z.y / n2;
    return w;
}

BoundaryPoint GroupElement::apply(const BoundaryPoint& xi) const {
    if (xi.is_infinite()) {
        if (c_ == 0.0) return BoundaryPoint::infinity();
        return BoundaryPoint(a_ / c_);
    }
    const double den = c_ * xi.value() + d_;
    if (den == 0.0) return BoundaryPoint::infinity();
    return BoundaryPoint((a_ * xi.value() + b_) / den);
}

GroupElement operator*(const GroupElement& l, const GroupElement& r) {
    // A product of unimodular matrices is unimodular; recomputing ad - bc
    // for entries of size 1e10 would only inject cancellation error.
    return {l.a_ * r.a_ + l.b_ * r.c_, l.a_ * r.b_ + l.b_ * r.d_,
            l.c_ * r.a_ + l.d_ * r.c_, l.c_ * r.b_ + l.d_ * r.d_, GroupElement::Unimodular{}};
}

double max_entry_gap(const GroupElement& l, const GroupElement& r) {
    const double same = std::max({std::abs(l.a_ - r.a_), std::abs(l.b_ - r.b_),
                                  std::abs(l.c_ - r.c_), std::abs(l.d_ - r.d_)});
    const double flipped = std::max({std::abs(l.a_ + r.a_), std::abs(l.b_ + r.b_),
                                     std::abs(l.c_ + r.c_), std::abs(l.d_ + r.d_)});
    return std::min(same, flipped);
}

std::ostream& operator<<(std::ostream& os, const GroupElement& g) {
    return os << "[[" << g.a() << ", " << g.b() << "], [" << g.c() << ", " << g.d() << "]]";
}

double frame_distance(const GroupElement& f, const GroupElement& g) {
    const GroupElement h = f.inverse() * g;
    auto frob = [](double a, double b, double c, double d) {
        return std::sqrt(a * a + b * b + c * c + d * d);
    };
    return std::min(frob(h.a() - 1.0, h.b(), h.c(), h.d() - 1.0),
                    frob(h.a() + 1.0, h.b(), h.c(), h.d() + 1.0));
}

double dist(const HPoint& p, const HPoint& q) {
    // 2 asinh(|p-q| / (2 sqrt(p.y q.y))) equals arcosh(1 + |p-q|^2/(2 p.y q.y))
    // and keeps full relative accuracy for nearby points.
    const double e = std::hypot(p.x - q.x, p.y - q.y);
    return 2.0 * std::asinh(e / (2.0 * std::sqrt(p.y * q.y)));
}

double log_poisson(const HPoint& z, const BoundaryPoint& xi) {
    if (xi.is_infinite()) return std::log(z.y);
    const double dx = z.x - xi.value();
    return std::log(z.y) - std::log(dx * dx + z.y * z.y);
}

double busemann(const BoundaryPoint& xi, const HPoint& p, const HPoint& q) {
    return log_poisson(q, xi) - log_poisson(p, xi);
}

HopfCoord frame_to_hopf(const GroupElement& frame) {
    HopfCoord h;
    h.xi_minus = frame.apply(BoundaryPoint(0.0));
    h.xi_plus = frame.apply(BoundaryPoint::infinity());
    h.t = busemann(h.xi_minus, frame.base_point(), kBasePoint);
    return h;
}

GroupElement hopf_to_frame(const HopfCoord& h) {
    if (h.xi_minus == h.xi_plus) {
        throw InvalidInput("hopf_to_frame: xi_minus equals xi_plus");
    }
    // Columns are homogeneous coordinates of xi_plus (image of inf) and
    // xi_minus (image of 0).
    auto column = [](const BoundaryPoint& p) {
        return p.is_infinite() ? std::pair<double, double>{1.0, 0.0}
                               : std::pair<double, double>{p.value(), 1.0};
    };
    auto [u0, u1] = column(h.xi_plus);
    auto [w0, w1] = column(h.xi_minus);
    double det = u0 * w1 - w0 * u1;
    if (det < 0.0) {
        w0 = -w0;
        w1 = -w1;
        det = -det;
    }
    const GroupElement g0(u0, w0, u1, w1);
    const double t0 = busemann(h.xi_minus, g0.base_point(), kBasePoint);
    return g0 * GroupElement::geodesic(h.t - t0);
}

HopfCoord isometry_on_hopf(const GroupElement& gamma, const HopfCoord& h) {
    HopfCoord out;
    out.xi_minus = gamma.apply(h.xi_minus);
    out.xi_plus = gamma.apply(h.xi_plus);
    out.t = h.t + busemann(h.xi_minus, kBasePoint, gamma.inverse().base_point());
    return out;
}

GroupElement geodesic_flow(const GroupElement& frame, double t) {
    return frame * GroupElement::geodesic(t);
}

GroupElement horocycle_step(const GroupElement& frame, double s) {
    return frame * GroupElement::horocycle(s);
}

GroupElement frame_at(const HPoint& x) {
    const double r = std::sqrt(x.y);
    return {r, x.x / r, 0.0, 1.0 / r};
}

namespace {

// Boundary point i(1+z)/(1-z) for a unit vector z = (ux, uy) of the disk model.
BoundaryPoint from_disk_direction(double ux, double uy) {
    if (ux > 0.0) {
        if (uy == 0.0) return BoundaryPoint::infinity();
        return BoundaryPoint(-(1.0 + ux) / uy);
    }
    return BoundaryPoint(-uy / (1.0 - ux));
}

} // namespace

BoundaryPoint direction_from_o(double theta) {
    return from_disk_direction(std::cos(theta), std::sin(theta));
}

BoundaryPoint ray_endpoint(const HPoint& x, const HPoint& q) {
    const GroupElement g = frame_at(x);
    const HPoint w = g.inverse().apply(q);
    // Cayley transform (w - i)/(w + i) sends o to the disk center.
    const double den = w.x * w.x + (w.y + 1.0) * (w.y + 1.0);
    const double ux = (w.x * w.x + w.y * w.y - 1.0) / den;
    const double uy = -2.0 * w.x / den;
    const double n = std::hypot(ux, uy);
    if (n == 0.0) throw InvalidInput("ray_endpoint: q coincides with x");
    return g.apply(from_disk_direction(ux / n, uy / n));
}

} // namespace horolab
