#include "horolab/measures.hpp"

#include "horolab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace horolab {

std::string to_string(MeasureKind kind) { return kind == MeasureKind::BM ? "BM" : "BR"; }

std::string to_string(Weighting w) {
    return w == Weighting::PattersonSullivan ? "BM-conditional" : "Lebesgue";
}

double QuadratureMeasure::total_mass() const {
    std::vector<double> w(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) w[i] = atoms[i].weight;
    return pairwise_sum(w);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const Disk* disk_containing(const SchottkyData& group, const BoundaryPoint& xi) {
    for (const auto& g : group.generators()) {
        if (g.minus.contains(xi)) return &g.minus;
        if (g.plus.contains(xi)) return &g.plus;
    }
    return nullptr;
}

// Height at which the geodesic (0, inf) crosses G^{-1} of the disk's circle.
std::optional<double> crossing_time(const GroupElement& g_inv, const Disk& d) {
    const BoundaryPoint a = g_inv.apply(BoundaryPoint(d.center - d.radius));
    const BoundaryPoint b = g_inv.apply(BoundaryPoint(d.center + d.radius));
    if (a.is_infinite() || b.is_infinite()) return std::nullopt;
    const double prod = a.value() * b.value();
    if (!(prod < 0.0)) return std::nullopt;
    return 0.5 * std::log(-prod);
}

bool clear_of_walls(const SchottkyData& group, const HPoint& p) {
    for (const auto& g : group.generators()) {
        for (const Disk* d : {&g.minus, &g.plus}) {
            if (d->contains(p) || d->boundary_distance(p) < kBoundaryTolerance) return false;
        }
    }
    return true;
}

template <class Weight>
QuadratureMeasure build_quadrature(const SchottkyData& group, const AtomicBoundaryMeasure& back,
                                   const AtomicBoundaryMeasure& fwd, const TimeWindow& window,
                                   Weight&& weight) {
    if (!(window.t_step > 0.0) || !(window.t_max > window.t_min)) {
        throw InvalidInput("quadrature: need t_step > 0 and t_max > t_min");
    }
    if (back.basepoint.x != kBasePoint.x || back.basepoint.y != kBasePoint.y ||
        fwd.basepoint.x != kBasePoint.x || fwd.basepoint.y != kBasePoint.y) {
        throw InvalidInput("quadrature: boundary measures must be based at o");
    }
    const auto steps = static_cast<std::int32_t>(std::floor((window.t_max - window.t_min) / window.t_step));
    std::vector<std::vector<QuadAtom>> rows(back.atoms.size());
    parallel_for(back.atoms.size(), [&](std::size_t i) {
        const BoundaryAtom& xa = back.atoms[i];
        for (std::size_t j = 0; j < fwd.atoms.size(); ++j) {
            const BoundaryAtom& ea = fwd.atoms[j];
            if (xa.xi == ea.xi) continue;
            const auto range = domain_time_range(group, xa.xi, ea.xi);
            if (!range) continue;
            const GroupElement g = hopf_to_frame({xa.xi, ea.xi, 0.0});
            const double lo = std::max(range->first, window.t_min);
            const double hi = std::min(range->second, window.t_max);
            const auto first = std::max<std::int32_t>(
                0, static_cast<std::int32_t>(std::ceil((lo - window.t_min) / window.t_step - 0.5)));
            for (std::int32_t k = first; k < steps; ++k) {
                const double t = window.t_min + (k + 0.5) * window.t_step;
                if (t <= lo) continue;
                if (t >= hi) break;
                const HPoint p = geodesic_flow(g, t).base_point();
                if (!clear_of_walls(group, p)) continue;
                QuadAtom atom;
                atom.hopf = {xa.xi, ea.xi, t};
                atom.weight = xa.weight * ea.weight * window.t_step * weight(xa.xi, ea.xi, p);
                atom.xi_index = static_cast<std::uint32_t>(i);
                atom.eta_index = static_cast<std::uint32_t>(j);
                atom.t_index = k;
                rows[i].push_back(atom);
            }
        }
    });
    QuadratureMeasure q;
    for (auto& r : rows) q.atoms.insert(q.atoms.end(), r.begin(), r.end());
    q.t_min = window.t_min;
    q.t_max = window.t_min + steps * window.t_step;
    q.t_step = window.t_step;
    if (q.atoms.empty()) throw EmptySupport("quadrature has no atoms in the fundamental domain");
    return q;
}

} // namespace

std::optional<std::pair<double, double>> domain_time_range(const SchottkyData& group,
                                                           const BoundaryPoint& xi,
                                                           const BoundaryPoint& eta) {
    const Disk* dx = disk_containing(group, xi);
    const Disk* de = disk_containing(group, eta);
    if (dx && dx == de) return std::nullopt;
    const GroupElement g_inv = hopf_to_frame({xi, eta, 0.0}).inverse();
    double lo = -kInf, hi = kInf;
    if (dx) {
        const auto t = crossing_time(g_inv, *dx);
        if (!t) return std::nullopt;
        lo = *t;
    }
    if (de) {
        const auto t = crossing_time(g_inv, *de);
        if (!t) return std::nullopt;
        hi = *t;
    }
    if (!(lo < hi)) return std::nullopt;
    return std::pair{lo, hi};
}

QuadratureMeasure bm_quadrature(const SchottkyData& group, const AtomicBoundaryMeasure& nu_o,
                                double delta, const TimeWindow& window) {
    auto q = build_quadrature(group, nu_o, nu_o, window,
                              [delta](const BoundaryPoint& xi, const BoundaryPoint& eta, const HPoint& p) {
                                  return std::exp(delta * (busemann(xi, kBasePoint, p) +
                                                           busemann(eta, kBasePoint, p)));
                              });
    q.kind = MeasureKind::BM;
    q.delta = delta;
    std::ostringstream os;
    os << "BM sign=+ delta=" << delta << " nu_atoms=" << nu_o.atoms.size()
       << " nu_cutoff=" << nu_o.cutoff << " t_step=" << window.t_step;
    q.provenance = os.str();
    return q;
}

QuadratureMeasure br_quadrature(const SchottkyData& group, const AtomicBoundaryMeasure& nu_o,
                                const AtomicBoundaryMeasure& lambda_o, double delta,
                                const TimeWindow& window) {
    auto q = build_quadrature(group, nu_o, lambda_o, window,
                              [delta](const BoundaryPoint& xi, const BoundaryPoint& eta, const HPoint& p) {
                                  return std::exp(delta * busemann(xi, kBasePoint, p) +
                                                  busemann(eta, kBasePoint, p));
                              });
    q.kind = MeasureKind::BR;
    q.delta = delta;
    std::ostringstream os;
    os << "BR sign=+ delta=" << delta << " nu_atoms=" << nu_o.atoms.size()
       << " nu_cutoff=" << nu_o.cutoff << " lambda_resolution=" << lambda_o.atoms.size()
       << " t_step=" << window.t_step;
    q.provenance = os.str();
    return q;
}

void write_csv(std::ostream& os, const QuadratureMeasure& q) {
    os << std::setprecision(17) << "xi_minus,xi_plus,t,weight,kind\n";
    auto put = [&](const BoundaryPoint& b) {
        if (b.is_infinite()) os << "inf";
        else os << b.value();
    };
    for (const auto& a : q.atoms) {
        put(a.hopf.xi_minus);
        os << ',';
        put(a.hopf.xi_plus);
        os << ',' << a.hopf.t << ',' << a.weight << ',' << to_string(q.kind) << "\n";
    }
}

// ---------------------------------------------------------------------------

double horocycle_parameter(const GroupElement& frame, const BoundaryPoint& eta) {
    const BoundaryPoint u = frame.inverse().apply(eta);
    if (u.is_infinite()) return 0.0;
    if (u.value() == 0.0) return kInf;
    return 1.0 / u.value();
}

double HorocycleConditional::mass(double r) const {
    std::vector<double> w;
    for (const auto& a : atoms) {
        if (std::abs(a.s) <= r) w.push_back(a.weight);
    }
    return pairwise_sum(w);
}

double HorocycleConditional::shell_mass(double lo, double hi) const {
    std::vector<double> w;
    for (const auto& a : atoms) {
        const double s = std::abs(a.s);
        if (s >= lo && s <= hi) w.push_back(a.weight);
    }
    return pairwise_sum(w);
}

HorocycleConditional bm_conditional(const GroupElement& frame, const AtomicBoundaryMeasure& nu_o,
                                    double delta, double radius, int resolution) {
    if (!(radius > 0.0)) throw InvalidInput("bm_conditional: radius must be positive");
    if (resolution < 0 || resolution == 1) {
        throw InvalidInput("bm_conditional: resolution must be 0 or at least 2");
    }
    HorocycleConditional c;
    c.frame = frame;
    c.radius = radius;
    c.weighting = Weighting::PattersonSullivan;
    c.exponent = delta;

    auto density = [&](double s, const BoundaryPoint& eta) {
        const HPoint p = horocycle_step(frame, s).base_point();
        return std::exp(delta * busemann(eta, kBasePoint, p));
    };

    if (resolution == 0) {
        for (const auto& a : nu_o.atoms) {
            const double s = horocycle_parameter(frame, a.xi);
            if (!(std::abs(s) <= radius)) continue;
            c.atoms.push_back({s, a.weight * density(s, a.xi)});
        }
        std::sort(c.atoms.begin(), c.atoms.end(),
                  [](const HorocycleAtom& l, const HorocycleAtom& r) { return l.s < r.s; });
    } else {
        const double step = 2.0 * radius / (resolution - 1);
        std::map<int, std::vector<double>> bins;
        for (const auto& a : nu_o.atoms) {
            const double s = horocycle_parameter(frame, a.xi);
            if (!(std::abs(s) <= radius)) continue;
            const int j = std::clamp(static_cast<int>(std::lround((s + radius) / step)), 0, resolution - 1);
            bins[j].push_back(a.weight);
        }
        for (const auto& [j, w] : bins) {
            const double s = -radius + j * step;
            const BoundaryPoint eta = horocycle_step(frame, s).apply(BoundaryPoint::infinity());
            c.atoms.push_back({s, pairwise_sum(w) * density(s, eta)});
        }
    }
    if (c.atoms.empty()) {
        throw EmptySupport("no Patterson-Sullivan atoms on the horocycle window");
    }
    return c;
}

HorocycleConditional lebesgue_conditional(const GroupElement& frame, double radius, int resolution) {
    if (!(radius > 0.0)) throw InvalidInput("lebesgue_conditional: radius must be positive");
    if (resolution < 1) throw InvalidInput("lebesgue_conditional: resolution must be positive");
    HorocycleConditional c;
    c.frame = frame;
    c.radius = radius;
    c.weighting = Weighting::Lebesgue;
    c.exponent = 1.0;
    const double h = 2.0 * radius / resolution;
    c.atoms.reserve(static_cast<std::size_t>(resolution));
    for (int j = 0; j < resolution; ++j) c.atoms.push_back({-radius + (j + 0.5) * h, h});
    return c;
}

HorocycleConditional pushforward(const HorocycleConditional& c, double u) {
    HorocycleConditional out = c;
    out.frame = geodesic_flow(c.frame, u);
    out.radius = c.radius * std::exp(u);
    const double stretch = std::exp(u);
    const double scale = std::exp(c.exponent * u);
    for (auto& a : out.atoms) {
        a.s *= stretch;
        a.weight *= scale;
    }
    return out;
}

// ---------------------------------------------------------------------------

double Interval::edge_distance(double x) const { return std::min(std::abs(x - lo), std::abs(x - hi)); }

bool FlowBox::contains(const HopfCoord& h) const {
    if (h.xi_minus.is_infinite() || h.xi_plus.is_infinite()) return false;
    return xi_minus.contains(h.xi_minus.value()) && xi_plus.contains(h.xi_plus.value()) &&
           t.contains(h.t);
}

std::size_t FlowBox::cell(const HopfCoord& h) const {
    auto index = [](const Interval& iv, double x, int n) {
        const int i = static_cast<int>(std::floor((x - iv.lo) / iv.length() * n));
        return static_cast<std::size_t>(std::clamp(i, 0, n - 1));
    };
    return index(xi_minus, h.xi_minus.value(), cells_xi) * static_cast<std::size_t>(cells_t) +
           index(t, h.t, cells_t);
}

double FlowBox::face_distance(const HopfCoord& h) const {
    if (h.xi_minus.is_infinite() || h.xi_plus.is_infinite()) return kInf;
    return std::min({xi_minus.edge_distance(h.xi_minus.value()),
                     xi_plus.edge_distance(h.xi_plus.value()), t.edge_distance(h.t)});
}

void validate_box(const SchottkyData& group, const FlowBox& box) {
    for (const Interval* iv : {&box.xi_minus, &box.xi_plus, &box.t}) {
        if (!std::isfinite(iv->lo) || !std::isfinite(iv->hi) || !(iv->lo < iv->hi)) {
            throw InvalidInput("flow box: intervals must be finite and ordered");
        }
    }
    if (!box.xi_plus.contains(box.xi_plus0)) throw InvalidInput("flow box: xi_plus0 must lie in J");
    if (!(box.r0 > 0.0)) throw InvalidInput("flow box: r0 must be positive");
    if (box.cells_xi < 1 || box.cells_t < 1) throw InvalidInput("flow box: cell counts must be positive");
    if (box.xi_minus.hi > box.xi_plus.lo && box.xi_plus.hi > box.xi_minus.lo) {
        throw InvalidInput("flow box: the xi_minus and xi_plus intervals overlap");
    }
    constexpr int n = 7;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                auto at = [](const Interval& iv, int q) { return iv.lo + iv.length() * q / (n - 1.0); };
                const HopfCoord h{BoundaryPoint(at(box.xi_minus, i)), BoundaryPoint(at(box.xi_plus, j)),
                                  at(box.t, k)};
                if (!group.in_domain(hopf_to_frame(h).base_point())) {
                    throw InvalidInput("flow box leaves the fundamental domain");
                }
            }
        }
    }
}

BoxMass box_mass(const FlowBox& box, const QuadratureMeasure& q) {
    const double eps = 1e-3 * box.r0;
    auto widen = [](const Interval& iv, double e) { return Interval{iv.lo - e, iv.hi + e}; };
    FlowBox outer = box, inner = box;
    outer.xi_minus = widen(box.xi_minus, eps);
    outer.xi_plus = widen(box.xi_plus, eps);
    outer.t = widen(box.t, eps);
    inner.xi_minus = widen(box.xi_minus, -eps);
    inner.xi_plus = widen(box.xi_plus, -eps);
    inner.t = widen(box.t, -eps);
    BoxMass m;
    m.interior = integrate(q, [&](const QuadAtom& a) { return box.contains(a.hopf) ? 1.0 : 0.0; });
    m.shell = integrate(q, [&](const QuadAtom& a) {
        return outer.contains(a.hopf) && !inner.contains(a.hopf) ? 1.0 : 0.0;
    });
    return m;
}

std::vector<double> transverse_decompose(const FlowBox& box, const QuadratureMeasure& q,
                                         const AtomicBoundaryMeasure& nu_o) {
    const BoxMass bm = box_mass(box, q);
    if (!(bm.interior > 0.0)) return {};
    if (bm.shell > 0.01 * bm.interior) {
        throw LeakyBox("more than 1% of the box mass lies within 1e-3 r0 of its boundary");
    }

    struct Plaque {
        std::vector<double> weights;
        HopfCoord hopf;
    };
    std::map<std::pair<std::uint32_t, std::int32_t>, Plaque> plaques;
    for (const auto& a : q.atoms) {
        if (!box.contains(a.hopf)) continue;
        auto& p = plaques[{a.xi_index, a.t_index}];
        p.weights.push_back(a.weight);
        p.hopf = a.hopf;
    }

    // Forward atoms of nu_o inside J, for the BM leaf mass.
    auto first = std::lower_bound(nu_o.atoms.begin(), nu_o.atoms.end(), box.xi_plus.lo,
                                  [](const BoundaryAtom& a, double x) { return a.xi < BoundaryPoint(x); });
    std::vector<const BoundaryAtom*> in_j;
    for (auto it = first; it != nu_o.atoms.end() && !it->xi.is_infinite(); ++it) {
        if (!box.xi_plus.contains(it->xi.value())) break;
        in_j.push_back(&*it);
    }

    std::vector<double> unassigned;
    std::vector<std::vector<double>> per_cell(box.cell_count());
    for (const auto& [key, p] : plaques) {
        const double plaque_mass = pairwise_sum(p.weights);
        double leaf = 0.0;
        if (q.kind == MeasureKind::BM) {
            std::vector<double> terms;
            for (const auto* a : in_j) {
                const HPoint x = hopf_to_frame({p.hopf.xi_minus, a->xi, p.hopf.t}).base_point();
                terms.push_back(a->weight * std::exp(q.delta * busemann(a->xi, kBasePoint, x)));
            }
            leaf = pairwise_sum(terms);
        } else {
            const GroupElement f = hopf_to_frame({p.hopf.xi_minus, BoundaryPoint(box.xi_plus0), p.hopf.t});
            leaf = 2.0 * std::abs(horocycle_parameter(f, BoundaryPoint(box.xi_plus.hi)) -
                                  horocycle_parameter(f, BoundaryPoint(box.xi_plus.lo)));
        }
        if (!(leaf > 0.0) || !std::isfinite(leaf)) {
            unassigned.push_back(plaque_mass);
            continue;
        }
        per_cell[box.cell(p.hopf)].push_back(plaque_mass / leaf);
    }
    if (pairwise_sum(unassigned) > 0.01 * bm.interior) {
        throw LeakyBox("more than 1% of the box mass could not be assigned to a plaque");
    }
    std::vector<double> cells(box.cell_count());
    for (std::size_t c = 0; c < cells.size(); ++c) cells[c] = pairwise_sum(per_cell[c]);
    return cells;
}

FlowBox slide_box(const FlowBox& box, double s0) {
    const double xc = 0.5 * (box.xi_minus.lo + box.xi_minus.hi);
    const double tc = 0.5 * (box.t.lo + box.t.hi);
    const GroupElement f = hopf_to_frame({BoundaryPoint(xc), BoundaryPoint(box.xi_plus0), tc});
    auto slide = [&](double eta) {
        const double s = horocycle_parameter(f, BoundaryPoint(eta));
        const BoundaryPoint moved = horocycle_step(f, s + s0).apply(BoundaryPoint::infinity());
        if (moved.is_infinite()) throw InvalidInput("slide_box: plaque slid through infinity");
        return moved.value();
    };
    FlowBox out = box;
    const double a = slide(box.xi_plus.lo), b = slide(box.xi_plus.hi);
    out.xi_plus = {std::min(a, b), std::max(a, b)};
    out.xi_plus0 = slide(box.xi_plus0);
    return out;
}

} // namespace horolab
