#include "horolab/dynamics.hpp"

#include "horolab/errors.hpp"
#include "horolab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace horolab {

double bump(double u) {
    if (!(std::abs(u) < 1.0)) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

double TestFunction::operator()(const HopfCoord& h) const {
    if (h.xi_minus.is_infinite() || h.xi_plus.is_infinite()) return 0.0;
    const double a = bump((h.xi_minus.value() - center.xi_minus.value()) / w_minus);
    if (a == 0.0) return 0.0;
    const double b = bump((h.xi_plus.value() - center.xi_plus.value()) / w_plus);
    if (b == 0.0) return 0.0;
    return height * a * b * bump((h.t - center.t) / w_t);
}

Observable TestFunction::observable() const {
    return [f = *this](const HopfCoord& h) { return f(h); };
}

Observable constant_observable(double c) {
    return [c](const HopfCoord&) { return c; };
}

void validate_support(const SchottkyData& group, const TestFunction& f, double margin) {
    if (f.center.xi_minus.is_infinite() || f.center.xi_plus.is_infinite() ||
        !std::isfinite(f.center.t)) {
        throw InvalidInput("test function " + f.id + ": centre must be finite");
    }
    if (!(f.w_minus > 0.0) || !(f.w_plus > 0.0) || !(f.w_t > 0.0)) {
        throw InvalidInput("test function " + f.id + ": widths must be positive");
    }
    constexpr int n = 9;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                auto at = [](double c, double w, int q) { return c + w * (2.0 * q / (n - 1.0) - 1.0); };
                const HopfCoord h{BoundaryPoint(at(f.center.xi_minus.value(), f.w_minus, i)),
                                  BoundaryPoint(at(f.center.xi_plus.value(), f.w_plus, j)),
                                  at(f.center.t, f.w_t, k)};
                if (h.xi_minus == h.xi_plus) {
                    throw InvalidInput("test function " + f.id + ": support meets the diagonal");
                }
                const HPoint p = hopf_to_frame(h).base_point();
                if (!group.in_domain(p)) {
                    throw InvalidInput("test function " + f.id + ": support leaves the fundamental domain");
                }
                for (const auto& g : group.generators()) {
                    for (const Disk* d : {&g.minus, &g.plus}) {
                        // Hyperbolic distance from p to the wall geodesic.
                        const double num = (p.x - d->center) * (p.x - d->center) + p.y * p.y -
                                           d->radius * d->radius;
                        if (std::asinh(num / (2.0 * d->radius * p.y)) < margin) {
                            throw InvalidInput("test function " + f.id + ": support too close to a wall");
                        }
                    }
                }
            }
        }
    }
}

std::vector<TestFunction> test_suite(const SchottkyData& group, std::size_t count, double margin) {
    std::vector<Disk> disks;
    for (const auto& g : group.generators()) {
        disks.push_back(g.minus);
        disks.push_back(g.plus);
    }
    // Pairs ordered by the gap between their indices, so the first few mix
    // generators and orientations.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t gap = 1; gap < disks.size(); ++gap) {
        for (std::size_t a = 0; a < disks.size(); ++a) pairs.emplace_back(a, (a + gap) % disks.size());
    }
    std::vector<TestFunction> out;
    for (const auto& [a, b] : pairs) {
        if (out.size() >= count) break;
        TestFunction f;
        f.id = "phi_" + std::to_string(a) + std::to_string(b);
        f.w_minus = 1.25 * disks[a].radius;
        f.w_plus = 1.25 * disks[b].radius;
        f.w_t = 0.5;
        f.center = {BoundaryPoint(disks[a].center), BoundaryPoint(disks[b].center), 0.0};
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int i = -80; i <= 80; ++i) {
            f.center.t = 0.05 * i;
            try {
                validate_support(group, f, margin);
                lo = std::min(lo, f.center.t);
                hi = std::max(hi, f.center.t);
            } catch (const InvalidInput&) {
            }
        }
        if (!(lo <= hi)) continue;
        f.center.t = 0.5 * (lo + hi);
        f.w_t = 0.5 + 0.45 * (hi - lo);
        try {
            validate_support(group, f, margin);
        } catch (const InvalidInput&) {
            f.w_t = 0.5;
            validate_support(group, f, margin);
        }
        out.push_back(f);
    }
    return out;
}

HopfCoord reduced_hopf(const SchottkyData& group, const GroupElement& frame) {
    GroupElement f = frame;
    for (int attempt = 0;; ++attempt) {
        try {
            return frame_to_hopf(reduce_to_domain(group, f).frame);
        } catch (const AmbiguousBoundary&) {
            if (attempt == 3) throw;
            f = horocycle_step(f, 1e-7);
        }
    }
}

namespace {

struct Selected {
    std::vector<double> s;
    std::vector<double> w;
};

Selected select_ball(const HorocycleConditional& c, double r) {
    Selected out;
    for (const auto& a : c.atoms) {
        if (std::abs(a.s) <= r) {
            out.s.push_back(a.s);
            out.w.push_back(a.weight);
        }
    }
    return out;
}

} // namespace

std::vector<double> ball_integrals(const SchottkyData& group, const HorocycleConditional& c,
                                   double r, double t, const std::vector<Observable>& phis) {
    const Selected ball = select_ball(c, r);
    const std::size_t n = ball.s.size(), m = phis.size();
    std::vector<double> values(n * m);
    parallel_for(n, [&](std::size_t i) {
        const GroupElement f = geodesic_flow(horocycle_step(c.frame, ball.s[i]), t);
        const HopfCoord h = reduced_hopf(group, f);
        for (std::size_t j = 0; j < m; ++j) values[j * n + i] = ball.w[i] * phis[j](h);
    });
    std::vector<double> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        out[j] = pairwise_sum(std::span<const double>(values).subspan(j * n, n));
    }
    return out;
}

AverageResult m_average(const SchottkyData& group, const HorocycleConditional& c, double r,
                        double t, const Observable& phi) {
    const Selected ball = select_ball(c, r);
    const double mass = pairwise_sum(ball.w);
    if (!(mass > 0.0)) throw EmptySupport("m_average: the ball carries no mass");
    AverageResult res;
    res.value = ball_integrals(group, c, r, t, {phi})[0] / mass;
    res.r = r;
    res.t = t;
    res.weighting = c.weighting;
    res.frame = c.frame;
    res.atoms = ball.s.size();
    return res;
}

double ratio_average(const SchottkyData& group, const GroupElement& frame, double r,
                     const Observable& phi, const Observable& psi, int resolution) {
    const auto c = lebesgue_conditional(frame, r, resolution);
    const auto v = ball_integrals(group, c, r, 0.0, {phi, psi});
    if (!(std::abs(v[1]) >= 1e-12 * 2.0 * r)) {
        throw ZeroDenominator("ratio_average: the psi integral vanishes on the ball");
    }
    return v[0] / v[1];
}

double correlation(const SchottkyData& group, const QuadratureMeasure& q, double t,
                   const Observable& phi, const Observable& psi) {
    const double total = q.total_mass();
    const double num = integrate(q, [&](const QuadAtom& a) {
        const double x = phi(a.hopf);
        if (x == 0.0) return 0.0;
        return x * psi(reduced_hopf(group, geodesic_flow(hopf_to_frame(a.hopf), t)));
    });
    return num / total;
}

EmpiricalTransverse empirical_transverse(const SchottkyData& group, const GroupElement& frame,
                                         const FlowBox& box, double r, double step,
                                         double ball_mass) {
    if (!(step > 0.0) || !(r > 0.0)) throw InvalidInput("empirical_transverse: need r, step > 0");
    if (!(ball_mass > 0.0)) throw EmptySupport("empirical_transverse: zero ball mass");
    const auto n = static_cast<std::size_t>(std::floor(2.0 * r / step)) + 1;
    struct Sample {
        bool inside = false;
        bool shell = false;
        std::size_t cell = 0;
        Word word;
    };
    std::vector<Sample> samples(n);
    parallel_for(n, [&](std::size_t i) {
        const double s = -r + static_cast<double>(i) * step;
        GroupElement f = horocycle_step(frame, s);
        Reduction red;
        for (int attempt = 0;; ++attempt) {
            try {
                red = reduce_to_domain(group, f);
                break;
            } catch (const AmbiguousBoundary&) {
                if (attempt == 3) throw;
                f = horocycle_step(f, 1e-7);
            }
        }
        const HopfCoord h = frame_to_hopf(red.frame);
        Sample& out = samples[i];
        if (!box.contains(h)) return;
        out.inside = true;
        out.shell = box.face_distance(h) < 1e-3 * box.r0;
        out.cell = box.cell(h);
        out.word = std::move(red.word);
    });
    EmpiricalTransverse res;
    res.cells.assign(box.cell_count(), 0.0);
    std::size_t inside = 0, shell = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& cur = samples[i];
        if (!cur.inside) continue;
        ++inside;
        if (cur.shell) ++shell;
        const bool continues = i > 0 && samples[i - 1].inside && samples[i - 1].word == cur.word;
        if (continues) continue;
        ++res.crossings;
        res.cells[cur.cell] += 1.0 / ball_mass;
    }
    if (inside > 0 && static_cast<double>(shell) > 0.01 * static_cast<double>(inside)) {
        throw LeakyBox("empirical_transverse: too many samples on the box boundary");
    }
    return res;
}

double annulus_error(const HorocycleConditional& c, double r, double r0, double phi_bound) {
    if (r0 == 0.0) return 0.0;
    if (!(r > r0) || !(r0 > 0.0)) throw InvalidInput("annulus_error: need r > r0 >= 0");
    if (r + r0 > c.radius * (1.0 + 1e-12)) {
        throw InvalidInput("annulus_error: conditional radius smaller than r + r0");
    }
    const double ball = c.mass(r);
    if (!(ball > 0.0)) throw EmptySupport("annulus_error: the ball carries no mass");
    return phi_bound * c.shell_mass(r - r0, r + r0) / ball;
}

double select_radius(const HorocycleConditional& c, double r, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double radius = r;
    for (int attempt = 0; attempt < 64; ++attempt) {
        const double tol = 1e-12 * std::max(1.0, radius);
        const double edge = c.shell_mass(radius - tol, radius + tol);
        if (edge <= 1e-6 * c.mass(radius)) return radius;
        radius = r * (0.95 + 0.1 * uniform01(rng));
    }
    throw NumericalFailure("select_radius: no clean radius found");
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

GroupElement generic_frame(const SchottkyData& group, const AtomicBoundaryMeasure& nu_o,
                           std::mt19937_64& rng, int depth) {
    if (depth < 1) throw InvalidInput("generic_frame: depth must be >= 1");
    const int letters = static_cast<int>(2 * group.rank());
    Word w;
    while (static_cast<int>(w.size()) < depth) {
        const Letter l = Letter::from_code(static_cast<int>(uniform01(rng) * letters));
        if (!w.empty() && l == w.back().inverted()) continue;
        w.push_back(l);
    }
    const Word prefix(w.begin(), w.end() - 1);
    const BoundaryPoint xi = group.word_matrix(prefix).apply(group.attracting_fixed_point(w.back()));
    for (;;) {
        const BoundaryPoint eta = direction_from_o(2.0 * std::numbers::pi * uniform01(rng));
        if (eta.is_infinite() || eta == xi) continue;
        bool inside = false;
        for (const auto& g : group.generators()) {
            if (g.minus.contains(eta) || g.plus.contains(eta)) inside = true;
        }
        if (inside) continue;
        const GroupElement f = hopf_to_frame({xi, eta, 0.0});
        double best = std::numeric_limits<double>::infinity();
        for (const auto& a : nu_o.atoms) {
            const double s = horocycle_parameter(f, a.xi);
            if (std::abs(s) < std::abs(best)) best = s;
        }
        if (!std::isfinite(best)) throw EmptySupport("generic_frame: nu_o has no usable atom");
        return horocycle_step(f, best);
    }
}

double equicontinuity_gap(const SchottkyData& group, const AtomicBoundaryMeasure& nu_o,
                          double delta, const GroupElement& f, const GroupElement& f_prime,
                          const std::vector<double>& times, const Observable& phi, int resolution) {
    const auto c = bm_conditional(f, nu_o, delta, 1.0, resolution);
    const auto c_prime = bm_conditional(f_prime, nu_o, delta, 1.0, resolution);
    double gap = 0.0;
    for (double t : times) {
        const double a = m_average(group, c, 1.0, t, phi).value;
        const double b = m_average(group, c_prime, 1.0, t, phi).value;
        gap = std::max(gap, std::abs(a - b));
    }
    return gap;
}

} // namespace horolab
