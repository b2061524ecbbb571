#include "horolab/harness.hpp"

#include "horolab/errors.hpp"
#include "horolab/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace horolab {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

double rel_err(double value, double target) {
    return target != 0.0 ? std::abs(value - target) / std::abs(target) : std::abs(value);
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

Interval interval_from(const json& j, const char* name) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ConfigError(std::string("box.") + name + " must be [lo, hi]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

// ---------------------------------------------------------------------------
// Shared, lazily built objects of one run.

class Lab {
public:
    explicit Lab(const ExperimentConfig& c)
        : cfg(c), group(load_group(c)), group_id(c.group_file.empty() ? c.preset : c.group_file) {}

    const ExperimentConfig& cfg;
    SchottkyData group;
    std::string group_id;

    double delta() {
        if (!delta_) delta_ = estimate_delta(group, cfg.k).value;
        return *delta_;
    }
    const AtomicBoundaryMeasure& nu() {
        if (!nu_) nu_ = build_ps_measure(group, kBasePoint, delta(), cfg.k);
        return *nu_;
    }
    /// Cylinder-coarsened nu, the boundary factor of both quadratures.
    const AtomicBoundaryMeasure& coarse() {
        if (!coarse_) coarse_ = coarsen(nu(), CylinderPartition(group, cfg.cylinder_depth));
        return *coarse_;
    }
    const AtomicBoundaryMeasure& lambda() {
        if (!lambda_) lambda_ = discretize_lebesgue(kBasePoint, cfg.lebesgue_resolution);
        return *lambda_;
    }
    const QuadratureMeasure& bm() {
        if (!bm_) bm_ = bm_quadrature(group, coarse(), delta(), window());
        return *bm_;
    }
    const QuadratureMeasure& br() {
        if (!br_) br_ = br_quadrature(group, coarse(), lambda(), delta(), window());
        return *br_;
    }
    const std::vector<TestFunction>& suite() {
        if (!suite_) {
            suite_ = test_suite(group, 5);
            if (suite_->size() < 2) throw EmptySupport("test suite: fewer than two admissible bumps");
        }
        return *suite_;
    }
    std::vector<Observable> observables() {
        std::vector<Observable> out;
        for (const auto& f : suite()) out.push_back(f.observable());
        return out;
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs() {
        const std::size_t n = suite().size();
        std::vector<std::pair<std::size_t, std::size_t>> out{{0, 1}};
        if (n >= 4) out.emplace_back(2, 3);
        if (n >= 5) out.emplace_back(4, 0);
        else out.emplace_back(n - 1, 0);
        return out;
    }
    /// The first n generic frames of the seeded stream, with backward
    /// endpoints coded down to the cutoff depth.
    const std::vector<GroupElement>& frames(std::size_t n) {
        if (!rng_) rng_.emplace(cfg.seed);
        while (frames_.size() < n) frames_.push_back(generic_frame(group, nu(), *rng_, cfg.k));
        return frames_;
    }
    /// Normalized integrals of the suite.
    std::vector<double> means(const QuadratureMeasure& q) {
        const double total = q.total_mass();
        std::vector<double> out;
        for (const auto& f : suite()) {
            out.push_back(integrate(q, [&](const QuadAtom& a) { return f(a.hopf); }) / total);
        }
        return out;
    }
    ResultRow row() const {
        ResultRow r;
        r.experiment = cfg.experiment;
        r.group_id = group_id;
        return r;
    }

private:
    TimeWindow window() const { return {cfg.t_min, cfg.t_max, cfg.t_step}; }

    std::optional<double> delta_;
    std::optional<AtomicBoundaryMeasure> nu_, coarse_, lambda_;
    std::optional<QuadratureMeasure> bm_, br_;
    std::optional<std::vector<TestFunction>> suite_;
    std::optional<std::mt19937_64> rng_;
    std::vector<GroupElement> frames_;
};

/// Normalized integrals of every suite function composed with a right
/// translation `move`, one reduction per atom.
std::vector<double> moved_means(Lab& lab, const QuadratureMeasure& q,
                                const std::function<GroupElement(const GroupElement&)>& move) {
    const auto& suite = lab.suite();
    const std::size_t m = suite.size();
    std::vector<double> values(q.atoms.size() * m, 0.0);
    parallel_for(q.atoms.size(), [&](std::size_t i) {
        const auto& a = q.atoms[i];
        const HopfCoord h = reduced_hopf(lab.group, move(hopf_to_frame(a.hopf)));
        for (std::size_t j = 0; j < m; ++j) values[j * q.atoms.size() + i] = a.weight * suite[j](h);
    });
    const double total = q.total_mass();
    std::vector<double> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        out[j] = pairwise_sum(std::span<const double>(values.data() + j * q.atoms.size(), q.atoms.size())) /
                 total;
    }
    return out;
}

// Rotation about o sending inf to u.
GroupElement rotation_to(const BoundaryPoint& u) {
    if (u.is_infinite()) return GroupElement::identity();
    const double n = std::hypot(u.value(), 1.0);
    const double c = -u.value() / n, s = 1.0 / n;
    return {c, s, -s, c};
}

// ---------------------------------------------------------------------------
// Experiments.

using Rows = std::vector<ResultRow>;

Rows conformality(Lab& lab) {
    Rows rows;
    const double delta = lab.delta();
    const HPoint y{0.5, 1.5};
    for (int k : {lab.cfg.k - 2, lab.cfg.k, lab.cfg.k + 2}) {
        if (k < 1) continue;
        const auto dev = ps_cocycle_deviations(lab.group, kBasePoint, y, delta, k);
        auto r = lab.row();
        r.weighting = "PS";
        r.phi_id = "cocycle_median_k" + std::to_string(k);
        r.value = median(dev);
        r.rel_err = r.value;
        r.atoms = dev.size();
        rows.push_back(r);
    }
    // Equivariance: the pushforward of nu_o by a generator against nu at the
    // image base point, compared on cylinders.
    const GroupElement g = lab.group.letter_matrix({0, false});
    const auto& nu = lab.nu();
    AtomicBoundaryMeasure pushed = nu;
    for (auto& a : pushed.atoms) a.xi = g.apply(a.xi);
    pushed.sort_atoms();
    const auto at_image = build_ps_measure(lab.group, g.apply(kBasePoint), delta, lab.cfg.k);
    const CylinderPartition cyl(lab.group, 3);
    const auto lhs = cyl.masses(pushed);
    const auto rhs = cyl.masses(at_image);
    const double total = std::accumulate(rhs.begin(), rhs.end(), 0.0);
    std::vector<double> errs;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        if (rhs[i] > 1e-3 * total) errs.push_back(rel_err(lhs[i], rhs[i]));
    }
    auto r = lab.row();
    r.weighting = "PS";
    r.phi_id = "equivariance_median";
    r.value = median(errs);
    r.rel_err = r.value;
    r.atoms = errs.size();
    rows.push_back(r);
    return rows;
}

Rows lebesgue_cocycle(Lab& lab) {
    Rows rows;
    std::mt19937_64 rng(lab.cfg.seed);
    std::vector<double> errs;
    for (int i = 0; i < 1000; ++i) {
        const HPoint x{-2.0 + 4.0 * uniform01(rng), 0.3 + 2.7 * uniform01(rng)};
        const HPoint y{-2.0 + 4.0 * uniform01(rng), 0.3 + 2.7 * uniform01(rng)};
        const BoundaryPoint xi = i % 10 == 0 ? BoundaryPoint::infinity()
                                             : BoundaryPoint(-5.0 + 10.0 * uniform01(rng));
        const double closed = lebesgue_density(x, y, xi);
        // exp(d(x,z) - d(y,z)) for z far along the ray from x to xi.
        const GroupElement fx = frame_at(x);
        const GroupElement k = fx * rotation_to(fx.inverse().apply(xi));
        const HPoint z = k.apply(HPoint{0.0, std::exp(18.0)});
        errs.push_back(rel_err(closed, std::exp(dist(x, z) - dist(y, z))));
    }
    auto r = lab.row();
    r.weighting = "Lebesgue";
    r.phi_id = "cocycle_max";
    r.value = *std::max_element(errs.begin(), errs.end());
    r.rel_err = r.value;
    r.atoms = errs.size();
    rows.push_back(r);
    r.phi_id = "cocycle_median";
    r.value = median(errs);
    r.rel_err = r.value;
    rows.push_back(r);

    // Pushforward of the discretized lambda_o against the density reweighting.
    const GroupElement g = lab.group.letter_matrix({0, false});
    const HPoint go = g.apply(kBasePoint);
    auto f = [](const BoundaryPoint& xi) {
        if (xi.is_infinite()) return 0.0;
        const double u = xi.value() - 1.0;
        return std::exp(-u * u);
    };
    for (int n : {64, 128, 256, lab.cfg.lebesgue_resolution}) {
        const auto lam = discretize_lebesgue(kBasePoint, n);
        double push = 0.0, reweight = 0.0;
        for (const auto& a : lam.atoms) {
            push += a.weight * f(g.apply(a.xi));
            reweight += a.weight * f(a.xi) * lebesgue_density(kBasePoint, go, a.xi);
        }
        auto row = lab.row();
        row.weighting = "Lebesgue";
        row.phi_id = "pushforward_n" + std::to_string(n);
        row.value = push;
        row.target = reweight;
        row.rel_err = rel_err(push, reweight);
        row.atoms = lam.atoms.size();
        rows.push_back(row);
    }
    return rows;
}

Rows bm_invariance(Lab& lab) {
    Rows rows;
    const auto& q = lab.bm();
    const auto base = lab.means(q);
    const auto& suite = lab.suite();
    auto emit = [&](double u, const std::string& psi, const std::vector<double>& moved) {
        for (std::size_t j = 0; j < suite.size(); ++j) {
            auto r = lab.row();
            r.t = u;
            r.weighting = "BM";
            r.phi_id = suite[j].id;
            r.psi_id = psi;
            r.value = moved[j];
            r.target = base[j];
            r.rel_err = rel_err(moved[j], base[j]);
            r.atoms = q.atoms.size();
            rows.push_back(r);
        }
    };
    for (double u : {-1.0, -0.5, 0.5, 1.0}) {
        emit(u, "geodesic", moved_means(lab, q, [u](const GroupElement& f) { return geodesic_flow(f, u); }));
    }
    const GroupElement w = GroupElement::flip();
    emit(0.0, "flip", moved_means(lab, q, [&w](const GroupElement& f) { return f * w; }));
    return rows;
}

Rows br_invariance(Lab& lab) {
    Rows rows;
    const auto& q = lab.br();
    const auto base = lab.means(q);
    const auto& suite = lab.suite();
    const double delta = lab.delta();
    for (double s : {-1.0, -0.5, 0.5, 1.0}) {
        const auto moved = moved_means(lab, q, [s](const GroupElement& f) { return horocycle_step(f, s); });
        for (std::size_t j = 0; j < suite.size(); ++j) {
            auto r = lab.row();
            r.r = s;
            r.weighting = "BR";
            r.phi_id = suite[j].id;
            r.psi_id = "horocycle";
            r.value = moved[j];
            r.target = base[j];
            r.rel_err = rel_err(moved[j], base[j]);
            r.atoms = q.atoms.size();
            rows.push_back(r);
        }
    }
    // Quasi-invariance under the flow: least-squares slope of log ratio in u.
    const std::vector<double> us{-1.0, -0.5, 0.0, 0.5, 1.0};
    std::vector<std::vector<double>> logs(suite.size());
    for (double u : us) {
        const auto moved = u == 0.0 ? base
                                    : moved_means(lab, q, [u](const GroupElement& f) { return geodesic_flow(f, u); });
        for (std::size_t j = 0; j < suite.size(); ++j) logs[j].push_back(std::log(moved[j] / base[j]));
    }
    const double ubar = std::accumulate(us.begin(), us.end(), 0.0) / us.size();
    double suu = 0.0;
    for (double u : us) suu += (u - ubar) * (u - ubar);
    std::vector<double> slopes;
    for (std::size_t j = 0; j < suite.size(); ++j) {
        const double lbar = std::accumulate(logs[j].begin(), logs[j].end(), 0.0) / us.size();
        double sul = 0.0;
        for (std::size_t i = 0; i < us.size(); ++i) sul += (us[i] - ubar) * (logs[j][i] - lbar);
        slopes.push_back(sul / suu);
        auto r = lab.row();
        r.weighting = "BR";
        r.phi_id = suite[j].id;
        r.psi_id = "quasi_exponent";
        r.value = slopes.back();
        r.target = delta - 1.0;
        r.rel_err = rel_err(r.value, r.target);
        r.atoms = q.atoms.size();
        rows.push_back(r);
    }
    auto r = lab.row();
    r.weighting = "BR";
    r.phi_id = "mean";
    r.psi_id = "quasi_exponent";
    r.value = std::accumulate(slopes.begin(), slopes.end(), 0.0) / slopes.size();
    r.target = delta - 1.0;
    r.rel_err = rel_err(r.value, r.target);
    r.atoms = q.atoms.size();
    rows.push_back(r);
    return rows;
}

Rows mixing(Lab& lab) {
    Rows rows;
    const auto& q = lab.bm();
    const auto means = lab.means(q);
    const auto& suite = lab.suite();
    for (const auto& [i, j] : lab.pairs()) {
        for (double t : lab.cfg.t) {
            auto r = lab.row();
            r.t = t;
            r.weighting = "BM";
            r.phi_id = suite[i].id;
            r.psi_id = suite[j].id;
            r.value = correlation(lab.group, q, t, suite[i].observable(), suite[j].observable());
            r.target = means[i] * means[j];
            r.rel_err = rel_err(r.value, r.target);
            r.atoms = q.atoms.size();
            rows.push_back(r);
        }
    }
    return rows;
}

Rows equidistribution(Lab& lab) {
    Rows rows;
    const auto targets = lab.means(lab.bm());
    const auto& suite = lab.suite();
    const auto phis = lab.observables();
    const auto& frames = lab.frames(static_cast<std::size_t>(lab.cfg.frames));
    for (std::size_t fi = 0; fi < static_cast<std::size_t>(lab.cfg.frames); ++fi) {
        const auto c = bm_conditional(frames[fi], lab.nu(), lab.delta(), 1.0, 0);
        const double mass = c.mass(1.0);
        for (double t : lab.cfg.t) {
            const auto ints = ball_integrals(lab.group, c, 1.0, t, phis);
            for (std::size_t j = 0; j < suite.size(); ++j) {
                auto r = lab.row();
                r.frame_id = static_cast<int>(fi);
                r.r = 1.0;
                r.t = t;
                r.weighting = to_string(Weighting::PattersonSullivan);
                r.phi_id = suite[j].id;
                r.value = ints[j] / mass;
                r.target = targets[j];
                r.rel_err = rel_err(r.value, r.target);
                r.atoms = c.atoms.size();
                rows.push_back(r);
            }
        }
    }
    return rows;
}

Rows push_identity(Lab& lab) {
    Rows rows;
    const double delta = lab.delta();
    const auto nu = build_ps_measure(lab.group, kBasePoint, delta, std::max(6, lab.cfg.k - 4));
    const auto& suite = lab.suite();
    const auto& frames = lab.frames(10);
    std::mt19937_64 rng(lab.cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    double worst_grid = 0.0, worst_rebuild = 0.0;
    for (int i = 0; i < 100; ++i) {
        const GroupElement& f = frames[static_cast<std::size_t>(i) % frames.size()];
        const double t = 6.0 * uniform01(rng);
        const auto& phi = suite[static_cast<std::size_t>(i) % suite.size()];
        const double r_big = std::exp(t);
        // M_1^t at a_{-t}F.
        const auto back = bm_conditional(geodesic_flow(f, -t), nu, delta, 1.0, 0);
        const double pulled = m_average(lab.group, back, 1.0, t, phi.observable()).value;
        // M_{e^t}^0 at F on the pushforward grid, and on a fresh conditional.
        const auto grid = pushforward(back, t);
        const double on_grid = m_average(lab.group, grid, r_big, 0.0, phi.observable()).value;
        const auto fresh = bm_conditional(f, nu, delta, r_big, 0);
        const double rebuilt = m_average(lab.group, fresh, r_big, 0.0, phi.observable()).value;
        auto r = lab.row();
        r.frame_id = i % static_cast<int>(frames.size());
        r.r = r_big;
        r.t = t;
        r.weighting = to_string(Weighting::PattersonSullivan);
        r.phi_id = phi.id;
        r.psi_id = "grid";
        r.value = on_grid;
        r.target = pulled;
        r.rel_err = std::abs(on_grid - pulled);
        r.atoms = back.atoms.size();
        rows.push_back(r);
        r.psi_id = "rebuild";
        r.value = rebuilt;
        r.rel_err = std::abs(rebuilt - pulled);
        r.atoms = fresh.atoms.size();
        rows.push_back(r);
        worst_grid = std::max(worst_grid, std::abs(on_grid - pulled));
        worst_rebuild = std::max(worst_rebuild, std::abs(rebuilt - pulled));
    }
    for (const auto& [id, worst] : {std::pair{"max_grid", worst_grid}, std::pair{"max_rebuild", worst_rebuild}}) {
        auto r = lab.row();
        r.weighting = to_string(Weighting::PattersonSullivan);
        r.phi_id = id;
        r.value = worst;
        r.rel_err = worst;
        r.atoms = 100;
        rows.push_back(r);
    }
    return rows;
}

Rows ratio_limit(Lab& lab) {
    Rows rows;
    const auto targets = lab.means(lab.br());
    const auto& suite = lab.suite();
    const auto& frames = lab.frames(static_cast<std::size_t>(lab.cfg.frames));
    for (double r_ball : lab.cfg.r) {
        const int resolution = static_cast<int>(std::ceil(2.0 * r_ball / 0.01));
        for (const auto& [i, j] : lab.pairs()) {
            const double target = targets[i] / targets[j];
            std::vector<double> values;
            for (std::size_t fi = 0; fi < static_cast<std::size_t>(lab.cfg.frames); ++fi) {
                auto r = lab.row();
                r.frame_id = static_cast<int>(fi);
                r.r = r_ball;
                r.weighting = to_string(Weighting::Lebesgue);
                r.phi_id = suite[i].id;
                r.psi_id = suite[j].id;
                try {
                    r.value = ratio_average(lab.group, frames[fi], r_ball, suite[i].observable(),
                                            suite[j].observable(), resolution);
                } catch (const ZeroDenominator&) {
                    // The ball never meets the support of psi: no ratio to report.
                    r.value = std::numeric_limits<double>::quiet_NaN();
                }
                r.target = target;
                r.rel_err = rel_err(r.value, target);
                r.atoms = static_cast<std::size_t>(resolution);
                rows.push_back(r);
                values.push_back(r.value);
            }
            double spread = 0.0;
            for (std::size_t a = 0; a < values.size(); ++a) {
                for (std::size_t b = a + 1; b < values.size(); ++b) {
                    spread = std::max(spread, std::abs(values[a] - values[b]) /
                                                  (0.5 * (std::abs(values[a]) + std::abs(values[b]))));
                }
            }
            auto r = lab.row();
            r.r = r_ball;
            r.weighting = to_string(Weighting::Lebesgue);
            r.phi_id = suite[i].id;
            r.psi_id = suite[j].id + ":spread";
            r.value = spread;
            r.rel_err = spread;
            r.atoms = values.size();
            rows.push_back(r);
        }
    }
    return rows;
}

// Hull of the atoms of m inside the interval, padded by 5% on each side.
Interval atom_hull(const AtomicBoundaryMeasure& m, const Interval& within) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& a : m.atoms) {
        if (a.xi.is_infinite() || !within.contains(a.xi.value())) continue;
        lo = std::min(lo, a.xi.value());
        hi = std::max(hi, a.xi.value());
    }
    if (!(lo < hi)) return within;
    const double pad = 0.05 * (hi - lo);
    return {std::max(within.lo, lo - pad), std::min(within.hi, hi + pad)};
}

/// Box over the support of the first test function, with the endpoint
/// intervals shrunk to the limit set so every cell carries mass.
FlowBox default_box(Lab& lab) {
    if (lab.cfg.box) return *lab.cfg.box;
    const auto& f = lab.suite().front();
    FlowBox box;
    box.xi_minus = atom_hull(lab.coarse(), {f.center.xi_minus.value() - f.w_minus,
                                            f.center.xi_minus.value() + f.w_minus});
    box.xi_plus = atom_hull(lab.coarse(), {f.center.xi_plus.value() - f.w_plus,
                                           f.center.xi_plus.value() + f.w_plus});
    box.t = {f.center.t - f.w_t, f.center.t + f.w_t};
    box.xi_plus0 = 0.5 * (box.xi_plus.lo + box.xi_plus.hi);
    box.r0 = lab.cfg.r0;
    box.cells_xi = 2;
    box.cells_t = 2;
    return box;
}

std::vector<double> normalized(std::vector<double> v) {
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (total > 0.0) {
        for (double& x : v) x /= total;
    }
    return v;
}

Rows transverse(Lab& lab) {
    Rows rows;
    const FlowBox box = default_box(lab);
    validate_box(lab.group, box);
    const auto bm = normalized(transverse_decompose(box, lab.bm(), lab.coarse()));
    const auto br = normalized(transverse_decompose(box, lab.br(), lab.coarse()));
    for (std::size_t c = 0; c < bm.size(); ++c) {
        auto r = lab.row();
        r.weighting = "BR";
        r.phi_id = "cell" + std::to_string(c);
        r.psi_id = "BR_vs_BM";
        r.value = br[c];
        r.target = bm[c];
        r.rel_err = rel_err(br[c], bm[c]);
        r.atoms = lab.br().atoms.size();
        rows.push_back(r);
    }
    const auto& frames = lab.frames(static_cast<std::size_t>(lab.cfg.frames));
    for (double r_ball : lab.cfg.r) {
        for (double scale : {1.0, 2.0}) {
            const double radius = scale * r_ball;
            for (std::size_t fi = 0; fi < static_cast<std::size_t>(lab.cfg.frames); ++fi) {
                const auto emp = empirical_transverse(lab.group, frames[fi], box, radius, 0.01, 2.0 * radius);
                const auto cells = normalized(emp.cells);
                for (std::size_t c = 0; c < cells.size(); ++c) {
                    auto r = lab.row();
                    r.frame_id = static_cast<int>(fi);
                    r.r = radius;
                    r.weighting = to_string(Weighting::Lebesgue);
                    r.phi_id = "cell" + std::to_string(c);
                    r.psi_id = "empirical_vs_BM";
                    r.value = cells[c];
                    r.target = bm[c];
                    r.rel_err = rel_err(cells[c], bm[c]);
                    r.atoms = emp.crossings;
                    rows.push_back(r);
                }
            }
        }
    }
    return rows;
}

Rows annulus(Lab& lab) {
    Rows rows;
    const double r0 = lab.cfg.r0;
    const double t_max = *std::max_element(lab.cfg.t.begin(), lab.cfg.t.end());
    const double radius = std::exp(t_max) + r0;
    const auto& frames = lab.frames(static_cast<std::size_t>(lab.cfg.frames));
    for (std::size_t fi = 0; fi < static_cast<std::size_t>(lab.cfg.frames); ++fi) {
        const auto ps = bm_conditional(frames[fi], lab.nu(), lab.delta(), radius, 0);
        const auto leb =
            lebesgue_conditional(frames[fi], radius, static_cast<int>(std::ceil(2.0 * radius / 0.01)));
        for (const auto* c : {&ps, &leb}) {
            for (double t : lab.cfg.t) {
                const double r_ball = std::exp(t);
                auto r = lab.row();
                r.frame_id = static_cast<int>(fi);
                r.r = r_ball;
                r.t = t;
                r.weighting = to_string(c->weighting);
                r.phi_id = "annulus";
                r.value = r_ball > r0 ? annulus_error(*c, r_ball, r0, 1.0)
                                      : std::numeric_limits<double>::quiet_NaN();
                r.rel_err = r.value;
                r.atoms = c->atoms.size();
                rows.push_back(r);
            }
        }
    }
    return rows;
}

Rows radius_perturb(Lab& lab) {
    Rows rows;
    const GroupElement f = lab.frames(1).front();
    const auto c = bm_conditional(f, lab.nu(), lab.delta(), 2.0, 2001);
    // The heaviest grid atom with 0.5 <= |s| <= 1.5 puts mass on its sphere.
    double r_bad = 1.0, heaviest = -1.0;
    for (const auto& a : c.atoms) {
        if (std::abs(a.s) >= 0.5 && std::abs(a.s) <= 1.5 && a.weight > heaviest) {
            heaviest = a.weight;
            r_bad = std::abs(a.s);
        }
    }
    const double r_good = select_radius(c, r_bad, lab.cfg.seed);
    auto sphere = [&](double r) { return c.shell_mass(r * (1.0 - 1e-12), r * (1.0 + 1e-12)) / c.mass(r); };
    auto r = lab.row();
    r.frame_id = 0;
    r.weighting = to_string(c.weighting);
    r.atoms = c.atoms.size();
    r.r = r_bad;
    r.phi_id = "sphere_mass_initial";
    r.value = sphere(r_bad);
    r.rel_err = r.value;
    rows.push_back(r);
    r.r = r_good;
    r.phi_id = "sphere_mass_selected";
    r.value = sphere(r_good);
    r.rel_err = r.value;
    rows.push_back(r);
    r.phi_id = "selected_radius";
    r.value = r_good;
    r.target = r_bad;
    r.rel_err = rel_err(r_good, r_bad);
    rows.push_back(r);
    for (double eps : {1e-2, 1e-4, 1e-6, 1e-8}) {
        r.phi_id = "shell_mass";
        r.psi_id = "eps=" + std::to_string(eps);
        r.t = eps;
        r.value = c.shell_mass(r_good - eps, r_good + eps) / c.mass(r_good);
        r.target = 0.0;
        r.rel_err = r.value;
        rows.push_back(r);
    }
    return rows;
}

Rows equicontinuity(Lab& lab) {
    Rows rows;
    const GroupElement f = lab.frames(1).front();
    std::vector<double> times{0.0};
    for (double t : lab.cfg.t) times.push_back(t);
    const auto& suite = lab.suite();
    for (double d : {1e-2, 1e-3, 1e-4}) {
        const GroupElement g = horocycle_step(geodesic_flow(f * GroupElement::stable_horocycle(d), d), d);
        const double dist = frame_distance(f, g);
        for (const auto& phi : suite) {
            auto r = lab.row();
            r.frame_id = 0;
            r.r = 1.0;
            r.t = times.back();
            r.weighting = to_string(Weighting::PattersonSullivan);
            r.phi_id = phi.id;
            r.psi_id = "d=" + std::to_string(d);
            r.value = equicontinuity_gap(lab.group, lab.nu(), lab.delta(), f, g, times, phi.observable(), 0);
            r.target = dist;
            r.rel_err = r.value / dist;
            r.atoms = times.size();
            rows.push_back(r);
        }
    }
    return rows;
}

using Experiment = Rows (*)(Lab&);

const std::vector<std::pair<std::string, Experiment>>& registry() {
    static const std::vector<std::pair<std::string, Experiment>> r{
        {"conformality", conformality},     {"lebesgue-cocycle", lebesgue_cocycle},
        {"bm-invariance", bm_invariance},   {"br-invariance", br_invariance},
        {"mixing", mixing},                 {"equidistribution", equidistribution},
        {"push-identity", push_identity},   {"ratio-limit", ratio_limit},
        {"transverse", transverse},         {"annulus", annulus},
        {"radius-perturb", radius_perturb}, {"equicontinuity", equicontinuity},
    };
    return r;
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

} // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& [name, fn] : registry()) n.push_back(name);
        return n;
    }();
    return names;
}

json to_json(const ExperimentConfig& c) {
    json j{{"experiment", c.experiment},
           {"preset", c.preset},
           {"group_file", c.group_file},
           {"k", c.k},
           {"cylinder_depth", c.cylinder_depth},
           {"lebesgue_resolution", c.lebesgue_resolution},
           {"t_min", c.t_min},
           {"t_max", c.t_max},
           {"t_step", c.t_step},
           {"t", c.t},
           {"r", c.r},
           {"frames", c.frames},
           {"r0", c.r0},
           {"seed", c.seed},
           {"threads", c.threads},
           {"out", c.out}};
    if (c.box) {
        j["box"] = {{"xi_minus", interval_json(c.box->xi_minus)},
                    {"xi_plus", interval_json(c.box->xi_plus)},
                    {"t", interval_json(c.box->t)},
                    {"xi_plus0", c.box->xi_plus0},
                    {"r0", c.box->r0},
                    {"cells_xi", c.box->cells_xi},
                    {"cells_t", c.box->cells_t}};
    }
    return j;
}

ExperimentConfig config_from_json(const json& input, ExperimentConfig c) {
    const json& j = input.contains("config") && input["config"].is_object() ? input["config"] : input;
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::vector<std::string> known{
        "experiment", "preset", "group_file", "k",  "cylinder_depth", "lebesgue_resolution",
        "t_min",      "t_max",  "t_step",     "t",  "r",              "frames",
        "r0",         "seed",   "threads",    "out", "box"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown config field '" + key + "'");
        }
    }
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("experiment", c.experiment);
        get("preset", c.preset);
        get("group_file", c.group_file);
        get("k", c.k);
        get("cylinder_depth", c.cylinder_depth);
        get("lebesgue_resolution", c.lebesgue_resolution);
        get("t_min", c.t_min);
        get("t_max", c.t_max);
        get("t_step", c.t_step);
        get("t", c.t);
        get("r", c.r);
        get("frames", c.frames);
        get("r0", c.r0);
        get("seed", c.seed);
        get("threads", c.threads);
        get("out", c.out);
        if (j.contains("box")) {
            const json& b = j.at("box");
            FlowBox box;
            box.xi_minus = interval_from(b.at("xi_minus"), "xi_minus");
            box.xi_plus = interval_from(b.at("xi_plus"), "xi_plus");
            box.t = interval_from(b.at("t"), "t");
            box.xi_plus0 = b.value("xi_plus0", 0.5 * (box.xi_plus.lo + box.xi_plus.hi));
            box.r0 = b.value("r0", 1.0);
            box.cells_xi = b.value("cells_xi", 3);
            box.cells_t = b.value("cells_t", 2);
            c.box = box;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return c;
}

void validate(const ExperimentConfig& c) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), c.experiment) == names.end()) {
        throw ConfigError("unknown experiment '" + c.experiment + "'");
    }
    if (c.group_file.empty()) {
        const auto presets = preset_names();
        if (std::find(presets.begin(), presets.end(), c.preset) == presets.end()) {
            throw ConfigError("unknown preset '" + c.preset + "'");
        }
    }
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    require(c.k >= 6 && c.k <= 16, "k must lie in [6, 16]");
    require(c.cylinder_depth >= 1 && c.cylinder_depth <= 8, "cylinder_depth must lie in [1, 8]");
    require(c.lebesgue_resolution >= 16, "lebesgue_resolution must be at least 16");
    require(std::isfinite(c.t_min) && std::isfinite(c.t_max) && c.t_min < c.t_max, "need t_min < t_max");
    require(c.t_step > 0.0 && c.t_step <= c.t_max - c.t_min, "t_step must be positive and fit the window");
    require(!c.t.empty(), "t list must be nonempty");
    for (double t : c.t) require(std::isfinite(t) && t >= 0.0 && t <= 20.0, "t values must lie in [0, 20]");
    require(!c.r.empty(), "r list must be nonempty");
    for (double r : c.r) require(std::isfinite(r) && r > 0.0 && r <= 1e7, "r values must lie in (0, 1e7]");
    require(c.frames >= 1 && c.frames <= 64, "frames must lie in [1, 64]");
    require(std::isfinite(c.r0) && c.r0 > 0.0, "r0 must be positive");
    require(c.threads >= 1 && c.threads <= 256, "threads must lie in [1, 256]");
    require(!c.out.empty(), "out must be nonempty");
    if (c.box) {
        const auto& b = *c.box;
        for (const Interval* i : {&b.xi_minus, &b.xi_plus, &b.t}) {
            require(std::isfinite(i->lo) && std::isfinite(i->hi) && i->lo < i->hi, "box intervals must be ordered");
        }
        require(b.r0 > 0.0 && b.cells_xi >= 1 && b.cells_t >= 1, "box r0 and cell counts must be positive");
    }
}

std::string config_hash(const ExperimentConfig& c) {
    json j = to_json(c);
    j.erase("out");
    j.erase("threads");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double parse_real(const std::string& text) {
    std::string s = text;
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch); }), s.end());
    bool exponential = false;
    if (!s.empty() && (s[0] == 'e' || s[0] == 'E') && s.size() > 1) {
        exponential = true;
        s = s.substr(1);
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + text + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw ConfigError("not a number: '" + text + "'");
    return exponential ? std::exp(v) : v;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(item));
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

SchottkyData load_group(const ExperimentConfig& c) {
    try {
        if (c.group_file.empty()) return make_preset(c.preset);
        std::ifstream in(c.group_file);
        if (!in) throw ConfigError("cannot read group file '" + c.group_file + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return schottky_from_json(ss.str());
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad group: ") + e.what());
    }
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& c) {
    validate(c);
    set_thread_count(c.threads);
    Lab lab(c);
    for (const auto& [name, fn] : registry()) {
        if (name == c.experiment) return fn(lab);
    }
    throw ConfigError("unknown experiment '" + c.experiment + "'");
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows, const ExperimentConfig& c) {
    const std::string hash = config_hash(c);
    os << "experiment,group_id,frame_id,r,t,weighting,phi_id,psi_id,value,target,rel_err,atoms,seed,"
          "config_hash\n";
    for (const auto& r : rows) {
        os << csv_field(r.experiment) << ',' << csv_field(r.group_id) << ',' << r.frame_id << ','
           << format_double(r.r) << ',' << format_double(r.t) << ',' << csv_field(r.weighting) << ','
           << csv_field(r.phi_id) << ',' << csv_field(r.psi_id) << ',' << format_double(r.value) << ','
           << format_double(r.target) << ',' << format_double(r.rel_err) << ',' << r.atoms << ','
           << c.seed << ',' << hash << '\n';
    }
}

int run(const ExperimentConfig& c, std::ostream& log) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<ResultRow> rows;
    json group_echo;
    try {
        validate(c);
        group_echo = json::parse(to_json(load_group(c)));
        rows = run_experiment(c);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalFailure& e) {
        log << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const InvalidInput& e) {
        log << "invalid input: " << e.what() << '\n';
        return 2;
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::error_code ec;
    std::filesystem::create_directories(c.out, ec);
    if (ec) {
        log << "cannot create " << c.out << ": " << ec.message() << '\n';
        return 2;
    }
    const std::filesystem::path dir(c.out);
    {
        std::ofstream csv(dir / "results.csv", std::ios::binary);
        write_results_csv(csv, rows, c);
    }
    json manifest{{"config", to_json(c)},
                  {"config_hash", config_hash(c)},
                  {"group", group_echo},
                  {"rows", rows.size()},
                  {"wall_time_seconds", wall},
                  {"versions",
                   {{"horolab", kVersion},
                    {"compiler", __VERSION__},
                    {"cplusplus", __cplusplus},
                    {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
    log << c.experiment << ": " << rows.size() << " rows in " << wall << " s -> " << (dir / "results.csv").string()
        << '\n';
    return 0;
}

} // namespace horolab
