#include "horolab/errors.hpp"
#include "horolab/measures.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

using namespace horolab;

namespace {

constexpr double kDelta = 0.27949835209826723;

struct Fixture {
    SchottkyData group = make_preset("default");
    AtomicBoundaryMeasure nu = build_ps_measure(group, kBasePoint, kDelta, 8);
    AtomicBoundaryMeasure coarse = coarsen(nu, CylinderPartition(group, 3));
    AtomicBoundaryMeasure lambda = discretize_lebesgue(kBasePoint, 64);
    TimeWindow window{-3.0, 3.0, 0.1};
};

const Fixture& fx() {
    static const Fixture f;
    return f;
}

} // namespace

TEST_CASE("domain time range brackets exactly the frames based in the domain") {
    const auto& g = fx().group;
    std::mt19937_64 rng(41);
    int checked = 0;
    for (int i = 0; i < 300; ++i) {
        const BoundaryPoint xi(testing::uniform(rng, -4.5, 4.5)), eta(testing::uniform(rng, -4.5, 4.5));
        if (std::abs(xi.value() - eta.value()) < 1e-3) continue;
        const auto range = domain_time_range(g, xi, eta);
        for (double t = -6.0; t <= 6.0; t += 0.37) {
            const HPoint p = hopf_to_frame({xi, eta, t}).base_point();
            bool near_wall = false;
            for (const auto& gen : g.generators()) {
                near_wall = near_wall || gen.minus.boundary_distance(p) < 1e-9 || gen.plus.boundary_distance(p) < 1e-9;
            }
            if (near_wall) continue;
            const bool inside = range && range->first < t && t < range->second;
            CHECK(inside == g.in_domain(p));
            ++checked;
        }
    }
    CHECK(checked > 1000);
}

TEST_CASE("BM quadrature lives in the domain with t-independent weights") {
    const auto q = bm_quadrature(fx().group, fx().coarse, kDelta, fx().window);
    REQUIRE(!q.atoms.empty());
    CHECK(q.kind == MeasureKind::BM);
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> first;
    for (const auto& a : q.atoms) {
        CHECK(fx().group.in_domain(hopf_to_frame(a.hopf).base_point()));
        CHECK(a.hopf.t == doctest::Approx(q.grid_time(a.t_index)));
        const auto key = std::pair{a.xi_index, a.eta_index};
        auto [it, fresh] = first.emplace(key, a.weight);
        if (!fresh) CHECK(a.weight == doctest::Approx(it->second).epsilon(1e-9));
    }
    CHECK(q.total_mass() > 0.0);
}

TEST_CASE("BR quadrature weights grow like exp((1 - delta) t)") {
    const auto q = br_quadrature(fx().group, fx().coarse, fx().lambda, kDelta, fx().window);
    REQUIRE(!q.atoms.empty());
    std::map<std::pair<std::uint32_t, std::uint32_t>, const QuadAtom*> first;
    int compared = 0;
    for (const auto& a : q.atoms) {
        const auto key = std::pair{a.xi_index, a.eta_index};
        auto [it, fresh] = first.emplace(key, &a);
        if (fresh) continue;
        const double dt = a.hopf.t - it->second->hopf.t;
        CHECK(a.weight / it->second->weight == doctest::Approx(std::exp((1.0 - kDelta) * dt)).epsilon(1e-9));
        ++compared;
    }
    CHECK(compared > 100);
}

TEST_CASE("BM and BR quadratures share the t-grid and integrate constants to their mass") {
    const auto q = bm_quadrature(fx().group, fx().coarse, kDelta, fx().window);
    CHECK(integrate(q, [](const QuadAtom&) { return 1.0; }) == doctest::Approx(q.total_mass()).epsilon(1e-12));
    std::stringstream ss;
    write_csv(ss, q);
    std::string header;
    std::getline(ss, header);
    CHECK(header == "xi_minus,xi_plus,t,weight,kind");
}

TEST_CASE("conditional measures scale homothetically under the flow") {
    std::mt19937_64 rng(43);
    const auto& nu = fx().nu;
    for (int i = 0; i < 20; ++i) {
        // Frame whose forward and backward endpoints are atoms of nu.
        const auto& a = nu.atoms[rng() % nu.atoms.size()];
        const auto& b = nu.atoms[rng() % nu.atoms.size()];
        if (a.xi == b.xi) continue;
        const GroupElement f = hopf_to_frame({a.xi, b.xi, testing::uniform(rng, -1.0, 1.0)});
        const auto c = bm_conditional(f, nu, kDelta, 50.0, 0);
        for (double u : {0.5, 1.0, 2.0, 3.0}) {
            const auto fresh = bm_conditional(geodesic_flow(f, u), nu, kDelta, 50.0 * std::exp(u), 0);
            for (double r : {1.0, 5.0, 20.0}) {
                CHECK(fresh.mass(r * std::exp(u)) == doctest::Approx(std::exp(kDelta * u) * c.mass(r)).epsilon(1e-9));
            }
            const auto pushed = pushforward(c, u);
            CHECK(pushed.mass(20.0 * std::exp(u)) == doctest::Approx(fresh.mass(20.0 * std::exp(u))).epsilon(1e-9));
        }
    }
}

TEST_CASE("horocycle parameter inverts the N action") {
    std::mt19937_64 rng(47);
    for (int i = 0; i < 500; ++i) {
        const GroupElement f = testing::random_frame(rng);
        const double s = testing::uniform(rng, -10.0, 10.0);
        const BoundaryPoint eta = horocycle_step(f, s).apply(BoundaryPoint::infinity());
        CHECK(horocycle_parameter(f, eta) == doctest::Approx(s).epsilon(1e-8));
    }
    const GroupElement f = testing::random_frame(rng);
    CHECK(horocycle_parameter(f, f.apply(BoundaryPoint::infinity())) == 0.0);
    CHECK(std::isinf(horocycle_parameter(f, f.apply(BoundaryPoint(0.0)))));
}

TEST_CASE("binned and Lebesgue conditionals") {
    std::mt19937_64 rng(53);
    const auto& nu = fx().nu;
    const GroupElement f = hopf_to_frame({nu.atoms.front().xi, nu.atoms.back().xi, 0.0});
    const auto exact = bm_conditional(f, nu, kDelta, 2.0, 0);
    const auto binned = bm_conditional(f, nu, kDelta, 2.0, 4001);
    // Binning moves atoms by at most half a cell; the density varies slowly.
    CHECK(binned.mass(2.0) == doctest::Approx(exact.mass(2.0)).epsilon(1e-2));
    for (const auto& a : binned.atoms) CHECK(std::abs(a.s) <= 2.0 + 1e-12);
    CHECK_THROWS_AS(bm_conditional(f, nu, kDelta, 2.0, 1), InvalidInput);

    const auto leb = lebesgue_conditional(f, 3.0, 600);
    CHECK(leb.mass(3.0) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(leb.shell_mass(1.0, 2.0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(leb.exponent == 1.0);
    const auto pushed = pushforward(leb, 1.0);
    CHECK(pushed.mass(3.0 * std::exp(1.0)) == doctest::Approx(6.0 * std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("flow boxes: cells, validation and holonomy") {
    const auto& g = fx().group;
    FlowBox box;
    box.xi_minus = {-3.9, -2.1};
    box.xi_plus = {2.1, 3.9};
    box.t = {-0.5, 0.5};
    box.xi_plus0 = 3.0;
    CHECK_NOTHROW(validate_box(g, box));
    CHECK(box.cell_count() == 4);
    CHECK(box.contains({BoundaryPoint(-3.0), BoundaryPoint(3.0), 0.0}));
    CHECK_FALSE(box.contains({BoundaryPoint(-3.0), BoundaryPoint(3.0), 0.6}));
    CHECK(box.cell({BoundaryPoint(-3.5), BoundaryPoint(3.0), -0.4}) == 0);
    CHECK(box.cell({BoundaryPoint(-2.5), BoundaryPoint(3.0), 0.4}) == 3);

    FlowBox bad = box;
    bad.t = {-4.0, 4.0}; // reaches into the disks
    CHECK_THROWS_AS(validate_box(g, bad), InvalidInput);
    bad = box;
    bad.xi_plus0 = 5.0;
    CHECK_THROWS_AS(validate_box(g, bad), InvalidInput);

    const FlowBox slid = slide_box(box, 0.0);
    CHECK(slid.xi_plus.lo == doctest::Approx(box.xi_plus.lo));
    CHECK(slid.xi_plus.hi == doctest::Approx(box.xi_plus.hi));
}

TEST_CASE("BM and BR transverse measures of a box are proportional") {
    const auto& g = fx().group;
    FlowBox box;
    box.xi_minus = {-3.9, -2.1};
    box.xi_plus = {2.1, 3.9};
    box.t = {-0.5, 0.5};
    box.xi_plus0 = 3.0;
    validate_box(g, box);
    const auto bm = bm_quadrature(g, fx().coarse, kDelta, fx().window);
    const auto br = br_quadrature(g, fx().coarse, discretize_lebesgue(kBasePoint, 512), kDelta, fx().window);
    const auto tb = transverse_decompose(box, bm, fx().coarse);
    const auto tr = transverse_decompose(box, br, fx().coarse);
    REQUIRE(tb.size() == 4);
    double sb = 0.0, sr = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        sb += tb[i];
        sr += tr[i];
    }
    REQUIRE(sb > 0.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(tr[i] / sr == doctest::Approx(tb[i] / sb).epsilon(0.02));

    FlowBox thin_shell = box;
    thin_shell.r0 = 2000.0; // the shell swallows the box
    CHECK_THROWS_AS(transverse_decompose(thin_shell, bm, fx().coarse), LeakyBox);
}
