// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include "horolab/errors.hpp"
#include "horolab/harness.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace horolab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ExperimentConfig config(const std::string& experiment) {
    ExperimentConfig c;
    c.experiment = experiment;
    c.out = (fs::temp_directory_path() / ("horolab-acceptance-" + experiment)).string();
    return c;
}

// ---------------------------------------------------------------------------

Verdict geometry() {
    std::mt19937_64 rng(101);
    double cocycle = 0.0, equiv = 0.0, hopf = 0.0, conj = 0.0, limit = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const HPoint x = testing::random_point(rng), y = testing::random_point(rng), z = testing::random_point(rng);
        const BoundaryPoint xi(testing::uniform(rng, -4.0, 4.0));
        cocycle = std::max(cocycle, std::abs(busemann(xi, x, z) - busemann(xi, x, y) - busemann(xi, y, z)));
        // Busemann as a limit of distance differences along the vertical above xi.
        const HPoint far{xi.value(), 1e-9};
        limit = std::max(limit, std::abs(busemann(xi, x, y) - (testing::ref_dist(x, far) - testing::ref_dist(y, far))));

        const GroupElement g = testing::random_frame(rng);
        equiv = std::max(equiv, std::abs(busemann(g.apply(xi), g.apply(x), g.apply(y)) - busemann(xi, x, y)));
        equiv = std::max(equiv, std::abs(dist(g.apply(x), g.apply(y)) - testing::ref_dist(x, y)));

        const GroupElement f = testing::random_frame(rng);
        hopf = std::max(hopf, max_entry_gap(hopf_to_frame(frame_to_hopf(f)), f));

        const double t = testing::uniform(rng, -3.0, 3.0), s = testing::uniform(rng, -3.0, 3.0);
        conj = std::max(conj, max_entry_gap(GroupElement::geodesic(t) * GroupElement::horocycle(s) *
                                                GroupElement::geodesic(-t),
                                            GroupElement::horocycle(s * std::exp(-t))));
    }
    const double worst = std::max({cocycle, equiv, hopf, conj, limit});
    std::ostringstream d;
    d << "max abs err: cocycle " << fmt("%.1e", cocycle) << ", limit " << fmt("%.1e", limit) << ", equivariance "
      << fmt("%.1e", equiv) << ", hopf " << fmt("%.1e", hopf) << ", conjugation " << fmt("%.1e", conj)
      << " (tol 1e-9)";
    return {worst <= 1e-9, d.str()};
}

Verdict lebesgue_conformality() {
    std::mt19937_64 rng(103);
    double worst = 0.0;
    auto ratio = [](const HPoint& x, const HPoint& y, double xi, double h) {
        const HPoint z{xi, h};
        return std::exp(testing::ref_dist(x, z) - testing::ref_dist(y, z));
    };
    for (int i = 0; i < 1000; ++i) {
        const HPoint x = testing::random_point(rng), y = testing::random_point(rng);
        const double xi = testing::uniform(rng, -5.0, 5.0);
        // Richardson step on the O(h) limit along the vertical.
        const double h = 1e-8;
        const double oracle = 2.0 * ratio(x, y, xi, h / 2) - ratio(x, y, xi, h);
        const double v = lebesgue_density(x, y, BoundaryPoint(xi));
        worst = std::max(worst, std::abs(v - oracle) / oracle);
    }
    return {worst <= 1e-6, "max rel err over 1000 triples " + fmt("%.2e", worst) + " (tol 1e-6)"};
}

Verdict ps_conformality() {
    auto c = config("conformality");
    c.k = 12;
    const auto rows = run_experiment(c);
    std::map<int, double> med;
    for (const auto& r : rows) {
        if (r.phi_id.rfind("cocycle_median_k", 0) == 0) med[std::stoi(r.phi_id.substr(16))] = r.value;
    }
    const bool ok = med.count(10) && med.count(12) && med.count(14) && med[12] <= 0.05 && med[14] <= med[10];
    std::ostringstream d;
    d << "median deviation k=10 " << fmt("%.2e", med[10]) << ", k=12 " << fmt("%.2e", med[12]) << " (tol 0.05), k=14 "
      << fmt("%.2e", med[14]) << " (<= k=10)";
    return {ok, d.str()};
}

Verdict delta_agreement() {
    bool ok = true;
    std::ostringstream d;
    std::map<std::string, double> value;
    for (const auto& name : preset_names()) {
        const auto e = estimate_delta(make_preset(name), 12);
        const double gap = std::abs(e.counting - e.bisection) / e.bisection;
        ok = ok && gap <= 0.02;
        value[name] = e.value;
        d << name << " counting " << fmt("%.4f", e.counting) << " bisection " << fmt("%.4f", e.bisection) << " gap "
          << fmt("%.2f%%", 100 * gap) << "; ";
    }
    ok = ok && value.at("thin") < value.at("default");
    d << "thin < default: " << (value.at("thin") < value.at("default") ? "yes" : "no");
    return {ok, d.str()};
}

Verdict invariances() {
    const auto bm = run_experiment(config("bm-invariance"));
    const auto br = run_experiment(config("br-invariance"));
    double a_inv = 0.0, n_inv = 0.0, quasi = 0.0, flip = 0.0;
    for (const auto& r : bm) {
        if (r.psi_id == "geodesic") a_inv = std::max(a_inv, r.rel_err);
        if (r.psi_id == "flip") flip = std::max(flip, r.rel_err);
    }
    for (const auto& r : br) {
        if (r.psi_id == "horocycle") n_inv = std::max(n_inv, r.rel_err);
        if (r.psi_id == "quasi_exponent") quasi = std::max(quasi, r.rel_err);
    }
    std::ostringstream d;
    d << "BM A-invariance max " << fmt("%.2f%%", 100 * a_inv) << " (tol 2%), BR N-invariance max "
      << fmt("%.2f%%", 100 * n_inv) << " (tol 3%), BR exponent vs delta-1 max " << fmt("%.2f%%", 100 * quasi)
      << " (tol 5%); info: BM flip " << fmt("%.2f%%", 100 * flip);
    return {a_inv <= 0.02 && n_inv <= 0.03 && quasi <= 0.05, d.str()};
}

double slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double xb = 0.0, yb = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xb += xs[i];
        yb += ys[i];
    }
    xb /= xs.size();
    yb /= ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - xb) * (ys[i] - yb);
        sxx += (xs[i] - xb) * (xs[i] - xb);
    }
    return sxy / sxx;
}

Verdict conditional_scaling() {
    const SchottkyData group = make_preset("default");
    const double delta = estimate_delta(group, 12).value;
    std::vector<double> us;
    for (int i = 0; i <= 6; ++i) us.push_back(0.5 * i);

    // Fixed F, radius e^u, averaged over F drawn from m_BM on the domain: by
    // A-invariance the mean of log mass is delta u plus a constant.
    const auto nu = build_ps_measure(group, kBasePoint, delta, 10);
    std::vector<double> w;
    for (const auto& a : nu.atoms) w.push_back(a.weight);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::mt19937_64 rng(107);
    std::vector<double> mean_log(us.size(), 0.0);
    double total = 0.0;
    double single_min = 1e9, single_max = -1e9;
    for (int used = 0; used < 2000;) {
        const auto& a = nu.atoms[pick(rng)];
        const auto& b = nu.atoms[pick(rng)];
        const auto range = domain_time_range(group, a.xi, b.xi);
        if (!range) continue;
        const double t = range->first + (range->second - range->first) * uniform01(rng);
        const GroupElement frame = hopf_to_frame({a.xi, b.xi, t});
        const HPoint p = frame.base_point();
        const double weight = (range->second - range->first) *
                              std::exp(delta * (busemann(a.xi, kBasePoint, p) + busemann(b.xi, kBasePoint, p)));
        const auto c = bm_conditional(frame, nu, delta, std::exp(us.back()), 0);
        std::vector<double> logs;
        for (double u : us) logs.push_back(std::log(c.mass(std::exp(u))));
        for (std::size_t i = 0; i < us.size(); ++i) mean_log[i] += weight * logs[i];
        total += weight;
        if (used < 3) {
            single_min = std::min(single_min, slope(us, logs));
            single_max = std::max(single_max, slope(us, logs));
        }
        ++used;
    }
    for (double& m : mean_log) m /= total;
    const double averaged = std::abs(slope(us, mean_log) - delta) / delta;

    // Homothety: the ball of radius e^u at F a_u against the unit ball at F.
    const auto fine = build_ps_measure(group, kBasePoint, delta, 12);
    double homothety = 0.0;
    for (int f = 0; f < 3; ++f) {
        const GroupElement frame = generic_frame(group, fine, rng, 12);
        std::vector<double> logs;
        for (double u : us) {
            const double r = std::exp(u);
            logs.push_back(std::log(bm_conditional(geodesic_flow(frame, u), fine, delta, r, 0).mass(r)));
        }
        homothety = std::max(homothety, std::abs(slope(us, logs) - delta) / delta);
    }
    std::ostringstream d;
    d << "delta " << fmt("%.6f", delta) << "; BM-averaged slope of log mass B(F, e^u) over 2000 frames rel err "
      << fmt("%.2e", averaged) << ", slope at F a_u with radius e^u rel err " << fmt("%.2e", homothety)
      << " (tol 5%); info: single-frame slopes [" << fmt("%.3f", single_min) << ", " << fmt("%.3f", single_max)
      << "]";
    return {averaged <= 0.05 && homothety <= 0.05, d.str()};
}

Verdict push_identity() {
    const auto rows = run_experiment(config("push-identity"));
    double grid = NAN, rebuild = NAN;
    for (const auto& r : rows) {
        if (r.phi_id == "max_grid") grid = r.value;
        if (r.phi_id == "max_rebuild") rebuild = r.value;
    }
    return {grid <= 1e-9 && rebuild <= 1e-9,
            "100 cases, max |diff| grid " + fmt("%.2e", grid) + ", rebuild " + fmt("%.2e", rebuild) + " (tol 1e-9)"};
}

Verdict equidistribution() {
    auto c = config("equidistribution");
    c.t = {2.0, 4.0, 6.0};
    const auto rows = run_experiment(c);
    std::map<std::string, std::vector<double>> gaps;
    for (const auto& r : rows) {
        if (r.frame_id == 0) gaps[r.phi_id].push_back(r.rel_err);
    }
    int monotone = 0, final_ok = 0;
    std::ostringstream d;
    for (const auto& [id, g] : gaps) {
        const bool dec = g.size() == 3 && g[0] > g[1] && g[1] > g[2];
        monotone += dec;
        final_ok += g.back() <= 0.10;
        d << id << " [" << fmt("%.3f", g[0]) << " " << fmt("%.3f", g[1]) << " " << fmt("%.3f", g[2]) << "] ";
    }
    d << "; decreasing " << monotone << "/5 (need 4), final <= 10% " << final_ok << "/5";
    return {monotone >= 4 && final_ok == static_cast<int>(gaps.size()), d.str()};
}

Verdict ratio_limit() {
    bool ok = true;
    std::ostringstream d;
    for (const std::string preset : {"default", "asym"}) {
        auto c = config("ratio-limit");
        c.preset = preset;
        c.r = {std::exp(6.0)};
        const auto rows = run_experiment(c);
        double spread = 0.0, err = 0.0;
        int nan = 0;
        for (const auto& r : rows) {
            const bool is_spread = r.psi_id.size() > 7 && r.psi_id.substr(r.psi_id.size() - 7) == ":spread";
            if (std::isnan(r.value)) {
                ++nan;
                continue;
            }
            if (is_spread) spread = std::max(spread, r.value);
            else err = std::max(err, r.rel_err);
        }
        ok = ok && nan == 0 && spread <= 0.10 && err <= 0.10;
        d << preset << ": max spread " << fmt("%.3f", spread) << ", max rel err vs BR " << fmt("%.3f", err)
          << ", undefined " << nan << "; ";
    }
    d << "(tol 10%)";
    return {ok, d.str()};
}

Verdict transverse() {
    auto c = config("transverse");
    c.r = {std::exp(6.0)};
    const auto rows = run_experiment(c);
    std::map<std::string, double> bm_mass;
    std::vector<double> br_err, emp_err;
    std::size_t crossings_min = SIZE_MAX, crossings_max = 0;
    for (const auto& r : rows) {
        if (r.psi_id == "BR_vs_BM") {
            bm_mass[r.phi_id] = r.target;
            if (r.target > 0.0) br_err.push_back(r.rel_err);
        }
    }
    for (const auto& r : rows) {
        if (r.psi_id != "empirical_vs_BM" || std::abs(r.r - std::exp(6.0)) > 1e-9) continue;
        crossings_min = std::min(crossings_min, r.atoms);
        crossings_max = std::max(crossings_max, r.atoms);
        if (bm_mass[r.phi_id] > 0.0) emp_err.push_back(r.rel_err);
    }
    const double emp = median(emp_err), br = median(br_err);
    std::ostringstream d;
    d << "empirical vs BM median rel err " << fmt("%.3f", emp) << " (tol 15%, " << crossings_min << "-"
      << crossings_max << " crossings per frame), BR vs BM median " << fmt("%.2e", br) << " (tol 10%)";
    return {emp <= 0.15 && br <= 0.10, d.str()};
}

Verdict annulus() {
    auto c = config("annulus");
    c.t = {2.0, 3.0, 4.0, 5.0, 6.0};
    c.r0 = 1.0;
    const auto rows = run_experiment(c);
    std::map<std::pair<int, std::string>, std::vector<double>> series;
    for (const auto& r : rows) series[{r.frame_id, r.weighting}].push_back(r.value);
    bool ok = true;
    std::ostringstream d;
    for (const auto& [key, v] : series) {
        bool dec = true;
        for (std::size_t i = 1; i < v.size(); ++i) {
            // Lebesgue error is strictly positive and must drop; PS may vanish.
            dec = dec && (key.second == "Lebesgue" ? v[i] < v[i - 1] : v[i] <= v[i - 1]);
        }
        ok = ok && dec && v.back() <= 0.1;
        if (key.first == 0) {
            d << key.second << " frame 0 [";
            for (double x : v) d << ' ' << fmt("%.3g", x);
            d << " ] ";
        }
    }
    d << "; " << series.size() << " series, final <= 0.1";
    return {ok, d.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict reproducibility() {
    bool ok = true;
    std::ostringstream d;
    for (const std::string name : {"push-identity", "bm-invariance"}) {
        auto c = config(name);
        std::ostringstream log;
        std::string bytes[2];
        for (int i = 0; i < 2; ++i) {
            c.out = (fs::temp_directory_path() / ("horolab-acceptance-repro-" + std::to_string(i))).string();
            fs::remove_all(c.out);
            if (run(c, log) != 0) ok = false;
            bytes[i] = slurp(fs::path(c.out) / "results.csv");
        }
        const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
        c.threads = 1;
        const auto one = run_experiment(c);
        c.threads = 4;
        const auto four = run_experiment(c);
        double drift = one.size() == four.size() ? 0.0 : INFINITY;
        for (std::size_t i = 0; i < std::min(one.size(), four.size()); ++i) {
            drift = std::max(drift, std::abs(one[i].value - four[i].value));
        }
        ok = ok && same && drift <= 1e-12;
        d << name << ": csv " << (same ? "identical" : "DIFFERS") << ", drift 1 vs 4 threads " << fmt("%.1e", drift)
          << "; ";
    }
    set_thread_count(1);
    d << "(tol 1e-12)";
    return {ok, d.str()};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, Verdict (*)()>> criteria{
        {"geometry exactness", geometry},
        {"Lebesgue conformality", lebesgue_conformality},
        {"PS conformality", ps_conformality},
        {"critical exponent agreement", delta_agreement},
        {"measure invariances", invariances},
        {"conditional scaling", conditional_scaling},
        {"push identity", push_identity},
        {"equidistribution", equidistribution},
        {"ratio limit", ratio_limit},
        {"transverse convergence", transverse},
        {"annulus error", annulus},
        {"reproducibility", reproducibility},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !v.pass;
        std::printf("criterion %2zu %s  %s: %s [%.1fs]\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    v.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
