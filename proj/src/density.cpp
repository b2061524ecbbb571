#include "horolab/density.hpp"

#include "horolab/errors.hpp"
#include "horolab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace horolab {

double AtomicBoundaryMeasure::total_mass() const {
    std::vector<double> w;
    w.reserve(atoms.size());
    for (const auto& a : atoms) w.push_back(a.weight);
    return pairwise_sum(w);
}

void AtomicBoundaryMeasure::sort_atoms() {
    std::sort(atoms.begin(), atoms.end(), [](const BoundaryAtom& l, const BoundaryAtom& r) {
        if (l.xi < r.xi) return true;
        if (r.xi < l.xi) return false;
        return l.source < r.source;
    });
}

std::uint64_t encode_word(const Word& w, std::size_t rank) {
    std::uint64_t code = 0, scale = 1;
    for (const auto& l : w) {
        code += static_cast<std::uint64_t>(l.code() + 1) * scale;
        scale *= 2 * rank + 1;
    }
    return code;
}

namespace {

// Runs `visit` on each first-letter subtree in parallel; `make` creates the
// per-subtree accumulator. Accumulators are returned in letter order.
template <class Acc, class Make, class Visit>
std::vector<Acc> per_subtree(const SchottkyData& group, int k, Make&& make, Visit&& visit) {
    const std::size_t letters = 2 * group.rank();
    std::vector<Acc> accs;
    accs.reserve(letters);
    for (std::size_t i = 0; i < letters; ++i) accs.push_back(make());
    parallel_for(letters, [&](std::size_t i) {
        for_each_word_from(group, Letter::from_code(static_cast<int>(i)), k,
                           [&](const Word& w, const GroupElement& g) { visit(accs[i], w, g); });
    });
    return accs;
}

double orbit_distance(const GroupElement& g) { return dist(kBasePoint, g.base_point()); }

} // namespace

double poincare_partial(const SchottkyData& group, double s, int k) {
    if (k < 0) throw InvalidInput("poincare_partial: k must be >= 0");
    if (s < 0.0) throw InvalidInput("poincare_partial: s must be >= 0");
    const auto sums = per_subtree<double>(
        group, k, [] { return 0.0; },
        [&](double& acc, const Word&, const GroupElement& g) {
            acc += std::exp(-s * orbit_distance(g));
        });
    double total = 1.0;
    for (double v : sums) total += v;
    return total;
}

std::vector<std::vector<double>> orbit_distances_by_level(const SchottkyData& group, int k) {
    using Levels = std::vector<std::vector<double>>;
    const auto parts = per_subtree<Levels>(
        group, k, [&] { return Levels(static_cast<std::size_t>(k) + 1); },
        [&](Levels& acc, const Word& w, const GroupElement& g) {
            acc[w.size()].push_back(orbit_distance(g));
        });
    Levels out(static_cast<std::size_t>(k) + 1);
    out[0].push_back(0.0);
    for (const auto& p : parts) {
        for (std::size_t l = 1; l < p.size(); ++l) out[l].insert(out[l].end(), p[l].begin(), p[l].end());
    }
    return out;
}

namespace {

double level_sum(const std::vector<double>& d, double s) {
    std::vector<double> terms(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) terms[i] = std::exp(-s * d[i]);
    return pairwise_sum(terms);
}

// s where sum_{level}/sum_{level-1} crosses one.
double ratio_crossing(const std::vector<std::vector<double>>& levels, std::size_t level) {
    double lo = 0.0, hi = 1.0;
    auto ratio = [&](double s) { return level_sum(levels[level], s) / level_sum(levels[level - 1], s); };
    while (ratio(hi) > 1.0) hi *= 2.0;
    for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ratio(mid) > 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace

DeltaEstimate estimate_delta(const SchottkyData& group, int k) {
    if (k < 6) throw InvalidInput("estimate_delta: k must be >= 6");
    const auto levels = orbit_distances_by_level(group, k);

    DeltaEstimate est;
    const double b_deep = ratio_crossing(levels, static_cast<std::size_t>(k));
    const double b_prev = ratio_crossing(levels, static_cast<std::size_t>(k) - 1);
    est.bisection = b_deep;

    // The ball count N(R) is complete below the shortest element of the last
    // level; fit log N(R) over the upper half of that range.
    std::vector<double> all;
    for (const auto& l : levels) all.insert(all.end(), l.begin(), l.end());
    std::sort(all.begin(), all.end());
    const double r_complete = *std::min_element(levels.back().begin(), levels.back().end());
    auto slope_on = [&](double from, double to) {
        constexpr int kSamples = 200;
        std::vector<double> rs, logs;
        for (int i = 0; i < kSamples; ++i) {
            const double r = from + (to - from) * i / (kSamples - 1);
            const auto n = std::upper_bound(all.begin(), all.end(), r) - all.begin();
            rs.push_back(r);
            logs.push_back(std::log(static_cast<double>(n)));
        }
        return fit_slope(rs, logs);
    };
    const double full = slope_on(0.5 * r_complete, r_complete);
    const double first = slope_on(0.5 * r_complete, 0.75 * r_complete);
    const double second = slope_on(0.75 * r_complete, r_complete);
    est.counting = full;

    const double lo_a = std::min({full, first, second});
    const double hi_a = std::max({full, first, second});
    const double lo_b = std::min(b_deep, b_prev);
    const double hi_b = std::max(b_deep, b_prev);
    if (hi_a < lo_b || hi_b < lo_a) {
        throw InsufficientDepth("critical exponent estimators disagree at k = " + std::to_string(k));
    }
    est.value = b_deep;
    est.method = DeltaEstimate::Method::SeriesBisection;
    est.lower = std::min(lo_a, lo_b);
    est.upper = std::max(hi_a, hi_b);
    return est;
}

AtomicBoundaryMeasure build_ps_measure(const SchottkyData& group, const HPoint& x, double delta,
                                       int k) {
    if (k < 1) throw InvalidInput("build_ps_measure: k must be >= 1");
    struct Part {
        std::vector<BoundaryAtom> atoms;
        std::vector<double> base_terms;
    };
    auto parts = per_subtree<Part>(
        group, k, [] { return Part{}; },
        [&](Part& acc, const Word& w, const GroupElement& g) {
            if (static_cast<int>(w.size()) != k) return;
            const HPoint q = g.base_point();
            acc.atoms.push_back({ray_endpoint(x, q), std::exp(-delta * dist(x, q)),
                                 encode_word(w, group.rank())});
            acc.base_terms.push_back(std::exp(-delta * dist(kBasePoint, q)));
        });
    std::vector<double> base_terms;
    AtomicBoundaryMeasure m;
    for (auto& p : parts) {
        base_terms.insert(base_terms.end(), p.base_terms.begin(), p.base_terms.end());
        m.atoms.insert(m.atoms.end(), p.atoms.begin(), p.atoms.end());
    }
    const double z = pairwise_sum(base_terms);
    for (auto& a : m.atoms) a.weight /= z;
    m.basepoint = x;
    m.exponent = delta;
    m.cutoff = k;
    m.sort_atoms();
    return m;
}

std::vector<double> ps_cocycle_deviations(const SchottkyData& group, const HPoint& x,
                                          const HPoint& y, double delta, int k) {
    auto parts = per_subtree<std::vector<double>>(
        group, k, [] { return std::vector<double>{}; },
        [&](std::vector<double>& acc, const Word& w, const GroupElement& g) {
            if (static_cast<int>(w.size()) != k) return;
            const HPoint q = g.base_point();
            const double log_ratio = -delta * (dist(y, q) - dist(x, q));
            const BoundaryPoint xi = ray_endpoint(x, q);
            acc.push_back(std::abs(log_ratio - delta * busemann(xi, x, y)));
        });
    std::vector<double> out;
    for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

double lebesgue_density(const HPoint& x, const HPoint& y, const BoundaryPoint& xi) {
    return std::exp(busemann(xi, x, y));
}

AtomicBoundaryMeasure discretize_lebesgue(const HPoint& x, int resolution) {
    if (resolution < 16) throw InvalidInput("discretize_lebesgue: resolution must be >= 16");
    const GroupElement g = frame_at(x);
    AtomicBoundaryMeasure m;
    m.basepoint = x;
    m.exponent = 1.0;
    m.cutoff = resolution;
    const double w = 2.0 * std::numbers::pi / resolution;
    for (int j = 0; j < resolution; ++j) {
        const double theta = 2.0 * std::numbers::pi * (j + 0.5) / resolution;
        m.atoms.push_back({g.apply(direction_from_o(theta)), w, static_cast<std::uint64_t>(j)});
    }
    m.sort_atoms();
    return m;
}

CylinderPartition::CylinderPartition(const SchottkyData& group, int depth) {
    if (depth < 1) throw InvalidInput("CylinderPartition: depth must be >= 1");
    struct Cyl {
        double lo, hi;
        Word w;
    };
    std::vector<Cyl> cyl;
    for_each_word(group, depth, [&](const Word& w, const GroupElement&) {
        if (static_cast<int>(w.size()) != depth) return;
        const Word prefix(w.begin(), w.end() - 1);
        const GroupElement g = group.word_matrix(prefix);
        const Disk& d = group.letter_disk(w.back());
        const double a = g.apply(BoundaryPoint(d.center - d.radius)).value();
        const double b = g.apply(BoundaryPoint(d.center + d.radius)).value();
        cyl.push_back({std::min(a, b), std::max(a, b), w});
    });
    std::sort(cyl.begin(), cyl.end(), [](const Cyl& l, const Cyl& r) { return l.lo < r.lo; });
    for (auto& c : cyl) {
        lo_.push_back(c.lo);
        hi_.push_back(c.hi);
        words_.push_back(std::move(c.w));
    }
}

std::size_t CylinderPartition::locate(const BoundaryPoint& xi) const {
    if (xi.is_infinite()) {
        // infinity is nearest to the outermost cylinders; pick the wider gap side
        return std::abs(lo_.front()) > std::abs(hi_.back()) ? 0 : size() - 1;
    }
    const double x = xi.value();
    const auto it = std::upper_bound(lo_.begin(), lo_.end(), x);
    if (it == lo_.begin()) return 0;
    const std::size_t i = static_cast<std::size_t>(it - lo_.begin()) - 1;
    if (x <= hi_[i] || i + 1 == size()) return i;
    return (x - hi_[i]) <= (lo_[i + 1] - x) ? i : i + 1;
}

std::vector<double> CylinderPartition::masses(const AtomicBoundaryMeasure& m) const {
    std::vector<double> out(size(), 0.0);
    for (const auto& a : m.atoms) out[locate(a.xi)] += a.weight;
    return out;
}

AtomicBoundaryMeasure coarsen(const AtomicBoundaryMeasure& m, const CylinderPartition& cylinders) {
    std::vector<std::vector<const BoundaryAtom*>> bins(cylinders.size());
    for (const auto& a : m.atoms) bins[cylinders.locate(a.xi)].push_back(&a);
    AtomicBoundaryMeasure out;
    out.basepoint = m.basepoint;
    out.exponent = m.exponent;
    out.cutoff = m.cutoff;
    for (std::size_t i = 0; i < bins.size(); ++i) {
        if (bins[i].empty()) continue;
        std::vector<double> w;
        for (const auto* a : bins[i]) w.push_back(a->weight);
        const double total = pairwise_sum(w);
        if (!(total > 0.0)) continue;
        double acc = 0.0;
        const BoundaryAtom* median = bins[i].back();
        for (const auto* a : bins[i]) {
            acc += a->weight;
            if (acc >= 0.5 * total) {
                median = a;
                break;
            }
        }
        out.atoms.push_back({median->xi, total, static_cast<std::uint64_t>(i)});
    }
    out.sort_atoms();
    return out;
}

void write_csv(std::ostream& os, const AtomicBoundaryMeasure& m) {
    os << std::setprecision(17);
    os << "# basepoint_x=" << m.basepoint.x << ",basepoint_y=" << m.basepoint.y
       << ",exponent=" << m.exponent << ",cutoff=" << m.cutoff << "\n";
    os << "xi,weight\n";
    for (const auto& a : m.atoms) {
        if (a.xi.is_infinite()) {
            os << "inf";
        } else {
            os << a.xi.value();
        }
        os << ',' << a.weight << "\n";
    }
}

AtomicBoundaryMeasure read_boundary_csv(std::istream& is) {
    AtomicBoundaryMeasure m;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0) {
        throw InvalidInput("boundary CSV: missing metadata line");
    }
    double bx = 0, by = 1;
    std::istringstream meta(line.substr(2));
    std::string field;
    while (std::getline(meta, field, ',')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw InvalidInput("boundary CSV: bad metadata field " + field);
        const std::string key = field.substr(0, eq);
        const double v = std::stod(field.substr(eq + 1));
        if (key == "basepoint_x") bx = v;
        else if (key == "basepoint_y") by = v;
        else if (key == "exponent") m.exponent = v;
        else if (key == "cutoff") m.cutoff = static_cast<int>(v);
    }
    m.basepoint = HPoint(bx, by);
    if (!std::getline(is, line) || line != "xi,weight") throw InvalidInput("boundary CSV: bad header");
    std::uint64_t idx = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw InvalidInput("boundary CSV: bad row " + line);
        const std::string xs = line.substr(0, comma);
        const BoundaryPoint xi = xs == "inf" ? BoundaryPoint::infinity() : BoundaryPoint(std::stod(xs));
        m.atoms.push_back({xi, std::stod(line.substr(comma + 1)), idx++});
    }
    return m;
}

} // namespace horolab
