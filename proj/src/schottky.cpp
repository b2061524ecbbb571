#include "horolab/schottky.hpp"

#include "horolab/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

namespace horolab {

bool Disk::contains(const HPoint& z) const {
    return std::hypot(z.x - center, z.y) < radius;
}

bool Disk::contains(const BoundaryPoint& xi) const {
    return !xi.is_infinite() && std::abs(xi.value() - center) < radius;
}

double Disk::boundary_distance(const HPoint& z) const {
    return std::abs(std::hypot(z.x - center, z.y) - radius);
}

double Disk::boundary_distance(const BoundaryPoint& xi) const {
    if (xi.is_infinite()) return std::numeric_limits<double>::infinity();
    return std::abs(std::abs(xi.value() - center) - radius);
}

std::string to_string(const Word& w) {
    if (w.empty()) return "e";
    std::ostringstream os;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) os << ' ';
        os << 'g' << (w[i].generator + 1);
        if (w[i].inverse) os << "^-1";
    }
    return os.str();
}

Word parse_word(const std::string& text) {
    Word w;
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) {
        if (tok == "e") continue;
        if (tok.size() < 2 || tok[0] != 'g') throw InvalidInput("bad word token: " + tok);
        Letter l;
        const auto caret = tok.find('^');
        l.generator = std::stoi(tok.substr(1, caret == std::string::npos ? std::string::npos : caret - 1)) - 1;
        if (caret != std::string::npos) {
            if (tok.substr(caret) != "^-1") throw InvalidInput("bad word token: " + tok);
            l.inverse = true;
        }
        if (l.generator < 0) throw InvalidInput("bad word token: " + tok);
        w.push_back(l);
    }
    return w;
}

bool is_reduced(const Word& w) {
    for (std::size_t i = 1; i < w.size(); ++i) {
        if (w[i] == w[i - 1].inverted()) return false;
    }
    return true;
}

SchottkyData::SchottkyData(std::vector<Generator> generators) : generators_(std::move(generators)) {
    if (generators_.size() < 2) {
        throw InvalidInput("Schottky group needs at least two generators (non-elementary)");
    }
    std::vector<Disk> disks;
    for (const auto& g : generators_) {
        if (!(g.minus.radius > 0.0) || !(g.plus.radius > 0.0)) {
            throw InvalidInput("disk radii must be positive");
        }
        disks.push_back(g.minus);
        disks.push_back(g.plus);
    }
    for (std::size_t i = 0; i < disks.size(); ++i) {
        for (std::size_t j = i + 1; j < disks.size(); ++j) {
            if (!(std::abs(disks[i].center - disks[j].center) > disks[i].radius + disks[j].radius)) {
                throw InvalidInput("Schottky disks must be pairwise disjoint");
            }
        }
    }
    for (std::size_t i = 0; i < generators_.size(); ++i) {
        const auto& g = generators_[i];
        const double scale = std::max(1.0, g.plus.radius);
        for (int k = 0; k <= 16; ++k) {
            const double angle = std::numbers::pi * (k + 0.5) / 17.0;
            const HPoint z(g.minus.center + g.minus.radius * std::cos(angle),
                           g.minus.radius * std::sin(angle));
            const HPoint w = g.matrix.apply(z);
            if (std::abs(std::hypot(w.x - g.plus.center, w.y) - g.plus.radius) > 1e-9 * scale) {
                throw InvalidInput("generator " + std::to_string(i + 1) +
                                   " does not map the circle of disk_minus onto disk_plus");
            }
        }
        if (!g.plus.contains(g.matrix.apply(BoundaryPoint::infinity()))) {
            throw InvalidInput("generator " + std::to_string(i + 1) +
                               " must map the exterior of disk_minus into disk_plus");
        }
        letter_matrices_.push_back(g.matrix);
        letter_matrices_.push_back(g.matrix.inverse());
    }
}

const GroupElement& SchottkyData::letter_matrix(const Letter& l) const {
    return letter_matrices_.at(static_cast<std::size_t>(l.code()));
}

const Disk& SchottkyData::letter_disk(const Letter& l) const {
    const auto& g = generators_.at(static_cast<std::size_t>(l.generator));
    return l.inverse ? g.minus : g.plus;
}

GroupElement SchottkyData::word_matrix(const Word& w) const {
    GroupElement m;
    for (const auto& l : w) m = m * letter_matrix(l);
    return m;
}

bool SchottkyData::in_domain(const HPoint& z) const {
    for (const auto& g : generators_) {
        if (g.minus.contains(z) || g.plus.contains(z)) return false;
    }
    return true;
}

BoundaryPoint SchottkyData::attracting_fixed_point(const Letter& l) const {
    // Fixed points solve c z^2 + (d - a) z - b = 0; the attracting one has
    // |c z + d| > 1 (derivative 1/(cz+d)^2 < 1).
    const GroupElement& m = letter_matrix(l);
    if (m.c() == 0.0) {
        return m.a() > m.d() ? BoundaryPoint::infinity() : BoundaryPoint(m.b() / (m.d() - m.a()));
    }
    const double p = m.d() - m.a();
    const double disc = std::sqrt(p * p + 4.0 * m.b() * m.c());
    // Two roots, each computed without cancellation.
    const double q = -0.5 * (p + std::copysign(disc, p));
    const double r1 = q / m.c();
    const double r2 = -m.b() / q;
    auto gain = [&](double z) { return std::abs(m.c() * z + m.d()); };
    return BoundaryPoint(gain(r1) > gain(r2) ? r1 : r2);
}

Generator disk_pairing(const Disk& minus, const Disk& plus) {
    const double c1 = minus.center, c2 = plus.center;
    const double k = minus.radius * plus.radius;
    return {GroupElement(c2, -c1 * c2 - k, 1.0, -c1), minus, plus};
}

namespace {

Disk invert_disk(const Disk& d) {
    // Image under z -> -1/z of a disk not containing 0.
    const double a = -1.0 / (d.center - d.radius);
    const double b = -1.0 / (d.center + d.radius);
    return {(a + b) / 2.0, std::abs(a - b) / 2.0};
}

SchottkyData symmetric_pair(const Disk& minus, const Disk& plus) {
    const Generator g1 = disk_pairing(minus, plus);
    const GroupElement s = GroupElement::flip();
    Generator g2{s * g1.matrix * s.inverse(), invert_disk(minus), invert_disk(plus)};
    return SchottkyData({g1, g2});
}

} // namespace

std::vector<std::string> preset_names() { return {"default", "thin", "asym"}; }

SchottkyData make_preset(const std::string& name) {
    if (name == "default") return symmetric_pair({-3.0, 1.0}, {3.0, 1.0});
    if (name == "thin") return symmetric_pair({-3.0, 0.5}, {3.0, 0.5});
    if (name == "asym") return symmetric_pair({-3.0, 1.0}, {3.0, 0.6});
    throw ConfigError("unknown preset: " + name);
}

std::string to_json(const SchottkyData& group) {
    nlohmann::json j;
    j["generators"] = nlohmann::json::array();
    for (const auto& g : group.generators()) {
        j["generators"].push_back({
            {"matrix", {g.matrix.a(), g.matrix.b(), g.matrix.c(), g.matrix.d()}},
            {"disk_minus", {{"center", g.minus.center}, {"radius", g.minus.radius}}},
            {"disk_plus", {{"center", g.plus.center}, {"radius", g.plus.radius}}},
        });
    }
    return j.dump(2);
}

SchottkyData schottky_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        std::vector<Generator> gens;
        for (const auto& g : j.at("generators")) {
            const auto& m = g.at("matrix");
            if (m.size() != 4) throw InvalidInput("matrix needs four entries");
            gens.push_back({GroupElement(m[0].get<double>(), m[1].get<double>(),
                                         m[2].get<double>(), m[3].get<double>()),
                            {g.at("disk_minus").at("center").get<double>(),
                             g.at("disk_minus").at("radius").get<double>()},
                            {g.at("disk_plus").at("center").get<double>(),
                             g.at("disk_plus").at("radius").get<double>()}});
        }
        return SchottkyData(std::move(gens));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed Schottky JSON: ") + e.what());
    }
}

void enumerate_words(const SchottkyData& group, int max_length,
                     const std::function<void(const Word&, const GroupElement&)>& visit) {
    if (max_length < 0) return;
    for_each_word(group, max_length, visit);
}

std::uint64_t word_count(std::size_t rank, int length) {
    if (length == 0) return 1;
    std::uint64_t n = 2 * rank;
    for (int i = 1; i < length; ++i) n *= 2 * rank - 1;
    return n;
}

Reduction reduce_to_domain(const SchottkyData& group, const GroupElement& frame) {
    Reduction out{frame, {}};
    const auto& gens = group.generators();
    for (std::size_t step = 0; step <= kMaxReductionSteps; ++step) {
        const HPoint p = out.frame.base_point();
        const Letter* hit = nullptr;
        Letter candidate;
        for (std::size_t i = 0; i < gens.size(); ++i) {
            for (bool inv : {false, true}) {
                const Disk& d = inv ? gens[i].minus : gens[i].plus;
                if (d.boundary_distance(p) < kBoundaryTolerance) {
                    throw AmbiguousBoundary("base point within tolerance of a disk boundary");
                }
                if (d.contains(p)) {
                    candidate = {static_cast<int>(i), inv};
                    hit = &candidate;
                }
            }
        }
        if (!hit) return out;
        out.frame = group.letter_matrix(hit->inverted()) * out.frame;
        out.word.push_back(*hit);
    }
    throw NonTerminating("domain reduction exceeded the step limit");
}

std::optional<Word> code_boundary(const SchottkyData& group, const BoundaryPoint& xi, int depth) {
    if (depth < 1) throw InvalidInput("code_boundary: depth must be >= 1");
    if (xi.is_infinite()) return std::nullopt;
    long double x = xi.value();
    bool infinite = false;
    Word w;
    const auto& gens = group.generators();
    while (static_cast<int>(w.size()) < depth) {
        if (infinite) return std::nullopt;
        std::optional<Letter> hit;
        for (std::size_t i = 0; i < gens.size(); ++i) {
            for (bool inv : {false, true}) {
                const Disk& d = inv ? gens[i].minus : gens[i].plus;
                const long double off = std::abs(x - static_cast<long double>(d.center));
                if (std::abs(off - static_cast<long double>(d.radius)) < kBoundaryTolerance) {
                    throw AmbiguousBoundary("boundary point within tolerance of a disk edge");
                }
                if (off < d.radius) hit = Letter{static_cast<int>(i), inv};
            }
        }
        if (!hit) return std::nullopt;
        w.push_back(*hit);
        const GroupElement& m = group.letter_matrix(hit->inverted());
        const long double den = static_cast<long double>(m.c()) * x + m.d();
        if (den == 0.0L) {
            infinite = true;
        } else {
            x = (static_cast<long double>(m.a()) * x + m.b()) / den;
        }
    }
    return w;
}

bool is_radial(const SchottkyData& group, const HopfCoord& h, int depth) {
    return code_boundary(group, h.xi_minus, depth).has_value();
}

} // namespace horolab
