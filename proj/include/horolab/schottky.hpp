#pragma once

// Schottky groups acting on the upper half-plane by ping-pong on paired
// half-disks centered on the real axis. The fundamental domain is the common
// exterior of the 2m half-disks.

#include "horolab/hypgeom.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace horolab {

/// Half-disk {|z - center| < radius} in H, or the interval it cuts on R.
struct Disk {
    double center = 0.0;
    double radius = 1.0;

    bool contains(const HPoint& z) const;
    bool contains(const BoundaryPoint& xi) const;
    /// Euclidean distance from z to the bounding semicircle.
    double boundary_distance(const HPoint& z) const;
    double boundary_distance(const BoundaryPoint& xi) const;
};

struct Generator {
    GroupElement matrix;
    Disk minus; ///< exterior of `minus` is mapped onto the interior of `plus`
    Disk plus;
};

/// Letter g_i^{+1} or g_i^{-1}; encoded as 2*i (+) or 2*i+1 (-).
struct Letter {
    int generator = 0;
    bool inverse = false;

    int code() const { return 2 * generator + (inverse ? 1 : 0); }
    static Letter from_code(int code) { return {code / 2, (code % 2) != 0}; }
    Letter inverted() const { return {generator, !inverse}; }

    friend bool operator==(const Letter&, const Letter&) = default;
};

using Word = std::vector<Letter>;

/// "g1 g2^-1 ..." with 1-based generator indices; "e" for the empty word.
std::string to_string(const Word& w);
Word parse_word(const std::string& text);
bool is_reduced(const Word& w);

class SchottkyData {
public:
    /// Validates disjointness of the 2m disks, the mapping property and m >= 2.
    /// Throws InvalidInput on failure.
    explicit SchottkyData(std::vector<Generator> generators);

    std::size_t rank() const { return generators_.size(); }
    const std::vector<Generator>& generators() const { return generators_; }

    /// Matrix of a letter.
    const GroupElement& letter_matrix(const Letter& l) const;
    /// Disk containing the image of the letter, i.e. D_i^+ for g_i, D_i^- for g_i^{-1}.
    const Disk& letter_disk(const Letter& l) const;

    GroupElement word_matrix(const Word& w) const;

    /// Point of H outside all disks (boundary tolerance ignored).
    bool in_domain(const HPoint& z) const;

    /// Attracting fixed point of a letter's matrix.
    BoundaryPoint attracting_fixed_point(const Letter& l) const;

private:
    std::vector<Generator> generators_;
    std::vector<GroupElement> letter_matrices_;
};

/// Generator exchanging the two disks by z -> c2 - r1 r2 / (z - c1).
Generator disk_pairing(const Disk& minus, const Disk& plus);

/// Named presets: "default" (c = 3, r = 1), "thin" (r = 0.5), "asym".
/// The second generator is the conjugate of the first by z -> -1/z.
SchottkyData make_preset(const std::string& name);
std::vector<std::string> preset_names();

/// JSON: {"generators":[{"matrix":[a,b,c,d],"disk_minus":{...},"disk_plus":{...}}]}
std::string to_json(const SchottkyData& group);
SchottkyData schottky_from_json(const std::string& text);

inline constexpr double kBoundaryTolerance = 1e-9;
inline constexpr std::size_t kMaxReductionSteps = 1000000;

/// Visits every reduced word of length <= max_length exactly once, in
/// lexicographic order of letter codes (a prefix precedes its extensions).
void enumerate_words(const SchottkyData& group, int max_length,
                     const std::function<void(const Word&, const GroupElement&)>& visit);

/// Same traversal restricted to the words starting with `first` (the empty
/// word is not visited). Subtrees of distinct first letters partition the
/// nonempty words, which is how enumeration is split across workers.
template <class Visit>
void for_each_word_from(const SchottkyData& group, Letter first, int max_length, Visit&& visit);

template <class Visit>
void for_each_word(const SchottkyData& group, int max_length, Visit&& visit) {
    visit(Word{}, GroupElement::identity());
    const int letters = static_cast<int>(2 * group.rank());
    for (int code = 0; code < letters; ++code) {
        for_each_word_from(group, Letter::from_code(code), max_length, visit);
    }
}

/// Number of reduced words of length exactly `length`.
std::uint64_t word_count(std::size_t rank, int length);

struct Reduction {
    GroupElement frame; ///< F0 with base point in the fundamental domain
    Word word;          ///< F = gamma_word * F0
};

/// Ping-pong reduction: while the base point lies in a disk, apply the inverse
/// of the letter owning that disk. Throws AmbiguousBoundary / NonTerminating.
Reduction reduce_to_domain(const SchottkyData& group, const GroupElement& frame);

/// Itinerary of xi under the expanding ping-pong map, or nullopt when an
/// iterate leaves every disk (xi not in the limit set at this depth).
/// Iterates in extended precision; throws AmbiguousBoundary.
std::optional<Word> code_boundary(const SchottkyData& group, const BoundaryPoint& xi, int depth);

bool is_radial(const SchottkyData& group, const HopfCoord& h, int depth);

template <class Visit>
void for_each_word_from(const SchottkyData& group, Letter first, int max_length, Visit&& visit) {
    if (max_length < 1) return;
    const int letters = static_cast<int>(2 * group.rank());
    Word word{first};
    std::vector<GroupElement> stack{group.letter_matrix(first)};
    std::vector<int> next{0};
    visit(word, stack.back());
    while (!next.empty()) {
        int& code = next.back();
        if (static_cast<int>(word.size()) >= max_length || code >= letters) {
            word.pop_back();
            stack.pop_back();
            next.pop_back();
            continue;
        }
        const Letter l = Letter::from_code(code++);
        if (l == word.back().inverted()) continue;
        word.push_back(l);
        stack.push_back(stack.back() * group.letter_matrix(l));
        next.push_back(0);
        visit(word, stack.back());
    }
}

} // namespace horolab
