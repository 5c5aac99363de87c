#include "gapminer/unitcell.hpp"

#include <algorithm>

namespace gapminer {

SymmetryViolation::SymmetryViolation(int r0_, int c0_, int r1_, int c1_)
    : std::runtime_error("grid is not D4-symmetric: pixel (" + std::to_string(r0_) + "," +
                         std::to_string(c0_) + ") differs from its image (" + std::to_string(r1_) +
                         "," + std::to_string(c1_) + ")"),
      r0(r0_), c0(c0_), r1(r1_), c1(c1_) {}

static void check_resolution(int n) {
    if (n < 2 || n % 2 != 0) {
        throw std::invalid_argument("resolution must be a positive even integer, got " +
                                    std::to_string(n));
    }
}

int irreducible_index(int n, int r, int c) {
    check_resolution(n);
    const int h = n / 2;
    if (r > c) std::swap(r, c);
    if (r < 0 || c >= h) {
        throw std::out_of_range("irreducible coordinates out of range: (" + std::to_string(r) +
                                "," + std::to_string(c) + ") for n=" + std::to_string(n));
    }
    // Row r starts after rows 0..r-1, which hold h, h-1, ... pixels each.
    return r * h - r * (r - 1) / 2 + (c - r);
}

std::pair<int, int> irreducible_coords(int n, int k) {
    check_resolution(n);
    const int h = n / 2;
    if (k < 0 || k >= irreducible_count(n)) {
        throw std::out_of_range("irreducible pixel index out of range: " + std::to_string(k) +
                                " for n=" + std::to_string(n));
    }
    for (int r = 0; r < h; ++r) {
        const int row_len = h - r;
        if (k < row_len) return {r, r + k};
        k -= row_len;
    }
    throw std::logic_error("irreducible pixel index walked past the wedge");
}

std::pair<int, int> canonical_pixel(int n, int i, int j) {
    int r = std::min(i, n - 1 - i);
    int c = std::min(j, n - 1 - j);
    if (r > c) std::swap(r, c);
    return {r, c};
}

UnitCell::UnitCell(int resolution)
    : UnitCell(resolution,
               std::vector<uint8_t>(resolution >= 2
                                        ? static_cast<std::size_t>(irreducible_count(resolution))
                                        : 0)) {}

UnitCell::UnitCell(int resolution, std::vector<uint8_t> irreducible)
    : n_(resolution), bits_(std::move(irreducible)) {
    check_resolution(n_);
    const std::size_t want = static_cast<std::size_t>(irreducible_count(n_));
    if (bits_.size() != want) {
        throw std::invalid_argument("irreducible vector has length " +
                                    std::to_string(bits_.size()) + ", expected " +
                                    std::to_string(want) + " for n=" + std::to_string(n_));
    }
    for (auto& b : bits_) b = b ? 1 : 0;
}

uint64_t UnitCell::design_id() const {
    if (bits_.size() > 64) throw std::domain_error("design id undefined for more than 64 irreducible pixels");
    uint64_t id = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) id |= (1ull << i);
    }
    return id;
}

UnitCell UnitCell::from_design_id(int resolution, uint64_t id) {
    check_resolution(resolution);
    const int t = irreducible_count(resolution);
    if (t > 64) throw std::domain_error("design id undefined for more than 64 irreducible pixels");
    if (t < 64 && (id >> t) != 0) {
        throw std::out_of_range("design id " + std::to_string(id) + " exceeds 2^" +
                                std::to_string(t) + " - 1");
    }
    std::vector<uint8_t> bits(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) bits[static_cast<std::size_t>(i)] = (id >> i) & 1;
    return UnitCell(resolution, std::move(bits));
}

std::string UnitCell::bit_string() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s.push_back(b ? '1' : '0');
    return s;
}

UnitCell UnitCell::from_bit_string(int resolution, const std::string& bits) {
    std::vector<uint8_t> v;
    v.reserve(bits.size());
    for (char c : bits) {
        if (c != '0' && c != '1') throw std::invalid_argument("bit string must contain only 0/1");
        v.push_back(c == '1');
    }
    return UnitCell(resolution, std::move(v));
}

UnitCell UnitCell::from_bit_string(const std::string& bits) {
    // Invert h(h+1)/2 = len to recover the resolution n = 2h.
    for (int n = 2; n <= 256; n += 2) {
        std::size_t t = static_cast<std::size_t>(irreducible_count(n));
        if (t == bits.size()) return from_bit_string(n, bits);
        if (t > bits.size()) break;
    }
    throw std::invalid_argument("bit string length " + std::to_string(bits.size()) +
                                " is not an irreducible pixel count");
}

void UnitCell::set_irreducible(int index, uint8_t phase) {
    bits_.at(static_cast<std::size_t>(index)) = phase ? 1 : 0;
}

Grid UnitCell::expand() const {
    Grid m(n_);
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) {
            auto [r, c] = canonical_pixel(n_, i, j);
            m.at(i, j) = bits_[static_cast<std::size_t>(irreducible_index(n_, r, c))];
        }
    }
    return m;
}

UnitCell UnitCell::reduce(const Grid& m) {
    check_resolution(m.n);
    const int n = m.n;
    std::vector<uint8_t> bits(static_cast<std::size_t>(irreducible_count(n)));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            auto [r, c] = canonical_pixel(n, i, j);
            uint8_t want = m.at(r, c);
            if (m.at(i, j) != want) throw SymmetryViolation(r, c, i, j);
            bits[static_cast<std::size_t>(irreducible_index(n, r, c))] = want;
        }
    }
    return UnitCell(n, std::move(bits));
}

UnitCell UnitCell::refine(int factor) const {
    if (factor < 1) throw std::invalid_argument("refine factor must be >= 1");
    if (factor == 1) return *this;
    const int m = n_ * factor;
    std::vector<uint8_t> bits(static_cast<std::size_t>(irreducible_count(m)));
    const int hm = m / 2;
    for (int r = 0; r < hm; ++r) {
        for (int c = r; c < hm; ++c) {
            // The fine pixel (r,c) sits inside coarse pixel (r/f, c/f), which
            // is already canonical because r <= c is preserved by division.
            int cr = r / factor;
            int cc = c / factor;
            bits[static_cast<std::size_t>(irreducible_index(m, r, c))] =
                bits_[static_cast<std::size_t>(irreducible_index(n_, cr, cc))];
        }
    }
    return UnitCell(m, std::move(bits));
}

int UnitCell::stiff_count_full() const {
    Grid m = expand();
    int count = 0;
    for (auto b : m.v) count += b;
    return count;
}

void PhysicalConfig::validate() const {
    if (!(cell_side > 0)) throw std::invalid_argument("cell side must be positive");
    if (!(e_soft > 0) || !(e_stiff > 0)) throw std::invalid_argument("elastic moduli must be positive");
    if (!(rho_soft > 0) || !(rho_stiff > 0)) throw std::invalid_argument("densities must be positive");
    if (!(poisson_ratio > 0.0) || !(poisson_ratio < 0.5)) {
        throw std::invalid_argument("poisson ratio must lie in (0, 0.5)");
    }
}

}  // namespace gapminer
