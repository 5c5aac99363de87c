// Pixelated two-phase unit cells with enforced D4 symmetry.
//
// A cell of resolution n (even) is stored as its irreducible pixel vector:
// the T(n) = (n/2)(n/2+1)/2 pixels (r,c) with 0 <= r <= c <= n/2-1, ordered
// lexicographically. Bit 0 = soft phase, bit 1 = stiff phase. The full n x n
// grid is reconstructed by reflecting across the horizontal, vertical and
// diagonal symmetry axes.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gapminer {

// Dense binary pixel grid (row-major), the expanded form of a UnitCell.
struct Grid {
    int n = 0;
    std::vector<uint8_t> v;  // n*n entries in {0,1}

    Grid() = default;
    Grid(int side, uint8_t fill = 0) : n(side), v(static_cast<std::size_t>(side) * side, fill) {}

    uint8_t at(int i, int j) const { return v[static_cast<std::size_t>(i) * n + j]; }
    uint8_t& at(int i, int j) { return v[static_cast<std::size_t>(i) * n + j]; }

    bool operator==(const Grid& o) const = default;
};

class SymmetryViolation : public std::runtime_error {
public:
    SymmetryViolation(int r0, int c0, int r1, int c1);
    int r0, c0, r1, c1;  // first violating pixel pair
};

// Number of irreducible pixels at resolution n.
constexpr int irreducible_count(int n) {
    int h = n / 2;
    return h * (h + 1) / 2;
}

// Lexicographic index of the canonical pair (r,c), r <= c <= n/2-1.
// Coordinates are canonicalized by swapping so r <= c; out-of-range rejected.
int irreducible_index(int n, int r, int c);

// Inverse of irreducible_index: the canonical pair (r, c) of pixel k.
std::pair<int, int> irreducible_coords(int n, int k);

// Canonical irreducible pixel for full-grid coordinates (i,j): fold both
// coordinates into the lower half, then sort the pair.
std::pair<int, int> canonical_pixel(int n, int i, int j);

class UnitCell {
public:
    explicit UnitCell(int resolution);  // all pixels soft
    UnitCell(int resolution, std::vector<uint8_t> irreducible);

    int resolution() const { return n_; }
    const std::vector<uint8_t>& irreducible() const { return bits_; }

    uint8_t irreducible_bit(int index) const { return bits_[static_cast<std::size_t>(index)]; }
    void set_irreducible(int index, uint8_t phase);

    // Integer id: irreducible bits read with index 0 as least-significant bit.
    // Only defined while the vector fits in 64 bits (n <= 20).
    uint64_t design_id() const;
    static UnitCell from_design_id(int resolution, uint64_t id);

    // Irreducible bits as a '0'/'1' string, index 0 first.
    std::string bit_string() const;
    static UnitCell from_bit_string(int resolution, const std::string& bits);
    // Resolution inferred from the string length (must be a triangular count).
    static UnitCell from_bit_string(const std::string& bits);

    Grid expand() const;

    // Inverse of expand; throws SymmetryViolation for grids that are not
    // D4-symmetric.
    static UnitCell reduce(const Grid& m);

    // Each pixel becomes a factor x factor block of the same phase.
    UnitCell refine(int factor) const;

    int stiff_count_full() const;  // stiff pixels in the expanded grid

    bool operator==(const UnitCell& o) const = default;

private:
    int n_;
    std::vector<uint8_t> bits_;
};

// Physical description shared by the dispersion and dataset layers.
struct PhysicalConfig {
    double cell_side = 0.1;      // m
    double e_soft = 2e9;         // Pa
    double rho_soft = 1000.0;    // kg/m^3
    double e_stiff = 200e9;      // Pa
    double rho_stiff = 8000.0;   // kg/m^3
    double poisson_ratio = 0.3;  // shared by both phases
    bool plane_strain = true;

    void validate() const;
};

}  // namespace gapminer
