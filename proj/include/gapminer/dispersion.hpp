#pragma once

// Bloch-Floquet dispersion analysis of a square two-phase unit cell.
//
// The cell is meshed with bilinear quadrilateral plane elements (2 dof per
// node, consistent mass, 2x2 Gauss quadrature). Periodicity is imposed by
// eliminating the right/top boundary dofs as phase-scaled copies of their
// left/bottom masters, u(x + a_n) = u(x) e^{-i gamma . a_n}, giving a
// Hermitian pencil (K(gamma), M(gamma)) whose lowest eigenvalues are the
// squared angular band frequencies.

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "gapminer/unitcell.hpp"

namespace gapminer {

using SparseC = Eigen::SparseMatrix<std::complex<double>>;

// ---------------------------------------------------------------------------
// wavevector contour
// ---------------------------------------------------------------------------

struct WavevectorContour {
    std::vector<std::pair<double, double>> vertices;  // rad/m
    int points_per_segment = 16;

    // Closed triangle Gamma -> X -> M -> Gamma for a square cell of side a.
    static WavevectorContour standard_triangle(double cell_side, int points_per_segment = 16);

    // Sample rows: the first vertex, then points_per_segment equally spaced
    // points per segment ending at the segment's far vertex. A closed contour
    // therefore starts and ends on the same wavevector.
    std::vector<std::pair<double, double>> samples() const;

    // Cumulative arclength per sample row, starting at 0.
    std::vector<double> arclengths() const;
};

// ---------------------------------------------------------------------------
// results and labeling
// ---------------------------------------------------------------------------

struct GapInterval {
    double lo = 0.0;  // Hz
    double hi = 0.0;  // Hz
    double width() const { return hi - lo; }
};

struct DispersionResult {
    Eigen::MatrixXd frequencies;     // num_k x num_bands, Hz, rows sorted
    std::vector<GapInterval> gaps;   // disjoint, sorted, clipped to report window
    uint64_t config_digest = 0;
};

struct LabelPolicy {
    enum class Mode { Intersect, MinWidth, Cover };
    Mode mode = Mode::Intersect;
    double f_lo = 0.0;   // Hz, target range lower edge
    double f_hi = 0.0;   // Hz, target range upper edge
    double width = 0.0;  // Hz, minimum in-range gap width, MinWidth only

    static LabelPolicy intersect(double f_lo, double f_hi);
    static LabelPolicy min_width(double f_lo, double f_hi, double w);
    static LabelPolicy cover(double f_lo, double f_hi);
    void validate() const;
    std::string to_string() const;          // e.g. "intersect:10000:20000"
    static LabelPolicy parse(const std::string& text);
};

int label(const DispersionResult& result, const LabelPolicy& policy);
int label(const std::vector<GapInterval>& gaps, const LabelPolicy& policy);

// ---------------------------------------------------------------------------
// finite element assembly
// ---------------------------------------------------------------------------

// 8x8 element matrices for one square bilinear quad of side h.
// Node order is counterclockwise from the lower-left corner; dofs (ux, uy).
Eigen::Matrix<double, 8, 8> element_stiffness(double e, double nu, double h, bool plane_strain);
Eigen::Matrix<double, 8, 8> element_mass(double rho, double h);

class FEMAssembly {
public:
    FEMAssembly(const UnitCell& cell, const PhysicalConfig& phys, int elements_per_pixel);

    int mesh_side() const { return side_; }            // elements per edge
    int full_dof() const { return 2 * (side_ + 1) * (side_ + 1); }
    int reduced_dof() const { return 2 * side_ * side_; }

    // Bloch-reduced Hermitian stiffness/mass pair at wavevector (gx, gy).
    // Verifies hermiticity to 1e-8 relative and symmetrizes roundoff away.
    void reduced_pair(double gx, double gy, SparseC& k_red, SparseC& m_red) const;

private:
    int side_;
    double elem_h_;
    // Full-mesh triplets; duplicates are summed on reduction.
    std::vector<Eigen::Triplet<double>> k_trip_;
    std::vector<Eigen::Triplet<double>> m_trip_;
    // Per full dof: reduced column and periodic image offsets (tx, ty in cells).
    std::vector<int> master_;
    std::vector<uint8_t> wrap_x_;
    std::vector<uint8_t> wrap_y_;
    double cell_side_;

    SparseC reduce(const std::vector<Eigen::Triplet<double>>& trips, double gx, double gy) const;
};

// ---------------------------------------------------------------------------
// eigensolvers
// ---------------------------------------------------------------------------

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double gx, double gy)
        : std::runtime_error(what + " at wavevector (" + std::to_string(gx) + ", " +
                             std::to_string(gy) + ")"),
          gx(gx), gy(gy) {}
    double gx, gy;
};

struct EigenOptions {
    int dense_threshold_dof = 1200;  // dense full solve below, Lanczos at/above
    bool force_dense = false;
    bool force_sparse = false;
    double shift = -3.5530576e10;  // -(2*pi*30 kHz)^2; keeps K - shift*M definite
    // Relative Ritz residual. Near-degenerate clusters (rigid-body pair at the
    // zone center, symmetry-locked band pairs) stall near sqrt(eps), so the
    // default sits above that floor; in band-frequency terms the implied
    // error is far below a millihertz.
    double lanczos_tol = 1e-7;
    // Restart budget; every solve spends at least one extra restart certifying
    // that no degenerate copy of a kept eigenvalue remains undiscovered.
    int max_restarts = 16;
};

// Lowest nev eigenvalues of the Hermitian pencil (K, M), ascending.
std::vector<double> lowest_eigenvalues_dense(const Eigen::MatrixXcd& k,
                                             const Eigen::MatrixXcd& m, int nev);

// Shift-invert Lanczos with full reorthogonalization; converged eigenpairs are
// deflated and the iteration restarts with a fresh vector, so degenerate
// clusters are recovered one copy per restart. The result is returned only
// after a deflated pass converges past the answer set without uncovering a
// new value inside it; otherwise the solve fails rather than drop a copy.
std::vector<double> lowest_eigenvalues_lanczos(const SparseC& k, const SparseC& m, int nev,
                                               const EigenOptions& opt, uint64_t seed = 0x5eed);

// ---------------------------------------------------------------------------
// dispersion driver
// ---------------------------------------------------------------------------

struct DispersionConfig {
    int num_bands = 10;
    int elements_per_pixel = 2;
    double f_max_report = 60e3;  // Hz; gaps clipped to [0, f_max_report]
    EigenOptions eigen;
};

DispersionResult dispersion(const UnitCell& cell, const PhysicalConfig& phys,
                            const WavevectorContour& contour, const DispersionConfig& cfg);

// Band frequencies only, for a single wavevector (testing / probing).
std::vector<double> band_frequencies(const FEMAssembly& fem, double gx, double gy, int num_bands,
                                     const EigenOptions& opt);

// Gap intervals between consecutive sampled bands, clipped to [0, f_max].
std::vector<GapInterval> extract_gaps(const Eigen::MatrixXd& frequencies, double f_max);

// Plot-ready text table: `k_index arclength f_1..f_B` rows plus a trailing
// `# gap f_lo f_hi` summary block.
void export_dispersion(std::ostream& out, const DispersionResult& result,
                       const WavevectorContour& contour);

}  // namespace gapminer
