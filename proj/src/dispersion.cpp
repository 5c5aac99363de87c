#include "gapminer/dispersion.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "gapminer/util.hpp"

namespace gapminer {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
using Cplx = std::complex<double>;

double max_abs(const SparseC& a) {
    double m = 0.0;
    for (int o = 0; o < a.outerSize(); ++o) {
        for (SparseC::InnerIterator it(a, o); it; ++it) m = std::max(m, std::abs(it.value()));
    }
    return m;
}

// Verify near-hermiticity, then return the exactly Hermitian average.
SparseC hermitize(const SparseC& a, const char* what) {
    SparseC at = SparseC(a.adjoint());
    SparseC diff = a - at;
    double scale = max_abs(a);
    if (scale > 0 && max_abs(diff) > 1e-8 * scale) {
        throw std::logic_error(std::string(what) + " lost hermiticity beyond 1e-8 relative");
    }
    return SparseC(0.5 * (a + at));
}

}  // namespace

// ---------------------------------------------------------------------------
// wavevector contour
// ---------------------------------------------------------------------------

WavevectorContour WavevectorContour::standard_triangle(double cell_side, int points_per_segment) {
    const double q = std::numbers::pi / cell_side;
    WavevectorContour c;
    c.vertices = {{0.0, 0.0}, {q, 0.0}, {q, q}, {0.0, 0.0}};
    c.points_per_segment = points_per_segment;
    return c;
}

std::vector<std::pair<double, double>> WavevectorContour::samples() const {
    if (vertices.size() < 2) throw std::invalid_argument("contour needs at least two vertices");
    if (points_per_segment < 1) throw std::invalid_argument("points per segment must be >= 1");
    std::vector<std::pair<double, double>> out;
    out.reserve(1 + (vertices.size() - 1) * static_cast<std::size_t>(points_per_segment));
    out.push_back(vertices.front());
    for (std::size_t s = 0; s + 1 < vertices.size(); ++s) {
        auto [x0, y0] = vertices[s];
        auto [x1, y1] = vertices[s + 1];
        for (int i = 1; i <= points_per_segment; ++i) {
            double t = static_cast<double>(i) / points_per_segment;
            out.emplace_back(x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        }
    }
    return out;
}

std::vector<double> WavevectorContour::arclengths() const {
    auto pts = samples();
    std::vector<double> arc(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        double dx = pts[i].first - pts[i - 1].first;
        double dy = pts[i].second - pts[i - 1].second;
        arc[i] = arc[i - 1] + std::hypot(dx, dy);
    }
    return arc;
}

// ---------------------------------------------------------------------------
// labeling
// ---------------------------------------------------------------------------

LabelPolicy LabelPolicy::intersect(double f_lo, double f_hi) {
    LabelPolicy p{Mode::Intersect, f_lo, f_hi, 0.0};
    p.validate();
    return p;
}

LabelPolicy LabelPolicy::min_width(double f_lo, double f_hi, double w) {
    LabelPolicy p{Mode::MinWidth, f_lo, f_hi, w};
    p.validate();
    return p;
}

LabelPolicy LabelPolicy::cover(double f_lo, double f_hi) {
    LabelPolicy p{Mode::Cover, f_lo, f_hi, 0.0};
    p.validate();
    return p;
}

void LabelPolicy::validate() const {
    if (!(f_lo < f_hi)) throw std::invalid_argument("label policy requires f_lo < f_hi");
    if (mode == Mode::MinWidth && !(width > 0)) {
        throw std::invalid_argument("min-width policy requires a positive width");
    }
}

std::string LabelPolicy::to_string() const {
    std::ostringstream out;
    out << std::setprecision(17);
    switch (mode) {
        case Mode::Intersect: out << "intersect:" << f_lo << ":" << f_hi; break;
        case Mode::MinWidth: out << "minwidth:" << f_lo << ":" << f_hi << ":" << width; break;
        case Mode::Cover: out << "cover:" << f_lo << ":" << f_hi; break;
    }
    return out.str();
}

LabelPolicy LabelPolicy::parse(const std::string& text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    parts.push_back(cur);
    auto num = [&](std::size_t i) {
        std::size_t pos = 0;
        double v = std::stod(parts[i], &pos);
        if (pos != parts[i].size()) throw std::invalid_argument("bad number in policy: " + text);
        return v;
    };
    if (parts.size() == 3 && parts[0] == "intersect") return intersect(num(1), num(2));
    if (parts.size() == 4 && parts[0] == "minwidth") return min_width(num(1), num(2), num(3));
    if (parts.size() == 3 && parts[0] == "cover") return cover(num(1), num(2));
    throw std::invalid_argument("unrecognized label policy: " + text);
}

int label(const std::vector<GapInterval>& gaps, const LabelPolicy& policy) {
    policy.validate();
    for (const auto& g : gaps) {
        switch (policy.mode) {
            case LabelPolicy::Mode::Intersect:
                if (std::min(g.hi, policy.f_hi) > std::max(g.lo, policy.f_lo)) return 1;
                break;
            case LabelPolicy::Mode::MinWidth:
                if (std::min(g.hi, policy.f_hi) - std::max(g.lo, policy.f_lo) > policy.width)
                    return 1;
                break;
            case LabelPolicy::Mode::Cover:
                if (g.lo <= policy.f_lo && g.hi >= policy.f_hi) return 1;
                break;
        }
    }
    return 0;
}

int label(const DispersionResult& result, const LabelPolicy& policy) {
    return label(result.gaps, policy);
}

// ---------------------------------------------------------------------------
// element matrices (2x2 Gauss quadrature on the bilinear quad)
// ---------------------------------------------------------------------------

Eigen::Matrix<double, 8, 8> element_stiffness(double e, double nu, double h, bool plane_strain) {
    Eigen::Matrix3d d;
    if (plane_strain) {
        double f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
        d << f * (1.0 - nu), f * nu, 0.0,
             f * nu, f * (1.0 - nu), 0.0,
             0.0, 0.0, f * (1.0 - 2.0 * nu) / 2.0;
    } else {
        double f = e / (1.0 - nu * nu);
        d << f, f * nu, 0.0,
             f * nu, f, 0.0,
             0.0, 0.0, f * (1.0 - nu) / 2.0;
    }

    static const double xi_a[4] = {-1.0, 1.0, 1.0, -1.0};
    static const double eta_a[4] = {-1.0, -1.0, 1.0, 1.0};
    const double gp = 1.0 / std::sqrt(3.0);
    const double det_j = h * h / 4.0;
    const double dscale = 2.0 / h;  // d(xi)/dx for the square element

    Eigen::Matrix<double, 8, 8> ke = Eigen::Matrix<double, 8, 8>::Zero();
    for (double xi : {-gp, gp}) {
        for (double eta : {-gp, gp}) {
            Eigen::Matrix<double, 3, 8> b = Eigen::Matrix<double, 3, 8>::Zero();
            for (int a = 0; a < 4; ++a) {
                double dn_dx = 0.25 * xi_a[a] * (1.0 + eta_a[a] * eta) * dscale;
                double dn_dy = 0.25 * eta_a[a] * (1.0 + xi_a[a] * xi) * dscale;
                b(0, 2 * a) = dn_dx;
                b(1, 2 * a + 1) = dn_dy;
                b(2, 2 * a) = dn_dy;
                b(2, 2 * a + 1) = dn_dx;
            }
            ke += b.transpose() * d * b * det_j;
        }
    }
    return ke;
}

Eigen::Matrix<double, 8, 8> element_mass(double rho, double h) {
    static const double xi_a[4] = {-1.0, 1.0, 1.0, -1.0};
    static const double eta_a[4] = {-1.0, -1.0, 1.0, 1.0};
    const double gp = 1.0 / std::sqrt(3.0);
    const double det_j = h * h / 4.0;

    Eigen::Matrix<double, 8, 8> me = Eigen::Matrix<double, 8, 8>::Zero();
    for (double xi : {-gp, gp}) {
        for (double eta : {-gp, gp}) {
            Eigen::Matrix<double, 2, 8> n = Eigen::Matrix<double, 2, 8>::Zero();
            for (int a = 0; a < 4; ++a) {
                double na = 0.25 * (1.0 + xi_a[a] * xi) * (1.0 + eta_a[a] * eta);
                n(0, 2 * a) = na;
                n(1, 2 * a + 1) = na;
            }
            me += rho * n.transpose() * n * det_j;
        }
    }
    return me;
}

// ---------------------------------------------------------------------------
// assembly
// ---------------------------------------------------------------------------

FEMAssembly::FEMAssembly(const UnitCell& cell, const PhysicalConfig& phys, int elements_per_pixel)
    : side_(cell.resolution() * elements_per_pixel), cell_side_(phys.cell_side) {
    if (elements_per_pixel < 1) throw std::invalid_argument("elements per pixel must be >= 1");
    phys.validate();
    elem_h_ = phys.cell_side / side_;

    const Grid grid = cell.expand();
    const int epp = elements_per_pixel;
    const int nodes_per_side = side_ + 1;

    const auto ke_soft = element_stiffness(phys.e_soft, phys.poisson_ratio, elem_h_, phys.plane_strain);
    const auto ke_stiff = element_stiffness(phys.e_stiff, phys.poisson_ratio, elem_h_, phys.plane_strain);
    const auto me_soft = element_mass(phys.rho_soft, elem_h_);
    const auto me_stiff = element_mass(phys.rho_stiff, elem_h_);

    k_trip_.reserve(static_cast<std::size_t>(side_) * side_ * 64);
    m_trip_.reserve(static_cast<std::size_t>(side_) * side_ * 64);
    for (int i = 0; i < side_; ++i) {
        for (int j = 0; j < side_; ++j) {
            const bool stiff = grid.at(i / epp, j / epp) != 0;
            const auto& ke = stiff ? ke_stiff : ke_soft;
            const auto& me = stiff ? me_stiff : me_soft;
            // Counterclockwise from the (i, j) corner node.
            const int nodes[4] = {i * nodes_per_side + j, i * nodes_per_side + j + 1,
                                  (i + 1) * nodes_per_side + j + 1, (i + 1) * nodes_per_side + j};
            for (int a = 0; a < 4; ++a) {
                for (int b = 0; b < 4; ++b) {
                    for (int da = 0; da < 2; ++da) {
                        for (int db = 0; db < 2; ++db) {
                            int r = 2 * nodes[a] + da;
                            int c = 2 * nodes[b] + db;
                            k_trip_.emplace_back(r, c, ke(2 * a + da, 2 * b + db));
                            m_trip_.emplace_back(r, c, me(2 * a + da, 2 * b + db));
                        }
                    }
                }
            }
        }
    }

    // Periodic master map: every node folds to (i mod side, j mod side); the
    // fold direction records which lattice translation carries the image.
    master_.resize(static_cast<std::size_t>(full_dof()));
    wrap_x_.resize(static_cast<std::size_t>(full_dof()));
    wrap_y_.resize(static_cast<std::size_t>(full_dof()));
    for (int i = 0; i < nodes_per_side; ++i) {
        for (int j = 0; j < nodes_per_side; ++j) {
            int node = i * nodes_per_side + j;
            int red_node = (i % side_) * side_ + (j % side_);
            for (int d = 0; d < 2; ++d) {
                std::size_t dof = static_cast<std::size_t>(2 * node + d);
                master_[dof] = 2 * red_node + d;
                wrap_x_[dof] = static_cast<uint8_t>(j / side_);
                wrap_y_[dof] = static_cast<uint8_t>(i / side_);
            }
        }
    }
}

SparseC FEMAssembly::reduce(const std::vector<Eigen::Triplet<double>>& trips, double gx,
                            double gy) const {
    // Phase per (wrap_x, wrap_y): u(x + a_n) = u(x) e^{-i gamma . a_n}.
    const Cplx ph[2][2] = {
        {Cplx(1.0, 0.0), std::exp(Cplx(0.0, -gx * cell_side_))},
        {std::exp(Cplx(0.0, -gy * cell_side_)),
         std::exp(Cplx(0.0, -(gx + gy) * cell_side_))},
    };
    std::vector<Eigen::Triplet<Cplx>> red;
    red.reserve(trips.size());
    for (const auto& t : trips) {
        std::size_t r = static_cast<std::size_t>(t.row());
        std::size_t c = static_cast<std::size_t>(t.col());
        Cplx v = std::conj(ph[wrap_y_[r]][wrap_x_[r]]) * t.value() * ph[wrap_y_[c]][wrap_x_[c]];
        red.emplace_back(master_[r], master_[c], v);
    }
    SparseC out(reduced_dof(), reduced_dof());
    out.setFromTriplets(red.begin(), red.end());
    return out;
}

void FEMAssembly::reduced_pair(double gx, double gy, SparseC& k_red, SparseC& m_red) const {
    k_red = hermitize(reduce(k_trip_, gx, gy), "reduced stiffness");
    m_red = hermitize(reduce(m_trip_, gx, gy), "reduced mass");
}

// ---------------------------------------------------------------------------
// eigensolvers
// ---------------------------------------------------------------------------

std::vector<double> lowest_eigenvalues_dense(const Eigen::MatrixXcd& k, const Eigen::MatrixXcd& m,
                                             int nev) {
    if (nev < 1 || nev > k.rows()) throw std::invalid_argument("bad eigenvalue count");
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> solver(
        k, m, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("dense generalized eigensolver failed");
    }
    const auto& ev = solver.eigenvalues();
    return std::vector<double>(ev.data(), ev.data() + nev);
}

std::vector<double> lowest_eigenvalues_lanczos(const SparseC& k, const SparseC& m, int nev,
                                               const EigenOptions& opt, uint64_t seed) {
    const int n = static_cast<int>(k.rows());
    if (nev < 1 || nev >= n) throw std::invalid_argument("bad eigenvalue count");
    if (!(opt.shift < 0)) throw std::invalid_argument("shift must be negative to keep K - sM definite");

    // K - shift*M is Hermitian positive definite for shift < 0.
    SparseC shifted = SparseC(k - Cplx(opt.shift, 0.0) * m);
    shifted = SparseC(Cplx(0.5, 0.0) * (shifted + SparseC(shifted.adjoint())));
    Eigen::SimplicialLLT<SparseC> llt;
    llt.compute(shifted);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("Cholesky factorization of the shifted operator failed");
    }

    using Vec = Eigen::VectorXcd;
    std::vector<Vec> locked, locked_m;  // converged Ritz vectors and M * vector
    std::vector<double> theta_locked;

    const int m_dim = std::min(n, std::max(4 * nev + 20, 60));
    auto deflate = [&](Vec& w) {
        for (std::size_t l = 0; l < locked.size(); ++l) w -= locked[l] * locked_m[l].dot(w);
    };

    // A single Krylov run sees one vector per eigenspace, so a degenerate
    // eigenvalue yields one copy no matter how long the run. Copies surface
    // only in later restarts, after the first copy is deflated. The loop
    // therefore keeps restarting until a full pass over the deflated operator
    // converges without revealing anything inside the current answer set.
    int stale_restarts = 0;
    bool confirmed = false;
    for (int restart = 0; restart < opt.max_restarts && !confirmed; ++restart) {
        // Once nev values are locked, the nev-th largest theta is the cut
        // separating the provisional answer from the rest of the spectrum.
        double theta_cut = -1.0;
        if (static_cast<int>(locked.size()) >= nev) {
            std::vector<double> ts(theta_locked);
            std::nth_element(ts.begin(), ts.begin() + (nev - 1), ts.end(), std::greater<>());
            theta_cut = ts[static_cast<std::size_t>(nev - 1)];
        }
        // Fresh start vector, M-orthogonal to everything already locked.
        auto g = rng_stream(seed, static_cast<uint64_t>(restart));
        NormalDraw nd;
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = Cplx(nd(g), nd(g));
        deflate(v);
        deflate(v);
        Vec mv = m * v;
        double nrm = std::sqrt(std::max(std::real(v.dot(mv)), 0.0));
        if (nrm <= 0) continue;
        v /= nrm;
        mv /= nrm;

        std::vector<Vec> basis{v}, basis_m{mv};
        std::vector<double> alpha, beta;
        bool breakdown = false;
        // The shift-inverted operator's norm is ~1/|shift|, far below 1, so
        // the breakdown test must be relative to the recurrence scale.
        double op_scale = 0.0;

        auto ritz_converged = [&](int steps) {
            // Count top Ritz values whose residual bound passes; positive
            // theta only (theta = 1/(lambda - shift) > 0 for lambda >= 0).
            Eigen::MatrixXd t = Eigen::MatrixXd::Zero(steps, steps);
            for (int i = 0; i < steps; ++i) {
                t(i, i) = alpha[static_cast<std::size_t>(i)];
                if (i + 1 < steps) {
                    t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
                }
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tes(t);
            int good = 0;
            double beta_last = breakdown ? 0.0 : beta[static_cast<std::size_t>(steps - 1)];
            for (int i = steps - 1; i >= 0; --i) {
                double theta = tes.eigenvalues()[i];
                if (theta <= 0) break;
                double resid = std::abs(beta_last * tes.eigenvectors()(steps - 1, i));
                if (resid <= opt.lanczos_tol * theta) ++good;
                else break;
            }
            return std::pair<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>, int>(std::move(tes),
                                                                                  good);
        };

        int steps = 0;
        for (int j = 0; j < m_dim; ++j) {
            Vec w = llt.solve(basis_m[static_cast<std::size_t>(j)]);
            deflate(w);
            double a = std::real(basis_m[static_cast<std::size_t>(j)].dot(w));
            w -= a * basis[static_cast<std::size_t>(j)];
            if (j > 0) w -= beta[static_cast<std::size_t>(j - 1)] * basis[static_cast<std::size_t>(j - 1)];
            // Full reorthogonalization, two passes, in the M inner product.
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t i = 0; i <= static_cast<std::size_t>(j); ++i) {
                    w -= basis[i] * basis_m[i].dot(w);
                }
                deflate(w);
            }
            alpha.push_back(a);
            steps = j + 1;
            Vec mw = m * w;
            double b = std::sqrt(std::max(std::real(w.dot(mw)), 0.0));
            op_scale = std::max({op_scale, std::abs(a), b});
            if (b <= 1e-13 * op_scale) {
                breakdown = true;
                break;
            }
            beta.push_back(b);
            basis.push_back(w / b);
            basis_m.push_back(mw / b);
            // Periodic convergence probe to stop early. A confirmation pass
            // (locked already >= nev) needs only its top Ritz pair settled.
            if (steps >= 2 * nev && steps % 8 == 0) {
                auto [tes, good] = ritz_converged(steps);
                (void)tes;
                if (good >= 1 && static_cast<int>(locked.size()) + good >= nev) break;
            }
        }
        if (steps == 0) continue;

        auto [tes, good] = ritz_converged(steps);
        if (std::getenv("GAPMINER_LANCZOS_DEBUG")) {
            std::fprintf(stderr,
                         "[lanczos] restart=%d steps=%d good=%d locked=%zu scale=%.3e cut=%.6e\n",
                         restart, steps, good, locked.size(), op_scale, theta_cut);
            for (int i = steps - 1; i >= std::max(0, steps - 8); --i) {
                double th = tes.eigenvalues()[i];
                double beta_last = breakdown ? 0.0 : beta[static_cast<std::size_t>(steps - 1)];
                std::fprintf(stderr, "    theta=%.6e lambda=%.6e resid=%.3e need<=%.3e\n", th,
                             th > 0 ? opt.shift + 1 / th : -1.0,
                             std::abs(beta_last * tes.eigenvectors()(steps - 1, i)),
                             opt.lanczos_tol * th);
            }
        }
        int before = static_cast<int>(locked.size());
        bool settled_below_cut = false;  // run converged past the answer set
        bool intruded = false;           // run found a value inside it
        for (int i = steps - 1; i >= 0 && good > 0; --i, --good) {
            Vec x = Vec::Zero(n);
            for (int j = 0; j < steps; ++j) {
                x += tes.eigenvectors()(j, i) * basis[static_cast<std::size_t>(j)];
            }
            deflate(x);  // keep the locked set mutually M-orthogonal
            Vec mx = m * x;
            double nx = std::sqrt(std::max(std::real(x.dot(mx)), 0.0));
            // A candidate living almost entirely in the locked span is a
            // roundoff re-find of something already converged.
            if (nx < 1e-3) continue;
            x /= nx;
            mx /= nx;
            // Verify the candidate against the operator itself: deflation and
            // renormalization can turn a marginal Ritz pair into noise, and
            // this check is what keeps such vectors out of the locked set.
            Vec ax = llt.solve(mx);
            double theta = std::real(mx.dot(ax));  // Rayleigh quotient
            if (theta <= 0) continue;
            Vec r = ax - theta * x;
            double resid = std::sqrt(std::max(std::real(r.dot(m * r)), 0.0));
            if (resid > 20.0 * opt.lanczos_tol * theta) continue;
            if (theta_cut > 0 && theta <= theta_cut * (1.0 + 1e-8)) {
                // Converged strictly beyond the answer set; anything further
                // down this run ranks lower still, so the set is certified.
                settled_below_cut = true;
                break;
            }
            if (theta_cut > 0) intruded = true;  // missed copy of a kept value
            locked.push_back(x);
            locked_m.push_back(mx);
            theta_locked.push_back(theta);
            if (theta_cut < 0 && static_cast<int>(locked.size()) >= nev + 2) break;
        }
        if (theta_cut > 0) {
            // Confirmation pass: certified only if it got past the cut without
            // turning up a new member of the answer set.
            if (settled_below_cut && !intruded) confirmed = true;
            stale_restarts = (!settled_below_cut && !intruded) ? stale_restarts + 1 : 0;
        } else {
            stale_restarts = static_cast<int>(locked.size()) == before ? stale_restarts + 1 : 0;
        }
        if (stale_restarts >= 3) break;
    }

    if (static_cast<int>(locked.size()) < nev || !confirmed) {
        throw std::runtime_error("Lanczos failed to certify the lowest " + std::to_string(nev) +
                                 " eigenvalues (locked " + std::to_string(locked.size()) + ")");
    }
    std::vector<double> lambda;
    lambda.reserve(theta_locked.size());
    for (double th : theta_locked) lambda.push_back(opt.shift + 1.0 / th);
    std::sort(lambda.begin(), lambda.end());
    lambda.resize(static_cast<std::size_t>(nev));
    return lambda;
}

// ---------------------------------------------------------------------------
// driver
// ---------------------------------------------------------------------------

std::vector<double> band_frequencies(const FEMAssembly& fem, double gx, double gy, int num_bands,
                                     const EigenOptions& opt) {
    SparseC k_red, m_red;
    fem.reduced_pair(gx, gy, k_red, m_red);
    bool dense = fem.reduced_dof() < opt.dense_threshold_dof;
    if (opt.force_dense) dense = true;
    if (opt.force_sparse) dense = false;
    std::vector<double> lambda;
    try {
        if (dense) {
            lambda = lowest_eigenvalues_dense(Eigen::MatrixXcd(k_red), Eigen::MatrixXcd(m_red),
                                              num_bands);
        } else {
            uint64_t seed = fnv1a64("lanczos") ^ std::bit_cast<uint64_t>(gx) ^
                            (std::bit_cast<uint64_t>(gy) << 1);
            lambda = lowest_eigenvalues_lanczos(k_red, m_red, num_bands, opt, seed);
        }
    } catch (const std::exception& e) {
        throw SolverError(e.what(), gx, gy);
    }
    std::vector<double> f;
    f.reserve(lambda.size());
    for (double l : lambda) f.push_back(std::sqrt(std::max(l, 0.0)) / kTwoPi);
    std::sort(f.begin(), f.end());
    return f;
}

std::vector<GapInterval> extract_gaps(const Eigen::MatrixXd& frequencies, double f_max) {
    std::vector<GapInterval> gaps;
    for (int b = 0; b + 1 < frequencies.cols(); ++b) {
        double lo = frequencies.col(b).maxCoeff();
        double hi = frequencies.col(b + 1).minCoeff();
        if (!(hi > lo)) continue;
        double glo = std::max(lo, 0.0);
        double ghi = std::min(hi, f_max);
        if (ghi > glo) gaps.push_back({glo, ghi});
    }
    return gaps;
}

namespace {

uint64_t dispersion_digest(const UnitCell& cell, const PhysicalConfig& phys,
                           const WavevectorContour& contour, const DispersionConfig& cfg) {
    std::ostringstream ss;
    ss << std::setprecision(17);
    ss << "cell=" << cell.resolution() << ":" << cell.bit_string();
    ss << "|phys=" << phys.cell_side << "," << phys.e_soft << "," << phys.rho_soft << ","
       << phys.e_stiff << "," << phys.rho_stiff << "," << phys.poisson_ratio << ","
       << (phys.plane_strain ? "strain" : "stress");
    ss << "|contour=";
    for (auto [x, y] : contour.vertices) ss << "(" << x << "," << y << ")";
    ss << "x" << contour.points_per_segment;
    ss << "|epp=" << cfg.elements_per_pixel << "|bands=" << cfg.num_bands
       << "|fmax=" << cfg.f_max_report;
    return fnv1a64(ss.str());
}

}  // namespace

DispersionResult dispersion(const UnitCell& cell, const PhysicalConfig& phys,
                            const WavevectorContour& contour, const DispersionConfig& cfg) {
    if (cfg.num_bands < 2) throw std::invalid_argument("need at least two bands");
    FEMAssembly fem(cell, phys, cfg.elements_per_pixel);
    if (cfg.num_bands >= fem.reduced_dof()) {
        throw std::invalid_argument("band count must be below the reduced dof count");
    }
    auto pts = contour.samples();
    DispersionResult res;
    res.frequencies.resize(static_cast<Eigen::Index>(pts.size()), cfg.num_bands);
    for (std::size_t s = 0; s < pts.size(); ++s) {
        auto f = band_frequencies(fem, pts[s].first, pts[s].second, cfg.num_bands, cfg.eigen);
        for (int b = 0; b < cfg.num_bands; ++b) {
            res.frequencies(static_cast<Eigen::Index>(s), b) = f[static_cast<std::size_t>(b)];
        }
    }
    res.gaps = extract_gaps(res.frequencies, cfg.f_max_report);
    res.config_digest = dispersion_digest(cell, phys, contour, cfg);
    return res;
}

void export_dispersion(std::ostream& out, const DispersionResult& result,
                       const WavevectorContour& contour) {
    auto arc = contour.arclengths();
    if (static_cast<Eigen::Index>(arc.size()) != result.frequencies.rows()) {
        throw std::invalid_argument("contour does not match result row count");
    }
    out << "# k_index arclength";
    for (int b = 0; b < result.frequencies.cols(); ++b) out << " f_" << (b + 1);
    out << "\n";
    out << std::setprecision(10);
    for (Eigen::Index i = 0; i < result.frequencies.rows(); ++i) {
        out << i << " " << arc[static_cast<std::size_t>(i)];
        for (int b = 0; b < result.frequencies.cols(); ++b) out << " " << result.frequencies(i, b);
        out << "\n";
    }
    for (const auto& g : result.gaps) out << "# gap " << g.lo << " " << g.hi << "\n";
}

}  // namespace gapminer
