#include "gapminer/sampler.hpp"

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace gapminer {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Unbiased integer in [0, bound) by rejecting the biased tail.
uint64_t bounded_draw(std::mt19937_64& g, uint64_t bound) {
    const uint64_t max = std::numeric_limits<uint64_t>::max();
    const uint64_t limit = max - max % bound;
    uint64_t v = g();
    while (v >= limit) v = g();
    return v % bound;
}

UnitCell random_cell(std::mt19937_64& g, int resolution) {
    const int n_pix = irreducible_count(resolution);
    std::vector<uint8_t> bits(static_cast<std::size_t>(n_pix));
    for (auto& b : bits) b = uniform_bit(g) ? 1 : 0;
    return UnitCell(resolution, std::move(bits));
}

// Nearest correlation matrix (unit diagonal, positive semidefinite) by
// alternating projections with a Dykstra correction.
Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& target, int max_sweeps) {
    Eigen::MatrixXd y = target;
    Eigen::MatrixXd correction = Eigen::MatrixXd::Zero(target.rows(), target.cols());
    const double tol = 1e-13 * static_cast<double>(target.rows());
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const Eigen::MatrixXd shifted = y - correction;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(shifted);
        if (es.info() != Eigen::Success) {
            throw std::runtime_error("correlation projection eigendecomposition failed");
        }
        Eigen::MatrixXd cone = es.eigenvectors() *
                               es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                               es.eigenvectors().transpose();
        cone = ((cone + cone.transpose()) / 2.0).eval();
        correction = cone - shifted;
        cone.diagonal().setOnes();
        const double moved = (cone - y).norm();
        y = std::move(cone);
        if (moved < tol) break;
    }
    return y;
}

// Gaussian mixing matrix A for a set of pixel positions: sign(A xi) with
// standard normal xi realizes (approximately) the requested sign
// correlations.  The entry-wise rescaled covariance is usually indefinite,
// so no Gaussian vector carries it exactly; projecting onto the correlation
// matrices and nudging short-range entries back toward their targets pushes
// the unavoidable error into the long-range entries, keeping adjacent-pixel
// sign correlations within a few points of the kernel value.
Eigen::MatrixXd matern_mix(const std::vector<std::pair<int, int>>& coords, double l) {
    const auto m = static_cast<Eigen::Index>(coords.size());
    Eigen::MatrixXd dist(m, m);
    Eigen::MatrixXd target(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double d = std::hypot(
                static_cast<double>(coords[static_cast<std::size_t>(i)].first -
                                    coords[static_cast<std::size_t>(j)].first),
                static_cast<double>(coords[static_cast<std::size_t>(i)].second -
                                    coords[static_cast<std::size_t>(j)].second));
            const double v = sign_rescale(matern32(d, l));
            dist(i, j) = dist(j, i) = d;
            target(i, j) = target(j, i) = v;
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> probe(target);
    if (probe.info() != Eigen::Success) {
        throw std::runtime_error("Matern covariance eigendecomposition failed");
    }
    if (probe.eigenvalues().minCoeff() >= -1e-12) {
        // already a valid correlation matrix; realize it exactly
        return probe.eigenvectors() *
               probe.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }

    const int steps = m <= 32 ? 200 : m <= 64 ? 120 : m <= 128 ? 40 : 0;
    Eigen::MatrixXd input = target;
    for (int step = 0; step < steps; ++step) {
        const Eigen::MatrixXd projected = nearest_correlation(input, 150);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < m; ++j) {
                if (i == j) continue;
                const double weight = dist(i, j) <= 1.0 + 1e-9 ? 1.0 : 0.01;
                input(i, j) += weight * (target(i, j) - projected(i, j));
            }
        }
    }
    const Eigen::MatrixXd corr = nearest_correlation(input, m <= 128 ? 400 : 120);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("Matern covariance eigendecomposition failed");
    }
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

// The mixing matrix depends only on (resolution, constrained mask, length),
// so draws share it through a small keyed cache.
struct MixKey {
    int resolution = 0;
    uint64_t length_bits = 0;
    std::vector<uint64_t> care;

    bool operator<(const MixKey& o) const {
        if (resolution != o.resolution) return resolution < o.resolution;
        if (length_bits != o.length_bits) return length_bits < o.length_bits;
        return care < o.care;
    }
};

std::shared_ptr<const Eigen::MatrixXd> mix_for(const Template& fine, double l,
                                               const std::vector<int>& free_pixels) {
    static std::mutex guard;
    static std::map<MixKey, std::shared_ptr<const Eigen::MatrixXd>> cache;

    MixKey key{fine.resolution, std::bit_cast<uint64_t>(l), fine.care};
    {
        std::lock_guard<std::mutex> lock(guard);
        const auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    std::vector<std::pair<int, int>> coords;
    coords.reserve(free_pixels.size());
    for (int k : free_pixels) coords.push_back(irreducible_coords(fine.resolution, k));
    auto mix = std::make_shared<const Eigen::MatrixXd>(matern_mix(coords, l));
    {
        std::lock_guard<std::mutex> lock(guard);
        if (cache.size() >= 64) cache.clear();
        cache.emplace(std::move(key), mix);
    }
    return mix;
}

}  // namespace

void SamplerConfig::validate() const {
    if (resolution != 10 && resolution != 20 && resolution != 40 && resolution != 80) {
        throw std::invalid_argument("sampling resolution must be one of 10, 20, 40, 80");
    }
    if (max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
    if (law == FreePixelLaw::Matern && !(matern_length > 0.0)) {
        throw std::invalid_argument("the Matern correlation length must be positive");
    }
}

double matern32(double d, double l) {
    const double r = std::sqrt(3.0) * d / l;
    return (1.0 + r) * std::exp(-r);
}

double sign_rescale(double x) { return std::sin(x * kPi / 2.0); }

double matern_sign_correlation(double d, double l) {
    return 1.0 - 2.0 * std::acos(sign_rescale(matern32(d, l))) / kPi;
}

UnitCell sample_rejection_tree(const SparseTree& tree, const ShapeLibrary& lib,
                               const SamplerConfig& config, std::size_t draw_index,
                               std::size_t* attempts_out) {
    config.validate();
    if (tree.feature_names.size() != lib.size()) {
        throw std::invalid_argument("the tree was fitted on a different feature count");
    }
    auto gen = rng_stream(config.seed, draw_index);
    std::vector<Rational> features(lib.size());
    for (std::size_t attempt = 1; attempt <= config.max_attempts; ++attempt) {
        UnitCell cell = random_cell(gen, config.resolution);
        const SFFVector sff = featurize(cell, lib);
        for (std::size_t i = 0; i < lib.size(); ++i) features[i] = sff.rational(i);
        if (tree.predict(features) == 1) {
            if (attempts_out) *attempts_out = attempt;
            return cell;
        }
    }
    throw BudgetExhausted(config.max_attempts);
}

Template transfer_template(const Template& coarse, int factor) {
    coarse.validate();
    if (factor != 2 && factor != 4 && factor != 8) {
        throw std::invalid_argument("transfer factor must be 2, 4, or 8");
    }
    Template fine;
    fine.resolution = coarse.resolution * factor;
    const int n_fine = irreducible_count(fine.resolution);
    fine.care.assign((static_cast<std::size_t>(n_fine) + 63) / 64, 0);
    fine.value.assign(fine.care.size(), 0);
    for (int k = 0; k < n_fine; ++k) {
        const auto [r, c] = irreducible_coords(fine.resolution, k);
        // the enclosing coarse block; r <= c survives the integer division
        const int kc = irreducible_index(coarse.resolution, r / factor, c / factor);
        const uint64_t coarse_bit = uint64_t(1) << (kc % 64);
        if (!(coarse.care[static_cast<std::size_t>(kc) / 64] & coarse_bit)) continue;
        fine.care[static_cast<std::size_t>(k) / 64] |= uint64_t(1) << (k % 64);
        if (coarse.value[static_cast<std::size_t>(kc) / 64] & coarse_bit) {
            fine.value[static_cast<std::size_t>(k) / 64] |= uint64_t(1) << (k % 64);
        }
    }
    return fine;
}

UnitCell sample_matern_free(const Template& fine, double l, std::mt19937_64& rng) {
    fine.validate();
    if (!(l > 0.0)) throw std::invalid_argument("the Matern correlation length must be positive");
    const int n_pix = irreducible_count(fine.resolution);
    std::vector<uint8_t> bits(static_cast<std::size_t>(n_pix), 0);
    std::vector<int> free;
    for (int k = 0; k < n_pix; ++k) {
        const uint64_t bit = uint64_t(1) << (k % 64);
        if (fine.care[static_cast<std::size_t>(k) / 64] & bit) {
            bits[static_cast<std::size_t>(k)] =
                (fine.value[static_cast<std::size_t>(k) / 64] & bit) ? 1 : 0;
        } else {
            free.push_back(k);
        }
    }
    if (free.empty()) return UnitCell(fine.resolution, std::move(bits));

    const std::shared_ptr<const Eigen::MatrixXd> mix = mix_for(fine, l, free);
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::VectorXd normals(nf);
    NormalDraw draw;
    for (Eigen::Index i = 0; i < nf; ++i) normals(i) = draw(rng);
    const Eigen::VectorXd field = *mix * normals;
    for (Eigen::Index i = 0; i < nf; ++i) {
        bits[static_cast<std::size_t>(free[static_cast<std::size_t>(i)])] =
            field(i) > 0.0 ? 1 : 0;
    }
    return UnitCell(fine.resolution, std::move(bits));
}

UnitCell sample_template(const TemplateSet& set, const SamplerConfig& config,
                         std::size_t draw_index, std::size_t* chosen_out) {
    config.validate();
    if (set.templates.empty()) {
        throw std::invalid_argument("cannot sample from an empty template set");
    }
    if (config.resolution % set.resolution != 0) {
        throw std::invalid_argument("target resolution is not a multiple of the set's");
    }
    const int factor = config.resolution / set.resolution;
    if (factor != 1 && factor != 2 && factor != 4 && factor != 8) {
        throw std::invalid_argument("target resolution must be 1x, 2x, 4x, or 8x the set's");
    }
    auto gen = rng_stream(config.seed, draw_index);

    uint64_t total = 0;
    for (const auto& t : set.templates) total += t.support;
    std::size_t chosen;
    if (total == 0) {  // a set without recorded counts: uniform choice
        chosen = bounded_draw(gen, set.templates.size());
    } else {
        uint64_t ticket = bounded_draw(gen, total);
        chosen = 0;
        while (ticket >= set.templates[chosen].support) {
            ticket -= set.templates[chosen].support;
            ++chosen;
        }
    }
    if (chosen_out) *chosen_out = chosen;

    const Template& picked = set.templates[chosen];
    const Template expanded = factor == 1 ? picked : transfer_template(picked, factor);
    if (config.law == FreePixelLaw::Matern) {
        return sample_matern_free(expanded, config.matern_length, gen);
    }
    const int n_pix = irreducible_count(expanded.resolution);
    std::vector<uint8_t> bits(static_cast<std::size_t>(n_pix));
    for (int k = 0; k < n_pix; ++k) {
        const uint64_t bit = uint64_t(1) << (k % 64);
        if (expanded.care[static_cast<std::size_t>(k) / 64] & bit) {
            bits[static_cast<std::size_t>(k)] =
                (expanded.value[static_cast<std::size_t>(k) / 64] & bit) ? 1 : 0;
        } else {
            bits[static_cast<std::size_t>(k)] = uniform_bit(gen) ? 1 : 0;
        }
    }
    return UnitCell(expanded.resolution, std::move(bits));
}

SamplerEvaluation evaluate_sampler(const std::function<UnitCell(std::size_t)>& generator,
                                   const PhysicalConfig& phys,
                                   const WavevectorContour& contour,
                                   const DispersionConfig& cfg, const LabelPolicy& policy,
                                   std::size_t n_samples, int workers) {
    if (!generator) throw std::invalid_argument("evaluate_sampler needs a generator");
    if (n_samples == 0) throw std::invalid_argument("evaluate_sampler needs n_samples >= 1");
    std::vector<int> verdicts(n_samples, -1);  // -1 failure, else the label
    std::vector<std::string> reasons(n_samples);
    if (workers < 1) workers = default_jobs();
    parallel_for(n_samples, workers, [&](std::size_t i) {
        const UnitCell cell = generator(i);
        try {
            const DispersionResult result = dispersion(cell, phys, contour, cfg);
            verdicts[i] = label(result.gaps, policy);
        } catch (const SolverError& e) {
            reasons[i] = e.what();
        }
    });
    SamplerEvaluation report;
    report.requested = n_samples;
    for (std::size_t i = 0; i < n_samples; ++i) {
        if (verdicts[i] < 0) {
            report.failures.emplace_back(i, reasons[i]);
            continue;
        }
        report.simulated += 1;
        report.positives += static_cast<std::size_t>(verdicts[i]);
    }
    if (report.simulated > 0) {
        report.precision =
            static_cast<double>(report.positives) / static_cast<double>(report.simulated);
        report.interval = wilson95(report.positives, report.simulated);
    }
    return report;
}

}  // namespace gapminer
