// Property-to-structure generation: rejection sampling through a fitted
// tree, support-proportional template sampling, multi-resolution template
// transfer, and correlated free-pixel fills. Every draw derives its RNG
// stream from (seed, draw index), so parallel and serial runs produce
// identical sample sets.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gapminer/dispersion.hpp"
#include "gapminer/sff.hpp"
#include "gapminer/templates.hpp"
#include "gapminer/tree.hpp"
#include "gapminer/unitcell.hpp"
#include "gapminer/util.hpp"

namespace gapminer {

// How the free ('*') pixels of a template are filled.
enum class FreePixelLaw {
    Independent,  // each free pixel is a fair coin
    Matern,       // signs of a Gaussian field with a Matern 3/2 kernel
};

struct SamplerConfig {
    uint64_t seed = 0;
    int resolution = 10;  // target design resolution, one of {10, 20, 40, 80}
    std::size_t max_attempts = 1000000;  // rejection-sampling budget per draw
    FreePixelLaw law = FreePixelLaw::Independent;
    double matern_length = 6.0;  // correlation length l, in pixel units

    void validate() const;
};

// Thrown when rejection sampling exhausts its attempt budget — the model's
// positive region is too small at this resolution to hit by chance.
struct BudgetExhausted : std::runtime_error {
    std::size_t attempts;
    explicit BudgetExhausted(std::size_t n)
        : std::runtime_error("no accepted design within " + std::to_string(n) + " attempts"),
          attempts(n) {}
};

// Matern 3/2 correlation at pixel-center distance d: (1+√3·d/l)·exp(−√3·d/l).
double matern32(double d, double l);

// Covariance rescale g(x) = sin(xπ/2) applied entrywise before the Gaussian
// draw; with it, the signs of the field reproduce the kernel's correlation.
double sign_rescale(double x);

// Expected correlation of the two ±1 sign variables at distance d: the
// bivariate-normal orthant law 1 − 2·arccos(g(matern32(d, l)))/π.
double matern_sign_correlation(double d, double l);

// Uniform random symmetric cells through the tree until one is predicted
// positive (at resolution 10 via the coarse features, above via the
// stride-adapted ones). The tree must have been fitted on `lib`'s features.
// `attempts_out`, when given, receives the number of cells tried.
UnitCell sample_rejection_tree(const SparseTree& tree, const ShapeLibrary& lib,
                               const SamplerConfig& config, std::size_t draw_index = 0,
                               std::size_t* attempts_out = nullptr);

// Draws one template with probability proportional to its recorded support
// (uniformly if the set carries no counts), expands it to the target
// resolution when that is finer, and fills the free irreducible pixels by
// the configured law. The returned cell always matches the chosen template;
// `chosen_out`, when given, receives that template's index.
UnitCell sample_template(const TemplateSet& set, const SamplerConfig& config,
                         std::size_t draw_index = 0, std::size_t* chosen_out = nullptr);

// Expands every ternary entry into a factor x factor block of the same
// symbol (factor in {2, 4, 8}), expressed over the fine irreducible wedge.
// The result carries no support counts — they describe the coarse dataset.
Template transfer_template(const Template& coarse, int factor);

// Fills the free pixels of a template with the signs of a zero-mean
// Gaussian vector whose covariance targets g(matern32(d, l)) over
// pixel-center distances between canonical wedge positions; constrained
// entries are copied through unchanged. The rescaled target is usually not
// positive semidefinite, so the draw uses the nearest realizable correlation
// matrix, steered to keep adjacent-pixel entries accurate; the residual
// error lands on long-range pairs.
UnitCell sample_matern_free(const Template& fine, double l, std::mt19937_64& rng);

struct SamplerEvaluation {
    std::size_t requested = 0;
    std::size_t simulated = 0;  // requested minus solver failures
    std::size_t positives = 0;
    double precision = 0.0;     // positives / simulated
    WilsonInterval interval{0.0, 1.0};
    std::vector<std::pair<std::size_t, std::string>> failures;  // draw index, reason
};

// Draws n_samples designs from `generator` (called with the draw index; must
// be safe to call concurrently), runs the dispersion pipeline on each, and
// reports the fraction labeled positive with a Wilson 95% interval. Solver
// failures are excluded from the denominator and listed; anything else
// propagates.
SamplerEvaluation evaluate_sampler(const std::function<UnitCell(std::size_t)>& generator,
                                   const PhysicalConfig& phys,
                                   const WavevectorContour& contour,
                                   const DispersionConfig& cfg, const LabelPolicy& policy,
                                   std::size_t n_samples, int workers = 0);

}  // namespace gapminer
