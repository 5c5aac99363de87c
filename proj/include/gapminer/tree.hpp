// Optimal sparse decision trees over binarized shape-frequency features.
// The fitter is an exact branch-and-bound over tree structures: it either
// proves optimality or, under a time limit, returns the incumbent with an
// optimality gap. Two objectives: balanced accuracy, and a precision/support
// trade-off that rewards true positives and penalizes small-support trees.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gapminer/util.hpp"

namespace gapminer {

struct Objective {
    enum class Kind { BalancedAccuracy, PrecisionSupport };
    Kind kind = Kind::PrecisionSupport;
    double k_support = 1.0;   // weight of the small-support penalty
    double epsilon = 1e-9;
    double leaf_penalty = 0.005;  // subtracted per leaf

    void validate() const;
    std::string kind_name() const;
    static Objective balanced_accuracy(double leaf_penalty = 0.005);
    static Objective precision_support(double k = 1.0, double leaf_penalty = 0.005);
};

// Raw objective for a tree with the given confusion counts; the per-leaf
// penalty is applied by the search, not here. PrecisionSupport is
// TP/(TP+FP+eps) - K/(TP+eps); BalancedAccuracy is (TPR+TNR)/2.
double objective_value(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t pos_total,
                       std::size_t n_total, const Objective& obj);

// One binary column: "source feature value > threshold".
struct BinaryColumn {
    int feature = 0;
    Rational threshold{};
    std::vector<uint8_t> bits;  // one per design row
};

struct BinarizedFeatures {
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    std::vector<std::vector<Rational>> thresholds;  // per source feature, ascending
    std::vector<BinaryColumn> columns;              // feature-major, thresholds ascending
};

// Thresholds are midpoints of consecutive distinct observed values; features
// with more midpoints than the cap keep evenly spaced quantile midpoints.
// Constant features contribute no columns.
BinarizedFeatures binarize(const std::vector<std::vector<Rational>>& features,
                           int max_thresholds_per_feature);

struct TreeNode {
    // Internal node: tests feature > threshold, false -> left, true -> right.
    int feature = -1;
    Rational threshold{};
    int left = -1;
    int right = -1;
    // Leaf: prediction plus training counts that reached it.
    int label = 0;
    std::size_t pos = 0;
    std::size_t neg = 0;

    bool is_leaf() const { return left < 0; }
};

struct SparseTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::vector<std::string> feature_names;
    Objective objective;
    double train_value = 0.0;      // achieved objective including leaf penalty
    double optimality_gap = 0.0;   // 0 when proven optimal
    std::size_t train_pos = 0;
    std::size_t train_neg = 0;

    int leaf_count() const;
    int depth() const;
    int predict(const std::vector<Rational>& features) const;

    // Training-set confusion counts, recomputed from leaf stats.
    void confusion(std::size_t& tp, std::size_t& fp, std::size_t& fn, std::size_t& tn) const;

    void save_json(std::ostream& out) const;
    static SparseTree load_json(std::istream& in);
};

struct FitOptions {
    int depth_limit = 4;
    // 0 -> unlimited. Otherwise the search deepens one level at a time inside
    // the budget; hitting the deadline returns the deepest exactly solved fit
    // with a positive optimality gap against the perfect-classifier bound.
    double time_limit_seconds = 0.0;
    // Audits the search bookkeeping: throws std::logic_error if the claimed
    // optimum disagrees with the value recomputed from the returned tree.
    bool check_bounds = false;
};

// Exact search for the tree maximizing objective - leaf_penalty * leaves over
// all trees within the depth limit (splits must be non-trivial, so features
// never repeat along a path). Runs dynamic programming over (row subset,
// depth) subproblems, each holding the Pareto frontier of achievable
// (TP up, FP down, leaves down) outcomes; both objectives are monotone in
// those coordinates, so frontier maxima are exact. Ties break
// deterministically toward the tree found first under the canonical order:
// shallower depth, label-0 leaf, label-1 leaf, then splits by ascending
// (feature, threshold).
SparseTree fit_optimal_tree(const BinarizedFeatures& bin, const std::vector<uint8_t>& labels,
                            const Objective& obj, const FitOptions& opt = {},
                            const std::vector<std::string>& feature_names = {});

}  // namespace gapminer
