// Unit-cell template sets: ternary stiff/soft/free masks over the
// irreducible pixels, mined by exhaustive pre-selection over the full
// ternary space followed by exact set selection that maximizes support
// under precision and sparsity constraints.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gapminer/unitcell.hpp"

namespace gapminer {

// A D4-symmetric ternary mask. A design matches when every specified pixel
// agrees: (design_bits & care) == value, one AND and one compare per word.
struct Template {
    int resolution = 10;
    std::vector<uint64_t> care;   // bit k set -> irreducible pixel k specified
    std::vector<uint64_t> value;  // specified phases; always a subset of care
    std::size_t support = 0;      // matching designs in the mining dataset
    std::size_t positives = 0;    // of those, how many carry the target label

    void validate() const;
    double precision() const;
    int free_count() const;  // unspecified irreducible pixels

    bool matches(const UnitCell& cell) const;   // same resolution required
    bool matches_id(uint64_t design_id) const;  // resolution <= 20 only

    // Ternary pattern over the irreducible pixels, index 0 first:
    // '0' soft, '1' stiff, '*' free.
    std::string pattern() const;
    // resolution == 0 infers the grid size from the pattern length.
    static Template from_pattern(const std::string& pattern, int resolution = 0);
};

struct PreselectStats {
    std::size_t space = 0;      // logical candidate count, 3^T(n)
    std::size_t evaluated = 0;  // candidates individually scored
    std::size_t retained = 0;
};

// Scores every ternary template over the irreducible pixels against the
// labeled designs and keeps those with support >= min_support and precision
// >= min_precision, in mixed-radix counting order (pixel 0 is the fastest
// digit, ordered * < soft < stiff). Support never grows when a free pixel is
// specified, so whole subtrees below the support threshold are skipped
// without changing the result. Resolutions above 10 are rejected: the scan
// is exhaustive over 3^T(n).
std::vector<Template> preselect(const std::vector<uint64_t>& designs,
                                const std::vector<uint8_t>& labels,
                                std::size_t min_support, double min_precision,
                                int resolution = 10, int workers = 0,
                                PreselectStats* stats = nullptr);

// Selection problem: choose at most `sparsity` candidates whose union of
// matched designs is as large as possible while the union's precision stays
// at or above min_precision (a design is predicted positive iff it matches
// at least one chosen candidate, which fixes the prediction vector of any
// chosen set).
struct ILPInstance {
    std::size_t n_designs = 0;
    int sparsity = 0;
    double min_precision = 0.0;
    std::vector<uint64_t> labels;                 // packed positive mask
    std::vector<std::vector<uint64_t>> match;     // per candidate: packed match mask
    std::vector<Template> candidates;

    void validate() const;
};

ILPInstance build_instance(const std::vector<uint64_t>& designs,
                           const std::vector<uint8_t>& labels,
                           std::vector<Template> candidates, int sparsity,
                           double min_precision, int workers = 0);

struct SelectionResult {
    std::vector<std::size_t> chosen;  // candidate indices, ascending
    std::size_t support = 0;
    std::size_t positives = 0;
    bool feasible = false;        // some nonempty selection met the precision bar
    bool proven_optimal = false;
    double optimality_gap = 0.0;  // (bound - support) / bound after a timeout
};

// Exact branch-and-bound. Candidates are first reduced by dominance: j is
// dropped when some j' matches a superset of j's designs and the extra
// designs are all positive (swapping j for j' then never lowers support or
// precision); of identical candidates the smallest index stays. The bound is
// the current coverage plus the largest remaining marginal coverages for the
// open slots. Ties break toward the lexicographically smallest index set,
// among selections from the reduced pool with no redundant member. Hitting
// the time limit returns the incumbent and the gap to the best abandoned
// bound.
SelectionResult select_ilp(const ILPInstance& inst, double time_limit_seconds = 1800.0);

struct TemplateSet {
    int resolution = 10;
    std::vector<Template> templates;
    int sparsity = 0;
    double min_precision = 0.0;
    std::size_t support = 0;    // training union support
    std::size_t positives = 0;  // training union positives
    bool feasible = true;
    bool proven_optimal = true;
    double optimality_gap = 0.0;
    std::string dataset_digest;  // hex FNV-1a of the (design, label) rows

    double precision() const;
    int predict(const UnitCell& cell) const;  // 1 iff any template matches

    void save(std::ostream& out) const;
    static TemplateSet load(std::istream& in);
};

struct MiningOptions {
    std::size_t min_support_pre = 10;  // pre-selection support threshold
    double min_precision_pre = -1.0;   // < 0 -> min_precision - 0.05
    int sparsity = 5;
    double min_precision = 0.98;
    double time_limit_seconds = 1800.0;
    int workers = 0;  // 0 -> all cores
};

// Pre-selection followed by exact selection, with the chosen templates'
// per-candidate stats and the dataset digest recorded on the result.
TemplateSet mine_templates(const std::vector<uint64_t>& designs,
                           const std::vector<uint8_t>& labels, const MiningOptions& opt,
                           int resolution = 10, PreselectStats* stats = nullptr);

// Recount a set's union support/positives on a labeled design list.
struct SetCounts {
    std::size_t support = 0;
    std::size_t positives = 0;
};
SetCounts evaluate_templates(const TemplateSet& set, const std::vector<uint64_t>& designs,
                             const std::vector<uint8_t>& labels);

// Digest of the (design id, label) rows a set was mined from, for provenance.
std::string dataset_rows_digest(const std::vector<uint64_t>& designs,
                                const std::vector<uint8_t>& labels);

}  // namespace gapminer
