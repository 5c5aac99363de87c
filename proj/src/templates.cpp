#include "gapminer/templates.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "gapminer/util.hpp"

namespace gapminer {

namespace {

std::size_t words_for(int bits) { return (static_cast<std::size_t>(bits) + 63) / 64; }

std::size_t pow3(int e) {
    std::size_t p = 1;
    for (int i = 0; i < e; ++i) p *= 3;
    return p;
}

std::size_t count_bits(const uint64_t* a, std::size_t w) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < w; ++i) s += static_cast<std::size_t>(std::popcount(a[i]));
    return s;
}

std::size_t and_count(const uint64_t* a, const uint64_t* b, uint64_t* out, std::size_t w) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < w; ++i) {
        out[i] = a[i] & b[i];
        s += static_cast<std::size_t>(std::popcount(out[i]));
    }
    return s;
}

std::size_t and_count_only(const uint64_t* a, const uint64_t* b, std::size_t w) {
    std::size_t s = 0;
    for (std::size_t i = 0; i < w; ++i) s += static_cast<std::size_t>(std::popcount(a[i] & b[i]));
    return s;
}

int infer_resolution(std::size_t pattern_length) {
    for (int n = 2; n <= 200; n += 2) {
        std::size_t t = static_cast<std::size_t>(irreducible_count(n));
        if (t == pattern_length) return n;
        if (t > pattern_length) break;
    }
    throw std::invalid_argument("pattern length is not an irreducible pixel count");
}

bool precision_meets(std::size_t positives, std::size_t support, double threshold) {
    return support > 0 &&
           static_cast<double>(positives) / static_cast<double>(support) >= threshold;
}

}  // namespace

// ---------------------------------------------------------------------------
// Template
// ---------------------------------------------------------------------------

void Template::validate() const {
    const int t = irreducible_count(resolution);
    const std::size_t w = words_for(t);
    if (resolution < 2 || resolution % 2 != 0) {
        throw std::invalid_argument("template resolution must be a positive even number");
    }
    if (care.size() != w || value.size() != w) {
        throw std::invalid_argument("template mask word count does not match its resolution");
    }
    for (std::size_t i = 0; i < w; ++i) {
        if (value[i] & ~care[i]) {
            throw std::invalid_argument("template value bits outside the care mask");
        }
    }
    if (t % 64 != 0 && (care[w - 1] >> (t % 64)) != 0) {
        throw std::invalid_argument("template care bits beyond the irreducible count");
    }
}

double Template::precision() const {
    return support ? static_cast<double>(positives) / static_cast<double>(support) : 0.0;
}

int Template::free_count() const {
    std::size_t specified = count_bits(care.data(), care.size());
    return irreducible_count(resolution) - static_cast<int>(specified);
}

bool Template::matches(const UnitCell& cell) const {
    if (cell.resolution() != resolution) {
        throw std::invalid_argument("template and cell resolutions differ");
    }
    const auto& bits = cell.irreducible();
    std::vector<uint64_t> packed(care.size(), 0);
    for (std::size_t k = 0; k < bits.size(); ++k) {
        if (bits[k]) packed[k / 64] |= uint64_t(1) << (k % 64);
    }
    for (std::size_t w = 0; w < care.size(); ++w) {
        if ((packed[w] & care[w]) != value[w]) return false;
    }
    return true;
}

bool Template::matches_id(uint64_t design_id) const {
    if (care.size() != 1) {
        throw std::logic_error("matches_id needs a single-word template (resolution <= 20)");
    }
    return (design_id & care[0]) == value[0];
}

std::string Template::pattern() const {
    const int t = irreducible_count(resolution);
    std::string out(static_cast<std::size_t>(t), '*');
    for (int k = 0; k < t; ++k) {
        const std::size_t w = static_cast<std::size_t>(k) / 64;
        const uint64_t bit = uint64_t(1) << (k % 64);
        if (care[w] & bit) out[static_cast<std::size_t>(k)] = (value[w] & bit) ? '1' : '0';
    }
    return out;
}

Template Template::from_pattern(const std::string& pattern, int resolution) {
    Template t;
    t.resolution = resolution == 0 ? infer_resolution(pattern.size()) : resolution;
    const int n_pix = irreducible_count(t.resolution);
    if (pattern.size() != static_cast<std::size_t>(n_pix)) {
        throw std::invalid_argument("pattern length does not match the resolution");
    }
    t.care.assign(words_for(n_pix), 0);
    t.value.assign(words_for(n_pix), 0);
    for (int k = 0; k < n_pix; ++k) {
        const char c = pattern[static_cast<std::size_t>(k)];
        if (c == '*') continue;
        if (c != '0' && c != '1') {
            throw std::invalid_argument("pattern entries must be '0', '1' or '*'");
        }
        const std::size_t w = static_cast<std::size_t>(k) / 64;
        const uint64_t bit = uint64_t(1) << (k % 64);
        t.care[w] |= bit;
        if (c == '1') t.value[w] |= bit;
    }
    return t;
}

// ---------------------------------------------------------------------------
// pre-selection
// ---------------------------------------------------------------------------

namespace {

struct PreselectProblem {
    int n_pixels = 0;
    std::size_t n_words = 0;  // packed design-set words
    std::size_t min_support = 0;
    double min_precision = 0.0;
    int resolution = 0;
    std::vector<std::vector<uint64_t>> soft;   // per pixel: designs with that pixel soft
    std::vector<std::vector<uint64_t>> stiff;  // per pixel: designs with that pixel stiff
    std::vector<uint64_t> positives;
};

struct ShardRun {
    const PreselectProblem* pb = nullptr;
    std::vector<std::vector<uint64_t>> bufs;  // one scratch set per recursion level
    std::vector<Template> out;
    std::size_t evaluated = 0;

    void leaf(const uint64_t* cur, std::size_t sup, uint64_t care, uint64_t value) {
        ++evaluated;
        if (sup < pb->min_support) return;
        const std::size_t posv = and_count_only(cur, pb->positives.data(), pb->n_words);
        if (!precision_meets(posv, sup, pb->min_precision)) return;
        Template t;
        t.resolution = pb->resolution;
        t.care = {care};
        t.value = {value};
        t.support = sup;
        t.positives = posv;
        out.push_back(std::move(t));
    }

    // Counting order over the remaining pixels: free, then soft, then stiff.
    // Subtrees whose running support is already below the threshold cannot
    // contain a retained template (specializing only removes matches).
    void dfs(int k, const uint64_t* cur, std::size_t sup, uint64_t care, uint64_t value) {
        if (k < 0) {
            leaf(cur, sup, care, value);
            return;
        }
        dfs(k - 1, cur, sup, care, value);
        const uint64_t bit = uint64_t(1) << k;
        uint64_t* buf = bufs[static_cast<std::size_t>(k)].data();
        std::size_t s0 = and_count(cur, pb->soft[static_cast<std::size_t>(k)].data(), buf,
                                   pb->n_words);
        if (s0 >= pb->min_support) dfs(k - 1, buf, s0, care | bit, value);
        std::size_t s1 = and_count(cur, pb->stiff[static_cast<std::size_t>(k)].data(), buf,
                                   pb->n_words);
        if (s1 >= pb->min_support) dfs(k - 1, buf, s1, care | bit, value | bit);
    }
};

}  // namespace

std::vector<Template> preselect(const std::vector<uint64_t>& designs,
                                const std::vector<uint8_t>& labels, std::size_t min_support,
                                double min_precision, int resolution, int workers,
                                PreselectStats* stats) {
    if (resolution < 2 || resolution % 2 != 0 || resolution > 10) {
        throw std::invalid_argument("pre-selection scans 3^T(n) templates; resolution must be "
                                    "an even number no larger than 10");
    }
    if (min_support < 1) throw std::invalid_argument("support threshold must be >= 1");
    if (min_precision < 0.0 || min_precision > 1.0) {
        throw std::invalid_argument("precision threshold must lie in [0, 1]");
    }
    if (designs.size() != labels.size()) {
        throw std::invalid_argument("design and label counts differ");
    }
    const int n_pix = irreducible_count(resolution);
    for (uint64_t id : designs) {
        if (id >> n_pix) throw std::invalid_argument("design id out of range for resolution");
    }
    if (stats) *stats = PreselectStats{pow3(n_pix), 0, 0};
    if (designs.empty()) return {};

    const std::size_t n = designs.size();
    PreselectProblem pb;
    pb.n_pixels = n_pix;
    pb.n_words = words_for(static_cast<int>(n));
    pb.min_support = min_support;
    pb.min_precision = min_precision;
    pb.resolution = resolution;
    pb.soft.assign(static_cast<std::size_t>(n_pix), std::vector<uint64_t>(pb.n_words, 0));
    pb.stiff.assign(static_cast<std::size_t>(n_pix), std::vector<uint64_t>(pb.n_words, 0));
    pb.positives.assign(pb.n_words, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const uint64_t bit = uint64_t(1) << (i % 64);
        for (int k = 0; k < n_pix; ++k) {
            ((designs[i] >> k) & 1 ? pb.stiff : pb.soft)[static_cast<std::size_t>(k)][i / 64] |=
                bit;
        }
        if (labels[i]) pb.positives[i / 64] |= bit;
    }
    std::vector<uint64_t> full(pb.n_words, ~uint64_t(0));
    if (n % 64 != 0) full[pb.n_words - 1] = ~uint64_t(0) >> (64 - n % 64);

    // Shard the scan over the most significant pixels so workers share the
    // space; shards are merged in counting order, keeping the output order
    // independent of the worker count.
    const int shard_pixels = std::min(3, n_pix);
    const std::size_t n_shards = pow3(shard_pixels);
    std::vector<ShardRun> runs(n_shards);
    if (workers < 1) workers = default_jobs();
    parallel_for(n_shards, workers, [&](std::size_t shard) {
        ShardRun& run = runs[shard];
        run.pb = &pb;
        run.bufs.assign(static_cast<std::size_t>(n_pix), std::vector<uint64_t>(pb.n_words));
        std::vector<uint64_t> cur = full;
        std::size_t sup = count_bits(cur.data(), pb.n_words);
        uint64_t care = 0, value = 0;
        for (int t = 0; t < shard_pixels; ++t) {
            const int pixel = n_pix - 1 - t;
            const int digit =
                static_cast<int>(shard / pow3(shard_pixels - 1 - t)) % 3;
            if (digit == 0) continue;  // free pixel
            const auto& mask = (digit == 1 ? pb.soft : pb.stiff)[static_cast<std::size_t>(pixel)];
            sup = and_count(cur.data(), mask.data(), cur.data(), pb.n_words);
            care |= uint64_t(1) << pixel;
            if (digit == 2) value |= uint64_t(1) << pixel;
        }
        if (sup < min_support) return;  // the whole shard specializes this prefix
        run.dfs(n_pix - 1 - shard_pixels, cur.data(), sup, care, value);
    });

    std::vector<Template> out;
    std::size_t evaluated = 0;
    for (auto& run : runs) {
        evaluated += run.evaluated;
        out.insert(out.end(), std::make_move_iterator(run.out.begin()),
                   std::make_move_iterator(run.out.end()));
    }
    if (stats) {
        stats->evaluated = evaluated;
        stats->retained = out.size();
    }
    return out;
}

// ---------------------------------------------------------------------------
// selection
// ---------------------------------------------------------------------------

void ILPInstance::validate() const {
    if (n_designs < 1) throw std::invalid_argument("selection needs at least one design");
    if (candidates.empty()) throw std::invalid_argument("selection needs at least one candidate");
    if (sparsity < 1) throw std::invalid_argument("sparsity must be >= 1");
    if (min_precision < 0.0 || min_precision > 1.0) {
        throw std::invalid_argument("precision threshold must lie in [0, 1]");
    }
    const std::size_t w = words_for(static_cast<int>(n_designs));
    if (labels.size() != w) throw std::invalid_argument("label mask has the wrong word count");
    if (match.size() != candidates.size()) {
        throw std::invalid_argument("matching matrix row count differs from the candidates");
    }
    const uint64_t tail =
        n_designs % 64 ? ~(~uint64_t(0) >> (64 - n_designs % 64)) : uint64_t(0);
    if (labels[w - 1] & tail) throw std::invalid_argument("label mask has stray tail bits");
    for (const auto& row : match) {
        if (row.size() != w) throw std::invalid_argument("matching matrix row width mismatch");
        if (row[w - 1] & tail) throw std::invalid_argument("match mask has stray tail bits");
    }
}

ILPInstance build_instance(const std::vector<uint64_t>& designs,
                           const std::vector<uint8_t>& labels,
                           std::vector<Template> candidates, int sparsity,
                           double min_precision, int workers) {
    if (designs.size() != labels.size()) {
        throw std::invalid_argument("design and label counts differ");
    }
    ILPInstance inst;
    inst.n_designs = designs.size();
    inst.sparsity = sparsity;
    inst.min_precision = min_precision;
    inst.candidates = std::move(candidates);
    const std::size_t w = words_for(static_cast<int>(inst.n_designs));
    inst.labels.assign(w, 0);
    for (std::size_t i = 0; i < designs.size(); ++i) {
        if (labels[i]) inst.labels[i / 64] |= uint64_t(1) << (i % 64);
    }
    inst.match.assign(inst.candidates.size(), std::vector<uint64_t>(w, 0));
    if (workers < 1) workers = default_jobs();
    parallel_for(inst.candidates.size(), workers, [&](std::size_t j) {
        const Template& t = inst.candidates[j];
        auto& row = inst.match[j];
        for (std::size_t i = 0; i < designs.size(); ++i) {
            if (t.matches_id(designs[i])) row[i / 64] |= uint64_t(1) << (i % 64);
        }
    });
    inst.validate();
    return inst;
}

namespace {

struct SetSolver {
    const ILPInstance* inst = nullptr;
    std::size_t w = 0;
    int sparsity = 0;
    double min_precision = 0.0;
    std::vector<std::size_t> sup;  // per candidate
    std::vector<char> active;

    std::chrono::steady_clock::time_point deadline{};
    bool use_deadline = false;
    bool timed_out = false;
    std::size_t abandoned = 0;  // largest bound of a region the deadline cut off

    std::size_t best_sup = 0, best_pos = 0;
    std::vector<std::size_t> best_chosen;
    std::vector<std::size_t> stack;

    bool expired() const {
        return use_deadline && std::chrono::steady_clock::now() >= deadline;
    }

    std::size_t gain_of(std::size_t j, const std::vector<uint64_t>& covered) const {
        const auto& row = inst->match[j];
        std::size_t g = 0;
        for (std::size_t i = 0; i < w; ++i) {
            g += static_cast<std::size_t>(std::popcount(row[i] & ~covered[i]));
        }
        return g;
    }

    // Drop candidates whose matches are covered by another candidate that
    // adds only positive designs on top: swapping the two never lowers the
    // union's support, and the union precision moves toward 1, so every
    // optimal selection survives the reduction. Identical candidates keep
    // the smallest index.
    void reduce() {
        const std::size_t m = inst->match.size();
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t k = 0; k < m && active[j]; ++k) {
                if (k == j || sup[k] < sup[j]) continue;
                const auto& mj = inst->match[j];
                const auto& mk = inst->match[k];
                bool subset = true;
                for (std::size_t i = 0; i < w && subset; ++i) subset = !(mj[i] & ~mk[i]);
                if (!subset) continue;
                bool extras_positive = true;
                for (std::size_t i = 0; i < w && extras_positive; ++i) {
                    extras_positive = !((mk[i] & ~mj[i]) & ~inst->labels[i]);
                }
                if (!extras_positive) continue;
                if (sup[k] == sup[j] && k > j) continue;  // identical: keep the first
                active[j] = 0;
            }
        }
    }

    void consider(std::size_t support, std::size_t positives) {
        if (support > best_sup && precision_meets(positives, support, min_precision)) {
            best_sup = support;
            best_pos = positives;
            best_chosen = stack;
        }
    }

    void node(const std::vector<std::size_t>& remaining, const std::vector<uint64_t>& covered,
              std::size_t sup_u, std::size_t pos_u, int depth) {
        if (depth == sparsity) return;
        const int slots = sparsity - depth;
        std::vector<std::pair<std::size_t, std::size_t>> kids;  // (gain, candidate)
        kids.reserve(remaining.size());
        for (std::size_t j : remaining) {
            const std::size_t g = gain_of(j, covered);
            if (g > 0) kids.emplace_back(g, j);
        }
        std::sort(kids.begin(), kids.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        std::size_t bound = sup_u;
        for (std::size_t c = 0; c < kids.size() && c < static_cast<std::size_t>(slots); ++c) {
            bound += kids[c].first;
        }
        if (bound <= best_sup) return;
        if (expired()) {
            timed_out = true;
            abandoned = std::max(abandoned, bound);
            return;
        }

        std::vector<uint64_t> next(w);
        std::vector<std::size_t> rest;
        for (std::size_t c = 0; c < kids.size(); ++c) {
            if (sup_u + kids[c].first * static_cast<std::size_t>(slots) <= best_sup) break;
            const std::size_t j = kids[c].second;
            const auto& row = inst->match[j];
            std::size_t pos_gain = 0;
            for (std::size_t i = 0; i < w; ++i) {
                pos_gain += static_cast<std::size_t>(
                    std::popcount(row[i] & ~covered[i] & inst->labels[i]));
                next[i] = covered[i] | row[i];
            }
            const std::size_t sup_c = sup_u + kids[c].first;
            const std::size_t pos_c = pos_u + pos_gain;
            stack.push_back(j);
            consider(sup_c, pos_c);
            rest.clear();
            for (std::size_t c2 = c + 1; c2 < kids.size(); ++c2) rest.push_back(kids[c2].second);
            node(rest, next, sup_c, pos_c, depth + 1);
            stack.pop_back();
            if (timed_out) {
                abandoned = std::max(abandoned, bound);
                return;
            }
        }
    }

    // First selection reaching the proven optimum when candidates are tried
    // in ascending index order, extensions before alternatives: that order
    // visits index sets lexicographically, so the first hit is the smallest.
    bool lex_reconstruct(std::size_t start, const std::vector<uint64_t>& covered,
                         std::size_t sup_u, std::size_t pos_u, int depth,
                         std::vector<std::size_t>& chosen) {
        if (sup_u == best_sup && precision_meets(pos_u, sup_u, min_precision)) return true;
        if (depth == sparsity) return false;
        if (expired()) {
            timed_out = true;
            return false;
        }
        const int slots = sparsity - depth;
        std::vector<std::size_t> gains;
        for (std::size_t j = start; j < inst->match.size(); ++j) {
            if (!active[j]) continue;
            const std::size_t g = gain_of(j, covered);
            if (g > 0) gains.push_back(g);
        }
        std::sort(gains.rbegin(), gains.rend());
        std::size_t bound = sup_u;
        for (std::size_t c = 0; c < gains.size() && c < static_cast<std::size_t>(slots); ++c) {
            bound += gains[c];
        }
        if (bound < best_sup) return false;

        std::vector<uint64_t> next(w);
        for (std::size_t j = start; j < inst->match.size(); ++j) {
            if (!active[j]) continue;
            const auto& row = inst->match[j];
            std::size_t gain = 0, pos_gain = 0;
            for (std::size_t i = 0; i < w; ++i) {
                const uint64_t fresh = row[i] & ~covered[i];
                gain += static_cast<std::size_t>(std::popcount(fresh));
                pos_gain += static_cast<std::size_t>(std::popcount(fresh & inst->labels[i]));
                next[i] = covered[i] | row[i];
            }
            if (gain == 0) continue;  // a redundant member can only grow the set
            chosen.push_back(j);
            if (lex_reconstruct(j + 1, next, sup_u + gain, pos_u + pos_gain, depth + 1, chosen)) {
                return true;
            }
            chosen.pop_back();
            if (timed_out) return false;
        }
        return false;
    }
};

}  // namespace

SelectionResult select_ilp(const ILPInstance& inst, double time_limit_seconds) {
    inst.validate();
    SetSolver s;
    s.inst = &inst;
    s.w = words_for(static_cast<int>(inst.n_designs));
    s.sparsity = inst.sparsity;
    s.min_precision = inst.min_precision;
    const std::size_t m = inst.match.size();
    s.sup.resize(m);
    for (std::size_t j = 0; j < m; ++j) s.sup[j] = count_bits(inst.match[j].data(), s.w);
    s.active.assign(m, 1);
    if (time_limit_seconds > 0) {
        s.use_deadline = true;
        s.deadline = std::chrono::steady_clock::now() +
                     std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                         std::chrono::duration<double>(time_limit_seconds));
    }
    s.reduce();

    std::vector<std::size_t> remaining;
    for (std::size_t j = 0; j < m; ++j) {
        if (s.active[j]) remaining.push_back(j);
    }
    std::vector<uint64_t> covered(s.w, 0);
    s.node(remaining, covered, 0, 0, 0);

    SelectionResult res;
    res.support = s.best_sup;
    res.positives = s.best_pos;
    res.feasible = !s.best_chosen.empty();
    res.proven_optimal = !s.timed_out;
    if (s.timed_out) {
        const std::size_t ub = std::max(s.best_sup, s.abandoned);
        res.optimality_gap =
            ub ? static_cast<double>(ub - s.best_sup) / static_cast<double>(ub) : 0.0;
    }
    res.chosen = s.best_chosen;
    std::sort(res.chosen.begin(), res.chosen.end());
    if (res.feasible && res.proven_optimal) {
        std::vector<std::size_t> lex;
        std::fill(covered.begin(), covered.end(), 0);
        if (s.lex_reconstruct(0, covered, 0, 0, 0, lex)) {
            // optimal selections share their support but not necessarily
            // their positives; report the counts of the returned set
            res.chosen = lex;  // ascending by construction
            std::fill(covered.begin(), covered.end(), 0);
            for (std::size_t j : lex) {
                for (std::size_t i = 0; i < s.w; ++i) covered[i] |= inst.match[j][i];
            }
            res.support = count_bits(covered.data(), s.w);
            res.positives = and_count_only(covered.data(), inst.labels.data(), s.w);
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// template sets
// ---------------------------------------------------------------------------

double TemplateSet::precision() const {
    return support ? static_cast<double>(positives) / static_cast<double>(support) : 0.0;
}

int TemplateSet::predict(const UnitCell& cell) const {
    for (const auto& t : templates) {
        if (t.matches(cell)) return 1;
    }
    return 0;
}

namespace {

constexpr const char* kSetTag = "# gapminer template set";

std::pair<std::string, std::string> header_entry(const std::string& line) {
    const auto eq = line.find('=');
    if (line.size() < 2 || line[0] != '#' || eq == std::string::npos) {
        throw std::runtime_error("malformed template set header line: " + line);
    }
    auto trim = [](std::string v) {
        const auto a = v.find_first_not_of(" \t");
        const auto b = v.find_last_not_of(" \t");
        return a == std::string::npos ? std::string() : v.substr(a, b - a + 1);
    };
    return {trim(line.substr(1, eq - 1)), trim(line.substr(eq + 1))};
}

}  // namespace

void TemplateSet::save(std::ostream& out) const {
    out << kSetTag << "\n";
    out << "# resolution = " << resolution << "\n";
    out << "# sparsity = " << sparsity << "\n";
    out << "# min_precision = " << format_double(min_precision) << "\n";
    out << "# support = " << support << "\n";
    out << "# positives = " << positives << "\n";
    out << "# feasible = " << (feasible ? 1 : 0) << "\n";
    out << "# proven_optimal = " << (proven_optimal ? 1 : 0) << "\n";
    out << "# optimality_gap = " << format_double(optimality_gap) << "\n";
    out << "# dataset_digest = " << dataset_digest << "\n";
    out << "# columns = pattern support positives\n";
    for (const auto& t : templates) {
        out << t.pattern() << " " << t.support << " " << t.positives << "\n";
    }
}

TemplateSet TemplateSet::load(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kSetTag) {
        throw std::runtime_error("not a template set file");
    }
    TemplateSet set;
    bool saw_columns = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto [key, val] = header_entry(line);
            if (key == "resolution") {
                set.resolution = std::stoi(val);
            } else if (key == "sparsity") {
                set.sparsity = std::stoi(val);
            } else if (key == "min_precision") {
                set.min_precision = parse_double(val);
            } else if (key == "support") {
                set.support = std::stoull(val);
            } else if (key == "positives") {
                set.positives = std::stoull(val);
            } else if (key == "feasible") {
                set.feasible = val != "0";
            } else if (key == "proven_optimal") {
                set.proven_optimal = val != "0";
            } else if (key == "optimality_gap") {
                set.optimality_gap = parse_double(val);
            } else if (key == "dataset_digest") {
                set.dataset_digest = val;
            } else if (key == "columns") {
                if (val != "pattern support positives") {
                    throw std::runtime_error("unexpected template set columns: " + val);
                }
                saw_columns = true;
            } else {
                throw std::runtime_error("unknown template set header key: " + key);
            }
            continue;
        }
        if (!saw_columns) throw std::runtime_error("template line before the columns header");
        std::istringstream row(line);
        std::string pattern;
        std::size_t sup = 0, posv = 0;
        if (!(row >> pattern >> sup >> posv)) {
            throw std::runtime_error("malformed template line: " + line);
        }
        std::string extra;
        if (row >> extra) throw std::runtime_error("trailing fields on template line: " + line);
        Template t = Template::from_pattern(pattern, set.resolution);
        t.support = sup;
        t.positives = posv;
        set.templates.push_back(std::move(t));
    }
    if (!saw_columns) throw std::runtime_error("template set file has no columns header");
    return set;
}

std::string dataset_rows_digest(const std::vector<uint64_t>& designs,
                                const std::vector<uint8_t>& labels) {
    if (designs.size() != labels.size()) {
        throw std::invalid_argument("design and label counts differ");
    }
    uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < designs.size(); ++i) {
        const std::string row =
            std::to_string(designs[i]) + "," + (labels[i] ? "1" : "0") + "\n";
        h = fnv1a64(row, h);
    }
    return hex64(h);
}

TemplateSet mine_templates(const std::vector<uint64_t>& designs,
                           const std::vector<uint8_t>& labels, const MiningOptions& opt,
                           int resolution, PreselectStats* stats) {
    const double p_pre = opt.min_precision_pre < 0
                             ? std::max(0.0, opt.min_precision - 0.05)
                             : opt.min_precision_pre;
    auto candidates =
        preselect(designs, labels, opt.min_support_pre, p_pre, resolution, opt.workers, stats);

    TemplateSet set;
    set.resolution = resolution;
    set.sparsity = opt.sparsity;
    set.min_precision = opt.min_precision;
    set.dataset_digest = dataset_rows_digest(designs, labels);
    if (candidates.empty()) {
        set.feasible = false;
        set.proven_optimal = true;
        return set;
    }
    ILPInstance inst = build_instance(designs, labels, std::move(candidates), opt.sparsity,
                                      opt.min_precision, opt.workers);
    SelectionResult sel = select_ilp(inst, opt.time_limit_seconds);
    set.feasible = sel.feasible;
    set.proven_optimal = sel.proven_optimal;
    set.optimality_gap = sel.optimality_gap;
    set.support = sel.support;
    set.positives = sel.positives;
    for (std::size_t idx : sel.chosen) {
        set.templates.push_back(inst.candidates[idx]);
    }
    return set;
}

SetCounts evaluate_templates(const TemplateSet& set, const std::vector<uint64_t>& designs,
                             const std::vector<uint8_t>& labels) {
    if (designs.size() != labels.size()) {
        throw std::invalid_argument("design and label counts differ");
    }
    SetCounts counts;
    for (std::size_t i = 0; i < designs.size(); ++i) {
        bool matched = false;
        for (const auto& t : set.templates) {
            if (t.matches_id(designs[i])) {
                matched = true;
                break;
            }
        }
        if (matched) {
            counts.support += 1;
            if (labels[i]) counts.positives += 1;
        }
    }
    return counts;
}

}  // namespace gapminer
