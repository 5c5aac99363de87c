#include "gapminer/templates.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "gapminer/unitcell.hpp"
#include "gapminer/util.hpp"

using namespace gapminer;

namespace {

std::size_t pow3(int e) {
    std::size_t p = 1;
    for (int i = 0; i < e; ++i) p *= 3;
    return p;
}

// Entry-by-entry reference matcher: pixel k of the pattern against bit k of
// the design id.
bool naive_match(const std::string& pattern, uint64_t id) {
    for (std::size_t k = 0; k < pattern.size(); ++k) {
        const int bit = static_cast<int>((id >> k) & 1);
        if (pattern[k] == '0' && bit) return false;
        if (pattern[k] == '1' && !bit) return false;
    }
    return true;
}

std::string pattern_from_code(std::size_t code, int n_pixels) {
    std::string pat(static_cast<std::size_t>(n_pixels), '*');
    for (int k = 0; k < n_pixels; ++k) {
        const int digit = static_cast<int>(code % 3);
        code /= 3;
        pat[static_cast<std::size_t>(k)] = digit == 0 ? '*' : (digit == 1 ? '0' : '1');
    }
    return pat;
}

// Scans every template in counting order with the naive matcher.
std::vector<Template> naive_preselect(const std::vector<uint64_t>& designs,
                                      const std::vector<uint8_t>& labels,
                                      std::size_t min_support, double min_precision,
                                      int resolution) {
    const int n_pix = irreducible_count(resolution);
    std::vector<Template> out;
    for (std::size_t code = 0; code < pow3(n_pix); ++code) {
        const std::string pat = pattern_from_code(code, n_pix);
        std::size_t sup = 0, posv = 0;
        for (std::size_t i = 0; i < designs.size(); ++i) {
            if (!naive_match(pat, designs[i])) continue;
            ++sup;
            if (labels[i]) ++posv;
        }
        if (sup < min_support) continue;
        if (static_cast<double>(posv) / static_cast<double>(sup) < min_precision) continue;
        Template t = Template::from_pattern(pat, resolution);
        t.support = sup;
        t.positives = posv;
        out.push_back(std::move(t));
    }
    return out;
}

struct RandomDataset {
    std::vector<uint64_t> designs;
    std::vector<uint8_t> labels;
};

RandomDataset random_dataset(uint64_t seed, std::size_t n, int resolution) {
    auto gen = rng_stream(seed, 31);
    const int n_pix = irreducible_count(resolution);
    RandomDataset d;
    d.designs.reserve(n);
    d.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.designs.push_back(gen() & ((uint64_t(1) << n_pix) - 1));
        d.labels.push_back(static_cast<uint8_t>(gen() & 1));
    }
    return d;
}

std::string random_pattern(std::mt19937_64& gen, int n_pixels) {
    std::string pat(static_cast<std::size_t>(n_pixels), '*');
    for (auto& c : pat) {
        switch (gen() % 3) {
            case 0: c = '*'; break;
            case 1: c = '0'; break;
            default: c = '1'; break;
        }
    }
    return pat;
}

// Hand-built selection instance over explicit match masks (one word, N <= 64).
ILPInstance tiny_instance(std::size_t n_designs, const std::vector<uint64_t>& rows,
                          uint64_t labels, int sparsity, double min_precision) {
    ILPInstance inst;
    inst.n_designs = n_designs;
    inst.sparsity = sparsity;
    inst.min_precision = min_precision;
    inst.labels = {labels};
    for (uint64_t row : rows) {
        inst.match.push_back({row});
        Template t;  // payload only; the solver works off the masks
        t.resolution = 4;
        t.care = {0};
        t.value = {0};
        inst.candidates.push_back(t);
    }
    return inst;
}

struct OracleBest {
    std::size_t support = 0;
    std::size_t positives = 0;
    bool feasible = false;
    std::vector<std::size_t> chosen;  // lex-least irredundant optimum
};

// Exhaustive reference for select_ilp: every subset of at most `sparsity`
// candidates, union counts by looping over designs.
OracleBest oracle_select(const ILPInstance& inst) {
    const std::size_t m = inst.match.size();
    const std::size_t words = inst.labels.size();
    OracleBest best;
    std::vector<std::vector<std::size_t>> winners;
    for (uint64_t mask = 1; mask < (uint64_t(1) << m); ++mask) {
        if (std::popcount(mask) > inst.sparsity) continue;
        std::vector<uint64_t> covered(words, 0);
        std::vector<std::size_t> ids;
        for (std::size_t j = 0; j < m; ++j) {
            if ((mask >> j) & 1) {
                ids.push_back(j);
                for (std::size_t w = 0; w < words; ++w) covered[w] |= inst.match[j][w];
            }
        }
        std::size_t sup = 0, posv = 0;
        for (std::size_t w = 0; w < words; ++w) {
            sup += static_cast<std::size_t>(std::popcount(covered[w]));
            posv += static_cast<std::size_t>(std::popcount(covered[w] & inst.labels[w]));
        }
        if (sup == 0) continue;
        if (static_cast<double>(posv) / static_cast<double>(sup) < inst.min_precision) continue;
        if (sup > best.support) {
            best = OracleBest{sup, posv, true, {}};
            winners.clear();
        }
        if (sup == best.support && best.feasible) {
            // only irredundant selections compete in the tie-break: applied in
            // ascending order, every member must add at least one new design
            std::vector<uint64_t> partial(words, 0);
            bool irredundant = true;
            for (std::size_t j : ids) {
                bool adds = false;
                for (std::size_t w = 0; w < words; ++w) {
                    if (inst.match[j][w] & ~partial[w]) adds = true;
                    partial[w] |= inst.match[j][w];
                }
                if (!adds) {
                    irredundant = false;
                    break;
                }
            }
            if (irredundant) winners.push_back(ids);
        }
    }
    if (best.feasible) {
        best.chosen = *std::min_element(winners.begin(), winners.end());
        // report the counts of the lex-least winner, not of the first found
        std::vector<uint64_t> covered(words, 0);
        for (std::size_t j : best.chosen) {
            for (std::size_t w = 0; w < words; ++w) covered[w] |= inst.match[j][w];
        }
        best.positives = 0;
        for (std::size_t w = 0; w < words; ++w) {
            best.positives +=
                static_cast<std::size_t>(std::popcount(covered[w] & inst.labels[w]));
        }
    }
    return best;
}

}  // namespace

TEST_CASE("patterns round trip through templates") {
    Template t = Template::from_pattern("1*0**1");
    CHECK(t.resolution == 6);
    CHECK(t.pattern() == "1*0**1");
    CHECK(t.free_count() == 3);
    t.validate();

    Template full = Template::from_pattern(std::string(15, '*'));
    CHECK(full.resolution == 10);
    CHECK(full.free_count() == 15);

    CHECK_THROWS_AS(Template::from_pattern("1*2"), std::invalid_argument);
    CHECK_THROWS_AS(Template::from_pattern("****"), std::invalid_argument);  // no T(n) = 4
    CHECK_THROWS_AS(Template::from_pattern("1*0", 10), std::invalid_argument);

    Template bad = t;
    bad.value[0] |= uint64_t(1) << 1;  // value bit outside the care mask
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = t;
    bad.care.push_back(0);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("the mask matcher agrees with an entry-by-entry loop") {
    auto gen = rng_stream(2026, 7);
    const int n_pix = irreducible_count(10);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::string pat = random_pattern(gen, n_pix);
        const uint64_t id = gen() & ((uint64_t(1) << n_pix) - 1);
        Template t = Template::from_pattern(pat, 10);
        CHECK(t.matches_id(id) == naive_match(pat, id));
    }
    // the cell-based matcher sees the same irreducible bits as the id matcher
    for (int trial = 0; trial < 50; ++trial) {
        const std::string pat = random_pattern(gen, n_pix);
        const uint64_t id = gen() & ((uint64_t(1) << n_pix) - 1);
        Template t = Template::from_pattern(pat, 10);
        CHECK(t.matches(UnitCell::from_design_id(10, id)) == t.matches_id(id));
    }
    Template t = Template::from_pattern(std::string(15, '*'));
    CHECK_THROWS_AS(t.matches(UnitCell::from_design_id(4, 3)), std::invalid_argument);
}

TEST_CASE("a fully specified template matches exactly one design") {
    auto gen = rng_stream(11, 3);
    const int n_pix = irreducible_count(8);
    const uint64_t id = gen() & ((uint64_t(1) << n_pix) - 1);
    std::string pat(static_cast<std::size_t>(n_pix), '0');
    for (int k = 0; k < n_pix; ++k) {
        if ((id >> k) & 1) pat[static_cast<std::size_t>(k)] = '1';
    }
    Template t = Template::from_pattern(pat, 8);
    CHECK(t.free_count() == 0);
    CHECK(t.matches_id(id));
    for (int k = 0; k < n_pix; ++k) {
        CHECK_FALSE(t.matches_id(id ^ (uint64_t(1) << k)));
    }
}

TEST_CASE("pre-selection equals the full scan on small grids") {
    struct GridCase {
        int resolution;
        uint64_t seed;
        std::size_t n;
    };
    struct Thresholds {
        std::size_t min_sup;
        double min_prec;
    };
    for (const GridCase& grid :
         {GridCase{4, 100, 40}, GridCase{6, 101, 120}, GridCase{8, 102, 100}}) {
        const int resolution = grid.resolution;
        CAPTURE(resolution);
        auto data = random_dataset(grid.seed, grid.n, resolution);
        for (const Thresholds& th :
             {Thresholds{1, 0.0}, Thresholds{3, 0.5}, Thresholds{8, 0.6}}) {
            const std::size_t min_sup = th.min_sup;
            const double min_prec = th.min_prec;
            CAPTURE(min_sup);
            PreselectStats stats{};
            auto fast = preselect(data.designs, data.labels, min_sup, min_prec, resolution, 2,
                                  &stats);
            auto slow = naive_preselect(data.designs, data.labels, min_sup, min_prec,
                                        resolution);
            REQUIRE(fast.size() == slow.size());
            for (std::size_t i = 0; i < fast.size(); ++i) {
                CHECK(fast[i].pattern() == slow[i].pattern());
                CHECK(fast[i].support == slow[i].support);
                CHECK(fast[i].positives == slow[i].positives);
            }
            CHECK(stats.space == pow3(irreducible_count(resolution)));
            CHECK(stats.retained == fast.size());
            CHECK(stats.evaluated <= stats.space);
        }
    }
}

TEST_CASE("the output order does not depend on the worker count") {
    auto data = random_dataset(55, 150, 8);
    auto one = preselect(data.designs, data.labels, 2, 0.4, 8, 1);
    auto four = preselect(data.designs, data.labels, 2, 0.4, 8, 4);
    REQUIRE(one.size() == four.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].pattern() == four[i].pattern());
        CHECK(one[i].support == four[i].support);
    }
}

TEST_CASE("specializing a template never raises its support") {
    auto data = random_dataset(77, 200, 8);
    auto all = preselect(data.designs, data.labels, 1, 0.0, 8, 0);
    // index retained templates by pattern for chain lookups
    auto gen = rng_stream(77, 5);
    const int n_pix = irreducible_count(8);
    for (int trial = 0; trial < 200; ++trial) {
        std::string pat = random_pattern(gen, n_pix);
        Template t = Template::from_pattern(pat, 8);
        std::size_t parent_support = 0;
        for (std::size_t i = 0; i < data.designs.size(); ++i) {
            if (t.matches_id(data.designs[i])) ++parent_support;
        }
        // specialize one free pixel, if any
        std::vector<int> free;
        for (int k = 0; k < n_pix; ++k) {
            if (pat[static_cast<std::size_t>(k)] == '*') free.push_back(k);
        }
        if (free.empty()) continue;
        const int k = free[gen() % free.size()];
        pat[static_cast<std::size_t>(k)] = (gen() & 1) ? '1' : '0';
        Template sp = Template::from_pattern(pat, 8);
        std::size_t child_support = 0;
        for (std::size_t i = 0; i < data.designs.size(); ++i) {
            if (sp.matches_id(data.designs[i])) ++child_support;
        }
        CHECK(child_support <= parent_support);
    }
    CHECK(all.size() > 0);
}

TEST_CASE("the full-resolution scan space is 14348907 templates") {
    // a tight support threshold prunes almost everything, so the scan itself
    // stays cheap; the space size is what the stats must report
    auto data = random_dataset(5, 64, 10);
    PreselectStats stats{};
    auto out = preselect(data.designs, data.labels, 60, 0.0, 10, 0, &stats);
    CHECK(stats.space == 14348907);
    CHECK(stats.evaluated < stats.space);
    CHECK(stats.retained == out.size());
    CHECK_THROWS_AS(preselect(data.designs, data.labels, 1, 0.0, 12, 0), std::invalid_argument);
}

TEST_CASE("pre-selection validates its inputs") {
    std::vector<uint64_t> designs{1, 2, 3};
    std::vector<uint8_t> labels{1, 0};
    CHECK_THROWS_AS(preselect(designs, labels, 1, 0.5, 4), std::invalid_argument);
    labels.push_back(1);
    CHECK_THROWS_AS(preselect(designs, labels, 0, 0.5, 4), std::invalid_argument);
    CHECK_THROWS_AS(preselect(designs, labels, 1, 1.5, 4), std::invalid_argument);
    CHECK_THROWS_AS(preselect({uint64_t(1) << 60}, {uint8_t(1)}, 1, 0.5, 4),
                    std::invalid_argument);
}

TEST_CASE("set selection equals the exhaustive oracle on small instances") {
    auto gen = rng_stream(404, 1);
    for (int trial = 0; trial < 18; ++trial) {
        CAPTURE(trial);
        const std::size_t n = 40 + gen() % 25;  // one-word instances
        const std::size_t m = 4 + gen() % 17;
        const int sparsity = 1 + static_cast<int>(gen() % 3);
        const double min_precision = (trial % 3 == 0) ? 0.6 : (trial % 3 == 1 ? 0.8 : 0.9);
        const uint64_t space = n == 64 ? ~uint64_t(0) : ((uint64_t(1) << n) - 1);
        std::vector<uint64_t> rows;
        for (std::size_t j = 0; j < m; ++j) {
            // densities vary so instances mix broad and narrow candidates
            uint64_t row = gen() & space;
            if (j % 3 == 0) row &= gen();
            if (j % 4 == 1) row &= gen() | gen();
            rows.push_back(row);
        }
        const uint64_t labels = (gen() | gen()) & space;  // ~75% positive
        auto inst = tiny_instance(n, rows, labels, sparsity, min_precision);
        auto res = select_ilp(inst);
        auto ref = oracle_select(inst);
        CHECK(res.feasible == ref.feasible);
        CHECK(res.proven_optimal);
        CHECK(res.optimality_gap == 0.0);
        if (!ref.feasible) {
            CHECK(res.chosen.empty());
            CHECK(res.support == 0);
            continue;
        }
        CHECK(res.support == ref.support);
        CHECK(res.positives == ref.positives);
        CHECK(res.chosen == ref.chosen);
        // re-check the returned selection against the constraints
        uint64_t covered = 0;
        for (std::size_t j : res.chosen) covered |= rows[j];
        const auto sup = static_cast<std::size_t>(std::popcount(covered));
        const auto posv = static_cast<std::size_t>(std::popcount(covered & labels));
        CHECK(sup == res.support);
        CHECK(posv == res.positives);
        CHECK(static_cast<double>(posv) / static_cast<double>(sup) >= min_precision);
        CHECK(res.chosen.size() <= static_cast<std::size_t>(sparsity));
    }
}

TEST_CASE("a lone viable candidate is selected") {
    auto inst = tiny_instance(8, {0b00001111}, 0b00000111, 2, 0.7);
    auto res = select_ilp(inst);
    REQUIRE(res.feasible);
    CHECK(res.chosen == std::vector<std::size_t>{0});
    CHECK(res.support == 4);
    CHECK(res.positives == 3);
}

TEST_CASE("an unreachable precision threshold reports infeasible") {
    auto inst = tiny_instance(8, {0b00001111, 0b11110000}, 0b00010001, 2, 0.9);
    auto res = select_ilp(inst);
    CHECK_FALSE(res.feasible);
    CHECK(res.chosen.empty());
    CHECK(res.support == 0);
    CHECK(res.proven_optimal);
}

TEST_CASE("ties go to the lexicographically smallest index set") {
    // two disjoint all-positive candidates with equal support
    auto inst = tiny_instance(8, {0b00001111, 0b11110000}, 0b11111111, 1, 0.9);
    auto res = select_ilp(inst);
    REQUIRE(res.feasible);
    CHECK(res.chosen == std::vector<std::size_t>{0});
    CHECK(res.support == 4);
}

TEST_CASE("superset elimination keeps candidates whose replacement would add negatives") {
    // candidate 1 matches a superset of candidate 0, at equal precision, but
    // its extra designs include a negative: dropping 0 would lose the optimum
    const uint64_t j = 0b000000000011;       // designs 0 (pos) and 1 (neg)
    const uint64_t j_sup = 0b000000001111;   // adds designs 2 (pos) and 3 (neg)
    const uint64_t k = 0b111111110000;       // designs 4..11, all positive
    const uint64_t labels = 0b111111110101;  // designs 1 and 3 negative
    auto inst = tiny_instance(12, {j, j_sup, k}, labels, 2, 0.9);
    auto res = select_ilp(inst);
    REQUIRE(res.feasible);
    CHECK(res.support == 10);
    CHECK(res.positives == 9);
    CHECK(res.chosen == std::vector<std::size_t>{0, 2});
}

TEST_CASE("an expired time budget returns an incumbent with a bound gap") {
    auto gen = rng_stream(909, 2);
    std::vector<uint64_t> rows;
    for (int j = 0; j < 40; ++j) rows.push_back(gen());
    auto inst = tiny_instance(64, rows, gen() | gen(), 6, 0.6);
    auto res = select_ilp(inst, 1e-9);
    CHECK_FALSE(res.proven_optimal);
    CHECK(res.optimality_gap >= 0.0);
    CHECK(res.optimality_gap <= 1.0);
    if (res.feasible) {
        uint64_t covered = 0;
        for (std::size_t j : res.chosen) covered |= rows[j];
        CHECK(static_cast<std::size_t>(std::popcount(covered)) == res.support);
    }
}

TEST_CASE("instances validate their shape") {
    auto inst = tiny_instance(8, {0b1111}, 0b0111, 2, 0.7);
    inst.validate();
    auto bad = inst;
    bad.sparsity = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = inst;
    bad.labels.push_back(0);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = inst;
    bad.labels[0] |= uint64_t(1) << 20;  // tail bit beyond the 8 designs
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = inst;
    bad.match.clear();
    bad.candidates.clear();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("build_instance packs the matching matrix") {
    auto data = random_dataset(303, 90, 6);
    auto cands = preselect(data.designs, data.labels, 2, 0.3, 6, 0);
    REQUIRE(cands.size() > 0);
    auto inst = build_instance(data.designs, data.labels, cands, 3, 0.6, 2);
    REQUIRE(inst.match.size() == cands.size());
    for (std::size_t j = 0; j < cands.size(); ++j) {
        std::size_t sup = 0;
        for (std::size_t i = 0; i < data.designs.size(); ++i) {
            const bool hit = cands[j].matches_id(data.designs[i]);
            CHECK(((inst.match[j][i / 64] >> (i % 64)) & 1) == (hit ? 1 : 0));
            if (hit) ++sup;
        }
        CHECK(sup == cands[j].support);  // pre-selection stats match the matrix
    }
}

TEST_CASE("template set files round trip") {
    TemplateSet set;
    set.resolution = 6;
    set.sparsity = 2;
    set.min_precision = 0.95;
    set.support = 12;
    set.positives = 12;
    set.feasible = true;
    set.proven_optimal = true;
    set.optimality_gap = 0.0;
    set.dataset_digest = "00aa11bb22cc33dd";
    Template a = Template::from_pattern("1*0**1");
    a.support = 7;
    a.positives = 7;
    Template b = Template::from_pattern("0*1*1*");
    b.support = 5;
    b.positives = 5;
    set.templates = {a, b};

    std::ostringstream out;
    set.save(out);
    std::istringstream in(out.str());
    TemplateSet back = TemplateSet::load(in);
    CHECK(back.resolution == 6);
    CHECK(back.sparsity == 2);
    CHECK(back.min_precision == 0.95);
    CHECK(back.support == 12);
    CHECK(back.positives == 12);
    CHECK(back.feasible);
    CHECK(back.proven_optimal);
    CHECK(back.dataset_digest == "00aa11bb22cc33dd");
    REQUIRE(back.templates.size() == 2);
    CHECK(back.templates[0].pattern() == "1*0**1");
    CHECK(back.templates[0].support == 7);
    CHECK(back.templates[1].pattern() == "0*1*1*");

    std::ostringstream again;
    back.save(again);
    CHECK(again.str() == out.str());

    std::istringstream junk("not a template file\n");
    CHECK_THROWS_AS(TemplateSet::load(junk), std::runtime_error);
    std::istringstream oddkey("# gapminer template set\n# oddity = 1\n");
    CHECK_THROWS_AS(TemplateSet::load(oddkey), std::runtime_error);
    std::istringstream nocols("# gapminer template set\n# resolution = 6\n");
    CHECK_THROWS_AS(TemplateSet::load(nocols), std::runtime_error);
}

TEST_CASE("set prediction is the union of its templates") {
    TemplateSet set;
    set.resolution = 10;
    CHECK(set.predict(UnitCell::from_design_id(10, 7)) == 0);  // empty set matches nothing
    set.templates.push_back(Template::from_pattern(std::string(15, '*')));
    CHECK(set.predict(UnitCell::from_design_id(10, 7)) == 1);
    CHECK(set.precision() == 0.0);  // no recorded support
}

TEST_CASE("the dataset digest tracks both designs and labels") {
    std::vector<uint64_t> designs{1, 2, 3};
    std::vector<uint8_t> a{1, 0, 1}, b{1, 1, 0};
    CHECK(dataset_rows_digest(designs, a) != dataset_rows_digest(designs, b));
    CHECK(dataset_rows_digest(designs, a) == dataset_rows_digest({1, 2, 3}, {1, 0, 1}));
    CHECK(dataset_rows_digest({2, 1, 3}, a) != dataset_rows_digest(designs, a));
}

TEST_CASE("mining recovers a planted template") {
    const std::string planted = "1*0**1";
    Template truth = Template::from_pattern(planted);
    std::vector<uint64_t> designs;
    std::vector<uint8_t> labels;
    for (uint64_t id = 0; id < 64; ++id) {
        designs.push_back(id);
        labels.push_back(truth.matches_id(id) ? 1 : 0);
    }
    MiningOptions opt;
    opt.min_support_pre = 1;
    opt.sparsity = 1;
    opt.min_precision = 1.0;
    PreselectStats stats{};
    TemplateSet set = mine_templates(designs, labels, opt, 6, &stats);
    REQUIRE(set.feasible);
    CHECK(set.proven_optimal);
    REQUIRE(set.templates.size() == 1);
    CHECK(set.templates[0].pattern() == planted);
    CHECK(set.support == 8);
    CHECK(set.positives == 8);
    CHECK(set.precision() == 1.0);
    CHECK(set.dataset_digest == dataset_rows_digest(designs, labels));
    CHECK(stats.space == 729);
    CHECK(stats.retained > 0);

    auto counts = evaluate_templates(set, designs, labels);
    CHECK(counts.support == 8);
    CHECK(counts.positives == 8);
}

TEST_CASE("mining an unmatchable precision yields an explicit infeasible set") {
    // every design carries a negative label, so no template can be precise
    std::vector<uint64_t> designs;
    std::vector<uint8_t> labels;
    for (uint64_t id = 0; id < 32; ++id) {
        designs.push_back(id);
        labels.push_back(0);
    }
    MiningOptions opt;
    opt.min_support_pre = 1;
    opt.sparsity = 2;
    opt.min_precision = 0.9;
    TemplateSet set = mine_templates(designs, labels, opt, 6);
    CHECK_FALSE(set.feasible);
    CHECK(set.templates.empty());
    CHECK(set.support == 0);
}
