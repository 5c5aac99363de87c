#include "gapminer/tree.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace gapminer {

using nlohmann::json;

// ---------------------------------------------------------------------------
// objective
// ---------------------------------------------------------------------------

void Objective::validate() const {
    if (!(epsilon > 0)) throw std::invalid_argument("objective epsilon must be positive");
    if (k_support < 0) throw std::invalid_argument("support weight must be nonnegative");
    if (leaf_penalty < 0) throw std::invalid_argument("leaf penalty must be nonnegative");
}

std::string Objective::kind_name() const {
    return kind == Kind::BalancedAccuracy ? "balanced-accuracy" : "prec-support";
}

Objective Objective::balanced_accuracy(double leaf_penalty) {
    return Objective{Kind::BalancedAccuracy, 0.0, 1e-9, leaf_penalty};
}

Objective Objective::precision_support(double k, double leaf_penalty) {
    return Objective{Kind::PrecisionSupport, k, 1e-9, leaf_penalty};
}

double objective_value(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t pos_total,
                       std::size_t n_total, const Objective& obj) {
    obj.validate();
    if (tp + fn != pos_total) throw std::invalid_argument("inconsistent confusion counts");
    if (pos_total > n_total || fp > n_total - pos_total) {
        throw std::invalid_argument("inconsistent confusion counts");
    }
    double dtp = static_cast<double>(tp);
    if (obj.kind == Objective::Kind::PrecisionSupport) {
        return dtp / (dtp + static_cast<double>(fp) + obj.epsilon) -
               obj.k_support / (dtp + obj.epsilon);
    }
    std::size_t neg_total = n_total - pos_total;
    if (pos_total == 0 || neg_total == 0) {
        throw std::invalid_argument("balanced accuracy needs both classes");
    }
    double tpr = dtp / static_cast<double>(pos_total);
    double tnr = static_cast<double>(neg_total - fp) / static_cast<double>(neg_total);
    return 0.5 * (tpr + tnr);
}

// ---------------------------------------------------------------------------
// binarization
// ---------------------------------------------------------------------------

BinarizedFeatures binarize(const std::vector<std::vector<Rational>>& features,
                           int max_thresholds_per_feature) {
    if (max_thresholds_per_feature < 1) {
        throw std::invalid_argument("threshold cap must be >= 1");
    }
    BinarizedFeatures out;
    out.n_rows = features.size();
    out.n_features = out.n_rows ? features[0].size() : 0;
    for (const auto& row : features) {
        if (row.size() != out.n_features) {
            throw std::invalid_argument("ragged feature matrix");
        }
    }
    out.thresholds.resize(out.n_features);
    for (std::size_t f = 0; f < out.n_features; ++f) {
        std::vector<Rational> vals;
        vals.reserve(out.n_rows);
        for (const auto& row : features) vals.push_back(row[f]);
        std::sort(vals.begin(), vals.end(), rational_less);
        vals.erase(std::unique(vals.begin(), vals.end(), rational_equal), vals.end());
        if (vals.size() < 2) continue;  // constant feature: no columns

        std::vector<Rational> mids;
        mids.reserve(vals.size() - 1);
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            mids.push_back(rational_mid(vals[i], vals[i + 1]));
        }
        const std::size_t cap = static_cast<std::size_t>(max_thresholds_per_feature);
        if (mids.size() > cap) {
            // Evenly spaced quantile midpoints: keep index (i+1)*J/(cap+1).
            std::vector<Rational> kept;
            kept.reserve(cap);
            for (std::size_t i = 0; i < cap; ++i) {
                kept.push_back(mids[(i + 1) * mids.size() / (cap + 1)]);
            }
            kept.erase(std::unique(kept.begin(), kept.end(), rational_equal), kept.end());
            mids = std::move(kept);
        }
        out.thresholds[f] = mids;
        for (const auto& thr : mids) {
            BinaryColumn col;
            col.feature = static_cast<int>(f);
            col.threshold = thr;
            col.bits.resize(out.n_rows);
            for (std::size_t r = 0; r < out.n_rows; ++r) {
                col.bits[r] = static_cast<uint8_t>(rational_less(thr, features[r][f]));
            }
            out.columns.push_back(std::move(col));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// tree structure
// ---------------------------------------------------------------------------

int SparseTree::leaf_count() const {
    int n = 0;
    for (const auto& node : nodes) n += node.is_leaf();
    return n;
}

int SparseTree::depth() const {
    if (nodes.empty()) return 0;
    std::function<int(int)> walk = [&](int i) -> int {
        const auto& node = nodes[static_cast<std::size_t>(i)];
        if (node.is_leaf()) return 0;
        return 1 + std::max(walk(node.left), walk(node.right));
    };
    return walk(0);
}

int SparseTree::predict(const std::vector<Rational>& features) const {
    if (nodes.empty()) throw std::logic_error("empty tree");
    int i = 0;
    for (;;) {
        const auto& node = nodes[static_cast<std::size_t>(i)];
        if (node.is_leaf()) return node.label;
        if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= features.size()) {
            throw std::invalid_argument("feature vector does not match the tree's layout");
        }
        i = rational_less(node.threshold, features[static_cast<std::size_t>(node.feature)])
                ? node.right
                : node.left;
    }
}

void SparseTree::confusion(std::size_t& tp, std::size_t& fp, std::size_t& fn,
                           std::size_t& tn) const {
    tp = fp = fn = tn = 0;
    for (const auto& node : nodes) {
        if (!node.is_leaf()) continue;
        if (node.label == 1) {
            tp += node.pos;
            fp += node.neg;
        } else {
            fn += node.pos;
            tn += node.neg;
        }
    }
}

// ---------------------------------------------------------------------------
// model file
// ---------------------------------------------------------------------------

void SparseTree::save_json(std::ostream& out) const {
    json j;
    j["format"] = "gapminer-tree";
    j["objective"] = {{"kind", objective.kind_name()},
                      {"K", objective.k_support},
                      {"epsilon", objective.epsilon},
                      {"lambda", objective.leaf_penalty}};
    j["train"] = {{"positives", train_pos},
                  {"negatives", train_neg},
                  {"objective_value", train_value},
                  {"optimality_gap", optimality_gap}};
    j["feature_names"] = feature_names;
    json jn = json::array();
    for (const auto& node : nodes) {
        if (node.is_leaf()) {
            jn.push_back({{"label", node.label}, {"pos", node.pos}, {"neg", node.neg}});
        } else {
            jn.push_back({{"feature", node.feature},
                          {"name", feature_names.empty()
                                       ? ""
                                       : feature_names[static_cast<std::size_t>(node.feature)]},
                          {"threshold", {node.threshold.num, node.threshold.den}},
                          {"left", node.left},
                          {"right", node.right}});
        }
    }
    j["nodes"] = std::move(jn);
    out << j.dump(2) << "\n";
}

SparseTree SparseTree::load_json(std::istream& in) {
    json j = json::parse(in);
    if (j.value("format", "") != "gapminer-tree") {
        throw std::runtime_error("not a tree model file");
    }
    SparseTree t;
    const auto& jo = j.at("objective");
    std::string kind = jo.at("kind").get<std::string>();
    if (kind == "balanced-accuracy") {
        t.objective.kind = Objective::Kind::BalancedAccuracy;
    } else if (kind == "prec-support") {
        t.objective.kind = Objective::Kind::PrecisionSupport;
    } else {
        throw std::runtime_error("unknown objective kind: " + kind);
    }
    t.objective.k_support = jo.at("K").get<double>();
    t.objective.epsilon = jo.at("epsilon").get<double>();
    t.objective.leaf_penalty = jo.at("lambda").get<double>();
    t.objective.validate();
    const auto& jt = j.at("train");
    t.train_pos = jt.at("positives").get<std::size_t>();
    t.train_neg = jt.at("negatives").get<std::size_t>();
    t.train_value = jt.at("objective_value").get<double>();
    t.optimality_gap = jt.at("optimality_gap").get<double>();
    t.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& jn : j.at("nodes")) {
        TreeNode node;
        if (jn.contains("feature")) {
            node.feature = jn.at("feature").get<int>();
            node.threshold =
                Rational{jn.at("threshold").at(0).get<int64_t>(),
                         jn.at("threshold").at(1).get<int64_t>()};
            if (node.threshold.den <= 0) throw std::runtime_error("bad threshold denominator");
            node.left = jn.at("left").get<int>();
            node.right = jn.at("right").get<int>();
        } else {
            node.label = jn.at("label").get<int>();
            node.pos = jn.at("pos").get<std::size_t>();
            node.neg = jn.at("neg").get<std::size_t>();
        }
        t.nodes.push_back(node);
    }
    if (t.nodes.empty()) throw std::runtime_error("tree model has no nodes");
    for (const auto& node : t.nodes) {
        if (node.is_leaf()) continue;
        auto ok = [&](int c) { return c > 0 && static_cast<std::size_t>(c) < t.nodes.size(); };
        if (!ok(node.left) || !ok(node.right)) throw std::runtime_error("bad child index");
    }
    return t;
}

// ---------------------------------------------------------------------------
// exact search
// ---------------------------------------------------------------------------

namespace {

using Words = std::vector<uint64_t>;

struct ClassColumn {
    int feature = 0;
    Rational threshold{};
    Words bits;
};

struct SubNode;

// One Pareto-maximal outcome achievable on a subproblem, ordered by `a` up,
// `b` down, `leaves` down. Precision/support: a = true positives, b = false
// positives (the objective is increasing in TP and decreasing in FP, so the
// frontier maximum is the subproblem optimum for any completion around it).
// Balanced accuracy: a = tp*neg_total + tn*pos_total, the exact integer
// numerator of the leaf contributions over 2*pos_total*neg_total; b = 0.
struct Outcome {
    uint64_t a = 0;
    uint64_t b = 0;
    int leaves = 1;
    int kind = 0;  // 0/1: single leaf with that label; 2: split below
    int col = -1;
    const SubNode* left = nullptr;
    const SubNode* right = nullptr;
    int li = 0, ri = 0;  // indices into the child frontiers
};

struct SubNode {
    std::size_t pos = 0, neg = 0;
    std::vector<Outcome> front;
};

struct SearchDeadline {};

struct Searcher {
    // Problem data over label-equivalence classes.
    std::vector<ClassColumn> cols;
    std::vector<std::size_t> cls_pos, cls_neg;
    std::size_t n_classes = 0, words = 0;
    std::size_t pos_total = 0, neg_total = 0;
    Objective obj;
    bool balanced = false;
    double lambda = 0.0;

    std::chrono::steady_clock::time_point deadline{};
    bool use_deadline = false;

    // memo[d] maps a class-set mask to its solved subproblem with depth
    // budget d. Map node stability keeps Outcome child pointers valid.
    std::vector<std::map<Words, SubNode>> memo;

    double g(double tp, double fp) const {
        return tp / (tp + fp + obj.epsilon) - obj.k_support / (tp + obj.epsilon);
    }

    double value_of(const Outcome& e) const {
        double base = balanced
                          ? static_cast<double>(e.a) / (2.0 * static_cast<double>(pos_total) *
                                                        static_cast<double>(neg_total))
                          : g(static_cast<double>(e.a), static_cast<double>(e.b));
        return base - lambda * e.leaves;
    }

    Outcome leaf_outcome(int label, std::size_t pos, std::size_t neg) const {
        Outcome e;
        e.kind = label;
        if (balanced) {
            e.a = label ? static_cast<uint64_t>(pos) * neg_total
                        : static_cast<uint64_t>(neg) * pos_total;
        } else if (label) {
            e.a = pos;
            e.b = neg;
        }
        return e;
    }

    static bool dominates(const Outcome& x, const Outcome& y) {
        return x.a >= y.a && x.b <= y.b && x.leaves <= y.leaves;
    }

    // Equal coordinates count as dominated, so the first-inserted outcome
    // wins ties; erase_if preserves order. Both keep insertion deterministic.
    static void insert(std::vector<Outcome>& front, const Outcome& cand) {
        for (const auto& e : front) {
            if (dominates(e, cand)) return;
        }
        std::erase_if(front, [&](const Outcome& e) { return dominates(cand, e); });
        front.push_back(cand);
    }

    const SubNode* solve(const Words& set, int depth) {
        auto [it, fresh] = memo[static_cast<std::size_t>(depth)].try_emplace(set);
        SubNode& node = it->second;
        if (!fresh) return &node;
        if (use_deadline && std::chrono::steady_clock::now() >= deadline) {
            throw SearchDeadline{};  // fit() abandons the whole memo
        }
        for (std::size_t w = 0; w < words; ++w) {
            uint64_t m = set[w];
            while (m) {
                std::size_t c = w * 64 + static_cast<std::size_t>(std::countr_zero(m));
                m &= m - 1;
                node.pos += cls_pos[c];
                node.neg += cls_neg[c];
            }
        }
        insert(node.front, leaf_outcome(0, node.pos, node.neg));
        insert(node.front, leaf_outcome(1, node.pos, node.neg));
        // A pure set is classified perfectly by one leaf; a split could only
        // spend extra leaves on outcomes the leaf already dominates.
        if (depth == 0 || node.pos == 0 || node.neg == 0) return &node;

        std::map<Words, char> seen;  // distinct restrictions of the columns to `set`
        Words hi(words), lo(words);
        for (std::size_t j = 0; j < cols.size(); ++j) {
            bool any_hi = false, any_lo = false;
            for (std::size_t w = 0; w < words; ++w) {
                hi[w] = set[w] & cols[j].bits[w];
                lo[w] = set[w] & ~cols[j].bits[w];
                any_hi = any_hi || hi[w];
                any_lo = any_lo || lo[w];
            }
            if (!any_hi || !any_lo) continue;               // trivial split
            if (!seen.emplace(hi, 0).second) continue;      // same partition as earlier column
            const SubNode* l = solve(lo, depth - 1);
            const SubNode* r = solve(hi, depth - 1);
            for (std::size_t a = 0; a < l->front.size(); ++a) {
                for (std::size_t b = 0; b < r->front.size(); ++b) {
                    Outcome e;
                    e.a = l->front[a].a + r->front[b].a;
                    e.b = l->front[a].b + r->front[b].b;
                    e.leaves = l->front[a].leaves + r->front[b].leaves;
                    e.kind = 2;
                    e.col = static_cast<int>(j);
                    e.left = l;
                    e.right = r;
                    e.li = static_cast<int>(a);
                    e.ri = static_cast<int>(b);
                    insert(node.front, e);
                }
            }
        }
        return &node;
    }

    // Materialize the tree behind a frontier outcome, preorder.
    int emit(const SubNode* node, const Outcome& e, std::vector<TreeNode>& out) const {
        const int idx = static_cast<int>(out.size());
        out.emplace_back();
        if (e.kind != 2) {
            out[static_cast<std::size_t>(idx)] = TreeNode{-1, {}, -1, -1, e.kind,
                                                          node->pos, node->neg};
            return idx;
        }
        const auto& col = cols[static_cast<std::size_t>(e.col)];
        out[static_cast<std::size_t>(idx)] =
            TreeNode{col.feature, col.threshold, -1, -1, 0, node->pos, node->neg};
        const int l = emit(e.left, e.left->front[static_cast<std::size_t>(e.li)], out);
        const int r = emit(e.right, e.right->front[static_cast<std::size_t>(e.ri)], out);
        out[static_cast<std::size_t>(idx)].left = l;
        out[static_cast<std::size_t>(idx)].right = r;
        return idx;
    }
};

}  // namespace

SparseTree fit_optimal_tree(const BinarizedFeatures& bin, const std::vector<uint8_t>& labels,
                            const Objective& obj, const FitOptions& opt,
                            const std::vector<std::string>& feature_names) {
    obj.validate();
    if (opt.depth_limit < 1) throw std::invalid_argument("depth limit must be >= 1");
    if (labels.size() != bin.n_rows) throw std::invalid_argument("label count mismatch");
    std::size_t pos_total = 0;
    for (uint8_t y : labels) pos_total += (y != 0);
    if (pos_total == 0 || pos_total == labels.size()) {
        throw std::invalid_argument("training data needs both classes");
    }

    // Collapse rows that agree on every binary column: a tree cannot separate
    // them, so they reduce to (positive count, negative count) classes. This
    // both shrinks the search and makes the perfect-completion bound tight
    // for balanced accuracy.
    std::unordered_map<std::string, std::size_t> class_of;
    std::vector<std::size_t> row_class(bin.n_rows);
    std::string key(bin.columns.size(), '\0');
    std::vector<std::size_t> cls_pos, cls_neg;
    for (std::size_t r = 0; r < bin.n_rows; ++r) {
        for (std::size_t j = 0; j < bin.columns.size(); ++j) key[j] = char(bin.columns[j].bits[r]);
        auto [it, fresh] = class_of.emplace(key, cls_pos.size());
        if (fresh) {
            cls_pos.push_back(0);
            cls_neg.push_back(0);
        }
        row_class[r] = it->second;
        (labels[r] ? cls_pos : cls_neg)[it->second] += 1;
    }

    Searcher s;
    s.n_classes = cls_pos.size();
    s.words = (s.n_classes + 63) / 64;
    s.cls_pos = std::move(cls_pos);
    s.cls_neg = std::move(cls_neg);
    s.pos_total = pos_total;
    s.neg_total = labels.size() - pos_total;
    s.obj = obj;
    s.balanced = obj.kind == Objective::Kind::BalancedAccuracy;
    s.lambda = obj.leaf_penalty;

    // Class-level columns, dropping duplicates (identical class splits) while
    // keeping the first in canonical (feature, threshold) order.
    std::map<Words, std::size_t> seen_cols;
    for (const auto& col : bin.columns) {
        Words bits(s.words, 0);
        for (std::size_t r = 0; r < bin.n_rows; ++r) {
            if (col.bits[r]) bits[row_class[r] / 64] |= uint64_t(1) << (row_class[r] % 64);
        }
        if (seen_cols.emplace(bits, s.cols.size()).second) {
            s.cols.push_back(ClassColumn{col.feature, col.threshold, std::move(bits)});
        }
    }

    if (opt.time_limit_seconds > 0) {
        s.use_deadline = true;
        s.deadline = std::chrono::steady_clock::now() +
                     std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                         std::chrono::duration<double>(opt.time_limit_seconds));
    }

    Words full(s.words, 0);
    for (std::size_t c = 0; c < s.n_classes; ++c) full[c / 64] |= uint64_t(1) << (c % 64);

    // Seed the incumbent with the better single-leaf tree so even an
    // immediate deadline returns a valid model, then deepen one level at a
    // time: each completed depth is an exact optimum over trees that deep,
    // and every shallower tree is also a candidate at the next depth, so the
    // incumbent only improves. Ties keep the first (shallowest) tree.
    double best_value = -std::numeric_limits<double>::infinity();
    std::vector<TreeNode> best_nodes;
    const std::size_t neg_total = labels.size() - pos_total;
    for (int lbl : {0, 1}) {
        Outcome e = s.leaf_outcome(lbl, pos_total, neg_total);
        double v = s.value_of(e);
        if (v > best_value) {
            best_value = v;
            best_nodes = {TreeNode{-1, {}, -1, -1, lbl, pos_total, neg_total}};
        }
    }

    s.memo.resize(static_cast<std::size_t>(opt.depth_limit) + 1);
    bool timed_out = false;
    try {
        for (int d = 1; d <= opt.depth_limit; ++d) {
            const SubNode* root = s.solve(full, d);
            for (const auto& e : root->front) {
                double v = s.value_of(e);
                if (v > best_value) {
                    best_value = v;
                    best_nodes.clear();
                    s.emit(root, e, best_nodes);
                }
            }
        }
    } catch (const SearchDeadline&) {
        timed_out = true;
    }

    SparseTree tree;
    tree.nodes = std::move(best_nodes);
    tree.objective = obj;
    tree.train_pos = pos_total;
    tree.train_neg = neg_total;
    if (!feature_names.empty()) {
        if (feature_names.size() != bin.n_features) {
            throw std::invalid_argument("feature name count mismatch");
        }
        tree.feature_names = feature_names;
    } else {
        for (std::size_t f = 0; f < bin.n_features; ++f) {
            tree.feature_names.push_back("f" + std::to_string(f));
        }
    }

    // Recompute the training value from the tree itself; the audit flag
    // cross-checks the search's claimed optimum against it.
    std::size_t tp, fp, fn, tn;
    tree.confusion(tp, fp, fn, tn);
    tree.train_value = objective_value(tp, fp, fn, pos_total, labels.size(), obj) -
                       obj.leaf_penalty * tree.leaf_count();
    if (opt.check_bounds && std::abs(tree.train_value - best_value) > 1e-9) {
        throw std::logic_error("search bookkeeping disagrees with the fitted tree");
    }

    // If the deadline interrupted the search, the optimum at the requested
    // depth is unknown; report the sound gap to the perfect-classifier bound.
    if (timed_out) {
        double bound = (s.balanced ? 1.0
                                   : s.g(static_cast<double>(pos_total), 0.0)) -
                       s.lambda;
        tree.optimality_gap = std::max(0.0, bound - tree.train_value);
    } else {
        tree.optimality_gap = 0.0;
    }
    return tree;
}

}  // namespace gapminer
