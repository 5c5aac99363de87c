// gapminer: one binary wiring the whole pipeline — dataset generation,
// featurization, tree training, template mining, sampling, single-design
// simulation, and precision evaluation. Artifacts are plain text, embed the
// options that produced them, and identical invocations rewrite identical
// bytes; volatile run facts (wall clock, worker count) go to stderr instead.
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "gapminer/dataset.hpp"
#include "gapminer/dispersion.hpp"
#include "gapminer/sampler.hpp"
#include "gapminer/sff.hpp"
#include "gapminer/templates.hpp"
#include "gapminer/tree.hpp"
#include "gapminer/unitcell.hpp"
#include "gapminer/util.hpp"
#include "json.hpp"

namespace {

using namespace gapminer;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kInfeasible = 4;
constexpr int kSolver = 5;

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    std::ostringstream hex;
    hex << std::hex << fnv1a64(bytes);
    return hex.str();
}

double parse_frequency(const std::string& text) {
    std::size_t pos = 0;
    double v = std::stod(text, &pos);
    if (pos + 1 == text.size() && (text[pos] == 'k' || text[pos] == 'K')) {
        v *= 1e3;
        ++pos;
    }
    if (pos != text.size()) throw std::invalid_argument("bad frequency: " + text);
    return v;
}

// "10k-20k" or "10000-20000" -> Hz pair
std::pair<double, double> parse_range(const std::string& text) {
    const auto dash = text.find('-');
    if (dash == std::string::npos) {
        throw std::invalid_argument("range must look like 10k-20k: " + text);
    }
    const double lo = parse_frequency(text.substr(0, dash));
    const double hi = parse_frequency(text.substr(dash + 1));
    if (!(lo < hi)) throw std::invalid_argument("range must be increasing: " + text);
    return {lo, hi};
}

LabelPolicy policy_from_flags(const std::string& mode, const std::string& range,
                              double min_width) {
    const auto [lo, hi] = parse_range(range);
    if (mode == "intersect") return LabelPolicy::intersect(lo, hi);
    if (mode == "cover") return LabelPolicy::cover(lo, hi);
    if (mode == "minwidth") {
        if (!(min_width > 0.0)) {
            throw std::invalid_argument("--min-width is required with --policy minwidth");
        }
        return LabelPolicy::min_width(lo, hi, min_width);
    }
    throw std::invalid_argument("unknown policy mode: " + mode);
}

// "a..b" (inclusive) or a single id
std::vector<uint32_t> parse_ids(const std::string& text) {
    const auto dots = text.find("..");
    auto number = [](const std::string& s) {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size() || v > 0xffffffffull) {
            throw std::invalid_argument("bad design id: " + s);
        }
        return static_cast<uint32_t>(v);
    };
    std::vector<uint32_t> ids;
    if (dots == std::string::npos) {
        ids.push_back(number(text));
        return ids;
    }
    const uint32_t a = number(text.substr(0, dots));
    const uint32_t b = number(text.substr(dots + 2));
    if (b < a) throw std::invalid_argument("empty id range: " + text);
    ids.reserve(static_cast<std::size_t>(b - a) + 1);
    for (uint64_t id = a; id <= b; ++id) ids.push_back(static_cast<uint32_t>(id));
    return ids;
}

// Deterministic provenance block embedded at the top of text artifacts.
class RunStamp {
public:
    explicit RunStamp(std::string command) : command_(std::move(command)) {}

    void add(const std::string& key, const std::string& value) {
        entries_.emplace_back(key, value);
    }
    void add(const std::string& key, double value) { add(key, format_double(value)); }
    void add(const std::string& key, uint64_t value) { add(key, std::to_string(value)); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }

    void write(std::ostream& out, const std::string& kind) const {
        out << "# gapminer " << kind << "\n";
        out << "# command = " << command_ << "\n";
        out << "# code_version = " << kCodeVersion << "\n";
        for (const auto& [key, value] : entries_) {
            out << "# " << key << " = " << value << "\n";
        }
    }

    json to_json() const {
        json j;
        j["command"] = command_;
        j["code_version"] = kCodeVersion;
        for (const auto& [key, value] : entries_) j[key] = value;
        return j;
    }

private:
    std::string command_;
    std::vector<std::pair<std::string, std::string>> entries_;
};

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

// Reads `# key = value` header lines up to and including the columns line.
std::map<std::string, std::string> read_header(std::istream& in, const std::string& kind) {
    std::string line;
    if (!std::getline(in, line) || line != "# gapminer " + kind) {
        throw std::runtime_error("not a gapminer " + kind + " file");
    }
    std::map<std::string, std::string> keys;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) != 0) {
            throw std::runtime_error("header ended before the columns line");
        }
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) throw std::runtime_error("bad header line: " + line);
        const std::string key = line.substr(2, eq - 2);
        keys[key] = line.substr(eq + 3);
        if (key == "columns") break;
    }
    return keys;
}

// ---------------------------------------------------------------------------
// feature files
// ---------------------------------------------------------------------------

struct FeatureFile {
    std::vector<std::string> names;
    int denominator = 1;
    std::vector<uint32_t> ids;
    std::vector<std::vector<int>> counts;  // per design, per shape
};

void write_features(std::ostream& out, const RunStamp& stamp, const ShapeLibrary& lib,
                    int denominator, const std::vector<uint32_t>& ids,
                    const std::vector<std::vector<int>>& counts) {
    RunStamp full = stamp;
    full.add("denominator", denominator);
    std::string columns = "id";
    for (const auto& shape : lib.shapes()) columns += " " + shape.name;
    full.add("columns", columns);
    full.write(out, "features");
    for (std::size_t row = 0; row < ids.size(); ++row) {
        out << ids[row];
        for (int c : counts[row]) out << "," << c;
        out << "\n";
    }
}

FeatureFile read_features(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const auto keys = read_header(in, "features");
    FeatureFile file;
    file.denominator = std::stoi(keys.at("denominator"));
    std::istringstream cols(keys.at("columns"));
    std::string col;
    cols >> col;
    if (col != "id") throw std::runtime_error("feature columns must start with id");
    while (cols >> col) file.names.push_back(col);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        if (!std::getline(row, field, ',')) throw std::runtime_error("bad feature row");
        file.ids.push_back(static_cast<uint32_t>(std::stoul(field)));
        std::vector<int> counts;
        while (std::getline(row, field, ',')) counts.push_back(std::stoi(field));
        if (counts.size() != file.names.size()) {
            throw std::runtime_error("feature row width does not match the columns line");
        }
        file.counts.push_back(std::move(counts));
    }
    return file;
}

// ---------------------------------------------------------------------------
// design files
// ---------------------------------------------------------------------------

struct DesignFile {
    int resolution = 10;
    std::vector<UnitCell> cells;
};

void write_designs(std::ostream& out, const RunStamp& stamp, int resolution,
                   const std::vector<UnitCell>& cells) {
    RunStamp full = stamp;
    full.add("resolution", resolution);
    full.add("count", static_cast<uint64_t>(cells.size()));
    full.add("columns", std::string("design"));
    full.write(out, "designs");
    for (const auto& cell : cells) {
        // coarse designs fit in an id; finer ones are written as bit strings
        if (resolution <= 10) {
            out << cell.design_id() << "\n";
        } else {
            out << cell.bit_string() << "\n";
        }
    }
}

DesignFile read_designs(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const auto keys = read_header(in, "designs");
    DesignFile file;
    file.resolution = std::stoi(keys.at("resolution"));
    const auto expected = static_cast<std::size_t>(irreducible_count(file.resolution));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const bool binary = line.size() == expected &&
                            line.find_first_not_of("01") == std::string::npos;
        if (binary) {
            file.cells.push_back(UnitCell::from_bit_string(file.resolution, line));
        } else {
            file.cells.push_back(
                UnitCell::from_design_id(file.resolution, std::stoull(line)));
        }
    }
    return file;
}

// Labels for one dataset under one policy, recomputed from the stored gaps.
std::vector<uint8_t> labels_for(const LabeledDataset& ds, const LabelPolicy& policy) {
    std::vector<uint8_t> labels;
    labels.reserve(ds.records.size());
    for (const auto& rec : ds.records) {
        labels.push_back(static_cast<uint8_t>(label(rec.gaps, policy)));
    }
    return labels;
}

enum class ModelKind { Tree, TemplateSetFile };

ModelKind sniff_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string first;
    std::getline(in, first);
    if (first.rfind("# gapminer template set", 0) == 0) return ModelKind::TemplateSetFile;
    if (!first.empty() && first[0] == '{') return ModelKind::Tree;
    throw std::runtime_error("unrecognized model file: " + path.string());
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

struct GenDatasetArgs {
    int resolution = 10;
    int epp = 1;
    double nu = 0.3;
    int kpts = 16;
    int bands = 10;
    double f_max = 60e3;
    std::string ranges;
    std::string ids;
    std::string out;
    bool resume = false;
    int jobs = 0;
};

int cmd_gen_dataset(const GenDatasetArgs& a) {
    DatasetManifest manifest = DatasetManifest::defaults();
    manifest.resolution = a.resolution;
    manifest.elements_per_pixel = a.epp;
    manifest.phys.poisson_ratio = a.nu;
    manifest.points_per_segment = a.kpts;
    manifest.num_bands = a.bands;
    manifest.f_max = a.f_max;
    if (!a.ranges.empty()) {
        manifest.policies.clear();
        std::istringstream in(a.ranges);
        std::string spec;
        while (std::getline(in, spec, ',')) manifest.policies.push_back(LabelPolicy::parse(spec));
    }
    manifest.validate();
    if (irreducible_count(manifest.resolution) > 31) {
        throw std::invalid_argument("dataset ids are 32-bit; resolution is too fine");
    }

    std::vector<uint32_t> ids =
        a.ids.empty() ? all_design_ids(manifest.resolution) : parse_ids(a.ids);
    const uint64_t space = uint64_t(1) << irreducible_count(manifest.resolution);
    for (uint32_t id : ids) {
        if (id >= space) throw std::invalid_argument("design id out of range: " + std::to_string(id));
    }

    GenerateOptions opt;
    opt.resume = a.resume;
    opt.workers = a.jobs;
    opt.progress = [](std::size_t done, std::size_t total) {
        if (done % 256 == 0 || done == total) {
            std::cerr << "\r" << done << "/" << total << std::flush;
        }
    };
    const auto t0 = std::chrono::steady_clock::now();
    const GenerateStats stats = generate(ids, manifest, a.out, opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "\rcomputed " << stats.computed << ", skipped " << stats.skipped << ", failed "
              << stats.failures.size() << " of " << stats.requested << " in " << secs << " s\n";
    for (const auto& [id, reason] : stats.failures) {
        std::cerr << "design " << id << ": " << reason << "\n";
    }
    return stats.failures.empty() ? kOk : kSolver;
}

struct FeaturizeArgs {
    std::string dataset;
    std::string shapes = "default";
    std::string out;
};

int cmd_featurize(const FeaturizeArgs& a) {
    const LabeledDataset ds = load_dataset(a.dataset);
    const ShapeLibrary lib = a.shapes == "default" ? ShapeLibrary::default_library()
                                                   : ShapeLibrary::load_file(a.shapes);
    std::vector<uint32_t> ids;
    std::vector<std::vector<int>> counts;
    int denominator = 0;
    for (const auto& rec : ds.records) {
        const UnitCell cell = UnitCell::from_design_id(ds.manifest.resolution, rec.design_id);
        const SFFVector sff = featurize(cell, lib);
        if (denominator == 0) denominator = sff.denominator;
        ids.push_back(rec.design_id);
        counts.push_back(sff.counts);
    }
    if (denominator == 0) denominator = 1;

    RunStamp stamp("featurize");
    stamp.add("dataset_digest", file_digest(a.dataset));
    std::ostringstream hex;
    hex << std::hex << lib.digest();
    stamp.add("shape_digest", hex.str());
    stamp.add("resolution", ds.manifest.resolution);
    auto out = open_output(a.out);
    write_features(out, stamp, lib, denominator, ids, counts);
    std::cerr << "featurized " << ids.size() << " designs with " << lib.size() << " shapes\n";
    return kOk;
}

struct TrainTreeArgs {
    std::string feats;
    std::string labels;
    std::string range;
    std::string policy = "intersect";
    double min_width = 0.0;
    std::string objective = "prec-support";
    double k_support = 1.0;
    double lambda = 0.005;
    int depth = 4;
    int thresholds = 32;
    double time_limit = 0.0;
    bool check_bounds = false;
    std::string out;
};

int cmd_train_tree(const TrainTreeArgs& a) {
    const FeatureFile feats = read_features(a.feats);
    const LabeledDataset ds = load_dataset(a.labels);
    const LabelPolicy policy = policy_from_flags(a.policy, a.range, a.min_width);

    std::map<uint32_t, std::size_t> row_of;
    for (std::size_t i = 0; i < feats.ids.size(); ++i) row_of[feats.ids[i]] = i;
    std::vector<std::vector<Rational>> features;
    std::vector<uint8_t> labels;
    features.reserve(ds.records.size());
    for (const auto& rec : ds.records) {
        const auto it = row_of.find(rec.design_id);
        if (it == row_of.end()) {
            throw std::runtime_error("no features for design " + std::to_string(rec.design_id));
        }
        std::vector<Rational> row;
        row.reserve(feats.names.size());
        for (int c : feats.counts[it->second]) row.push_back(Rational{c, feats.denominator});
        features.push_back(std::move(row));
        labels.push_back(static_cast<uint8_t>(label(rec.gaps, policy)));
    }

    Objective obj = a.objective == "balanced-acc"
                        ? Objective::balanced_accuracy(a.lambda)
                        : Objective::precision_support(a.k_support, a.lambda);
    if (a.objective != "balanced-acc" && a.objective != "prec-support") {
        throw std::invalid_argument("unknown objective: " + a.objective);
    }
    FitOptions opt;
    opt.depth_limit = a.depth;
    opt.time_limit_seconds = a.time_limit;
    opt.check_bounds = a.check_bounds;

    const BinarizedFeatures bin = binarize(features, a.thresholds);
    const SparseTree tree = fit_optimal_tree(bin, labels, obj, opt, feats.names);

    std::ostringstream tree_json;
    tree.save_json(tree_json);
    json j = json::parse(tree_json.str());
    RunStamp stamp("train-tree");
    stamp.add("features_digest", file_digest(a.feats));
    stamp.add("labels_digest", file_digest(a.labels));
    stamp.add("policy", policy.to_string());
    stamp.add("depth_limit", a.depth);
    stamp.add("thresholds_per_feature", a.thresholds);
    j["manifest"] = stamp.to_json();
    auto out = open_output(a.out);
    out << j.dump(2) << "\n";

    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    tree.confusion(tp, fp, fn, tn);
    std::cerr << "leaves " << tree.leaf_count() << ", depth " << tree.depth() << ", tp " << tp
              << ", fp " << fp << ", fn " << fn << ", tn " << tn << ", objective "
              << format_double(tree.train_value) << ", gap "
              << format_double(tree.optimality_gap) << "\n";
    return kOk;
}

struct MineArgs {
    std::string dataset;
    std::string range;
    std::string policy = "intersect";
    double min_width = 0.0;
    int sparsity = 5;
    double min_precision = 0.98;
    std::size_t support_pre = 10;
    double precision_pre = -1.0;
    double time_limit = 1800.0;
    int jobs = 0;
    std::string out;
};

int cmd_mine_templates(const MineArgs& a) {
    const LabeledDataset ds = load_dataset(a.dataset);
    const LabelPolicy policy = policy_from_flags(a.policy, a.range, a.min_width);
    std::vector<uint64_t> designs;
    designs.reserve(ds.records.size());
    for (const auto& rec : ds.records) designs.push_back(rec.design_id);
    const std::vector<uint8_t> labels = labels_for(ds, policy);

    MiningOptions opt;
    opt.sparsity = a.sparsity;
    opt.min_precision = a.min_precision;
    opt.min_support_pre = a.support_pre;
    opt.min_precision_pre = a.precision_pre;
    opt.time_limit_seconds = a.time_limit;
    opt.workers = a.jobs;

    PreselectStats stats;
    const auto t0 = std::chrono::steady_clock::now();
    const TemplateSet set = mine_templates(designs, labels, opt, ds.manifest.resolution, &stats);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "pre-selection kept " << stats.retained << " of " << stats.space
              << " candidates (" << stats.evaluated << " scored); selection "
              << (set.proven_optimal ? "proved optimal" : "timed out") << " in " << secs
              << " s\n";
    if (!set.feasible) {
        std::cerr << "no template combination meets the precision bar\n";
        return kInfeasible;
    }
    auto out = open_output(a.out);
    set.save(out);
    std::cerr << "support " << set.support << ", precision " << format_double(set.precision())
              << ", templates " << set.templates.size() << ", gap "
              << format_double(set.optimality_gap) << "\n";
    return kOk;
}

struct SampleArgs {
    std::string model;
    int resolution = 10;
    std::size_t count = 200;
    std::string law = "independent";
    double matern_length = 6.0;
    uint64_t seed = 0;
    std::size_t max_attempts = 1000000;
    std::string shapes = "default";
    std::string out;
};

int cmd_sample(const SampleArgs& a) {
    SamplerConfig cfg;
    cfg.seed = a.seed;
    cfg.resolution = a.resolution;
    cfg.max_attempts = a.max_attempts;
    cfg.matern_length = a.matern_length;
    if (a.law == "independent") {
        cfg.law = FreePixelLaw::Independent;
    } else if (a.law == "matern") {
        cfg.law = FreePixelLaw::Matern;
    } else {
        throw std::invalid_argument("law must be independent or matern");
    }
    cfg.validate();

    const ModelKind kind = sniff_model(a.model);
    std::vector<UnitCell> cells;
    cells.reserve(a.count);
    if (kind == ModelKind::TemplateSetFile) {
        std::ifstream in(a.model, std::ios::binary);
        const TemplateSet set = TemplateSet::load(in);
        if (set.templates.empty()) {
            std::cerr << "the template set is empty; nothing to sample\n";
            return kInfeasible;
        }
        for (std::size_t i = 0; i < a.count; ++i) cells.push_back(sample_template(set, cfg, i));
    } else {
        std::ifstream in(a.model, std::ios::binary);
        const SparseTree tree = SparseTree::load_json(in);
        const ShapeLibrary lib = a.shapes == "default" ? ShapeLibrary::default_library()
                                                       : ShapeLibrary::load_file(a.shapes);
        for (std::size_t i = 0; i < a.count; ++i) {
            cells.push_back(sample_rejection_tree(tree, lib, cfg, i));
        }
    }

    RunStamp stamp("sample");
    stamp.add("model_digest", file_digest(a.model));
    stamp.add("model_kind", kind == ModelKind::Tree ? "tree" : "template-set");
    stamp.add("law", a.law);
    if (cfg.law == FreePixelLaw::Matern) stamp.add("matern_length", a.matern_length);
    stamp.add("seed", a.seed);
    auto out = open_output(a.out);
    write_designs(out, stamp, a.resolution, cells);
    std::cerr << "sampled " << cells.size() << " designs at " << a.resolution << "x"
              << a.resolution << "\n";
    return kOk;
}

struct SimulateArgs {
    std::string id;
    std::string bits;
    int resolution = 10;
    int epp = 2;
    double nu = 0.3;
    int kpts = 16;
    int bands = 10;
    double f_max = 60e3;
    std::string out = "-";
};

int cmd_simulate(const SimulateArgs& a) {
    if (a.id.empty() == a.bits.empty()) {
        throw std::invalid_argument("give exactly one of --id and --bits");
    }
    const UnitCell cell = a.bits.empty()
                              ? UnitCell::from_design_id(a.resolution, std::stoull(a.id))
                              : UnitCell::from_bit_string(a.bits);
    PhysicalConfig phys;
    phys.poisson_ratio = a.nu;
    const WavevectorContour contour =
        WavevectorContour::standard_triangle(phys.cell_side, a.kpts);
    DispersionConfig cfg;
    cfg.num_bands = a.bands;
    cfg.elements_per_pixel = a.epp;
    cfg.f_max_report = a.f_max;

    const DispersionResult result = dispersion(cell, phys, contour, cfg);

    RunStamp stamp("simulate");
    stamp.add("design", cell.bit_string());
    stamp.add("resolution", cell.resolution());
    stamp.add("elements_per_pixel", a.epp);
    stamp.add("points_per_segment", a.kpts);
    stamp.add("num_bands", a.bands);
    stamp.add("poisson_ratio", a.nu);
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (a.out != "-") {
        file = open_output(a.out);
        out = &file;
    }
    stamp.write(*out, "dispersion");
    export_dispersion(*out, result, contour);
    return kOk;
}

// Shared by evaluate and transfer-eval: simulate cells, print a report row.
int report_precision(std::ostream& out, const RunStamp& stamp,
                     const std::vector<UnitCell>& cells, const LabelPolicy& policy, int epp,
                     int kpts, int bands, double f_max, double nu, int jobs) {
    PhysicalConfig phys;
    phys.poisson_ratio = nu;
    const WavevectorContour contour = WavevectorContour::standard_triangle(phys.cell_side, kpts);
    DispersionConfig cfg;
    cfg.num_bands = bands;
    cfg.elements_per_pixel = epp;
    cfg.f_max_report = f_max;

    const SamplerEvaluation report = evaluate_sampler(
        [&](std::size_t i) { return cells[i]; }, phys, contour, cfg, policy, cells.size(), jobs);

    stamp.write(out, "evaluation");
    out << "requested = " << report.requested << "\n";
    out << "simulated = " << report.simulated << "\n";
    out << "positives = " << report.positives << "\n";
    out << "precision = " << format_double(report.precision) << "\n";
    out << "wilson95_lo = " << format_double(report.interval.lo) << "\n";
    out << "wilson95_hi = " << format_double(report.interval.hi) << "\n";
    out << "failures = " << report.failures.size() << "\n";
    for (const auto& [index, reason] : report.failures) {
        std::cerr << "design " << index << ": " << reason << "\n";
    }
    return report.simulated == 0 ? kSolver : kOk;
}

struct EvaluateArgs {
    std::string designs;
    std::string range;
    std::string policy = "intersect";
    double min_width = 0.0;
    int epp = 2;
    int kpts = 16;
    int bands = 10;
    double f_max = 60e3;
    double nu = 0.3;
    int jobs = 0;
    std::string out = "-";
};

int cmd_evaluate(const EvaluateArgs& a) {
    const DesignFile designs = read_designs(a.designs);
    const LabelPolicy policy = policy_from_flags(a.policy, a.range, a.min_width);
    RunStamp stamp("evaluate");
    stamp.add("designs_digest", file_digest(a.designs));
    stamp.add("resolution", designs.resolution);
    stamp.add("policy", policy.to_string());
    stamp.add("elements_per_pixel", a.epp);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (a.out != "-") {
        file = open_output(a.out);
        out = &file;
    }
    return report_precision(*out, stamp, designs.cells, policy, a.epp, a.kpts, a.bands,
                            a.f_max, a.nu, a.jobs);
}

struct TransferEvalArgs {
    std::string model;
    std::string range;
    std::string policy = "intersect";
    double min_width = 0.0;
    int resolution = 20;
    std::size_t count = 50;
    std::string law = "independent";
    double matern_length = 6.0;
    uint64_t seed = 0;
    int epp = 2;
    int kpts = 16;
    int bands = 10;
    double f_max = 60e3;
    double nu = 0.3;
    int jobs = 0;
    std::string out = "-";
};

int cmd_transfer_eval(const TransferEvalArgs& a) {
    if (sniff_model(a.model) != ModelKind::TemplateSetFile) {
        throw std::runtime_error("transfer-eval needs a template set model");
    }
    std::ifstream in(a.model, std::ios::binary);
    const TemplateSet set = TemplateSet::load(in);
    if (set.templates.empty()) {
        std::cerr << "the template set is empty; nothing to sample\n";
        return kInfeasible;
    }
    SamplerConfig cfg;
    cfg.seed = a.seed;
    cfg.resolution = a.resolution;
    cfg.matern_length = a.matern_length;
    if (a.law == "independent") {
        cfg.law = FreePixelLaw::Independent;
    } else if (a.law == "matern") {
        cfg.law = FreePixelLaw::Matern;
    } else {
        throw std::invalid_argument("law must be independent or matern");
    }
    cfg.validate();

    std::vector<UnitCell> cells;
    cells.reserve(a.count);
    for (std::size_t i = 0; i < a.count; ++i) cells.push_back(sample_template(set, cfg, i));

    const LabelPolicy policy = policy_from_flags(a.policy, a.range, a.min_width);
    RunStamp stamp("transfer-eval");
    stamp.add("model_digest", file_digest(a.model));
    stamp.add("resolution", a.resolution);
    stamp.add("count", static_cast<uint64_t>(a.count));
    stamp.add("law", a.law);
    if (cfg.law == FreePixelLaw::Matern) stamp.add("matern_length", a.matern_length);
    stamp.add("seed", a.seed);
    stamp.add("policy", policy.to_string());
    stamp.add("elements_per_pixel", a.epp);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (a.out != "-") {
        file = open_output(a.out);
        out = &file;
    }
    return report_precision(*out, stamp, cells, policy, a.epp, a.kpts, a.bands, a.f_max,
                            a.nu, a.jobs);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"phononic band-gap dataset, model, and sampling pipeline"};
    app.require_subcommand(1);
    int rc = kOk;

    GenDatasetArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-dataset", "simulate designs into a labeled CSV");
    gen_cmd->add_option("--n", gen.resolution, "grid resolution")->capture_default_str();
    gen_cmd->add_option("--epp", gen.epp, "finite elements per pixel edge")->capture_default_str();
    gen_cmd->add_option("--nu", gen.nu, "Poisson ratio")->capture_default_str();
    gen_cmd->add_option("--kpts", gen.kpts, "contour points per segment")->capture_default_str();
    gen_cmd->add_option("--bands", gen.bands, "bands per wavevector")->capture_default_str();
    gen_cmd->add_option("--fmax", gen.f_max, "gap report ceiling, Hz")->capture_default_str();
    gen_cmd->add_option("--ranges", gen.ranges,
                        "label policies, comma separated (default: built-in ranges)");
    gen_cmd->add_option("--ids", gen.ids, "id or inclusive a..b range (default: all)");
    gen_cmd->add_option("--out", gen.out, "output CSV")->required();
    gen_cmd->add_flag("--resume", gen.resume, "skip ids already in the output");
    gen_cmd->add_option("--jobs", gen.jobs, "worker threads (default: all cores)");
    gen_cmd->callback([&] { rc = cmd_gen_dataset(gen); });

    FeaturizeArgs feat;
    auto* feat_cmd = app.add_subcommand("featurize", "shape-frequency features for a dataset");
    feat_cmd->add_option("--dataset", feat.dataset, "labeled dataset CSV")->required();
    feat_cmd->add_option("--shapes", feat.shapes, "shape library file or 'default'")
        ->capture_default_str();
    feat_cmd->add_option("--out", feat.out, "output feature CSV")->required();
    feat_cmd->callback([&] { rc = cmd_featurize(feat); });

    TrainTreeArgs tree;
    auto* tree_cmd = app.add_subcommand("train-tree", "fit an optimal sparse tree");
    tree_cmd->add_option("--feats", tree.feats, "feature CSV")->required();
    tree_cmd->add_option("--labels", tree.labels, "labeled dataset CSV")->required();
    tree_cmd->add_option("--range", tree.range, "target band, e.g. 10k-20k")->required();
    tree_cmd->add_option("--policy", tree.policy, "intersect, cover, or minwidth")
        ->capture_default_str();
    tree_cmd->add_option("--min-width", tree.min_width, "minimum gap width, Hz (minwidth)");
    tree_cmd->add_option("--objective", tree.objective, "prec-support or balanced-acc")
        ->capture_default_str();
    tree_cmd->add_option("--K", tree.k_support, "support penalty weight")->capture_default_str();
    tree_cmd->add_option("--lambda", tree.lambda, "per-leaf penalty")->capture_default_str();
    tree_cmd->add_option("--depth", tree.depth, "depth limit")->capture_default_str();
    tree_cmd->add_option("--thresholds", tree.thresholds, "threshold cap per feature")
        ->capture_default_str();
    tree_cmd->add_option("--time-limit", tree.time_limit, "seconds, 0 = none")
        ->capture_default_str();
    tree_cmd->add_flag("--check-bounds", tree.check_bounds, "audit the search bookkeeping");
    tree_cmd->add_option("--out", tree.out, "output model JSON")->required();
    tree_cmd->callback([&] { rc = cmd_train_tree(tree); });

    MineArgs mine;
    auto* mine_cmd = app.add_subcommand("mine-templates", "mine an optimal template set");
    mine_cmd->add_option("--dataset", mine.dataset, "labeled dataset CSV")->required();
    mine_cmd->add_option("--range", mine.range, "target band, e.g. 10k-20k")->required();
    mine_cmd->add_option("--policy", mine.policy, "intersect, cover, or minwidth")
        ->capture_default_str();
    mine_cmd->add_option("--min-width", mine.min_width, "minimum gap width, Hz (minwidth)");
    mine_cmd->add_option("--s", mine.sparsity, "templates in the set")->capture_default_str();
    mine_cmd->add_option("--p", mine.min_precision, "set precision bar")->capture_default_str();
    mine_cmd->add_option("--psi-pre", mine.support_pre, "pre-selection support bar")
        ->capture_default_str();
    mine_cmd->add_option("--p-pre", mine.precision_pre,
                         "pre-selection precision bar (default: p - 0.05)");
    mine_cmd->add_option("--time-limit", mine.time_limit, "selection budget, seconds")
        ->capture_default_str();
    mine_cmd->add_option("--jobs", mine.jobs, "worker threads (default: all cores)");
    mine_cmd->add_option("--out", mine.out, "output template set")->required();
    mine_cmd->callback([&] { rc = cmd_mine_templates(mine); });

    SampleArgs sample;
    auto* sample_cmd = app.add_subcommand("sample", "draw designs from a trained model");
    sample_cmd->add_option("--model", sample.model, "tree JSON or template set")->required();
    sample_cmd->add_option("--resolution", sample.resolution, "target grid resolution")
        ->capture_default_str();
    sample_cmd->add_option("--count", sample.count, "designs to draw")->capture_default_str();
    sample_cmd->add_option("--law", sample.law, "free-pixel law: independent or matern")
        ->capture_default_str();
    sample_cmd->add_option("--l", sample.matern_length, "Matern correlation length, pixels")
        ->capture_default_str();
    sample_cmd->add_option("--seed", sample.seed, "RNG seed")->capture_default_str();
    sample_cmd->add_option("--max-attempts", sample.max_attempts, "rejection budget per draw")
        ->capture_default_str();
    sample_cmd->add_option("--shapes", sample.shapes, "shape library for tree models")
        ->capture_default_str();
    sample_cmd->add_option("--out", sample.out, "output design list")->required();
    sample_cmd->callback([&] { rc = cmd_sample(sample); });

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "dispersion table for one design");
    sim_cmd->add_option("--id", sim.id, "design id");
    sim_cmd->add_option("--bits", sim.bits, "irreducible bit string");
    sim_cmd->add_option("--n", sim.resolution, "grid resolution (with --id)")
        ->capture_default_str();
    sim_cmd->add_option("--epp", sim.epp, "finite elements per pixel edge")
        ->capture_default_str();
    sim_cmd->add_option("--nu", sim.nu, "Poisson ratio")->capture_default_str();
    sim_cmd->add_option("--kpts", sim.kpts, "contour points per segment")->capture_default_str();
    sim_cmd->add_option("--bands", sim.bands, "bands per wavevector")->capture_default_str();
    sim_cmd->add_option("--fmax", sim.f_max, "gap report ceiling, Hz")->capture_default_str();
    sim_cmd->add_option("--out", sim.out, "output file, - for stdout")->capture_default_str();
    sim_cmd->callback([&] { rc = cmd_simulate(sim); });

    EvaluateArgs eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "simulate a design list, report precision");
    eval_cmd->add_option("--designs", eval.designs, "design list from sample")->required();
    eval_cmd->add_option("--range", eval.range, "target band, e.g. 10k-20k")->required();
    eval_cmd->add_option("--policy", eval.policy, "intersect, cover, or minwidth")
        ->capture_default_str();
    eval_cmd->add_option("--min-width", eval.min_width, "minimum gap width, Hz (minwidth)");
    eval_cmd->add_option("--epp", eval.epp, "finite elements per pixel edge")
        ->capture_default_str();
    eval_cmd->add_option("--kpts", eval.kpts, "contour points per segment")
        ->capture_default_str();
    eval_cmd->add_option("--bands", eval.bands, "bands per wavevector")->capture_default_str();
    eval_cmd->add_option("--fmax", eval.f_max, "gap report ceiling, Hz")->capture_default_str();
    eval_cmd->add_option("--nu", eval.nu, "Poisson ratio")->capture_default_str();
    eval_cmd->add_option("--jobs", eval.jobs, "worker threads (default: all cores)");
    eval_cmd->add_option("--out", eval.out, "output report, - for stdout")
        ->capture_default_str();
    eval_cmd->callback([&] { rc = cmd_evaluate(eval); });

    TransferEvalArgs trans;
    auto* trans_cmd = app.add_subcommand(
        "transfer-eval", "sample a template set at a finer grid and measure precision");
    trans_cmd->add_option("--model", trans.model, "template set file")->required();
    trans_cmd->add_option("--range", trans.range, "target band, e.g. 10k-20k")->required();
    trans_cmd->add_option("--policy", trans.policy, "intersect, cover, or minwidth")
        ->capture_default_str();
    trans_cmd->add_option("--min-width", trans.min_width, "minimum gap width, Hz (minwidth)");
    trans_cmd->add_option("--resolution", trans.resolution, "target grid resolution")
        ->capture_default_str();
    trans_cmd->add_option("--count", trans.count, "designs to draw")->capture_default_str();
    trans_cmd->add_option("--law", trans.law, "free-pixel law: independent or matern")
        ->capture_default_str();
    trans_cmd->add_option("--l", trans.matern_length, "Matern correlation length, pixels")
        ->capture_default_str();
    trans_cmd->add_option("--seed", trans.seed, "RNG seed")->capture_default_str();
    trans_cmd->add_option("--epp", trans.epp, "finite elements per pixel edge")
        ->capture_default_str();
    trans_cmd->add_option("--kpts", trans.kpts, "contour points per segment")
        ->capture_default_str();
    trans_cmd->add_option("--bands", trans.bands, "bands per wavevector")
        ->capture_default_str();
    trans_cmd->add_option("--fmax", trans.f_max, "gap report ceiling, Hz")
        ->capture_default_str();
    trans_cmd->add_option("--nu", trans.nu, "Poisson ratio")->capture_default_str();
    trans_cmd->add_option("--jobs", trans.jobs, "worker threads (default: all cores)");
    trans_cmd->add_option("--out", trans.out, "output report, - for stdout")
        ->capture_default_str();
    trans_cmd->callback([&] { rc = cmd_transfer_eval(trans); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    } catch (const BudgetExhausted& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInfeasible;
    } catch (const SolverError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSolver;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    }
    return rc;
}
