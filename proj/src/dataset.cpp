#include "gapminer/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "gapminer/util.hpp"

namespace gapminer {

namespace {

constexpr const char* kFileTag = "# gapminer dataset";
constexpr const char* kColumns = "id,gaps,labels";

std::vector<std::string> split_on(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    parts.push_back(cur);
    return parts;
}

// Unbiased bounded draw; std::uniform_int_distribution is implementation
// defined, and shuffles must reproduce across toolchains.
uint64_t bounded_draw(std::mt19937_64& g, uint64_t bound) {
    uint64_t mask = ~0ull >> std::countl_zero(bound - 1 | 1);
    for (;;) {
        uint64_t v = g() & mask;
        if (v < bound) return v;
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

DatasetManifest DatasetManifest::defaults() {
    DatasetManifest m;
    for (int i = 0; i < 5; ++i) {
        m.policies.push_back(LabelPolicy::intersect(10e3 * i, 10e3 * (i + 1)));
    }
    for (int i = 0; i < 5; ++i) {
        m.policies.push_back(LabelPolicy::intersect(6e3 * i, 6e3 * (i + 1)));
    }
    return m;
}

WavevectorContour DatasetManifest::contour() const {
    return WavevectorContour::standard_triangle(phys.cell_side, points_per_segment);
}

DispersionConfig DatasetManifest::dispersion_config() const {
    DispersionConfig cfg;
    cfg.num_bands = num_bands;
    cfg.elements_per_pixel = elements_per_pixel;
    cfg.f_max_report = f_max;
    return cfg;
}

void DatasetManifest::validate() const {
    if (resolution < 2 || resolution % 2 != 0) {
        throw std::invalid_argument("resolution must be a positive even number");
    }
    if (points_per_segment < 1) throw std::invalid_argument("need at least one contour point");
    if (num_bands < 2) throw std::invalid_argument("need at least two bands");
    if (elements_per_pixel < 1) throw std::invalid_argument("elements per pixel must be >= 1");
    if (!(f_max > 0)) throw std::invalid_argument("f_max must be positive");
    if (policies.empty()) throw std::invalid_argument("at least one label range is required");
    phys.validate();
    for (const auto& p : policies) p.validate();
}

std::string DatasetManifest::header_text() const {
    std::ostringstream out;
    out << kFileTag << "\n";
    out << "# code_version = " << code_version << "\n";
    out << "# resolution = " << resolution << "\n";
    out << "# cell_side = " << format_double(phys.cell_side) << "\n";
    out << "# e_soft = " << format_double(phys.e_soft) << "\n";
    out << "# rho_soft = " << format_double(phys.rho_soft) << "\n";
    out << "# e_stiff = " << format_double(phys.e_stiff) << "\n";
    out << "# rho_stiff = " << format_double(phys.rho_stiff) << "\n";
    out << "# poisson_ratio = " << format_double(phys.poisson_ratio) << "\n";
    out << "# plane_strain = " << (phys.plane_strain ? 1 : 0) << "\n";
    out << "# points_per_segment = " << points_per_segment << "\n";
    out << "# num_bands = " << num_bands << "\n";
    out << "# elements_per_pixel = " << elements_per_pixel << "\n";
    out << "# f_max = " << format_double(f_max) << "\n";
    out << "# ranges = ";
    for (std::size_t i = 0; i < policies.size(); ++i) {
        if (i) out << ";";
        out << policies[i].to_string();
    }
    out << "\n" << kColumns << "\n";
    return out.str();
}

DatasetManifest DatasetManifest::parse_header(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kFileTag) {
        throw std::runtime_error("not a dataset file (missing tag line)");
    }
    std::map<std::string, std::string> kv;
    while (std::getline(in, line)) {
        if (line == kColumns) break;
        if (line.rfind("# ", 0) != 0) throw std::runtime_error("malformed header line: " + line);
        auto eq = line.find(" = ");
        if (eq == std::string::npos) throw std::runtime_error("malformed header line: " + line);
        kv[line.substr(2, eq - 2)] = line.substr(eq + 3);
    }
    if (line != kColumns) throw std::runtime_error("dataset header missing column line");

    auto take = [&](const char* key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw std::runtime_error(std::string("header missing key: ") + key);
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    DatasetManifest m;
    m.code_version = take("code_version");
    m.resolution = std::stoi(take("resolution"));
    m.phys.cell_side = parse_double(take("cell_side"));
    m.phys.e_soft = parse_double(take("e_soft"));
    m.phys.rho_soft = parse_double(take("rho_soft"));
    m.phys.e_stiff = parse_double(take("e_stiff"));
    m.phys.rho_stiff = parse_double(take("rho_stiff"));
    m.phys.poisson_ratio = parse_double(take("poisson_ratio"));
    m.phys.plane_strain = take("plane_strain") == "1";
    m.points_per_segment = std::stoi(take("points_per_segment"));
    m.num_bands = std::stoi(take("num_bands"));
    m.elements_per_pixel = std::stoi(take("elements_per_pixel"));
    m.f_max = parse_double(take("f_max"));
    m.policies.clear();
    for (const auto& part : split_on(take("ranges"), ';')) {
        m.policies.push_back(LabelPolicy::parse(part));
    }
    if (!kv.empty()) throw std::runtime_error("unrecognized header key: " + kv.begin()->first);
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// records
// ---------------------------------------------------------------------------

std::string record_line(const DatasetRecord& rec) {
    std::ostringstream out;
    out << rec.design_id << ",";
    for (std::size_t i = 0; i < rec.gaps.size(); ++i) {
        if (i) out << ";";
        out << format_double(rec.gaps[i].lo) << ":" << format_double(rec.gaps[i].hi);
    }
    out << ",";
    for (uint8_t b : rec.labels) out << (b ? '1' : '0');
    return out.str();
}

DatasetRecord parse_record_line(const std::string& line, std::size_t num_policies) {
    auto fields = split_on(line, ',');
    if (fields.size() != 3) throw std::runtime_error("malformed record: " + line);
    DatasetRecord rec;
    rec.design_id = static_cast<uint32_t>(std::stoul(fields[0]));
    if (!fields[1].empty()) {
        for (const auto& part : split_on(fields[1], ';')) {
            auto lh = split_on(part, ':');
            if (lh.size() != 2) throw std::runtime_error("malformed gap interval: " + part);
            GapInterval g{parse_double(lh[0]), parse_double(lh[1])};
            if (!(g.hi > g.lo)) throw std::runtime_error("empty gap interval: " + part);
            rec.gaps.push_back(g);
        }
    }
    if (fields[2].size() != num_policies) {
        throw std::runtime_error("label count mismatch in record: " + line);
    }
    for (char ch : fields[2]) {
        if (ch != '0' && ch != '1') throw std::runtime_error("bad label bit in record: " + line);
        rec.labels.push_back(ch == '1');
    }
    return rec;
}

void LabeledDataset::validate() const {
    manifest.validate();
    const uint64_t id_bound = 1ull << irreducible_count(manifest.resolution);
    for (const auto& rec : records) {
        if (rec.design_id >= id_bound) {
            throw std::runtime_error("design id out of range: " + std::to_string(rec.design_id));
        }
        if (rec.labels.size() != manifest.policies.size()) {
            throw std::runtime_error("label count mismatch for id " +
                                     std::to_string(rec.design_id));
        }
        for (std::size_t p = 0; p < manifest.policies.size(); ++p) {
            if (label(rec.gaps, manifest.policies[p]) != rec.labels[p]) {
                throw std::runtime_error("stored label disagrees with gaps for id " +
                                         std::to_string(rec.design_id));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// file io
// ---------------------------------------------------------------------------

void save_dataset(const std::filesystem::path& path, const LabeledDataset& ds) {
    ds.manifest.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << ds.manifest.header_text();
    for (const auto& rec : ds.records) out << record_line(rec) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset: " + path.string());
    LabeledDataset ds;
    ds.manifest = DatasetManifest::parse_header(in);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') continue;  // failure notes and other comments
        ds.records.push_back(parse_record_line(line, ds.manifest.policies.size()));
    }
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// generation
// ---------------------------------------------------------------------------

DatasetRecord simulate_record(const DatasetManifest& manifest, uint32_t design_id) {
    UnitCell cell = UnitCell::from_design_id(manifest.resolution, design_id);
    DispersionResult res =
        dispersion(cell, manifest.phys, manifest.contour(), manifest.dispersion_config());
    DatasetRecord rec;
    rec.design_id = design_id;
    rec.gaps = res.gaps;
    for (const auto& p : manifest.policies) {
        rec.labels.push_back(static_cast<uint8_t>(label(rec.gaps, p)));
    }
    return rec;
}

std::vector<uint32_t> all_design_ids(int resolution) {
    int bits = irreducible_count(resolution);
    if (bits > 24) {
        throw std::invalid_argument("design space too large to enumerate exhaustively");
    }
    std::vector<uint32_t> ids(1ull << bits);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<uint32_t>(i);
    return ids;
}

GenerateStats generate(const std::vector<uint32_t>& ids, const DatasetManifest& manifest,
                       const std::filesystem::path& path, const GenerateOptions& opt) {
    manifest.validate();
    if (opt.checkpoint_every < 1) throw std::invalid_argument("checkpoint interval must be >= 1");

    // Resume by reading back what is already on disk; anything else on an
    // existing file would silently mix incompatible runs.
    std::unordered_set<uint32_t> present;
    bool file_exists = std::filesystem::exists(path) && std::filesystem::file_size(path) > 0;
    if (file_exists) {
        if (!opt.resume) {
            throw std::runtime_error("output exists (pass resume or remove it): " + path.string());
        }
        LabeledDataset existing = load_dataset(path);
        if (existing.manifest.header_text() != manifest.header_text()) {
            throw std::runtime_error("existing dataset was generated under a different manifest: " +
                                     path.string());
        }
        for (const auto& rec : existing.records) present.insert(rec.design_id);
    }

    GenerateStats stats;
    std::vector<uint32_t> todo;
    std::unordered_set<uint32_t> seen;
    for (uint32_t id : ids) {
        if (!seen.insert(id).second) continue;
        ++stats.requested;
        if (present.count(id)) {
            ++stats.skipped;
        } else {
            todo.push_back(id);
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    if (!file_exists) {
        out << manifest.header_text();
        out.flush();
    }
    if (todo.empty()) return stats;

    struct Outcome {
        DatasetRecord rec;
        std::string error;  // nonempty marks a failure
    };
    std::mutex mu;
    std::condition_variable cv;
    std::map<std::size_t, Outcome> done;
    std::atomic<std::size_t> next{0};
    std::size_t write_at = 0;

    int nthreads = opt.workers > 0 ? opt.workers : default_jobs();
    nthreads = static_cast<int>(std::min<std::size_t>(nthreads, todo.size()));
    const std::size_t buffer_cap = static_cast<std::size_t>(8 * nthreads + 32);

    auto worker = [&]() {
        for (;;) {
            std::size_t k = next.fetch_add(1);
            if (k >= todo.size()) return;
            {
                // Backpressure: never run far ahead of the writer, so the
                // out-of-order buffer stays small.
                std::unique_lock<std::mutex> lock(mu);
                cv.wait(lock, [&] { return k < write_at + buffer_cap; });
            }
            Outcome o;
            try {
                o.rec = simulate_record(manifest, todo[k]);
            } catch (const std::exception& e) {
                o.error = e.what();
                if (o.error.empty()) o.error = "unknown solver error";
            }
            {
                std::lock_guard<std::mutex> lock(mu);
                done.emplace(k, std::move(o));
            }
            cv.notify_all();
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);

    std::size_t since_flush = 0;
    for (; write_at < todo.size();) {
        Outcome o;
        {
            std::unique_lock<std::mutex> lock(mu);
            cv.wait(lock, [&] { return done.count(write_at) != 0; });
            auto it = done.find(write_at);
            o = std::move(it->second);
            done.erase(it);
        }
        if (o.error.empty()) {
            out << record_line(o.rec) << "\n";
            ++stats.computed;
        } else {
            std::replace(o.error.begin(), o.error.end(), '\n', ' ');
            out << "# failed id=" << todo[write_at] << " error=" << o.error << "\n";
            stats.failures.emplace_back(todo[write_at], o.error);
        }
        {
            std::lock_guard<std::mutex> lock(mu);
            ++write_at;
        }
        cv.notify_all();
        if (++since_flush >= static_cast<std::size_t>(opt.checkpoint_every)) {
            out.flush();
            since_flush = 0;
        }
        if (opt.progress) opt.progress(write_at, todo.size());
    }
    for (auto& t : pool) t.join();
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
    return stats;
}

// ---------------------------------------------------------------------------
// splitting
// ---------------------------------------------------------------------------

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, double test_fraction,
                                                uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("test fraction must lie strictly between 0 and 1");
    }
    const std::size_t n = ds.records.size();
    const std::size_t test_n =
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    auto g = rng_stream(seed, 0);
    for (std::size_t i = n; i > 1; --i) {
        std::swap(idx[i - 1], idx[bounded_draw(g, i)]);
    }
    std::vector<bool> in_test(n, false);
    for (std::size_t i = 0; i < test_n && i < n; ++i) in_test[idx[i]] = true;

    LabeledDataset train{ds.manifest, {}}, test{ds.manifest, {}};
    for (std::size_t i = 0; i < n; ++i) {
        (in_test[i] ? test : train).records.push_back(ds.records[i]);
    }
    return {std::move(train), std::move(test)};
}

}  // namespace gapminer
