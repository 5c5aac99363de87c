// Labeled dataset generation and persistence: drives the dispersion solver
// over a set of design ids, stores band gaps plus per-range labels in a
// human-inspectable CSV with a manifest header, and supports resumable,
// checkpointed bulk runs.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "gapminer/dispersion.hpp"
#include "gapminer/unitcell.hpp"

namespace gapminer {

inline constexpr const char* kCodeVersion = "gapminer-0.1";

// Everything needed to reproduce a record byte-for-byte: geometry scale,
// materials, contour density, solver band count, mesh density, and the
// frequency ranges behind each label bit.
struct DatasetManifest {
    int resolution = 10;
    PhysicalConfig phys;
    int points_per_segment = 16;
    int num_bands = 10;
    int elements_per_pixel = 1;
    double f_max = 60e3;
    std::vector<LabelPolicy> policies;
    std::string code_version = kCodeVersion;

    // Ten ranges: 10 kHz decades up to 50 kHz plus 6 kHz steps up to 30 kHz,
    // all under the gap-intersects-range labeling rule.
    static DatasetManifest defaults();

    WavevectorContour contour() const;
    DispersionConfig dispersion_config() const;
    void validate() const;

    // The `# key = value` header block, ending with the CSV column line.
    std::string header_text() const;
    static DatasetManifest parse_header(std::istream& in);
};

struct DatasetRecord {
    uint32_t design_id = 0;
    std::vector<GapInterval> gaps;
    std::vector<uint8_t> labels;  // one bit per manifest policy, in order
};

struct LabeledDataset {
    DatasetManifest manifest;
    std::vector<DatasetRecord> records;

    // Recomputes every label from the stored gaps; throws on any mismatch
    // or on a design id outside the manifest's design space.
    void validate() const;
};

std::string record_line(const DatasetRecord& rec);
DatasetRecord parse_record_line(const std::string& line, std::size_t num_policies);

void save_dataset(const std::filesystem::path& path, const LabeledDataset& ds);
LabeledDataset load_dataset(const std::filesystem::path& path);

// Runs the full dispersion pipeline for one design id under the manifest.
DatasetRecord simulate_record(const DatasetManifest& manifest, uint32_t design_id);

struct GenerateOptions {
    bool resume = false;       // skip ids already present in the output file
    int workers = 0;           // 0 -> one per hardware thread
    int checkpoint_every = 256;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

struct GenerateStats {
    std::size_t requested = 0;
    std::size_t computed = 0;
    std::size_t skipped = 0;  // already present (resume)
    std::vector<std::pair<uint32_t, std::string>> failures;
};

// Computes records for `ids` (in order, duplicates dropped) and appends them
// to `path`, writing the manifest header first when the file is new. Designs
// fan out across a worker pool; the writer emits records in request order and
// flushes every checkpoint_every records, so interrupted runs resume cleanly.
// A solver failure excludes that id (noted as a comment line and in the
// returned stats) and the run continues.
GenerateStats generate(const std::vector<uint32_t>& ids, const DatasetManifest& manifest,
                       const std::filesystem::path& path, const GenerateOptions& opt = {});

// Every id in the manifest's design space, 0 .. 2^T(n) - 1.
std::vector<uint32_t> all_design_ids(int resolution);

// Seeded disjoint split; the test side gets round(N * test_fraction) records
// and both sides keep the original record order.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, double test_fraction,
                                                uint64_t seed);

}  // namespace gapminer
