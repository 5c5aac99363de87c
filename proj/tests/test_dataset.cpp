#include "doctest.h"

#include "gapminer/dataset.hpp"
#include "gapminer/util.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

using namespace gapminer;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("gapminer_test_" + hex64(rng_stream(std::random_device{}(), 0)()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small, fast manifest for generation tests: short contour, few bands.
DatasetManifest tiny_manifest() {
    DatasetManifest m = DatasetManifest::defaults();
    m.points_per_segment = 2;
    m.num_bands = 4;
    m.elements_per_pixel = 1;
    return m;
}

}  // namespace

TEST_CASE("double formatting round trips exactly") {
    for (double v : {0.1, 1.0 / 3.0, 2e9, 12345.678901234567, -7.25e-12, 0.0, 60000.0}) {
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(60000.0) == "60000");
    CHECK_THROWS_AS(parse_double("12x"), std::invalid_argument);
    CHECK_THROWS_AS(parse_double(""), std::invalid_argument);
}

TEST_CASE("default manifest carries the ten standard ranges") {
    auto m = DatasetManifest::defaults();
    m.validate();
    REQUIRE(m.policies.size() == 10);
    CHECK(m.policies[0].to_string() == "intersect:0:10000");
    CHECK(m.policies[4].to_string() == "intersect:40000:50000");
    CHECK(m.policies[5].to_string() == "intersect:0:6000");
    CHECK(m.policies[9].to_string() == "intersect:24000:30000");
    CHECK(m.resolution == 10);
    CHECK(m.elements_per_pixel == 1);
    CHECK(m.points_per_segment == 16);
    CHECK(m.num_bands == 10);
}

TEST_CASE("manifest header round trips") {
    auto m = DatasetManifest::defaults();
    m.phys.poisson_ratio = 0.275;
    m.num_bands = 7;
    std::istringstream in(m.header_text());
    auto back = DatasetManifest::parse_header(in);
    CHECK(back.header_text() == m.header_text());
    CHECK(back.phys.poisson_ratio == 0.275);
    CHECK(back.num_bands == 7);
    CHECK(back.policies.size() == 10);

    std::istringstream bad("# not a dataset\n");
    CHECK_THROWS(DatasetManifest::parse_header(bad));
}

TEST_CASE("record lines round trip, including empty gap lists") {
    DatasetRecord rec;
    rec.design_id = 1234;
    rec.gaps = {{10234.567891234567, 12500.0}, {31000.25, 59999.9}};
    rec.labels = {0, 1, 0, 1, 0, 0, 0, 0, 0, 1};
    std::string line = record_line(rec);
    auto back = parse_record_line(line, 10);
    CHECK(back.design_id == rec.design_id);
    REQUIRE(back.gaps.size() == 2);
    CHECK(back.gaps[0].lo == rec.gaps[0].lo);
    CHECK(back.gaps[0].hi == rec.gaps[0].hi);
    CHECK(back.gaps[1].lo == rec.gaps[1].lo);
    CHECK(back.labels == rec.labels);

    DatasetRecord empty;
    empty.design_id = 0;
    empty.labels.assign(10, 0);
    CHECK(record_line(empty) == "0,,0000000000");
    auto eb = parse_record_line("0,,0000000000", 10);
    CHECK(eb.gaps.empty());

    CHECK_THROWS(parse_record_line("5,100:99,00", 2));         // inverted interval
    CHECK_THROWS(parse_record_line("5,,010", 2));              // label count mismatch
    CHECK_THROWS(parse_record_line("5,,0x", 2));               // bad label character
    CHECK_THROWS(parse_record_line("garbage", 2));             // missing fields
}

TEST_CASE("dataset save/load round trips and validates labels") {
    TempDir tmp;
    LabeledDataset ds;
    ds.manifest = DatasetManifest::defaults();
    DatasetRecord rec;
    rec.design_id = 77;
    rec.gaps = {{12000.0, 15000.0}};
    for (const auto& p : ds.manifest.policies) {
        rec.labels.push_back(static_cast<uint8_t>(label(rec.gaps, p)));
    }
    ds.records.push_back(rec);
    auto file = tmp.path / "ds.csv";
    save_dataset(file, ds);
    auto back = load_dataset(file);
    REQUIRE(back.records.size() == 1);
    CHECK(back.records[0].design_id == 77);
    CHECK(back.records[0].gaps[0].lo == 12000.0);
    CHECK(back.records[0].labels == rec.labels);

    // A tampered label must be caught by the recompute check on load.
    std::string text = read_file(file);
    auto pos = text.rfind("0100000100");  // [10,20] and [12,18] kHz intersect hits
    REQUIRE(pos != std::string::npos);
    text[pos] = '1';
    std::ofstream(file, std::ios::binary | std::ios::trunc) << text;
    CHECK_THROWS_WITH_AS(load_dataset(file),
                         doctest::Contains("stored label disagrees"), std::runtime_error);
}

TEST_CASE("homogeneous designs generate empty gap lists and zero labels") {
    TempDir tmp;
    auto m = tiny_manifest();
    // The two-point contour of tiny_manifest undersamples band crossings and
    // can fabricate gaps; homogeneous media need the denser sampling.
    m.points_per_segment = 8;
    auto file = tmp.path / "homog.csv";
    // All-soft and all-stiff cells are homogeneous media: no band gaps at all.
    auto stats = generate({0, 32767}, m, file);
    CHECK(stats.requested == 2);
    CHECK(stats.computed == 2);
    CHECK(stats.failures.empty());
    auto ds = load_dataset(file);
    REQUIRE(ds.records.size() == 2);
    for (const auto& rec : ds.records) {
        CHECK(rec.gaps.empty());
        for (uint8_t b : rec.labels) CHECK(b == 0);
    }
}

TEST_CASE("generation is deterministic and resume skips finished work") {
    TempDir tmp;
    auto m = tiny_manifest();
    std::vector<uint32_t> first = {5, 9000};
    std::vector<uint32_t> full = {5, 9000, 0x2A5B, 321};

    auto a = tmp.path / "a.csv";
    auto b = tmp.path / "b.csv";
    auto stats_a1 = generate(first, m, a);
    CHECK(stats_a1.computed == 2);
    auto stats_a2 = generate(full, m, a, {.resume = true});
    CHECK(stats_a2.requested == 4);
    CHECK(stats_a2.skipped == 2);
    CHECK(stats_a2.computed == 2);

    auto stats_b = generate(full, m, b);
    CHECK(stats_b.computed == 4);
    // Interrupt-and-resume must land on the same bytes as a single run.
    CHECK(read_file(a) == read_file(b));

    // Plain rerun refuses to clobber, resume with nothing left is a no-op.
    CHECK_THROWS(generate(full, m, b));
    auto stats_b2 = generate(full, m, b, {.resume = true});
    CHECK(stats_b2.skipped == 4);
    CHECK(stats_b2.computed == 0);
    CHECK(read_file(a) == read_file(b));

    // Resuming under different physics is a hard error.
    auto m2 = m;
    m2.phys.poisson_ratio = 0.2;
    CHECK_THROWS_WITH_AS(generate(full, m2, b, {.resume = true}),
                         doctest::Contains("different manifest"), std::runtime_error);

    // Duplicate requests collapse to one record.
    auto c = tmp.path / "c.csv";
    auto stats_c = generate({7, 7, 7}, m, c);
    CHECK(stats_c.requested == 1);
    CHECK(load_dataset(c).records.size() == 1);
}

TEST_CASE("worker count does not change the output bytes") {
    TempDir tmp;
    auto m = tiny_manifest();
    std::vector<uint32_t> ids = {1, 2, 3, 4, 5, 6, 7, 8};
    auto one = tmp.path / "w1.csv";
    auto four = tmp.path / "w4.csv";
    generate(ids, m, one, {.workers = 1});
    generate(ids, m, four, {.workers = 4});
    CHECK(read_file(one) == read_file(four));
}

TEST_CASE("solver failures are flagged, excluded, and do not stop the run") {
    TempDir tmp;
    auto m = tiny_manifest();
    m.num_bands = 250;  // exceeds the 200 reduced dof at epp=1 -> every id fails
    auto file = tmp.path / "fail.csv";
    auto stats = generate({1, 2}, m, file);
    CHECK(stats.computed == 0);
    REQUIRE(stats.failures.size() == 2);
    CHECK(stats.failures[0].first == 1);
    auto ds = load_dataset(file);
    CHECK(ds.records.empty());
    // Failure notes are comments; a resume retries the failed ids.
    CHECK(read_file(file).find("# failed id=1") != std::string::npos);
    auto stats2 = generate({1}, m, file, {.resume = true});
    CHECK(stats2.skipped == 0);
    CHECK(stats2.failures.size() == 1);
}

TEST_CASE("all_design_ids enumerates the full coarse design space") {
    auto ids = all_design_ids(10);
    CHECK(ids.size() == 32768);
    CHECK(ids.front() == 0);
    CHECK(ids.back() == 32767);
    CHECK_THROWS(all_design_ids(20));  // 2^55 designs: refuse
}

TEST_CASE("split produces reproducible disjoint partitions of the right size") {
    LabeledDataset ds;
    ds.manifest = DatasetManifest::defaults();
    const std::size_t n = 32768;
    for (std::size_t i = 0; i < n; ++i) {
        DatasetRecord rec;
        rec.design_id = static_cast<uint32_t>(i);
        rec.labels.assign(ds.manifest.policies.size(), 0);
        ds.records.push_back(rec);
    }
    auto [train, test] = split(ds, 0.2, 99);
    CHECK(test.records.size() == 6554);  // round(32768 * 0.2)
    CHECK(train.records.size() == n - 6554);

    std::set<uint32_t> seen;
    for (const auto& r : train.records) seen.insert(r.design_id);
    for (const auto& r : test.records) seen.insert(r.design_id);
    CHECK(seen.size() == n);  // disjoint and complete

    auto [train2, test2] = split(ds, 0.2, 99);
    REQUIRE(test2.records.size() == test.records.size());
    bool same = true;
    for (std::size_t i = 0; i < test.records.size(); ++i) {
        same = same && test2.records[i].design_id == test.records[i].design_id;
    }
    CHECK(same);

    auto [train3, test3] = split(ds, 0.2, 100);
    bool differs = test3.records.size() != test.records.size();
    for (std::size_t i = 0; !differs && i < test.records.size(); ++i) {
        differs = test3.records[i].design_id != test.records[i].design_id;
    }
    CHECK(differs);  // a different seed must reshuffle

    // Both halves keep the original record order.
    for (std::size_t i = 1; i < test.records.size(); ++i) {
        REQUIRE(test.records[i - 1].design_id < test.records[i].design_id);
    }

    LabeledDataset ten;
    ten.manifest = ds.manifest;
    ten.records.assign(ds.records.begin(), ds.records.begin() + 10);
    auto [t5a, t5b] = split(ten, 0.5, 1);
    CHECK(t5a.records.size() == 5);
    CHECK(t5b.records.size() == 5);
    CHECK_THROWS_AS(split(ten, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split(ten, 1.0, 1), std::invalid_argument);
}
