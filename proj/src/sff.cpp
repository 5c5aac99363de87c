#include "gapminer/sff.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace gapminer {

namespace {

// Wide enough for a doubled row at the largest supported resolution (2*128).
using RowBits = std::bitset<256>;

constexpr int kMaxSide = 128;

RowBits row_mask(int n) {
    RowBits m;
    for (int j = 0; j < n; ++j) m.set(static_cast<std::size_t>(j));
    return m;
}

// bit j of result = bit (j + k) mod n of w, for w confined to the low n bits.
RowBits rotate_cols(const RowBits& w, int k, int n, const RowBits& mask) {
    k %= n;
    if (k == 0) return w;
    return ((w >> static_cast<std::size_t>(k)) |
            (w << static_cast<std::size_t>(n - k))) & mask;
}

std::vector<RowBits> stiff_rows(const Grid& g) {
    std::vector<RowBits> rows(static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j < g.n; ++j) {
            if (g.at(i, j)) rows[static_cast<std::size_t>(i)].set(static_cast<std::size_t>(j));
        }
    }
    return rows;
}

}  // namespace

Shape::Shape(std::string shape_name, std::vector<std::pair<int, int>> raw_offsets)
    : name(std::move(shape_name)) {
    if (raw_offsets.empty()) throw std::invalid_argument("shape '" + name + "' has no offsets");
    int min_r = raw_offsets[0].first, min_c = raw_offsets[0].second;
    for (auto [r, c] : raw_offsets) {
        min_r = std::min(min_r, r);
        min_c = std::min(min_c, c);
    }
    std::set<std::pair<int, int>> dedup;
    for (auto [r, c] : raw_offsets) dedup.insert({r - min_r, c - min_c});
    offsets.assign(dedup.begin(), dedup.end());
}

int Shape::height() const {
    int h = 0;
    for (auto [r, c] : offsets) h = std::max(h, r + 1);
    return h;
}

int Shape::width() const {
    int w = 0;
    for (auto [r, c] : offsets) w = std::max(w, c + 1);
    return w;
}

Shape Shape::rotated90() const {
    std::vector<std::pair<int, int>> rot;
    rot.reserve(offsets.size());
    for (auto [r, c] : offsets) rot.emplace_back(-c, r);
    return Shape(name + "_rot90", std::move(rot));
}

ShapeLibrary::ShapeLibrary(std::vector<Shape> shapes) : shapes_(std::move(shapes)) {
    if (shapes_.empty()) throw std::invalid_argument("shape library is empty");
    std::set<std::string> names;
    for (const auto& s : shapes_) {
        if (!names.insert(s.name).second) {
            throw std::invalid_argument("duplicate shape name: " + s.name);
        }
    }
}

int ShapeLibrary::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < shapes_.size(); ++i) {
        if (shapes_[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

ShapeLibrary ShapeLibrary::default_library() {
    std::vector<Shape> shapes;
    for (int h = 1; h <= 4; ++h) {
        for (int w = 1; w <= 4; ++w) {
            std::vector<std::pair<int, int>> offs;
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) offs.emplace_back(r, c);
            shapes.emplace_back("rect_" + std::to_string(h) + "x" + std::to_string(w),
                                std::move(offs));
        }
    }
    shapes.emplace_back("plus_3x3", std::vector<std::pair<int, int>>{
                                        {0, 1}, {1, 0}, {1, 1}, {1, 2}, {2, 1}});
    for (int gap = 1; gap <= 3; ++gap) {
        std::vector<std::pair<int, int>> offs;
        for (int c = 0; c < 4; ++c) {
            offs.emplace_back(0, c);
            offs.emplace_back(gap + 1, c);
        }
        shapes.emplace_back("bars_1x4_gap" + std::to_string(gap), std::move(offs));
    }
    return ShapeLibrary(std::move(shapes));
}

ShapeLibrary ShapeLibrary::load(std::istream& in) {
    std::vector<Shape> shapes;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto colon = line.find(':');
        if (colon == std::string::npos) {
            throw std::runtime_error("shape file line " + std::to_string(lineno) +
                                     ": expected `name: (r,c) ...`");
        }
        std::string name = line.substr(0, colon);
        name.erase(0, name.find_first_not_of(" \t"));
        name.erase(name.find_last_not_of(" \t") + 1);
        std::vector<std::pair<int, int>> offs;
        std::string rest = line.substr(colon + 1);
        for (std::size_t p = rest.find('('); p != std::string::npos; p = rest.find('(', p + 1)) {
            int r = 0, c = 0;
            char comma = 0, close = 0;
            std::istringstream cs(rest.substr(p + 1));
            if (!(cs >> r >> comma >> c >> close) || comma != ',' || close != ')') {
                throw std::runtime_error("shape file line " + std::to_string(lineno) +
                                         ": malformed offset near position " + std::to_string(p));
            }
            offs.emplace_back(r, c);
        }
        shapes.emplace_back(std::move(name), std::move(offs));
    }
    return ShapeLibrary(std::move(shapes));
}

ShapeLibrary ShapeLibrary::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open shape library: " + path);
    return load(in);
}

void ShapeLibrary::save(std::ostream& out) const {
    for (const auto& s : shapes_) {
        out << s.name << ":";
        for (auto [r, c] : s.offsets) out << " (" << r << "," << c << ")";
        out << "\n";
    }
}

uint64_t ShapeLibrary::digest() const {
    std::ostringstream ss;
    save(ss);
    return fnv1a64(ss.str());
}

SFFVector sff_coarse_grid(const Grid& g, const ShapeLibrary& lib) {
    if (lib.size() == 0) throw std::invalid_argument("empty shape library");
    const int n = g.n;
    if (n > kMaxSide) throw std::invalid_argument("grid side exceeds supported maximum");
    const RowBits mask = row_mask(n);
    const auto rows = stiff_rows(g);

    SFFVector out;
    out.denominator = n * n;
    out.resolution = n;
    out.counts.reserve(lib.size());
    for (const auto& shape : lib.shapes()) {
        // Group column offsets by row offset (both reduced mod n).
        std::vector<std::vector<int>> cols_by_row(static_cast<std::size_t>(n));
        for (auto [orow, ocol] : shape.offsets) {
            cols_by_row[static_cast<std::size_t>(orow % n)].push_back(ocol % n);
        }
        int matches = 0;
        for (int i = 0; i < n; ++i) {
            // Bit j of blocked = placement (i,j) hits stiff material somewhere.
            RowBits blocked;
            for (int dr = 0; dr < n; ++dr) {
                if (cols_by_row[static_cast<std::size_t>(dr)].empty()) continue;
                const RowBits& w = rows[static_cast<std::size_t>((i + dr) % n)];
                for (int oc : cols_by_row[static_cast<std::size_t>(dr)]) {
                    blocked |= rotate_cols(w, oc, n, mask);
                }
            }
            matches += n - static_cast<int>(blocked.count());
        }
        out.counts.push_back(matches);
    }
    return out;
}

SFFVector sff_fine_grid(const Grid& g, const ShapeLibrary& lib, int base_n) {
    if (lib.size() == 0) throw std::invalid_argument("empty shape library");
    const int m = g.n;
    if (base_n < 1 || m % base_n != 0) {
        throw std::invalid_argument("fine resolution " + std::to_string(m) +
                                    " is not a multiple of base " + std::to_string(base_n));
    }
    const int scale = m / base_n;
    if (scale == 1) return sff_coarse_grid(g, lib);
    if (m > kMaxSide) throw std::invalid_argument("grid side exceeds supported maximum");

    const auto rows = stiff_rows(g);
    // Doubled rows so a window shifted by any j < m stays inside the word.
    std::vector<RowBits> doubled(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        doubled[i] = rows[i] | (rows[i] << static_cast<std::size_t>(m));
    }

    SFFVector out;
    out.denominator = base_n * base_n;
    out.resolution = m;
    out.counts.reserve(lib.size());
    for (const auto& shape : lib.shapes()) {
        // Dilate each offset to a scale x scale block; collect one column mask
        // per distinct dilated row. Offsets are reduced mod base_n first so
        // blocks stay within [0, m).
        std::set<std::pair<int, int>> reduced;
        for (auto [orow, ocol] : shape.offsets) reduced.insert({orow % base_n, ocol % base_n});
        std::vector<RowBits> colmask(static_cast<std::size_t>(m));
        std::vector<uint8_t> row_used(static_cast<std::size_t>(m), 0);
        for (auto [orow, ocol] : reduced) {
            for (int t = 0; t < scale; ++t) {
                int dr = orow * scale + t;
                row_used[static_cast<std::size_t>(dr)] = 1;
                for (int u = 0; u < scale; ++u) {
                    colmask[static_cast<std::size_t>(dr)].set(
                        static_cast<std::size_t>(ocol * scale + u));
                }
            }
        }
        std::vector<int> used_rows;
        for (int dr = 0; dr < m; ++dr) {
            if (row_used[static_cast<std::size_t>(dr)]) used_rows.push_back(dr);
        }

        int matches = 0;
        for (int bi = 0; bi < base_n; ++bi) {
            const int i = bi * scale;
            for (int bj = 0; bj < base_n; ++bj) {
                const std::size_t j = static_cast<std::size_t>(bj) * scale;
                int stiff = 0;
                for (int dr : used_rows) {
                    stiff += static_cast<int>(
                        ((doubled[static_cast<std::size_t>((i + dr) % m)] >> j) &
                         colmask[static_cast<std::size_t>(dr)])
                            .count());
                    if (stiff >= scale) break;
                }
                if (stiff < scale) ++matches;
            }
        }
        out.counts.push_back(matches);
    }
    return out;
}

SFFVector sff_coarse(const UnitCell& cell, const ShapeLibrary& lib) {
    return sff_coarse_grid(cell.expand(), lib);
}

SFFVector sff_fine(const UnitCell& cell, const ShapeLibrary& lib, int base_n) {
    return sff_fine_grid(cell.expand(), lib, base_n);
}

SFFVector featurize(const UnitCell& cell, const ShapeLibrary& lib, int base_n) {
    if (cell.resolution() == base_n) return sff_coarse(cell, lib);
    return sff_fine(cell, lib, base_n);
}

}  // namespace gapminer
