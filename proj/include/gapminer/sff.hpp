// Shape-frequency features: the fraction of toroidal sliding-window
// placements at which a shape lies entirely in soft material. At a fine
// resolution m = scale * base_n the window dilates by scale, the stride
// equals scale, and a placement counts as a match while it contains fewer
// than `scale` stiff pixels.
#pragma once

#include <bitset>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "gapminer/unitcell.hpp"
#include "gapminer/util.hpp"

namespace gapminer {

struct Shape {
    std::string name;
    std::vector<std::pair<int, int>> offsets;  // (row, col), deduped, min row = min col = 0

    Shape(std::string shape_name, std::vector<std::pair<int, int>> raw_offsets);

    int height() const;
    int width() const;

    // Rotated by 90 degrees (counterclockwise), re-normalized.
    Shape rotated90() const;
};

class ShapeLibrary {
public:
    ShapeLibrary() = default;
    explicit ShapeLibrary(std::vector<Shape> shapes);

    const std::vector<Shape>& shapes() const { return shapes_; }
    std::size_t size() const { return shapes_.size(); }
    const Shape& at(std::size_t i) const { return shapes_[i]; }
    int index_of(const std::string& name) const;  // -1 when absent

    // All solid h x w rectangles for h,w in 1..4, the 3x3 plus, and pairs of
    // parallel 1x4 bars with gaps 1..3.
    static ShapeLibrary default_library();

    // One shape per line: `name: (r,c) (r,c) ...`. '#' starts a comment.
    static ShapeLibrary load(std::istream& in);
    static ShapeLibrary load_file(const std::string& path);
    void save(std::ostream& out) const;

    uint64_t digest() const;

private:
    std::vector<Shape> shapes_;
};

struct SFFVector {
    std::vector<int> counts;  // matches per shape
    int denominator = 1;      // placements = base_n^2 (coarse: n^2)
    int resolution = 0;       // resolution of the featurized cell

    double value(std::size_t i) const {
        return static_cast<double>(counts[i]) / static_cast<double>(denominator);
    }
    Rational rational(std::size_t i) const { return Rational{counts[i], denominator}; }
};

// Matrix-level entry points; the grid need not be symmetric.
SFFVector sff_coarse_grid(const Grid& m, const ShapeLibrary& lib);
SFFVector sff_fine_grid(const Grid& m, const ShapeLibrary& lib, int base_n);

SFFVector sff_coarse(const UnitCell& cell, const ShapeLibrary& lib);

// Requires cell resolution to be a multiple of base_n. scale = 1 reduces to
// the coarse definition.
SFFVector sff_fine(const UnitCell& cell, const ShapeLibrary& lib, int base_n = 10);

// Features for a cell of any supported resolution against a base resolution:
// coarse when resolution == base_n, fine otherwise.
SFFVector featurize(const UnitCell& cell, const ShapeLibrary& lib, int base_n = 10);

}  // namespace gapminer
