#pragma once

#include "mars/assembly.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mars
{

/// Planar occupancy grid at a fixed flight altitude with its signed
/// distance field. Cell (0, 0) spans [0, res) x [0, res) in world x/y;
/// anything outside the grid counts as obstacle.
class Environment
{
public:
    Environment() = default;
    /// `occupied` is row-major with row 0 at the lowest y.
    Environment(int rows, int cols, double resolution, std::vector<char> occupied);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double resolution() const { return resolution_; }
    double width() const { return cols_ * resolution_; }
    double height() const { return rows_ * resolution_; }

    bool occupied(int row, int col) const;
    bool in_bounds(int row, int col) const { return row >= 0 && row < rows_ && col >= 0 && col < cols_; }
    /// Signed distance at a cell center, m. Positive in free space.
    double sdf_cell(int row, int col) const;
    /// Bilinear interpolation of the cell-center field; points outside the
    /// grid return a negative distance.
    double sdf(const Vec2 &p) const;
    Vec2 cell_center(int row, int col) const;

    /// Copy with an additional obstacle cell.
    Environment with_obstacle(int row, int col) const;

private:
    void compute_sdf();

    int rows_ = 0;
    int cols_ = 0;
    double resolution_ = 0.1;
    std::vector<char> occ_;
    std::vector<double> sdf_;
};

/// Text map: a `resolution <meters>` header line, then grid lines using
/// '#' for obstacles and '.' for free space, top line = highest y.
/// Lines starting with "//" are comments.
Environment parse_environment(const std::string &text);
Environment load_environment(const std::filesystem::path &path);

/// Outline samples of the assembly footprint in the body frame: the outer
/// edges of every unit square (side = pitch), spaced at most `spacing`.
std::vector<Vec2> footprint_samples(const AssemblyLayout &layout, double spacing);

/// Smallest signed distance over the footprint samples placed at (p, yaw).
double footprint_clearance(const Environment &env, const std::vector<Vec2> &samples, const Vec2 &p, double yaw);

} // namespace mars
