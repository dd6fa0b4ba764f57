#include "mars/environment.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace mars
{

namespace
{

constexpr double kInf = 1e20;

// Squared Euclidean distance transform along one dimension (Felzenszwalb &
// Huttenlocher lower envelope of parabolas).
void edt_1d(const std::vector<double> &f, std::vector<double> &d)
{
    const int n = static_cast<int>(f.size());
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q)
    {
        double s;
        while (true)
        {
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            if (s <= z[k] && k > 0)
                --k;
            else
                break;
        }
        if (s <= z[k])
        {
            // k == 0 and the new parabola dominates everywhere.
            v[0] = q;
            z[0] = -kInf;
            z[1] = kInf;
            continue;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q)
    {
        while (z[k + 1] < q)
            ++k;
        d[q] = (q - v[k]) * (q - v[k]) + f[v[k]];
    }
}

// Distance (in cells) from every cell to the nearest cell with seed == true.
std::vector<double> edt_2d(int rows, int cols, const std::vector<char> &seed)
{
    std::vector<double> grid(static_cast<std::size_t>(rows) * cols);
    for (std::size_t i = 0; i < grid.size(); ++i)
        grid[i] = seed[i] ? 0.0 : kInf;

    std::vector<double> f(std::max(rows, cols)), d(std::max(rows, cols));
    f.resize(rows);
    d.resize(rows);
    for (int c = 0; c < cols; ++c)
    {
        for (int r = 0; r < rows; ++r)
            f[r] = grid[r * cols + c];
        edt_1d(f, d);
        for (int r = 0; r < rows; ++r)
            grid[r * cols + c] = d[r];
    }
    f.resize(cols);
    d.resize(cols);
    for (int r = 0; r < rows; ++r)
    {
        for (int c = 0; c < cols; ++c)
            f[c] = grid[r * cols + c];
        edt_1d(f, d);
        for (int c = 0; c < cols; ++c)
            grid[r * cols + c] = std::sqrt(d[c]);
    }
    return grid;
}

} // namespace

Environment::Environment(int rows, int cols, double resolution, std::vector<char> occupied)
    : rows_(rows)
    , cols_(cols)
    , resolution_(resolution)
    , occ_(std::move(occupied))
{
    if (rows <= 0 || cols <= 0)
        throw InvalidArgument("environment grid must be non-empty");
    if (!(resolution > 0.0))
        throw InvalidArgument("environment resolution must be positive");
    if (static_cast<int>(occ_.size()) != rows * cols)
        throw InvalidArgument("environment occupancy size does not match rows x cols");
    compute_sdf();
}

void Environment::compute_sdf()
{
    // Pad with one ring of obstacles so the map border acts as a wall.
    const int R = rows_ + 2;
    const int C = cols_ + 2;
    std::vector<char> occ(static_cast<std::size_t>(R) * C, 1);
    for (int r = 0; r < rows_; ++r)
        for (int c = 0; c < cols_; ++c)
            occ[(r + 1) * C + (c + 1)] = occ_[r * cols_ + c];
    std::vector<char> free(occ.size());
    for (std::size_t i = 0; i < occ.size(); ++i)
        free[i] = !occ[i];

    const auto to_obstacle = edt_2d(R, C, occ);
    const auto to_free = edt_2d(R, C, free);
    sdf_.assign(static_cast<std::size_t>(rows_) * cols_, 0.0);
    for (int r = 0; r < rows_; ++r)
    {
        for (int c = 0; c < cols_; ++c)
        {
            const std::size_t i = (r + 1) * C + (c + 1);
            const double cells = occ[i] ? -to_free[i] : to_obstacle[i];
            // Cell centers are half a cell away from the boundary between
            // a free and an occupied cell.
            sdf_[r * cols_ + c] = (cells - (occ[i] ? -0.5 : 0.5)) * resolution_;
        }
    }
}

bool Environment::occupied(int row, int col) const
{
    if (!in_bounds(row, col))
        return true;
    return occ_[row * cols_ + col] != 0;
}

double Environment::sdf_cell(int row, int col) const
{
    if (!in_bounds(row, col))
        return -0.5 * resolution_;
    return sdf_[row * cols_ + col];
}

Vec2 Environment::cell_center(int row, int col) const
{
    return Vec2((col + 0.5) * resolution_, (row + 0.5) * resolution_);
}

double Environment::sdf(const Vec2 &p) const
{
    if (p.x() < 0.0 || p.y() < 0.0 || p.x() > width() || p.y() > height())
    {
        const double dx = std::max({-p.x(), p.x() - width(), 0.0});
        const double dy = std::max({-p.y(), p.y() - height(), 0.0});
        return -std::max(std::hypot(dx, dy), 0.5 * resolution_);
    }
    const double gx = p.x() / resolution_ - 0.5;
    const double gy = p.y() / resolution_ - 0.5;
    const int c0 = static_cast<int>(std::floor(gx));
    const int r0 = static_cast<int>(std::floor(gy));
    const double tx = gx - c0;
    const double ty = gy - r0;
    auto at = [&](int r, int c) {
        r = std::clamp(r, 0, rows_ - 1);
        c = std::clamp(c, 0, cols_ - 1);
        return sdf_[r * cols_ + c];
    };
    return (1 - ty) * ((1 - tx) * at(r0, c0) + tx * at(r0, c0 + 1)) +
           ty * ((1 - tx) * at(r0 + 1, c0) + tx * at(r0 + 1, c0 + 1));
}

Environment Environment::with_obstacle(int row, int col) const
{
    if (!in_bounds(row, col))
        throw InvalidArgument("with_obstacle: cell out of bounds");
    std::vector<char> occ = occ_;
    occ[row * cols_ + col] = 1;
    return Environment(rows_, cols_, resolution_, std::move(occ));
}

Environment parse_environment(const std::string &text)
{
    std::istringstream in(text);
    std::string line;
    double resolution = -1.0;
    std::vector<std::string> grid;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.rfind("//", 0) == 0)
            continue;
        if (line.rfind("resolution", 0) == 0)
        {
            std::istringstream kv(line.substr(10));
            if (!(kv >> resolution) || !(resolution > 0.0))
                throw InvalidArgument("map line " + std::to_string(line_no) + ": bad resolution");
            continue;
        }
        if (line.find_first_not_of("#.") != std::string::npos)
            throw InvalidArgument("map line " + std::to_string(line_no) + ": only '#' and '.' allowed in grid rows");
        if (!grid.empty() && line.size() != grid.front().size())
            throw InvalidArgument("map line " + std::to_string(line_no) + ": ragged grid row");
        grid.push_back(line);
    }
    if (resolution <= 0.0)
        throw InvalidArgument("map: missing resolution header");
    if (grid.empty())
        throw InvalidArgument("map: no grid rows");

    const int rows = static_cast<int>(grid.size());
    const int cols = static_cast<int>(grid.front().size());
    std::vector<char> occ(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            occ[r * cols + c] = grid[rows - 1 - r][c] == '#';
    return Environment(rows, cols, resolution, std::move(occ));
}

Environment load_environment(const std::filesystem::path &path)
{
    std::ifstream f(path);
    if (!f)
        throw InvalidArgument("cannot open map file " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_environment(ss.str());
}

std::vector<Vec2> footprint_samples(const AssemblyLayout &layout, double spacing)
{
    if (!(spacing > 0.0))
        throw InvalidArgument("footprint_samples: spacing must be positive");
    const std::set<Cell> cells(layout.cells.begin(), layout.cells.end());
    const double h = 0.5 * layout.pitch;
    const int steps = std::max(1, static_cast<int>(std::ceil(layout.pitch / spacing)));

    std::vector<Vec2> out;
    for (int i = 0; i < layout.n(); ++i)
    {
        const Cell c = layout.cells[i];
        const Vec2 center = layout.positions[i];
        struct Edge
        {
            Cell neighbor;
            Vec2 a, b;
        };
        const Edge edges[] = {
            {{c.row, c.col + 1}, Vec2(h, -h), Vec2(h, h)},
            {{c.row + 1, c.col}, Vec2(h, h), Vec2(-h, h)},
            {{c.row, c.col - 1}, Vec2(-h, h), Vec2(-h, -h)},
            {{c.row - 1, c.col}, Vec2(-h, -h), Vec2(h, -h)},
        };
        for (const auto &e : edges)
        {
            if (cells.count(e.neighbor))
                continue;
            // Includes the start corner, excludes the end corner; the next
            // edge (or a neighbor's edge) supplies it.
            for (int s = 0; s < steps; ++s)
                out.push_back(center + e.a + (e.b - e.a) * (static_cast<double>(s) / steps));
            out.push_back(center + e.b);
        }
    }
    return out;
}

double footprint_clearance(const Environment &env, const std::vector<Vec2> &samples, const Vec2 &p, double yaw)
{
    const Eigen::Rotation2Dd rot(yaw);
    double best = std::numeric_limits<double>::infinity();
    for (const auto &s : samples)
        best = std::min(best, env.sdf(p + rot * s));
    return best;
}

} // namespace mars
