#include "perfwall/geometry.hpp"

#include "perfwall/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

namespace perfwall {

namespace {

std::string num(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Neumaier-compensated accumulator; area sums must match closed forms to 1e-12.
class CompensatedSum {
public:
    void add(double v) noexcept
    {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

std::size_t cell_count_for(double length, double h)
{
    return static_cast<std::size_t>(std::max(1.0, std::ceil(length / h - 1e-9)));
}

void push_uniform(std::vector<double>& lines, double lo, double hi, std::size_t n)
{
    for (std::size_t i = 1; i < n; ++i) {
        lines.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n));
    }
    lines.push_back(hi);
}

struct LineSet {
    std::vector<double> x1;
    std::vector<double> x2;
    std::vector<ChannelSpan> channels;
    std::size_t j_gamma0 = 0;
    std::size_t j_channel_top = 0;
};

LineSet eps_lines(const GeometryParams& p, const ResolutionPolicy& res)
{
    validate_policy(res);
    LineSet out;
    const double h = res.h;
    const auto walls = p.walls();

    out.x1.push_back(walls.front().lo);
    for (std::size_t k = 0; k < walls.size(); ++k) {
        const ChannelWall& w = walls[k];
        const double width = w.hi - w.lo;
        const std::size_t nw = std::max<std::size_t>(static_cast<std::size_t>(res.n_w), cell_count_for(width, h));
        const double s = width / static_cast<double>(nw);

        ChannelSpan span{};
        span.i_lo = out.x1.size() - 1;
        push_uniform(out.x1, w.lo, w.hi, nw);
        span.i_hi = out.x1.size() - 1;
        out.channels.push_back(span);

        const bool last = k + 1 == walls.size();
        const double next = last ? p.a() : walls[k + 1].lo;
        const double s_next = last ? h : s;
        for (double x : graded_interior(w.hi, next, s, s_next, h, res.grading)) {
            out.x1.push_back(x);
        }
        out.x1.push_back(next);
    }

    const double ct = p.channel_top();
    const double st = p.strip_top();
    const std::size_t nl = std::max<std::size_t>(static_cast<std::size_t>(res.n_l), cell_count_for(ct, h));
    const double s_channel = ct / static_cast<double>(nl);

    out.x2.push_back(-p.b());
    for (double x : graded_interior(-p.b(), 0.0, h, s_channel, h, res.grading)) {
        out.x2.push_back(x);
    }
    out.x2.push_back(0.0);
    out.j_gamma0 = out.x2.size() - 1;
    push_uniform(out.x2, 0.0, ct, nl);
    out.j_channel_top = out.x2.size() - 1;
    const std::size_t ns = std::max<std::size_t>(static_cast<std::size_t>(res.n_s), cell_count_for(st - ct, h));
    push_uniform(out.x2, ct, st, ns);
    return out;
}

void check_size(std::size_t unknowns, const ResolutionPolicy& res)
{
    if (unknowns > res.max_unknowns) {
        fail(ErrorCode::GridTooLarge,
             "grid has " + std::to_string(unknowns) + " unknowns, cap is " + std::to_string(res.max_unknowns));
    }
}

// The lattice is allocated in full; refuse absurd line sets before doing so.
void check_lattice(std::size_t lattice_nodes, const ResolutionPolicy& res)
{
    if (lattice_nodes / 4 > res.max_unknowns) {
        fail(ErrorCode::GridTooLarge, "grid lattice has " + std::to_string(lattice_nodes) +
                                          " nodes, far above the cap of " + std::to_string(res.max_unknowns));
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Parameters

double GeometryParams::domain_area() const noexcept
{
    return a() * b() + a() * V() * eps() + static_cast<double>(channel_count()) * channel_width() * L() * eps();
}

GeometryParams GeometryParams::with_omega(double omega) const
{
    ParamRecord r = rec_;
    r.omega = omega;
    return validate_params(r);
}

GeometryParams GeometryParams::with_eps(double eps) const
{
    ParamRecord r = rec_;
    r.eps = eps;
    return validate_params(r);
}

GeometryParams validate_params(const ParamRecord& raw)
{
    const std::pair<const char*, double> fields[] = {
        {"a", raw.a}, {"b", raw.b}, {"L", raw.L}, {"V", raw.V},
        {"alpha", raw.alpha}, {"eps", raw.eps}, {"omega", raw.omega},
    };
    for (const auto& [name, value] : fields) {
        if (!(value > 0.0) || !std::isfinite(value)) {
            fail(ErrorCode::NonPositiveParameter, std::string(name) + " must be positive and finite, got " + num(value));
        }
    }

    const double periods = raw.a / raw.eps;
    const double n = std::round(periods);
    if (n < 1.0 || std::abs(periods - n) > 1e-9 * periods) {
        fail(ErrorCode::NonIntegerPeriodCount, "a/eps = " + num(periods) + " is not a positive integer");
    }

    const double width = raw.alpha * raw.eps * raw.eps * raw.eps;
    if (width >= raw.eps) {
        fail(ErrorCode::ChannelTooWide, "channel width alpha*eps^3 = " + num(width) + " >= eps = " + num(raw.eps));
    }

    GeometryParams p;
    p.rec_ = raw;
    const auto count = static_cast<std::size_t>(n);
    p.walls_.reserve(count);
    p.periods_.reserve(count + 1);
    for (std::size_t k = 0; k < count; ++k) {
        const double lo = static_cast<double>(k) * raw.eps;
        p.walls_.push_back({lo, lo + width});
        p.periods_.push_back(lo);
    }
    p.periods_.push_back(raw.a);
    p.channel_top_ = raw.L * raw.eps;
    p.strip_top_ = (raw.L + raw.V) * raw.eps;
    if (!(p.channel_top_ < p.strip_top_)) {
        fail(ErrorCode::NonPositiveParameter, "channel top must lie below the strip top");
    }
    return p;
}

// ---------------------------------------------------------------------------
// Classification

const char* to_string(Region r) noexcept
{
    switch (r) {
    case Region::Omega0: return "Omega0";
    case Region::Channel: return "Channel";
    case Region::Strip: return "Strip";
    case Region::Outside: return "Outside";
    }
    return "?";
}

const char* to_string(FacetTag t) noexcept
{
    switch (t) {
    case FacetTag::Gamma0: return "Gamma0";
    case FacetTag::GammaEps: return "GammaEps";
    case FacetTag::OuterWall: return "OuterWall";
    case FacetTag::ChannelWall: return "ChannelWall";
    }
    return "?";
}

Region classify_point(const GeometryParams& p, std::array<double, 2> x)
{
    const auto [x1, x2] = x;
    if (x1 < 0.0 || x1 > p.a()) {
        return Region::Outside;
    }
    if (x2 >= -p.b() && x2 <= 0.0) {
        return Region::Omega0;
    }
    if (x2 >= 0.0 && x2 <= p.channel_top()) {
        const auto walls = p.walls();
        const auto it = std::upper_bound(walls.begin(), walls.end(), x1,
                                         [](double v, const ChannelWall& w) { return v < w.lo; });
        if (it != walls.begin()) {
            const ChannelWall& w = *std::prev(it);
            if (x1 >= w.lo && x1 <= w.hi) {
                return Region::Channel;
            }
        }
    }
    if (x2 >= p.channel_top() && x2 <= p.strip_top()) {
        return Region::Strip;
    }
    return Region::Outside;
}

// ---------------------------------------------------------------------------
// Resolution policy and grading

void validate_policy(const ResolutionPolicy& res)
{
    if (res.n_w < 2) {
        fail(ErrorCode::InvalidResolution, "n_w = " + std::to_string(res.n_w) + ": at least 2 cells across a channel");
    }
    if (res.n_l < 4) {
        fail(ErrorCode::InvalidResolution, "n_l = " + std::to_string(res.n_l) + ": at least 4 cells along a channel");
    }
    if (res.n_s < 1) {
        fail(ErrorCode::InvalidResolution, "n_s must be at least 1");
    }
    if (!(res.h > 0.0) || !std::isfinite(res.h)) {
        fail(ErrorCode::InvalidResolution, "bulk cell size h must be positive");
    }
    if (!(res.grading > 1.0 && res.grading <= 2.0)) {
        fail(ErrorCode::InvalidResolution, "grading factor must lie in (1, 2], got " + num(res.grading));
    }
    if (res.max_unknowns == 0) {
        fail(ErrorCode::InvalidResolution, "max_unknowns must be positive");
    }
}

std::vector<double> graded_interior(double lo, double hi, double s_lo, double s_hi, double h, double ratio)
{
    s_lo = std::min(s_lo, h);
    s_hi = std::min(s_hi, h);
    const auto step = [&](double dist, double s0) { return std::min(h, s0 + (ratio - 1.0) * dist); };

    std::vector<double> left;
    std::vector<double> right;
    double pl = lo;
    double pr = hi;
    double cl = s_lo; // cells adjacent to the still-open gap
    double cr = s_hi;
    for (;;) {
        const double sl = step(pl - lo, s_lo);
        const double sr = step(hi - pr, s_hi);
        if (pr - pl <= sl + sr) {
            break;
        }
        if (sl <= sr) {
            pl += sl;
            left.push_back(pl);
            cl = sl;
        } else {
            pr -= sr;
            right.push_back(pr);
            cr = sr;
        }
    }

    const double gap = pr - pl;
    const double upper = std::min(2.5 * std::min(cl, cr), h);
    const std::size_t n = cell_count_for(gap, upper);
    for (std::size_t i = 1; i < n; ++i) {
        left.push_back(pl + gap * static_cast<double>(i) / static_cast<double>(n));
    }
    left.insert(left.end(), right.rbegin(), right.rend());
    return left;
}

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(std::vector<double> x1_lines, std::vector<double> x2_lines, std::vector<Region> regions, DomainKind kind)
    : kind_(kind)
    , x1_(std::move(x1_lines))
    , x2_(std::move(x2_lines))
    , regions_(std::move(regions))
{
    if (x1_.size() < 2 || x2_.size() < 2) {
        fail(ErrorCode::InvalidResolution, "grid needs at least one cell in each direction");
    }
    for (const auto* lines : {&x1_, &x2_}) {
        for (std::size_t i = 1; i < lines->size(); ++i) {
            if (!((*lines)[i] > (*lines)[i - 1])) {
                fail(ErrorCode::InvalidResolution, "grid lines must be strictly increasing");
            }
        }
    }
    const std::size_t n1 = cells_x1();
    const std::size_t n2 = cells_x2();
    if (regions_.size() != n1 * n2) {
        fail(ErrorCode::InvalidResolution, "region vector does not match the cell count");
    }

    const std::size_t m1 = x1_.size();
    node_index_.assign(m1 * x2_.size(), kInactive);
    for (std::size_t i2 = 0; i2 < n2; ++i2) {
        for (std::size_t i1 = 0; i1 < n1; ++i1) {
            if (!active(i1, i2)) {
                continue;
            }
            ++active_cells_;
            for (std::size_t d2 = 0; d2 < 2; ++d2) {
                for (std::size_t d1 = 0; d1 < 2; ++d1) {
                    node_index_[(i1 + d1) + (i2 + d2) * m1] = 0;
                }
            }
        }
    }
    for (std::size_t i2 = 0; i2 < x2_.size(); ++i2) {
        for (std::size_t i1 = 0; i1 < m1; ++i1) {
            auto& slot = node_index_[i1 + i2 * m1];
            if (slot != kInactive) {
                slot = static_cast<std::ptrdiff_t>(unknown_lattice_.size());
                unknown_lattice_.push_back({i1, i2});
            }
        }
    }

    const auto inactive_at = [&](std::ptrdiff_t i1, std::ptrdiff_t i2) {
        if (i1 < 0 || i2 < 0 || i1 >= static_cast<std::ptrdiff_t>(n1) || i2 >= static_cast<std::ptrdiff_t>(n2)) {
            return true;
        }
        return !active(static_cast<std::size_t>(i1), static_cast<std::size_t>(i2));
    };
    for (std::size_t i2 = 0; i2 < n2; ++i2) {
        for (std::size_t i1 = 0; i1 < n1; ++i1) {
            if (!active(i1, i2)) {
                continue;
            }
            const Region r = region(i1, i2);
            const auto s1 = static_cast<std::ptrdiff_t>(i1);
            const auto s2 = static_cast<std::ptrdiff_t>(i2);
            const std::pair<Side, bool> sides[] = {
                {Side::Left, inactive_at(s1 - 1, s2)},
                {Side::Right, inactive_at(s1 + 1, s2)},
                {Side::Bottom, inactive_at(s1, s2 - 1)},
                {Side::Top, inactive_at(s1, s2 + 1)},
            };
            for (const auto& [side, open] : sides) {
                if (!open) {
                    continue;
                }
                FacetTag tag = FacetTag::OuterWall;
                switch (r) {
                case Region::Omega0: tag = side == Side::Top ? FacetTag::Gamma0 : FacetTag::OuterWall; break;
                case Region::Channel: tag = FacetTag::ChannelWall; break;
                case Region::Strip:
                    tag = side == Side::Top      ? FacetTag::GammaEps
                          : side == Side::Bottom ? FacetTag::ChannelWall
                                                 : FacetTag::OuterWall;
                    break;
                case Region::Outside: break;
                }
                facets_.push_back({i1, i2, side, tag});
            }
        }
    }

    // channel spans: maximal runs of columns that carry channel cells
    std::vector<bool> channel_column(n1, false);
    for (std::size_t i2 = 0; i2 < n2; ++i2) {
        for (std::size_t i1 = 0; i1 < n1; ++i1) {
            if (region(i1, i2) == Region::Channel) {
                channel_column[i1] = true;
            }
        }
    }
    for (std::size_t i1 = 0; i1 < n1;) {
        if (!channel_column[i1]) {
            ++i1;
            continue;
        }
        const std::size_t start = i1;
        while (i1 < n1 && channel_column[i1]) {
            ++i1;
        }
        channels_.push_back({start, i1});
    }
}

std::array<double, 2> Grid::coords(std::size_t unknown) const noexcept
{
    const auto [i1, i2] = unknown_lattice_[unknown];
    return {x1_[i1], x2_[i2]};
}

double Grid::active_area() const noexcept
{
    CompensatedSum sum;
    for (std::size_t i2 = 0; i2 < cells_x2(); ++i2) {
        for (std::size_t i1 = 0; i1 < cells_x1(); ++i1) {
            if (active(i1, i2)) {
                sum.add((x1_[i1 + 1] - x1_[i1]) * (x2_[i2 + 1] - x2_[i2]));
            }
        }
    }
    return sum.value();
}

namespace {

std::optional<std::size_t> exact_index(const std::vector<double>& lines, double value)
{
    const auto it = std::lower_bound(lines.begin(), lines.end(), value);
    if (it == lines.end() || *it != value) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - lines.begin());
}

} // namespace

std::optional<std::size_t> Grid::x2_index(double value) const noexcept { return exact_index(x2_, value); }
std::optional<std::size_t> Grid::x1_index(double value) const noexcept { return exact_index(x1_, value); }

bool Grid::same_layout(const Grid& other) const noexcept
{
    return x1_ == other.x1_ && x2_ == other.x2_ && regions_ == other.regions_;
}

GridPtr build_grid(const GeometryParams& p, const ResolutionPolicy& res)
{
    LineSet lines = eps_lines(p, res);
    check_lattice(lines.x1.size() * lines.x2.size(), res);

    const std::size_t n1 = lines.x1.size() - 1;
    const std::size_t n2 = lines.x2.size() - 1;
    std::vector<Region> regions(n1 * n2, Region::Outside);
    std::vector<bool> in_channel(n1, false);
    for (const ChannelSpan& c : lines.channels) {
        for (std::size_t i = c.i_lo; i < c.i_hi; ++i) {
            in_channel[i] = true;
        }
    }
    for (std::size_t i2 = 0; i2 < n2; ++i2) {
        for (std::size_t i1 = 0; i1 < n1; ++i1) {
            Region r = Region::Strip;
            if (i2 < lines.j_gamma0) {
                r = Region::Omega0;
            } else if (i2 < lines.j_channel_top) {
                r = in_channel[i1] ? Region::Channel : Region::Outside;
            }
            regions[i1 + i2 * n1] = r;
        }
    }
    auto grid = std::make_shared<const Grid>(std::move(lines.x1), std::move(lines.x2), std::move(regions),
                                             DomainKind::EpsDomain);
    check_size(grid->unknown_count(), res);
    return grid;
}

GridPtr build_limit_grid(const GeometryParams& p, const ResolutionPolicy& res)
{
    LineSet lines = eps_lines(p, res);
    lines.x2.resize(lines.j_gamma0 + 1);
    check_size(lines.x1.size() * lines.x2.size(), res);
    const std::size_t n_cells = (lines.x1.size() - 1) * (lines.x2.size() - 1);
    return std::make_shared<const Grid>(std::move(lines.x1), std::move(lines.x2),
                                        std::vector<Region>(n_cells, Region::Omega0), DomainKind::LimitDomain);
}

GridPtr build_rectangle_grid(double a, double b, double h)
{
    if (!(a > 0.0) || !(b > 0.0) || !(h > 0.0)) {
        fail(ErrorCode::InvalidResolution, "rectangle grid needs positive a, b, h");
    }
    std::vector<double> x1{0.0};
    push_uniform(x1, 0.0, a, cell_count_for(a, h));
    std::vector<double> x2{-b};
    push_uniform(x2, -b, 0.0, cell_count_for(b, h));
    const std::size_t n_cells = (x1.size() - 1) * (x2.size() - 1);
    return std::make_shared<const Grid>(std::move(x1), std::move(x2), std::vector<Region>(n_cells, Region::Omega0),
                                        DomainKind::LimitDomain);
}

// ---------------------------------------------------------------------------
// 1D grid

Interval1DGrid::Interval1DGrid(std::vector<double> nodes)
    : nodes_(std::move(nodes))
{
    if (nodes_.size() < 2) {
        fail(ErrorCode::InvalidResolution, "interval grid needs at least two nodes");
    }
    if (nodes_.front() != 0.0) {
        fail(ErrorCode::InvalidResolution, "interval grid must start at 0");
    }
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
        if (!(nodes_[i] > nodes_[i - 1])) {
            fail(ErrorCode::InvalidResolution, "interval grid nodes must be strictly increasing");
        }
    }
}

Interval1DGrid Interval1DGrid::uniform(double a, std::size_t elements)
{
    std::vector<double> nodes{0.0};
    push_uniform(nodes, 0.0, a, std::max<std::size_t>(elements, 1));
    return Interval1DGrid(std::move(nodes));
}

void write_grid_dump(std::ostream& os, const Grid& grid)
{
    const auto x1 = grid.x1_lines();
    const auto x2 = grid.x2_lines();
    const auto old_precision = os.precision(17);
    for (std::size_t i2 = 0; i2 < grid.cells_x2(); ++i2) {
        for (std::size_t i1 = 0; i1 < grid.cells_x1(); ++i1) {
            if (!grid.active(i1, i2)) {
                continue;
            }
            os << i1 << ' ' << i2 << ' ' << x1[i1] << ' ' << x1[i1 + 1] << ' ' << x2[i2] << ' ' << x2[i2 + 1] << ' '
               << to_string(grid.region(i1, i2)) << '\n';
        }
    }
    os.precision(old_precision);
}

} // namespace perfwall
