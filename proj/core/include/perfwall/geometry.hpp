#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace perfwall {

/// Unvalidated parameter record, as read from a configuration file.
struct ParamRecord {
    double a = 1.0;      ///< horizontal extent of the interval I = (0, a)
    double b = 1.0;      ///< depth of the bulk domain (0, a) x (-b, 0)
    double L = 1.0;      ///< relative channel length (channels are L*eps long)
    double V = 1.0;      ///< relative strip thickness (strip is V*eps thick)
    double alpha = 1.0;  ///< relative channel width (channels are alpha*eps^3 wide)
    double eps = 0.25;   ///< periodicity
    double omega = 0.5;  ///< angular frequency

    bool operator==(const ParamRecord&) const = default;
};

/// Closed x1-interval of one channel, [lo, hi] with hi = lo + alpha*eps^3.
struct ChannelWall {
    double lo;
    double hi;
};

/// Validated geometry. The wall coordinates are computed exactly once here and
/// every consumer (grid lines, diagnostics, classification) reads them back
/// from this object, so conformity is bitwise.
class GeometryParams {
public:
    [[nodiscard]] const ParamRecord& record() const noexcept { return rec_; }
    [[nodiscard]] double a() const noexcept { return rec_.a; }
    [[nodiscard]] double b() const noexcept { return rec_.b; }
    [[nodiscard]] double L() const noexcept { return rec_.L; }
    [[nodiscard]] double V() const noexcept { return rec_.V; }
    [[nodiscard]] double alpha() const noexcept { return rec_.alpha; }
    [[nodiscard]] double eps() const noexcept { return rec_.eps; }
    [[nodiscard]] double omega() const noexcept { return rec_.omega; }

    [[nodiscard]] std::size_t channel_count() const noexcept { return walls_.size(); }
    [[nodiscard]] std::span<const ChannelWall> walls() const noexcept { return walls_; }
    /// Period boundaries k*eps for k = 0..N-1 followed by a itself (N+1 entries).
    [[nodiscard]] std::span<const double> period_bounds() const noexcept { return periods_; }
    [[nodiscard]] double channel_width() const noexcept { return alpha() * eps() * eps() * eps(); }
    [[nodiscard]] double channel_top() const noexcept { return channel_top_; }
    [[nodiscard]] double strip_top() const noexcept { return strip_top_; }
    /// alpha / (L V), the zeroth-order coefficient of the resonator equation.
    [[nodiscard]] double resonator_coefficient() const noexcept { return rec_.alpha / (rec_.L * rec_.V); }

    /// Exact measure of the eps-domain: |Omega0| + a V eps + N alpha eps^3 L eps.
    [[nodiscard]] double domain_area() const noexcept;

    /// Same geometry with a different frequency (revalidated).
    [[nodiscard]] GeometryParams with_omega(double omega) const;
    /// Same geometry with a different period (revalidated).
    [[nodiscard]] GeometryParams with_eps(double eps) const;

private:
    friend GeometryParams validate_params(const ParamRecord& raw);
    GeometryParams() = default;

    ParamRecord rec_;
    std::vector<ChannelWall> walls_;
    std::vector<double> periods_;
    double channel_top_ = 0.0;
    double strip_top_ = 0.0;
};

/// Throws NonPositiveParameter, NonIntegerPeriodCount or ChannelTooWide.
[[nodiscard]] GeometryParams validate_params(const ParamRecord& raw);

enum class Region : std::uint8_t { Omega0, Channel, Strip, Outside };

[[nodiscard]] const char* to_string(Region r) noexcept;

/// Region containing x. Points on shared boundaries are resolved with the
/// priority Omega0 > Channel > Strip.
[[nodiscard]] Region classify_point(const GeometryParams& p, std::array<double, 2> x);

enum class FacetTag : std::uint8_t { Gamma0, GammaEps, OuterWall, ChannelWall };
enum class Side : std::uint8_t { Left, Right, Bottom, Top };

[[nodiscard]] const char* to_string(FacetTag t) noexcept;

struct BoundaryFacet {
    std::size_t i1;
    std::size_t i2;
    Side side;
    FacetTag tag;
};

struct ResolutionPolicy {
    int n_w = 2;                   ///< cells across a channel (>= 2)
    int n_l = 4;                   ///< cells along a channel (>= 4)
    int n_s = 4;                   ///< minimum cells across the strip (>= 1)
    double h = 0.125;              ///< bulk target cell size
    double grading = 2.0;          ///< growth factor away from channel mouths, in (1, 2]
    std::size_t max_unknowns = 2'000'000;

    bool operator==(const ResolutionPolicy&) const = default;
};

/// Throws InvalidResolution.
void validate_policy(const ResolutionPolicy& res);

enum class DomainKind : std::uint8_t { EpsDomain, LimitDomain };

/// Channel k in grid-line indices: cells i_lo <= i1 < i_hi lie inside the channel.
struct ChannelSpan {
    std::size_t i_lo;
    std::size_t i_hi;
};

/// Tensor-product rectilinear grid with masked cells. Immutable after construction.
class Grid {
public:
    static constexpr std::ptrdiff_t kInactive = -1;

    /// Generic constructor; `regions` has one entry per cell (x1 index fastest).
    Grid(std::vector<double> x1_lines, std::vector<double> x2_lines, std::vector<Region> regions, DomainKind kind);

    [[nodiscard]] DomainKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::span<const double> x1_lines() const noexcept { return x1_; }
    [[nodiscard]] std::span<const double> x2_lines() const noexcept { return x2_; }
    [[nodiscard]] std::size_t cells_x1() const noexcept { return x1_.size() - 1; }
    [[nodiscard]] std::size_t cells_x2() const noexcept { return x2_.size() - 1; }

    [[nodiscard]] Region region(std::size_t i1, std::size_t i2) const noexcept { return regions_[i1 + i2 * cells_x1()]; }
    [[nodiscard]] bool active(std::size_t i1, std::size_t i2) const noexcept { return region(i1, i2) != Region::Outside; }

    /// Unknown index of lattice node (i1, i2), or kInactive.
    [[nodiscard]] std::ptrdiff_t node(std::size_t i1, std::size_t i2) const noexcept { return node_index_[i1 + i2 * x1_.size()]; }
    [[nodiscard]] std::size_t unknown_count() const noexcept { return unknown_lattice_.size(); }
    /// Lattice position (i1, i2) of an unknown.
    [[nodiscard]] std::array<std::size_t, 2> lattice(std::size_t unknown) const noexcept { return unknown_lattice_[unknown]; }
    [[nodiscard]] std::array<double, 2> coords(std::size_t unknown) const noexcept;

    [[nodiscard]] std::size_t active_cell_count() const noexcept { return active_cells_; }
    [[nodiscard]] double active_area() const noexcept;
    [[nodiscard]] std::span<const BoundaryFacet> boundary_facets() const noexcept { return facets_; }

    /// Index of the x2 line equal (bitwise) to `value`.
    [[nodiscard]] std::optional<std::size_t> x2_index(double value) const noexcept;
    [[nodiscard]] std::optional<std::size_t> x1_index(double value) const noexcept;

    /// Channel spans detected from the cell regions, left to right.
    [[nodiscard]] std::span<const ChannelSpan> channels() const noexcept { return channels_; }

    /// True when both grids have identical lines and regions.
    [[nodiscard]] bool same_layout(const Grid& other) const noexcept;

private:
    DomainKind kind_;
    std::vector<double> x1_;
    std::vector<double> x2_;
    std::vector<Region> regions_;
    std::vector<std::ptrdiff_t> node_index_;
    std::vector<std::array<std::size_t, 2>> unknown_lattice_;
    std::vector<BoundaryFacet> facets_;
    std::vector<ChannelSpan> channels_;
    std::size_t active_cells_ = 0;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Conforming grid of the eps-domain (bulk + channels + strip).
[[nodiscard]] GridPtr build_grid(const GeometryParams& p, const ResolutionPolicy& res);

/// Grid of the limit domain Omega0 using the same x1 lines and the same x2
/// lines below zero as build_grid(p, res), so restriction is index-level.
[[nodiscard]] GridPtr build_limit_grid(const GeometryParams& p, const ResolutionPolicy& res);

/// Uniform grid of (0, a) x (-b, 0) with cells no larger than h.
[[nodiscard]] GridPtr build_rectangle_grid(double a, double b, double h);

/// Sorted nodes of a 1D grid on [0, a].
class Interval1DGrid {
public:
    explicit Interval1DGrid(std::vector<double> nodes);

    [[nodiscard]] std::span<const double> nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] std::size_t element_count() const noexcept { return nodes_.size() - 1; }
    [[nodiscard]] double element_size(std::size_t e) const noexcept { return nodes_[e + 1] - nodes_[e]; }
    [[nodiscard]] double length() const noexcept { return nodes_.back() - nodes_.front(); }

    bool operator==(const Interval1DGrid&) const = default;

    [[nodiscard]] static Interval1DGrid uniform(double a, std::size_t elements);

private:
    std::vector<double> nodes_;
};

/// Points strictly between lo and hi such that cell sizes start near s_lo
/// (resp. s_hi) at each end and grow by at most `ratio` per cell up to h.
/// Adjacent cells, including the virtual end cells s_lo and s_hi, differ by a
/// factor of at most 2.5 provided ratio <= 2.
[[nodiscard]] std::vector<double> graded_interior(double lo, double hi, double s_lo, double s_hi, double h, double ratio);

/// One line per active cell: "i1 i2 x1lo x1hi x2lo x2hi tag".
void write_grid_dump(std::ostream& os, const Grid& grid);

} // namespace perfwall
