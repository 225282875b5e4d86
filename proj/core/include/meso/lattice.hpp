#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace meso {

/// Largest supported lattice dimension.
inline constexpr int kMaxDim = 3;

/// A site of Z^d; entries beyond the box dimension are zero.
using Coord = std::array<std::int64_t, kMaxDim>;

/// How a box was generated: ([-L+c, L-c]^d + a) ∩ Z^d.
struct BoxProvenance {
    double half_width = 0.0;
    std::vector<double> offset;
    double trim = 0.0;
};

/// Axis-aligned finite box of Z^d with per-axis inclusive bounds.
///
/// Sites are enumerated in row-major lexicographic order: axis 0 varies
/// slowest, the last axis fastest.
class LatticeBox {
public:
    LatticeBox() = default;
    LatticeBox(int dimension, Coord lower, Coord upper, std::optional<BoxProvenance> provenance = std::nullopt);

    /// Box with `sites` sites per axis starting at `origin` on every axis.
    static LatticeBox cube(int dimension, std::int64_t origin, std::int64_t sites);

    int dimension() const noexcept { return dim_; }
    const Coord& lower() const noexcept { return lower_; }
    const Coord& upper() const noexcept { return upper_; }
    const std::optional<BoxProvenance>& provenance() const noexcept { return provenance_; }

    std::int64_t extent(int axis) const noexcept { return upper_[axis] - lower_[axis] + 1; }
    std::size_t site_count() const noexcept;

    /// Index stride of `axis` in the site enumeration.
    std::size_t stride(int axis) const noexcept;

    bool contains(const Coord& site) const noexcept;
    bool contains(const LatticeBox& other) const noexcept;

    std::size_t index_of(const Coord& site) const;
    Coord site_at(std::size_t index) const noexcept;

    /// Sup-norm distance from `site` to the box's outer face layer
    /// (0 on the faces).
    std::int64_t face_distance(const Coord& site) const noexcept;

    friend bool operator==(const LatticeBox& a, const LatticeBox& b) noexcept {
        return a.dim_ == b.dim_ && a.lower_ == b.lower_ && a.upper_ == b.upper_;
    }

private:
    int dim_ = 1;
    Coord lower_{};
    Coord upper_{};
    std::optional<BoxProvenance> provenance_;
};

/// ([-L + trim, L - trim]^d + offset) ∩ Z^d. Throws DomainError when empty.
LatticeBox make_box(double half_width, int dimension, std::span<const double> offset = {}, double trim = 0.0);

/// Open energy interval.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const noexcept { return hi - lo; }
};

/// Mesoscopic window (E + a/|Λ|^η, E + b/|Λ|^η); η = 1 is the microscopic scale.
struct MesoWindow {
    double energy = 0.0;
    double eta = 0.5;
    double a = -1.0;
    double b = 1.0;

    void validate() const;
};

Interval window_interval(const MesoWindow& w, double volume);

/// Single-level partition of a box into a grid of cells.
struct BoxPartition {
    LatticeBox parent;
    double beta = 0.5;
    std::vector<LatticeBox> cells;
    /// Cells per axis before empty cells were dropped.
    std::array<std::int64_t, kMaxDim> cuts_per_axis{1, 1, 1};
    std::size_t dropped_cells = 0;

    std::size_t cell_count() const noexcept { return cells.size(); }
};

/// ⌈(2L)^{1-β}⌉ for an axis with `sites` sites (real edge 2L = sites - 1).
std::int64_t cuts_for_edge(std::int64_t sites, double beta);

/// Cut every axis into ⌈(2L)^{1-β}⌉ equal real intervals and assign each site
/// to the half-open interval containing it. β = 1 gives the identity partition.
BoxPartition partition_box(const LatticeBox& parent, double beta);

/// Nested β = 1/2 partitions reaching scale |Λ|^η for η ≤ 1/2.
struct PartitionTree {
    struct Level {
        std::vector<LatticeBox> boxes;
        /// Index of each box's parent in the previous level (root = level -1).
        std::vector<std::size_t> parent;
    };

    LatticeBox root;
    double eta = 0.5;
    /// j with 1/2^j < η ≤ 1/2^{j-1}; the tree has j - 1 levels.
    int depth = 1;
    std::vector<Level> levels;
};

/// j such that 1/2^j < η ≤ 1/2^{j-1}.
int dyadic_depth(double eta);

PartitionTree dyadic_partition(const LatticeBox& root, double eta);

struct SiteSplit {
    std::vector<std::size_t> interior;
    std::vector<std::size_t> boundary;
};

/// Interior = sites at face distance > cutoff; boundary = the rest.
SiteSplit interior_boundary_split(const LatticeBox& box, double cutoff);

void to_json(nlohmann::json& j, const LatticeBox& box);
void from_json(const nlohmann::json& j, LatticeBox& box);
void to_json(nlohmann::json& j, const MesoWindow& w);
void to_json(nlohmann::json& j, const BoxPartition& p);

}  // namespace meso
