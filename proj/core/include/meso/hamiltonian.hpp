#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meso/lattice.hpp"
#include "meso/rng.hpp"

namespace meso {

/// Distribution of the i.i.d. on-site potential: a bounded, absolutely
/// continuous density, either uniform or piecewise constant.
class PotentialSpec {
public:
    enum class Family { Uniform, Table };

    /// Uniform on [-W/2, W/2].
    static PotentialSpec uniform_width(double width);
    static PotentialSpec uniform(double lo, double hi);
    /// Piecewise-constant density: `density[i]` on [edges[i], edges[i+1]).
    /// Must integrate to 1 within 1e-12.
    static PotentialSpec table(std::vector<double> edges, std::vector<double> density);

    Family family() const noexcept { return family_; }
    double lo() const noexcept { return edges_.front(); }
    double hi() const noexcept { return edges_.back(); }
    /// ||ρ||_∞.
    double rho_sup() const noexcept { return rho_sup_; }

    double density(double v) const noexcept;
    double cdf(double v) const noexcept;
    /// Inverse CDF at u ∈ [0,1).
    double quantile(double u) const noexcept;

    /// Same family reflected through 0 (density ρ(-v)).
    PotentialSpec reflected() const;

    nlohmann::json to_json() const;
    static PotentialSpec from_json(const nlohmann::json& j);

private:
    PotentialSpec(Family family, std::vector<double> edges, std::vector<double> density);

    Family family_ = Family::Uniform;
    std::vector<double> edges_;
    std::vector<double> density_;
    std::vector<double> cumulative_;
    double rho_sup_ = 0.0;
};

/// H_Λ = t·Δ + V restricted to a box with Dirichlet truncation.
///
/// The hopping amplitude t is 1 for the Anderson model; t = 0 switches the
/// Laplacian off (diagonal test hook).
class DisorderedOperator {
public:
    DisorderedOperator(LatticeBox box, std::vector<double> potential, double hopping = 1.0,
                       std::optional<SeedRecord> seed = std::nullopt);

    const LatticeBox& box() const noexcept { return box_; }
    std::span<const double> potential() const noexcept { return potential_; }
    double hopping() const noexcept { return hopping_; }
    const std::optional<SeedRecord>& seed() const noexcept { return seed_; }
    std::size_t size() const noexcept { return potential_.size(); }

    /// Matrix entry ⟨x, H y⟩ for site indices x, y.
    double entry(std::size_t x, std::size_t y) const noexcept;

    /// Gershgorin enclosure [min V - 2d|t|, max V + 2d|t|] of the spectrum.
    Interval spectral_bounds() const noexcept;

    /// Row-major dense copy (tests and small oracles).
    std::vector<double> dense() const;

private:
    LatticeBox box_;
    std::vector<double> potential_;
    double hopping_ = 1.0;
    std::optional<SeedRecord> seed_;
};

/// Draw V_x = F^{-1}(u(seed, x)) for every site, keyed by global coordinates.
DisorderedOperator sample_operator(const LatticeBox& box, const PotentialSpec& spec, SeedRecord seed,
                                   double hopping = 1.0);

/// Uniform variate driving the potential at `site` for realization `seed`.
double site_uniform(SeedRecord seed, const Coord& site) noexcept;

/// Dirichlet restriction to a sub-box, keeping the parent's potential values.
DisorderedOperator restrict_to(const DisorderedOperator& op, const LatticeBox& sub);

/// y = H v.
void apply(const DisorderedOperator& op, std::span<const double> v, std::span<double> out);
std::vector<double> apply(const DisorderedOperator& op, std::span<const double> v);

}  // namespace meso
