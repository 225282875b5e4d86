#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "meso/hamiltonian.hpp"
#include "meso/lattice.hpp"
#include "meso/spectral.hpp"

namespace meso {

enum class DosMethod { Histogram, Stieltjes };

std::string to_string(DosMethod m);

/// Density-of-states estimate on an energy grid.
struct DosEstimate {
    std::vector<double> grid;
    std::vector<double> f_hat;
    std::vector<double> std_err;
    DosMethod method = DosMethod::Histogram;

    struct Metadata {
        std::vector<std::size_t> box_sites;
        std::size_t realizations = 0;
        /// Histogram bin width (zero for Stieltjes).
        double bin_width = 0.0;
        /// Stieltjes smoothing Im z (zero for histograms).
        double im_z = 0.0;
    } meta;

    /// Σ f̂·h over the grid (histograms only; 1 when the grid covers the spectrum).
    double total_mass() const noexcept;
    /// Index of the grid cell containing `energy` (nearest grid point for Stieltjes).
    std::size_t locate(double energy) const;

    void write_csv(std::ostream& os) const;
    nlohmann::json to_json() const;
};

/// Realizations on a schedule of boxes; realization r uses
/// derive_seed(seed, {r, box index}) on each box.
struct DosEnsemble {
    std::vector<LatticeBox> boxes;
    PotentialSpec spec = PotentialSpec::uniform_width(1.0);
    SeedRecord seed;
    double hopping = 1.0;
    unsigned threads = 1;
};

/// Bin edges lo, lo + h, ..., covering [lo, hi].
std::vector<double> uniform_edges(double lo, double hi, double width);

/// Bin edges of width `width` with one bin centered on `energy`, covering [lo, hi].
std::vector<double> centered_edges(double energy, double lo, double hi, double width);

/// Freedman–Diaconis width of the pooled spectra of `pilot` realizations
/// (dense spectra; boxes must fit under the dense cap).
double default_bin_width(const DosEnsemble& ensemble, std::size_t pilot = 4);

/// Averaged normalized eigenvalue histogram. Bin counts are inertia
/// differences at the edges, identical to binning the dense spectrum.
/// Standard errors come from the across-realization spread.
DosEstimate estimate_dos_histogram(const DosEnsemble& ensemble, std::span<const double> edges,
                                   std::size_t n_realizations);

/// f̂(E) = (1/π)·mean Im G(x, x; E + i·im_z) over realizations and over sites
/// farther than L/4 from the box faces.
MonteCarloEstimate estimate_dos_stieltjes(const LatticeBox& box, const PotentialSpec& spec, double energy,
                                          double im_z, std::size_t n_realizations, SeedRecord seed,
                                          double hopping = 1.0, unsigned threads = 1);

/// Stieltjes estimates on a grid of energies (same realizations at every E).
DosEstimate estimate_dos_stieltjes_grid(const LatticeBox& box, const PotentialSpec& spec,
                                        std::span<const double> energies, double im_z,
                                        std::size_t n_realizations, SeedRecord seed, double hopping = 1.0,
                                        unsigned threads = 1);

/// Poisson intensity λ = f(E)·(b - a) with linearly propagated error.
struct Intensity {
    double lambda = 0.0;
    double std_err = 0.0;
};

Intensity intensity(double f_hat, double f_std_err, const MesoWindow& w);
Intensity intensity(const DosEstimate& dos, const MesoWindow& w);

}  // namespace meso
