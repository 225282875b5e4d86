#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "meso/hamiltonian.hpp"
#include "meso/lattice.hpp"
#include "meso/rng.hpp"

namespace meso {

using Complex = std::complex<double>;

/// Sylvester inertia of H - shift·I.
struct InertiaTriple {
    std::size_t n_neg = 0;
    std::size_t n_zero = 0;
    std::size_t n_pos = 0;

    std::size_t dimension() const noexcept { return n_neg + n_zero + n_pos; }
    friend bool operator==(const InertiaTriple&, const InertiaTriple&) = default;
};

struct InertiaResult {
    InertiaTriple inertia;
    /// Shift actually factorized (differs from the request after a jitter).
    double shift = 0.0;
    int jitters = 0;
};

/// Running count of zero-pivot shift perturbations.
struct JitterLog {
    std::size_t events = 0;
};

/// Inertia of H - shift·I. One-dimensional (and diagonal) operators use the
/// Sturm recursion on the tridiagonal matrix; d ≥ 2 uses a block LDLᵀ over
/// lattice slices with Bunch–Kaufman pivoting inside each block.
///
/// An exact zero pivot triggers a retry at shift ± δ with
/// δ ≤ 1e-12·(1 + |shift|); FactorizationError if every retry breaks down.
InertiaResult inertia_at(const DisorderedOperator& op, double shift);

/// Number of eigenvalues below `shift` (n_neg of the possibly jittered shift).
std::size_t count_below(const DisorderedOperator& op, double shift, JitterLog* log = nullptr);

/// X = n_neg(hi) - n_neg(lo), the eigenvalue count in the window.
std::size_t count_in_interval(const DisorderedOperator& op, Interval interval, JitterLog* log = nullptr);

inline constexpr std::size_t kDefaultDenseCap = 4096;

/// All eigenvalues, ascending. Refuses operators above `cap` sites.
std::vector<double> dense_spectrum(const DisorderedOperator& op, std::size_t cap = kDefaultDenseCap);

/// Number of entries of a sorted spectrum below `shift`.
std::size_t count_sorted_below(std::span<const double> sorted, double shift) noexcept;

/// Smallest Im z accepted by the complex solvers.
inline constexpr double kMinImaginaryPart = 1e-14;

struct GreensValue {
    std::size_t x = 0;
    std::size_t y = 0;
    Complex z;
    Complex value;
};

/// Sparse LU factorization of H - z for repeated resolvent columns.
class ResolventSolver {
public:
    ResolventSolver(const DisorderedOperator& op, Complex z);
    ~ResolventSolver();
    ResolventSolver(ResolventSolver&&) noexcept;
    ResolventSolver& operator=(ResolventSolver&&) noexcept;

    /// u = (H - z)^{-1} δ_y.
    std::vector<Complex> column(std::size_t y) const;
    Complex entry(std::size_t x, std::size_t y) const;
    Complex z() const noexcept { return z_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    Complex z_;
};

/// G_Λ(x, y; z) = ⟨x, (H_Λ - z)^{-1} y⟩ for Im z > 0.
GreensValue greens_entry(const DisorderedOperator& op, std::size_t x, std::size_t y, Complex z);

/// Diagonal entries G(x, x; z) for every site. O(n) continued fractions for
/// chains; one sparse factorization plus n solves otherwise.
std::vector<Complex> resolvent_diagonal(const DisorderedOperator& op, Complex z);

enum class TracePath { Auto, Spectrum, Solve };

/// Tr Im (H - z)^{-1} = Σ_i Im 1/(E_i - z). `Auto` uses the dense spectrum
/// when the operator fits under `cap`, site-wise resolvent entries otherwise.
double trace_im_resolvent(const DisorderedOperator& op, Complex z, TracePath path = TracePath::Auto,
                          std::size_t cap = kDefaultDenseCap);

/// Ensemble of fresh realizations on one box: replicate r uses
/// derive_seed(seed, {r}).
struct ProbeEnsemble {
    LatticeBox box;
    PotentialSpec spec = PotentialSpec::uniform_width(1.0);
    SeedRecord seed;
    double hopping = 1.0;

    SeedRecord replicate_seed(std::size_t r) const noexcept { return derive_seed(seed, {r}); }
};

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_err = 0.0;
    std::size_t n = 0;
};

/// Monte Carlo estimate of E|G(x, y; z)|^s over the ensemble.
MonteCarloEstimate fractional_moment_probe(const ProbeEnsemble& ensemble, const Coord& x, const Coord& y,
                                           Complex z, double s, std::size_t n_samples, unsigned threads = 1);

/// E|G(x, y; z)|^s for several x against one y, sharing one solve per
/// realization. Returns one estimate per entry of `xs`.
std::vector<MonteCarloEstimate> fractional_moment_profile(const ProbeEnsemble& ensemble, std::span<const Coord> xs,
                                                          const Coord& y, Complex z, double s,
                                                          std::size_t n_samples, unsigned threads = 1);

/// |G_Λ(x, x; z) - G_Λ'(x, x; z)| for Λ ⊆ Λ' sharing one potential realization.
double green_comparison(const DisorderedOperator& inner, const DisorderedOperator& outer, const Coord& x, Complex z);

}  // namespace meso
