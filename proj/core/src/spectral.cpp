#include "meso/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <lapacke.h>

#include "meso/errors.hpp"
#include "meso/parallel.hpp"

namespace meso {

namespace {

constexpr int kMaxJitterAttempts = 8;

// Inertia of H - shift, or nullopt on an exact zero pivot / breakdown.
using MaybeInertia = std::optional<InertiaTriple>;

MaybeInertia diagonal_inertia(const DisorderedOperator& op, double shift) {
    InertiaTriple t;
    for (double v : op.potential()) {
        const double q = v - shift;
        if (q < 0) ++t.n_neg;
        else if (q > 0) ++t.n_pos;
        else ++t.n_zero;
    }
    return t;
}

MaybeInertia sturm_inertia(const DisorderedOperator& op, double shift) {
    const auto v = op.potential();
    const double t2 = op.hopping() * op.hopping();
    InertiaTriple t;
    double q = 1.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        q = (k == 0) ? v[k] - shift : v[k] - shift - t2 / q;
        if (q == 0.0 || !std::isfinite(q)) return std::nullopt;
        if (q < 0) ++t.n_neg;
        else ++t.n_pos;
    }
    return t;
}

// Block LDLᵀ over slices orthogonal to the longest axis. Slice k couples only
// to slices k ± 1 through t·I, so the Schur complements obey
// S_k = T_k - t² S_{k-1}^{-1} and In(H) = Σ_k In(S_k) (Haynsworth).
class SliceFactorizer {
public:
    explicit SliceFactorizer(const DisorderedOperator& op) : op_(op) {
        const auto& box = op.box();
        const int d = box.dimension();
        axis_ = 0;
        for (int k = 1; k < d; ++k) {
            if (box.extent(k) > box.extent(axis_)) axis_ = k;
        }
        slices_ = static_cast<std::size_t>(box.extent(axis_));
        m_ = box.site_count() / slices_;
        Coord lo{}, hi{};
        int j = 0;
        for (int k = 0; k < d; ++k) {
            if (k == axis_) continue;
            lo[j] = box.lower()[k];
            hi[j] = box.upper()[k];
            ++j;
        }
        LatticeBox slice(d - 1, lo, hi);
        base_.resize(m_);
        for (std::size_t s = 0; s < m_; ++s) {
            const Coord local = slice.site_at(s);
            Coord global{};
            int jj = 0;
            for (int k = 0; k < d; ++k) {
                global[k] = (k == axis_) ? box.lower()[k] : local[jj++];
            }
            base_[s] = box.index_of(global);
            for (int b = 0; b < d - 1; ++b) {
                if (local[b] < slice.upper()[b]) edges_.emplace_back(s, s + slice.stride(b));
            }
        }
        axis_stride_ = box.stride(axis_);
    }

    MaybeInertia operator()(double shift) const {
        const auto v = op_.potential();
        const double t = op_.hopping();
        const auto m = static_cast<lapack_int>(m_);
        std::vector<double> s(m_ * m_), prev_inv;
        std::vector<lapack_int> ipiv(m_);
        InertiaTriple result;
        for (std::size_t k = 0; k < slices_; ++k) {
            std::fill(s.begin(), s.end(), 0.0);
            for (std::size_t a = 0; a < m_; ++a) s[a * m_ + a] = v[base_[a] + k * axis_stride_] - shift;
            for (auto [a, b] : edges_) {
                s[a * m_ + b] = t;
                s[b * m_ + a] = t;
            }
            if (k > 0) {
                for (std::size_t i = 0; i < m_ * m_; ++i) s[i] -= t * t * prev_inv[i];
            }
            const lapack_int info = LAPACKE_dsytrf(LAPACK_COL_MAJOR, 'L', m, s.data(), m, ipiv.data());
            if (info != 0) return std::nullopt;
            if (!accumulate_block_inertia(s, ipiv, result)) return std::nullopt;
            if (k + 1 < slices_) {
                if (LAPACKE_dsytri(LAPACK_COL_MAJOR, 'L', m, s.data(), m, ipiv.data()) != 0) return std::nullopt;
                for (std::size_t c = 0; c < m_; ++c) {
                    for (std::size_t r = c + 1; r < m_; ++r) s[r * m_ + c] = s[c * m_ + r];
                }
                prev_inv.swap(s);
                s.resize(m_ * m_);
            }
        }
        return result;
    }

private:
    bool accumulate_block_inertia(const std::vector<double>& f, const std::vector<lapack_int>& ipiv,
                                  InertiaTriple& out) const {
        auto at = [&](std::size_t r, std::size_t c) { return f[c * m_ + r]; };
        for (std::size_t i = 0; i < m_;) {
            if (ipiv[i] > 0) {
                const double dval = at(i, i);
                if (dval == 0.0 || !std::isfinite(dval)) return false;
                (dval < 0 ? out.n_neg : out.n_pos) += 1;
                i += 1;
            } else {
                const double a = at(i, i), b = at(i + 1, i), c = at(i + 1, i + 1);
                const double det = a * c - b * b;
                if (det == 0.0 || !std::isfinite(det)) return false;
                if (det < 0) {
                    out.n_neg += 1;
                    out.n_pos += 1;
                } else {
                    (a + c < 0 ? out.n_neg : out.n_pos) += 2;
                }
                i += 2;
            }
        }
        return true;
    }

    const DisorderedOperator& op_;
    int axis_ = 0;
    std::size_t slices_ = 1;
    std::size_t m_ = 1;
    std::size_t axis_stride_ = 1;
    std::vector<std::size_t> base_;
    std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

bool is_chain(const DisorderedOperator& op) {
    const auto& box = op.box();
    int long_axes = 0;
    for (int k = 0; k < box.dimension(); ++k) long_axes += box.extent(k) > 1 ? 1 : 0;
    return long_axes <= 1;
}

template <class Factor>
InertiaResult with_jitter(Factor&& factor, double shift) {
    const double delta = 1e-12 * (1.0 + std::abs(shift));
    double trial = shift;
    for (int attempt = 0; attempt <= kMaxJitterAttempts; ++attempt) {
        if (attempt > 0) {
            // +δ, -δ, +δ/2, -δ/2, ...
            const double mag = delta * std::ldexp(1.0, -((attempt - 1) / 2));
            trial = shift + ((attempt % 2 == 1) ? mag : -mag);
        }
        if (auto inertia = factor(trial)) return InertiaResult{*inertia, trial, attempt};
    }
    std::ostringstream msg;
    msg.precision(17);
    msg << "inertia factorization broke down at shift " << shift << " after " << kMaxJitterAttempts
        << " jittered retries";
    throw FactorizationError(msg.str());
}

void check_imaginary_part(Complex z) {
    if (!(z.imag() >= kMinImaginaryPart)) {
        std::ostringstream msg;
        msg << "resolvent at Im z = " << z.imag() << " is ill-conditioned; raise Im z to at least "
            << kMinImaginaryPart;
        throw ConditioningError(msg.str());
    }
}

// G(k,k) for a chain from left/right continued fractions.
std::vector<Complex> chain_diagonal(const DisorderedOperator& op, Complex z) {
    const auto v = op.potential();
    const std::size_t n = v.size();
    const double t2 = op.hopping() * op.hopping();
    std::vector<Complex> left(n), right(n), g(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Complex a = v[k] - z;
        left[k] = (k == 0) ? a : a - t2 / left[k - 1];
    }
    for (std::size_t k = n; k-- > 0;) {
        const Complex a = v[k] - z;
        right[k] = (k + 1 == n) ? a : a - t2 / right[k + 1];
    }
    for (std::size_t k = 0; k < n; ++k) g[k] = 1.0 / (left[k] + right[k] - (v[k] - z));
    return g;
}

MonteCarloEstimate summarize(const std::vector<double>& xs) {
    MonteCarloEstimate e;
    e.n = xs.size();
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = xs[i] - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (xs[i] - mean);
    }
    e.mean = mean;
    e.std_err = e.n > 1 ? std::sqrt(m2 / static_cast<double>(e.n - 1) / static_cast<double>(e.n)) : 0.0;
    return e;
}

}  // namespace

InertiaResult inertia_at(const DisorderedOperator& op, double shift) {
    if (op.hopping() == 0.0) return InertiaResult{*diagonal_inertia(op, shift), shift, 0};
    if (is_chain(op)) return with_jitter([&](double s) { return sturm_inertia(op, s); }, shift);
    SliceFactorizer factor(op);
    return with_jitter(factor, shift);
}

std::size_t count_below(const DisorderedOperator& op, double shift, JitterLog* log) {
    const auto r = inertia_at(op, shift);
    if (log && r.jitters > 0) ++log->events;
    return r.inertia.n_neg;
}

std::size_t count_in_interval(const DisorderedOperator& op, Interval interval, JitterLog* log) {
    if (!(interval.lo < interval.hi)) throw ConfigError("count_in_interval requires lo < hi");
    const std::size_t below_hi = count_below(op, interval.hi, log);
    const std::size_t below_lo = count_below(op, interval.lo, log);
    return below_hi - below_lo;
}

std::vector<double> dense_spectrum(const DisorderedOperator& op, std::size_t cap) {
    const std::size_t n = op.size();
    if (n > cap) {
        throw DomainError("dense spectrum refused: " + std::to_string(n) + " sites exceed the dense cap of " +
                          std::to_string(cap) + "; use inertia counting (count_in_interval) instead");
    }
    std::vector<double> w(op.potential().begin(), op.potential().end());
    if (op.hopping() == 0.0) {
        std::sort(w.begin(), w.end());
        return w;
    }
    const auto ln = static_cast<lapack_int>(n);
    lapack_int info = 0;
    if (is_chain(op)) {
        std::vector<double> e(n > 1 ? n - 1 : 1, op.hopping());
        info = LAPACKE_dstev(LAPACK_COL_MAJOR, 'N', ln, w.data(), e.data(), nullptr, 1);
    } else {
        auto a = op.dense();
        info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', ln, a.data(), ln, w.data());
    }
    if (info != 0) throw NumericalError("dense eigensolver failed with info = " + std::to_string(info));
    std::sort(w.begin(), w.end());
    return w;
}

std::size_t count_sorted_below(std::span<const double> sorted, double shift) noexcept {
    return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), shift) - sorted.begin());
}

struct ResolventSolver::Impl {
    Eigen::SparseLU<Eigen::SparseMatrix<Complex>, Eigen::COLAMDOrdering<int>> lu;
    std::size_t n = 0;
};

ResolventSolver::ResolventSolver(const DisorderedOperator& op, Complex z) : impl_(std::make_unique<Impl>()), z_(z) {
    check_imaginary_part(z);
    const auto& box = op.box();
    const std::size_t n = op.size();
    impl_->n = n;
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(n * (1 + 2 * box.dimension()));
    for (std::size_t x = 0; x < n; ++x) {
        triplets.emplace_back(static_cast<int>(x), static_cast<int>(x), op.potential()[x] - z);
    }
    if (op.hopping() != 0.0) {
        for (int k = 0; k < box.dimension(); ++k) {
            const std::size_t s = box.stride(k);
            const auto ext = static_cast<std::size_t>(box.extent(k));
            for (std::size_t x = 0; x + s < n; ++x) {
                if ((x / s) % ext == ext - 1) continue;
                triplets.emplace_back(static_cast<int>(x), static_cast<int>(x + s), op.hopping());
                triplets.emplace_back(static_cast<int>(x + s), static_cast<int>(x), op.hopping());
            }
        }
    }
    Eigen::SparseMatrix<Complex> a(static_cast<int>(n), static_cast<int>(n));
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    impl_->lu.compute(a);
    if (impl_->lu.info() != Eigen::Success) {
        throw ConditioningError("sparse LU of H - z failed at Im z = " + std::to_string(z.imag()) +
                                "; raise Im z");
    }
}

ResolventSolver::~ResolventSolver() = default;
ResolventSolver::ResolventSolver(ResolventSolver&&) noexcept = default;
ResolventSolver& ResolventSolver::operator=(ResolventSolver&&) noexcept = default;

std::vector<Complex> ResolventSolver::column(std::size_t y) const {
    if (y >= impl_->n) throw DomainError("resolvent column index outside the box");
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(impl_->n));
    rhs[static_cast<Eigen::Index>(y)] = 1.0;
    Eigen::VectorXcd u = impl_->lu.solve(rhs);
    if (impl_->lu.info() != Eigen::Success || !u.allFinite()) {
        throw ConditioningError("resolvent solve failed; raise Im z");
    }
    return {u.data(), u.data() + u.size()};
}

Complex ResolventSolver::entry(std::size_t x, std::size_t y) const {
    if (x >= impl_->n) throw DomainError("resolvent row index outside the box");
    return column(y)[x];
}

GreensValue greens_entry(const DisorderedOperator& op, std::size_t x, std::size_t y, Complex z) {
    if (x >= op.size() || y >= op.size()) throw DomainError("Green's function sites must lie in the box");
    ResolventSolver solver(op, z);
    return GreensValue{x, y, z, solver.entry(x, y)};
}

std::vector<Complex> resolvent_diagonal(const DisorderedOperator& op, Complex z) {
    check_imaginary_part(z);
    if (op.hopping() == 0.0 || is_chain(op)) return chain_diagonal(op, z);
    ResolventSolver solver(op, z);
    std::vector<Complex> g(op.size());
    for (std::size_t x = 0; x < op.size(); ++x) g[x] = solver.column(x)[x];
    return g;
}

double trace_im_resolvent(const DisorderedOperator& op, Complex z, TracePath path, std::size_t cap) {
    check_imaginary_part(z);
    if (path == TracePath::Auto) path = op.size() <= cap ? TracePath::Spectrum : TracePath::Solve;
    double total = 0.0;
    if (path == TracePath::Spectrum) {
        for (double e : dense_spectrum(op, cap)) {
            const double re = e - z.real();
            total += z.imag() / (re * re + z.imag() * z.imag());
        }
    } else {
        for (const Complex& g : resolvent_diagonal(op, z)) total += g.imag();
    }
    return total;
}

std::vector<MonteCarloEstimate> fractional_moment_profile(const ProbeEnsemble& ensemble, std::span<const Coord> xs,
                                                          const Coord& y, Complex z, double s,
                                                          std::size_t n_samples, unsigned threads) {
    if (!(s > 0.0 && s < 1.0)) throw ConfigError("fractional moment exponent s must lie in (0, 1)");
    if (n_samples < 2) throw ConfigError("fractional moment probe needs at least 2 samples");
    check_imaginary_part(z);
    const auto& box = ensemble.box;
    const std::size_t iy = box.index_of(y);
    std::vector<std::size_t> ix;
    ix.reserve(xs.size());
    for (const auto& x : xs) ix.push_back(box.index_of(x));
    const auto rows = parallel_map(n_samples, threads, [&](std::size_t r) {
        const auto op = sample_operator(box, ensemble.spec, ensemble.replicate_seed(r), ensemble.hopping);
        const auto col = ResolventSolver(op, z).column(iy);
        std::vector<double> out(ix.size());
        for (std::size_t k = 0; k < ix.size(); ++k) out[k] = std::pow(std::abs(col[ix[k]]), s);
        return out;
    });
    std::vector<MonteCarloEstimate> est;
    std::vector<double> buf(n_samples);
    for (std::size_t k = 0; k < ix.size(); ++k) {
        for (std::size_t r = 0; r < n_samples; ++r) buf[r] = rows[r][k];
        est.push_back(summarize(buf));
    }
    return est;
}

MonteCarloEstimate fractional_moment_probe(const ProbeEnsemble& ensemble, const Coord& x, const Coord& y, Complex z,
                                           double s, std::size_t n_samples, unsigned threads) {
    const Coord xs[] = {x};
    return fractional_moment_profile(ensemble, xs, y, z, s, n_samples, threads).front();
}

double green_comparison(const DisorderedOperator& inner, const DisorderedOperator& outer, const Coord& x, Complex z) {
    if (!outer.box().contains(inner.box())) throw DomainError("green_comparison requires Λ ⊆ Λ'");
    if (inner.hopping() != outer.hopping()) throw DomainError("green_comparison operators differ in hopping");
    const std::size_t n = inner.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (inner.potential()[i] != outer.potential()[outer.box().index_of(inner.box().site_at(i))]) {
            throw DomainError("green_comparison operators do not share one potential realization");
        }
    }
    const std::size_t xi = inner.box().index_of(x);
    const std::size_t xo = outer.box().index_of(x);
    if (inner.box() == outer.box()) return 0.0;
    const Complex gi = ResolventSolver(inner, z).column(xi)[xi];
    const Complex go = ResolventSolver(outer, z).column(xo)[xo];
    return std::abs(gi - go);
}

}  // namespace meso
