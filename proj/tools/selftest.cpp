#include "selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "meso/dos.hpp"
#include "meso/errors.hpp"
#include "meso/hamiltonian.hpp"
#include "meso/lattice.hpp"
#include "meso/rng.hpp"
#include "meso/spectral.hpp"
#include "meso/stats.hpp"

namespace meso::tools {

namespace {

using Check = std::pair<std::string, std::function<bool()>>;

DisorderedOperator chain(std::vector<double> v, double t = 1.0) {
    const auto n = static_cast<std::int64_t>(v.size());
    return DisorderedOperator(LatticeBox::cube(1, 0, n), std::move(v), t);
}

bool path_spectrum(std::int64_t n) {
    const auto ev = dense_spectrum(chain(std::vector<double>(static_cast<std::size_t>(n), 0.0)));
    for (std::int64_t k = 1; k <= n; ++k) {
        const double expect = 2.0 * std::cos(static_cast<double>(n + 1 - k) * std::numbers::pi / double(n + 1));
        if (std::abs(ev[static_cast<std::size_t>(k - 1)] - expect) > 1e-10) return false;
    }
    return true;
}

// Composite Simpson on [lo, hi] with m (even) panels.
double simpson(const std::function<double(double)>& f, double lo, double hi, int m) {
    const double h = (hi - lo) / m;
    double s = f(lo) + f(hi);
    for (int i = 1; i < m; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// ||χ_(a,b) - g_ε||₁ by quadrature after x = c + tan θ, split at a and b.
double mollifier_l1_quadrature(double eps, double a, double b) {
    const double c = 0.5 * (a + b);
    auto piece = [&](double chi) {
        return [&, chi](double th) {
            const double sec = 1.0 / std::cos(th);
            return std::abs(chi - mollifier_eval(c + std::tan(th), eps, a, b)) * sec * sec;
        };
    };
    const double ta = std::atan(a - c);
    const double tb = std::atan(b - c);
    const double edge = std::numbers::pi / 2;
    const int m = 20000;
    return simpson(piece(0.0), -edge, ta, m) + simpson(piece(1.0), ta, tb, m) + simpson(piece(0.0), tb, edge, m);
}

std::vector<Check> checks() {
    std::vector<Check> c;
    for (std::int64_t n : {1, 2, 5, 64, 300}) {
        c.emplace_back("path graph spectrum n=" + std::to_string(n), [n] { return path_spectrum(n); });
    }
    c.emplace_back("philox zero vector", [] {
        return Philox4x32::generate({0, 0, 0, 0}, {0, 0}) ==
               Philox4x32::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8};
    });
    c.emplace_back("philox all-ones vector", [] {
        return Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
               Philox4x32::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd};
    });
    c.emplace_back("philox pi-digit vector", [] {
        return Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
               Philox4x32::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1};
    });
    c.emplace_back("scalar green function", [] {
        const Complex z(0.3, 0.7);
        const auto g = greens_entry(chain({1.25}), 0, 0, z).value;
        return std::abs(g - 1.0 / (1.25 - z)) < 1e-12;
    });
    c.emplace_back("2x2 green function", [] {
        const double v1 = 0.4, v2 = -1.1, t = 1.0;
        const Complex z(0.2, 0.5);
        const auto op = chain({v1, v2}, t);
        const Complex det = (v1 - z) * (v2 - z) - t * t;
        return std::abs(greens_entry(op, 0, 0, z).value - (v2 - z) / det) < 1e-12 &&
               std::abs(greens_entry(op, 1, 1, z).value - (v1 - z) / det) < 1e-12 &&
               std::abs(greens_entry(op, 0, 1, z).value + t / det) < 1e-12;
    });
    for (double eps : {0.5, 0.1, 0.02}) {
        c.emplace_back("mollifier L1 closed form vs quadrature eps=" + std::to_string(eps), [eps] {
            return std::abs(mollifier_l1_error(eps, -1.0, 1.5) - mollifier_l1_quadrature(eps, -1.0, 1.5)) < 1e-8;
        });
    }
    c.emplace_back("mollifier antiderivative", [] {
        const auto g = [](double x) { return mollifier_eval(x, 0.3, -1.0, 1.0); };
        const double num = simpson(g, -2.0, 0.5, 20000);
        const double closed =
            mollifier_antiderivative(0.5, 0.3, -1.0, 1.0) - mollifier_antiderivative(-2.0, 0.3, -1.0, 1.0);
        return std::abs(num - closed) < 1e-10;
    });
    for (double lam : {0.1, 1.0, 10.0, 200.0}) {
        c.emplace_back("poisson pmf normalization lambda=" + std::to_string(lam), [lam] {
            double s = 0.0;
            for (std::int64_t k = 0; k < 2000; ++k) s += poisson_pmf(lam, k);
            return std::abs(s - 1.0) < 1e-12;
        });
    }
    c.emplace_back("box site count", [] { return make_box(10.0, 2).site_count() == 21u * 21u; });
    c.emplace_back("index roundtrip", [] {
        const auto box = LatticeBox::cube(3, -2, 4);
        for (std::size_t i = 0; i < box.site_count(); ++i) {
            if (box.index_of(box.site_at(i)) != i) return false;
        }
        return true;
    });
    c.emplace_back("identity partition", [] {
        const auto box = make_box(50.0, 1);
        const auto p = partition_box(box, 1.0);
        return p.cell_count() == 1 && p.cells.front() == box;
    });
    c.emplace_back("partition covers parent", [] {
        const auto box = make_box(37.0, 2);
        std::size_t s = 0;
        for (const auto& cell : partition_box(box, 0.5).cells) s += cell.site_count();
        return s == box.site_count();
    });
    c.emplace_back("dyadic depth", [] { return dyadic_depth(0.5) == 2 && dyadic_depth(0.3) == 2 && dyadic_depth(0.2) == 3; });
    c.emplace_back("microscopic window width", [] {
        const auto iv = window_interval(MesoWindow{0.0, 1.0, -1.0, 1.0}, 4001.0);
        return std::abs(iv.width() - 2.0 / 4001.0) < 1e-15;
    });
    c.emplace_back("zero hopping is diagonal", [] {
        const auto op = sample_operator(LatticeBox::cube(1, 0, 20), PotentialSpec::uniform_width(4.0), SeedRecord{3}, 0.0);
        return count_below(op, 0.0) ==
               static_cast<std::size_t>(std::count_if(op.potential().begin(), op.potential().end(),
                                                      [](double v) { return v < 0.0; }));
    });
    c.emplace_back("restriction shares potential", [] {
        const auto op = sample_operator(make_box(20.0, 1), PotentialSpec::uniform_width(4.0), SeedRecord{5});
        const auto sub = restrict_to(op, LatticeBox(1, {-3, 0, 0}, {7, 0, 0}));
        for (std::size_t i = 0; i < sub.size(); ++i) {
            if (sub.potential()[i] != op.potential()[op.box().index_of(sub.box().site_at(i))]) return false;
        }
        return true;
    });
    c.emplace_back("gershgorin encloses spectrum", [] {
        const auto op = sample_operator(make_box(6.0, 2), PotentialSpec::uniform_width(4.0), SeedRecord{9});
        const auto ev = dense_spectrum(op);
        const auto b = op.spectral_bounds();
        return ev.front() >= b.lo && ev.back() <= b.hi;
    });
    c.emplace_back("count below bounds", [] {
        const auto op = sample_operator(make_box(30.0, 1), PotentialSpec::uniform_width(4.0), SeedRecord{11});
        const auto b = op.spectral_bounds();
        return count_below(op, b.lo - 1.0) == 0 && count_below(op, b.hi + 1.0) == op.size();
    });
    for (int d : {1, 2, 3}) {
        c.emplace_back("inertia count equals dense count d=" + std::to_string(d), [d] {
            const auto op = sample_operator(make_box(d == 1 ? 60.0 : (d == 2 ? 7.0 : 3.0), d),
                                            PotentialSpec::uniform_width(3.0), SeedRecord{static_cast<std::uint64_t>(d)});
            const auto ev = dense_spectrum(op);
            for (double lo = -4.0; lo < 4.0; lo += 0.37) {
                const Interval iv{lo, lo + 0.9};
                const auto dense = count_sorted_below(ev, iv.hi) - count_sorted_below(ev, iv.lo);
                if (count_in_interval(op, iv) != dense) return false;
            }
            return true;
        });
    }
    c.emplace_back("identical box green comparison", [] {
        const auto op = sample_operator(make_box(8.0, 1), PotentialSpec::uniform_width(15.0), SeedRecord{2});
        return green_comparison(op, op, Coord{0, 0, 0}, Complex(0.0, 0.1)) == 0.0;
    });
    c.emplace_back("trace paths agree", [] {
        const auto op = sample_operator(make_box(25.0, 1), PotentialSpec::uniform_width(4.0), SeedRecord{4});
        const Complex z(0.1, 0.05);
        const double a = trace_im_resolvent(op, z, TracePath::Spectrum);
        const double b = trace_im_resolvent(op, z, TracePath::Solve);
        return std::abs(a - b) < 1e-9 * std::max(1.0, std::abs(a));
    });
    c.emplace_back("tail at zero is one", [] {
        const std::vector<double> xs{0, 1, 3, 0, 2};
        return EmpiricalDistribution(xs).tail_probability(0) == 1.0;
    });
    c.emplace_back("tail non-increasing", [] {
        const std::vector<double> xs{0, 1, 3, 0, 2, 2, 1};
        const EmpiricalDistribution e(xs);
        return e.tail_probability(1) >= e.tail_probability(2) && e.tail_probability(2) >= e.tail_probability(3);
    });
    c.emplace_back("streaming merge matches batch", [] {
        StreamingSummary a, b, all;
        for (int i = 0; i < 50; ++i) {
            const double x = std::sin(i * 1.3) * 3.0 + i * 0.1;
            (i < 20 ? a : b).add(x);
            all.add(x);
        }
        a.merge(b);
        return std::abs(a.mean - all.mean) < 1e-12 && std::abs(a.variance() - all.variance()) < 1e-10 &&
               std::abs(a.skewness() - all.skewness()) < 1e-10;
    });
    c.emplace_back("normal cdf symmetry", [] { return std::abs(normal_cdf(0.0) - 0.5) < 1e-15; });
    c.emplace_back("ks threshold", [] { return std::abs(ks_threshold(2000) - 1.358 / std::sqrt(2000.0)) < 1e-15; });
    c.emplace_back("exact line fit", [] {
        const std::vector<double> x{0, 1, 2, 3}, y{1, -1, -3, -5};
        const auto f = fit_line(x, y);
        return std::abs(f.slope + 2.0) < 1e-12 && std::abs(f.intercept - 1.0) < 1e-12 && f.r_squared > 1.0 - 1e-12;
    });
    c.emplace_back("potential quantile inverts cdf", [] {
        const auto p = PotentialSpec::uniform_width(4.0);
        return std::abs(p.cdf(p.quantile(0.3)) - 0.3) < 1e-14;
    });
    c.emplace_back("histogram total mass", [] {
        DosEnsemble ens{{make_box(40.0, 1)}, PotentialSpec::uniform_width(4.0), SeedRecord{1}, 1.0, 1};
        const auto edges = uniform_edges(-4.5, 4.5, 0.25);
        return std::abs(estimate_dos_histogram(ens, edges, 4).total_mass() - 1.0) < 1e-12;
    });
    c.emplace_back("non-positive disorder width rejected", [] {
        try {
            (void)make_report("x", 0.0, 0.0, 1);
            (void)PotentialSpec::uniform_width(-1.0);
        } catch (const ConfigError&) {
            return true;
        }
        return false;
    });
    return c;
}

}  // namespace

SelftestResult run_selftest(std::ostream& log) {
    SelftestResult r;
    for (const auto& [name, fn] : checks()) {
        ++r.checks;
        bool ok = false;
        try {
            ok = fn();
        } catch (const std::exception& e) {
            log << "  exception in '" << name << "': " << e.what() << '\n';
        }
        if (!ok) {
            ++r.failures;
            log << "FAIL " << name << '\n';
        }
    }
    return r;
}

}  // namespace meso::tools
