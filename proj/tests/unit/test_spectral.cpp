#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "meso/errors.hpp"
#include "meso/spectral.hpp"
#include "oracles.hpp"

using namespace meso;
using namespace std::complex_literals;

namespace {

DisorderedOperator zero_path(std::int64_t n) {
    return DisorderedOperator(LatticeBox::cube(1, 0, n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

}  // namespace

TEST_CASE("inertia of the 3-site path") {
    const auto op = zero_path(3);
    CHECK(inertia_at(op, 1.0).inertia == InertiaTriple{2, 0, 1});
    CHECK(inertia_at(op, -3.0).inertia == InertiaTriple{0, 0, 3});
    CHECK(count_in_interval(op, {-1.0, 1.0}) == 1);
    CHECK(count_in_interval(op, {-2.5, 2.5}) == 3);
}

TEST_CASE("exact zero pivot triggers a jitter") {
    const auto op = zero_path(3);
    JitterLog log;
    const auto r = inertia_at(op, 0.0);
    CHECK(r.jitters >= 1);
    CHECK(r.shift != 0.0);
    CHECK(std::abs(r.shift) <= 1e-12);
    CHECK(r.inertia.dimension() == 3);
    const auto below = count_below(op, 0.0, &log);
    CHECK((below == 1 || below == 2));
    CHECK(log.events >= 1);
}

TEST_CASE("shift below the Gershgorin bound") {
    const auto op = sample_operator(LatticeBox::cube(2, 0, 6), PotentialSpec::uniform_width(3.0), SeedRecord{8});
    const auto b = op.spectral_bounds();
    CHECK(inertia_at(op, b.lo - 0.1).inertia == InertiaTriple{0, 0, op.size()});
    CHECK(count_in_interval(op, {b.lo - 0.1, b.hi + 0.1}) == op.size());
}

TEST_CASE("2D inertia matches dense eigenvalues at random shifts") {
    const auto op = sample_operator(LatticeBox::cube(2, 0, 12), PotentialSpec::uniform_width(4.0), SeedRecord{21});
    const auto ev = oracle::eigenvalues(op);
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> shift(-6.5, 6.5);
    for (int k = 0; k < 200; ++k) {
        const double s = shift(gen);
        const auto expected = static_cast<std::size_t>(std::count_if(ev.begin(), ev.end(), [&](double e) { return e < s; }));
        CHECK(count_below(op, s) == expected);
    }
}

TEST_CASE("3D and rectangular boxes") {
    for (const auto& box : {LatticeBox(3, {0, 0, 0}, {4, 5, 3}), LatticeBox(2, {0, 0, 0}, {2, 30, 0}),
                            LatticeBox(2, {0, 0, 0}, {25, 1, 0})}) {
        const auto op = sample_operator(box, PotentialSpec::uniform_width(6.0), SeedRecord{box.site_count()});
        const auto ev = oracle::eigenvalues(op);
        for (double s = -8.0; s <= 8.0; s += 0.37) {
            CHECK(count_below(op, s) == oracle::count_in(ev, -1e300, s));
        }
    }
}

TEST_CASE("count_below is monotone") {
    const auto op = sample_operator(LatticeBox::cube(1, 0, 400), PotentialSpec::uniform_width(4.0), SeedRecord{4});
    std::size_t prev = 0;
    for (double s = -5.0; s <= 5.0; s += 0.01) {
        const auto c = count_below(op, s);
        CHECK(c >= prev);
        prev = c;
    }
    CHECK(prev == op.size());
}

TEST_CASE("dense spectrum") {
    for (std::int64_t n : {1, 2, 7, 100}) {
        const auto ev = dense_spectrum(zero_path(n));
        REQUIRE(ev.size() == static_cast<std::size_t>(n));
        std::vector<double> ref;
        for (std::int64_t k = 1; k <= n; ++k) ref.push_back(2.0 * std::cos(k * M_PI / (n + 1)));
        std::sort(ref.begin(), ref.end());
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(ev[i] - ref[i]) <= 1e-10);
    }
    const DisorderedOperator one(LatticeBox::cube(1, 0, 1), {1.75});
    CHECK(dense_spectrum(one) == std::vector<double>{1.75});

    const auto op = sample_operator(LatticeBox::cube(2, 0, 15), PotentialSpec::uniform_width(5.0), SeedRecord{2});
    const auto ev = dense_spectrum(op);
    CHECK(std::is_sorted(ev.begin(), ev.end()));
    const double trace = std::accumulate(op.potential().begin(), op.potential().end(), 0.0);
    CHECK(std::accumulate(ev.begin(), ev.end(), 0.0) == doctest::Approx(trace).epsilon(1e-9));
    const auto ref = oracle::eigenvalues(op);
    for (std::size_t i = 0; i < ev.size(); ++i) CHECK(std::abs(ev[i] - ref[i]) <= 1e-10);

    CHECK_THROWS_AS(dense_spectrum(op, 100), ConfigError);
}

TEST_CASE("Green's function closed forms") {
    const DisorderedOperator one(LatticeBox::cube(1, 0, 1), {2.0});
    const auto g = greens_entry(one, 0, 0, 1i);
    CHECK(std::abs(g.value - (2.0 + 1i) / 5.0) <= 1e-15);

    const DisorderedOperator zero(LatticeBox::cube(1, 0, 1), {0.0});
    CHECK(trace_im_resolvent(zero, 1i) == doctest::Approx(1.0));

    CHECK_THROWS_AS(greens_entry(one, 0, 0, Complex(0.0, 1e-16)), ConditioningError);
}

TEST_CASE("Green's function entries match a dense inverse") {
    const auto op = sample_operator(LatticeBox::cube(2, 0, 9), PotentialSpec::uniform_width(4.0), SeedRecord{31});
    const Complex z(0.3, 0.05);
    const auto ref = oracle::resolvent(op, z);
    ResolventSolver solver(op, z);
    for (std::size_t y : {0ul, 40ul, 80ul}) {
        const auto col = solver.column(y);
        for (std::size_t x = 0; x < op.size(); ++x) CHECK(std::abs(col[x] - ref(x, y)) <= 1e-10);
    }
    CHECK(std::abs(greens_entry(op, 3, 50, z).value - greens_entry(op, 50, 3, z).value) <= 1e-10);

    // Residual of the solve.
    const auto h = oracle::dense_matrix(op).cast<Complex>();
    const auto col = solver.column(17);
    Eigen::VectorXcd u = Eigen::Map<const Eigen::VectorXcd>(col.data(), static_cast<Eigen::Index>(col.size()));
    Eigen::VectorXcd r = h * u - z * u;
    r[17] -= 1.0;
    CHECK(r.norm() <= 1e-10);

    const auto diag = resolvent_diagonal(op, z);
    for (std::size_t x = 0; x < op.size(); ++x) {
        CHECK(std::abs(diag[x] - ref(x, x)) <= 1e-10);
        CHECK(diag[x].imag() > 0.0);
    }
}

TEST_CASE("chain diagonal matches a dense inverse") {
    const auto op = sample_operator(LatticeBox::cube(1, 0, 60), PotentialSpec::uniform_width(2.0), SeedRecord{6});
    const Complex z(-0.4, 1e-3);
    const auto ref = oracle::resolvent(op, z);
    const auto diag = resolvent_diagonal(op, z);
    for (std::size_t x = 0; x < op.size(); ++x) CHECK(std::abs(diag[x] - ref(x, x)) <= 1e-8 * std::abs(ref(x, x)) + 1e-10);
}

TEST_CASE("resolvent trace paths agree") {
    for (const auto& box : {LatticeBox::cube(1, 0, 200), LatticeBox::cube(2, 0, 14)}) {
        const auto op = sample_operator(box, PotentialSpec::uniform_width(4.0), SeedRecord{12});
        const auto ev = oracle::eigenvalues(op);
        for (Complex z : {Complex(0.1, 1e-2), Complex(-1.0, 1e-4), Complex(2.0, 1.0)}) {
            double ref = 0.0;
            for (double e : ev) ref += (1.0 / (e - z)).imag();
            const double a = trace_im_resolvent(op, z, TracePath::Spectrum);
            const double b = trace_im_resolvent(op, z, TracePath::Solve);
            CHECK(a > 0.0);
            CHECK(a == doctest::Approx(ref).epsilon(1e-8));
            CHECK(b == doctest::Approx(ref).epsilon(1e-8));
        }
    }
}

TEST_CASE("fractional moments") {
    ProbeEnsemble ens{LatticeBox::cube(1, 0, 1), PotentialSpec::uniform(-1.0, 1.0), SeedRecord{77}};
    const double s = 0.5;
    const auto est = fractional_moment_probe(ens, Coord{}, Coord{}, 1i, s, 20000);
    // ∫ |v - i|^{-s} dv / 2 over [-1, 1]
    const double ref = oracle::adaptive_simpson([&](double v) { return std::pow(v * v + 1.0, -s / 2.0) / 2.0; }, -1.0,
                                                1.0, 1e-13);
    CHECK(std::abs(est.mean - ref) <= 3.0 * est.std_err);

    const auto est0 = fractional_moment_probe(ens, Coord{}, Coord{}, 1i, 1e-12, 100);
    CHECK(est0.mean == doctest::Approx(1.0).epsilon(1e-9));

    CHECK_THROWS_AS(fractional_moment_probe(ens, Coord{}, Coord{}, 1i, 0.5, 1), ConfigError);
    CHECK_THROWS_AS(fractional_moment_probe(ens, Coord{}, Coord{}, 1i, 1.5, 10), ConfigError);
}

TEST_CASE("fractional moments decay at strong disorder") {
    ProbeEnsemble ens{LatticeBox(1, {-8, 0, 0}, {16, 0, 0}), PotentialSpec::uniform_width(15.0), SeedRecord{2024}};
    std::vector<Coord> xs;
    for (std::int64_t r : {2, 4, 6, 8}) xs.push_back(Coord{r, 0, 0});
    const auto prof = fractional_moment_profile(ens, xs, Coord{}, Complex(0.0, 1e-3), 0.5, 10000, 2);
    for (std::size_t i = 1; i < prof.size(); ++i) CHECK(std::log(prof[i].mean) < std::log(prof[i - 1].mean));
    // The profile and the single-site probe agree on shared realizations.
    const auto single = fractional_moment_probe(ens, xs[1], Coord{}, Complex(0.0, 1e-3), 0.5, 10000, 1);
    CHECK(single.mean == doctest::Approx(prof[1].mean).epsilon(1e-12));
}

TEST_CASE("Green comparison") {
    const auto op = sample_operator(LatticeBox::cube(1, 0, 2), PotentialSpec::uniform_width(3.0), SeedRecord{9});
    const auto inner = restrict_to(op, LatticeBox::cube(1, 0, 1));
    const Complex z(0.2, 0.5);
    const double v0 = op.potential()[0], v1 = op.potential()[1];
    const double expected = std::abs(1.0 / (v0 - z) - 1.0 / (v0 - z - 1.0 / (v1 - z)));
    CHECK(green_comparison(inner, op, Coord{}, z) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(green_comparison(op, op, Coord{}, z) == 0.0);
    CHECK_THROWS_AS(green_comparison(op, inner, Coord{}, z), DomainError);
}
