#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "meso/stats.hpp"
#include "oracles.hpp"

using namespace meso;

namespace {

struct TwoPass {
    double mean = 0, var = 0, m3 = 0, m4 = 0;
};

TwoPass two_pass(const std::vector<double>& x) {
    TwoPass t;
    const double n = double(x.size());
    for (double v : x) t.mean += v;
    t.mean /= n;
    double s2 = 0, s3 = 0, s4 = 0;
    for (double v : x) {
        const double d = v - t.mean;
        s2 += d * d;
        s3 += d * d * d;
        s4 += d * d * d * d;
    }
    t.var = s2 / (n - 1);
    t.m3 = s3 / n;
    t.m4 = s4 / n;
    return t;
}

// Inverse of the standard normal CDF by bisection on the library-free erfc.
double normal_quantile(double p) {
    double lo = -40, hi = 40;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Brute-force one-sample KS: supremum over both sides of every jump.
double ks_brute(std::vector<double> x, double mu, double sigma) {
    std::sort(x.begin(), x.end());
    const double n = double(x.size());
    double d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double F = 0.5 * std::erfc(-(x[i] - mu) / (sigma * std::sqrt(2.0)));
        d = std::max({d, std::abs((i + 1) / n - F), std::abs(F - i / n)});
    }
    return d;
}

}  // namespace

TEST_CASE("streaming moments match two-pass formulas") {
    std::mt19937_64 gen(3);
    std::gamma_distribution<double> g(2.0, 1.5);
    std::vector<double> x(5000);
    for (auto& v : x) v = 1e6 + g(gen);
    StreamingSummary s;
    for (double v : x) s.add(v);
    const auto ref = two_pass(x);
    const double pop2 = ref.var * (x.size() - 1.0) / x.size();
    CHECK(s.mean == doctest::Approx(ref.mean).epsilon(1e-14));
    CHECK(s.variance() == doctest::Approx(ref.var).epsilon(1e-9));
    CHECK(s.skewness() == doctest::Approx(ref.m3 / std::pow(pop2, 1.5)).epsilon(1e-6));
    CHECK(s.excess_kurtosis() == doctest::Approx(ref.m4 / (pop2 * pop2) - 3.0).epsilon(1e-6));

    // Merging shards equals one pass.
    StreamingSummary a, b;
    for (std::size_t i = 0; i < x.size(); ++i) (i < 1234 ? a : b).add(x[i]);
    a.merge(b);
    CHECK(a.n == s.n);
    CHECK(a.mean == doctest::Approx(s.mean).epsilon(1e-14));
    CHECK(a.variance() == doctest::Approx(s.variance()).epsilon(1e-9));
    CHECK(a.skewness() == doctest::Approx(s.skewness()).epsilon(1e-6));
    CHECK(a.min == *std::min_element(x.begin(), x.end()));
    CHECK(a.max == *std::max_element(x.begin(), x.end()));

    const EmpiricalDistribution emp(x);
    CHECK(moment(emp, 1, MomentKind::Raw) == doctest::Approx(ref.mean));
    CHECK(moment(emp, 2, MomentKind::Central) == doctest::Approx(ref.var).epsilon(1e-9));
    CHECK(moment(emp, 3, MomentKind::Central) == doctest::Approx(ref.m3).epsilon(1e-6));
    CHECK_THROWS(moment(emp, 5, MomentKind::Raw));
}

TEST_CASE("poisson pmf") {
    CHECK(poisson_pmf(1.0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(poisson_pmf(2.0, 2) == doctest::Approx(2.0 * std::exp(-2.0)).epsilon(1e-15));
    CHECK_THROWS(poisson_pmf(0.0, 0));
    CHECK_THROWS(poisson_pmf(-1.0, 2));
    for (double lambda : {0.01, 0.7, 12.0, 300.0}) {
        double total = 0;
        for (int k = 0; k < 2000; ++k) total += poisson_pmf(lambda, k);
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("total variation against Poisson") {
    std::vector<double> zeros(1000, 0.0);
    CHECK(total_variation_poisson(EmpiricalDistribution(zeros), 1.0).value ==
          doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));

    // Samples laid out exactly on the pmf of Poisson(0.5) (to 1e-6).
    std::vector<double> exact;
    const int n = 1000000;
    int used = 0;
    for (int k = 1; k < 12; ++k) {
        const int c = static_cast<int>(std::lround(poisson_pmf(0.5, k) * n));
        exact.insert(exact.end(), c, double(k));
        used += c;
    }
    exact.insert(exact.end(), n - used, 0.0);
    CHECK(total_variation_poisson(EmpiricalDistribution(exact), 0.5).value < 1e-5);

    std::mt19937_64 gen(10);
    std::poisson_distribution<int> pois(1.0);
    std::vector<double> draws(10000);
    for (auto& v : draws) v = pois(gen);
    const auto r = total_variation_poisson(EmpiricalDistribution(draws), 1.0);
    CHECK(r.value < 0.02);
    CHECK(r.pass);

    CHECK(std::isnan(total_variation_poisson(EmpiricalDistribution(std::vector<double>{0.5, 1.0}), 1.0).value));
}

TEST_CASE("KS against a normal") {
    const int n = 500;
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) q[i] = normal_quantile((i + 0.5) / n);
    const auto r = ks_normal(q, 0.0, 1.0);
    CHECK(r.value <= 1.0 / (2.0 * n) + 1e-12);
    CHECK(r.value == doctest::Approx(ks_brute(q, 0.0, 1.0)).epsilon(1e-12));

    std::mt19937_64 gen(4);
    std::normal_distribution<double> nd(3.0, 2.0);
    std::vector<double> draws(10000);
    for (auto& v : draws) v = nd(gen);
    const auto r2 = ks_normal(draws, 3.0, 2.0);
    CHECK(r2.value < 0.02);
    CHECK(r2.value == doctest::Approx(ks_brute(draws, 3.0, 2.0)).epsilon(1e-12));
    CHECK(r2.threshold == doctest::Approx(1.358 / 100.0));

    const std::vector<double> constant(100, 2.0);
    const auto r3 = ks_normal(constant, 2.0, 1.0);
    CHECK(r3.value >= 0.5);
    CHECK(!r3.pass);
}

TEST_CASE("lattice KS equals the brute-force statistic on lattice data") {
    // Poisson(400) samples normalized: the continuity-corrected statistic should be small, and
    // the brute-force supremum evaluated at the lattice points should agree with it.
    std::mt19937_64 gen(12);
    std::poisson_distribution<int> pois(400);
    const double spacing = 1.0 / 20.0;
    std::vector<double> x(4000);
    for (auto& v : x) v = pois(gen) * spacing;
    const double mu = 20.0, sigma = 1.0;
    const auto r = ks_normal_lattice(x, mu, sigma, spacing);
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    double d = 0;
    for (long k = std::lround(sorted.front() / spacing); k <= std::lround(sorted.back() / spacing); ++k) {
        const double v = k * spacing;
        const double emp = double(std::upper_bound(sorted.begin(), sorted.end(), v + 1e-9) - sorted.begin()) / x.size();
        d = std::max(d, std::abs(emp - normal_cdf(v + spacing / 2, mu, sigma)));
    }
    CHECK(r.value == doctest::Approx(d).epsilon(1e-6));
    CHECK(r.value < 0.03);
}

TEST_CASE("Lindeberg diagnostic") {
    std::vector<std::vector<double>> bounded(50, std::vector<double>{-1.0, 1.0, -1.0, 1.0});
    CHECK(lindeberg_diagnostic(bounded, 0.5) == 0.0);

    std::vector<std::vector<double>> heavy(100, std::vector<double>(10, 0.0));
    heavy[0][0] = 1e6;
    CHECK(lindeberg_diagnostic(heavy, 0.5) == doctest::Approx(1.0).epsilon(1e-6));

    std::mt19937_64 gen(1);
    std::poisson_distribution<int> pois(2.0);
    std::vector<std::vector<double>> cells(1000, std::vector<double>(200));
    for (auto& c : cells) {
        for (auto& v : c) v = pois(gen) - 2.0;
    }
    CHECK(lindeberg_diagnostic(cells, 0.5) < 0.05);
}

TEST_CASE("mollifier closed forms") {
    CHECK(mollifier_eval(0.0, 1.0, 0.0, 1.0) == doctest::Approx(0.25).epsilon(1e-15));
    for (double eps : {0.01, 0.3, 2.0}) {
        CHECK(mollifier_eval(0.5, eps, -1.0, 2.0) == doctest::Approx(2.0 / M_PI * std::atan(1.5 / eps)).epsilon(1e-14));
    }
    for (double x : {-50.0, -1.0, -0.2, 0.0, 0.4, 1.0, 3.0, 1e4}) {
        const double g = mollifier_eval(x, 0.1, -0.5, 0.5);
        CHECK(g > 0.0);
        CHECK(g < 1.0);
    }

    // Antiderivative: central differences recover g.
    for (double x : {-3.0, -0.5, 0.1, 0.7, 4.0}) {
        const double h = 1e-5;
        const double dA = (mollifier_antiderivative(x + h, 0.2, -0.5, 1.0) - mollifier_antiderivative(x - h, 0.2, -0.5, 1.0)) / (2 * h);
        CHECK(dA == doctest::Approx(mollifier_eval(x, 0.2, -0.5, 1.0)).epsilon(1e-7));
    }

    // L1 error against quadrature with the indicator split at its jumps.
    for (double eps : {1.0, 0.3, 0.05, 0.01}) {
        const double a = -0.7, b = 1.1;
        auto err = [&](double x, std::size_t piece) {
            const double chi = piece == 1 ? 1.0 : 0.0;
            return std::abs(chi - mollifier_eval(x, eps, a, b));
        };
        const double quad = oracle::whole_line(err, {a, b}, 1e-12);
        CHECK(mollifier_l1_error(eps, a, b) == doctest::Approx(quad).epsilon(1e-8));
    }

    double prev = 1e300;
    for (double eps = 1.0; eps >= 0.1; eps -= 0.1) {
        const double e = mollifier_l1_error(eps, 0.0, 1.0);
        CHECK(e < prev);
        prev = e;
    }

    // Pointwise limits as eps shrinks.
    CHECK(mollifier_eval(0.5, 1e-6, 0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(mollifier_eval(2.0, 1e-6, 0.0, 1.0) < 1e-5);
}

TEST_CASE("misc helpers") {
    const std::vector<double> x{1, 2, 3, 4, 5}, y{2.1, 3.9, 6.2, 7.8, 10.1};
    const auto fit = fit_line(x, y);
    CHECK(fit.slope == doctest::Approx(1.99).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(fit.r_squared > 0.99);
    CHECK(pearson_correlation(x, y) == doctest::Approx(std::sqrt(fit.r_squared)).epsilon(1e-12));

    std::vector<double> u(1001);
    for (int i = 0; i <= 1000; ++i) u[i] = i / 1000.0;
    CHECK(freedman_diaconis_width(u) == doctest::Approx(2.0 * 0.5 * std::pow(1001.0, -1.0 / 3.0)).epsilon(1e-9));
    CHECK(ks_threshold(2000) == doctest::Approx(1.358 / std::sqrt(2000.0)));
    CHECK(normal_cdf(0.0) == 0.5);
}
