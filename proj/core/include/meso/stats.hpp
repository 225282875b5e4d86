#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace meso {

/// Mergeable streaming moments (n, mean, M2, M3, M4, min, max).
struct StreamingSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    double min = 0.0;
    double max = 0.0;

    void add(double x) noexcept;
    void merge(const StreamingSummary& other) noexcept;

    /// Unbiased sample variance M2/(n-1).
    double variance() const noexcept;
    double std_error_of_mean() const noexcept;
    /// Large-sample standard error of the sample variance.
    double std_error_of_variance() const noexcept;
    double skewness() const noexcept;
    double excess_kurtosis() const noexcept;
};

/// Ensemble samples plus streaming summary and, while every sample is an
/// integer, an integer histogram.
class EmpiricalDistribution {
public:
    EmpiricalDistribution() = default;
    explicit EmpiricalDistribution(std::span<const double> samples);

    void add(double x);
    void merge(const EmpiricalDistribution& other);

    std::size_t size() const noexcept { return summary_.n; }
    const StreamingSummary& summary() const noexcept { return summary_; }
    std::span<const double> samples() const noexcept { return samples_; }
    bool integer_valued() const noexcept { return integer_valued_; }
    const std::map<std::int64_t, std::size_t>& histogram() const noexcept { return histogram_; }

    /// P̂(X = k) for integer-valued samples.
    double probability(std::int64_t k) const noexcept;
    /// P̂(X ≥ k).
    double tail_probability(double k) const noexcept;

private:
    std::vector<double> samples_;
    StreamingSummary summary_;
    bool integer_valued_ = true;
    std::map<std::int64_t, std::size_t> histogram_;
};

enum class MomentKind { Raw, Central };

/// k-th moment (k ≤ 4) from the streaming summary. Central moments are
/// population moments M_k/n except k = 2, which is the unbiased variance.
double moment(const EmpiricalDistribution& emp, int k, MomentKind kind);

/// Outcome of one statistical check; pass ⇔ value ≤ threshold.
struct TestReport {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::size_t n = 0;
    std::string notes;
};

TestReport make_report(std::string name, double value, double threshold, std::size_t n, std::string notes = {});
void to_json(nlohmann::json& j, const TestReport& r);

double poisson_pmf(double lambda, std::int64_t n);
double normal_cdf(double x, double mu = 0.0, double sigma = 1.0) noexcept;

/// Default KS acceptance threshold c/√n (asymptotic 95% point for c = 1.358).
double ks_threshold(std::size_t n, double coefficient = 1.358) noexcept;

/// TV distance ½ Σ_n |p̂(n) - Poisson(λ)(n)|.
TestReport total_variation_poisson(const EmpiricalDistribution& emp, double lambda, double threshold = 0.05);

/// One-sample KS statistic against Normal(mu, sigma²).
TestReport ks_normal(std::span<const double> samples, double mu, double sigma,
                     std::optional<double> threshold = std::nullopt);

/// KS for samples on a lattice {o + k·spacing} against the continuity-
/// corrected Normal CDF Φ((v + spacing/2 - mu)/sigma), compared at every
/// lattice point between the extreme samples.
TestReport ks_normal_lattice(std::span<const double> samples, double mu, double sigma, double spacing,
                             std::optional<double> threshold = std::nullopt);

/// Σ_m E[Y_m²; |Y_m| > ε·√S] / S with S = Σ_m E[Y_m²], for centered cell
/// samples `cells[m]`.
double lindeberg_diagnostic(std::span<const std::vector<double>> cells, double eps);

/// g_ε(x) = (1/π)(arctan((x-a)/ε) - arctan((x-b)/ε)) = (φ_{iε} * χ_(a,b))(x).
double mollifier_eval(double x, double eps, double a, double b);
/// A_ε(x) - B_ε(x), an antiderivative of g_ε.
double mollifier_antiderivative(double x, double eps, double a, double b);
/// ||χ_(a,b) - g_ε||₁ from the closed-form antiderivative.
double mollifier_l1_error(double eps, double a, double b);

/// Freedman–Diaconis bin width 2·IQR·n^{-1/3}.
double freedman_diaconis_width(std::span<const double> samples);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_std_error = 0.0;
};

/// Least-squares line through (x, y), optionally weighted by 1/σ².
LinearFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> sigma = {});

}  // namespace meso
