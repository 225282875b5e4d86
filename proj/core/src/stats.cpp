#include "meso/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "meso/errors.hpp"

namespace meso {

void StreamingSummary::add(double x) noexcept {
    StreamingSummary one;
    one.n = 1;
    one.mean = x;
    one.min = one.max = x;
    merge(one);
}

void StreamingSummary::merge(const StreamingSummary& b) noexcept {
    if (b.n == 0) return;
    if (n == 0) {
        *this = b;
        return;
    }
    const double na = static_cast<double>(n);
    const double nb = static_cast<double>(b.n);
    const double nn = na + nb;
    const double d = b.mean - mean;
    const double d2 = d * d;
    const double new_m4 = m4 + b.m4 + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (nn * nn * nn) +
                          6.0 * d2 * (na * na * b.m2 + nb * nb * m2) / (nn * nn) +
                          4.0 * d * (na * b.m3 - nb * m3) / nn;
    const double new_m3 = m3 + b.m3 + d2 * d * na * nb * (na - nb) / (nn * nn) + 3.0 * d * (na * b.m2 - nb * m2) / nn;
    m2 = m2 + b.m2 + d2 * na * nb / nn;
    m3 = new_m3;
    m4 = new_m4;
    mean += d * nb / nn;
    min = std::min(min, b.min);
    max = std::max(max, b.max);
    n += b.n;
}

double StreamingSummary::variance() const noexcept {
    return n > 1 ? std::max(0.0, m2 / static_cast<double>(n - 1)) : 0.0;
}

double StreamingSummary::std_error_of_mean() const noexcept {
    return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
}

double StreamingSummary::std_error_of_variance() const noexcept {
    if (n < 4) return std::numeric_limits<double>::infinity();
    const double nn = static_cast<double>(n);
    const double mu2 = m2 / nn;
    const double mu4 = m4 / nn;
    return std::sqrt(std::max(0.0, (mu4 - mu2 * mu2 * (nn - 3.0) / (nn - 1.0)) / nn));
}

double StreamingSummary::skewness() const noexcept {
    if (n < 2 || m2 <= 0.0) return 0.0;
    const double nn = static_cast<double>(n);
    return (m3 / nn) / std::pow(m2 / nn, 1.5);
}

double StreamingSummary::excess_kurtosis() const noexcept {
    if (n < 2 || m2 <= 0.0) return 0.0;
    const double nn = static_cast<double>(n);
    return (m4 / nn) / ((m2 / nn) * (m2 / nn)) - 3.0;
}

EmpiricalDistribution::EmpiricalDistribution(std::span<const double> samples) {
    samples_.reserve(samples.size());
    for (double x : samples) add(x);
}

void EmpiricalDistribution::add(double x) {
    samples_.push_back(x);
    summary_.add(x);
    if (integer_valued_) {
        if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15) {
            ++histogram_[static_cast<std::int64_t>(x)];
        } else {
            integer_valued_ = false;
            histogram_.clear();
        }
    }
}

void EmpiricalDistribution::merge(const EmpiricalDistribution& other) {
    samples_.insert(samples_.end(), other.samples_.begin(), other.samples_.end());
    summary_.merge(other.summary_);
    if (integer_valued_ && other.integer_valued_) {
        for (auto [k, c] : other.histogram_) histogram_[k] += c;
    } else {
        integer_valued_ = false;
        histogram_.clear();
    }
}

double EmpiricalDistribution::probability(std::int64_t k) const noexcept {
    if (summary_.n == 0) return 0.0;
    const auto it = histogram_.find(k);
    return it == histogram_.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(summary_.n);
}

double EmpiricalDistribution::tail_probability(double k) const noexcept {
    if (samples_.empty()) return 0.0;
    const auto hits = std::count_if(samples_.begin(), samples_.end(), [k](double x) { return x >= k; });
    return static_cast<double>(hits) / static_cast<double>(samples_.size());
}

double moment(const EmpiricalDistribution& emp, int k, MomentKind kind) {
    if (k < 1 || k > 4) {
        throw ConfigError("streaming moments are limited to k <= 4; compute higher moments from raw samples");
    }
    const auto& s = emp.summary();
    if (s.n == 0) return 0.0;
    const double nn = static_cast<double>(s.n);
    const double c2 = s.m2 / nn, c3 = s.m3 / nn, c4 = s.m4 / nn;
    if (kind == MomentKind::Central) {
        switch (k) {
            case 1: return 0.0;
            case 2: return s.variance();
            case 3: return c3;
            default: return c4;
        }
    }
    const double m = s.mean;
    switch (k) {
        case 1: return m;
        case 2: return c2 + m * m;
        case 3: return c3 + 3.0 * m * c2 + m * m * m;
        default: return c4 + 4.0 * m * c3 + 6.0 * m * m * c2 + m * m * m * m;
    }
}

TestReport make_report(std::string name, double value, double threshold, std::size_t n, std::string notes) {
    TestReport r{std::move(name), value, threshold, false, n, std::move(notes)};
    r.pass = std::isfinite(value) && value <= threshold;
    return r;
}

void to_json(nlohmann::json& j, const TestReport& r) {
    j = nlohmann::json{{"name", r.name}, {"value", r.value}, {"threshold", r.threshold},
                       {"pass", r.pass}, {"n", r.n}, {"notes", r.notes}};
    if (!std::isfinite(r.value)) j["value"] = nullptr;
}

double poisson_pmf(double lambda, std::int64_t n) {
    if (!(lambda > 0.0)) throw ConfigError("Poisson parameter must be positive");
    if (n < 0) return 0.0;
    const double k = static_cast<double>(n);
    return std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
}

double normal_cdf(double x, double mu, double sigma) noexcept {
    return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
}

double ks_threshold(std::size_t n, double coefficient) noexcept {
    return n == 0 ? 0.0 : coefficient / std::sqrt(static_cast<double>(n));
}

TestReport total_variation_poisson(const EmpiricalDistribution& emp, double lambda, double threshold) {
    if (!emp.integer_valued()) {
        return make_report("tv_poisson", std::numeric_limits<double>::quiet_NaN(), threshold, emp.size(),
                           "samples are not integer-valued");
    }
    if (emp.size() == 0) return make_report("tv_poisson", 1.0, threshold, 0, "no samples");
    const auto& hist = emp.histogram();
    const std::int64_t top = std::max<std::int64_t>(
        hist.empty() ? 0 : hist.rbegin()->first,
        static_cast<std::int64_t>(std::ceil(lambda + 40.0 * std::sqrt(lambda) + 40.0)));
    double tv = 0.0, pmf_mass = 0.0, emp_mass_below_zero = 0.0;
    for (auto [k, c] : hist) {
        if (k < 0) emp_mass_below_zero += static_cast<double>(c) / static_cast<double>(emp.size());
    }
    for (std::int64_t k = 0; k <= top; ++k) {
        const double p = poisson_pmf(lambda, k);
        pmf_mass += p;
        tv += std::abs(emp.probability(k) - p);
    }
    tv += emp_mass_below_zero + std::max(0.0, 1.0 - pmf_mass);
    return make_report("tv_poisson", 0.5 * tv, threshold, emp.size(), "lambda=" + std::to_string(lambda));
}

namespace {

std::optional<TestReport> ks_degenerate(std::string name, std::size_t n, double sigma, double threshold) {
    if (n < 10) return make_report(std::move(name), 1.0, threshold, n, "degenerate: fewer than 10 samples");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        return make_report(std::move(name), 1.0, threshold, n, "degenerate: non-positive sigma");
    }
    return std::nullopt;
}

}  // namespace

TestReport ks_normal(std::span<const double> samples, double mu, double sigma, std::optional<double> threshold) {
    const std::size_t n = samples.size();
    const double thr = threshold.value_or(ks_threshold(n));
    if (auto bad = ks_degenerate("ks_normal", n, sigma, thr)) return *bad;
    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end());
    const double nn = static_cast<double>(n);
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = normal_cdf(xs[i], mu, sigma);
        d = std::max({d, static_cast<double>(i + 1) / nn - f, f - static_cast<double>(i) / nn});
    }
    return make_report("ks_normal", d, thr, n);
}

TestReport ks_normal_lattice(std::span<const double> samples, double mu, double sigma, double spacing,
                             std::optional<double> threshold) {
    const std::size_t n = samples.size();
    const double thr = threshold.value_or(ks_threshold(n));
    if (auto bad = ks_degenerate("ks_normal_lattice", n, sigma, thr)) return *bad;
    if (!(spacing > 0.0)) throw ConfigError("lattice spacing must be positive");
    const double origin = *std::min_element(samples.begin(), samples.end());
    std::map<std::int64_t, std::size_t> counts;
    for (double x : samples) {
        const double k = (x - origin) / spacing;
        const double kr = std::round(k);
        if (std::abs(k - kr) > 1e-6 || kr > 1e7) {
            auto r = ks_normal(samples, mu, sigma, thr);
            r.name = "ks_normal_lattice";
            r.notes = "samples off lattice; plain KS used";
            return r;
        }
        ++counts[static_cast<std::int64_t>(kr)];
    }
    const std::int64_t top = counts.rbegin()->first;
    const double nn = static_cast<double>(n);
    double d = normal_cdf(origin - 0.5 * spacing, mu, sigma);  // F̂ = 0 one step below the minimum
    std::size_t cum = 0;
    auto it = counts.begin();
    for (std::int64_t k = 0; k <= top; ++k) {
        if (it != counts.end() && it->first == k) {
            cum += it->second;
            ++it;
        }
        const double v = origin + static_cast<double>(k) * spacing;
        d = std::max(d, std::abs(static_cast<double>(cum) / nn - normal_cdf(v + 0.5 * spacing, mu, sigma)));
    }
    return make_report("ks_normal_lattice", d, thr, n, "spacing=" + std::to_string(spacing));
}

double lindeberg_diagnostic(std::span<const std::vector<double>> cells, double eps) {
    if (!(eps > 0.0)) throw ConfigError("Lindeberg epsilon must be positive");
    std::vector<double> second(cells.size(), 0.0);
    double total = 0.0;
    for (std::size_t m = 0; m < cells.size(); ++m) {
        if (cells[m].empty()) continue;
        double s = 0.0;
        for (double y : cells[m]) s += y * y;
        second[m] = s / static_cast<double>(cells[m].size());
        total += second[m];
    }
    if (total <= 0.0) return 0.0;
    const double cut = eps * std::sqrt(total);
    double tail = 0.0;
    for (std::size_t m = 0; m < cells.size(); ++m) {
        if (cells[m].empty()) continue;
        double s = 0.0;
        for (double y : cells[m]) {
            if (std::abs(y) > cut) s += y * y;
        }
        tail += s / static_cast<double>(cells[m].size());
    }
    return tail / total;
}

namespace {

void check_mollifier_args(double eps, double a, double b) {
    if (!(eps > 0.0)) throw ConfigError("mollifier epsilon must be positive");
    if (!(a < b)) throw ConfigError("mollifier requires a < b");
}

}  // namespace

double mollifier_eval(double x, double eps, double a, double b) {
    check_mollifier_args(eps, a, b);
    const double ua = (x - a) / eps, ub = (x - b) / eps;
    // Outside [a, b] the two arctangents nearly cancel; use the subtraction formula.
    if (ua * ub > 0.0) return std::atan((b - a) / eps / (1.0 + ua * ub)) / std::numbers::pi;
    return (std::atan(ua) - std::atan(ub)) / std::numbers::pi;
}

double mollifier_antiderivative(double x, double eps, double a, double b) {
    check_mollifier_args(eps, a, b);
    const double ua = (x - a) / eps, ub = (x - b) / eps;
    const double big_a = ((x - a) * std::atan(ua) - (x - b) * std::atan(ub)) / std::numbers::pi;
    const double big_b = eps * (std::log1p(ua * ua) - std::log1p(ub * ub)) / (2.0 * std::numbers::pi);
    return big_a - big_b;
}

double mollifier_l1_error(double eps, double a, double b) {
    check_mollifier_args(eps, a, b);
    // With F = A_ε - B_ε, F(±∞) = ±(b-a)/2. The three pieces
    //   ∫_{-∞}^a g_ε = F(a) - F(-∞),  ∫_b^∞ g_ε = F(∞) - F(b),
    //   ∫_a^b (1 - g_ε) = (b - a) - F(b) + F(a)
    // are written out with arctan(t) = π/2 - arctan(1/t) so that no term
    // cancels at small ε.
    const double width = b - a;
    const double t = width / eps;
    const double tail_atan = std::atan(1.0 / t);
    const double log_term = eps * std::log1p(t * t);
    const double outside = 2.0 * (width * tail_atan / std::numbers::pi + log_term / (2.0 * std::numbers::pi));
    const double inside = 2.0 * width * tail_atan / std::numbers::pi + log_term / std::numbers::pi;
    return outside + inside;
}

double freedman_diaconis_width(std::span<const double> samples) {
    if (samples.size() < 4) throw ConfigError("Freedman-Diaconis needs at least 4 samples");
    std::vector<double> xs(samples.begin(), samples.end());
    auto q = [&](double p) {
        const double pos = p * static_cast<double>(xs.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(lo), xs.end());
        const double vlo = xs[lo];
        if (lo + 1 >= xs.size()) return vlo;
        const double vhi = *std::min_element(xs.begin() + static_cast<std::ptrdiff_t>(lo) + 1, xs.end());
        return vlo + (pos - static_cast<double>(lo)) * (vhi - vlo);
    };
    const double iqr = q(0.75) - q(0.25);
    if (!(iqr > 0.0)) throw ConfigError("Freedman-Diaconis width undefined for zero IQR");
    return 2.0 * iqr * std::cbrt(1.0 / static_cast<double>(samples.size()));
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("correlation needs two equal-length samples");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> sigma) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n || (!sigma.empty() && sigma.size() != n)) {
        throw ConfigError("line fit needs at least two points of matching length");
    }
    double sw = 0.0, sx = 0.0, sy = 0.0;
    std::vector<double> w(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!sigma.empty()) w[i] = sigma[i] > 0.0 ? 1.0 / (sigma[i] * sigma[i]) : 1.0;
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
        syy += w[i] * (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0) throw ConfigError("line fit needs distinct x values");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    if (!sigma.empty()) {
        f.slope_std_error = std::sqrt(1.0 / sxx);
    } else if (n > 2) {
        const double resid = std::max(0.0, syy - f.slope * sxy);
        f.slope_std_error = std::sqrt(resid / static_cast<double>(n - 2) / sxx);
    }
    return f;
}

}  // namespace meso
