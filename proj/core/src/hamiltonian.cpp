#include "meso/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "meso/errors.hpp"

namespace meso {

PotentialSpec::PotentialSpec(Family family, std::vector<double> edges, std::vector<double> density)
    : family_(family), edges_(std::move(edges)), density_(std::move(density)) {
    if (edges_.size() < 2 || density_.size() + 1 != edges_.size()) {
        throw ConfigError("potential table needs n+1 edges for n density values");
    }
    cumulative_.assign(edges_.size(), 0.0);
    for (std::size_t i = 0; i < density_.size(); ++i) {
        const double w = edges_[i + 1] - edges_[i];
        if (!(w > 0.0)) throw ConfigError("potential table edges must be strictly increasing");
        if (!(density_[i] >= 0.0) || !std::isfinite(density_[i])) {
            throw ConfigError("potential density values must be finite and non-negative");
        }
        cumulative_[i + 1] = cumulative_[i] + density_[i] * w;
        rho_sup_ = std::max(rho_sup_, density_[i]);
    }
    if (std::abs(cumulative_.back() - 1.0) > 1e-12) {
        throw ConfigError("potential density integrates to " + std::to_string(cumulative_.back()) +
                          ", expected 1");
    }
}

PotentialSpec PotentialSpec::uniform_width(double width) {
    if (!(width > 0.0) || !std::isfinite(width)) throw ConfigError("uniform width W must be positive");
    return uniform(-0.5 * width, 0.5 * width);
}

PotentialSpec PotentialSpec::uniform(double lo, double hi) {
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
        throw ConfigError("uniform potential needs lo < hi");
    }
    return PotentialSpec(Family::Uniform, {lo, hi}, {1.0 / (hi - lo)});
}

PotentialSpec PotentialSpec::table(std::vector<double> edges, std::vector<double> density) {
    return PotentialSpec(Family::Table, std::move(edges), std::move(density));
}

double PotentialSpec::density(double v) const noexcept {
    if (v < edges_.front() || v >= edges_.back()) return 0.0;
    const auto it = std::upper_bound(edges_.begin(), edges_.end(), v);
    return density_[static_cast<std::size_t>(it - edges_.begin()) - 1];
}

double PotentialSpec::cdf(double v) const noexcept {
    if (v <= edges_.front()) return 0.0;
    if (v >= edges_.back()) return 1.0;
    const auto i = static_cast<std::size_t>(std::upper_bound(edges_.begin(), edges_.end(), v) - edges_.begin()) - 1;
    return cumulative_[i] + density_[i] * (v - edges_[i]);
}

double PotentialSpec::quantile(double u) const noexcept {
    const double target = u * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    auto i = static_cast<std::size_t>(it - cumulative_.begin());
    i = std::clamp<std::size_t>(i, 1, density_.size()) - 1;
    // zero-density bins have no mass; skip forward to the bin that owns target
    while (density_[i] == 0.0 && i + 1 < density_.size()) ++i;
    const double v = edges_[i] + (target - cumulative_[i]) / density_[i];
    return std::clamp(v, edges_[i], std::nextafter(edges_[i + 1], edges_[i]));
}

PotentialSpec PotentialSpec::reflected() const {
    std::vector<double> edges(edges_.rbegin(), edges_.rend());
    for (auto& e : edges) e = -e;
    std::vector<double> dens(density_.rbegin(), density_.rend());
    return PotentialSpec(family_, std::move(edges), std::move(dens));
}

nlohmann::json PotentialSpec::to_json() const {
    if (family_ == Family::Uniform) {
        return {{"family", "uniform"}, {"lo", lo()}, {"hi", hi()}, {"rho_sup", rho_sup_}};
    }
    return {{"family", "table"}, {"edges", edges_}, {"density", density_}, {"rho_sup", rho_sup_}};
}

PotentialSpec PotentialSpec::from_json(const nlohmann::json& j) {
    const auto family = j.at("family").get<std::string>();
    if (family == "uniform") return uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (family == "table") {
        return table(j.at("edges").get<std::vector<double>>(), j.at("density").get<std::vector<double>>());
    }
    throw ConfigError("unknown potential family '" + family + "'");
}

DisorderedOperator::DisorderedOperator(LatticeBox box, std::vector<double> potential, double hopping,
                                       std::optional<SeedRecord> seed)
    : box_(std::move(box)), potential_(std::move(potential)), hopping_(hopping), seed_(seed) {
    if (potential_.size() != box_.site_count()) {
        throw DomainError("potential length does not match box site count");
    }
}

double DisorderedOperator::entry(std::size_t x, std::size_t y) const noexcept {
    if (x == y) return potential_[x];
    const Coord cx = box_.site_at(x);
    const Coord cy = box_.site_at(y);
    std::int64_t l1 = 0;
    for (int k = 0; k < box_.dimension(); ++k) l1 += std::abs(cx[k] - cy[k]);
    return l1 == 1 ? hopping_ : 0.0;
}

Interval DisorderedOperator::spectral_bounds() const noexcept {
    const auto [mn, mx] = std::minmax_element(potential_.begin(), potential_.end());
    const double spread = 2.0 * box_.dimension() * std::abs(hopping_);
    return {*mn - spread, *mx + spread};
}

std::vector<double> DisorderedOperator::dense() const {
    const std::size_t n = size();
    std::vector<double> m(n * n, 0.0);
    for (std::size_t x = 0; x < n; ++x) m[x * n + x] = potential_[x];
    if (hopping_ == 0.0) return m;
    for (int k = 0; k < box_.dimension(); ++k) {
        const std::size_t s = box_.stride(k);
        for (std::size_t x = 0; x < n; ++x) {
            const Coord c = box_.site_at(x);
            if (c[k] < box_.upper()[k]) {
                m[x * n + x + s] = hopping_;
                m[(x + s) * n + x] = hopping_;
            }
        }
    }
    return m;
}

double site_uniform(SeedRecord seed, const Coord& site) noexcept {
    return uniform01(seed, {static_cast<std::uint32_t>(site[0]), static_cast<std::uint32_t>(site[1]),
                            static_cast<std::uint32_t>(site[2]), 0x9073u});
}

DisorderedOperator sample_operator(const LatticeBox& box, const PotentialSpec& spec, SeedRecord seed,
                                   double hopping) {
    const std::size_t n = box.site_count();
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = spec.quantile(site_uniform(seed, box.site_at(i)));
    return DisorderedOperator(box, std::move(v), hopping, seed);
}

DisorderedOperator restrict_to(const DisorderedOperator& op, const LatticeBox& sub) {
    if (!op.box().contains(sub)) throw DomainError("restriction target is not contained in the operator's box");
    const std::size_t n = sub.site_count();
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = op.potential()[op.box().index_of(sub.site_at(i))];
    return DisorderedOperator(sub, std::move(v), op.hopping(), op.seed());
}

void apply(const DisorderedOperator& op, std::span<const double> v, std::span<double> out) {
    const std::size_t n = op.size();
    if (v.size() != n || out.size() != n) throw DomainError("vector length does not match operator size");
    const auto& box = op.box();
    const auto pot = op.potential();
    for (std::size_t x = 0; x < n; ++x) out[x] = pot[x] * v[x];
    const double t = op.hopping();
    if (t == 0.0) return;
    for (int k = 0; k < box.dimension(); ++k) {
        const std::size_t s = box.stride(k);
        const std::size_t ext = static_cast<std::size_t>(box.extent(k));
        // x and x + s are neighbours unless x sits on the upper face of axis k
        for (std::size_t x = 0; x + s < n; ++x) {
            if ((x / s) % ext == ext - 1) continue;
            out[x] += t * v[x + s];
            out[x + s] += t * v[x];
        }
    }
}

std::vector<double> apply(const DisorderedOperator& op, std::span<const double> v) {
    std::vector<double> out(op.size());
    apply(op, v, out);
    return out;
}

}  // namespace meso
