#include "meso/dos.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "meso/errors.hpp"
#include "meso/parallel.hpp"
#include "meso/stats.hpp"

namespace meso {

namespace {

std::vector<std::size_t> site_counts(const std::vector<LatticeBox>& boxes) {
    std::vector<std::size_t> out;
    for (const auto& b : boxes) out.push_back(b.site_count());
    return out;
}

// Per-column mean and standard error of a realizations × points table.
void column_stats(const std::vector<std::vector<double>>& rows, std::vector<double>& mean, std::vector<double>& se) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    mean.assign(cols, 0.0);
    se.assign(cols, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
        StreamingSummary s;
        for (const auto& r : rows) s.add(r[c]);
        mean[c] = s.mean;
        se[c] = s.std_error_of_mean();
    }
}

std::vector<std::size_t> interior_sites(const LatticeBox& box) {
    std::int64_t min_extent = box.extent(0);
    for (int k = 1; k < box.dimension(); ++k) min_extent = std::min(min_extent, box.extent(k));
    const double half_edge = 0.5 * static_cast<double>(min_extent - 1);
    auto split = interior_boundary_split(box, half_edge / 4.0);
    if (split.interior.empty()) throw DomainError("box too small for boundary-damped Stieltjes averaging");
    return split.interior;
}

}  // namespace

std::string to_string(DosMethod m) { return m == DosMethod::Histogram ? "histogram" : "stieltjes"; }

double DosEstimate::total_mass() const noexcept {
    double mass = 0.0;
    for (double f : f_hat) mass += f * meta.bin_width;
    return mass;
}

std::size_t DosEstimate::locate(double energy) const {
    if (grid.empty()) throw DomainError("empty DOS grid");
    if (method == DosMethod::Histogram) {
        const double lo = grid.front() - 0.5 * meta.bin_width;
        const double pos = (energy - lo) / meta.bin_width;
        if (pos < 0.0 || pos >= static_cast<double>(grid.size())) {
            throw DomainError("energy " + std::to_string(energy) + " outside the DOS grid");
        }
        return static_cast<std::size_t>(pos);
    }
    const auto it = std::min_element(grid.begin(), grid.end(), [energy](double a, double b) {
        return std::abs(a - energy) < std::abs(b - energy);
    });
    return static_cast<std::size_t>(it - grid.begin());
}

void DosEstimate::write_csv(std::ostream& os) const {
    os << "E,f_hat,std_err\n";
    char line[128];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", grid[i], f_hat[i], std_err[i]);
        os << line;
    }
}

nlohmann::json DosEstimate::to_json() const {
    return {{"method", to_string(method)},
            {"grid", grid},
            {"f_hat", f_hat},
            {"std_err", std_err},
            {"metadata",
             {{"box_sites", meta.box_sites},
              {"realizations", meta.realizations},
              {"bin_width", meta.bin_width},
              {"im_z", meta.im_z}}}};
}

std::vector<double> uniform_edges(double lo, double hi, double width) {
    if (!(hi > lo) || !(width > 0.0)) throw ConfigError("histogram grid needs lo < hi and a positive bin width");
    const auto bins = static_cast<std::size_t>(std::ceil((hi - lo) / width - 1e-9));
    std::vector<double> edges(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) edges[i] = lo + static_cast<double>(i) * width;
    edges.back() = std::max(edges.back(), hi);
    return edges;
}

std::vector<double> centered_edges(double energy, double lo, double hi, double width) {
    if (!(hi > lo) || !(width > 0.0)) throw ConfigError("histogram grid needs lo < hi and a positive bin width");
    const double below = std::ceil((energy - 0.5 * width - lo) / width - 1e-9);
    const double start = energy - 0.5 * width - std::max(0.0, below) * width;
    return uniform_edges(start, std::max(hi, energy + 0.5 * width), width);
}

double default_bin_width(const DosEnsemble& ensemble, std::size_t pilot) {
    std::vector<double> pooled;
    for (std::size_t r = 0; r < pilot; ++r) {
        for (std::size_t b = 0; b < ensemble.boxes.size(); ++b) {
            const auto op = sample_operator(ensemble.boxes[b], ensemble.spec,
                                            derive_seed(ensemble.seed, {r, b, 0xF00Du}), ensemble.hopping);
            const auto ev = dense_spectrum(op);
            pooled.insert(pooled.end(), ev.begin(), ev.end());
        }
    }
    return freedman_diaconis_width(pooled);
}

DosEstimate estimate_dos_histogram(const DosEnsemble& ensemble, std::span<const double> edges,
                                   std::size_t n_realizations) {
    if (edges.size() < 2) throw ConfigError("histogram needs at least one bin");
    if (n_realizations < 2) throw ConfigError("DOS estimate needs at least 2 realizations");
    if (ensemble.boxes.empty()) throw ConfigError("DOS estimate needs at least one box");
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (!(edges[i] > edges[i - 1])) throw ConfigError("histogram edges must increase");
    }
    const std::vector<double> edge_list(edges.begin(), edges.end());
    const std::size_t bins = edges.size() - 1;
    std::size_t total_sites = 0;
    for (const auto& b : ensemble.boxes) total_sites += b.site_count();

    const auto rows = parallel_map(n_realizations, ensemble.threads, [&](std::size_t r) {
        std::vector<double> counts(bins, 0.0);
        for (std::size_t b = 0; b < ensemble.boxes.size(); ++b) {
            const auto op = sample_operator(ensemble.boxes[b], ensemble.spec, derive_seed(ensemble.seed, {r, b}),
                                            ensemble.hopping);
            std::size_t prev = count_below(op, edge_list.front());
            for (std::size_t i = 0; i < bins; ++i) {
                const std::size_t next = count_below(op, edge_list[i + 1]);
                counts[i] += static_cast<double>(next - prev);
                prev = next;
            }
        }
        for (std::size_t i = 0; i < bins; ++i) {
            counts[i] /= static_cast<double>(total_sites) * (edge_list[i + 1] - edge_list[i]);
        }
        return counts;
    });

    DosEstimate est;
    est.method = DosMethod::Histogram;
    est.grid.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) est.grid[i] = 0.5 * (edge_list[i] + edge_list[i + 1]);
    column_stats(rows, est.f_hat, est.std_err);
    est.meta.box_sites = site_counts(ensemble.boxes);
    est.meta.realizations = n_realizations;
    est.meta.bin_width = edge_list[1] - edge_list[0];
    return est;
}

DosEstimate estimate_dos_stieltjes_grid(const LatticeBox& box, const PotentialSpec& spec,
                                        std::span<const double> energies, double im_z,
                                        std::size_t n_realizations, SeedRecord seed, double hopping,
                                        unsigned threads) {
    if (!(im_z > 0.0)) throw ConfigError("Stieltjes DOS needs im_z > 0");
    if (n_realizations < 2) throw ConfigError("DOS estimate needs at least 2 realizations");
    const auto interior = interior_sites(box);
    const std::vector<double> es(energies.begin(), energies.end());
    const auto rows = parallel_map(n_realizations, threads, [&](std::size_t r) {
        const auto op = sample_operator(box, spec, derive_seed(seed, {r, 0}), hopping);
        std::vector<double> out(es.size());
        for (std::size_t k = 0; k < es.size(); ++k) {
            const auto diag = resolvent_diagonal(op, Complex(es[k], im_z));
            double s = 0.0;
            for (std::size_t x : interior) s += diag[x].imag();
            out[k] = s / (std::numbers::pi * static_cast<double>(interior.size()));
        }
        return out;
    });
    DosEstimate est;
    est.method = DosMethod::Stieltjes;
    est.grid = es;
    column_stats(rows, est.f_hat, est.std_err);
    est.meta.box_sites = {box.site_count()};
    est.meta.realizations = n_realizations;
    est.meta.im_z = im_z;
    return est;
}

MonteCarloEstimate estimate_dos_stieltjes(const LatticeBox& box, const PotentialSpec& spec, double energy,
                                          double im_z, std::size_t n_realizations, SeedRecord seed, double hopping,
                                          unsigned threads) {
    const double e[] = {energy};
    const auto est = estimate_dos_stieltjes_grid(box, spec, e, im_z, n_realizations, seed, hopping, threads);
    return {est.f_hat.front(), est.std_err.front(), n_realizations};
}

Intensity intensity(double f_hat, double f_std_err, const MesoWindow& w) {
    const double width = w.b - w.a;
    return {f_hat * width, f_std_err * width};
}

Intensity intensity(const DosEstimate& dos, const MesoWindow& w) {
    const std::size_t i = dos.locate(w.energy);
    return intensity(dos.f_hat[i], dos.std_err[i], w);
}

}  // namespace meso
