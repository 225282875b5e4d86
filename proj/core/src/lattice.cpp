#include "meso/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <string>

#include "meso/errors.hpp"

namespace meso {

namespace {

void check_dimension(int d) {
    if (d < 1 || d > kMaxDim) {
        throw DomainError("lattice dimension must be in [1, " + std::to_string(kMaxDim) + "], got " +
                          std::to_string(d));
    }
}

// Per-axis ranges [first, last] of site offsets for each cut.
std::vector<std::pair<std::int64_t, std::int64_t>> axis_cells(std::int64_t sites, std::int64_t cuts) {
    std::vector<std::pair<std::int64_t, std::int64_t>> ranges;
    std::int64_t current = -1;
    for (std::int64_t t = 0; t < sites; ++t) {
        // site t occupies real position t + 1/2 measured from lower - 1/2
        const std::int64_t m = ((2 * t + 1) * cuts) / (2 * sites);
        if (m != current) {
            ranges.emplace_back(t, t);
            current = m;
        } else {
            ranges.back().second = t;
        }
    }
    return ranges;
}

}  // namespace

LatticeBox::LatticeBox(int dimension, Coord lower, Coord upper, std::optional<BoxProvenance> provenance)
    : dim_(dimension), lower_(lower), upper_(upper), provenance_(std::move(provenance)) {
    check_dimension(dimension);
    for (int k = 0; k < kMaxDim; ++k) {
        if (k >= dim_) {
            lower_[k] = upper_[k] = 0;
        } else if (lower_[k] > upper_[k]) {
            throw DomainError("empty box: lower > upper on axis " + std::to_string(k));
        }
    }
}

LatticeBox LatticeBox::cube(int dimension, std::int64_t origin, std::int64_t sites) {
    if (sites < 1) throw DomainError("cube needs at least one site per axis");
    Coord lo{}, hi{};
    for (int k = 0; k < dimension && k < kMaxDim; ++k) {
        lo[k] = origin;
        hi[k] = origin + sites - 1;
    }
    return LatticeBox(dimension, lo, hi);
}

std::size_t LatticeBox::site_count() const noexcept {
    std::size_t n = 1;
    for (int k = 0; k < dim_; ++k) n *= static_cast<std::size_t>(extent(k));
    return n;
}

std::size_t LatticeBox::stride(int axis) const noexcept {
    std::size_t s = 1;
    for (int k = dim_ - 1; k > axis; --k) s *= static_cast<std::size_t>(extent(k));
    return s;
}

bool LatticeBox::contains(const Coord& site) const noexcept {
    for (int k = 0; k < dim_; ++k) {
        if (site[k] < lower_[k] || site[k] > upper_[k]) return false;
    }
    return true;
}

bool LatticeBox::contains(const LatticeBox& other) const noexcept {
    if (other.dim_ != dim_) return false;
    for (int k = 0; k < dim_; ++k) {
        if (other.lower_[k] < lower_[k] || other.upper_[k] > upper_[k]) return false;
    }
    return true;
}

std::size_t LatticeBox::index_of(const Coord& site) const {
    if (!contains(site)) throw DomainError("site outside box");
    std::size_t idx = 0;
    for (int k = 0; k < dim_; ++k) {
        idx = idx * static_cast<std::size_t>(extent(k)) + static_cast<std::size_t>(site[k] - lower_[k]);
    }
    return idx;
}

Coord LatticeBox::site_at(std::size_t index) const noexcept {
    Coord c{};
    for (int k = dim_ - 1; k >= 0; --k) {
        const auto n = static_cast<std::size_t>(extent(k));
        c[k] = lower_[k] + static_cast<std::int64_t>(index % n);
        index /= n;
    }
    return c;
}

std::int64_t LatticeBox::face_distance(const Coord& site) const noexcept {
    std::int64_t d = std::numeric_limits<std::int64_t>::max();
    for (int k = 0; k < dim_; ++k) {
        d = std::min({d, site[k] - lower_[k], upper_[k] - site[k]});
    }
    return d;
}

LatticeBox make_box(double half_width, int dimension, std::span<const double> offset, double trim) {
    check_dimension(dimension);
    if (!(half_width > 0.0)) throw DomainError("box half-width L must be positive");
    if (!(trim >= 0.0)) throw DomainError("box trim c_L must be non-negative");
    if (!offset.empty() && offset.size() != static_cast<std::size_t>(dimension)) {
        throw DomainError("box offset must have one entry per axis");
    }
    BoxProvenance prov{half_width, std::vector<double>(dimension, 0.0), trim};
    Coord lo{}, hi{};
    for (int k = 0; k < dimension; ++k) {
        const double a = offset.empty() ? 0.0 : offset[k];
        prov.offset[k] = a;
        lo[k] = static_cast<std::int64_t>(std::ceil(-half_width + trim + a));
        hi[k] = static_cast<std::int64_t>(std::floor(half_width - trim + a));
        if (lo[k] > hi[k]) {
            std::ostringstream msg;
            msg << "empty domain: [" << -half_width + trim + a << ", " << half_width - trim + a
                << "] contains no integer on axis " << k;
            throw DomainError(msg.str());
        }
    }
    return LatticeBox(dimension, lo, hi, std::move(prov));
}

void MesoWindow::validate() const {
    if (!(a < 0.0 && b > 0.0)) throw ConfigError("window requires a < 0 < b");
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("window eta must lie in (0, 1]");
    if (!std::isfinite(energy)) throw ConfigError("window energy must be finite");
}

Interval window_interval(const MesoWindow& w, double volume) {
    w.validate();
    if (!(volume >= 1.0)) throw ConfigError("window volume must be >= 1");
    const double scale = std::pow(volume, -w.eta);
    return {w.energy + w.a * scale, w.energy + w.b * scale};
}

std::int64_t cuts_for_edge(std::int64_t sites, double beta) {
    if (beta >= 1.0) return 1;
    const double edge = static_cast<double>(sites - 1);
    const double x = std::pow(edge, 1.0 - beta);
    // Guard ceil against pow overshooting an exact integer by an ulp.
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(x * (1.0 - 1e-12))));
}

BoxPartition partition_box(const LatticeBox& parent, double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("partition beta must lie in (0, 1]");
    BoxPartition part;
    part.parent = parent;
    part.beta = beta;
    const int d = parent.dimension();
    std::array<std::vector<std::pair<std::int64_t, std::int64_t>>, kMaxDim> ranges;
    std::size_t requested = 1;
    for (int k = 0; k < d; ++k) {
        const std::int64_t n = parent.extent(k);
        if (beta < 1.0 && n - 1 < 2) {
            throw DomainError("partition requires edge length 2L >= 2 on every axis");
        }
        const std::int64_t cuts = cuts_for_edge(n, beta);
        part.cuts_per_axis[k] = cuts;
        requested *= static_cast<std::size_t>(cuts);
        ranges[k] = axis_cells(n, cuts);
    }
    std::size_t produced = 1;
    for (int k = 0; k < d; ++k) produced *= ranges[k].size();
    part.dropped_cells = requested - produced;
    if (part.dropped_cells > 0) {
        std::clog << "[meso] partition_box: dropped " << part.dropped_cells
                  << " empty cell(s) (edge shorter than cut count)\n";
    }
    part.cells.reserve(produced);
    std::array<std::size_t, kMaxDim> idx{};
    for (std::size_t c = 0; c < produced; ++c) {
        std::size_t rem = c;
        for (int k = d - 1; k >= 0; --k) {
            idx[k] = rem % ranges[k].size();
            rem /= ranges[k].size();
        }
        Coord lo{}, hi{};
        for (int k = 0; k < d; ++k) {
            lo[k] = parent.lower()[k] + ranges[k][idx[k]].first;
            hi[k] = parent.lower()[k] + ranges[k][idx[k]].second;
        }
        part.cells.emplace_back(d, lo, hi);
    }
    return part;
}

int dyadic_depth(double eta) {
    if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("eta must lie in (0, 1]");
    int j = 1;
    while (!(eta > std::ldexp(1.0, -j))) ++j;
    return j;
}

PartitionTree dyadic_partition(const LatticeBox& root, double eta) {
    if (!(eta > 0.0 && eta <= 0.5)) throw DomainError("dyadic partition requires 0 < eta <= 1/2");
    PartitionTree tree;
    tree.root = root;
    tree.eta = eta;
    tree.depth = dyadic_depth(eta);
    std::vector<LatticeBox> frontier{root};
    for (int level = 1; level < tree.depth; ++level) {
        PartitionTree::Level next;
        for (std::size_t p = 0; p < frontier.size(); ++p) {
            BoxPartition part;
            try {
                part = partition_box(frontier[p], 0.5);
            } catch (const DomainError&) {
                throw DepthExhaustedError("root too small for dyadic depth " + std::to_string(tree.depth));
            }
            for (auto& cell : part.cells) {
                if (cell.site_count() < 2) {
                    throw DepthExhaustedError("dyadic level " + std::to_string(level) +
                                              " would create a cell with fewer than 2 sites");
                }
                next.boxes.push_back(std::move(cell));
                next.parent.push_back(p);
            }
        }
        frontier = next.boxes;
        tree.levels.push_back(std::move(next));
    }
    return tree;
}

SiteSplit interior_boundary_split(const LatticeBox& box, double cutoff) {
    if (!(cutoff >= 0.0)) throw DomainError("interior cutoff must be non-negative");
    SiteSplit split;
    const std::size_t n = box.site_count();
    for (std::size_t i = 0; i < n; ++i) {
        const auto dist = static_cast<double>(box.face_distance(box.site_at(i)));
        (dist > cutoff ? split.interior : split.boundary).push_back(i);
    }
    return split;
}

void to_json(nlohmann::json& j, const LatticeBox& box) {
    const int d = box.dimension();
    j = nlohmann::json{{"dimension", d},
                       {"lower", std::vector<std::int64_t>(box.lower().begin(), box.lower().begin() + d)},
                       {"upper", std::vector<std::int64_t>(box.upper().begin(), box.upper().begin() + d)},
                       {"sites", box.site_count()}};
    if (const auto& p = box.provenance()) {
        j["provenance"] = {{"half_width", p->half_width}, {"offset", p->offset}, {"trim", p->trim}};
    }
}

void from_json(const nlohmann::json& j, LatticeBox& box) {
    const int d = j.at("dimension").get<int>();
    const auto lo = j.at("lower").get<std::vector<std::int64_t>>();
    const auto hi = j.at("upper").get<std::vector<std::int64_t>>();
    if (lo.size() != static_cast<std::size_t>(d) || hi.size() != static_cast<std::size_t>(d)) {
        throw ConfigError("box bounds must have one entry per axis");
    }
    Coord l{}, u{};
    std::copy(lo.begin(), lo.end(), l.begin());
    std::copy(hi.begin(), hi.end(), u.begin());
    std::optional<BoxProvenance> prov;
    if (j.contains("provenance")) {
        const auto& p = j.at("provenance");
        prov = BoxProvenance{p.at("half_width").get<double>(), p.at("offset").get<std::vector<double>>(),
                             p.at("trim").get<double>()};
    }
    box = LatticeBox(d, l, u, std::move(prov));
}

void to_json(nlohmann::json& j, const MesoWindow& w) {
    j = nlohmann::json{{"energy", w.energy}, {"eta", w.eta}, {"a", w.a}, {"b", w.b}};
}

void to_json(nlohmann::json& j, const BoxPartition& p) {
    j = nlohmann::json{{"parent", p.parent}, {"beta", p.beta}, {"cell_count", p.cells.size()},
                       {"dropped_cells", p.dropped_cells}, {"cells", p.cells}};
}

}  // namespace meso
