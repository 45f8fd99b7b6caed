// Input-sensitivity metrics: softmax Jacobian norms, linear-region
// transition counts along closed trajectories, a curvature estimate, and
// region maps over planar grids.
#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include "nnsens/common.hpp"
#include "nnsens/mlp.hpp"
#include "nnsens/trajectory.hpp"

namespace nnsens {

/// Frobenius norm of d softmax(f(x)) / dx.
template <typename S>
double jacobian_norm(const Mlp<S>& m, VectorRef<S> x) {
    return static_cast<double>(softmax_input_jacobian(m, x).norm());
}

struct SensitivityReport {
    std::vector<double> per_point_norms;
    double mean_norm = 0;
    Index point_count = 0;
};

/// Jacobian norm at every row of `points` (N x d) and their mean. Summation
/// is sequential in row order.
template <typename S, typename Points>
SensitivityReport mean_jacobian_norm(const Mlp<S>& m, const Points& points) {
    require(points.rows() >= 1, ErrorKind::Parameter, "no points to evaluate");
    SensitivityReport r;
    r.point_count = points.rows();
    r.per_point_norms.reserve(static_cast<std::size_t>(points.rows()));
    double sum = 0;
    for (Index i = 0; i < points.rows(); ++i) {
        const Vector<S> x = points.row(i).transpose().template cast<S>();
        r.per_point_norms.push_back(jacobian_norm(m, x));
        sum += r.per_point_norms.back();
    }
    r.mean_norm = sum / static_cast<double>(points.rows());
    return r;
}

struct TransitionCount {
    std::int64_t total = 0;
    std::vector<std::int64_t> per_neuron;
    std::vector<std::int64_t> per_arc;  // arc i joins samples i and (i + 1) mod k
    Index k_used = 0;
};

/// t = sum_i ||c(z_i) - c(z_{(i+1) mod k})||_1 over the closed trajectory.
/// Codes are streamed in chunks, so memory is O(chunk * neurons).
template <typename S>
TransitionCount count_transitions(const Mlp<S>& m, const Trajectory& t, Index chunk = 256) {
    require(t.k() >= 3, ErrorKind::Sampling, "transition counting needs k >= 3");
    require(t.dim() == m.input_dim(), ErrorKind::Shape, "trajectory dimension does not match the network");
    const std::size_t neurons = static_cast<std::size_t>(m.hidden_neurons());
    TransitionCount out;
    out.k_used = t.k();
    out.per_neuron.assign(neurons, 0);
    out.per_arc.assign(static_cast<std::size_t>(t.k()), 0);

    std::vector<std::uint8_t> first, prev, codes;
    auto accumulate = [&](const std::uint8_t* a, const std::uint8_t* b, Index arc) {
        std::int64_t arc_total = 0;
        for (std::size_t j = 0; j < neurons; ++j) {
            const int diff = std::abs(static_cast<int>(a[j]) - static_cast<int>(b[j]));
            out.per_neuron[j] += diff;
            arc_total += diff;
        }
        out.per_arc[static_cast<std::size_t>(arc)] = arc_total;
        out.total += arc_total;
    };

    for (Index begin = 0; begin < t.k(); begin += chunk) {
        const Index count = std::min(chunk, t.k() - begin);
        region_codes_batch(m, t.template batch<S>(begin, count), codes);
        for (Index j = 0; j < count; ++j) {
            const std::uint8_t* cur = codes.data() + static_cast<std::size_t>(j) * neurons;
            const Index i = begin + j;
            if (i == 0)
                first.assign(cur, cur + neurons);
            else
                accumulate(prev.data(), cur, i - 1);
            prev.assign(cur, cur + neurons);
        }
    }
    accumulate(prev.data(), first.data(), t.k() - 1);
    return out;
}

template <typename S>
double mean_transitions(const Mlp<S>& m, const std::vector<Trajectory>& trajectories) {
    require(!trajectories.empty(), ErrorKind::Parameter, "no trajectories");
    double sum = 0;
    for (const auto& t : trajectories) sum += static_cast<double>(count_transitions(m, t).total);
    return sum / static_cast<double>(trajectories.size());
}

struct SensitivityProfile {
    std::vector<double> norms;                // per sample
    std::vector<std::int64_t> bucket_counts;  // transitions per window of arcs
    Index window = 1;
};

/// Per-sample Jacobian norms plus transitions bucketed into k / window
/// equal index windows (arcs [b*window, (b+1)*window)).
template <typename S>
SensitivityProfile sensitivity_profile(const Mlp<S>& m, const Trajectory& t, Index window) {
    require(window >= 1 && t.k() % window == 0, ErrorKind::Parameter,
            "window " + std::to_string(window) + " does not divide k = " + std::to_string(t.k()));
    SensitivityProfile p;
    p.window = window;
    p.norms.reserve(static_cast<std::size_t>(t.k()));
    for (Index i = 0; i < t.k(); ++i) {
        const Vector<S> x = t.point(i).template cast<S>();
        p.norms.push_back(jacobian_norm(m, x));
    }
    const auto counts = count_transitions(m, t);
    p.bucket_counts.assign(static_cast<std::size_t>(t.k() / window), 0);
    for (Index i = 0; i < t.k(); ++i) p.bucket_counts[static_cast<std::size_t>(i / window)] += counts.per_arc[static_cast<std::size_t>(i)];
    return p;
}

/// 1/2 sum_i ||f'(z_i) - f'(z_{(i+1) mod k})||_F over logit Jacobians.
template <typename S>
double curvature_estimate(const Mlp<S>& m, const Trajectory& t) {
    require(t.dim() == m.input_dim(), ErrorKind::Shape, "trajectory dimension does not match the network");
    const Matrix<S> first = logit_input_jacobian(m, Vector<S>(t.point(0).template cast<S>()));
    Matrix<S> prev = first;
    double sum = 0;
    for (Index i = 1; i <= t.k(); ++i) {
        const Matrix<S> cur = i == t.k() ? first : logit_input_jacobian(m, Vector<S>(t.point(i).template cast<S>()));
        sum += static_cast<double>((cur - prev).norm());
        prev = cur;
    }
    return 0.5 * sum;
}

enum class LayerSelector { LastHidden, All };

struct BoundaryMap {
    int resolution = 0;
    std::vector<int> labels;        // row-major region ids, numbered by first appearance
    std::vector<std::uint8_t> mask;  // 1 where a 4-neighbour has a different code
    int region_count = 0;

    Index boundary_cells() const { return std::accumulate(mask.begin(), mask.end(), Index{0}); }
};

/// Region ids over a plane grid, restricted to the selected hidden layers.
template <typename S>
BoundaryMap boundary_map(const Mlp<S>& m, const PlaneGrid& grid, LayerSelector selector, Index chunk = 256) {
    require(grid.dim() == m.input_dim(), ErrorKind::Shape, "grid dimension does not match the network");
    require(m.hidden_layers() >= 1, ErrorKind::Parameter, "boundary maps need at least one hidden layer");
    const std::size_t neurons = static_cast<std::size_t>(m.hidden_neurons());
    const std::size_t from = selector == LayerSelector::All ? 0 : neurons - static_cast<std::size_t>(m.widths()[m.widths().size() - 2]);

    BoundaryMap out;
    out.resolution = grid.resolution();
    out.labels.resize(static_cast<std::size_t>(grid.size()));
    std::map<std::vector<std::uint8_t>, int> ids;
    std::vector<std::uint8_t> codes;
    for (Index begin = 0; begin < grid.size(); begin += chunk) {
        const Index count = std::min(chunk, grid.size() - begin);
        region_codes_batch(m, grid.template batch<S>(begin, count), codes);
        for (Index j = 0; j < count; ++j) {
            const auto* c = codes.data() + static_cast<std::size_t>(j) * neurons;
            std::vector<std::uint8_t> key(c + from, c + neurons);
            auto [it, inserted] = ids.try_emplace(std::move(key), static_cast<int>(ids.size()));
            out.labels[static_cast<std::size_t>(begin + j)] = it->second;
        }
    }
    out.region_count = static_cast<int>(ids.size());

    const int res = grid.resolution();
    out.mask.assign(out.labels.size(), 0);
    auto at = [&](int r, int c) { return out.labels[static_cast<std::size_t>(r * res + c)]; };
    for (int r = 0; r < res; ++r) {
        for (int c = 0; c < res; ++c) {
            const int here = at(r, c);
            const bool edge = (r > 0 && at(r - 1, c) != here) || (r + 1 < res && at(r + 1, c) != here) ||
                              (c > 0 && at(r, c - 1) != here) || (c + 1 < res && at(r, c + 1) != here);
            out.mask[static_cast<std::size_t>(r * res + c)] = edge ? 1 : 0;
        }
    }
    return out;
}

}  // namespace nnsens
