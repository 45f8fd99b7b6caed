// Independent reference computations used by the tests. Nothing here calls
// into the library's forward/Jacobian code; everything is spelled out with
// plain loops and (where it helps) long double.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "nnsens/nnsens.hpp"

namespace oracle {

using nnsens::ActivationKind;
using LD = long double;
using Vec = std::vector<LD>;

inline LD act(ActivationKind k, LD v) {
    switch (k) {
        case ActivationKind::ReLU: return v > 0 ? v : 0;
        case ActivationKind::ReLU6: return v < 0 ? 0 : (v > 6 ? 6 : v);
        case ActivationKind::Tanh: return std::tanh(v);
        case ActivationKind::HardTanh: return v < -1 ? -1 : (v > 1 ? 1 : v);
        case ActivationKind::HardSigmoid: return v < -0.5L ? 0 : (v > 0.5L ? 1 : v + 0.5L);
    }
    return 0;
}

inline int code(ActivationKind k, LD v) {
    switch (k) {
        case ActivationKind::ReLU:
        case ActivationKind::Tanh: return v >= 0 ? 1 : 0;
        case ActivationKind::ReLU6: return v < 0 ? 0 : (v < 6 ? 1 : 2);
        case ActivationKind::HardTanh: return v < -1 ? 0 : (v < 1 ? 1 : 2);
        case ActivationKind::HardSigmoid: return v < -0.5L ? 0 : (v < 0.5L ? 1 : 2);
    }
    return 0;
}

/// Straight-line evaluation: logits plus every hidden preactivation.
struct Eval {
    Vec logits;
    std::vector<Vec> pre;
};

inline Eval evaluate(const nnsens::Mlp<double>& m, const Vec& x) {
    Eval e;
    Vec h = x;
    const auto& W = m.weights();
    for (std::size_t l = 0; l < W.size(); ++l) {
        Vec z(static_cast<std::size_t>(W[l].rows()), 0.0L);
        for (Eigen::Index r = 0; r < W[l].rows(); ++r) {
            LD s = 0;
            for (Eigen::Index c = 0; c < W[l].cols(); ++c) s += static_cast<LD>(W[l](r, c)) * h[static_cast<std::size_t>(c)];
            z[static_cast<std::size_t>(r)] = s;
        }
        if (l + 1 == W.size()) {
            e.logits = z;
        } else {
            e.pre.push_back(z);
            for (auto& v : z) v = act(m.activation(), v);
            h = z;
        }
    }
    return e;
}

inline Vec to_vec(const Eigen::VectorXd& x) { return Vec(x.data(), x.data() + x.size()); }

inline Vec logits(const nnsens::Mlp<double>& m, const Eigen::VectorXd& x) { return evaluate(m, to_vec(x)).logits; }

inline std::vector<int> codes(const nnsens::Mlp<double>& m, const Eigen::VectorXd& x) {
    std::vector<int> out;
    for (const auto& layer : evaluate(m, to_vec(x)).pre)
        for (LD v : layer) out.push_back(code(m.activation(), v));
    return out;
}

inline Vec softmax(const Vec& f) {
    LD mx = f[0];
    for (LD v : f) mx = std::max(mx, v);
    Vec p(f.size());
    LD s = 0;
    for (std::size_t i = 0; i < f.size(); ++i) s += (p[i] = std::exp(f[i] - mx));
    for (auto& v : p) v /= s;
    return p;
}

/// Central differences of a vector function R^d -> R^n, column by column.
inline Eigen::MatrixXd central_difference(const std::function<Vec(const Eigen::VectorXd&)>& fn, const Eigen::VectorXd& x,
                                          double h) {
    const Vec f0 = fn(x);
    Eigen::MatrixXd J(static_cast<Eigen::Index>(f0.size()), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Eigen::VectorXd xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        const Vec fp = fn(xp), fm = fn(xm);
        for (std::size_t i = 0; i < f0.size(); ++i)
            J(static_cast<Eigen::Index>(i), j) = static_cast<double>((fp[i] - fm[i]) / (2.0L * static_cast<LD>(h)));
    }
    return J;
}

/// Normwise relative error ||A - B||_F / max(||B||_F, floor).
inline double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-12) {
    return (a - b).norm() / std::max(b.norm(), floor);
}

/// Smallest |preactivation - boundary| over all hidden neurons at x.
inline double kink_distance(const nnsens::Mlp<double>& m, const Eigen::VectorXd& x) {
    double best = INFINITY;
    for (const auto& layer : evaluate(m, to_vec(x)).pre)
        for (LD v : layer)
            for (double b : nnsens::region_boundaries(m.activation()))
                best = std::min(best, static_cast<double>(std::fabs(v - b)));
    return best;
}

inline nnsens::Mlp<double> random_net(std::uint64_t seed, int d, int width, int depth, int n, ActivationKind act,
                                      double mult = 1.0) {
    return nnsens::init_network<double>(nnsens::make_widths(d, width, depth, n), act, mult, seed);
}

inline Eigen::VectorXd random_point(std::mt19937_64& rng, int d, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x(i) = normal(rng);
    return x;
}

/// Naive transition count: materialize every code, then compare neighbours.
inline std::int64_t naive_transitions(const nnsens::Mlp<double>& m, const nnsens::Trajectory& t) {
    std::vector<std::vector<int>> all;
    for (Eigen::Index i = 0; i < t.k(); ++i) all.push_back(codes(m, t.point(i)));
    std::int64_t total = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& a = all[i];
        const auto& b = all[(i + 1) % all.size()];
        for (std::size_t j = 0; j < a.size(); ++j) total += std::abs(a[j] - b[j]);
    }
    return total;
}

}  // namespace oracle
