// Relations between per-point cross-entropy loss and softmax Jacobian
// norms, under the assumption that every logit gradient has squared norm
// close to M = E||df/dx||_F^2 / n.
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "nnsens/common.hpp"
#include "nnsens/data.hpp"
#include "nnsens/loss.hpp"
#include "nnsens/mlp.hpp"

namespace nnsens {

struct BoundsContext {
    double M = 0;
    int n = 0;
};

/// M = mean over rows of `points` of ||d logits / dx||_F^2 / n.
template <typename S, typename Points>
BoundsContext estimate_M(const Mlp<S>& m, const Points& points) {
    require(points.rows() >= 1, ErrorKind::Parameter, "no points to estimate M from");
    CompensatedSum sum;
    for (Index i = 0; i < points.rows(); ++i) {
        const Vector<S> x = points.row(i).transpose().template cast<S>();
        sum.add(static_cast<double>(logit_input_jacobian(m, x).squaredNorm()));
    }
    const int n = m.output_dim();
    return {sum.value() / static_cast<double>(points.rows()) / static_cast<double>(n), n};
}

/// lhs = ||J_y||^2 and the diagonal expansion
///   rhs = sigma_y^2 [ (1 - sigma_y)^2 ||df_y/dx||^2 + sum_{j != y} sigma_j^2 ||df_j/dx||^2 ].
/// The two agree only when the logit gradients are mutually orthogonal; in
/// general lhs = rhs + target_row_cross_terms(...).
template <typename S>
std::pair<double, double> target_row_identity(const Mlp<S>& m, VectorRef<S> x, int y) {
    require(y >= 0 && y < m.output_dim(), ErrorKind::Label, "label " + std::to_string(y) + " out of range");
    const auto t = forward(m, x);
    const Vector<S> probs = softmax(t.logits);
    const Matrix<S> logit_jac = logit_input_jacobian(m, t);
    const Matrix<S> jac = softmax_jacobian_from<S>(probs, logit_jac);
    const double lhs = static_cast<double>(jac.row(y).squaredNorm());

    const double sy = static_cast<double>(probs(y));
    double inner = (1.0 - sy) * (1.0 - sy) * static_cast<double>(logit_jac.row(y).squaredNorm());
    for (Index j = 0; j < probs.size(); ++j) {
        if (j == y) continue;
        const double sj = static_cast<double>(probs(j));
        inner += sj * sj * static_cast<double>(logit_jac.row(j).squaredNorm());
    }
    return {lhs, sy * sy * inner};
}

/// sigma_y^2 sum_{j != k} c_j c_k <df_j/dx, df_k/dx> with c = e_y - sigma:
/// the off-diagonal part of ||J_y||^2 that the diagonal expansion omits.
template <typename S>
double target_row_cross_terms(const Mlp<S>& m, VectorRef<S> x, int y) {
    require(y >= 0 && y < m.output_dim(), ErrorKind::Label, "label " + std::to_string(y) + " out of range");
    const auto t = forward(m, x);
    const Vector<double> probs = softmax(t.logits).template cast<double>();
    const Matrix<double> g = logit_input_jacobian(m, t).template cast<double>();
    Vector<double> c = -probs;
    c(y) += 1.0;
    const Matrix<double> gram = g * g.transpose();
    double cross = 0;
    for (Index j = 0; j < c.size(); ++j)
        for (Index k = 0; k < c.size(); ++k)
            if (j != k) cross += c(j) * c(k) * gram(j, k);
    return probs(y) * probs(y) * cross;
}

/// Approximate envelope of ||J_y||_2 in terms of the loss l:
///   sqrt(nM/(n-1)) e^-l (1 - e^-l)  <~  ||J_y||  <~  sqrt(2M) e^-l (1 - e^-l).
inline std::pair<double, double> jy_bounds(double loss, const BoundsContext& ctx) {
    require(ctx.n >= 2, ErrorKind::Parameter, "bounds need at least two classes");
    require(loss >= 0.0, ErrorKind::Parameter, "loss must be non-negative");
    require(ctx.M >= 0.0, ErrorKind::Parameter, "M must be non-negative");
    const double p = std::exp(-loss);
    const double shape = p * (1.0 - p);
    const double n = ctx.n;
    return {std::sqrt(n * ctx.M / (n - 1.0)) * shape, std::sqrt(2.0 * ctx.M) * shape};
}

/// ||J||_F in the maximum-entropy case (all wrong classes equally likely):
///   sqrt(M)/(n-1) (1 - e^-l) sqrt(n^2 e^-2l + n - 2).
inline double full_norm_approx(double loss, const BoundsContext& ctx) {
    require(ctx.n >= 2, ErrorKind::Parameter, "bounds need at least two classes");
    require(loss >= 0.0, ErrorKind::Parameter, "loss must be non-negative");
    const double p = std::exp(-loss);
    const double n = ctx.n;
    return std::sqrt(ctx.M) / (n - 1.0) * (1.0 - p) * std::sqrt(n * n * p * p + n - 2.0);
}

struct PointBounds {
    Index point_id = 0;
    int label = 0;
    int predicted = 0;
    double loss = 0;         // cross-entropy
    double jy_actual = 0;    // ||J_y||_2
    double full_actual = 0;  // ||J||_F
    double jy_lower = 0;
    double jy_upper = 0;
    double full_lower = 0;
    double full_approx = 0;

    bool correct() const { return label == predicted; }
};

struct PointReport {
    BoundsContext ctx;
    std::vector<PointBounds> rows;
};

/// One row per test point; M is estimated once over the same points.
template <typename S>
PointReport per_point_report(const Mlp<S>& m, const Dataset& testset) {
    testset.validate();
    require(testset.dim() == m.input_dim(), ErrorKind::Shape, "dataset dimension does not match the network");
    PointReport report;
    report.ctx = estimate_M(m, testset.inputs);
    report.rows.reserve(static_cast<std::size_t>(testset.size()));
    for (Index i = 0; i < testset.size(); ++i) {
        const Vector<S> x = testset.inputs.row(i).transpose().template cast<S>();
        const int y = testset.labels[static_cast<std::size_t>(i)];
        const auto t = forward(m, x);
        const Vector<S> probs = softmax(t.logits);
        const Matrix<S> jac = softmax_jacobian_from<S>(probs, logit_input_jacobian(m, t));

        PointBounds row;
        row.point_id = i;
        row.label = y;
        Index arg = 0;
        t.logits.maxCoeff(&arg);
        row.predicted = static_cast<int>(arg);
        row.loss = std::max(0.0, static_cast<double>(loss_eval(t.logits, y, LossKind::CrossEntropy)));
        row.jy_actual = static_cast<double>(jac.row(y).norm());
        row.full_actual = static_cast<double>(jac.norm());
        std::tie(row.jy_lower, row.jy_upper) = jy_bounds(row.loss, report.ctx);
        row.full_lower = row.jy_lower;
        row.full_approx = full_norm_approx(row.loss, report.ctx);
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace nnsens
