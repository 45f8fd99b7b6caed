// Softmax and per-example losses.
#pragma once

#include <string>
#include <string_view>

#include "nnsens/common.hpp"

namespace nnsens {

enum class LossKind { CrossEntropy, L2 };

inline std::string_view to_string(LossKind kind) {
    return kind == LossKind::CrossEntropy ? "cross_entropy" : "l2";
}

inline LossKind parse_loss(std::string_view name) {
    if (name == "cross_entropy" || name == "xent") return LossKind::CrossEntropy;
    if (name == "l2") return LossKind::L2;
    throw Error(ErrorKind::Parameter, "unknown loss '" + std::string(name) + "'");
}

/// Max-subtracted softmax.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
    using S = typename Derived::Scalar;
    Vector<S> e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
}

/// log(sum(exp(v))) without overflow.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
    using S = typename Derived::Scalar;
    const S top = v.maxCoeff();
    return top + std::log((v.array() - top).exp().sum());
}

/// Cross-entropy is -log softmax(logits)[y]; l2 is the squared distance
/// between the logits and the one-hot target.
template <typename Derived>
typename Derived::Scalar loss_eval(const Eigen::MatrixBase<Derived>& logits, int y, LossKind kind) {
    using S = typename Derived::Scalar;
    require(y >= 0 && y < logits.size(), ErrorKind::Label, "label " + std::to_string(y) + " out of range");
    if (kind == LossKind::CrossEntropy) return log_sum_exp(logits) - logits(y);
    S sq = 0;
    for (Index i = 0; i < logits.size(); ++i) {
        const S diff = logits(i) - (i == y ? S(1) : S(0));
        sq += diff * diff;
    }
    return sq;
}

/// d loss / d logits for one example.
template <typename Derived>
Vector<typename Derived::Scalar> loss_logit_gradient(const Eigen::MatrixBase<Derived>& logits, int y, LossKind kind) {
    using S = typename Derived::Scalar;
    Vector<S> g;
    if (kind == LossKind::CrossEntropy) {
        g = softmax(logits);
        g(y) -= S(1);
    } else {
        g = S(2) * logits;
        g(y) -= S(2);
    }
    return g;
}

}  // namespace nnsens
