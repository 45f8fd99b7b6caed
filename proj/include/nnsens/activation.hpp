// Elementwise non-linearities with their linear-region boundaries.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <string_view>

#include "nnsens/common.hpp"

namespace nnsens {

enum class ActivationKind { ReLU, ReLU6, Tanh, HardTanh, HardSigmoid };

inline constexpr std::array<ActivationKind, 5> kAllActivations = {
    ActivationKind::ReLU, ActivationKind::ReLU6, ActivationKind::Tanh, ActivationKind::HardTanh,
    ActivationKind::HardSigmoid};

inline std::string_view to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::ReLU: return "relu";
        case ActivationKind::ReLU6: return "relu6";
        case ActivationKind::Tanh: return "tanh";
        case ActivationKind::HardTanh: return "hardtanh";
        case ActivationKind::HardSigmoid: return "hardsigmoid";
    }
    return "unknown";
}

inline ActivationKind parse_activation(std::string_view name) {
    for (auto kind : kAllActivations)
        if (to_string(kind) == name) return kind;
    throw Error(ErrorKind::Parameter, "unknown activation '" + std::string(name) + "'");
}

/// Tanh is the only smooth kind; it still gets a binary code split at 0.
inline constexpr bool is_piecewise_linear(ActivationKind kind) { return kind != ActivationKind::Tanh; }

/// Region boundaries, strictly increasing. A neuron's code is the index of
/// the half-open interval [b_i, b_{i+1}) holding its preactivation.
inline std::span<const double> region_boundaries(ActivationKind kind) {
    static constexpr std::array<double, 1> relu{0.0};
    static constexpr std::array<double, 2> relu6{0.0, 6.0};
    static constexpr std::array<double, 2> hardtanh{-1.0, 1.0};
    static constexpr std::array<double, 2> hardsigmoid{-0.5, 0.5};
    switch (kind) {
        case ActivationKind::ReLU: return relu;
        case ActivationKind::ReLU6: return relu6;
        case ActivationKind::Tanh: return relu;
        case ActivationKind::HardTanh: return hardtanh;
        case ActivationKind::HardSigmoid: return hardsigmoid;
    }
    return relu;
}

inline int code_alphabet_size(ActivationKind kind) { return static_cast<int>(region_boundaries(kind).size()) + 1; }

template <std::floating_point S>
inline int activation_code(ActivationKind kind, S v) {
    switch (kind) {
        case ActivationKind::ReLU:
        case ActivationKind::Tanh: return v >= S(0) ? 1 : 0;
        case ActivationKind::ReLU6: return v >= S(6) ? 2 : (v >= S(0) ? 1 : 0);
        case ActivationKind::HardTanh: return v >= S(1) ? 2 : (v >= S(-1) ? 1 : 0);
        case ActivationKind::HardSigmoid: return v >= S(0.5) ? 2 : (v >= S(-0.5) ? 1 : 0);
    }
    return 0;
}

template <std::floating_point S>
inline S activation_eval(ActivationKind kind, S v) {
    switch (kind) {
        case ActivationKind::ReLU: return std::max(v, S(0));
        case ActivationKind::ReLU6: return std::min(std::max(v, S(0)), S(6));
        case ActivationKind::Tanh: return std::tanh(v);
        case ActivationKind::HardTanh: return std::min(std::max(v, S(-1)), S(1));
        case ActivationKind::HardSigmoid: return std::min(std::max(v + S(0.5), S(0)), S(1));
    }
    return v;
}

/// Derivative; at a kink it is the slope of the upper piece, matching the
/// half-open code convention.
template <std::floating_point S>
inline S activation_derivative(ActivationKind kind, S v) {
    if (kind == ActivationKind::Tanh) {
        const S t = std::tanh(v);
        return S(1) - t * t;
    }
    // Every piecewise-linear kind has slope 1 on its middle code and 0 elsewhere.
    return activation_code(kind, v) == 1 ? S(1) : S(0);
}

template <typename Derived>
auto activation_eval(ActivationKind kind, const Eigen::MatrixBase<Derived>& v) {
    using S = typename Derived::Scalar;
    return v.unaryExpr([kind](S e) { return activation_eval(kind, e); }).eval();
}

template <typename Derived>
auto activation_derivative(ActivationKind kind, const Eigen::MatrixBase<Derived>& v) {
    using S = typename Derived::Scalar;
    return v.unaryExpr([kind](S e) { return activation_derivative(kind, e); }).eval();
}

/// Gain applied to sqrt(1 / fan_in) by the default initializer.
inline double init_gain(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::ReLU:
        case ActivationKind::ReLU6:
        case ActivationKind::HardSigmoid: return std::sqrt(2.0);
        case ActivationKind::Tanh:
        case ActivationKind::HardTanh: return 1.0;
    }
    return 1.0;
}

}  // namespace nnsens
