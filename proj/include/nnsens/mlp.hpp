// Bias-free fully-connected networks: evaluation, region codes, input
// Jacobians, parameter gradients and checkpoints.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "nnsens/activation.hpp"
#include "nnsens/common.hpp"
#include "nnsens/loss.hpp"

namespace nnsens {

/// widths = (d, h_1, ..., h_L, n); weights[l] has shape widths[l+1] x widths[l].
template <typename S>
class Mlp {
public:
    using Scalar = S;

    Mlp() = default;

    Mlp(std::vector<int> widths, ActivationKind activation)
        : widths_(std::move(widths)), activation_(activation) {
        require(widths_.size() >= 2, ErrorKind::Shape, "a network needs at least input and output widths");
        for (int w : widths_) require(w >= 1, ErrorKind::Shape, "layer widths must be positive");
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
            weights_.push_back(Matrix<S>::Zero(widths_[l + 1], widths_[l]));
    }

    Mlp(std::vector<int> widths, ActivationKind activation, std::vector<Matrix<S>> weights)
        : Mlp(std::move(widths), activation) {
        require(weights.size() == weights_.size(), ErrorKind::Shape, "wrong number of weight matrices");
        for (std::size_t l = 0; l < weights.size(); ++l) {
            require(weights[l].rows() == weights_[l].rows() && weights[l].cols() == weights_[l].cols(),
                    ErrorKind::Shape, "weight matrix " + std::to_string(l) + " does not chain");
            require(weights[l].allFinite(), ErrorKind::Numeric, "non-finite weights");
        }
        weights_ = std::move(weights);
    }

    const std::vector<int>& widths() const { return widths_; }
    ActivationKind activation() const { return activation_; }
    const std::vector<Matrix<S>>& weights() const { return weights_; }
    std::vector<Matrix<S>>& weights() { return weights_; }

    int input_dim() const { return widths_.front(); }
    int output_dim() const { return widths_.back(); }
    int hidden_layers() const { return static_cast<int>(widths_.size()) - 2; }
    int hidden_neurons() const {
        int total = 0;
        for (std::size_t l = 1; l + 1 < widths_.size(); ++l) total += widths_[l];
        return total;
    }

    template <typename T>
    Mlp<T> cast() const {
        std::vector<Matrix<T>> w;
        for (const auto& m : weights_) w.push_back(m.template cast<T>());
        return Mlp<T>(widths_, activation_, std::move(w));
    }

private:
    std::vector<int> widths_;
    ActivationKind activation_ = ActivationKind::ReLU;
    std::vector<Matrix<S>> weights_;
};

/// Input width, `depth` hidden layers of `width`, output width.
inline std::vector<int> make_widths(int input_dim, int width, int depth, int n_classes) {
    std::vector<int> w{input_dim};
    for (int i = 0; i < depth; ++i) w.push_back(width);
    w.push_back(n_classes);
    return w;
}

/// Zero-mean normal weights with std = multiplier * gain / sqrt(fan_in),
/// gain^2 = 2 for ReLU, ReLU6, HardSigmoid and 1 for Tanh, HardTanh.
template <typename S = double>
Mlp<S> init_network(const std::vector<int>& widths, ActivationKind activation, double std_multiplier,
                    std::uint64_t seed) {
    require(std_multiplier > 0.0, ErrorKind::Parameter, "std_multiplier must be positive");
    Mlp<S> m(widths, activation);
    std::mt19937_64 rng(mix_seed(seed, 0x696e6974ULL));
    for (auto& w : m.weights()) {
        std::normal_distribution<double> normal(0.0, std_multiplier * init_gain(activation) /
                                                         std::sqrt(static_cast<double>(w.cols())));
        // Row-major fill order, independent of storage order.
        for (Index r = 0; r < w.rows(); ++r)
            for (Index c = 0; c < w.cols(); ++c) w(r, c) = static_cast<S>(normal(rng));
    }
    return m;
}

template <typename S>
struct ForwardTrace {
    std::vector<Vector<S>> preactivations;  // one per hidden layer
    std::vector<Vector<S>> activations;
    Vector<S> logits;
};

template <typename S>
ForwardTrace<S> forward(const Mlp<S>& m, VectorRef<S> x) {
    require(x.size() == m.input_dim(), ErrorKind::Shape,
            "input of size " + std::to_string(x.size()) + " for a network expecting " + std::to_string(m.input_dim()));
    ForwardTrace<S> t;
    Vector<S> h = x;
    const auto& w = m.weights();
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
        t.preactivations.push_back(w[l] * h);
        h = activation_eval(m.activation(), t.preactivations.back());
        t.activations.push_back(h);
    }
    t.logits = w.back() * h;
    return t;
}

template <typename S>
Vector<S> logits(const Mlp<S>& m, VectorRef<S> x) {
    return forward(m, x).logits;
}

/// Column-wise logits for a d x B batch.
template <typename S>
Matrix<S> logits_batch(const Mlp<S>& m, MatrixRef<S> x) {
    require(x.rows() == m.input_dim(), ErrorKind::Shape, "batch rows do not match the input dimension");
    const auto& w = m.weights();
    Matrix<S> h = x;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) h = activation_eval(m.activation(), (w[l] * h).eval());
    return w.back() * h;
}

/// One small integer per hidden neuron, layer-major.
struct RegionCode {
    std::vector<std::uint8_t> codes;

    bool operator==(const RegionCode&) const = default;

    /// L1 distance between two codes of the same network.
    std::int64_t l1_distance(const RegionCode& other) const {
        std::int64_t total = 0;
        for (std::size_t i = 0; i < codes.size(); ++i)
            total += std::abs(static_cast<int>(codes[i]) - static_cast<int>(other.codes[i]));
        return total;
    }
};

namespace detail {

template <typename S, typename Derived>
void append_codes(ActivationKind kind, const Eigen::MatrixBase<Derived>& pre, std::vector<std::uint8_t>& out) {
    for (Index i = 0; i < pre.size(); ++i) {
        const S v = pre(i);
        require(std::isfinite(v), ErrorKind::Numeric, "non-finite preactivation");
        out.push_back(static_cast<std::uint8_t>(activation_code(kind, v)));
    }
}

}  // namespace detail

template <typename S>
RegionCode region_code(const Mlp<S>& m, VectorRef<S> x) {
    const auto t = forward(m, x);
    RegionCode code;
    code.codes.reserve(static_cast<std::size_t>(m.hidden_neurons()));
    for (const auto& pre : t.preactivations) detail::append_codes<S>(m.activation(), pre, code.codes);
    return code;
}

/// Codes for every column of a d x B batch; `out` receives B * hidden_neurons
/// entries, column after column.
template <typename S>
void region_codes_batch(const Mlp<S>& m, MatrixRef<S> x, std::vector<std::uint8_t>& out) {
    require(x.rows() == m.input_dim(), ErrorKind::Shape, "batch rows do not match the input dimension");
    const auto& w = m.weights();
    const Index batch = x.cols();
    const std::size_t neurons = static_cast<std::size_t>(m.hidden_neurons());
    out.assign(neurons * static_cast<std::size_t>(batch), 0);
    Matrix<S> h = x;
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
        Matrix<S> pre = w[l] * h;
        for (Index b = 0; b < batch; ++b) {
            std::uint8_t* dst = out.data() + static_cast<std::size_t>(b) * neurons + offset;
            for (Index i = 0; i < pre.rows(); ++i) {
                const S v = pre(i, b);
                require(std::isfinite(v), ErrorKind::Numeric, "non-finite preactivation");
                dst[i] = static_cast<std::uint8_t>(activation_code(m.activation(), v));
            }
        }
        offset += static_cast<std::size_t>(pre.rows());
        h = activation_eval(m.activation(), pre);
    }
}

/// d logits / d x, the chain product W_out * D_L * W_L ... D_1 * W_1.
template <typename S>
Matrix<S> logit_input_jacobian(const Mlp<S>& m, const ForwardTrace<S>& t) {
    const auto& w = m.weights();
    Matrix<S> jac = w.back();
    for (std::size_t l = w.size() - 1; l-- > 0;) {
        jac.array().rowwise() *= activation_derivative(m.activation(), t.preactivations[l]).transpose().array();
        jac = jac * w[l];
    }
    return jac;
}

template <typename S>
Matrix<S> logit_input_jacobian(const Mlp<S>& m, VectorRef<S> x) {
    return logit_input_jacobian(m, forward(m, x));
}

/// Softmax Jacobian from probabilities and the logit Jacobian:
/// row i is sigma_i (e_i - sigma)^T (d f / d x).
template <typename S>
Matrix<S> softmax_jacobian_from(const Vector<S>& probs, const Matrix<S>& logit_jac) {
    const Vector<S> mixed = logit_jac.transpose() * probs;  // sum_j sigma_j df_j/dx
    Matrix<S> jac = logit_jac;
    jac.rowwise() -= mixed.transpose();
    jac.array().colwise() *= probs.array();
    return jac;
}

template <typename S>
Matrix<S> softmax_input_jacobian(const Mlp<S>& m, VectorRef<S> x) {
    const auto t = forward(m, x);
    return softmax_jacobian_from<S>(softmax(t.logits), logit_input_jacobian(m, t));
}

template <typename S>
struct Gradients {
    std::vector<Matrix<S>> weights;  // same shapes as the network's
    S mean_loss = 0;
};

/// Mean loss and its weight gradients over the batch columns.
template <typename S>
Gradients<S> param_gradients(const Mlp<S>& m, MatrixRef<S> x, std::span<const int> labels,
                             LossKind loss) {
    require(x.cols() >= 1, ErrorKind::Parameter, "empty batch");
    require(static_cast<Index>(labels.size()) == x.cols(), ErrorKind::Shape, "batch and label counts differ");
    require(x.rows() == m.input_dim(), ErrorKind::Shape, "batch rows do not match the input dimension");
    const auto& w = m.weights();
    const Index batch = x.cols();
    const int n = m.output_dim();
    for (int y : labels) require(y >= 0 && y < n, ErrorKind::Label, "label " + std::to_string(y) + " out of range");

    std::vector<Matrix<S>> pre;
    std::vector<Matrix<S>> act{x};
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
        pre.push_back(w[l] * act.back());
        act.push_back(activation_eval(m.activation(), pre.back()));
    }
    const Matrix<S> out = w.back() * act.back();

    Gradients<S> g;
    g.weights.resize(w.size());
    Matrix<S> delta(n, batch);
    S loss_sum = 0;
    for (Index b = 0; b < batch; ++b) {
        const int y = labels[static_cast<std::size_t>(b)];
        loss_sum += loss_eval(out.col(b), y, loss);
        delta.col(b) = loss_logit_gradient(out.col(b), y, loss);
    }
    const S inv_batch = S(1) / static_cast<S>(batch);
    g.mean_loss = loss_sum * inv_batch;
    delta *= inv_batch;

    for (std::size_t l = w.size(); l-- > 0;) {
        g.weights[l] = delta * act[l].transpose();
        if (l == 0) break;
        Matrix<S> back = w[l].transpose() * delta;
        back.array() *= activation_derivative(m.activation(), pre[l - 1]).array();
        delta = std::move(back);
    }
    return g;
}

/// Fraction of rows of `inputs` (N x d) whose argmax logit equals the label.
template <typename S, typename Inputs>
double accuracy(const Mlp<S>& m, const Inputs& inputs, std::span<const int> labels, Index chunk = 512) {
    Index correct = 0;
    for (Index start = 0; start < inputs.rows(); start += chunk) {
        const Index count = std::min(chunk, inputs.rows() - start);
        const Matrix<S> x = inputs.middleRows(start, count).transpose().template cast<S>();
        const Matrix<S> out = logits_batch(m, x);
        for (Index b = 0; b < count; ++b) {
            Index arg = 0;
            out.col(b).maxCoeff(&arg);
            if (arg == labels[static_cast<std::size_t>(start + b)]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(inputs.rows());
}

// Checkpoint layout (all integers little-endian uint32):
//   8 bytes  magic "NNSCKPT\0"
//   version (1), scalar byte width (4 or 8), activation id, layer-width count W
//   W widths
//   for each weight matrix in order: rows * cols IEEE-754 values, row-major,
//   little-endian, at the declared scalar width.

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                       static_cast<char>(v >> 24)};
    out.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require(static_cast<bool>(in), ErrorKind::Format, "truncated checkpoint");
    return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
}

template <typename T, typename U>
void put_le(std::ostream& out, T v) {
    U bits;
    std::memcpy(&bits, &v, sizeof v);
    char b[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>(bits >> (8 * i));
    out.write(b, sizeof(U));
}

template <typename T, typename U>
T get_le(std::istream& in) {
    unsigned char b[sizeof(U)];
    in.read(reinterpret_cast<char*>(b), sizeof(U));
    require(static_cast<bool>(in), ErrorKind::Format, "truncated checkpoint payload");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(b[i]) << (8 * i);
    T v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

inline constexpr char kCheckpointMagic[8] = {'N', 'N', 'S', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace detail

template <typename S>
void save_checkpoint(const Mlp<S>& m, const std::string& path) {
    static_assert(sizeof(S) == 4 || sizeof(S) == 8);
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
    out.write(detail::kCheckpointMagic, 8);
    detail::put_u32(out, detail::kCheckpointVersion);
    detail::put_u32(out, sizeof(S));
    detail::put_u32(out, static_cast<std::uint32_t>(m.activation()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.widths().size()));
    for (int w : m.widths()) detail::put_u32(out, static_cast<std::uint32_t>(w));
    using Bits = std::conditional_t<sizeof(S) == 8, std::uint64_t, std::uint32_t>;
    for (const auto& w : m.weights())
        for (Index r = 0; r < w.rows(); ++r)
            for (Index c = 0; c < w.cols(); ++c) detail::put_le<S, Bits>(out, w(r, c));
    require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path);
}

/// Loads a checkpoint of either precision and converts to S.
template <typename S>
Mlp<S> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    require(in && std::memcmp(magic, detail::kCheckpointMagic, 8) == 0, ErrorKind::Format,
            path + " is not a network checkpoint");
    const std::uint32_t version = detail::get_u32(in);
    require(version == detail::kCheckpointVersion, ErrorKind::Format,
            "unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t scalar_bytes = detail::get_u32(in);
    require(scalar_bytes == 4 || scalar_bytes == 8, ErrorKind::Format, "bad scalar width in checkpoint");
    const std::uint32_t act = detail::get_u32(in);
    require(act < kAllActivations.size(), ErrorKind::Format, "bad activation id in checkpoint");
    const std::uint32_t count = detail::get_u32(in);
    require(count >= 2 && count < 4096, ErrorKind::Format, "bad layer count in checkpoint");
    std::vector<int> widths;
    for (std::uint32_t i = 0; i < count; ++i) widths.push_back(static_cast<int>(detail::get_u32(in)));
    Mlp<S> m(widths, static_cast<ActivationKind>(act));
    for (auto& w : m.weights())
        for (Index r = 0; r < w.rows(); ++r)
            for (Index c = 0; c < w.cols(); ++c)
                w(r, c) = scalar_bytes == 8 ? static_cast<S>(detail::get_le<double, std::uint64_t>(in))
                                            : static_cast<S>(detail::get_le<float, std::uint32_t>(in));
    return m;
}

}  // namespace nnsens
