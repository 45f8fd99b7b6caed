// Optimizers, learning-rate schedule and the minibatch training loop.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nnsens/common.hpp"
#include "nnsens/data.hpp"
#include "nnsens/loss.hpp"
#include "nnsens/mlp.hpp"

namespace nnsens {

enum class OptimizerKind { SGD, Momentum, Adam, RMSProp };

inline std::string_view to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::SGD: return "sgd";
        case OptimizerKind::Momentum: return "momentum";
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::RMSProp: return "rmsprop";
    }
    return "unknown";
}

inline OptimizerKind parse_optimizer(std::string_view name) {
    for (auto kind : {OptimizerKind::SGD, OptimizerKind::Momentum, OptimizerKind::Adam, OptimizerKind::RMSProp})
        if (to_string(kind) == name) return kind;
    throw Error(ErrorKind::Parameter, "unknown optimizer '" + std::string(name) + "'");
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Momentum;
    double learning_rate = 0.005;
    int batch_size = 256;              // 0 means the full training set
    long total_steps = 1000;
    double decay_factor = 0.1;
    long decay_interval_steps = 0;     // 0 resolves to 500 epochs' worth of steps
    double momentum_coeff = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::optional<double> epsilon;     // unset: 1e-8 for Adam, 1e-10 for RMSProp
    double rms_decay = 0.9;

    static constexpr int kFullBatch = 0;

    double effective_epsilon() const {
        if (epsilon) return *epsilon;
        return kind == OptimizerKind::RMSProp ? 1e-10 : 1e-8;
    }

    void validate() const {
        require(learning_rate > 0.0, ErrorKind::Parameter, "learning_rate must be positive");
        require(batch_size >= 0, ErrorKind::Parameter, "batch_size must be positive or FULL");
        require(total_steps >= 0, ErrorKind::Parameter, "total_steps must be non-negative");
        require(momentum_coeff >= 0.0 && momentum_coeff < 1.0, ErrorKind::Parameter, "momentum_coeff must lie in [0, 1)");
        require(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0, ErrorKind::Parameter,
                "beta1 and beta2 must lie in (0, 1)");
        require(rms_decay > 0.0 && rms_decay < 1.0, ErrorKind::Parameter, "rms_decay must lie in (0, 1)");
        require(effective_epsilon() > 0.0, ErrorKind::Parameter, "epsilon must be positive");
    }
};

inline long steps_per_epoch(const OptimizerConfig& cfg, Index n_train) {
    const Index batch = cfg.batch_size == OptimizerConfig::kFullBatch ? n_train : std::min<Index>(cfg.batch_size, n_train);
    return static_cast<long>((n_train + batch - 1) / batch);
}

/// Fills in the default decay interval: 500 epochs expressed in steps.
inline OptimizerConfig resolve_schedule(OptimizerConfig cfg, Index n_train) {
    if (cfg.decay_interval_steps == 0) cfg.decay_interval_steps = 500 * steps_per_epoch(cfg, n_train);
    return cfg;
}

/// learning_rate * decay_factor^floor(step / decay_interval_steps).
inline double lr_at(long step, const OptimizerConfig& cfg) {
    require(cfg.decay_interval_steps > 0, ErrorKind::Parameter, "decay_interval_steps must be positive");
    require(step >= 0, ErrorKind::Parameter, "negative step");
    return cfg.learning_rate * std::pow(cfg.decay_factor, static_cast<double>(step / cfg.decay_interval_steps));
}

template <typename S>
struct OptimizerState {
    std::vector<Matrix<S>> first;   // velocity (Momentum), m (Adam), mean square (RMSProp)
    std::vector<Matrix<S>> second;  // v (Adam)

    explicit OptimizerState(const Mlp<S>& m) {
        for (const auto& w : m.weights()) {
            first.push_back(Matrix<S>::Zero(w.rows(), w.cols()));
            second.push_back(Matrix<S>::Zero(w.rows(), w.cols()));
        }
    }
};

/// One update of `net` in place. `step` is zero-based.
template <typename S>
void optimizer_step(Mlp<S>& net, OptimizerState<S>& state, const std::vector<Matrix<S>>& grads,
                    const OptimizerConfig& cfg, long step) {
    auto& weights = net.weights();
    require(grads.size() == weights.size() && state.first.size() == weights.size(), ErrorKind::Shape,
            "optimizer state does not match the network");
    for (std::size_t l = 0; l < grads.size(); ++l) {
        require(grads[l].rows() == weights[l].rows() && grads[l].cols() == weights[l].cols(), ErrorKind::Shape,
                "gradient shape mismatch");
        require(grads[l].allFinite(), ErrorKind::Numeric, "non-finite gradient at step " + std::to_string(step));
    }
    const S lr = static_cast<S>(lr_at(step, cfg));
    const S eps = static_cast<S>(cfg.effective_epsilon());
    for (std::size_t l = 0; l < grads.size(); ++l) {
        auto& w = weights[l];
        const auto& g = grads[l];
        switch (cfg.kind) {
            case OptimizerKind::SGD:
                w -= lr * g;
                break;
            case OptimizerKind::Momentum:
                state.first[l] = static_cast<S>(cfg.momentum_coeff) * state.first[l] + g;
                w -= lr * state.first[l];
                break;
            case OptimizerKind::Adam: {
                const S b1 = static_cast<S>(cfg.beta1);
                const S b2 = static_cast<S>(cfg.beta2);
                const double t = static_cast<double>(step + 1);
                const S lr_t = static_cast<S>(lr_at(step, cfg) * std::sqrt(1.0 - std::pow(cfg.beta2, t)) /
                                              (1.0 - std::pow(cfg.beta1, t)));
                state.first[l] = b1 * state.first[l] + (S(1) - b1) * g;
                state.second[l] = b2 * state.second[l] + (S(1) - b2) * g.cwiseAbs2();
                w.array() -= lr_t * state.first[l].array() / (state.second[l].array().sqrt() + eps);
                break;
            }
            case OptimizerKind::RMSProp: {
                const S rho = static_cast<S>(cfg.rms_decay);
                state.first[l] = rho * state.first[l] + (S(1) - rho) * g.cwiseAbs2();
                w.array() -= lr * g.array() / (state.first[l].array().sqrt() + eps);
                break;
            }
        }
    }
}

template <typename S>
struct TrainOutcome {
    Mlp<S> network;
    double train_accuracy = 0;
    double test_accuracy = 0;
    double generalization_gap = 0;
    long steps_run = 0;
    std::vector<double> loss_history;  // mean minibatch loss per step

    bool fits_training_set() const { return train_accuracy == 1.0; }
};

/// Visiting order of the training set for one epoch; a pure function of
/// (seed, epoch).
inline std::vector<Index> epoch_order(Index n, std::uint64_t seed, long epoch) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(mix_seed(seed, 0x73687566ULL, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

/// Runs cfg.total_steps minibatch steps from `initial`. Accuracies are
/// measured on the canonical (un-augmented) sets.
template <typename S>
TrainOutcome<S> train(const Mlp<S>& initial, const Dataset& train_ds, const Dataset& test_ds,
                      const OptimizerConfig& config, LossKind loss, const std::optional<AugmentConfig>& aug,
                      std::uint64_t seed) {
    config.validate();
    train_ds.validate();
    test_ds.validate();
    require(train_ds.dim() == initial.input_dim() && test_ds.dim() == initial.input_dim(), ErrorKind::Shape,
            "dataset dimension does not match the network input");
    require(train_ds.n_classes <= initial.output_dim(), ErrorKind::Label, "more classes than network outputs");
    if (aug) aug->validate();

    const OptimizerConfig cfg = resolve_schedule(config, train_ds.size());
    const Index n = train_ds.size();
    const Index batch = cfg.batch_size == OptimizerConfig::kFullBatch ? n : std::min<Index>(cfg.batch_size, n);
    const long per_epoch = steps_per_epoch(cfg, n);

    TrainOutcome<S> out{initial};
    OptimizerState<S> state(out.network);
    out.loss_history.reserve(static_cast<std::size_t>(cfg.total_steps));
    std::vector<Index> order;
    Matrix<S> x;
    std::vector<int> y;
    for (long step = 0; step < cfg.total_steps; ++step) {
        const long epoch = step / per_epoch;
        const long pos = step % per_epoch;
        if (pos == 0) order = epoch_order(n, seed, epoch);
        const Index begin = pos * batch;
        const Index count = std::min(batch, n - begin);
        x.resize(train_ds.dim(), count);
        y.resize(static_cast<std::size_t>(count));
        std::mt19937_64 aug_rng(mix_seed(seed, 0x61756721ULL, static_cast<std::uint64_t>(step)));
        for (Index b = 0; b < count; ++b) {
            const Index row = order[static_cast<std::size_t>(begin + b)];
            if (aug)
                x.col(b) = augment(train_ds.inputs.row(row).transpose(), *aug, aug_rng).template cast<S>();
            else
                x.col(b) = train_ds.inputs.row(row).transpose().template cast<S>();
            y[static_cast<std::size_t>(b)] = train_ds.labels[static_cast<std::size_t>(row)];
        }
        const Gradients<S> g = param_gradients(out.network, x, y, loss);
        if (!std::isfinite(static_cast<double>(g.mean_loss)))
            throw Error(ErrorKind::Training, "loss diverged at step " + std::to_string(step));
        try {
            optimizer_step(out.network, state, g.weights, cfg, step);
        } catch (const Error& e) {
            throw Error(ErrorKind::Training, std::string(e.what()) + " (step " + std::to_string(step) + ")");
        }
        out.loss_history.push_back(static_cast<double>(g.mean_loss));
        out.steps_run = step + 1;
    }
    out.train_accuracy = accuracy(out.network, train_ds.inputs, train_ds.labels);
    out.test_accuracy = accuracy(out.network, test_ds.inputs, test_ds.labels);
    out.generalization_gap = out.train_accuracy - out.test_accuracy;
    return out;
}

}  // namespace nnsens
