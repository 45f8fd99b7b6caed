// Config-driven experiment drivers. Every study is deterministic in
// (config, seeds): grid cells run on a worker pool but results are merged
// in cell order.
#pragma once

#include <array>
#include <atomic>
#include <exception>
#include <filesystem>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "nnsens/bounds.hpp"
#include "nnsens/data.hpp"
#include "nnsens/harness/config.hpp"
#include "nnsens/harness/csv.hpp"
#include "nnsens/mlp.hpp"
#include "nnsens/sensitivity.hpp"
#include "nnsens/train.hpp"
#include "nnsens/trajectory.hpp"

namespace nnsens::harness {

/// Serialized progress messages; a null stream silences them.
class Log {
public:
    explicit Log(std::ostream* out = nullptr) : out_(out) {}
    void operator()(const std::string& msg) const {
        if (!out_) return;
        std::lock_guard lock(mutex_);
        *out_ << msg << '\n';
        out_->flush();
    }

private:
    std::ostream* out_;
    mutable std::mutex mutex_;
};

/// Runs body(i) for i in [0, n) on `jobs` threads. The first failure in
/// index order is rethrown after all workers finish.
template <typename Body>
void parallel_for(Index n, int jobs, Body body) {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    auto run = [&](Index i) {
        try {
            body(i);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    };
    if (jobs <= 1 || n <= 1) {
        for (Index i = 0; i < n; ++i) run(i);
    } else {
        std::atomic<Index> next{0};
        std::vector<std::thread> workers;
        for (int w = 0; w < std::min<Index>(jobs, n); ++w)
            workers.emplace_back([&] {
                for (Index i = next++; i < n; i = next++) run(i);
            });
        for (auto& t : workers) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct Datasets {
    Dataset train;
    Dataset test;
};

/// Loads (or synthesizes), standardizes per example, and truncates to the
/// configured leading subsets.
inline Datasets load_datasets(const DatasetSpec& spec) {
    Datasets out;
    if (spec.source == "synthetic") {
        const Dataset all = synthetic_blobs(2 * spec.blobs_per_class, spec.blobs_dim, spec.blobs_classes,
                                            spec.blobs_separation, spec.blobs_seed);
        const Index half = all.size() / 2;
        out.train = slice(all, 0, half);
        out.test = slice(all, half, all.size() - half);
    } else {
        out.train = load_idx(spec.train_images, spec.train_labels);
        out.test = load_idx(spec.test_images, spec.test_labels);
        out.test.n_classes = out.train.n_classes = std::max(out.train.n_classes, out.test.n_classes);
    }
    if (spec.train_subset > 0 && spec.train_subset < out.train.size()) out.train = slice(out.train, 0, spec.train_subset);
    if (spec.test_subset > 0 && spec.test_subset < out.test.size()) out.test = slice(out.test, 0, spec.test_subset);
    standardize(out.train);
    standardize(out.test);
    return out;
}

template <typename S>
constexpr std::string_view precision_name() {
    return sizeof(S) == 8 ? "f64" : "f32";
}

inline std::vector<std::string> hyper_header() {
    return {"cell", "width", "depth", "activation", "std_multiplier", "optimizer", "learning_rate", "batch_size",
            "total_steps", "decay_factor", "decay_interval_steps", "loss", "augment", "seed", "precision",
            "train_size", "test_size"};
}

template <typename S>
CsvRow hyper_row(const GridCell& cell, const std::string& seed, const ExperimentSpec& spec, const Datasets& data,
                 std::optional<ActivationKind> activation = std::nullopt, std::optional<int> batch = std::nullopt,
                 std::optional<bool> augmented = std::nullopt) {
    const OptimizerConfig opt = resolve_schedule(cell.optimizer, data.train.size());
    const int b = batch.value_or(opt.batch_size);
    CsvRow r;
    r.add(cell.index)
        .add(cell.width)
        .add(cell.depth)
        .add(to_string(activation.value_or(cell.activation)))
        .add(cell.std_multiplier)
        .add(to_string(opt.kind))
        .add(opt.learning_rate)
        .add(b == OptimizerConfig::kFullBatch ? std::string("full") : std::to_string(b))
        .add(opt.total_steps)
        .add(opt.decay_factor)
        .add(opt.decay_interval_steps)
        .add(to_string(spec.loss))
        .add(augmented.value_or(spec.augment.has_value()))
        .add(seed)
        .add(precision_name<S>())
        .add(data.train.size())
        .add(data.test.size());
    return r;
}

/// Seeds of a seed-averaged row, joined with ';'.
inline std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
    std::string out;
    for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? ";" : "") + std::to_string(seeds[i]);
    return out;
}

inline std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

/// Trains a fresh network for one grid cell; init and shuffling follow `seed`.
template <typename S>
TrainOutcome<S> train_cell(const GridCell& cell, std::uint64_t seed, const Dataset& train_ds, const Dataset& test_ds,
                           LossKind loss, const std::optional<AugmentConfig>& aug) {
    const auto widths = make_widths(static_cast<int>(train_ds.dim()), cell.width, cell.depth, train_ds.n_classes);
    const Mlp<S> net = init_network<S>(widths, cell.activation, cell.std_multiplier, seed);
    return train(net, train_ds, test_ds, cell.optimizer, loss, aug, seed);
}

/// Augmentation settings with the image shape taken from the dataset.
inline std::optional<AugmentConfig> augment_for(const std::optional<AugmentConfig>& cfg, const Dataset& ds) {
    if (!cfg) return std::nullopt;
    AugmentConfig a = *cfg;
    if (ds.image_width > 0) {
        a.image_width = ds.image_width;
        a.image_height = ds.image_height;
    }
    return a;
}

/// Translation loops around the leading test images, or random ellipses
/// when the data are not images.
inline std::vector<Trajectory> transition_trajectories(const Dataset& test, const MeasureSpec& ms) {
    std::vector<Trajectory> out;
    const Index count = std::min(ms.transition_points, test.size());
    for (Index i = 0; i < count; ++i) {
        if (test.image_width > 0)
            out.push_back(translation_trajectory(test.inputs.row(i).transpose(), test.image_width, test.image_height,
                                                 ms.translation_k));
        else
            out.push_back(random_ellipse(test.dim(), ms.translation_k, static_cast<std::uint64_t>(i)));
    }
    return out;
}

struct CellMetrics {
    double mean_jacobian_norm = 0;
    double mean_transitions = 0;
};

/// Jacobian norm over the fixed leading test subset and transitions over
/// translation trajectories. Neither depends on the seed.
template <typename S>
CellMetrics measure_network(const Mlp<S>& net, const Dataset& test, const MeasureSpec& ms) {
    CellMetrics m;
    const Index count = std::min(ms.jacobian_points, test.size());
    m.mean_jacobian_norm = mean_jacobian_norm(net, test.inputs.topRows(count)).mean_norm;
    const auto loops = transition_trajectories(test, ms);
    m.mean_transitions = loops.empty() ? 0.0 : mean_transitions(net, loops);
    return m;
}

// ---------------------------------------------------------------------------
// Trajectory study

/// Anchors and trajectory of one kind for one seed.
inline Trajectory make_study_trajectory(TrajectoryKind kind, const Dataset& train, Index k, std::uint64_t seed) {
    const auto stream = static_cast<std::uint64_t>(kind);
    if (kind == TrajectoryKind::RandomEllipse) return random_ellipse(train.dim(), k, mix_seed(seed, 0x7261ULL, stream));

    std::mt19937_64 rng(mix_seed(seed, 0x616e6368ULL, stream));
    std::vector<Index> picks;
    if (kind == TrajectoryKind::DifferentClassEllipse) {
        std::vector<int> classes;
        for (int c = 0; c < train.n_classes; ++c)
            if (!indices_of_class(train, c).empty()) classes.push_back(c);
        require(classes.size() >= 3, ErrorKind::Data, "fewer than three classes available for anchors");
        std::shuffle(classes.begin(), classes.end(), rng);
        for (int i = 0; i < 3; ++i) {
            const auto members = indices_of_class(train, classes[static_cast<std::size_t>(i)]);
            std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
            picks.push_back(members[pick(rng)]);
        }
    } else {
        std::vector<int> classes;
        for (int c = 0; c < train.n_classes; ++c)
            if (indices_of_class(train, c).size() >= 3) classes.push_back(c);
        require(!classes.empty(), ErrorKind::Data, "no class has the three examples needed for same-class anchors");
        std::uniform_int_distribution<std::size_t> pick_class(0, classes.size() - 1);
        auto members = indices_of_class(train, classes[pick_class(rng)]);
        std::shuffle(members.begin(), members.end(), rng);
        picks.assign(members.begin(), members.begin() + 3);
    }
    return data_fitted_ellipse(train.inputs.row(picks[0]).transpose(), train.inputs.row(picks[1]).transpose(),
                               train.inputs.row(picks[2]).transpose(), k);
}

inline std::vector<std::string> trajectory_study_header() {
    return concat(hyper_header(), {"trajectory", "bucket", "index_begin", "index_end", "contains_anchor",
                                   "mean_jacobian_norm", "mean_transitions", "seeds", "fit_seeds"});
}

template <typename S>
CsvTable run_trajectory_study(const ExperimentSpec& spec, const Datasets& data, const Log& log = Log{}) {
    const auto cells = expand_grid(spec);
    const auto& ms = spec.measure;
    const Index buckets = ms.trajectory_k / ms.window;
    const std::size_t n_kinds = ms.trajectory_kinds.size();
    const std::size_t n_seeds = spec.seeds.size();
    const auto aug = augment_for(spec.augment, data.train);

    struct SeedResult {
        bool fit = false;
        std::vector<SensitivityProfile> profiles;  // per kind
        std::vector<std::vector<Index>> anchors;
    };
    std::vector<SeedResult> results(cells.size() * n_seeds);
    parallel_for(static_cast<Index>(results.size()), spec.jobs, [&](Index job) {
        const auto& cell = cells[static_cast<std::size_t>(job) / n_seeds];
        const auto seed = spec.seeds[static_cast<std::size_t>(job) % n_seeds];
        const auto outcome = train_cell<S>(cell, seed, data.train, data.test, spec.loss, aug);
        auto& r = results[static_cast<std::size_t>(job)];
        r.fit = outcome.fits_training_set();
        for (auto kind : ms.trajectory_kinds) {
            const auto t = make_study_trajectory(kind, data.train, ms.trajectory_k, seed);
            r.profiles.push_back(sensitivity_profile(outcome.network, t, ms.window));
            r.anchors.push_back(t.anchor_indices());
        }
        log("trajectory study: cell " + std::to_string(cell.index) + " seed " + std::to_string(seed) +
            " train_acc " + format_number(outcome.train_accuracy));
    });

    CsvTable table{trajectory_study_header(), {}};
    for (const auto& cell : cells) {
        const std::size_t base = static_cast<std::size_t>(cell.index) * n_seeds;
        int fit = 0;
        for (std::size_t s = 0; s < n_seeds; ++s) fit += results[base + s].fit ? 1 : 0;
        for (std::size_t kk = 0; kk < n_kinds; ++kk) {
            for (Index b = 0; b < buckets; ++b) {
                const Index begin = b * ms.window, end = begin + ms.window;
                double norm_sum = 0, trans_sum = 0;
                bool anchor = false;
                for (std::size_t s = 0; s < n_seeds; ++s) {
                    const auto& p = results[base + s].profiles[kk];
                    double bucket_norm = 0;
                    for (Index i = begin; i < end; ++i) bucket_norm += p.norms[static_cast<std::size_t>(i)];
                    norm_sum += bucket_norm / static_cast<double>(ms.window);
                    trans_sum += static_cast<double>(p.bucket_counts[static_cast<std::size_t>(b)]);
                    for (Index a : results[base + s].anchors[kk]) anchor = anchor || (a >= begin && a < end);
                }
                CsvRow row = hyper_row<S>(cell, join_seeds(spec.seeds), spec, data);
                CsvRow tail;
                tail.add(to_string(ms.trajectory_kinds[kk]))
                    .add(b)
                    .add(begin)
                    .add(end)
                    .add(anchor)
                    .add(norm_sum / static_cast<double>(n_seeds))
                    .add(trans_sum / static_cast<double>(n_seeds))
                    .add(static_cast<Index>(n_seeds))
                    .add(fit);
                table.rows.push_back(row.extend(tail));
            }
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Paired-factor study

struct SideResult {
    double train_acc = 0, test_acc = 0, gap = 0;
    double mean_jacobian_norm = 0, mean_transitions = 0;
    bool fit = false;
};

struct PairedResult {
    GridCell cell;
    std::uint64_t seed = 0;
    Factor factor = Factor::Labels;
    SideResult a, b;
    bool both_fit = false;
    bool retained = false;
};

inline std::pair<std::string, std::string> factor_values(Factor f) {
    switch (f) {
        case Factor::Labels: return {"true", "random"};
        case Factor::Augmentation: return {"off", "on"};
        case Factor::Activation: return {"relu", "hardsigmoid"};
        case Factor::Batch: return {"minibatch", "full"};
    }
    return {"a", "b"};
}

inline std::vector<std::string> paired_header() {
    std::vector<std::string> h = concat(hyper_header(), {"factor", "a_value", "b_value"});
    for (const char* side : {"a", "b"})
        for (const char* f : {"train_acc", "test_acc", "gap", "mean_jacobian_norm", "mean_transitions", "fit"})
            h.push_back(std::string(side) + "_" + f);
    h.push_back("both_fit");
    return h;
}

/// Trains both sides of every (cell, seed) pair. Side A is the default
/// setting and side B flips the factor; everything else is shared,
/// including the initial weights.
template <typename S>
std::vector<PairedResult> run_paired_pairs(const ExperimentSpec& spec, const Datasets& data, const Log& log = Log{}) {
    require(spec.factor.has_value(), ErrorKind::Config, "paired study needs a factor");
    const Factor factor = *spec.factor;
    const auto cells = expand_grid(spec);
    const std::size_t n_seeds = spec.seeds.size();
    std::vector<PairedResult> results(cells.size() * n_seeds);

    parallel_for(static_cast<Index>(results.size()), spec.jobs, [&](Index job) {
        const GridCell& cell = cells[static_cast<std::size_t>(job) / n_seeds];
        const auto seed = spec.seeds[static_cast<std::size_t>(job) % n_seeds];
        PairedResult& r = results[static_cast<std::size_t>(job)];
        r.cell = cell;
        r.seed = seed;
        r.factor = factor;

        GridCell cell_a = cell, cell_b = cell;
        const Dataset* train_a = &data.train;
        const Dataset* train_b = &data.train;
        Dataset randomized;
        std::optional<AugmentConfig> aug_a, aug_b;
        switch (factor) {
            case Factor::Labels:
                randomized = randomize_labels(data.train, seed);
                train_b = &randomized;
                break;
            case Factor::Augmentation:
                aug_b = augment_for(spec.augment.value_or(AugmentConfig{}), data.train);
                break;
            case Factor::Activation:
                cell_a.activation = ActivationKind::ReLU;
                cell_b.activation = ActivationKind::HardSigmoid;
                break;
            case Factor::Batch:
                cell_b.optimizer.batch_size = OptimizerConfig::kFullBatch;
                break;
        }
        if (factor != Factor::Augmentation) aug_a = aug_b = augment_for(spec.augment, data.train);

        auto run_side = [&](const GridCell& c, const Dataset& tr, const std::optional<AugmentConfig>& aug) {
            const auto out = train_cell<S>(c, seed, tr, data.test, spec.loss, aug);
            const auto metrics = measure_network(out.network, data.test, spec.measure);
            return SideResult{out.train_accuracy, out.test_accuracy, out.generalization_gap,
                              metrics.mean_jacobian_norm, metrics.mean_transitions, out.fits_training_set()};
        };
        r.a = run_side(cell_a, *train_a, aug_a);
        r.b = run_side(cell_b, *train_b, aug_b);
        r.both_fit = r.a.fit && r.b.fit;
        // Augmented networks rarely reproduce the canonical training set, so
        // that factor is exempt from the 100%-fit filter.
        r.retained = factor == Factor::Augmentation || r.both_fit;
        std::string status = r.retained ? "retained" : (!r.a.fit && !r.b.fit ? "skipped: neither side fits"
                                                                                 : "skipped: one side does not fit");
        log("paired " + std::string(to_string(factor)) + ": cell " + std::to_string(cell.index) + " seed " +
            std::to_string(seed) + " " + status);
    });
    return results;
}

template <typename S>
CsvTable run_paired_factor(const ExperimentSpec& spec, const Datasets& data, const Log& log = Log{}) {
    const auto results = run_paired_pairs<S>(spec, data, log);
    CsvTable table{paired_header(), {}};
    for (const auto& r : results) {
        if (!r.retained) continue;
        const auto [va, vb] = factor_values(r.factor);
        CsvRow row = hyper_row<S>(r.cell, std::to_string(r.seed), spec, data,
                                  r.factor == Factor::Activation ? std::optional(r.cell.activation) : std::nullopt);
        row.add(to_string(r.factor)).add(va).add(vb);
        for (const SideResult* s : {&r.a, &r.b})
            row.add(s->train_acc).add(s->test_acc).add(s->gap).add(s->mean_jacobian_norm).add(s->mean_transitions).add(s->fit);
        row.add(r.both_fit);
        table.rows.push_back(row);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Sweep

inline std::vector<std::string> sweep_header() {
    return concat(hyper_header(), {"train_acc", "test_acc", "gap", "mean_jacobian_norm", "mean_transitions", "fit",
                                   "diverged", "steps_run"});
}

template <typename S>
CsvTable run_sweep(const ExperimentSpec& spec, const Datasets& data, const Log& log = Log{}) {
    const auto cells = expand_grid(spec);
    const std::size_t n_seeds = spec.seeds.size();
    const auto aug = augment_for(spec.augment, data.train);
    std::vector<CsvRow> rows(cells.size() * n_seeds);
    parallel_for(static_cast<Index>(rows.size()), spec.jobs, [&](Index job) {
        const GridCell& cell = cells[static_cast<std::size_t>(job) / n_seeds];
        const auto seed = spec.seeds[static_cast<std::size_t>(job) % n_seeds];
        CsvRow row = hyper_row<S>(cell, std::to_string(seed), spec, data);
        try {
            const auto out = train_cell<S>(cell, seed, data.train, data.test, spec.loss, aug);
            const auto metrics = measure_network(out.network, data.test, spec.measure);
            row.add(out.train_accuracy)
                .add(out.test_accuracy)
                .add(out.generalization_gap)
                .add(metrics.mean_jacobian_norm)
                .add(metrics.mean_transitions)
                .add(out.fits_training_set())
                .add(false)
                .add(out.steps_run);
            log("sweep: cell " + std::to_string(cell.index) + " seed " + std::to_string(seed) + " gap " +
                format_number(out.generalization_gap) + " jacobian " + format_number(metrics.mean_jacobian_norm));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Training) throw;
            const double nan = std::numeric_limits<double>::quiet_NaN();
            row.add(nan).add(nan).add(nan).add(nan).add(nan).add(false).add(true).add(0);
            log("sweep: cell " + std::to_string(cell.index) + " seed " + std::to_string(seed) + " diverged: " + e.what());
        }
        rows[static_cast<std::size_t>(job)] = std::move(row);
    });
    return CsvTable{sweep_header(), std::move(rows)};
}

// ---------------------------------------------------------------------------
// Boundary study

struct BoundaryStudyEntry {
    Index cell = 0;
    std::uint64_t seed = 0;
    std::array<Index, 3> anchors{};
    BoundaryMap before, after;
};

inline std::array<Index, 3> pick_boundary_anchors(const Dataset& train, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0x626e6472ULL));
    std::vector<int> classes;
    for (int c = 0; c < train.n_classes; ++c)
        if (!indices_of_class(train, c).empty()) classes.push_back(c);
    std::array<Index, 3> out{};
    if (classes.size() >= 3) {
        std::shuffle(classes.begin(), classes.end(), rng);
        for (int i = 0; i < 3; ++i) {
            const auto members = indices_of_class(train, classes[static_cast<std::size_t>(i)]);
            std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
            out[static_cast<std::size_t>(i)] = members[pick(rng)];
        }
    } else {
        require(train.size() >= 3, ErrorKind::Data, "boundary study needs three training points");
        std::vector<Index> all(static_cast<std::size_t>(train.size()));
        std::iota(all.begin(), all.end(), Index{0});
        std::shuffle(all.begin(), all.end(), rng);
        std::copy_n(all.begin(), 3, out.begin());
    }
    return out;
}

template <typename S>
std::vector<BoundaryStudyEntry> run_boundary_entries(const ExperimentSpec& spec, const Datasets& data,
                                                     const Log& log = Log{}) {
    const auto cells = expand_grid(spec);
    const std::size_t n_seeds = spec.seeds.size();
    const auto aug = augment_for(spec.augment, data.train);
    const auto selector = spec.measure.all_layers ? LayerSelector::All : LayerSelector::LastHidden;
    std::vector<BoundaryStudyEntry> entries(cells.size() * n_seeds);
    parallel_for(static_cast<Index>(entries.size()), spec.jobs, [&](Index job) {
        const GridCell& cell = cells[static_cast<std::size_t>(job) / n_seeds];
        const auto seed = spec.seeds[static_cast<std::size_t>(job) % n_seeds];
        auto& e = entries[static_cast<std::size_t>(job)];
        e.cell = cell.index;
        e.seed = seed;
        e.anchors = pick_boundary_anchors(data.train, seed);
        const PlaneGrid grid(data.train.inputs.row(e.anchors[0]).transpose(), data.train.inputs.row(e.anchors[1]).transpose(),
                             data.train.inputs.row(e.anchors[2]).transpose(), spec.measure.grid_resolution);
        const auto widths = make_widths(static_cast<int>(data.train.dim()), cell.width, cell.depth, data.train.n_classes);
        const Mlp<S> initial = init_network<S>(widths, cell.activation, cell.std_multiplier, seed);
        e.before = boundary_map(initial, grid, selector);
        const auto out = train(initial, data.train, data.test, cell.optimizer, spec.loss, aug, seed);
        e.after = boundary_map(out.network, grid, selector);
        log("boundary study: cell " + std::to_string(cell.index) + " seed " + std::to_string(seed) + " regions " +
            std::to_string(e.before.region_count) + " -> " + std::to_string(e.after.region_count));
    });
    return entries;
}

inline CsvTable grid_table(const std::vector<int>& values, int resolution) {
    CsvTable t;
    for (int c = 0; c < resolution; ++c) t.header.push_back("c" + std::to_string(c));
    for (int r = 0; r < resolution; ++r) {
        CsvRow row;
        for (int c = 0; c < resolution; ++c) row.add(values[static_cast<std::size_t>(r * resolution + c)]);
        t.rows.push_back(row);
    }
    return t;
}

inline std::string output_stem(const std::string& output) {
    std::filesystem::path p(output);
    if (p.extension() == ".csv") p.replace_extension();
    return p.string();
}

// ---------------------------------------------------------------------------
// Per-point study

inline std::vector<std::string> bounds_columns() {
    return {"point_id", "loss", "jy_actual", "full_actual", "jy_lower", "jy_upper", "full_lower", "full_approx",
            "M", "n", "label", "predicted", "m_points"};
}

inline CsvRow bounds_row(const PointBounds& p, const BoundsContext& ctx, Index m_points) {
    CsvRow r;
    r.add(p.point_id)
        .add(p.loss)
        .add(p.jy_actual)
        .add(p.full_actual)
        .add(p.jy_lower)
        .add(p.jy_upper)
        .add(p.full_lower)
        .add(p.full_approx)
        .add(ctx.M)
        .add(ctx.n)
        .add(p.label)
        .add(p.predicted)
        .add(m_points);
    return r;
}

inline CsvTable bounds_table(const PointReport& report) {
    CsvTable t{bounds_columns(), {}};
    for (const auto& p : report.rows) t.rows.push_back(bounds_row(p, report.ctx, static_cast<Index>(report.rows.size())));
    return t;
}

template <typename S>
CsvTable run_per_point(const ExperimentSpec& spec, const Datasets& data, const Log& log = Log{}) {
    const auto cells = expand_grid(spec);
    const std::size_t n_seeds = spec.seeds.size();
    const auto aug = augment_for(spec.augment, data.train);
    const Dataset subset = slice(data.test, 0, std::min(spec.measure.per_point_count, data.test.size()));
    std::vector<std::vector<CsvRow>> blocks(cells.size() * n_seeds);
    parallel_for(static_cast<Index>(blocks.size()), spec.jobs, [&](Index job) {
        const GridCell& cell = cells[static_cast<std::size_t>(job) / n_seeds];
        const auto seed = spec.seeds[static_cast<std::size_t>(job) % n_seeds];
        const auto out = train_cell<S>(cell, seed, data.train, data.test, spec.loss, aug);
        const auto report = per_point_report(out.network, subset);
        const CsvRow hyper = hyper_row<S>(cell, std::to_string(seed), spec, data);
        for (const auto& p : report.rows) {
            CsvRow row = bounds_row(p, report.ctx, subset.size());
            blocks[static_cast<std::size_t>(job)].push_back(row.extend(hyper));
        }
        log("per-point: cell " + std::to_string(cell.index) + " seed " + std::to_string(seed) + " M " +
            format_number(report.ctx.M) + " train_acc " + format_number(out.train_accuracy));
    });
    CsvTable table{concat(bounds_columns(), hyper_header()), {}};
    for (auto& b : blocks)
        for (auto& r : b) table.rows.push_back(std::move(r));
    return table;
}

// ---------------------------------------------------------------------------
// Dispatch

/// Main table plus any side files (boundary grids), keyed by path.
struct StudyOutput {
    CsvTable table;
    std::vector<std::pair<std::string, CsvTable>> files;

    void save(const std::string& path) const {
        table.save(path);
        for (const auto& [p, t] : files) t.save(p);
    }
};

template <typename S>
StudyOutput run_study_as(const ExperimentSpec& spec, const Datasets& data, const Log& log) {
    StudyOutput out;
    switch (spec.kind) {
        case StudyKind::Trajectory: out.table = run_trajectory_study<S>(spec, data, log); break;
        case StudyKind::PairedFactor: out.table = run_paired_factor<S>(spec, data, log); break;
        case StudyKind::Sweep: out.table = run_sweep<S>(spec, data, log); break;
        case StudyKind::PerPoint: out.table = run_per_point<S>(spec, data, log); break;
        case StudyKind::Boundary: {
            const auto entries = run_boundary_entries<S>(spec, data, log);
            const std::string stem = output_stem(spec.output);
            out.table.header = {"cell", "seed", "stage", "anchor_a", "anchor_b", "anchor_c", "resolution", "regions",
                                "boundary_cells", "labels_file", "mask_file"};
            for (const auto& e : entries) {
                for (const auto* stage : {"before", "after"}) {
                    const BoundaryMap& map = std::string_view(stage) == "before" ? e.before : e.after;
                    const std::string prefix = stem + "_c" + std::to_string(e.cell) + "_s" + std::to_string(e.seed) + "_" + stage;
                    std::vector<int> mask(map.mask.begin(), map.mask.end());
                    out.files.emplace_back(prefix + "_labels.csv", grid_table(map.labels, map.resolution));
                    out.files.emplace_back(prefix + "_mask.csv", grid_table(mask, map.resolution));
                    CsvRow row;
                    row.add(e.cell).add(e.seed).add(stage).add(e.anchors[0]).add(e.anchors[1]).add(e.anchors[2])
                        .add(map.resolution).add(map.region_count).add(map.boundary_cells())
                        .add(std::filesystem::path(prefix + "_labels.csv").filename().string())
                        .add(std::filesystem::path(prefix + "_mask.csv").filename().string());
                    out.table.rows.push_back(row);
                }
            }
            break;
        }
    }
    return out;
}

inline StudyOutput run_study(const ExperimentSpec& spec, const Log& log = Log{}) {
    spec.validate();
    const Datasets data = load_datasets(spec.dataset);
    return spec.precision == Precision::F32 ? run_study_as<float>(spec, data, log) : run_study_as<double>(spec, data, log);
}

}  // namespace nnsens::harness
