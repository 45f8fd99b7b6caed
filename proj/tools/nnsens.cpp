// nnsens command-line tool: train networks, measure sensitivity, emit
// trajectories and loss/Jacobian bound reports, and run experiment studies.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nnsens/harness/config.hpp"
#include "nnsens/harness/studies.hpp"
#include "nnsens/nnsens.hpp"

using namespace nnsens;
using harness::json;

namespace {

struct DataFlags {
    std::string train_images, train_labels, test_images, test_labels;
    bool synthetic = false;
    Index train_subset = -1, test_subset = -1;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--train-images", train_images, "IDX training images");
        cmd->add_option("--train-labels", train_labels, "IDX training labels");
        cmd->add_option("--test-images", test_images, "IDX test images");
        cmd->add_option("--test-labels", test_labels, "IDX test labels");
        cmd->add_flag("--synthetic", synthetic, "use synthetic Gaussian blobs instead of IDX files");
        cmd->add_option("--train-subset", train_subset, "leading training examples to keep (0 = all)");
        cmd->add_option("--test-subset", test_subset, "leading test examples to keep (0 = all)");
    }

    bool given() const { return synthetic || !train_images.empty() || !test_images.empty(); }

    void apply(json& root) const {
        json& d = root["dataset"];
        if (!d.is_object()) d = json::object();
        if (synthetic) d["source"] = "synthetic";
        if (!train_images.empty()) d["source"] = "idx";
        for (auto [key, value] : {std::pair{"train_images", &train_images}, {"train_labels", &train_labels},
                                  {"test_images", &test_images}, {"test_labels", &test_labels}})
            if (!value->empty()) d[key] = std::filesystem::absolute(*value).string();
        if (train_subset >= 0) d["train_subset"] = train_subset;
        if (test_subset >= 0) d["test_subset"] = test_subset;
    }
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + path);
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Config, path + ": " + e.what());
    }
}

harness::Datasets load_data(const DataFlags& flags) {
    json root = {{"kind", "sweep"}};
    flags.apply(root);
    return harness::load_datasets(harness::parse_config_json(root).dataset);
}

template <typename Fn>
auto with_output(const std::string& path, Fn fn) {
    if (path.empty() || path == "-") return fn(std::cout);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
    return fn(out);
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    DataFlags data;
    std::optional<int> width, depth;
    std::string activation, optimizer, loss, batch, precision;
    std::optional<double> lr, std_multiplier;
    std::optional<long> steps, decay_interval;
    bool augment = false;
    std::uint64_t seed = 1;
    std::string out = "model.nnsc";
    std::string summary;
};

template <typename S>
int run_train_as(const harness::ExperimentSpec& spec, const TrainArgs& args) {
    const auto data = harness::load_datasets(spec.dataset);
    const auto cell = harness::expand_grid(spec).front();
    const auto aug = harness::augment_for(spec.augment, data.train);
    const auto outcome = harness::train_cell<S>(cell, args.seed, data.train, data.test, spec.loss, aug);
    save_checkpoint(outcome.network, args.out);
    json summary = {{"checkpoint", args.out},
                    {"widths", outcome.network.widths()},
                    {"activation", to_string(cell.activation)},
                    {"optimizer", to_string(cell.optimizer.kind)},
                    {"learning_rate", cell.optimizer.learning_rate},
                    {"batch_size", cell.optimizer.batch_size},
                    {"loss", to_string(spec.loss)},
                    {"seed", args.seed},
                    {"precision", harness::precision_name<S>()},
                    {"train_accuracy", outcome.train_accuracy},
                    {"test_accuracy", outcome.test_accuracy},
                    {"generalization_gap", outcome.generalization_gap},
                    {"steps_run", outcome.steps_run},
                    {"final_loss", outcome.loss_history.empty() ? 0.0 : outcome.loss_history.back()},
                    {"fits_training_set", outcome.fits_training_set()}};
    with_output(args.summary, [&](std::ostream& o) {
        o << summary.dump(2) << '\n';
        return 0;
    });
    return 0;
}

int run_train(const TrainArgs& args) {
    json root = args.config.empty() ? json{{"kind", "sweep"}} : read_json(args.config);
    root["kind"] = "sweep";
    args.data.apply(root);
    auto& net = root["network"];
    if (!net.is_object()) net = json::object();
    if (args.width) net["width"] = *args.width;
    if (args.depth) net["depth"] = *args.depth;
    if (!args.activation.empty()) net["activation"] = args.activation;
    if (args.std_multiplier) net["std_multiplier"] = *args.std_multiplier;
    auto& opt = root["optimizer"];
    if (!opt.is_object()) opt = json::object();
    if (!args.optimizer.empty()) opt["kind"] = args.optimizer;
    if (args.lr) opt["learning_rate"] = *args.lr;
    if (!args.batch.empty()) opt["batch_size"] = args.batch == "full" ? json("full") : json(std::stoi(args.batch));
    if (args.steps) opt["total_steps"] = *args.steps;
    if (args.decay_interval) opt["decay_interval_steps"] = *args.decay_interval;
    if (!args.loss.empty()) root["loss"] = args.loss;
    if (args.augment && !root.contains("augment")) root["augment"] = json::object();
    if (!args.precision.empty()) root["precision"] = args.precision;
    const auto base = args.config.empty() ? std::filesystem::current_path()
                                          : std::filesystem::absolute(args.config).parent_path();
    const auto spec = harness::parse_config_json(root, base);
    return spec.precision == harness::Precision::F32 ? run_train_as<float>(spec, args) : run_train_as<double>(spec, args);
}

// ---------------------------------------------------------------------------

struct MeasureArgs {
    std::string checkpoint;
    DataFlags data;
    std::string metric = "jacobian";
    std::string trajectory = "translation";
    Index k = 1 << 20;
    Index window = 1;
    Index points = 100;
    int resolution = 64;
    std::string layers = "last_hidden";
    std::uint64_t seed = 1;
    std::string out;
};

// Trajectory `i` of the requested kind.
Trajectory measure_trajectory(const MeasureArgs& args, const std::optional<harness::Datasets>& data, Index d, Index i) {
    const std::uint64_t seed = args.seed + static_cast<std::uint64_t>(i);
    if (args.trajectory == "random-ellipse") return random_ellipse(d, args.k, seed);
    if (!data) throw Error(ErrorKind::Data, "trajectory kind '" + args.trajectory + "' needs a dataset");
    if (args.trajectory == "data-ellipse")
        return harness::make_study_trajectory(harness::TrajectoryKind::DifferentClassEllipse, data->train, args.k, seed);
    if (args.trajectory == "translation") {
        const auto& test = data->test;
        require(test.image_width > 0, ErrorKind::Data, "translation trajectories need image data");
        require(i < test.size(), ErrorKind::Parameter, "not enough test images");
        return translation_trajectory(test.inputs.row(i).transpose(), test.image_width, test.image_height, args.k);
    }
    throw Error(ErrorKind::Parameter, "unknown trajectory kind '" + args.trajectory + "'");
}

template <typename S>
int run_measure_as(const MeasureArgs& args) {
    const Mlp<S> net = load_checkpoint<S>(args.checkpoint);
    std::optional<harness::Datasets> data;
    if (args.data.given()) data = load_data(args.data);
    harness::CsvTable table;

    if (args.metric == "jacobian") {
        require(data.has_value(), ErrorKind::Data, "the jacobian metric needs a dataset");
        const Index count = std::min(args.points, data->test.size());
        const auto report = mean_jacobian_norm(net, data->test.inputs.topRows(count));
        table.header = {"point_id", "jacobian_norm"};
        for (Index i = 0; i < count; ++i) table.rows.push_back(harness::CsvRow().add(i).add(report.per_point_norms[static_cast<std::size_t>(i)]));
        std::cerr << "mean jacobian norm " << harness::format_number(report.mean_norm) << " over " << count << " points\n";
    } else if (args.metric == "transitions" || args.metric == "curvature") {
        const bool transitions = args.metric == "transitions";
        table.header = {"trajectory_id", "trajectory", "k", transitions ? "transitions" : "curvature"};
        double sum = 0;
        for (Index i = 0; i < args.points; ++i) {
            const auto t = measure_trajectory(args, data, net.input_dim(), i);
            const double v = transitions ? static_cast<double>(count_transitions(net, t).total) : curvature_estimate(net, t);
            sum += v;
            table.rows.push_back(harness::CsvRow().add(i).add(args.trajectory).add(t.k()).add(v));
        }
        std::cerr << "mean " << args.metric << " " << harness::format_number(sum / static_cast<double>(args.points)) << '\n';
    } else if (args.metric == "profile") {
        const auto t = measure_trajectory(args, data, net.input_dim(), 0);
        const auto p = sensitivity_profile(net, t, args.window);
        table.header = {"bucket", "index_begin", "index_end", "mean_jacobian_norm", "transitions"};
        for (std::size_t b = 0; b < p.bucket_counts.size(); ++b) {
            const Index begin = static_cast<Index>(b) * args.window;
            double s = 0;
            for (Index i = begin; i < begin + args.window; ++i) s += p.norms[static_cast<std::size_t>(i)];
            table.rows.push_back(harness::CsvRow().add(static_cast<Index>(b)).add(begin).add(begin + args.window)
                                     .add(s / static_cast<double>(args.window)).add(p.bucket_counts[b]));
        }
    } else if (args.metric == "boundary") {
        require(data.has_value(), ErrorKind::Data, "the boundary metric needs a dataset");
        const auto anchors = harness::pick_boundary_anchors(data->train, args.seed);
        const auto& tr = data->train.inputs;
        const PlaneGrid grid(tr.row(anchors[0]).transpose(), tr.row(anchors[1]).transpose(), tr.row(anchors[2]).transpose(),
                             args.resolution);
        const auto map = boundary_map(net, grid, args.layers == "all" ? LayerSelector::All : LayerSelector::LastHidden);
        table = harness::grid_table(map.labels, map.resolution);
        if (!args.out.empty() && args.out != "-") {
            std::vector<int> mask(map.mask.begin(), map.mask.end());
            harness::grid_table(mask, map.resolution).save(harness::output_stem(args.out) + "_mask.csv");
        }
        std::cerr << map.region_count << " regions, " << map.boundary_cells() << " boundary cells\n";
    } else {
        throw Error(ErrorKind::Parameter, "unknown metric '" + args.metric + "'");
    }
    return with_output(args.out, [&](std::ostream& o) {
        table.write(o);
        return 0;
    });
}

// ---------------------------------------------------------------------------

struct TrajectoryArgs {
    std::string kind = "random-ellipse";
    DataFlags data;
    std::string checkpoint;
    Index k = 1536;
    Index index = 0;
    Index dim = 784;
    std::uint64_t seed = 1;
    std::string out;
};

int run_trajectory(const TrajectoryArgs& args) {
    std::optional<harness::Datasets> data;
    if (args.data.given()) data = load_data(args.data);
    MeasureArgs m;
    m.trajectory = args.kind;
    m.k = args.k;
    m.seed = args.seed;
    const Index d = data ? data->train.dim() : args.dim;
    const Trajectory t = measure_trajectory(m, data, d, args.kind == "translation" ? args.index : 0);
    harness::CsvTable table;
    if (!args.checkpoint.empty()) {
        const auto net = load_checkpoint<double>(args.checkpoint);
        const auto p = sensitivity_profile(net, t, 1);
        table.header = {"index", "is_anchor", "jacobian_norm", "arc_transitions"};
        for (Index i = 0; i < t.k(); ++i) {
            const bool anchor = std::find(t.anchor_indices().begin(), t.anchor_indices().end(), i) != t.anchor_indices().end();
            table.rows.push_back(harness::CsvRow().add(i).add(anchor).add(p.norms[static_cast<std::size_t>(i)])
                                     .add(p.bucket_counts[static_cast<std::size_t>(i)]));
        }
    } else {
        table.header = {"index", "is_anchor"};
        for (Index j = 0; j < t.dim(); ++j) table.header.push_back("x" + std::to_string(j));
        for (Index i = 0; i < t.k(); ++i) {
            harness::CsvRow row;
            const bool anchor = std::find(t.anchor_indices().begin(), t.anchor_indices().end(), i) != t.anchor_indices().end();
            row.add(i).add(anchor);
            const auto z = t.point(i);
            for (Index j = 0; j < z.size(); ++j) row.add(z(j));
            table.rows.push_back(row);
        }
    }
    return with_output(args.out, [&](std::ostream& o) {
        table.write(o);
        return 0;
    });
}

// ---------------------------------------------------------------------------

struct BoundsArgs {
    std::string checkpoint;
    DataFlags data;
    Index points = 1000;
    std::string precision = "f64";
    std::string out;
};

template <typename S>
int run_bounds_as(const BoundsArgs& args) {
    const Mlp<S> net = load_checkpoint<S>(args.checkpoint);
    require(args.data.given(), ErrorKind::Data, "bounds need a labelled test set");
    const auto data = load_data(args.data);
    const Dataset subset = slice(data.test, 0, std::min(args.points, data.test.size()));
    const auto report = per_point_report(net, subset);
    return with_output(args.out, [&](std::ostream& o) {
        harness::bounds_table(report).write(o);
        return 0;
    });
}

struct StudyArgs {
    std::string which;
    std::string config;
    std::vector<std::uint64_t> seeds;
    std::string out;
    int jobs = 0;
    bool quiet = false;
};

int run_study_cmd(const StudyArgs& args) {
    auto spec = harness::parse_config(args.config);
    const auto requested = harness::parse_study(args.which);
    require(requested == spec.kind, ErrorKind::Config,
            "config describes a " + std::string(to_string(spec.kind)) + ", not a " + std::string(to_string(requested)));
    if (!args.seeds.empty()) spec.seeds = args.seeds;
    if (!args.out.empty()) spec.output = args.out;
    if (args.jobs > 0) spec.jobs = args.jobs;
    const harness::Log log(args.quiet ? nullptr : &std::cerr);
    const auto result = harness::run_study(spec, log);
    result.save(spec.output);
    log("wrote " + spec.output + " (" + std::to_string(result.table.rows.size()) + " rows)");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Input-sensitivity metrics for small fully-connected networks"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a network and write a checkpoint plus a run summary");
    train_cmd->add_option("--config", train_args.config, "JSON config (dataset/network/optimizer sections)");
    train_args.data.add_to(train_cmd);
    train_cmd->add_option("--width", train_args.width, "hidden width");
    train_cmd->add_option("--depth", train_args.depth, "number of hidden layers");
    train_cmd->add_option("--activation", train_args.activation, "relu|relu6|tanh|hardtanh|hardsigmoid");
    train_cmd->add_option("--std-multiplier", train_args.std_multiplier, "initial weight std multiplier");
    train_cmd->add_option("--optimizer", train_args.optimizer, "sgd|momentum|adam|rmsprop");
    train_cmd->add_option("--lr", train_args.lr, "base learning rate");
    train_cmd->add_option("--batch-size", train_args.batch, "minibatch size or 'full'");
    train_cmd->add_option("--steps", train_args.steps, "total optimizer steps");
    train_cmd->add_option("--decay-interval", train_args.decay_interval, "steps between learning-rate decays");
    train_cmd->add_option("--loss", train_args.loss, "cross_entropy|l2");
    train_cmd->add_flag("--augment", train_args.augment, "random translations (4px, wrapping) and horizontal flips");
    train_cmd->add_option("--precision", train_args.precision, "f64|f32");
    train_cmd->add_option("--seed", train_args.seed, "seed for init, shuffling and augmentation");
    train_cmd->add_option("--out", train_args.out, "checkpoint path");
    train_cmd->add_option("--summary", train_args.summary, "run-summary JSON path (default stdout)");

    MeasureArgs measure_args;
    std::string measure_precision = "f64";
    auto* measure_cmd = app.add_subcommand("measure", "evaluate a sensitivity metric on a checkpoint");
    measure_cmd->add_option("--checkpoint", measure_args.checkpoint, "network checkpoint")->required();
    measure_args.data.add_to(measure_cmd);
    measure_cmd->add_option("--metric", measure_args.metric, "jacobian|transitions|curvature|profile|boundary")
        ->check(CLI::IsMember({"jacobian", "transitions", "curvature", "profile", "boundary"}));
    measure_cmd->add_option("--trajectory", measure_args.trajectory, "random-ellipse|data-ellipse|translation")
        ->check(CLI::IsMember({"random-ellipse", "data-ellipse", "translation"}));
    measure_cmd->add_option("--k", measure_args.k, "samples per trajectory");
    measure_cmd->add_option("--window", measure_args.window, "profile bucket width (must divide k)");
    measure_cmd->add_option("--points", measure_args.points, "test points or trajectories to evaluate");
    measure_cmd->add_option("--resolution", measure_args.resolution, "boundary grid resolution");
    measure_cmd->add_option("--layers", measure_args.layers, "last_hidden|all")->check(CLI::IsMember({"last_hidden", "all"}));
    measure_cmd->add_option("--seed", measure_args.seed, "seed for random trajectories and anchors");
    measure_cmd->add_option("--precision", measure_precision, "f64|f32")->check(CLI::IsMember({"f64", "f32"}));
    measure_cmd->add_option("--out", measure_args.out, "CSV output path (default stdout)");

    TrajectoryArgs traj_args;
    auto* traj_cmd = app.add_subcommand("trajectory", "emit trajectory points, or per-sample metrics with --checkpoint");
    traj_cmd->add_option("--kind", traj_args.kind, "random-ellipse|data-ellipse|translation")
        ->check(CLI::IsMember({"random-ellipse", "data-ellipse", "translation"}));
    traj_args.data.add_to(traj_cmd);
    traj_cmd->add_option("--checkpoint", traj_args.checkpoint, "measure along the trajectory instead of printing points");
    traj_cmd->add_option("--k", traj_args.k, "samples");
    traj_cmd->add_option("--index", traj_args.index, "test image for translation trajectories");
    traj_cmd->add_option("--dim", traj_args.dim, "input dimension for random ellipses without a dataset");
    traj_cmd->add_option("--seed", traj_args.seed, "seed");
    traj_cmd->add_option("--out", traj_args.out, "CSV output path (default stdout)");

    BoundsArgs bounds_args;
    auto* bounds_cmd = app.add_subcommand("bounds", "per-point loss vs Jacobian-norm report with analytic bounds");
    bounds_cmd->add_option("--checkpoint", bounds_args.checkpoint, "network checkpoint")->required();
    bounds_args.data.add_to(bounds_cmd);
    bounds_cmd->add_option("--points", bounds_args.points, "leading test points to report");
    bounds_cmd->add_option("--precision", bounds_args.precision, "f64|f32")->check(CLI::IsMember({"f64", "f32"}));
    bounds_cmd->add_option("--out", bounds_args.out, "CSV output path (default stdout)");

    StudyArgs study_args;
    auto* study_cmd = app.add_subcommand("study", "run a config-driven experiment");
    study_cmd->add_option("which", study_args.which, "trajectory|boundary|paired|sweep|per-point")
        ->required()
        ->check(CLI::IsMember({"trajectory", "boundary", "paired", "sweep", "per-point"}));
    study_cmd->add_option("--config", study_args.config, "experiment config (JSON)")->required();
    study_cmd->add_option("--seed", study_args.seeds, "override the config's seeds");
    study_cmd->add_option("--out", study_args.out, "override the output path");
    study_cmd->add_option("--jobs", study_args.jobs, "worker threads");
    study_cmd->add_flag("--quiet", study_args.quiet, "suppress progress messages");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) return run_train(train_args);
        if (*measure_cmd) return measure_precision == "f32" ? run_measure_as<float>(measure_args) : run_measure_as<double>(measure_args);
        if (*traj_cmd) return run_trajectory(traj_args);
        if (*bounds_cmd) return bounds_args.precision == "f32" ? run_bounds_as<float>(bounds_args) : run_bounds_as<double>(bounds_args);
        if (*study_cmd) return run_study_cmd(study_args);
    } catch (const Error& e) {
        std::cerr << "nnsens: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "nnsens: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
