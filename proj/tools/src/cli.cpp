#include "cli.hpp"

#include "spdnn/error.hpp"
#include "spdnn/executor.hpp"
#include "spdnn/graph.hpp"
#include "spdnn/io.hpp"
#include "spdnn/merge.hpp"
#include "spdnn/metrics.hpp"
#include "spdnn/parallel.hpp"
#include "spdnn/pgm.hpp"
#include "spdnn/topology.hpp"
#include "spdnn/train.hpp"
#include "spdnn/weights_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <random>
#include <regex>

namespace spdnn::cli {

namespace fs = std::filesystem;

namespace {

struct Size {
    std::int64_t height = 0;
    std::int64_t width = 0;
};

std::optional<Size> parse_size(const std::string& text) {
    static const std::regex re(R"(^\s*(\d{1,6})\s*(?:x|X|×)\s*(\d{1,6})\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, re)) return std::nullopt;
    Size s{std::stoll(m[1]), std::stoll(m[2])};
    if (s.height <= 0 || s.width <= 0) return std::nullopt;
    return s;
}

// CLI11 validator for "HxW".
struct SizeValidator : CLI::Validator {
    SizeValidator() {
        name_ = "HxW";
        func_ = [](const std::string& s) {
            return parse_size(s) ? std::string{} : "expected HxW with positive integers, got '" + s + "'";
        };
    }
};

// Prefixes errors with the file they came from.
NetworkTopology load_topology(const std::string& path) {
    try {
        return parse_topology(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

NetworkTopology resized(NetworkTopology net, const std::string& size) {
    if (size.empty()) return net;
    const auto s = parse_size(size);
    return with_input_size(std::move(net), s->height, s->width);
}

std::string to_string_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

int exit_code_for(const Error& e) {
    switch (e.category()) {
    case Error::Category::Parse:
    case Error::Category::Validation:
    case Error::Category::Shape:
        return kInvalid;
    case Error::Category::Numeric:
    case Error::Category::Io:
        return kRuntime;
    }
    return kRuntime;
}

struct Options {
    std::string out;
    std::string size;
    std::string policy = "auto";
    std::string report;
    std::string weights;
    std::string save_weights;
    std::uint64_t seed = 0;
    std::size_t steps = 200;
    std::size_t samples = 4;
    std::size_t runs = 5;
    double lr = 0.01;
    double momentum = 0.9;
    std::vector<std::string> inputs;
};

int cmd_fixtures(const Options& o, std::ostream& out) {
    Size s{kReferenceHeight, kReferenceWidth};
    if (!o.size.empty()) s = *parse_size(o.size);
    const auto nets = fixtures(s.height, s.width);
    fs::create_directories(o.out);
    for (const auto& net : nets) {
        const auto path = fs::path(o.out) / (net.name + ".json");
        write_file_atomic(path, serialize_topology(net));
        out << path.string() << "\n";
    }
    return kOk;
}

int cmd_parse(const Options& o, std::ostream& out) {
    const auto net = resized(load_topology(o.inputs.at(0)), o.size);
    const auto text = serialize_topology(net);
    if (o.out.empty()) {
        out << text;
    } else {
        write_file_atomic(o.out, text);
        out << net.name << ": " << net.nodes.size() << " nodes, input " << to_string(net.input)
            << "\n";
    }
    return kOk;
}

int cmd_graph(const Options& o, std::ostream& out) {
    const auto net = load_topology(o.inputs.at(0));
    const auto dot = to_dot(to_graph(net));
    if (o.out.empty())
        out << dot;
    else
        write_file_atomic(o.out, dot);
    return kOk;
}

int cmd_shapes(const Options& o, std::ostream& out) {
    const auto net = resized(load_topology(o.inputs.at(0)), o.size);
    const auto table = infer_shapes(net);
    std::size_t width = 5;
    for (const auto& [id, _] : table.entries()) width = std::max(width, id.size());
    out << "input" << std::string(width - 5, ' ') << "  " << to_string(net.input) << "\n";
    for (const auto& [id, shape] : table.entries())
        out << id << std::string(width - id.size(), ' ') << "  " << to_string(shape) << "\n";
    return kOk;
}

int cmd_merge(const Options& o, std::ostream& out) {
    const auto policy = parse_policy(o.policy);
    std::vector<NetworkTopology> nets;
    for (const auto& path : o.inputs) nets.push_back(resized(load_topology(path), o.size));
    for (std::size_t i = 1; i < nets.size(); ++i)
        if (nets[i].input != nets[0].input)
            throw ValidationError("input size mismatch: " + o.inputs[0] + " is " +
                                  to_string(nets[0].input) + " but " + o.inputs[i] + " is " +
                                  to_string(nets[i].input));
    const auto merged = spdnn_merge(nets, *policy);
    const auto text = serialize_topology(merged.network);
    const auto report = to_json(merged.report);
    write_file_atomic(o.out, text);
    if (!o.report.empty()) write_file_atomic(o.report, report);
    out << merged.report.source_nodes << " → " << merged.report.merged_nodes
        << " internal nodes, " << merged.report.concat_sites.size() << " concat sites, "
        << merged.network.nodes.size() << " layers\n";
    return kOk;
}

ParamStore params_for(const NetworkTopology& net, const Options& o) {
    if (o.weights.empty()) return init_params(net, o.seed);
    auto params = load_weights(o.weights);
    check_params(net, params);
    return params;
}

int cmd_run(const Options& o, std::ostream& out) {
    const auto image = read_pgm(o.inputs.at(1));
    auto net = load_topology(o.inputs.at(0));
    if (net.input.channels != 1)
        throw ShapeError("network expects " + std::to_string(net.input.channels) +
                         " input channels, a PGM image has 1");
    net = with_input_size(std::move(net), static_cast<std::int64_t>(image.height),
                          static_cast<std::int64_t>(image.width));
    const auto params = params_for(net, o);
    const auto result = forward(net, params, image.to_tensor());
    if (!result.all_finite()) throw NumericError("network output is not finite");
    const auto depth = GrayImage::from_tensor(result, image.maxval);
    write_pgm(o.out, depth);
    out << o.out << ": " << depth.width << "×" << depth.height << ", maxval " << depth.maxval
        << "\n";
    return kOk;
}

int cmd_train_demo(const Options& o, std::ostream& out) {
    const auto net = resized(load_topology(o.inputs.at(0)), o.size);
    TrainConfig cfg;
    cfg.steps = o.steps;
    cfg.seed = o.seed;
    cfg.learning_rate = o.lr;
    cfg.momentum = o.momentum;
    cfg.samples = o.samples;
    const auto result = train_demo(net, cfg);

    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < result.losses.size(); ++i)
        csv += std::to_string(i) + "," + to_string_fixed(result.losses[i], 12) + "\n";
    if (!o.out.empty()) write_file_atomic(o.out, csv);
    if (!o.save_weights.empty()) save_weights(o.save_weights, result.params);
    const double first = result.losses.front(), last = result.losses.back();
    out << "loss " << to_string_fixed(first, 6) << " → " << to_string_fixed(last, 6) << " after "
        << cfg.steps << " steps (ratio " << to_string_fixed(last / first, 4) << ")\n";
    return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const auto pred = read_pgm(o.inputs.at(0));
    const auto ref = read_pgm(o.inputs.at(1));
    const auto report = compute_metrics(pred.to_tensor(), ref.to_tensor());
    out << format_report({{fs::path(o.inputs[0]).stem().string(), report}});
    if (!o.out.empty()) write_file_atomic(o.out, to_json(report));
    return kOk;
}

int cmd_bench(const Options& o, std::ostream& out) {
    const auto net = resized(load_topology(o.inputs.at(0)), o.size);
    infer_shapes(net);
    const auto params = init_params(net, o.seed);
    std::mt19937_64 gen(o.seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Tensor input = Tensor::of(net.input);
    for (auto& v : input.data()) v = dist(gen);

    std::vector<double> seconds;
    for (std::size_t r = 0; r < o.runs; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto y = forward(net, params, input);
        const auto t1 = std::chrono::steady_clock::now();
        if (!y.all_finite()) throw NumericError("benchmark output is not finite");
        seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(seconds.begin(), seconds.end());
    const double median = seconds.size() % 2 ? seconds[seconds.size() / 2]
                                             : 0.5 * (seconds[seconds.size() / 2 - 1] +
                                                      seconds[seconds.size() / 2]);
    const double mp = static_cast<double>(net.input.height * net.input.width) / 1e6;
    out << "forward " << to_string(net.input) << ": " << to_string_fixed(median / mp, 4)
        << " sec/MP (median of " << o.runs << " runs, " << to_string_fixed(median, 4) << " s)\n";
    out << "reference: ~ 1.23 sec/MP as published for the original implementation\n";
    out << "note: timings depend on hardware; this run used " << worker_count()
        << " CPU worker thread(s), float64, no GPU\n";
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Merge, inspect, run and evaluate depth-estimation networks", "spdnn"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");
    Options o;
    const SizeValidator size_check;

    auto* fixtures_cmd = app.add_subcommand("fixtures", "Write the eight reference topologies");
    fixtures_cmd->add_option("--out", o.out, "Output directory")->required();
    fixtures_cmd->add_option("--size", o.size, "Input size HxW")->check(size_check);

    auto* parse_cmd = app.add_subcommand("parse", "Validate a topology and print it canonically");
    parse_cmd->add_option("topology", o.inputs, "Topology JSON")->required()->expected(1);
    parse_cmd->add_option("--out", o.out, "Write canonical JSON here");
    parse_cmd->add_option("--size", o.size, "Override input size HxW")->check(size_check);

    auto* graph_cmd = app.add_subcommand("graph", "Export the labelled graph as DOT");
    graph_cmd->add_option("topology", o.inputs, "Topology JSON")->required()->expected(1);
    graph_cmd->add_option("--out", o.out, "DOT output file");

    auto* shapes_cmd = app.add_subcommand("shapes", "Print the output shape of every layer");
    shapes_cmd->add_option("topology", o.inputs, "Topology JSON")->required()->expected(1);
    shapes_cmd->add_option("--size", o.size, "Override input size HxW")->check(size_check);

    auto* merge_cmd = app.add_subcommand("merge", "Fuse two or more topologies into one network");
    merge_cmd->add_option("topologies", o.inputs, "Topology JSON files")->required()->expected(2, -1);
    merge_cmd->add_option("--out", o.out, "Merged topology JSON")->required();
    merge_cmd->add_option("--report", o.report, "Contraction report JSON");
    merge_cmd->add_option("--policy", o.policy, "Concat alignment")
        ->check(CLI::IsMember({"auto", "up", "down"}));
    merge_cmd->add_option("--size", o.size, "Override input size HxW")->check(size_check);

    auto* run_cmd = app.add_subcommand("run", "Predict a depth image from a PGM image");
    run_cmd->add_option("files", o.inputs, "Topology JSON and input PGM")->required()->expected(2);
    run_cmd->add_option("--out", o.out, "Output PGM")->required();
    run_cmd->add_option("--weights", o.weights, "Weights file (default: random from --seed)");
    run_cmd->add_option("--seed", o.seed, "Seed for random weights");

    auto* train_cmd = app.add_subcommand("train-demo", "Train on the synthetic demo task");
    train_cmd->add_option("topology", o.inputs, "Topology JSON")->required()->expected(1);
    train_cmd->add_option("--steps", o.steps, "Optimisation steps");
    train_cmd->add_option("--seed", o.seed, "Seed for data, weights and dropout");
    train_cmd->add_option("--lr", o.lr, "Learning rate")->check(CLI::PositiveNumber);
    train_cmd->add_option("--momentum", o.momentum, "Momentum")->check(CLI::Range(0.0, 1.0));
    train_cmd->add_option("--samples", o.samples, "Training images")->check(CLI::PositiveNumber);
    train_cmd->add_option("--size", o.size, "Override input size HxW")->check(size_check);
    train_cmd->add_option("--out", o.out, "Loss history CSV (step,loss)");
    train_cmd->add_option("--save-weights", o.save_weights, "Write trained weights here");

    auto* eval_cmd = app.add_subcommand("eval", "Compare a predicted PGM with a reference PGM");
    eval_cmd->add_option("images", o.inputs, "Predicted and reference PGM")->required()->expected(2);
    eval_cmd->add_option("--out", o.out, "Metrics JSON");

    auto* bench_cmd = app.add_subcommand("bench", "Time the forward pass");
    bench_cmd->add_option("topology", o.inputs, "Topology JSON")->required()->expected(1);
    bench_cmd->add_option("--size", o.size, "Override input size HxW")->check(size_check);
    bench_cmd->add_option("--runs", o.runs, "Timed runs")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--seed", o.seed, "Seed for weights and input");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "spdnn: " << e.what() << "\n";
        err << "run 'spdnn --help' for usage\n";
        return kUsage;
    }

    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        if (sub == fixtures_cmd) return cmd_fixtures(o, out);
        if (sub == parse_cmd) return cmd_parse(o, out);
        if (sub == graph_cmd) return cmd_graph(o, out);
        if (sub == shapes_cmd) return cmd_shapes(o, out);
        if (sub == merge_cmd) return cmd_merge(o, out);
        if (sub == run_cmd) return cmd_run(o, out);
        if (sub == train_cmd) return cmd_train_demo(o, out);
        if (sub == eval_cmd) return cmd_eval(o, out);
        if (sub == bench_cmd) return cmd_bench(o, out);
    } catch (const ParseError& e) {
        err << "spdnn " << name << ": parse error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const Error& e) {
        err << "spdnn " << name << ": " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const fs::filesystem_error& e) {
        err << "spdnn " << name << ": " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}

} // namespace spdnn::cli
