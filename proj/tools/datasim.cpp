// datasim command line: model training, single runs, sweeps and replays.
//
// Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "datasim/harness.hpp"

namespace fs = std::filesystem;
using namespace datasim;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

ExperimentConfig load(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
    if (c.seed) {
        cfg.sim.seed = *c.seed;
        cfg.traffic.seed = *c.seed;
    }
    if (c.out)
        cfg.output_dir = *c.out;
    cfg.finalise();
    return cfg;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigInvalid("cannot read " + path);
    return in;
}

void write_config_copy(const ExperimentConfig& cfg, const fs::path& dir) {
    std::ofstream out(dir / "config.json", std::ios::binary);
    out << to_json(cfg).dump(2) << '\n';
}

int cmd_train_svm(const Common& c, const std::string& samples) {
    ExperimentConfig cfg = load(c);
    std::vector<ObservationSample> data;
    if (!samples.empty()) {
        auto in = open_in(samples);
        data = read_svm_samples(in);
    } else {
        data = generate_training(cfg).svm;
    }
    const auto fit = train_svm_default(data, static_cast<double>(cfg.sim.analyzer.f_cap));
    const std::string path = c.out ? *c.out : "svm_model.json";
    save_svm(fit.model, path);
    std::printf("svm: %zu samples, %zu support vectors, w=(%.6g, %.6g) b=%.6g -> %s\n", data.size(),
                fit.support_vectors, fit.model.w[0], fit.model.w[1], fit.model.b, path.c_str());
    return kOk;
}

int cmd_train_ids(const Common& c, const std::string& samples) {
    ExperimentConfig cfg = load(c);
    std::vector<LabeledFeatures> data;
    if (!samples.empty()) {
        auto in = open_in(samples);
        data = read_ids_samples(in);
    } else {
        data = generate_training(cfg).ids;
    }
    const auto fit = train_som_default(data, cfg.sim.seed);
    const std::string path = c.out ? *c.out : "ids_model.json";
    save_som(fit.grid, path);
    std::printf("som: %zu samples, training accuracy %.4f -> %s\n", data.size(),
                fit.training_accuracy, path.c_str());
    return kOk;
}

int cmd_gen_training(const Common& c) {
    ExperimentConfig cfg = load(c);
    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    const auto sets = generate_training(cfg);
    std::ofstream svm(dir / "svm_samples.csv", std::ios::binary);
    write_svm_samples(sets.svm, svm);
    std::ofstream ids(dir / "ids_samples.csv", std::ios::binary);
    write_ids_samples(sets.ids, ids);
    std::printf("wrote %zu svm and %zu ids samples to %s\n", sets.svm.size(), sets.ids.size(),
                dir.string().c_str());
    return kOk;
}

void print_summary(const MetricsReport& r) {
    std::printf("%s R=%g seed=%llu packet_in/s=%.3f disconnections=%zu table_full=%zu", r.scheme.c_str(),
                r.rate, static_cast<unsigned long long>(r.seed), r.packet_in_rate, r.disconnections,
                r.table_full_errors);
    if (r.detection_rate)
        std::printf(" detection=%.2f%%", *r.detection_rate);
    std::printf(" config=%s\n", r.config_hash.c_str());
}

int finish_run(const ExperimentConfig& cfg, const Models& models, Schedule schedule, bool trace) {
    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "schedule.csv", std::ios::binary);
        write_schedule_csv(schedule, out);
    }
    std::optional<std::ofstream> trace_out;
    if (trace)
        trace_out.emplace(dir / "trace.jsonl", std::ios::binary);
    const auto r = run_schedule(cfg, models, std::move(schedule), trace_out ? &*trace_out : nullptr);
    write_report(r, dir, "");
    write_config_copy(cfg, dir);
    print_summary(r);
    return kOk;
}

Models models_for(const ExperimentConfig& cfg) {
    // only DATA needs the SVM; the SOM is needed for detection figures
    const bool need_svm = cfg.scheme.mode == AnalyzerMode::DATA ||
                          std::any_of(cfg.sweep_schemes.begin(), cfg.sweep_schemes.end(),
                                      [](const SchemeSpec& s) { return s.mode == AnalyzerMode::DATA; });
    if (!need_svm && !cfg.attack && !cfg.svm_model && !cfg.ids_model)
        return {};
    return prepare_models(cfg);
}

int cmd_run(const Common& c, bool trace) {
    ExperimentConfig cfg = load(c);
    const Models models = models_for(cfg);
    const Topology topo(cfg.sim.topology);
    return finish_run(cfg, models, build_schedule(cfg, topo), trace);
}

int cmd_replay(const Common& c, const std::string& schedule_path, bool trace) {
    ExperimentConfig cfg = load(c);
    auto in = open_in(schedule_path);
    Schedule s = read_schedule_csv(in);
    const Models models = models_for(cfg);
    return finish_run(cfg, models, std::move(s), trace);
}

int cmd_sweep(const Common& c, unsigned jobs) {
    ExperimentConfig cfg = load(c);
    const Models models = prepare_models(cfg);
    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    const auto res = sweep(cfg, models, jobs);
    write_sweep(cfg, res, dir);
    write_config_copy(cfg, dir);
    save_svm(*models.svm, (dir / "svm_model.json").string());
    save_som(*models.som, (dir / "ids_model.json").string());
    std::size_t failed = 0;
    for (const auto& cell : res.cells) {
        if (cell.error) {
            ++failed;
            std::fprintf(stderr, "cell %s R=%g failed: %s\n", cell.scheme.name().c_str(), cell.rate,
                         cell.error->c_str());
        }
    }
    std::printf("sweep: %zu cells (%zu failed) -> %s\n", res.cells.size(), failed, dir.string().c_str());
    return failed ? kRuntimeError : kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"datasim: flow-rule aggregation simulator"};
    app.require_subcommand(1);

    Common common;
    std::uint64_t seed = 0;
    std::string out;
    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("-c,--config", common.config, "JSON experiment config");
        if (config_required)
            opt->required();
        opt->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--out", out, "override the output path");
    };

    std::string samples, schedule;
    bool trace = false;
    unsigned jobs = 0;

    auto* train_svm = app.add_subcommand("train-svm", "train the saturation SVM");
    add_common(train_svm, false);
    train_svm->add_option("--samples", samples, "CSV with header f,delta_f,sign")->check(CLI::ExistingFile);

    auto* train_ids = app.add_subcommand("train-ids", "train the SOM intrusion detector");
    add_common(train_ids, false);
    train_ids->add_option("--samples", samples, "labelled feature CSV")->check(CLI::ExistingFile);

    auto* gen = app.add_subcommand("gen-training", "write generated SVM and SOM training samples");
    add_common(gen, false);

    auto* run = app.add_subcommand("run", "run one experiment");
    add_common(run, true);
    run->add_flag("--trace", trace, "write trace.jsonl");

    auto* sw = app.add_subcommand("sweep", "run the scheme x load matrix");
    add_common(sw, true);
    sw->add_option("-j,--jobs", jobs, "parallel cells (0 = hardware threads)");

    auto* replay = app.add_subcommand("replay", "run a config over a recorded schedule");
    add_common(replay, true);
    replay->add_option("--schedule", schedule, "schedule CSV")->required()->check(CLI::ExistingFile);
    replay->add_flag("--trace", trace, "write trace.jsonl");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        for (auto* sub : app.get_subcommands()) {
            if (sub->count("--seed"))
                common.seed = seed;
            if (sub->count("--out"))
                common.out = out;
        }
        if (*train_svm) return cmd_train_svm(common, samples);
        if (*train_ids) return cmd_train_ids(common, samples);
        if (*gen) return cmd_gen_training(common);
        if (*run) return cmd_run(common, trace);
        if (*sw) return cmd_sweep(common, jobs);
        if (*replay) return cmd_replay(common, schedule, trace);
    } catch (const ConfigInvalid& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntimeError;
    }
    return kRuntimeError;
}
