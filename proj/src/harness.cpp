/*
 * Copyright 2026 The tklab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "tklab/harness.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "tklab/report.hpp"

namespace tklab {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw IoError("write failed for " + path.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void make_dirs(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::uint64_t digest_value(const std::string& hex) { return hex.empty() ? 0 : std::stoull(hex, nullptr, 16); }

template <typename T>
void check_input_shape(const ExperimentConfig& config, const Split<T>& data) {
    if (data.train.sample_shape() != config.model.input_shape) {
        throw ConfigError("dataset samples have shape " + shape_string(data.train.sample_shape()) +
                          " but the model expects " + shape_string(config.model.input_shape));
    }
    for (auto label : data.train.labels) {
        if (static_cast<std::size_t>(label) >= config.model.class_count) {
            throw ConfigError("dataset label exceeds the model's class count");
        }
    }
}

template <typename T>
Checkpoint<T> make_checkpoint(const ExperimentConfig& config, const ParamSet<T>& params, long epoch) {
    Checkpoint<T> cp;
    cp.header.precision = precision_of<T>();
    cp.header.model_digest = model_digest(config.model);
    cp.header.config_digest = digest_value(config.digest);
    cp.header.provenance = params.provenance;
    cp.header.epoch = epoch;
    cp.params = params;
    return cp;
}

template <typename T>
Checkpoint<T> make_mask_checkpoint(const ExperimentConfig& config, const Mask& mask) {
    Checkpoint<T> cp;
    cp.header.precision = precision_of<T>();
    cp.header.model_digest = model_digest(config.model);
    cp.header.config_digest = digest_value(config.digest);
    cp.mask = mask;
    return cp;
}

template <typename T>
RunOutcome run_typed(const ExperimentConfig& config, RunOutcome outcome, std::ostream* log) {
    const Split<T> data = load_dataset<T>(config.dataset);
    check_input_shape(config, data);
    if (log) *log << "running suite " << config.digest << " with " << config.suite.workers << " worker(s)\n";
    const auto result = run_regime_suite(config.model, data, config.suite);

    const fs::path out = config.output_dir;
    for (const auto& art : result.artifacts) {
        const fs::path dir = out / "checkpoints" / ("seed-" + std::to_string(art.seed));
        make_dirs(dir);
        if (art.theta_0) save_checkpoint(dir / "theta0.tklb", make_checkpoint(config, *art.theta_0, 0));
        if (art.theta_T) {
            save_checkpoint(dir / "thetaT.tklb", make_checkpoint(config, *art.theta_T, config.suite.train.epochs));
        }
        if (art.theta_k) {
            const long k = *config.suite.train.rewind_epoch;
            save_checkpoint(dir / ("theta" + std::to_string(k) + ".tklb"), make_checkpoint(config, *art.theta_k, k));
        }
        for (const auto& [name, mask] : art.masks) {
            save_checkpoint(dir / ("mask-" + name + ".tklb"), make_mask_checkpoint<T>(config, mask));
        }
    }
    write_text(out / "raw.csv", raw_csv(result.report));
    write_text(out / "aggregate.csv", aggregate_csv(result.report));
    write_text(out / "report.json", report_json(result.report));
    write_text(out / "config.canonical.json", canonical_config(config) + "\n");
    write_text(out / "digest", config.digest + "\n");
    outcome.exit_code = result.report.any_failed() ? kExitCellFailed : kExitOk;
    return outcome;
}

}  // namespace

RunOutcome run_experiment(ExperimentConfig config, const RunOptions& options) {
    if (options.precision && *options.precision != config.precision) {
        config.precision = *options.precision;
        stamp_digest(config);
    }
    if (options.workers) {
        if (*options.workers == 0) throw ConfigError("workers must be at least 1");
        config.suite.workers = *options.workers;
    }
    RunOutcome outcome;
    outcome.digest = config.digest;
    outcome.output_dir = config.output_dir;
    make_dirs(config.output_dir);

    const fs::path stamp = config.output_dir / "digest";
    const bool complete = fs::exists(stamp) && fs::exists(config.output_dir / "raw.csv") &&
                          fs::exists(config.output_dir / "aggregate.csv") && fs::exists(config.output_dir / "report.json");
    if (!options.force && complete && read_text(stamp) == config.digest + "\n") {
        const auto report = parse_raw_csv(read_text(config.output_dir / "raw.csv"));
        outcome.reused = true;
        outcome.exit_code = report.any_failed() ? kExitCellFailed : kExitOk;
        if (options.log) *options.log << "outputs for " << config.digest << " exist; use --force to recompute\n";
        return outcome;
    }
    std::error_code ec;
    fs::remove(stamp, ec);
    if (config.precision == Precision::f64) return run_typed<double>(config, outcome, options.log);
    return run_typed<float>(config, outcome, options.log);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DependencyError*>(&e)) return kExitConfig;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const IdxError*>(&e)) return kExitIo;
    if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitIo;
    return kExitCellFailed;
}

fs::path StageContext::dir() const { return config.output_dir / ("seed-" + std::to_string(seed)); }

StageContext make_stage_context(ExperimentConfig config, std::optional<std::uint64_t> seed,
                                std::optional<Precision> precision) {
    if (precision && *precision != config.precision) {
        config.precision = *precision;
        stamp_digest(config);
    }
    StageContext ctx;
    ctx.seed = seed.value_or(config.suite.seeds.front());
    ctx.config = std::move(config);
    return ctx;
}

namespace {

template <typename T>
ParamSet<T> load_params(const StageContext& ctx, const std::string& name, const std::string& producer) {
    const fs::path path = ctx.file(name);
    if (!fs::exists(path)) {
        throw DependencyError("missing " + path.string() + "; run the " + producer + " stage first", producer);
    }
    auto cp = load_checkpoint<T>(path, model_digest(ctx.config.model));
    if (cp.params.size() == 0) throw ConfigError(path.string() + " holds no parameters");
    return std::move(cp.params);
}

Mask load_mask(const StageContext& ctx, const std::string& name, Precision precision) {
    const fs::path path = ctx.file(name);
    if (!fs::exists(path)) throw DependencyError("missing mask " + path.string() + "; run the prune stage first", "prune");
    std::optional<Mask> mask;
    if (precision == Precision::f64) {
        mask = load_checkpoint<double>(path, model_digest(ctx.config.model)).mask;
    } else {
        mask = load_checkpoint<float>(path, model_digest(ctx.config.model)).mask;
    }
    if (!mask) throw ConfigError(path.string() + " holds no mask");
    return *mask;
}

double mask_rate(const Mask& mask) {
    const auto it = mask.metadata.params.find("target_sparsity");
    if (it != mask.metadata.params.end()) return std::stod(it->second);
    return sparsity(mask);
}

TrainConfig seeded(const StageContext& ctx) {
    TrainConfig t = ctx.config.suite.train;
    t.seed = ctx.seed;
    return t;
}

template <typename T>
fs::path pretrain_typed(const StageContext& ctx) {
    const auto data = load_dataset<T>(ctx.config.dataset);
    check_input_shape(ctx.config, data);
    make_dirs(ctx.dir());
    const auto theta_0 = init_params<T>(ctx.config.model, ctx.seed);
    const auto result = pretrain(ctx.config.model, theta_0, data.train, seeded(ctx));
    save_checkpoint(ctx.file("theta0"), make_checkpoint(ctx.config, theta_0, 0));
    save_checkpoint(ctx.file("thetaT"), make_checkpoint(ctx.config, result.theta_T, ctx.config.suite.train.epochs));
    for (const auto& [k, snap] : result.snapshots) {
        save_checkpoint(ctx.file("theta" + std::to_string(k)), make_checkpoint(ctx.config, snap, k));
    }
    if (ctx.log) *ctx.log << "test accuracy " << accuracy(ctx.config.model, result.theta_T, data.test) << "\n";
    return ctx.file("thetaT");
}

template <typename T>
fs::path prune_typed(const StageContext& ctx, PruneAlgorithm algorithm, double rate) {
    const auto theta_T = load_params<T>(ctx, "thetaT", "pretrain");
    const auto theta_0 = load_params<T>(ctx, "theta0", "pretrain");
    PruneConfig prune = ctx.config.suite.prune;
    prune.algorithm = algorithm;
    prune.target_sparsity = rate;
    Mask mask;
    if (algorithm == PruneAlgorithm::one_shot) {
        mask = one_shot_prune(theta_T, prune);
    } else {
        const auto data = load_dataset<T>(ctx.config.dataset);
        mask = generate_mask(ctx.config.model, data.train, theta_0, theta_T, seeded(ctx), prune);
    }
    const std::string name = "mask-" + to_string(algorithm) + "-s" + sparsity_tag(rate);
    save_checkpoint(ctx.file(name), make_mask_checkpoint<T>(ctx.config, mask));
    if (ctx.log) {
        for (const auto& l : per_layer_sparsity(mask)) *ctx.log << l.name << " sparsity " << l.sparsity << "\n";
    }
    return ctx.file(name);
}

template <typename T>
fs::path sparse_train_typed(const StageContext& ctx, const std::string& mask_name, const std::string& start) {
    const Mask mask = load_mask(ctx, mask_name, precision_of<T>());
    ParamSet<T> init;
    std::string prefix;
    if (start == "theta0" || start == "ticket") {
        init = load_params<T>(ctx, "theta0", "pretrain");
        prefix = "ticket";
    } else if (start == "reinit") {
        init = reinit_params<T>(ctx.config.model, ctx.seed);
        prefix = "reinit";
    } else if (start == "rewind") {
        if (!ctx.config.suite.train.rewind_epoch) throw ConfigError("rewind needs train.rewind_epoch");
        init = load_params<T>(ctx, "theta" + std::to_string(*ctx.config.suite.train.rewind_epoch), "pretrain");
        prefix = "rewind";
    } else {
        throw ConfigError("unknown start '" + start + "' (theta0, reinit or rewind)");
    }
    const auto data = load_dataset<T>(ctx.config.dataset);
    check_input_shape(ctx.config, data);
    const auto result = sparse_train(ctx.config.model, init, mask, data.train, seeded(ctx));
    const std::string name = prefix + "-s" + sparsity_tag(mask_rate(mask));
    save_checkpoint(ctx.file(name), make_checkpoint(ctx.config, result, ctx.config.suite.train.epochs));
    if (ctx.log) *ctx.log << "test accuracy " << accuracy(ctx.config.model, result, data.test) << "\n";
    return ctx.file(name);
}

template <typename T>
fs::path finetune_typed(const StageContext& ctx, const std::string& mask_name) {
    const Mask mask = load_mask(ctx, mask_name, precision_of<T>());
    const auto theta_T = load_params<T>(ctx, "thetaT", "pretrain");
    const auto data = load_dataset<T>(ctx.config.dataset);
    check_input_shape(ctx.config, data);
    TrainConfig tc = seeded(ctx);
    if (ctx.config.suite.finetune_epochs) {
        tc.epochs = *ctx.config.suite.finetune_epochs;
        std::erase_if(tc.milestones, [&](long m) { return m >= tc.epochs; });
        tc.rewind_epoch.reset();
    }
    const auto result = prune_and_finetune(ctx.config.model, theta_T, mask, data.train, tc);
    const std::string name = "finetune-s" + sparsity_tag(mask_rate(mask));
    save_checkpoint(ctx.file(name), make_checkpoint(ctx.config, result, tc.epochs));
    if (ctx.log) *ctx.log << "test accuracy " << accuracy(ctx.config.model, result, data.test) << "\n";
    return ctx.file(name);
}

template <typename T>
std::string correlate_typed(const StageContext& ctx, const std::string& a, const std::string& b,
                            const std::vector<double>& p_grid, const std::optional<std::string>& mask_name,
                            bool sparse_dense) {
    const auto pa = load_params<T>(ctx, a, "pretrain");
    const auto pb = load_params<T>(ctx, b, "pretrain");
    CorrelationReport report;
    if (!mask_name) {
        report = correlate_dense(pa, pb, p_grid, ctx.config.suite.null_trials, derive_seed(ctx.seed, 0x6E756C6Cu));
    } else {
        const Mask mask = load_mask(ctx, *mask_name, precision_of<T>());
        report.scenario = sparse_dense ? Scenario::sparse_dense : Scenario::sparse_sparse;
        for (double p : p_grid) {
            report.points.push_back(sparse_dense ? correlation_sparse_dense(pa, mask, pb, p)
                                                 : correlation_sparse_sparse(pa, pb, mask, p));
        }
    }
    const std::string json = report.to_json() + "\n";
    make_dirs(ctx.dir());
    write_text(ctx.dir() / ("correlation-" + a + "-" + b + ".json"), json);
    return json;
}

}  // namespace

fs::path stage_pretrain(const StageContext& ctx) {
    return ctx.config.precision == Precision::f64 ? pretrain_typed<double>(ctx) : pretrain_typed<float>(ctx);
}

fs::path stage_prune(const StageContext& ctx, PruneAlgorithm algorithm, double sparsity) {
    return ctx.config.precision == Precision::f64 ? prune_typed<double>(ctx, algorithm, sparsity)
                                                  : prune_typed<float>(ctx, algorithm, sparsity);
}

fs::path stage_sparse_train(const StageContext& ctx, const std::string& mask_name, const std::string& start) {
    return ctx.config.precision == Precision::f64 ? sparse_train_typed<double>(ctx, mask_name, start)
                                                  : sparse_train_typed<float>(ctx, mask_name, start);
}

fs::path stage_finetune(const StageContext& ctx, const std::string& mask_name) {
    return ctx.config.precision == Precision::f64 ? finetune_typed<double>(ctx, mask_name)
                                                  : finetune_typed<float>(ctx, mask_name);
}

std::string stage_correlate(const StageContext& ctx, const std::string& a, const std::string& b,
                            const std::vector<double>& p_grid, const std::optional<std::string>& mask_name,
                            bool sparse_dense) {
    return ctx.config.precision == Precision::f64 ? correlate_typed<double>(ctx, a, b, p_grid, mask_name, sparse_dense)
                                                  : correlate_typed<float>(ctx, a, b, p_grid, mask_name, sparse_dense);
}

std::string stage_report(const fs::path& raw_csv_path) {
    if (!fs::exists(raw_csv_path)) {
        throw DependencyError("missing " + raw_csv_path.string() + "; run the suite first", "run");
    }
    auto report = parse_raw_csv(read_text(raw_csv_path));
    report.aggregates = aggregate_rows(report.rows, 0.005, 0.005);
    return aggregate_csv(report);
}

std::vector<double> parse_p_list(const std::string& text) {
    std::vector<double> out;
    const auto dots = text.find("..");
    try {
        if (dots != std::string::npos) {
            const double lo = std::stod(text.substr(0, dots));
            const double hi = std::stod(text.substr(dots + 2));
            const long steps = std::lround((hi - lo) / 0.1);
            for (long i = 0; i <= steps; ++i) out.push_back(std::round((lo + 0.1 * static_cast<double>(i)) * 1e9) / 1e9);
        } else {
            std::stringstream in(text);
            std::string item;
            while (std::getline(in, item, ',')) out.push_back(std::stod(item));
        }
    } catch (const std::logic_error&) {
        throw ConfigError("cannot parse p list '" + text + "'");
    }
    if (out.empty()) throw ConfigError("empty p list");
    for (double p : out) {
        if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p values must lie in (0, 1]");
    }
    return out;
}

}  // namespace tklab
