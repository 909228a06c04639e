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

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tklab/harness.hpp"

namespace fs = std::filesystem;
using namespace tklab;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string precision;
    bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed = true) {
    cmd->add_option("--config", c.config, "Experiment JSON")->required();
    if (with_seed) cmd->add_option("--seed", c.seed, "Seed (defaults to the first seed of the config)");
    cmd->add_option("--precision", c.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
    cmd->add_flag("-v,--verbose", c.verbose, "Log progress to stderr");
}

std::optional<Precision> precision_of(const Common& c) {
    if (c.precision.empty()) return std::nullopt;
    return parse_precision(c.precision);
}

StageContext context(const Common& c) {
    StageContext ctx = make_stage_context(load_config(c.config), c.seed, precision_of(c));
    ctx.log = &std::cerr;
    return ctx;
}

// Accepts a bare stage name or a path to a .tklb file.
std::string stage_name(const std::string& arg) {
    fs::path p(arg);
    if (p.extension() == ".tklb") p.replace_extension();
    return p.filename().string();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tklab: sparse-training and lottery-ticket experiments on small models"};
    app.require_subcommand(1);

    Common run_c;
    bool force = false;
    std::optional<std::size_t> workers;
    auto* run = app.add_subcommand("run", "Run the full regime suite of a config");
    add_common(run, run_c, false);
    run->add_flag("--force", force, "Recompute even if outputs for this digest exist");
    run->add_option("--workers", workers, "Parallel cells")->check(CLI::PositiveNumber);

    Common pre_c;
    auto* pre = app.add_subcommand("pretrain", "Dense training; writes theta0 and thetaT");
    add_common(pre, pre_c);

    Common prune_c;
    std::string alg = "one_shot";
    double rate = 0.5;
    auto* prune = app.add_subcommand("prune", "Generate a mask from stored weights");
    add_common(prune, prune_c);
    prune->add_option("--alg", alg, "one_shot, iterative or admm")
        ->check(CLI::IsMember({"one_shot", "iterative", "admm"}));
    prune->add_option("--sparsity", rate, "Target sparsity")->check(CLI::Range(0.0, 0.999999));

    Common sparse_c;
    std::string mask_arg;
    std::string start = "theta0";
    auto* sparse = app.add_subcommand("sparse-train", "Masked training from theta0, a reinit or theta_k");
    add_common(sparse, sparse_c);
    sparse->add_option("--mask", mask_arg, "Mask name, e.g. mask-one_shot-s0.5");
    sparse->add_option("--start", start, "theta0, reinit or rewind")
        ->check(CLI::IsMember({"theta0", "ticket", "reinit", "rewind"}));

    Common ft_c;
    std::string ft_mask;
    auto* ft = app.add_subcommand("finetune", "Prune thetaT with a mask and retrain");
    add_common(ft, ft_c);
    ft->add_option("--mask", ft_mask, "Mask name");

    Common corr_c;
    std::string a, b, p_text = "0.1..0.5";
    std::string corr_mask;
    bool sparse_dense = false;
    auto* corr = app.add_subcommand("correlate", "Top-p magnitude overlap between two stored weight sets");
    add_common(corr, corr_c);
    corr->add_option("--a", a, "First weights, e.g. theta0")->required();
    corr->add_option("--b", b, "Second weights, e.g. thetaT")->required();
    corr->add_option("--p", p_text, "p grid: 0.1..0.5 or a comma list");
    corr->add_option("--mask", corr_mask, "Restrict to a mask (sparse-sparse)");
    corr->add_flag("--sparse-dense", sparse_dense, "Compare sparse --a with dense --b");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Recompute aggregates from a raw CSV");
    report->add_option("--dir", report_dir, "Output directory of a run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) {
            RunOptions opts;
            opts.force = force;
            opts.workers = workers;
            opts.precision = precision_of(run_c);
            if (run_c.verbose) opts.log = &std::cerr;
            const auto outcome = run_experiment(load_config(run_c.config), opts);
            std::cout << (outcome.reused ? "reused " : "wrote ") << outcome.output_dir.string() << " (digest "
                      << outcome.digest << ")\n";
            return outcome.exit_code;
        }
        if (*pre) {
            std::cout << stage_pretrain(context(pre_c)).string() << "\n";
        } else if (*prune) {
            std::cout << stage_prune(context(prune_c), parse_prune_algorithm(alg), rate).string() << "\n";
        } else if (*sparse) {
            if (mask_arg.empty()) throw DependencyError("sparse-train needs --mask from the prune stage", "prune");
            std::cout << stage_sparse_train(context(sparse_c), stage_name(mask_arg), start).string() << "\n";
        } else if (*ft) {
            if (ft_mask.empty()) throw DependencyError("finetune needs --mask from the prune stage", "prune");
            std::cout << stage_finetune(context(ft_c), stage_name(ft_mask)).string() << "\n";
        } else if (*corr) {
            std::optional<std::string> m;
            if (!corr_mask.empty()) m = stage_name(corr_mask);
            if (sparse_dense && !m) throw ConfigError("--sparse-dense needs --mask");
            std::cout << stage_correlate(context(corr_c), stage_name(a), stage_name(b), parse_p_list(p_text), m,
                                         sparse_dense);
        } else if (*report) {
            std::cout << stage_report(fs::path(report_dir) / "raw.csv");
        }
    } catch (const DependencyError& e) {
        std::cerr << "error: " << e.what() << " (needs stage: " << e.stage() << ")\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return kExitOk;
}
