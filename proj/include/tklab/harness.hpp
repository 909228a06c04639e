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

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tklab/config.hpp"

namespace tklab {

enum ExitCode : int { kExitOk = 0, kExitCellFailed = 1, kExitConfig = 2, kExitIo = 3 };

struct RunOptions {
    bool force = false;
    std::optional<std::size_t> workers;
    std::optional<Precision> precision;
    std::ostream* log = nullptr;
};

struct RunOutcome {
    int exit_code = kExitOk;
    bool reused = false;  // outputs with the same digest already existed
    std::string digest;
    std::filesystem::path output_dir;
};

/// Full suite: raw.csv, aggregate.csv, report.json and checkpoints under the
/// output directory. A rerun with the same digest reuses the outputs unless
/// `force`. Errors propagate; use exit_code_for to map them.
RunOutcome run_experiment(ExperimentConfig config, const RunOptions& options);

/// Exit status for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// Stage commands. Each reads and writes checkpoints in
/// <output_dir>/seed-<seed>/ and returns the path it wrote.
struct StageContext {
    ExperimentConfig config;
    std::uint64_t seed = 0;
    std::ostream* log = nullptr;

    std::filesystem::path dir() const;
    std::filesystem::path file(const std::string& name) const { return dir() / (name + ".tklb"); }
};

StageContext make_stage_context(ExperimentConfig config, std::optional<std::uint64_t> seed,
                                std::optional<Precision> precision);

/// theta0, thetaT and, with a rewind epoch, theta<k>.
std::filesystem::path stage_pretrain(const StageContext& ctx);
/// mask-<alg>-s<rate>.
std::filesystem::path stage_prune(const StageContext& ctx, PruneAlgorithm algorithm, double sparsity);
/// start is theta0 (ticket), reinit, or rewind; writes ticket-s<rate>,
/// reinit-s<rate> or rewind-s<rate>.
std::filesystem::path stage_sparse_train(const StageContext& ctx, const std::string& mask_name,
                                         const std::string& start);
/// finetune-s<rate>.
std::filesystem::path stage_finetune(const StageContext& ctx, const std::string& mask_name);
/// JSON correlation report between two stored parameter sets. With a mask
/// the sparse-sparse scenario is used, or sparse-dense when `sparse_dense`.
std::string stage_correlate(const StageContext& ctx, const std::string& a, const std::string& b,
                            const std::vector<double>& p_grid, const std::optional<std::string>& mask_name,
                            bool sparse_dense);
/// Aggregate CSV recomputed from a raw CSV file.
std::string stage_report(const std::filesystem::path& raw_csv_path);

/// "0.1..0.5" expands to the 0.1 step grid; otherwise a comma list.
std::vector<double> parse_p_list(const std::string& text);

}  // namespace tklab
