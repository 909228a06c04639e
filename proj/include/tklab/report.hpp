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

#include <string>
#include <vector>

#include "tklab/regimes.hpp"

namespace tklab {

inline constexpr const char* kRawCsvHeader =
    "config_digest,seed,lr0,algorithm,regime,sparsity,accuracy,status,aspect1,aspect2,r_theta0,r_thetaT,r_start";
inline constexpr const char* kAggregateCsvHeader =
    "config_digest,lr0,algorithm,regime,sparsity,n,failed,mean,std,aspect1,aspect2";

/// Shortest round-trip decimal form, independent of the C locale.
std::string format_number(double value);

/// One line per row, LF endings, fixed header.
std::string raw_csv(const ExperimentReport& report);
std::string aggregate_csv(const ExperimentReport& report);
std::string report_json(const ExperimentReport& report);

/// Parses a file written by raw_csv. Throws ConfigError on malformed input.
ExperimentReport parse_raw_csv(const std::string& text);

}  // namespace tklab
