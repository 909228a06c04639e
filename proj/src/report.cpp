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

#include "tklab/report.hpp"

#include <charconv>
#include <sstream>

#include "json.hpp"

namespace tklab {

std::string format_number(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

namespace {

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

std::string flag(bool b) { return b ? "1" : "0"; }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

double parse_double(const std::string& text, const char* what) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw ConfigError(std::string("raw csv: bad ") + what + " '" + text + "'");
    }
    return v;
}

std::optional<double> parse_opt(const std::string& text, const char* what) {
    if (text.empty()) return std::nullopt;
    return parse_double(text, what);
}

nlohmann::ordered_json verdict_json(const WinningVerdict& v) {
    return {{"aspect1", v.aspect1}, {"aspect2", v.aspect2}, {"holds", v.holds()},
            {"epsilon", v.epsilon}, {"delta", v.delta},     {"acc_dense", v.acc_dense},
            {"acc_ticket", v.acc_ticket}, {"acc_reinit", v.acc_reinit}};
}

}  // namespace

std::string raw_csv(const ExperimentReport& report) {
    std::string out = std::string(kRawCsvHeader) + "\n";
    for (const auto& r : report.rows) {
        out += csv_field(report.config_digest) + "," + std::to_string(r.seed) + "," + format_number(r.lr0) + "," +
               csv_field(r.algorithm) + "," + to_string(r.regime) + "," + format_number(r.sparsity) + "," +
               opt(r.accuracy) + "," + csv_field(r.error.empty() ? "ok" : r.error) + "," +
               (r.verdict ? flag(r.verdict->aspect1) : "") + "," + (r.verdict ? flag(r.verdict->aspect2) : "") +
               "," + opt(r.r_theta0) + "," + opt(r.r_thetaT) + "," + opt(r.r_start) + "\n";
    }
    return out;
}

std::string aggregate_csv(const ExperimentReport& report) {
    std::string out = std::string(kAggregateCsvHeader) + "\n";
    for (const auto& a : report.aggregates) {
        const bool have = !a.values.empty();
        out += csv_field(report.config_digest) + "," + format_number(a.lr0) + "," + csv_field(a.algorithm) + "," +
               to_string(a.regime) + "," + format_number(a.sparsity) + "," + std::to_string(a.values.size()) + "," +
               std::to_string(a.failed) + "," + (have ? format_number(a.mean) : "") + "," +
               (have ? format_number(a.std) : "") + "," + (a.verdict ? flag(a.verdict->aspect1) : "") + "," +
               (a.verdict ? flag(a.verdict->aspect2) : "") + "\n";
    }
    return out;
}

std::string report_json(const ExperimentReport& report) {
    nlohmann::ordered_json j;
    j["config_digest"] = report.config_digest;
    j["reinit_seed_mix"] = report.reinit_seed_mix;
    auto& rows = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json row{{"seed", r.seed},       {"lr0", r.lr0},
                                   {"algorithm", r.algorithm}, {"regime", to_string(r.regime)},
                                   {"sparsity", r.sparsity}};
        row["accuracy"] = r.accuracy ? nlohmann::ordered_json(*r.accuracy) : nlohmann::ordered_json();
        row["status"] = r.error.empty() ? "ok" : r.error;
        if (r.r_theta0) row["r_theta0"] = *r.r_theta0;
        if (r.r_thetaT) row["r_thetaT"] = *r.r_thetaT;
        if (r.r_start) row["r_start"] = *r.r_start;
        if (r.verdict) row["verdict"] = verdict_json(*r.verdict);
        rows.push_back(std::move(row));
    }
    auto& aggs = j["aggregates"] = nlohmann::ordered_json::array();
    for (const auto& a : report.aggregates) {
        nlohmann::ordered_json row{{"lr0", a.lr0},
                                   {"algorithm", a.algorithm},
                                   {"regime", to_string(a.regime)},
                                   {"sparsity", a.sparsity},
                                   {"values", a.values},
                                   {"failed", a.failed},
                                   {"mean", a.mean},
                                   {"std", a.std}};
        if (a.verdict) row["verdict"] = verdict_json(*a.verdict);
        aggs.push_back(std::move(row));
    }
    auto& masks = j["masks"] = nlohmann::ordered_json::array();
    for (const auto& m : report.masks) {
        nlohmann::ordered_json layers = nlohmann::ordered_json::array();
        for (const auto& l : m.layers) {
            layers.push_back({{"name", l.name}, {"size", l.size}, {"zeros", l.zeros}, {"sparsity", l.sparsity}});
        }
        nlohmann::ordered_json row{{"seed", m.seed},
                                   {"algorithm", m.algorithm},
                                   {"sparsity", m.sparsity},
                                   {"generation_epochs", m.epochs_trained},
                                   {"layers", std::move(layers)}};
        if (!m.error.empty()) row["error"] = m.error;
        masks.push_back(std::move(row));
    }
    auto& corr = j["correlations"] = nlohmann::ordered_json::array();
    for (const auto& c : report.correlations) {
        corr.push_back({{"seed", c.seed},
                        {"algorithm", c.algorithm},
                        {"regime", to_string(c.regime)},
                        {"sparsity", c.sparsity},
                        {"pair", c.label},
                        {"points", nlohmann::ordered_json::parse(c.report.to_json())}});
    }
    return j.dump(2) + "\n";
}

ExperimentReport parse_raw_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kRawCsvHeader) throw ConfigError("raw csv: unexpected header");
    ExperimentReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 13) throw ConfigError("raw csv: expected 13 fields, got " + std::to_string(f.size()));
        report.config_digest = f[0];
        ReportRow r;
        std::uint64_t seed = 0;
        const auto res = std::from_chars(f[1].data(), f[1].data() + f[1].size(), seed);
        if (res.ec != std::errc() || res.ptr != f[1].data() + f[1].size()) throw ConfigError("raw csv: bad seed");
        r.seed = seed;
        r.lr0 = parse_double(f[2], "lr0");
        r.algorithm = f[3];
        r.regime = parse_regime(f[4]);
        r.sparsity = parse_double(f[5], "sparsity");
        r.accuracy = parse_opt(f[6], "accuracy");
        if (f[7] != "ok") r.error = f[7];
        if (!f[8].empty() && !f[9].empty()) {
            WinningVerdict v;
            v.aspect1 = f[8] == "1";
            v.aspect2 = f[9] == "1";
            r.verdict = v;
        }
        r.r_theta0 = parse_opt(f[10], "r_theta0");
        r.r_thetaT = parse_opt(f[11], "r_thetaT");
        r.r_start = parse_opt(f[12], "r_start");
        report.rows.push_back(std::move(r));
    }
    return report;
}

}  // namespace tklab
