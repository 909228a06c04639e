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

#include "tklab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "json.hpp"
#include "tklab/digest.hpp"

namespace tklab {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// Reads keys from one JSON object and rejects whatever was not read.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(where_ + ": missing '" + key + "'");
        return j_.at(key);
    }

    template <typename V>
    V get(const std::string& key) {
        return convert<V>(raw(key), where_ + "." + key);
    }

    template <typename V>
    V get(const std::string& key, V fallback) {
        seen_.insert(key);
        return j_.contains(key) ? convert<V>(j_.at(key), where_ + "." + key) : fallback;
    }

    template <typename V>
    std::optional<V> opt(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
        return convert<V>(j_.at(key), where_ + "." + key);
    }

    void done() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
        }
    }

    const std::string& where() const { return where_; }

    template <typename V>
    static V convert(const json& v, const std::string& where) {
        if constexpr (std::is_same_v<V, bool>) {
            if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<V, std::string>) {
            if (!v.is_string()) throw ConfigError(where + ": expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_floating_point_v<V>) {
            if (!v.is_number()) throw ConfigError(where + ": expected a number");
            return v.get<V>();
        } else if constexpr (std::is_unsigned_v<V>) {
            if (!v.is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer");
            return v.get<V>();
        } else if constexpr (std::is_integral_v<V>) {
            if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
            return v.get<V>();
        } else {
            if (!v.is_array()) throw ConfigError(where + ": expected an array");
            V out;
            for (std::size_t i = 0; i < v.size(); ++i) {
                out.push_back(convert<typename V::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
            }
            return out;
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

Layer parse_layer(const json& j, const std::string& where) {
    Fields f(j, where);
    const auto type = f.get<std::string>("type");
    Layer layer;
    if (type == "dense") {
        layer = DenseLayer{f.get<std::size_t>("in"), f.get<std::size_t>("out")};
    } else if (type == "conv2d") {
        layer = Conv2DLayer{f.get<std::size_t>("in_channels"), f.get<std::size_t>("out_channels"),
                            f.get<std::size_t>("kernel_size"), f.get<std::size_t>("stride", std::size_t{1})};
    } else if (type == "relu") {
        layer = ReluLayer{};
    } else if (type == "flatten") {
        layer = FlattenLayer{};
    } else {
        throw ConfigError(where + ": unknown layer type '" + type + "'");
    }
    f.done();
    return layer;
}

ModelSpec parse_model(const json& j) {
    Fields f(j, "model");
    ModelSpec model;
    if (f.has("hidden")) {
        model = make_mlp(f.get<std::size_t>("inputs"), f.get<std::vector<std::size_t>>("hidden"),
                         f.get<std::size_t>("classes"));
    } else {
        model.input_shape = f.get<std::vector<std::size_t>>("input_shape");
        model.class_count = f.get<std::size_t>("classes");
        const json& layers = f.raw("layers");
        if (!layers.is_array()) throw ConfigError("model.layers: expected an array");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            model.layers.push_back(parse_layer(layers[i], "model.layers[" + std::to_string(i) + "]"));
        }
    }
    f.done();
    validate(model);
    return model;
}

DatasetSpec parse_dataset(const json& j, const std::filesystem::path& base_dir) {
    Fields f(j, "dataset");
    DatasetSpec d;
    d.kind = f.get<std::string>("kind");
    if (d.kind == "spirals") {
        d.n = f.get<std::size_t>("n");
        d.turns = f.get<double>("turns", d.turns);
        d.noise = f.get<double>("noise", d.noise);
        d.seed = f.get<std::uint64_t>("seed", d.seed);
        if (d.n < 2 || d.n % 2 != 0) throw ConfigError("dataset.n must be even and at least 2 for spirals");
    } else if (d.kind == "blobs") {
        d.n = f.get<std::size_t>("n");
        d.classes = f.get<std::size_t>("classes", d.classes);
        d.dim = f.get<std::size_t>("dim", d.dim);
        d.spread = f.get<double>("spread", d.spread);
        d.seed = f.get<std::uint64_t>("seed", d.seed);
        if (d.classes < 2 || d.n < d.classes) throw ConfigError("dataset needs n >= classes >= 2");
    } else if (d.kind == "idx") {
        d.images = f.get<std::string>("images");
        d.labels = f.get<std::string>("labels");
        if (d.images.is_relative()) d.images = base_dir / d.images;
        if (d.labels.is_relative()) d.labels = base_dir / d.labels;
    } else {
        throw ConfigError("dataset.kind must be spirals, blobs or idx");
    }
    d.test_fraction = f.get<double>("test_fraction", d.test_fraction);
    d.split_seed = f.get<std::uint64_t>("split_seed", d.split_seed);
    if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) throw ConfigError("dataset.test_fraction must lie in (0, 1)");
    if (d.noise < 0.0 || d.spread < 0.0) throw ConfigError("dataset noise and spread must be non-negative");
    f.done();
    return d;
}

TrainConfig parse_train(const json& j) {
    Fields f(j, "train");
    TrainConfig t;
    t.epochs = f.get<long>("epochs", t.epochs);
    t.lr0 = f.get<double>("lr0", t.lr0);
    t.milestones = f.get<std::vector<long>>("milestones", t.milestones);
    t.decay_factor = f.get<double>("decay_factor", t.decay_factor);
    t.momentum = f.get<double>("momentum", t.momentum);
    t.weight_decay = f.get<double>("weight_decay", t.weight_decay);
    t.batch_size = f.get<std::size_t>("batch_size", t.batch_size);
    t.rewind_epoch = f.opt<long>("rewind_epoch");
    t.log_epochs = f.get<bool>("log_epochs", false);
    if (f.has("augment")) {
        Fields a(f.raw("augment"), "train.augment");
        t.augment.horizontal_flip = a.get<bool>("horizontal_flip", false);
        t.augment.crop_padding = a.get<std::size_t>("crop_padding", std::size_t{2});
        a.done();
    }
    f.done();
    t.validate();
    return t;
}

void parse_prune(const json& j, SuiteConfig& suite) {
    Fields f(j, "prune");
    suite.algorithms.clear();
    for (const auto& name : f.get<std::vector<std::string>>("algorithms", {"one_shot"})) {
        suite.algorithms.push_back(parse_prune_algorithm(name));
    }
    PruneConfig& p = suite.prune;
    p.rounds = f.get<long>("rounds", p.rounds);
    p.round_epochs = f.opt<long>("round_epochs");
    p.exempt_first = f.get<bool>("exempt_first", p.exempt_first);
    if (f.has("admm")) {
        Fields a(f.raw("admm"), "prune.admm");
        p.admm.rho = a.get<double>("rho", p.admm.rho);
        p.admm.outer_iters = a.get<long>("outer_iters", p.admm.outer_iters);
        p.admm.inner_epochs = a.opt<long>("inner_epochs");
        p.admm.lr = a.opt<double>("lr");
        a.done();
    }
    f.done();
}

ojson layer_json(const Layer& layer) {
    return std::visit(
        [](const auto& l) -> ojson {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, DenseLayer>) {
                return {{"type", "dense"}, {"in", l.in}, {"out", l.out}};
            } else if constexpr (std::is_same_v<L, Conv2DLayer>) {
                return {{"type", "conv2d"},
                        {"in_channels", l.in_channels},
                        {"out_channels", l.out_channels},
                        {"kernel_size", l.kernel_size},
                        {"stride", l.stride}};
            } else if constexpr (std::is_same_v<L, ReluLayer>) {
                return {{"type", "relu"}};
            } else {
                return {{"type", "flatten"}};
            }
        },
        layer);
}

template <typename V>
ojson opt_json(const std::optional<V>& v) {
    return v ? ojson(*v) : ojson();
}

}  // namespace

void stamp_digest(ExperimentConfig& c) {
    c.digest = digest_hex(fnv1a64(canonical_config(c)));
    c.suite.config_digest = c.digest;
}

std::string canonical_config(const ExperimentConfig& c) {
    ojson j;
    ojson model;
    model["input_shape"] = c.model.input_shape;
    model["classes"] = c.model.class_count;
    model["layers"] = ojson::array();
    for (const auto& l : c.model.layers) model["layers"].push_back(layer_json(l));
    j["model"] = model;
    const auto& d = c.dataset;
    ojson data{{"kind", d.kind}, {"test_fraction", d.test_fraction}, {"split_seed", d.split_seed}};
    if (d.kind == "spirals") {
        data.update(ojson{{"n", d.n}, {"turns", d.turns}, {"noise", d.noise}, {"seed", d.seed}});
    } else if (d.kind == "blobs") {
        data.update(ojson{{"n", d.n}, {"classes", d.classes}, {"dim", d.dim}, {"spread", d.spread}, {"seed", d.seed}});
    } else {
        data.update(ojson{{"images", d.images.string()}, {"labels", d.labels.string()}});
    }
    j["dataset"] = data;
    const auto& t = c.suite.train;
    j["train"] = {{"epochs", t.epochs},
                  {"lr0", t.lr0},
                  {"milestones", t.milestones},
                  {"decay_factor", t.decay_factor},
                  {"momentum", t.momentum},
                  {"weight_decay", t.weight_decay},
                  {"batch_size", t.batch_size},
                  {"rewind_epoch", opt_json(t.rewind_epoch)},
                  {"augment", {{"horizontal_flip", t.augment.horizontal_flip}, {"crop_padding", t.augment.crop_padding}}}};
    std::vector<std::string> algs;
    for (auto a : c.suite.algorithms) algs.push_back(to_string(a));
    const auto& p = c.suite.prune;
    j["prune"] = {{"algorithms", algs},
                  {"rounds", p.rounds},
                  {"round_epochs", opt_json(p.round_epochs)},
                  {"exempt_first", p.exempt_first},
                  {"admm",
                   {{"rho", p.admm.rho},
                    {"outer_iters", p.admm.outer_iters},
                    {"inner_epochs", opt_json(p.admm.inner_epochs)},
                    {"lr", opt_json(p.admm.lr)}}}};
    std::vector<std::string> regimes;
    for (auto r : c.suite.regimes) regimes.push_back(to_string(r));
    j["regimes"] = regimes;
    j["sparsities"] = c.suite.sparsities;
    j["p_grid"] = c.suite.p_grid;
    j["p_sparse"] = c.suite.p_sparse;
    j["seeds"] = c.suite.seeds;
    j["epsilon"] = c.suite.epsilon;
    j["delta"] = c.suite.delta;
    j["null_trials"] = c.suite.null_trials;
    j["finetune_epochs"] = opt_json(c.suite.finetune_epochs);
    j["precision"] = to_string(c.precision);
    return j.dump();
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    Fields f(j, "config");
    ExperimentConfig c;
    c.model = parse_model(f.raw("model"));
    c.dataset = parse_dataset(f.raw("dataset"), base_dir);
    c.suite.train = parse_train(f.raw("train"));
    if (f.has("prune")) parse_prune(f.raw("prune"), c.suite);
    if (f.has("regimes")) {
        c.suite.regimes.clear();
        for (const auto& name : f.get<std::vector<std::string>>("regimes")) {
            const Regime r = parse_regime(name);
            if (r == Regime::pretrain) throw ConfigError("regimes: pretraining always runs and is not listed");
            c.suite.regimes.push_back(r);
        }
    }
    c.suite.sparsities = f.get<std::vector<double>>("sparsities", c.suite.sparsities);
    c.suite.p_grid = f.get<std::vector<double>>("p_grid", c.suite.p_grid);
    c.suite.p_sparse = f.get<double>("p_sparse", c.suite.p_sparse);
    c.suite.seeds = f.get<std::vector<std::uint64_t>>("seeds", c.suite.seeds);
    c.suite.epsilon = f.get<double>("epsilon", c.suite.epsilon);
    c.suite.delta = f.get<double>("delta", c.suite.delta);
    c.suite.null_trials = f.get<std::size_t>("null_trials", c.suite.null_trials);
    c.suite.finetune_epochs = f.opt<long>("finetune_epochs");
    c.suite.workers = f.get<std::size_t>("workers", c.suite.workers);
    c.output_dir = f.get<std::string>("output_dir", c.output_dir.string());
    if (c.output_dir.is_relative() && !base_dir.empty()) c.output_dir = base_dir / c.output_dir;
    c.precision = parse_precision(f.get<std::string>("precision", "f32"));
    f.done();
    c.suite.validate();
    stamp_digest(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

template <typename T>
Split<T> load_dataset(const DatasetSpec& spec) {
    Dataset<T> data;
    if (spec.kind == "spirals") {
        data = gen_spirals<T>(spec.n, spec.turns, spec.noise, spec.seed);
    } else if (spec.kind == "blobs") {
        data = gen_blobs<T>(spec.n, spec.classes, spec.dim, spec.spread, spec.seed);
    } else if (spec.kind == "idx") {
        data = load_idx<T>(spec.images, spec.labels);
    } else {
        throw ConfigError("unknown dataset kind '" + spec.kind + "'");
    }
    return train_test_split(data, spec.test_fraction, spec.split_seed);
}

template Split<float> load_dataset<float>(const DatasetSpec&);
template Split<double> load_dataset<double>(const DatasetSpec&);

}  // namespace tklab
