// Copyright 2026 The qrepeater Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment specs, INI config parsing, sweep execution and CSV/JSON output.
//
// Config layout (unknown sections and keys are rejected):
//
//   [experiment]  kind, sweep, values       values: "a,b,c" or "start:stop:step"
//   [noise]       p_gate1, p_gate2, p_hop_dephase, p_meas
//   [channel]     length_km, attenuation_length_km, hops
//   [run]         trials, seed, mode        mode: exact | sampled
//   [purify]      variant, pairs, input, input_fidelity, circuit
//   [swap]        input, input_fidelity, correction
//   [repeater]    segments, pairs_per_purification, variant, circuit, purify_final_link
//
// Only the section matching the experiment kind may appear besides the
// first four.

#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qrepeater/protocols.hpp"
#include "qrepeater/repeater.hpp"

namespace qrep {

enum class ExperimentKind { Channel, Purify, Swap, Repeater, PaperCircuit };

inline std::string_view to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::Channel: return "channel";
    case ExperimentKind::Purify: return "purify";
    case ExperimentKind::Swap: return "swap";
    case ExperimentKind::Repeater: return "repeater";
    case ExperimentKind::PaperCircuit: return "paper-circuit";
    }
    return "?";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
    for (auto k : {ExperimentKind::Channel, ExperimentKind::Purify, ExperimentKind::Swap, ExperimentKind::Repeater,
                   ExperimentKind::PaperCircuit})
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown experiment kind '" + std::string(s) + "'");
}

enum class InputKind { Werner, Dephased, Channel };

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::Channel;
    std::string sweep_param = "none";
    std::vector<double> sweep_values{0.0};
    NoiseParams noise;
    ChannelModel channel;
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    RunMode mode = RunMode::Exact;

    // purify / swap inputs
    InputKind input = InputKind::Werner;
    double input_fidelity = 0.85;
    PurifyVariant variant = PurifyVariant::Deutsch;
    MultiPairCircuit circuit = MultiPairCircuit::Default;
    std::size_t pairs = 2;
    bool correction = true;

    // repeater
    std::size_t segments = 2;
    std::size_t pairs_per_purification = 1;
    bool purify_final_link = false;
};

struct ResultRow {
    std::string experiment;
    std::string sweep_param;
    double sweep_value = 0.0;
    double fidelity_mean = 0.0;
    double fidelity_stderr = 0.0;
    double yield_mean = 0.0;
    double yield_stderr = 0.0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    std::string mode;

    friend bool operator==(const ResultRow &, const ResultRow &) = default;
};

inline constexpr std::string_view kCsvHeader =
    "experiment,sweep_param,sweep_value,fidelity_mean,fidelity_stderr,yield_mean,yield_stderr,trials,seed,mode";

//==============================================================================
// Sweep parameters
//==============================================================================

// 10 significant digits.
inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

namespace detail {

enum class ParamType { Probability, Fidelity, Count, Length };

struct ParamInfo {
    ParamType type;
    std::size_t min_count = 0;
};

inline const std::map<std::string, ParamInfo> &sweep_params(ExperimentKind kind) {
    using P = ParamType;
    static const std::map<ExperimentKind, std::map<std::string, ParamInfo>> table{
        {ExperimentKind::Channel,
         {{"hops", {P::Count}},
          {"p_hop_dephase", {P::Probability}},
          {"p_gate2", {P::Probability}},
          {"length_km", {P::Length}}}},
        {ExperimentKind::Purify,
         {{"pairs", {P::Count, 2}},
          {"input_fidelity", {P::Fidelity}},
          {"hops", {P::Count}},
          {"p_hop_dephase", {P::Probability}},
          {"p_gate1", {P::Probability}},
          {"p_gate2", {P::Probability}},
          {"p_meas", {P::Probability}}}},
        {ExperimentKind::Swap,
         {{"input_fidelity", {P::Fidelity}},
          {"hops", {P::Count}},
          {"p_hop_dephase", {P::Probability}},
          {"p_gate1", {P::Probability}},
          {"p_gate2", {P::Probability}},
          {"p_meas", {P::Probability}}}},
        {ExperimentKind::Repeater,
         {{"segments", {P::Count, 1}},
          {"pairs", {P::Count, 1}},
          {"hops", {P::Count}},
          {"length_km", {P::Length}},
          {"p_hop_dephase", {P::Probability}},
          {"p_gate1", {P::Probability}},
          {"p_gate2", {P::Probability}},
          {"p_meas", {P::Probability}}}},
        {ExperimentKind::PaperCircuit,
         {{"hops", {P::Count}},
          {"p_hop_dephase", {P::Probability}},
          {"p_gate1", {P::Probability}},
          {"p_gate2", {P::Probability}},
          {"p_meas", {P::Probability}}}},
    };
    return table.at(kind);
}

inline std::size_t as_count(double v) { return static_cast<std::size_t>(std::llround(v)); }

inline void check_sweep_value(const std::string &param, const ParamInfo &info, double v) {
    const std::string where = "sweep value " + format_number(v) + " for '" + param + "'";
    if (!std::isfinite(v)) throw std::invalid_argument(where + " is not finite");
    switch (info.type) {
    case ParamType::Probability:
    case ParamType::Fidelity:
        if (v < 0.0 || v > 1.0) throw std::invalid_argument(where + " is outside [0, 1]");
        break;
    case ParamType::Length:
        if (v < 0.0) throw std::invalid_argument(where + " is negative");
        break;
    case ParamType::Count:
        if (v < 0.0 || std::abs(v - std::round(v)) > 1e-9)
            throw std::invalid_argument(where + " is not a nonnegative integer");
        if (as_count(v) < info.min_count)
            throw std::invalid_argument(where + " is below the minimum " + std::to_string(info.min_count));
        break;
    }
}

inline void set_param(ExperimentSpec &spec, const std::string &param, double v) {
    if (param == "hops") spec.channel.hops = as_count(v);
    else if (param == "length_km") spec.channel.length_km = v;
    else if (param == "p_hop_dephase") spec.noise.p_hop_dephase = v;
    else if (param == "p_gate1") spec.noise.p_gate1 = v;
    else if (param == "p_gate2") spec.noise.p_gate2 = v;
    else if (param == "p_meas") spec.noise.p_meas = v;
    else if (param == "input_fidelity") spec.input_fidelity = v;
    else if (param == "segments") spec.segments = as_count(v);
    else if (param == "pairs") {
        if (spec.kind == ExperimentKind::Repeater) spec.pairs_per_purification = as_count(v);
        else spec.pairs = as_count(v);
    } else throw std::invalid_argument("unknown sweep parameter '" + param + "'");
}

} // namespace detail

inline void validate(const ExperimentSpec &spec) {
    spec.noise.validate();
    spec.channel.validate();
    if (spec.trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (!(spec.input_fidelity >= 0.0 && spec.input_fidelity <= 1.0))
        throw std::invalid_argument("input_fidelity must be in [0, 1]");
    if (spec.sweep_values.empty()) throw std::invalid_argument("sweep has no values");
    if (spec.sweep_param != "none") {
        const auto &params = detail::sweep_params(spec.kind);
        const auto it = params.find(spec.sweep_param);
        if (it == params.end())
            throw std::invalid_argument("parameter '" + spec.sweep_param + "' cannot be swept in a " +
                                        std::string(to_string(spec.kind)) + " experiment");
        for (double v : spec.sweep_values) detail::check_sweep_value(spec.sweep_param, it->second, v);
    }
    if (spec.kind == ExperimentKind::Purify && spec.pairs < 2) throw std::invalid_argument("purify: pairs must be >= 2");
    if (spec.kind == ExperimentKind::Repeater && spec.segments < 1)
        throw std::invalid_argument("repeater: segments must be >= 1");
}

//==============================================================================
// Config parsing
//==============================================================================

namespace detail {

inline std::string trim(std::string s) {
    const auto cut = s.find_first_of(";#");
    if (cut != std::string::npos) s.erase(cut);
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string &key, const std::string &text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception &) {
        throw std::invalid_argument("'" + key + "': expected a number, got '" + text + "'");
    }
    if (used != text.size()) throw std::invalid_argument("'" + key + "': expected a number, got '" + text + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string &key, const std::string &text) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
        throw std::invalid_argument("'" + key + "': expected a nonnegative integer, got '" + text + "'");
    try {
        return std::stoull(text);
    } catch (const std::exception &) {
        throw std::invalid_argument("'" + key + "': integer out of range '" + text + "'");
    }
}

inline bool parse_bool(const std::string &key, const std::string &text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw std::invalid_argument("'" + key + "': expected true or false, got '" + text + "'");
}

inline std::vector<double> parse_values(const std::string &text) {
    std::vector<double> values;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(trim(p));
        if (parts.size() != 3) throw std::invalid_argument("values: range must be start:stop:step");
        const double start = parse_double("values", parts[0]);
        const double stop = parse_double("values", parts[1]);
        const double step = parse_double("values", parts[2]);
        if (!(step > 0.0) || stop < start) throw std::invalid_argument("values: empty or invalid range");
        const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        if (count > 100000) throw std::invalid_argument("values: range has too many points");
        for (std::size_t i = 0; i < count; ++i) values.push_back(start + static_cast<double>(i) * step);
        return values;
    }
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) values.push_back(parse_double("values", trim(item)));
    if (values.empty()) throw std::invalid_argument("values: empty list");
    return values;
}

inline PurifyVariant parse_variant(const std::string &text) {
    if (text == "bennett") return PurifyVariant::Bennett;
    if (text == "deutsch") return PurifyVariant::Deutsch;
    throw std::invalid_argument("variant: expected bennett or deutsch, got '" + text + "'");
}

inline MultiPairCircuit parse_circuit(const std::string &text) {
    if (text == "default") return MultiPairCircuit::Default;
    if (text == "fanout") return MultiPairCircuit::Fanout;
    if (text == "cyclic") return MultiPairCircuit::CyclicCode;
    throw std::invalid_argument("circuit: expected default, fanout or cyclic, got '" + text + "'");
}

inline InputKind parse_input(const std::string &text) {
    if (text == "werner") return InputKind::Werner;
    if (text == "dephased") return InputKind::Dephased;
    if (text == "channel") return InputKind::Channel;
    throw std::invalid_argument("input: expected werner, dephased or channel, got '" + text + "'");
}

} // namespace detail

inline RunMode parse_mode(const std::string &text) {
    if (text == "exact") return RunMode::Exact;
    if (text == "sampled") return RunMode::Sampled;
    throw std::invalid_argument("mode: expected exact or sampled, got '" + text + "'");
}

// `kind` is the experiment being run; a config naming a different kind is an
// error.
inline ExperimentSpec parse_config(std::istream &in, ExperimentKind kind) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error &e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }

    ExperimentSpec spec;
    spec.kind = kind;
    const std::map<std::string, std::set<std::string>> allowed{
        {"experiment", {"kind", "sweep", "values"}},
        {"noise", {"p_gate1", "p_gate2", "p_hop_dephase", "p_meas"}},
        {"channel", {"length_km", "attenuation_length_km", "hops"}},
        {"run", {"trials", "seed", "mode"}},
        {"purify", {"variant", "pairs", "input", "input_fidelity", "circuit"}},
        {"swap", {"input", "input_fidelity", "correction"}},
        {"repeater", {"segments", "pairs_per_purification", "variant", "circuit", "purify_final_link"}},
    };
    const std::set<std::string> kind_sections{"purify", "swap", "repeater"};

    for (const auto &[section, body] : tree) {
        const auto it = allowed.find(section);
        if (it == allowed.end() || (!body.data().empty() && body.empty()))
            throw std::invalid_argument("config: unknown section or top-level key '" + section + "'");
        if (kind_sections.count(section) && section != to_string(kind))
            throw std::invalid_argument("config: section [" + section + "] does not apply to a " +
                                        std::string(to_string(kind)) + " experiment");
        for (const auto &[key, node] : body) {
            if (!it->second.count(key))
                throw std::invalid_argument("config: unknown key '" + key + "' in [" + section + "]");
            const std::string value = detail::trim(node.data());
            const std::string name = section + "." + key;
            if (section == "experiment") {
                if (key == "kind") {
                    if (parse_experiment_kind(value) != kind)
                        throw std::invalid_argument("config: describes a '" + value + "' experiment, not '" +
                                                    std::string(to_string(kind)) + "'");
                } else if (key == "sweep") spec.sweep_param = value;
                else spec.sweep_values = detail::parse_values(value);
            } else if (section == "noise") {
                const double v = detail::parse_double(name, value);
                if (key == "p_gate1") spec.noise.p_gate1 = v;
                else if (key == "p_gate2") spec.noise.p_gate2 = v;
                else if (key == "p_hop_dephase") spec.noise.p_hop_dephase = v;
                else spec.noise.p_meas = v;
            } else if (section == "channel") {
                if (key == "hops") spec.channel.hops = detail::parse_u64(name, value);
                else if (key == "length_km") spec.channel.length_km = detail::parse_double(name, value);
                else spec.channel.attenuation_length_km = detail::parse_double(name, value);
            } else if (section == "run") {
                if (key == "trials") spec.trials = detail::parse_u64(name, value);
                else if (key == "seed") spec.seed = detail::parse_u64(name, value);
                else spec.mode = parse_mode(value);
            } else if (section == "purify" || section == "swap") {
                if (key == "variant") spec.variant = detail::parse_variant(value);
                else if (key == "pairs") spec.pairs = detail::parse_u64(name, value);
                else if (key == "input") spec.input = detail::parse_input(value);
                else if (key == "input_fidelity") spec.input_fidelity = detail::parse_double(name, value);
                else if (key == "circuit") spec.circuit = detail::parse_circuit(value);
                else spec.correction = detail::parse_bool(name, value);
            } else {
                if (key == "segments") spec.segments = detail::parse_u64(name, value);
                else if (key == "pairs_per_purification") spec.pairs_per_purification = detail::parse_u64(name, value);
                else if (key == "variant") spec.variant = detail::parse_variant(value);
                else if (key == "circuit") spec.circuit = detail::parse_circuit(value);
                else spec.purify_final_link = detail::parse_bool(name, value);
            }
        }
    }
    if (spec.sweep_param == "none" && tree.get_optional<std::string>("experiment.values"))
        throw std::invalid_argument("config: values given without a sweep parameter");
    validate(spec);
    return spec;
}

inline ExperimentSpec load_config(const std::filesystem::path &path, ExperimentKind kind) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config '" + path.string() + "'");
    try {
        return parse_config(in, kind);
    } catch (const std::invalid_argument &e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

//==============================================================================
// Running
//==============================================================================

namespace detail {

inline DensityMatrix input_pair(const ExperimentSpec &spec) {
    switch (spec.input) {
    case InputKind::Werner: return werner(spec.input_fidelity);
    case InputKind::Dephased: return dephased_bell(spec.input_fidelity);
    case InputKind::Channel: return segment_link(spec.noise, spec.channel);
    }
    throw std::invalid_argument("unknown input kind");
}

struct Estimate {
    double fidelity = 0.0, fidelity_stderr = 0.0, yield = 0.0, yield_stderr = 0.0;
    std::size_t trials = 1;
};

inline Estimate bernoulli_estimate(const std::vector<double> &hits) {
    const double p = mean(hits);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(hits.size())), 0.0, 0.0, hits.size()};
}

inline Estimate run_channel(const ExperimentSpec &spec, std::uint64_t seed) {
    const DensityMatrix link = segment_link(spec.noise, spec.channel);
    const double p_gen = spec.channel.generation_probability();
    if (spec.mode == RunMode::Exact) return {bell_fidelity(link), 0.0, p_gen, 0.0, 1};
    // Each trial is one generation attempt plus one Bell-basis readout of the
    // delivered pair; Phi+ outcomes estimate the fidelity.
    std::vector<double> weights;
    for (const auto &b : bell_measure(link, 0, 1)) weights.push_back(b.probability);
    const auto draws = parallel_map(spec.trials, [&](std::size_t t) {
        Rng rng = Rng::for_stream(seed, t);
        const double generated = attempt_generation(spec.channel, rng) ? 1.0 : 0.0;
        const double phi_plus = sample_index(weights, rng) == 0 ? 1.0 : 0.0;
        return std::pair{phi_plus, generated};
    });
    std::vector<double> f, y;
    for (const auto &[a, b] : draws) {
        f.push_back(a);
        y.push_back(b);
    }
    Estimate e = bernoulli_estimate(f);
    const Estimate g = bernoulli_estimate(y);
    e.yield = g.fidelity;
    e.yield_stderr = g.fidelity_stderr;
    return e;
}

inline Estimate run_purify(const ExperimentSpec &spec, std::uint64_t seed) {
    if (2 * spec.pairs > kExactQubitBudget)
        throw std::invalid_argument("qubit budget exceeded: " + std::to_string(spec.pairs) + " pairs need " +
                                    std::to_string(2 * spec.pairs) + " qubits (limit " +
                                    std::to_string(kExactQubitBudget) + ")");
    const std::vector<DensityMatrix> pairs(spec.pairs, input_pair(spec));
    if (spec.mode == RunMode::Exact) {
        const PurifyResult r = purify_multi(pairs, spec.variant, spec.noise, spec.circuit);
        return {r.fidelity_after, 0.0, r.success_probability, 0.0, 1};
    }
    const PurificationSampler sampler(pairs, spec.variant, spec.noise, spec.circuit);
    const auto shots = parallel_map(spec.trials, [&](std::size_t t) {
        Rng rng = Rng::for_stream(seed, t);
        const auto shot = sampler(rng);
        return shot.success ? bell_fidelity(*shot.post_state) : -1.0;
    });
    std::vector<double> f, y;
    for (double s : shots) {
        y.push_back(s >= 0.0 ? 1.0 : 0.0);
        if (s >= 0.0) f.push_back(s);
    }
    const Sample fs = summarize(f);
    const Estimate ys = bernoulli_estimate(y);
    return {fs.mean, fs.std_error, ys.fidelity, ys.fidelity_stderr, spec.trials};
}

inline Estimate run_swap(const ExperimentSpec &spec, std::uint64_t seed) {
    const DensityMatrix link = input_pair(spec);
    if (spec.mode == RunMode::Exact)
        return {entanglement_swap(link, link, spec.correction, spec.noise).fidelity_after, 0.0, 1.0, 0.0, 1};
    const SwapSampler sampler(link, link, spec.noise, spec.correction);
    const auto f = parallel_map(spec.trials, [&](std::size_t t) {
        Rng rng = Rng::for_stream(seed, t);
        return bell_fidelity(sampler(rng));
    });
    const Sample s = summarize(f);
    return {s.mean, s.std_error, 1.0, 0.0, spec.trials};
}

inline Estimate run_repeater_point(const ExperimentSpec &spec, std::uint64_t seed) {
    RepeaterConfig cfg;
    cfg.segments = spec.segments;
    cfg.hops_per_segment = spec.channel.hops;
    cfg.pairs_per_purification = spec.pairs_per_purification;
    cfg.variant = spec.variant;
    cfg.circuit = spec.circuit;
    cfg.noise = spec.noise;
    cfg.channel = spec.channel;
    cfg.trials = spec.mode == RunMode::Exact ? 1 : spec.trials;
    cfg.seed = seed;
    cfg.mode = spec.mode;
    cfg.purify_final_link = spec.purify_final_link;
    const RepeaterReport r = run_repeater(cfg);
    return {r.final_fidelity, r.fidelity_stderr, r.yield, r.yield_stderr, r.trials};
}

inline Estimate run_paper_point(const ExperimentSpec &spec, std::uint64_t seed) {
    const PaperCircuitResult r = run_paper_circuit(spec.noise, spec.channel, spec.trials, seed, spec.mode);
    return {r.fidelity, r.fidelity_stderr, r.yield, r.yield_stderr, r.trials};
}

} // namespace detail

// One row per sweep value, in the order given. Sweep point i draws from the
// stream derive_seed(seed, i).
inline std::vector<ResultRow> run_experiment(const ExperimentSpec &spec) {
    validate(spec);
    std::vector<ResultRow> rows;
    for (std::size_t i = 0; i < spec.sweep_values.size(); ++i) {
        ExperimentSpec point = spec;
        const double value = spec.sweep_values[i];
        if (spec.sweep_param != "none") detail::set_param(point, spec.sweep_param, value);
        const std::uint64_t seed = derive_seed(spec.seed, i);
        detail::Estimate e;
        try {
            switch (spec.kind) {
            case ExperimentKind::Channel: e = detail::run_channel(point, seed); break;
            case ExperimentKind::Purify: e = detail::run_purify(point, seed); break;
            case ExperimentKind::Swap: e = detail::run_swap(point, seed); break;
            case ExperimentKind::Repeater: e = detail::run_repeater_point(point, seed); break;
            case ExperimentKind::PaperCircuit: e = detail::run_paper_point(point, seed); break;
            }
        } catch (const std::invalid_argument &err) {
            throw std::invalid_argument(std::string(to_string(spec.kind)) + " at " + spec.sweep_param + "=" +
                                        format_number(value) + ": " + err.what());
        }
        if (spec.mode == RunMode::Exact) e.trials = 1;
        rows.push_back({std::string(to_string(spec.kind)), spec.sweep_param, value, e.fidelity, e.fidelity_stderr,
                        e.yield, e.yield_stderr, e.trials, spec.seed, std::string(to_string(spec.mode))});
    }
    return rows;
}

//==============================================================================
// Output
//==============================================================================

enum class OutputFormat { Csv, Json };

inline OutputFormat parse_format(const std::string &text) {
    if (text == "csv") return OutputFormat::Csv;
    if (text == "json") return OutputFormat::Json;
    throw std::invalid_argument("format: expected csv or json, got '" + text + "'");
}

inline double round_sig10(double v) { return std::stod(format_number(v)); }

inline std::string to_csv(const std::vector<ResultRow> &rows) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto &r : rows) {
        out += r.experiment + ',' + r.sweep_param + ',' + format_number(r.sweep_value) + ',' +
               format_number(r.fidelity_mean) + ',' + format_number(r.fidelity_stderr) + ',' +
               format_number(r.yield_mean) + ',' + format_number(r.yield_stderr) + ',' + std::to_string(r.trials) +
               ',' + std::to_string(r.seed) + ',' + r.mode + '\n';
    }
    return out;
}

inline std::string to_json(const std::vector<ResultRow> &rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto &r : rows) {
        arr.push_back({{"experiment", r.experiment},
                       {"sweep_param", r.sweep_param},
                       {"sweep_value", round_sig10(r.sweep_value)},
                       {"fidelity_mean", round_sig10(r.fidelity_mean)},
                       {"fidelity_stderr", round_sig10(r.fidelity_stderr)},
                       {"yield_mean", round_sig10(r.yield_mean)},
                       {"yield_stderr", round_sig10(r.yield_stderr)},
                       {"trials", r.trials},
                       {"seed", r.seed},
                       {"mode", r.mode}});
    }
    return arr.dump(2) + "\n";
}

inline std::string render(const std::vector<ResultRow> &rows, OutputFormat format) {
    if (rows.empty()) throw std::invalid_argument("emit: no rows to write");
    return format == OutputFormat::Csv ? to_csv(rows) : to_json(rows);
}

// Writes nothing when rows is empty.
inline void emit(const std::vector<ResultRow> &rows, OutputFormat format, const std::filesystem::path &path) {
    const std::string text = render(rows, format);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("emit: cannot write '" + path.string() + "'");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("emit: write to '" + path.string() + "' failed");
}

inline std::vector<ResultRow> parse_csv(std::istream &in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw std::invalid_argument("csv: header mismatch");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 10) throw std::invalid_argument("csv: expected 10 fields in '" + line + "'");
        rows.push_back({f[0], f[1], std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
                        std::stod(f[6]), static_cast<std::size_t>(std::stoull(f[7])), std::stoull(f[8]), f[9]});
    }
    return rows;
}

} // namespace qrep
