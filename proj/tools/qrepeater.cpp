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


// qrepeater CLI: one subcommand per canned experiment.
//
//   qrepeater purify --config configs/purify.ini --mode sampled --trials 100000 --out purify.csv

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "qrepeater/qrepeater.hpp"

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::string mode;
    std::string out;
    std::string format = "csv";
};

int run(qrep::ExperimentKind kind, const Options &opt) {
    qrep::ExperimentSpec spec;
    spec.kind = kind;
    if (!opt.config.empty()) spec = qrep::load_config(opt.config, kind);
    if (opt.seed) spec.seed = *opt.seed;
    if (opt.trials) spec.trials = *opt.trials;
    if (!opt.mode.empty()) spec.mode = qrep::parse_mode(opt.mode);
    const auto format = qrep::parse_format(opt.format);

    const auto rows = qrep::run_experiment(spec);
    if (opt.out.empty()) std::cout << qrep::render(rows, format);
    else qrep::emit(rows, format, opt.out);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Quantum repeater protocol simulator"};
    app.require_subcommand(1);

    Options opt;
    std::optional<qrep::ExperimentKind> chosen;
    for (auto kind : {qrep::ExperimentKind::Channel, qrep::ExperimentKind::Purify, qrep::ExperimentKind::Swap,
                      qrep::ExperimentKind::Repeater, qrep::ExperimentKind::PaperCircuit}) {
        auto *sub = app.add_subcommand(std::string(qrep::to_string(kind)), "run the " +
                                                                               std::string(qrep::to_string(kind)) +
                                                                               " experiment");
        sub->add_option("--config", opt.config, "INI experiment file")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "master seed (overrides the config)");
        sub->add_option("--trials", opt.trials, "trials per sweep point (overrides the config)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--mode", opt.mode, "exact or sampled")->check(CLI::IsMember({"exact", "sampled"}));
        sub->add_option("--out", opt.out, "output file; stdout when omitted");
        sub->add_option("--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->callback([&chosen, kind] { chosen = kind; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    }

    try {
        return run(*chosen, opt);
    } catch (const std::exception &e) {
        std::cerr << "qrepeater " << qrep::to_string(*chosen) << ": error: " << e.what() << '\n';
        return 1;
    }
}
