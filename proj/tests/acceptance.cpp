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


// Acceptance run: one PASS/FAIL line per criterion, with the measured values
// and the wall time against each criterion's budget. Exit status is nonzero
// if any line fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>

#include "oracles.hpp"
#include "qrepeater/qrepeater.hpp"

using namespace qrep;

namespace {

struct Verdict {
    bool ok = true;
    std::ostringstream note;

    void require(bool cond, const std::string &what) {
        if (!cond) {
            ok = false;
            note << " [violated: " << what << "]";
        }
    }
};

int failures = 0;

void criterion(const char *name, double budget_s, const std::function<void(Verdict &)> &body) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(v);
    } catch (const std::exception &e) {
        v.ok = false;
        v.note << " [exception: " << e.what() << "]";
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = dt < budget_s;
    const bool pass = v.ok && in_time;
    if (!pass) ++failures;
    std::printf("%s %s:%s (%.2f s of %.0f s%s)\n", pass ? "PASS" : "FAIL", name, v.note.str().c_str(), dt, budget_s,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
}

std::string config_path(const std::string &name) {
    return (std::filesystem::path(QREP_CONFIG_DIR) / (name + ".ini")).string();
}

} // namespace

int main() {
    criterion("swap law", 1, [](Verdict &v) {
        double worst = 0;
        for (int i = 0; i <= 5; ++i) {
            const double f = 0.5 + 0.1 * i;
            const double got = entanglement_swap(werner(f), werner(f), true).fidelity_after;
            worst = std::max(worst, std::abs(got - (f * f + (1 - f) * (1 - f) / 3)));
        }
        const double at85 = entanglement_swap(werner(0.85), werner(0.85), true).fidelity_after;
        v.note << " max |F' - (F^2 + (1-F)^2/3)| = " << worst << ", F=0.85 -> " << at85;
        v.require(worst <= 1e-9, "formula within 1e-9");
        v.require(std::abs(at85 - 0.73) <= 1e-9, "0.85 -> 0.73");
    });

    criterion("swap approximation", 1, [](Verdict &v) {
        double worst = 0;
        for (int i = 0; i <= 50; ++i) {
            const double f = 0.95 + 0.001 * i;
            worst = std::max(worst, std::abs(entanglement_swap(werner(f), werner(f), true).fidelity_after - f * f));
        }
        v.note << " max |F' - F^2| on [0.95, 1] = " << worst;
        v.require(worst <= 0.01, "within 0.01");
    });

    criterion("Bennett threshold and monotonicity", 5, [](Verdict &v) {
        double worst = 0;
        bool up = true, down = true;
        for (int i = 1; i <= 15; ++i) {
            const double f = 0.25 + 0.05 * i;
            if (f >= 0.999) break;
            const auto r = purify_bennett(werner(f), werner(f));
            const auto o = oracle::purify_two(oracle::werner(f), oracle::werner(f), false);
            worst = std::max(worst, std::abs(r.fidelity_after - oracle::fphi(o.state)));
            worst = std::max(worst, std::abs(r.success_probability - o.probability));
            if (f > 0.5 + 1e-9) up = up && r.fidelity_after > f;
            if (f < 0.5 - 1e-9) down = down && r.fidelity_after < f;
        }
        v.note << " oracle gap " << worst << ", F' > F above 1/2: " << (up ? "yes" : "no")
               << ", F' < F in (1/4, 1/2): " << (down ? "yes" : "no");
        v.require(worst <= 1e-10, "oracle agreement 1e-10");
        v.require(up && down, "threshold at 1/2");
    });

    criterion("Deutsch on non-Werner input", 5, [](Verdict &v) {
        const auto r = purify_deutsch(dephased_bell(0.85), dephased_bell(0.85));
        const auto o = oracle::purify_two(oracle::dephased(0.85), oracle::dephased(0.85), true);
        const double gap = std::abs(r.fidelity_after - oracle::fphi(o.state));
        v.note << " F' = " << r.fidelity_after << " (oracle gap " << gap << ")";
        v.require(r.fidelity_after > 0.85, "F' > 0.85");
        v.require(gap <= 1e-10, "oracle agreement 1e-10");
    });

    criterion("five-pair target", 30, [](Verdict &v) {
        const auto r = purify_multi(std::vector<DensityMatrix>(5, werner(0.85)), PurifyVariant::Deutsch);
        v.note << " F' = " << r.fidelity_after << ", p = " << r.success_probability << " (target p 0.44 +/- 0.05)";
        v.require(r.fidelity_after >= 0.99, "F' >= 0.99");
        if (std::abs(r.success_probability - 0.44) > 0.05) v.note << " [p outside band; recorded, not gating]";
    });

    criterion("channel closed form", 5, [](Verdict &v) {
        double worst = 0;
        for (double p : {0.05, 0.1, 0.2}) {
            ExperimentSpec spec;
            spec.kind = ExperimentKind::Channel;
            spec.noise.p_hop_dephase = p;
            spec.sweep_param = "hops";
            spec.sweep_values = {0, 1, 2, 3, 4, 5, 6, 7, 8};
            for (const auto &row : run_experiment(spec))
                worst = std::max(worst, std::abs(row.fidelity_mean - (1 + std::pow(1 - 2 * p, row.sweep_value)) / 2));
        }
        v.note << " max deviation " << worst;
        v.require(worst <= 1e-9, "within 1e-9");
    });

    criterion("attenuation sampling", 5, [](Verdict &v) {
        ChannelModel ch;
        ch.length_km = 50;
        ch.attenuation_length_km = 50;
        Rng rng(derive_seed(2026, 1));
        const int n = 100000;
        int hits = 0;
        for (int i = 0; i < n; ++i) hits += attempt_generation(ch, rng);
        const double p = std::exp(-1.0), rate = hits / double(n);
        const double z = (rate - p) / std::sqrt(p * (1 - p) / n);
        v.note << " rate " << rate << " vs e^-1 = " << p << ", z = " << z;
        v.require(std::abs(z) < 4, "within 4 sigma");
    });

    criterion("protocol validators", 10, [](Verdict &v) {
        std::mt19937_64 gen(404);
        const DensityMatrix phi(phi_plus());
        double worst = 0;
        for (int i = 0; i < 100; ++i) {
            const PureState psi(oracle::random_ket(1, gen));
            worst = std::max(worst, 1 - fidelity(teleport(DensityMatrix(psi), phi), psi));
        }
        for (unsigned c = 0; c < 4; ++c) worst = std::max(worst, 1 - superdense_decode(c, phi)[c]);
        v.note << " max shortfall from 1: " << worst;
        v.require(worst <= 1e-10, "exact within 1e-10");
    });

    criterion("round-count law", 30, [](Verdict &v) {
        for (std::size_t n : {1U, 2U, 3U, 4U, 8U}) {
            RepeaterConfig c;
            c.segments = n;
            c.hops_per_segment = 2;
            c.pairs_per_purification = 2;
            c.noise.p_hop_dephase = 0.05;
            const auto r = run_repeater(c);
            v.note << " n=" << n << ":" << r.rounds;
            v.require(r.rounds == ceil_log2(n), "rounds for n=" + std::to_string(n));
            v.require(r.per_round.size() == r.rounds, "per-round stats for n=" + std::to_string(n));
        }
    });

    criterion("exact/sampled concordance", 300, [](Verdict &v) {
        struct Cfg {
            std::size_t segments;
            double p_gate2;
        };
        for (const Cfg k : {Cfg{2, 0.0}, Cfg{3, 0.01}, Cfg{4, 0.02}}) {
            RepeaterConfig c;
            c.segments = k.segments;
            c.hops_per_segment = 2;
            c.pairs_per_purification = 2;
            c.noise.p_hop_dephase = 0.08;
            c.noise.p_meas = 0.02;
            c.noise.p_gate2 = k.p_gate2;
            const auto exact = run_repeater(c);
            c.mode = RunMode::Sampled;
            c.trials = 100000;
            c.seed = 20260;
            const auto s = run_repeater(c);
            const double zf = (s.final_fidelity - exact.final_fidelity) / s.fidelity_stderr;
            const double zy =
                (s.yield - exact.yield) / std::sqrt(exact.yield * (1 - exact.yield) / static_cast<double>(c.trials));
            char buf[200];
            std::snprintf(buf, sizeof buf, " [n=%zu: F %.5f/%.5f z=%.2f, y %.5f/%.5f z=%.2f]", k.segments,
                          exact.final_fidelity, s.final_fidelity, zf, exact.yield, s.yield, zy);
            v.note << buf;
            v.require(std::abs(zf) < 4 && std::abs(zy) < 4, "4 sigma for n=" + std::to_string(k.segments));
        }
    });

    criterion("qualitative trends", 300, [](Verdict &v) {
        // (a) fidelity falls with hops under channel noise
        ExperimentSpec channel;
        channel.kind = ExperimentKind::Channel;
        channel.noise.p_hop_dephase = 0.05;
        channel.noise.p_gate2 = 0.01;
        channel.sweep_param = "hops";
        channel.sweep_values = {0, 1, 2, 3, 4, 5, 6, 7, 8};
        const auto rows = run_experiment(channel);
        bool falling = true;
        for (std::size_t i = 1; i < rows.size(); ++i) falling = falling && rows[i].fidelity_mean < rows[i - 1].fidelity_mean;
        v.note << " channel F(0..8 hops) " << rows.front().fidelity_mean << " -> " << rows.back().fidelity_mean
               << (falling ? " decreasing;" : " NOT decreasing;");
        v.require(falling, "monotone decay with hops");

        // (b) 3-pair purification loses to 2-pair once gate noise is large enough
        const auto two = run_experiment(load_config(config_path("purify_gate_noise_2pairs"), ExperimentKind::Purify));
        const auto three = run_experiment(load_config(config_path("purify_gate_noise_3pairs"), ExperimentKind::Purify));
        std::optional<double> crossover;
        for (std::size_t i = 0; i < two.size(); ++i)
            if (!crossover && three[i].fidelity_mean < two[i].fidelity_mean) crossover = two[i].sweep_value;
        v.note << " at p_gate2=0: F2 " << two.front().fidelity_mean << ", F3 " << three.front().fidelity_mean;
        if (crossover) v.note << "; 3 pairs fall below 2 pairs from p_gate2 = " << *crossover;
        else v.note << "; no crossover in [0, 0.2]";
        v.require(three.front().fidelity_mean > two.front().fidelity_mean, "3 pairs ahead without gate noise");
        v.require(crossover.has_value(), "crossover within [0, 0.2]");
    });

    criterion("determinism", 60, [](Verdict &v) {
        for (auto kind : {ExperimentKind::Channel, ExperimentKind::Purify, ExperimentKind::Swap,
                          ExperimentKind::Repeater, ExperimentKind::PaperCircuit}) {
            auto spec = load_config(config_path(std::string(to_string(kind))), kind);
            for (auto mode : {RunMode::Exact, RunMode::Sampled}) {
                spec.mode = mode;
                spec.trials = std::min<std::size_t>(spec.trials, 5000);
                const std::string a = to_csv(run_experiment(spec));
                const std::string b = to_csv(run_experiment(spec));
                v.require(a == b, std::string(to_string(kind)) + " " + std::string(to_string(mode)));
            }
        }
        v.note << " 5 canned experiments x {exact, sampled at <= 5000 trials}, two runs each";
    });

    std::printf("%d failure(s)\n", failures);
    return failures == 0 ? 0 : 1;
}
