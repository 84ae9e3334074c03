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


// Two fiber links, each purified once, joined by a swap.

#include <cstdio>

#include "qrepeater/qrepeater.hpp"

int main() {
    qrep::NoiseParams noise;
    noise.p_hop_dephase = 0.05;
    noise.p_gate2 = 0.005;

    qrep::ChannelModel fiber;
    fiber.hops = 3;

    const qrep::DensityMatrix raw = qrep::segment_link(noise, fiber);
    std::printf("raw link        F = %.6f\n", qrep::bell_fidelity(raw));

    const auto purified = qrep::purify_deutsch(raw, raw, noise);
    std::printf("purified link   F = %.6f  (p = %.4f)\n", purified.fidelity_after, purified.success_probability);

    const auto joined = qrep::entanglement_swap(*purified.post_state, *purified.post_state, true, noise);
    std::printf("swapped link    F = %.6f\n", joined.fidelity_after);

    qrep::RepeaterConfig cfg;
    cfg.segments = 2;
    cfg.hops_per_segment = 3;
    cfg.pairs_per_purification = 2;
    cfg.noise = noise;
    const auto report = qrep::run_repeater(cfg);
    std::printf("run_repeater    F = %.6f  yield = %.4f  rounds = %zu\n", report.final_fidelity, report.yield,
                report.rounds);
    return 0;
}
