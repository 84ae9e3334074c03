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


#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "qrepeater/protocols.hpp"

using namespace qrep;
using Catch::Approx;

namespace {

// Full-space evaluation of a bilateral circuit on n pairs, heralded on every
// sacrificial pair reading equal bits on both sides. Noiseless.
oracle::Herald full_space(const std::vector<oracle::Mat> &pairs, const BilateralCircuit &circuit) {
    const std::size_t n = 2 * pairs.size();
    oracle::Mat rho = pairs[0];
    for (std::size_t k = 1; k < pairs.size(); ++k) rho = oracle::kron_low(rho, pairs[k]);
    for (const auto &g : circuit.gates) {
        const std::size_t a = 2 * g.pair, b = 2 * g.pair + 1;
        switch (g.op) {
        case BilateralOp::H:
            rho = oracle::conj(oracle::on(oracle::H(), a, n) * oracle::on(oracle::H(), b, n), rho);
            break;
        case BilateralOp::Rx:
            rho = oracle::conj(
                oracle::on(oracle::Rx(oracle::kPi / 2), a, n) * oracle::on(oracle::Rx(-oracle::kPi / 2), b, n), rho);
            break;
        case BilateralOp::CNOT:
            rho = oracle::conj(oracle::cnot(a, 2 * g.target, n) * oracle::cnot(b, 2 * g.target + 1, n), rho);
            break;
        }
    }
    std::vector<std::size_t> measured;
    for (std::size_t q = 2; q < n; ++q) measured.push_back(q);
    oracle::Mat kept = oracle::Mat::Zero(4, 4);
    for (std::size_t word = 0; word < (std::size_t{1} << measured.size()); ++word) {
        bool agree = true;
        for (std::size_t k = 0; k + 1 < pairs.size(); ++k)
            agree = agree && (((word >> (2 * k)) & 1U) == ((word >> (2 * k + 1)) & 1U));
        if (!agree) continue;
        const oracle::Mat p = oracle::outcome_projector(measured, word, n);
        kept += oracle::trace_keep(p * rho * p, {0, 1}, n);
    }
    oracle::Herald h;
    h.probability = kept.trace().real();
    h.state = kept / h.probability;
    return h;
}

std::vector<oracle::FrameGate> frame_gates(const BilateralCircuit &c) {
    std::vector<oracle::FrameGate> out;
    for (const auto &g : c.gates)
        out.push_back({g.op == BilateralOp::H ? 'H' : g.op == BilateralOp::Rx ? 'R' : 'C', g.pair, g.target});
    return out;
}

std::array<double, 4> werner_coeffs(double f) { return {f, (1 - f) / 3, (1 - f) / 3, (1 - f) / 3}; }

} // namespace

//------------------------------------------------------------------------------
TEST_CASE("teleportation through Phi+ is exact", "[protocols]") {
    std::mt19937_64 gen(31);
    const auto phi = DensityMatrix(phi_plus());
    for (int i = 0; i < 100; ++i) {
        const PureState psi(oracle::random_ket(1, gen));
        CHECK(fidelity(teleport(DensityMatrix(psi), phi), psi) == Approx(1.0).margin(1e-10));
    }
}

TEST_CASE("teleportation through noisy resources", "[protocols]") {
    for (double f : {0.5, 0.7, 0.85}) {
        const auto out = teleport(DensityMatrix::basis(1, 0), werner(f));
        const oracle::Mat o = oracle::teleport(oracle::proj(oracle::ket(1, 0)), oracle::werner(f));
        CHECK(out(0, 0).real() == Approx(o(0, 0).real()).margin(1e-12));
        CHECK(out(0, 0).real() == Approx((1 + (4 * f - 1) / 3) / 2).margin(1e-12));
    }
    CHECK(teleport(DensityMatrix::basis(1, 0), werner(0.85))(0, 0).real() == Approx(0.9).margin(1e-12));

    std::mt19937_64 gen(32);
    const auto mixed = DensityMatrix::maximally_mixed(2);
    for (int i = 0; i < 5; ++i) {
        const oracle::Mat payload = oracle::random_density(1, gen);
        CHECK(oracle::max_abs(teleport(DensityMatrix(payload), mixed).matrix() - oracle::id(1) / 2.0) < 1e-12);
        const oracle::Mat resource = oracle::random_density(2, gen);
        CHECK(oracle::max_abs(teleport(DensityMatrix(payload), DensityMatrix(resource)).matrix() -
                              oracle::teleport(payload, resource)) < 1e-12);
    }
    CHECK_THROWS_AS(teleport(werner(0.9), werner(0.9)), std::invalid_argument);
}

TEST_CASE("superdense coding", "[protocols]") {
    const auto phi = DensityMatrix(phi_plus());
    for (unsigned c = 0; c < 4; ++c) {
        const auto d = superdense_decode(c, phi);
        for (unsigned k = 0; k < 4; ++k) CHECK(d[k] == Approx(k == c ? 1.0 : 0.0).margin(1e-10));
    }
    // Phi- resource: the phase bit is already set
    const auto minus = superdense_decode(0, bell_state(BellKind::PhiMinus));
    CHECK(minus[2] == Approx(1.0).margin(1e-12));

    // Bell-diagonal oracle: encoded Pauli permutes the Bell basis
    const std::array<oracle::Vec, 4> by_codeword{oracle::phi_plus(), oracle::psi_plus(), oracle::phi_minus(),
                                                 oracle::psi_minus()};
    for (double f : {0.6, 0.85}) {
        for (unsigned c = 0; c < 4; ++c) {
            oracle::Mat rho = oracle::werner(f);
            if (c & 1U) rho = oracle::conj(oracle::on(oracle::X(), 0, 2), rho);
            if (c & 2U) rho = oracle::conj(oracle::on(oracle::Z(), 0, 2), rho);
            const auto d = superdense_decode(c, werner(f));
            for (unsigned k = 0; k < 4; ++k) CHECK(d[k] == Approx(oracle::overlap(rho, by_codeword[k])).margin(1e-12));
            CHECK(d[c] == Approx(f).margin(1e-12));
        }
    }
    CHECK_THROWS_AS(superdense_decode(4, phi), std::invalid_argument);
}

TEST_CASE("key bits from shared pairs", "[protocols]") {
    Rng rng(41);
    const int n = 100000;
    int zeros = 0;
    const auto phi = DensityMatrix(phi_plus());
    for (int i = 0; i < n; ++i) {
        const auto [a, b] = extract_key_bit(phi, rng);
        REQUIRE(a == b);
        zeros += a == 0;
    }
    CHECK(std::abs(zeros / double(n) - 0.5) < 4 * std::sqrt(0.25 / n));

    for (int i = 0; i < 1000; ++i) {
        const auto [a, b] = extract_key_bit(dephased_bell(0.5), rng);
        REQUIRE(a == b);
    }

    // Werner agreement: diagonal weight on 00 and 11 = (1 + 2F)/3
    const double f = 0.7;
    int agree = 0;
    for (int i = 0; i < n; ++i) {
        const auto [a, b] = extract_key_bit(werner(f), rng);
        agree += a == b;
    }
    const oracle::Mat w = oracle::werner(f);
    const double p = (w(0, 0) + w(3, 3)).real();
    CHECK(p == Approx((1 + 2 * f) / 3).margin(1e-12));
    CHECK(std::abs(agree / double(n) - p) < 4 * std::sqrt(p * (1 - p) / n));
}

//------------------------------------------------------------------------------
TEST_CASE("entanglement swapping", "[protocols]") {
    const auto phi = DensityMatrix(phi_plus());
    const auto ideal = entanglement_swap(phi, phi, true);
    CHECK(ideal.fidelity_after == Approx(1.0).margin(1e-12));
    for (double p : ideal.outcome_distribution) CHECK(p == Approx(0.25).margin(1e-12));

    for (int i = 0; i <= 10; ++i) {
        const double f = 0.5 + 0.05 * i;
        const auto r = entanglement_swap(werner(f), werner(f), true);
        CHECK(r.fidelity_after == Approx(f * f + (1 - f) * (1 - f) / 3).margin(1e-9));
        CHECK(oracle::max_abs(r.post_state.matrix() - oracle::swap_links(oracle::werner(f), oracle::werner(f), true)) <
              1e-12);
        double total = 0;
        for (double p : r.outcome_distribution) total += p;
        CHECK(total == Approx(1.0).margin(1e-10));
        if (f < 1.0) CHECK(r.fidelity_after < f);
        // output is again Werner
        CHECK(oracle::max_abs(r.post_state.matrix() - oracle::werner(r.fidelity_after)) < 1e-12);
    }
    CHECK(entanglement_swap(werner(0.85), werner(0.85), true).fidelity_after == Approx(0.73).margin(1e-12));
}

TEST_CASE("swapping without correction", "[protocols]") {
    const auto phi = DensityMatrix(phi_plus());
    const auto raw = entanglement_swap(phi, phi, false);
    CHECK(raw.fidelity_after == Approx(oracle::fphi(oracle::swap_links(oracle::proj(oracle::phi_plus()),
                                                                       oracle::proj(oracle::phi_plus()), false)))
                                    .margin(1e-12));
    CHECK(raw.fidelity_after == Approx(0.25).margin(1e-12));
    std::mt19937_64 gen(51);
    for (int i = 0; i < 5; ++i) {
        const oracle::Mat l = oracle::random_density(2, gen);
        const oracle::Mat r = oracle::random_density(2, gen);
        CHECK(oracle::max_abs(entanglement_swap(DensityMatrix(l), DensityMatrix(r), true).post_state.matrix() -
                              oracle::swap_links(l, r, true)) < 1e-12);
        CHECK(oracle::max_abs(entanglement_swap(DensityMatrix(l), DensityMatrix(r), false).post_state.matrix() -
                              oracle::swap_links(l, r, false)) < 1e-12);
    }
    for (double f : {0.6, 0.8, 0.95})
        CHECK(entanglement_swap(werner(f), werner(f), false).fidelity_after <=
              entanglement_swap(werner(f), werner(f), true).fidelity_after);
}

TEST_CASE("swap approximation near F = 1", "[protocols]") {
    for (int i = 0; i <= 10; ++i) {
        const double f = 0.95 + 0.005 * i;
        CHECK(std::abs(entanglement_swap(werner(f), werner(f), true).fidelity_after - f * f) <= 0.01);
    }
}

TEST_CASE("sampled swapping agrees with the exact average", "[protocols]") {
    NoiseParams noise;
    noise.p_meas = 0.05;
    noise.p_gate2 = 0.02;
    const auto exact = entanglement_swap(werner(0.9), werner(0.8), true, noise);
    const SwapSampler sampler(werner(0.9), werner(0.8), noise);
    Rng rng(61);
    const int n = 20000;
    oracle::Mat avg = oracle::Mat::Zero(4, 4);
    for (int i = 0; i < n; ++i) avg += sampler(rng).matrix();
    avg /= double(n);
    // each entry is a bounded mean; 4 sigma of a [0,1] variable is at most 2/sqrt(n)
    CHECK(oracle::max_abs(avg - exact.post_state.matrix()) < 2.0 / std::sqrt(double(n)));
    // readout noise only lowers the corrected fidelity
    CHECK(exact.fidelity_after < entanglement_swap(werner(0.9), werner(0.8), true, {}).fidelity_after);
}

//------------------------------------------------------------------------------
TEST_CASE("Bennett purification", "[protocols]") {
    const auto phi = DensityMatrix(phi_plus());
    const auto ideal = purify_bennett(phi, phi);
    CHECK(ideal.success_probability == Approx(1.0).margin(1e-12));
    CHECK(ideal.fidelity_after == Approx(1.0).margin(1e-12));

    const auto r = purify_bennett(werner(0.85), werner(0.85));
    const auto o = oracle::purify_two(oracle::werner(0.85), oracle::werner(0.85), false);
    const auto [cf, cp] = oracle::bennett_werner(0.85);
    CHECK(r.fidelity_after == Approx(oracle::fphi(o.state)).margin(1e-10));
    CHECK(r.success_probability == Approx(o.probability).margin(1e-10));
    CHECK(r.fidelity_after == Approx(cf).margin(1e-12));
    CHECK(r.success_probability == Approx(cp).margin(1e-12));
    CHECK(r.fidelity_after == Approx(0.8841463415).margin(1e-9));
    CHECK(r.success_probability == Approx(0.82).margin(1e-12));
    CHECK(oracle::max_abs(r.post_state->matrix() - o.state) < 1e-12);

    CHECK(purify_bennett(werner(0.45), werner(0.45)).fidelity_after < 0.45);
}

TEST_CASE("Bennett monotonicity and fixed points", "[protocols][property]") {
    for (double f : {0.55, 0.65, 0.75, 0.85, 0.95}) CHECK(purify_bennett(werner(f), werner(f)).fidelity_after > f);
    for (double f : {1.0, 0.25})
        CHECK(purify_bennett(werner(f), werner(f)).fidelity_after == Approx(f).margin(1e-10));
}

TEST_CASE("Bennett with gate noise matches the oracle", "[protocols]") {
    NoiseParams noise;
    noise.p_gate2 = 0.04;
    const auto r = purify_bennett(werner(0.9), werner(0.8), noise);
    const auto o = oracle::purify_two(oracle::werner(0.9), oracle::werner(0.8), false, 0, 0.04);
    CHECK(r.success_probability == Approx(o.probability).margin(1e-12));
    CHECK(oracle::max_abs(r.post_state->matrix() - o.state) < 1e-12);
}

TEST_CASE("readout noise enters only through the herald", "[protocols]") {
    NoiseParams noise;
    noise.p_meas = 0.1;
    const auto phi = DensityMatrix(phi_plus());
    const auto r = purify_bennett(phi, phi, noise);
    // both sacrificial bits are truly equal; recorded agreement (1-p)^2 + p^2
    CHECK(r.success_probability == Approx(0.82).margin(1e-12));
    CHECK(r.fidelity_after == Approx(1.0).margin(1e-12));
}

TEST_CASE("Deutsch purification", "[protocols]") {
    const auto phi = DensityMatrix(phi_plus());
    CHECK(purify_deutsch(phi, phi).fidelity_after == Approx(1.0).margin(1e-12));
    CHECK(purify_deutsch(phi, phi).success_probability == Approx(1.0).margin(1e-12));

    const auto r = purify_deutsch(dephased_bell(0.85), dephased_bell(0.85));
    const auto o = oracle::purify_two(oracle::dephased(0.85), oracle::dephased(0.85), true);
    const auto [coeffs, norm] = oracle::deutsch_map({0.85, 0, 0, 0.15});
    CHECK(r.fidelity_after > 0.85);
    CHECK(r.fidelity_after == Approx(oracle::fphi(o.state)).margin(1e-10));
    CHECK(r.fidelity_after == Approx(coeffs[0]).margin(1e-12));
    CHECK(r.success_probability == Approx(norm).margin(1e-12));
    CHECK(r.fidelity_after == Approx(0.9697986577).margin(1e-9));
    CHECK(r.success_probability == Approx(0.745).margin(1e-12));

    // unequal inputs: only above the weaker one is required
    const auto u = purify_deutsch(werner(0.9), werner(0.7));
    const auto uo = oracle::purify_two(oracle::werner(0.9), oracle::werner(0.7), true);
    CHECK(u.fidelity_after == Approx(oracle::fphi(uo.state)).margin(1e-10));
    CHECK(u.fidelity_after > 0.7);

    NoiseParams noise;
    noise.p_gate1 = 0.01;
    noise.p_gate2 = 0.03;
    const auto n = purify_deutsch(werner(0.85), dephased_bell(0.8), noise);
    const auto no = oracle::purify_two(oracle::werner(0.85), oracle::dephased(0.8), true, 0.01, 0.03);
    CHECK(n.success_probability == Approx(no.probability).margin(1e-12));
    CHECK(oracle::max_abs(n.post_state->matrix() - no.state) < 1e-12);
}

//------------------------------------------------------------------------------
TEST_CASE("multi-pair purification reduces to the two-pair protocols", "[protocols]") {
    const std::vector<DensityMatrix> two{werner(0.8), dephased_bell(0.9)};
    for (auto v : {PurifyVariant::Bennett, PurifyVariant::Deutsch}) {
        const auto m = purify_multi(two, v);
        const auto p = v == PurifyVariant::Bennett ? purify_bennett(two[0], two[1]) : purify_deutsch(two[0], two[1]);
        CHECK(m.success_probability == Approx(p.success_probability).margin(1e-12));
        CHECK(oracle::max_abs(m.post_state->matrix() - p.post_state->matrix()) < 1e-12);
    }
    CHECK_THROWS_AS(purify_multi({werner(0.9)}, PurifyVariant::Bennett), std::invalid_argument);
    CHECK_THROWS_AS(purification_circuit(3, PurifyVariant::Bennett, MultiPairCircuit::CyclicCode),
                    std::invalid_argument);
}

TEST_CASE("three perfect pairs purify trivially", "[protocols]") {
    const std::vector<DensityMatrix> pairs(3, DensityMatrix(phi_plus()));
    for (auto v : {PurifyVariant::Bennett, PurifyVariant::Deutsch})
        for (auto c : {MultiPairCircuit::Default, MultiPairCircuit::Fanout}) {
            const auto r = purify_multi(pairs, v, {}, c);
            CHECK(r.success_probability == Approx(1.0).margin(1e-12));
            CHECK(r.fidelity_after == Approx(1.0).margin(1e-12));
        }
}

TEST_CASE("three-pair circuits match full-space evaluation", "[protocols]") {
    std::mt19937_64 gen(71);
    const std::vector<oracle::Mat> inputs{oracle::werner(0.85), oracle::dephased(0.8),
                                          oracle::bell_diagonal(0.75, 0.1, 0.1, 0.05)};
    std::vector<DensityMatrix> pairs;
    for (const auto &m : inputs) pairs.emplace_back(m);
    for (auto v : {PurifyVariant::Bennett, PurifyVariant::Deutsch})
        for (auto c : {MultiPairCircuit::Default, MultiPairCircuit::Fanout}) {
            const auto circuit = purification_circuit(3, v, c);
            const auto o = full_space(inputs, circuit);
            const auto r = purify_multi(pairs, v, {}, c);
            CHECK(r.success_probability == Approx(o.probability).margin(1e-12));
            CHECK(oracle::max_abs(r.post_state->matrix() - o.state) < 1e-10);
        }
    // non Bell-diagonal inputs too
    std::vector<oracle::Mat> random;
    std::vector<DensityMatrix> random_pairs;
    for (int k = 0; k < 3; ++k) {
        random.push_back(oracle::random_density(2, gen));
        random_pairs.emplace_back(random.back());
    }
    const auto o = full_space(random, purification_circuit(3, PurifyVariant::Deutsch));
    const auto r = purify_multi(random_pairs, PurifyVariant::Deutsch);
    CHECK(r.success_probability == Approx(o.probability).margin(1e-12));
    CHECK(oracle::max_abs(r.post_state->matrix() - o.state) < 1e-10);
}

TEST_CASE("multi-pair purification matches Pauli-frame enumeration", "[protocols]") {
    // frozen values below come from oracle::frame_purify on these circuits
    struct Case {
        std::size_t n;
        MultiPairCircuit circuit;
        double f, p;
    };
    const std::vector<Case> cases{
        {3, MultiPairCircuit::CyclicCode, 0.9256756757, 0.666},
        {4, MultiPairCircuit::CyclicCode, 0.9716266174, 0.541},
        {5, MultiPairCircuit::CyclicCode, 0.9939193729, 0.4465},
        {3, MultiPairCircuit::Fanout, 0.85, 0.0},
        {4, MultiPairCircuit::Fanout, 0.812, 0.0},
        {5, MultiPairCircuit::Fanout, 0.777, 0.5905},
    };
    for (const auto &c : cases) {
        CAPTURE(c.n, static_cast<int>(c.circuit));
        const auto circuit = purification_circuit(c.n, PurifyVariant::Deutsch, c.circuit);
        const auto [of, op] = oracle::frame_purify(std::vector(c.n, werner_coeffs(0.85)), frame_gates(circuit));
        const auto r = purify_multi(std::vector(c.n, werner(0.85)), PurifyVariant::Deutsch, {}, c.circuit);
        CHECK(r.fidelity_after == Approx(of).margin(1e-10));
        CHECK(r.success_probability == Approx(op).margin(1e-10));
        CHECK(r.fidelity_after == Approx(c.f).margin(1e-3));
        if (c.p > 0) CHECK(r.success_probability == Approx(c.p).margin(1e-9));
    }
    // two-pair Deutsch on the dephased input via the frame map
    const auto [df, dp] = oracle::frame_purify({{0.85, 0.15, 0, 0}, {0.85, 0.15, 0, 0}},
                                               frame_gates(purification_circuit(2, PurifyVariant::Deutsch)));
    CHECK(df == Approx(0.9697986577).margin(1e-9));
    CHECK(dp == Approx(0.745).margin(1e-12));
}

TEST_CASE("heralding consistency between exact and sampled purification", "[protocols][property]") {
    NoiseParams noise;
    noise.p_meas = 0.03;
    noise.p_gate2 = 0.01;
    const std::vector<DensityMatrix> pairs(3, werner(0.8));
    const auto exact = purify_multi(pairs, PurifyVariant::Deutsch, noise);
    const PurificationSampler sampler(pairs, PurifyVariant::Deutsch, noise);
    Rng rng(81);
    const int n = 100000;
    int ok = 0;
    for (int i = 0; i < n; ++i) ok += sampler(rng).success;
    const double p = exact.success_probability;
    CHECK(std::abs(ok / double(n) - p) < 4 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("recurrence", "[protocols]") {
    const auto rounds = purify_recurrence({2, 2}, werner(0.85), PurifyVariant::Bennett);
    REQUIRE(rounds.size() == 2);
    const auto [f1, p1] = oracle::bennett_werner(0.85);
    const auto [f2, p2] = oracle::bennett_werner(f1);
    CHECK(rounds[0].result.fidelity_after == Approx(f1).margin(1e-12));
    CHECK(rounds[1].result.fidelity_after == Approx(f2).margin(1e-12));
    CHECK(rounds[1].result.fidelity_after > rounds[0].result.fidelity_after);
    CHECK(rounds[1].result.fidelity_after == Approx(0.9134034).margin(1e-6));
    CHECK(rounds[0].pairs_consumed == 2);
    CHECK(rounds[1].pairs_consumed == 4);
    CHECK(rounds[0].compound_yield == Approx(p1).margin(1e-12));
    CHECK(rounds[1].compound_yield == Approx(p2 * p1 * p1).margin(1e-12));

    const auto single = purify_recurrence({2}, werner(0.8), PurifyVariant::Deutsch);
    CHECK(single[0].result.fidelity_after ==
          Approx(purify_deutsch(werner(0.8), werner(0.8)).fidelity_after).margin(1e-12));

    for (const auto &r : purify_recurrence({2, 2, 3}, DensityMatrix(phi_plus()), PurifyVariant::Deutsch)) {
        CHECK(r.result.fidelity_after == Approx(1.0).margin(1e-12));
        CHECK(r.result.success_probability == Approx(1.0).margin(1e-12));
    }
    CHECK_THROWS_AS(purify_recurrence({}, werner(0.9), PurifyVariant::Bennett), std::invalid_argument);
    CHECK_THROWS_AS(purify_recurrence({1}, werner(0.9), PurifyVariant::Bennett), std::invalid_argument);
}

TEST_CASE("twirl keeps the Phi+ weight", "[protocols]") {
    const auto t = twirl_to_werner(dephased_bell(0.8));
    CHECK(oracle::max_abs(t.matrix() - oracle::werner(0.8)) < 1e-12);
}
