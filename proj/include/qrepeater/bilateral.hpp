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

// Bilateral circuits over a register of Bell pairs.
//
// Pair k occupies qubits 2k (Alice) and 2k+1 (Bob). A bilateral gate applies
// U at Alice and conj(U) at Bob, which leaves every Phi+ pair invariant; for
// the Deutsch rotation this is Rx(pi/2) at Alice and Rx(-pi/2) at Bob.
//
// Relative to Phi+, a Bell-diagonal pair carries a Pauli error on Bob's side,
// tracked as bits (x, z). Bilateral gates act on these bits linearly:
//   CNOT(c -> t): x_t ^= x_c, z_c ^= z_t
//   H:            x <-> z
//   Rx:           x ^= z
// and a bilateral Z-basis readout of pair k agrees iff x_k = 0.

#pragma once

#include <string>
#include <string_view>

#include "qrepeater/core.hpp"
#include "qrepeater/gates.hpp"
#include "qrepeater/noise.hpp"

namespace qrep {

enum class BilateralOp { H, Rx, CNOT };

struct BilateralGate {
    BilateralOp op = BilateralOp::H;
    std::size_t pair = 0;   // target pair (H, Rx) or control pair (CNOT)
    std::size_t target = 0; // CNOT target pair

    friend bool operator==(const BilateralGate &, const BilateralGate &) = default;
};

struct BilateralCircuit {
    std::size_t pairs = 0;
    std::vector<BilateralGate> gates;

    void rx_all() {
        for (std::size_t k = 0; k < pairs; ++k) gates.push_back({BilateralOp::Rx, k, 0});
    }
    void h(std::size_t k) { gates.push_back({BilateralOp::H, k, 0}); }
    void rx(std::size_t k) { gates.push_back({BilateralOp::Rx, k, 0}); }
    void cnot(std::size_t control, std::size_t target) { gates.push_back({BilateralOp::CNOT, control, target}); }
};

inline std::size_t alice_qubit(std::size_t pair) { return 2 * pair; }
inline std::size_t bob_qubit(std::size_t pair) { return 2 * pair + 1; }

inline DensityMatrix apply_bilateral(const DensityMatrix &rho, const BilateralCircuit &circuit,
                                     const NoiseParams &noise) {
    if (rho.n_qubits() != 2 * circuit.pairs) throw std::invalid_argument("apply_bilateral: register size mismatch");
    static const GateMatrix rx_plus = gates::rx(std::numbers::pi / 2.0);
    static const GateMatrix rx_minus = gates::rx(-std::numbers::pi / 2.0);
    DensityMatrix out = rho;
    for (const auto &g : circuit.gates) {
        if (g.pair >= circuit.pairs || (g.op == BilateralOp::CNOT && (g.target >= circuit.pairs || g.target == g.pair)))
            throw std::out_of_range("apply_bilateral: gate references an invalid pair");
        switch (g.op) {
        case BilateralOp::H:
            out = apply_noisy(std::move(out), gates::H(), {alice_qubit(g.pair)}, noise);
            out = apply_noisy(std::move(out), gates::H(), {bob_qubit(g.pair)}, noise);
            break;
        case BilateralOp::Rx:
            out = apply_noisy(std::move(out), rx_plus, {alice_qubit(g.pair)}, noise);
            out = apply_noisy(std::move(out), rx_minus, {bob_qubit(g.pair)}, noise);
            break;
        case BilateralOp::CNOT:
            out = apply_noisy(std::move(out), gates::CNOT(), {alice_qubit(g.pair), alice_qubit(g.target)}, noise);
            out = apply_noisy(std::move(out), gates::CNOT(), {bob_qubit(g.pair), bob_qubit(g.target)}, noise);
            break;
        }
    }
    return out;
}

//==============================================================================
// Pauli strings on the error frame
//==============================================================================

struct PauliString {
    std::vector<std::uint8_t> x, z;

    explicit PauliString(std::size_t n = 0) : x(n, 0), z(n, 0) {}

    static PauliString parse(std::string_view text) {
        PauliString p(text.size());
        for (std::size_t i = 0; i < text.size(); ++i) {
            switch (text[i]) {
            case 'I': break;
            case 'X': p.x[i] = 1; break;
            case 'Z': p.z[i] = 1; break;
            case 'Y': p.x[i] = p.z[i] = 1; break;
            default: throw std::invalid_argument("PauliString: unexpected character in '" + std::string(text) + "'");
            }
        }
        return p;
    }

    std::size_t size() const { return x.size(); }
    bool is_identity_at(std::size_t q) const { return x[q] == 0 && z[q] == 0; }

    std::string str() const {
        std::string s;
        for (std::size_t i = 0; i < size(); ++i) s += "IXZY"[x[i] + 2 * z[i]];
        return s;
    }

    friend bool operator==(const PauliString &, const PauliString &) = default;
};

inline bool commutes(const PauliString &a, const PauliString &b) {
    if (a.size() != b.size()) throw std::invalid_argument("commutes: length mismatch");
    unsigned parity = 0;
    for (std::size_t i = 0; i < a.size(); ++i) parity ^= (a.x[i] & b.z[i]) ^ (a.z[i] & b.x[i]);
    return parity == 0;
}

inline void conjugate(PauliString &p, const BilateralGate &g) {
    switch (g.op) {
    case BilateralOp::H: std::swap(p.x[g.pair], p.z[g.pair]); break;
    case BilateralOp::Rx: p.x[g.pair] ^= p.z[g.pair]; break;
    case BilateralOp::CNOT:
        p.x[g.target] ^= p.x[g.pair];
        p.z[g.pair] ^= p.z[g.target];
        break;
    }
}

//==============================================================================
// Purification circuits
//==============================================================================

// Pair 0 is kept; every other pair is read out bilaterally in the Z basis.

// Kept pair is CNOT control against each sacrificial pair.
inline BilateralCircuit fanout_circuit(std::size_t pairs, bool deutsch_rotations) {
    if (pairs < 2) throw std::invalid_argument("fanout_circuit: need at least two pairs");
    BilateralCircuit c{pairs, {}};
    if (deutsch_rotations) c.rx_all();
    for (std::size_t k = 1; k < pairs; ++k) c.cnot(0, k);
    return c;
}

// The first n-1 cyclic shifts of XZZX padded (or truncated) to n pairs. For
// n = 5 these are the stabilizers of the five-qubit perfect code.
inline std::vector<PauliString> cyclic_checks(std::size_t pairs) {
    if (pairs < 2) throw std::invalid_argument("cyclic_checks: need at least two pairs");
    std::string base = "XZZX";
    base.resize(pairs, 'I');
    std::vector<PauliString> checks;
    for (std::size_t k = 0; k + 1 < pairs; ++k) {
        std::string shifted(pairs, 'I');
        for (std::size_t i = 0; i < pairs; ++i) shifted[(i + k) % pairs] = base[i];
        checks.push_back(PauliString::parse(shifted));
    }
    return checks;
}

// Synthesizes a bilateral Clifford that maps check k onto Z of pair k+1, so
// that the bilateral readout of pair k+1 agrees iff the frame error commutes
// with check k. Checks must be independent and mutually commuting, and each
// must leave a sacrificial pair available as its pivot.
inline BilateralCircuit check_decoder(const std::vector<PauliString> &checks) {
    if (checks.empty()) throw std::invalid_argument("check_decoder: no checks");
    const std::size_t n = checks.front().size();
    if (checks.size() + 1 != n) throw std::invalid_argument("check_decoder: need exactly pairs - 1 checks");
    for (std::size_t i = 0; i < checks.size(); ++i) {
        if (checks[i].size() != n) throw std::invalid_argument("check_decoder: check length mismatch");
        for (std::size_t j = 0; j < i; ++j)
            if (!commutes(checks[i], checks[j])) throw std::invalid_argument("check_decoder: checks do not commute");
    }

    BilateralCircuit circuit{n, {}};
    std::vector<PauliString> work = checks;
    std::vector<bool> is_pivot(n, false);
    QubitList pivots;
    auto emit = [&](BilateralGate g) {
        circuit.gates.push_back(g);
        for (auto &w : work) conjugate(w, g);
    };

    for (std::size_t k = 0; k < work.size(); ++k) {
        QubitList free;
        for (std::size_t q = 0; q < n; ++q)
            if (!is_pivot[q] && !work[k].is_identity_at(q)) free.push_back(q);
        std::size_t pivot = n;
        for (auto q : free)
            if (q != 0) {
                pivot = q;
                break;
            }
        if (pivot == n) throw std::invalid_argument("check_decoder: checks are dependent or leave no pivot");

        // Rotate every free component to X.
        for (auto q : free) {
            if (work[k].x[q] && work[k].z[q]) emit({BilateralOp::Rx, q, 0});
            if (!work[k].x[q]) emit({BilateralOp::H, q, 0});
        }
        for (auto q : free)
            if (q != pivot) emit({BilateralOp::CNOT, pivot, q});
        emit({BilateralOp::H, pivot, 0});
        // Clear the Z components left on earlier pivots.
        for (auto p : pivots)
            if (work[k].z[p]) emit({BilateralOp::CNOT, p, pivot});
        is_pivot[pivot] = true;
        pivots.push_back(pivot);
    }

    // Relabel so that check k is read out on pair k+1.
    std::vector<std::size_t> relabel(n, 0);
    for (std::size_t k = 0; k < pivots.size(); ++k) relabel[pivots[k]] = k + 1;
    for (auto &g : circuit.gates) {
        g.pair = relabel[g.pair];
        if (g.op == BilateralOp::CNOT) g.target = relabel[g.target];
    }
    return circuit;
}

} // namespace qrep
