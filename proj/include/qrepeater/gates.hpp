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

#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string_view>

#include "qrepeater/core.hpp"

namespace qrep {

enum class GateName { X, Y, Z, H, Phase, Rx, CNOT, SWAP };

// `theta` is only read by Phase and Rx.
inline GateMatrix standard_gate(GateName name, double theta = 0.0) {
    using namespace std::complex_literals;
    const double r = 1.0 / std::numbers::sqrt2;
    Matrix m;
    switch (name) {
    case GateName::X:
        m = Matrix{{0.0, 1.0}, {1.0, 0.0}};
        return {1, m};
    case GateName::Y:
        m = Matrix{{0.0, -1i}, {1i, 0.0}};
        return {1, m};
    case GateName::Z:
        m = Matrix{{1.0, 0.0}, {0.0, -1.0}};
        return {1, m};
    case GateName::H:
        m = Matrix{{r, r}, {r, -r}};
        return {1, m};
    case GateName::Phase:
        if (!std::isfinite(theta)) throw std::invalid_argument("standard_gate: non-finite angle");
        m = Matrix{{1.0, 0.0}, {0.0, std::exp(1i * theta)}};
        return {1, m};
    case GateName::Rx: {
        if (!std::isfinite(theta)) throw std::invalid_argument("standard_gate: non-finite angle");
        const cplx c = std::cos(theta / 2.0);
        const cplx s = -1i * std::sin(theta / 2.0);
        m = Matrix{{c, s}, {s, c}};
        return {1, m};
    }
    case GateName::CNOT:
        // local index = control + 2 * target
        m = Matrix::Zero(4, 4);
        m(0, 0) = 1.0;
        m(3, 1) = 1.0;
        m(2, 2) = 1.0;
        m(1, 3) = 1.0;
        return {2, m};
    case GateName::SWAP:
        m = Matrix::Zero(4, 4);
        m(0, 0) = 1.0;
        m(2, 1) = 1.0;
        m(1, 2) = 1.0;
        m(3, 3) = 1.0;
        return {2, m};
    }
    throw std::invalid_argument("standard_gate: unknown gate");
}

namespace gates {
inline const GateMatrix &X() { static const GateMatrix g = standard_gate(GateName::X); return g; }
inline const GateMatrix &Y() { static const GateMatrix g = standard_gate(GateName::Y); return g; }
inline const GateMatrix &Z() { static const GateMatrix g = standard_gate(GateName::Z); return g; }
inline const GateMatrix &H() { static const GateMatrix g = standard_gate(GateName::H); return g; }
inline const GateMatrix &CNOT() { static const GateMatrix g = standard_gate(GateName::CNOT); return g; }
inline const GateMatrix &SWAP() { static const GateMatrix g = standard_gate(GateName::SWAP); return g; }
inline GateMatrix phase(double theta) { return standard_gate(GateName::Phase, theta); }
inline GateMatrix rx(double theta) { return standard_gate(GateName::Rx, theta); }
} // namespace gates

//==============================================================================
// Bell states
//==============================================================================

enum class BellKind { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

inline constexpr std::array<BellKind, 4> kBellKinds{BellKind::PhiPlus, BellKind::PhiMinus, BellKind::PsiPlus,
                                                    BellKind::PsiMinus};

inline std::string_view to_string(BellKind kind) {
    switch (kind) {
    case BellKind::PhiPlus: return "Phi+";
    case BellKind::PhiMinus: return "Phi-";
    case BellKind::PsiPlus: return "Psi+";
    case BellKind::PsiMinus: return "Psi-";
    }
    return "?";
}

// Qubit 0 is A, qubit 1 is B. |0_A 1_B> is basis index 2.
inline PureState bell_vector(BellKind kind) {
    const double r = 1.0 / std::numbers::sqrt2;
    Vector v = Vector::Zero(4);
    switch (kind) {
    case BellKind::PhiPlus: v[0] = r; v[3] = r; break;
    case BellKind::PhiMinus: v[0] = r; v[3] = -r; break;
    case BellKind::PsiPlus: v[2] = r; v[1] = r; break;
    case BellKind::PsiMinus: v[2] = r; v[1] = -r; break;
    }
    return PureState(std::move(v));
}

inline DensityMatrix bell_state(BellKind kind) { return DensityMatrix(bell_vector(kind)); }

inline const PureState &phi_plus() {
    static const PureState psi = bell_vector(BellKind::PhiPlus);
    return psi;
}

// Outcome dictionary of the disentangling circuit CNOT(q1->q2), H(q1):
// (b_q1, b_q2) = 00 -> Phi+, 01 -> Psi+, 10 -> Phi-, 11 -> Psi-.
// The first bit records the phase, the second the parity.
inline BellKind bell_kind_from_bits(int bit_q1, int bit_q2) {
    if (bit_q1 == 0) return bit_q2 == 0 ? BellKind::PhiPlus : BellKind::PsiPlus;
    return bit_q2 == 0 ? BellKind::PhiMinus : BellKind::PsiMinus;
}

inline std::pair<int, int> bell_bits(BellKind kind) {
    switch (kind) {
    case BellKind::PhiPlus: return {0, 0};
    case BellKind::PsiPlus: return {0, 1};
    case BellKind::PhiMinus: return {1, 0};
    case BellKind::PsiMinus: return {1, 1};
    }
    return {0, 0};
}

// Gates that map the Bell-measured partner of Phi+ back onto Phi+, in
// application order: I, Z, X, and X followed by Z.
inline std::vector<GateMatrix> pauli_correction(BellKind kind) {
    switch (kind) {
    case BellKind::PhiPlus: return {};
    case BellKind::PhiMinus: return {gates::Z()};
    case BellKind::PsiPlus: return {gates::X()};
    case BellKind::PsiMinus: return {gates::X(), gates::Z()};
    }
    return {};
}

struct BellBranch {
    BellKind kind = BellKind::PhiPlus;
    double probability = 0.0;
    // Post-measurement state of all qubits (q1, q2 collapsed after the
    // disentangling circuit); empty for null branches.
    std::optional<DensityMatrix> state;
};

// Bell-basis measurement of (q1, q2) by CNOT(q1->q2), H(q1) and a
// computational-basis readout. Branches are ordered by the bit word
// b_q1 + 2 b_q2: Phi+, Phi-, Psi+, Psi-.
inline std::vector<BellBranch> bell_measure(const DensityMatrix &rho, std::size_t q1, std::size_t q2) {
    const std::array<std::size_t, 2> pair{q1, q2};
    detail::check_qubits(pair, rho.n_qubits(), "bell_measure");
    DensityMatrix rotated = apply_unitary(rho, gates::CNOT(), pair);
    rotated = apply_unitary(rotated, gates::H(), {q1});
    auto branches = measure_branches(rotated, pair);
    std::vector<BellBranch> out;
    out.reserve(4);
    for (auto &b : branches) {
        const int b1 = static_cast<int>(b.outcome & 1U);
        const int b2 = static_cast<int>((b.outcome >> 1) & 1U);
        out.push_back(BellBranch{bell_kind_from_bits(b1, b2), b.probability, std::move(b.state)});
    }
    return out;
}

} // namespace qrep
