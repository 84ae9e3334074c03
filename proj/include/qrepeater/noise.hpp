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

// Noise channels, noisy Bell states and the emulated fiber channel.

#pragma once

#include <cmath>
#include <string>

#include "qrepeater/core.hpp"
#include "qrepeater/gates.hpp"

namespace qrep {

namespace detail {
inline void check_probability(double p, const char *what) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + ": probability out of [0, 1]");
}
} // namespace detail

struct NoiseParams {
    double p_gate1 = 0.0;       // depolarizing after each 1-qubit gate
    double p_gate2 = 0.0;       // depolarizing after each 2-qubit gate
    double p_hop_dephase = 0.0; // phase flip on the moving qubit per channel hop
    double p_meas = 0.0;        // classical flip of each recorded outcome

    void validate() const {
        detail::check_probability(p_gate1, "NoiseParams.p_gate1");
        detail::check_probability(p_gate2, "NoiseParams.p_gate2");
        detail::check_probability(p_hop_dephase, "NoiseParams.p_hop_dephase");
        detail::check_probability(p_meas, "NoiseParams.p_meas");
    }

    bool noiseless() const { return p_gate1 == 0.0 && p_gate2 == 0.0 && p_hop_dephase == 0.0 && p_meas == 0.0; }
};

struct ChannelModel {
    double length_km = 0.0;
    double attenuation_length_km = 1.0;
    std::size_t hops = 0;

    void validate() const {
        if (!(length_km >= 0.0) || !std::isfinite(length_km))
            throw std::invalid_argument("ChannelModel: length must be finite and nonnegative");
        if (!(attenuation_length_km > 0.0) || !std::isfinite(attenuation_length_km))
            throw std::invalid_argument("ChannelModel: attenuation length must be positive");
    }

    // Heralded generation success, exp(-L / L0).
    double generation_probability() const {
        validate();
        return std::exp(-length_km / attenuation_length_km);
    }
};

//==============================================================================
// Channel constructors
//==============================================================================

inline KrausChannel dephasing_channel(double p) {
    detail::check_probability(p, "dephasing_channel");
    const Matrix id = Matrix::Identity(2, 2);
    return {1, {std::sqrt(1.0 - p) * id, std::sqrt(p) * gates::Z().matrix()}};
}

// Uniform Pauli twirl: with probability p the targets are replaced by the
// maximally mixed state.
inline KrausChannel depolarizing_channel(double p, std::size_t arity) {
    detail::check_probability(p, "depolarizing_channel");
    if (arity != 1 && arity != 2) throw std::invalid_argument("depolarizing_channel: arity must be 1 or 2");
    const std::array<Matrix, 4> paulis{Matrix::Identity(2, 2), gates::X().matrix(), gates::Y().matrix(),
                                       gates::Z().matrix()};
    const double terms = arity == 1 ? 4.0 : 16.0;
    std::vector<Matrix> ops;
    if (arity == 1) {
        for (std::size_t a = 0; a < 4; ++a) {
            const double w = a == 0 ? 1.0 - p + p / terms : p / terms;
            ops.push_back(std::sqrt(w) * paulis[a]);
        }
    } else {
        for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t a = 0; a < 4; ++a) {
                const double w = (a == 0 && b == 0) ? 1.0 - p + p / terms : p / terms;
                // local index = bit(first target) + 2 bit(second target)
                Matrix k(4, 4);
                for (Eigen::Index r = 0; r < 4; ++r)
                    for (Eigen::Index c = 0; c < 4; ++c) k(r, c) = paulis[b](r >> 1, c >> 1) * paulis[a](r & 1, c & 1);
                ops.push_back(std::sqrt(w) * k);
            }
    }
    return {arity, std::move(ops)};
}

//==============================================================================
// Noisy Bell pairs
//==============================================================================

// F |Phi+><Phi+| + (1-F)/3 (|Phi-><Phi-| + |Psi+><Psi+| + |Psi-><Psi-|)
inline DensityMatrix werner(double fidelity) {
    if (!(fidelity >= 0.0 && fidelity <= 1.0)) throw std::invalid_argument("werner: fidelity out of [0, 1]");
    const double rest = (1.0 - fidelity) / 3.0;
    Matrix m = fidelity * bell_state(BellKind::PhiPlus).matrix() + rest * bell_state(BellKind::PhiMinus).matrix() +
               rest * bell_state(BellKind::PsiPlus).matrix() + rest * bell_state(BellKind::PsiMinus).matrix();
    return {detail::unchecked, 2, std::move(m)};
}

// F |Phi+><Phi+| + (1-F) |Phi-><Phi-|
inline DensityMatrix dephased_bell(double fidelity) {
    if (!(fidelity >= 0.0 && fidelity <= 1.0)) throw std::invalid_argument("dephased_bell: fidelity out of [0, 1]");
    Matrix m = fidelity * bell_state(BellKind::PhiPlus).matrix() +
               (1.0 - fidelity) * bell_state(BellKind::PhiMinus).matrix();
    return {detail::unchecked, 2, std::move(m)};
}

inline double bell_fidelity(const DensityMatrix &pair) { return fidelity(pair, phi_plus()); }

//==============================================================================
// Noisy gate application
//==============================================================================

inline DensityMatrix apply_noisy(DensityMatrix rho, const GateMatrix &gate, std::span<const std::size_t> targets,
                                 const NoiseParams &noise) {
    DensityMatrix out = apply_unitary(std::move(rho), gate, targets);
    const double p = gate.arity() == 1 ? noise.p_gate1 : noise.p_gate2;
    if (p > 0.0) return apply_depolarizing(std::move(out), p, targets);
    return out;
}

inline DensityMatrix apply_noisy(DensityMatrix rho, const GateMatrix &gate, std::initializer_list<std::size_t> targets,
                                 const NoiseParams &noise) {
    return apply_noisy(std::move(rho), gate, std::span<const std::size_t>(targets.begin(), targets.size()), noise);
}

// H on qubit 0 then CNOT(0 -> 1) on |00>, with gate noise.
inline DensityMatrix prepare_bell_pair(const NoiseParams &noise) {
    DensityMatrix rho = DensityMatrix::basis(2, 0);
    rho = apply_noisy(std::move(rho), gates::H(), {0}, noise);
    return apply_noisy(std::move(rho), gates::CNOT(), {0, 1}, noise);
}

// Probability that two recorded bits agree given their true values, under
// independent readout flips with probability p_meas.
inline double readout_agreement(int a, int b, double p_meas) {
    const double same = (1.0 - p_meas) * (1.0 - p_meas) + p_meas * p_meas;
    return a == b ? same : 1.0 - same;
}

inline int record_outcome(int outcome, double p_meas, Rng &rng) {
    return (p_meas > 0.0 && rng.bernoulli(p_meas)) ? 1 - outcome : outcome;
}

//==============================================================================
// Fiber emulation
//==============================================================================

namespace detail {
inline DensityMatrix hop(DensityMatrix rho, std::size_t from, std::size_t to, const NoiseParams &noise) {
    const std::array<std::size_t, 2> pair{from, to};
    DensityMatrix out = apply_unitary(std::move(rho), gates::SWAP(), pair);
    if (noise.p_gate2 > 0.0) out = apply_depolarizing(std::move(out), noise.p_gate2, pair);
    if (noise.p_hop_dephase > 0.0) out = apply_channel(out, dephasing_channel(noise.p_hop_dephase), {to});
    return out;
}
} // namespace detail

// Moves `moving_qubit` through channel.hops noisy SWAPs, one fresh ancilla per
// hop. Each hop is SWAP, 2-qubit depolarizing on the swapped pair, then
// dephasing of the qubit now carrying the payload. The payload ends on
// ancillas[hops - 1]; the other qubits keep their positions.
inline DensityMatrix transmit(const DensityMatrix &rho, std::size_t moving_qubit,
                              std::span<const std::size_t> ancillas, const ChannelModel &channel,
                              const NoiseParams &noise) {
    channel.validate();
    noise.validate();
    if (ancillas.size() < channel.hops) throw std::invalid_argument("transmit: insufficient ancillas for the hop count");
    QubitList path{moving_qubit};
    path.insert(path.end(), ancillas.begin(), ancillas.begin() + static_cast<std::ptrdiff_t>(channel.hops));
    detail::check_qubits(path, rho.n_qubits(), "transmit");
    DensityMatrix out = rho;
    for (std::size_t h = 0; h < channel.hops; ++h) out = detail::hop(std::move(out), path[h], path[h + 1], noise);
    return out;
}

// Same channel as transmit, but allocates each ancilla as |0>, hops onto it and
// traces the vacated qubit out immediately, so the register never grows by
// more than one qubit. The payload is returned in the moving qubit's slot.
inline DensityMatrix distribute(const DensityMatrix &rho, std::size_t moving_qubit, const ChannelModel &channel,
                                const NoiseParams &noise) {
    channel.validate();
    noise.validate();
    detail::check_qubits(std::span<const std::size_t>(&moving_qubit, 1), rho.n_qubits(), "distribute");
    const std::size_t n = rho.n_qubits();
    DensityMatrix out = rho;
    for (std::size_t h = 0; h < channel.hops; ++h) {
        DensityMatrix grown = tensor(out, DensityMatrix::basis(1, 0));
        grown = detail::hop(std::move(grown), moving_qubit, n, noise);
        QubitList keep;
        for (std::size_t q = 0; q < n; ++q) keep.push_back(q == moving_qubit ? n : q);
        out = partial_trace(grown, keep);
    }
    return out;
}

inline bool attempt_generation(const ChannelModel &channel, Rng &rng) {
    return rng.bernoulli(channel.generation_probability());
}

} // namespace qrep
