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

// Teleportation, superdense coding, key bits, entanglement swapping and
// purification. Exact (branch-averaged) evaluation is the default; the
// *_sampled variants draw one measurement record per call.

#pragma once

#include <array>
#include <numeric>

#include "qrepeater/bilateral.hpp"
#include "qrepeater/core.hpp"
#include "qrepeater/gates.hpp"
#include "qrepeater/noise.hpp"

namespace qrep {

namespace detail {

inline void check_pair(const DensityMatrix &rho, const char *what) {
    if (rho.n_qubits() != 2) throw std::invalid_argument(std::string(what) + ": expected a 2-qubit state");
}

inline DensityMatrix apply_correction(const DensityMatrix &rho, BellKind kind, std::size_t qubit,
                                      const NoiseParams &noise) {
    DensityMatrix out = rho;
    for (const auto &g : pauli_correction(kind)) out = apply_noisy(out, g, {qubit}, noise);
    return out;
}

// Probability of recording `recorded` when the true bits are `actual`, with
// each of `bits` bits flipped independently.
inline double flip_probability(std::uint64_t actual, std::uint64_t recorded, std::size_t bits, double p_meas) {
    double p = 1.0;
    for (std::size_t b = 0; b < bits; ++b) p *= (((actual ^ recorded) >> b) & 1U) ? p_meas : 1.0 - p_meas;
    return p;
}

inline std::uint64_t record_word(std::uint64_t actual, std::size_t bits, double p_meas, Rng &rng) {
    std::uint64_t out = 0;
    for (std::size_t b = 0; b < bits; ++b)
        out |= static_cast<std::uint64_t>(record_outcome(static_cast<int>((actual >> b) & 1U), p_meas, rng)) << b;
    return out;
}

inline std::size_t sample_index(const std::vector<double> &weights, Rng &rng) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0) return i;
    throw std::domain_error("sample_index: all weights vanish");
}

inline BellKind bell_kind_from_word(std::uint64_t word) {
    return bell_kind_from_bits(static_cast<int>(word & 1U), static_cast<int>((word >> 1) & 1U));
}

} // namespace detail

//==============================================================================
// Resource validators
//==============================================================================

// Payload on qubit 0, resource on (1, 2); Bob holds qubit 2.
inline DensityMatrix teleport(const DensityMatrix &payload, const DensityMatrix &resource) {
    if (payload.n_qubits() != 1) throw std::invalid_argument("teleport: payload must be a single qubit");
    detail::check_pair(resource, "teleport");
    const DensityMatrix joint = tensor(payload, resource);
    Matrix out = Matrix::Zero(2, 2);
    for (const auto &branch : bell_measure(joint, 0, 1)) {
        if (!branch.state) continue;
        DensityMatrix corrected = detail::apply_correction(*branch.state, branch.kind, 2, {});
        out += branch.probability * partial_trace(corrected, {2}).matrix();
    }
    return {detail::unchecked, 1, std::move(out)};
}

// Codeword = 2 b1 + b2; Alice applies X^b2 then Z^b1 to her half (qubit 0).
// Returns the distribution of the decoded codeword.
inline std::array<double, 4> superdense_decode(unsigned codeword, const DensityMatrix &resource) {
    if (codeword > 3) throw std::invalid_argument("superdense_decode: codeword must be in 0..3");
    detail::check_pair(resource, "superdense_decode");
    DensityMatrix rho = resource;
    if (codeword & 1U) rho = apply_unitary(rho, gates::X(), {0});
    if (codeword & 2U) rho = apply_unitary(rho, gates::Z(), {0});
    std::array<double, 4> decoded{};
    for (const auto &branch : bell_measure(rho, 0, 1)) {
        const auto [phase, parity] = bell_bits(branch.kind);
        decoded[static_cast<std::size_t>(2 * phase + parity)] += branch.probability;
    }
    return decoded;
}

inline std::pair<int, int> extract_key_bit(const DensityMatrix &resource, Rng &rng) {
    detail::check_pair(resource, "extract_key_bit");
    auto [first, collapsed] = measure(resource, 0, rng);
    auto [second, unused] = measure(collapsed, 1, rng);
    return {first.outcome, second.outcome};
}

//==============================================================================
// Entanglement swapping
//==============================================================================

struct SwapResult {
    DensityMatrix post_state;
    // Recorded Bell outcome probabilities, indexed by BellKind.
    std::array<double, 4> outcome_distribution{};
    double fidelity_after = 0.0;
};

namespace detail {

// Links (0,1) and (2,3); Bell measurement of (1,2) with noisy gates.
// Returns branches over the true bit word on (1,2), reduced to (0,3).
inline std::vector<Branch> swap_branches(const DensityMatrix &left, const DensityMatrix &right,
                                         const NoiseParams &noise) {
    check_pair(left, "entanglement_swap");
    check_pair(right, "entanglement_swap");
    noise.validate();
    DensityMatrix joint = tensor(left, right);
    joint = apply_noisy(joint, gates::CNOT(), {1, 2}, noise);
    joint = apply_noisy(joint, gates::H(), {1}, noise);
    const std::array<std::size_t, 2> measured{1, 2};
    const std::array<std::size_t, 2> keep{0, 3};
    return measure_branches_reduced(joint, measured, keep);
}

} // namespace detail

// Qubit 3 (local index 1 of the outer pair) carries the correction. Readout
// flips make the applied correction follow the recorded, not the true, bits.
inline SwapResult entanglement_swap(const DensityMatrix &left, const DensityMatrix &right, bool apply_correction,
                                    const NoiseParams &noise = {}) {
    const auto branches = detail::swap_branches(left, right, noise);
    SwapResult result{DensityMatrix::maximally_mixed(2), {}, 0.0};
    Matrix out = Matrix::Zero(4, 4);
    for (const auto &branch : branches) {
        if (!branch.state) continue;
        for (std::uint64_t recorded = 0; recorded < 4; ++recorded) {
            const double w = branch.probability * detail::flip_probability(branch.outcome, recorded, 2, noise.p_meas);
            if (w == 0.0) continue;
            const BellKind kind = detail::bell_kind_from_word(recorded);
            result.outcome_distribution[static_cast<std::size_t>(kind)] += w;
            const DensityMatrix corrected =
                apply_correction ? detail::apply_correction(*branch.state, kind, 1, noise) : *branch.state;
            out += w * corrected.matrix();
        }
    }
    result.post_state = DensityMatrix(detail::unchecked, 2, std::move(out));
    result.fidelity_after = bell_fidelity(result.post_state);
    return result;
}

// Draws one swap: a true Bell outcome from the exact distribution, a recorded
// outcome through readout flips, and the correction the recorded bits call for.
class SwapSampler {
  public:
    SwapSampler(const DensityMatrix &left, const DensityMatrix &right, const NoiseParams &noise,
                bool apply_correction = true)
        : p_meas_(noise.p_meas) {
        const auto branches = detail::swap_branches(left, right, noise);
        for (const auto &b : branches) {
            weights_.push_back(b.state ? b.probability : 0.0);
            std::vector<DensityMatrix> corrected;
            if (b.state)
                for (std::uint64_t recorded = 0; recorded < 4; ++recorded)
                    corrected.push_back(apply_correction ? detail::apply_correction(
                                                               *b.state, detail::bell_kind_from_word(recorded), 1, noise)
                                                         : *b.state);
            corrected_.push_back(std::move(corrected));
        }
    }

    DensityMatrix operator()(Rng &rng) const {
        const std::size_t word = detail::sample_index(weights_, rng);
        const std::uint64_t recorded = detail::record_word(word, 2, p_meas_, rng);
        return corrected_[word][recorded];
    }

  private:
    double p_meas_;
    std::vector<double> weights_;
    std::vector<std::vector<DensityMatrix>> corrected_; // [true word][recorded word]
};

inline DensityMatrix entanglement_swap_sampled(const DensityMatrix &left, const DensityMatrix &right,
                                               const NoiseParams &noise, Rng &rng) {
    return SwapSampler(left, right, noise)(rng);
}

//==============================================================================
// Purification
//==============================================================================

enum class PurifyVariant { Bennett, Deutsch };

// Default: Bennett uses the fan-out circuit at every size; Deutsch uses the
// two-pair circuit for n = 2 and the cyclic check code for n >= 3.
enum class MultiPairCircuit { Default, Fanout, CyclicCode };

inline std::string_view to_string(PurifyVariant v) { return v == PurifyVariant::Bennett ? "bennett" : "deutsch"; }

struct PurifyResult {
    double success_probability = 0.0;
    std::optional<DensityMatrix> post_state;
    double fidelity_after = 0.0;
};

inline BilateralCircuit purification_circuit(std::size_t pairs, PurifyVariant variant,
                                             MultiPairCircuit circuit = MultiPairCircuit::Default) {
    if (pairs < 2) throw std::invalid_argument("purification: need at least two pairs");
    if (circuit == MultiPairCircuit::Default)
        circuit = (variant == PurifyVariant::Deutsch && pairs >= 3) ? MultiPairCircuit::CyclicCode
                                                                   : MultiPairCircuit::Fanout;
    if (circuit == MultiPairCircuit::Fanout) return fanout_circuit(pairs, variant == PurifyVariant::Deutsch);
    if (variant != PurifyVariant::Deutsch)
        throw std::invalid_argument("purification: the cyclic check code needs the Deutsch rotations");
    return check_decoder(cyclic_checks(pairs));
}

namespace detail {

// Joint state after the bilateral circuit, with pair k on qubits (2k, 2k+1).
inline DensityMatrix purification_register(const std::vector<DensityMatrix> &pairs, PurifyVariant variant,
                                           const NoiseParams &noise, MultiPairCircuit circuit) {
    if (pairs.size() < 2) throw std::invalid_argument("purification: need at least two pairs");
    if (2 * pairs.size() > kMaxQubits) throw std::invalid_argument("purification: too many pairs for the qubit limit");
    noise.validate();
    for (const auto &p : pairs) check_pair(p, "purification");
    DensityMatrix joint = pairs.front();
    for (std::size_t k = 1; k < pairs.size(); ++k) joint = tensor(joint, pairs[k]);
    return apply_bilateral(joint, purification_circuit(pairs.size(), variant, circuit), noise);
}

inline QubitList sacrificial_qubits(std::size_t pairs) {
    QubitList q;
    for (std::size_t k = 1; k < pairs; ++k) {
        q.push_back(alice_qubit(k));
        q.push_back(bob_qubit(k));
    }
    return q;
}

// Probability that Alice's and Bob's recorded strings agree, given the true
// outcome word (bit 2j = Alice on pair j+1, bit 2j+1 = Bob).
inline double herald_weight(std::uint64_t word, std::size_t sacrificed, double p_meas) {
    double w = 1.0;
    for (std::size_t j = 0; j < sacrificed; ++j)
        w *= readout_agreement(static_cast<int>((word >> (2 * j)) & 1U), static_cast<int>((word >> (2 * j + 1)) & 1U),
                               p_meas);
    return w;
}

inline bool recorded_agree(std::uint64_t recorded, std::size_t sacrificed) {
    for (std::size_t j = 0; j < sacrificed; ++j)
        if (((recorded >> (2 * j)) & 1U) != ((recorded >> (2 * j + 1)) & 1U)) return false;
    return true;
}

inline std::vector<Branch> purification_branches(const std::vector<DensityMatrix> &pairs, PurifyVariant variant,
                                                 const NoiseParams &noise, MultiPairCircuit circuit) {
    const DensityMatrix joint = purification_register(pairs, variant, noise, circuit);
    const QubitList measured = sacrificial_qubits(pairs.size());
    const std::array<std::size_t, 2> keep{0, 1};
    return measure_branches_reduced(joint, measured, keep);
}

} // namespace detail

inline PurifyResult purify_multi(const std::vector<DensityMatrix> &pairs, PurifyVariant variant,
                                 const NoiseParams &noise = {}, MultiPairCircuit circuit = MultiPairCircuit::Default) {
    const auto branches = detail::purification_branches(pairs, variant, noise, circuit);
    const std::size_t sacrificed = pairs.size() - 1;
    PurifyResult result;
    Matrix kept = Matrix::Zero(4, 4);
    for (const auto &branch : branches) {
        if (!branch.state) continue;
        const double w = branch.probability * detail::herald_weight(branch.outcome, sacrificed, noise.p_meas);
        result.success_probability += w;
        kept += w * branch.state->matrix();
    }
    result.success_probability = std::clamp(result.success_probability, 0.0, 1.0);
    if (result.success_probability >= kNullBranch) {
        result.post_state.emplace(detail::unchecked, 2, kept / result.success_probability);
        result.fidelity_after = bell_fidelity(*result.post_state);
    }
    return result;
}

inline PurifyResult purify_bennett(const DensityMatrix &kept, const DensityMatrix &sacrificed,
                                   const NoiseParams &noise = {}) {
    return purify_multi({kept, sacrificed}, PurifyVariant::Bennett, noise);
}

inline PurifyResult purify_deutsch(const DensityMatrix &kept, const DensityMatrix &sacrificed,
                                   const NoiseParams &noise = {}) {
    return purify_multi({kept, sacrificed}, PurifyVariant::Deutsch, noise);
}

// One heralded shot: a measurement record is drawn from the exact branch
// distribution, readout flips are applied, and the kept pair is returned only
// if the recorded strings agree.
struct SampledPurification {
    bool success = false;
    std::optional<DensityMatrix> post_state;
};

// Branches are computed once and then sampled repeatedly.
class PurificationSampler {
  public:
    PurificationSampler(const std::vector<DensityMatrix> &pairs, PurifyVariant variant, const NoiseParams &noise = {},
                        MultiPairCircuit circuit = MultiPairCircuit::Default)
        : sacrificed_(pairs.size() - 1), p_meas_(noise.p_meas),
          branches_(detail::purification_branches(pairs, variant, noise, circuit)) {
        for (const auto &b : branches_) weights_.push_back(b.state ? b.probability : 0.0);
    }

    SampledPurification operator()(Rng &rng) const {
        const auto &branch = branches_[detail::sample_index(weights_, rng)];
        const std::uint64_t recorded = detail::record_word(branch.outcome, 2 * sacrificed_, p_meas_, rng);
        if (!detail::recorded_agree(recorded, sacrificed_)) return {};
        return {true, branch.state};
    }

  private:
    std::size_t sacrificed_;
    double p_meas_;
    std::vector<Branch> branches_;
    std::vector<double> weights_;
};

inline SampledPurification purify_sampled(const std::vector<DensityMatrix> &pairs, PurifyVariant variant,
                                          const NoiseParams &noise, Rng &rng,
                                          MultiPairCircuit circuit = MultiPairCircuit::Default) {
    return PurificationSampler(pairs, variant, noise, circuit)(rng);
}

// Bilateral random Pauli twirl: keeps the Phi+ weight, spreads the rest
// evenly over the other Bell states.
inline DensityMatrix twirl_to_werner(const DensityMatrix &pair) {
    detail::check_pair(pair, "twirl_to_werner");
    return werner(bell_fidelity(pair));
}

struct RecurrenceRound {
    PurifyResult result;
    std::size_t pairs_consumed = 0; // raw input pairs behind one output pair
    double compound_yield = 0.0;    // probability that every step succeeds on the first attempt
};

// Round r purifies schedule[r] copies of round r-1's output. Bennett rounds
// twirl their inputs back to Werner form first, as the protocol requires.
inline std::vector<RecurrenceRound> purify_recurrence(const std::vector<std::size_t> &schedule,
                                                      const DensityMatrix &input, PurifyVariant variant,
                                                      const NoiseParams &noise = {},
                                                      MultiPairCircuit circuit = MultiPairCircuit::Default) {
    if (schedule.empty()) throw std::invalid_argument("purify_recurrence: empty schedule");
    detail::check_pair(input, "purify_recurrence");
    std::vector<RecurrenceRound> rounds;
    DensityMatrix current = input;
    std::size_t consumed = 1;
    double yield = 1.0;
    for (std::size_t r = 0; r < schedule.size(); ++r) {
        if (schedule[r] < 2) throw std::invalid_argument("purify_recurrence: each round needs at least two pairs");
        if (r > 0 && variant == PurifyVariant::Bennett) current = twirl_to_werner(current);
        RecurrenceRound round;
        round.result = purify_multi(std::vector<DensityMatrix>(schedule[r], current), variant, noise, circuit);
        consumed *= schedule[r];
        yield = round.result.success_probability * std::pow(yield, static_cast<double>(schedule[r]));
        round.pairs_consumed = consumed;
        round.compound_yield = yield;
        rounds.push_back(round);
        if (!round.result.post_state) throw std::domain_error("purify_recurrence: round " + std::to_string(r) +
                                                              " never succeeds");
        current = *round.result.post_state;
    }
    return rounds;
}

} // namespace qrep
