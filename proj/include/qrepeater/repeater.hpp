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

// Nested purify-then-swap repeater and the integrated three-pair circuit.
//
// Links are indexed per level: level 0 holds one link per segment, and level
// r+1 is built from level r by swapping neighbours left to right, an odd last
// link passing through. Every level is purified before its swaps. Segments
// never share entanglement before a swap, so each link is simulated as its
// own 2-qubit state.

#pragma once

#include <cmath>
#include <memory>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "qrepeater/noise.hpp"
#include "qrepeater/parallel.hpp"
#include "qrepeater/protocols.hpp"

namespace qrep {

enum class RunMode { Exact, Sampled };

inline std::string_view to_string(RunMode m) { return m == RunMode::Exact ? "exact" : "sampled"; }

inline constexpr std::size_t kExactQubitBudget = 12;

struct RepeaterConfig {
    std::size_t segments = 1;
    std::size_t hops_per_segment = 0;
    std::size_t pairs_per_purification = 1; // 1 disables purification
    PurifyVariant variant = PurifyVariant::Deutsch;
    MultiPairCircuit circuit = MultiPairCircuit::Default;
    NoiseParams noise;
    ChannelModel channel; // length_km is per segment; hops_per_segment overrides channel.hops
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    RunMode mode = RunMode::Exact;
    bool purify_final_link = false;

    std::string describe() const {
        std::ostringstream os;
        os << "segments=" << segments << " hops_per_segment=" << hops_per_segment
           << " pairs_per_purification=" << pairs_per_purification << " variant=" << to_string(variant)
           << " mode=" << to_string(mode);
        return os.str();
    }

    void validate() const {
        if (segments < 1) throw std::invalid_argument("repeater: segments must be >= 1");
        if (pairs_per_purification < 1) throw std::invalid_argument("repeater: pairs_per_purification must be >= 1");
        if (trials < 1) throw std::invalid_argument("repeater: trials must be >= 1");
        noise.validate();
        channel.validate();
        const std::size_t budget = mode == RunMode::Exact ? kExactQubitBudget : kMaxQubits;
        if (2 * pairs_per_purification > budget)
            throw std::invalid_argument("repeater: qubit budget exceeded (" +
                                        std::to_string(2 * pairs_per_purification) + " > " + std::to_string(budget) +
                                        " qubits) for " + describe());
    }

    ChannelModel segment_channel() const {
        ChannelModel c = channel;
        c.hops = hops_per_segment;
        return c;
    }

    bool purifies() const { return pairs_per_purification > 1; }
};

struct RoundStats {
    std::size_t index = 0;
    double fidelity_before = 0.0; // mean over the level's links before purification
    double fidelity_after_purification = 0.0;
    double purification_success = 1.0;
    double fidelity_after_swap = 0.0; // mean over the next level's links
};

struct FinalPurification {
    double fidelity_before = 0.0;
    double fidelity_after = 0.0;
    double success_probability = 1.0;
};

struct RepeaterReport {
    double final_fidelity = 0.0;
    double fidelity_stderr = 0.0;
    double yield = 0.0;
    double yield_stderr = 0.0;
    std::size_t rounds = 0;
    std::vector<RoundStats> per_round;
    std::optional<FinalPurification> final_purification;
    std::size_t raw_pairs_per_link = 0;   // raw segment pairs behind one end-to-end link
    double attempts_for_generation = 0.0; // mean attempt_generation calls per trial
    std::size_t trials = 0;
    std::size_t restarted_trials = 0; // Sampled mode
    double mean_restarts = 0.0;       // Sampled mode
    std::optional<DensityMatrix> final_state; // Exact mode
};

inline std::size_t ceil_log2(std::size_t n) {
    std::size_t r = 0;
    while ((std::size_t{1} << r) < n) ++r;
    return r;
}

inline std::vector<std::size_t> level_sizes(std::size_t segments) {
    std::vector<std::size_t> sizes{segments};
    while (sizes.back() > 1) sizes.push_back((sizes.back() + 1) / 2);
    return sizes;
}

inline DensityMatrix segment_link(const NoiseParams &noise, const ChannelModel &channel) {
    return distribute(prepare_bell_pair(noise), 1, channel, noise);
}

namespace detail {

inline constexpr std::size_t kMaxRestarts = 1'000'000;
inline constexpr std::size_t kMaxGenerationAttempts = 100'000'000;

inline std::size_t raw_pairs_per_link(const RepeaterConfig &cfg) {
    const auto sizes = level_sizes(cfg.segments);
    const std::size_t m = cfg.pairs_per_purification;
    std::vector<std::size_t> raw(cfg.segments, 1);
    for (std::size_t r = 0; r + 1 < sizes.size(); ++r) {
        std::vector<std::size_t> next(sizes[r + 1], 0);
        for (std::size_t i = 0; i < sizes[r]; ++i) next[i / 2] += m * raw[i];
        raw = std::move(next);
    }
    return raw.front() * (cfg.purify_final_link ? m : 1);
}

inline double mean(const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

struct Sample {
    double mean = 0.0;
    double std_error = 0.0;
};

inline Sample summarize(const std::vector<double> &values) {
    Sample s;
    if (values.empty()) return s;
    s.mean = mean(values);
    if (values.size() > 1) {
        double ss = 0.0;
        for (double x : values) ss += (x - s.mean) * (x - s.mean);
        s.std_error = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
    }
    return s;
}

inline std::size_t generation_attempts(const ChannelModel &channel, Rng &rng) {
    std::size_t attempts = 1;
    while (!attempt_generation(channel, rng)) {
        if (++attempts > kMaxGenerationAttempts)
            throw std::runtime_error("repeater: link generation did not succeed within the attempt cap");
    }
    return attempts;
}

//------------------------------------------------------------------------------
// Exact mode

struct ExactLink {
    DensityMatrix state;
    double yield;
};

class PurificationCache {
  public:
    PurificationCache(std::size_t m, PurifyVariant v, MultiPairCircuit c, const NoiseParams &n)
        : m_(m), variant_(v), circuit_(c), noise_(n) {}

    const PurifyResult &operator()(const DensityMatrix &input) {
        for (const auto &[state, result] : entries_)
            if (state == input.matrix()) return result;
        entries_.emplace_back(input.matrix(),
                              purify_multi(std::vector<DensityMatrix>(m_, input), variant_, noise_, circuit_));
        return entries_.back().second;
    }

  private:
    std::size_t m_;
    PurifyVariant variant_;
    MultiPairCircuit circuit_;
    NoiseParams noise_;
    std::vector<std::pair<Matrix, PurifyResult>> entries_;
};

inline double mean_fidelity(const std::vector<ExactLink> &links) {
    double s = 0.0;
    for (const auto &l : links) s += bell_fidelity(l.state);
    return s / static_cast<double>(links.size());
}

inline ExactLink purify_exact(const ExactLink &link, std::size_t m, PurificationCache &cache, double &success) {
    const PurifyResult &r = cache(link.state);
    success = r.success_probability;
    if (!r.post_state)
        throw std::domain_error("repeater: purification success probability vanishes for this configuration");
    return {*r.post_state, r.success_probability * std::pow(link.yield, static_cast<double>(m))};
}

inline RepeaterReport run_exact(const RepeaterConfig &cfg) {
    const std::size_t m = cfg.pairs_per_purification;
    const auto sizes = level_sizes(cfg.segments);
    PurificationCache cache(m, cfg.variant, cfg.circuit, cfg.noise);
    RepeaterReport report;
    report.rounds = sizes.size() - 1;
    report.trials = 1;

    const DensityMatrix segment = segment_link(cfg.noise, cfg.segment_channel());
    std::vector<ExactLink> links(cfg.segments, ExactLink{segment, 1.0});
    for (std::size_t r = 0; r < report.rounds; ++r) {
        RoundStats stats;
        stats.index = r;
        stats.fidelity_before = mean_fidelity(links);
        if (cfg.purifies()) {
            double success_sum = 0.0;
            for (auto &l : links) {
                double p = 0.0;
                l = purify_exact(l, m, cache, p);
                success_sum += p;
            }
            stats.purification_success = success_sum / static_cast<double>(links.size());
        }
        stats.fidelity_after_purification = mean_fidelity(links);
        std::vector<ExactLink> next;
        for (std::size_t i = 0; i < links.size(); i += 2) {
            if (i + 1 == links.size()) {
                next.push_back(links[i]);
                continue;
            }
            const SwapResult s = entanglement_swap(links[i].state, links[i + 1].state, true, cfg.noise);
            next.push_back({s.post_state, links[i].yield * links[i + 1].yield});
        }
        links = std::move(next);
        stats.fidelity_after_swap = mean_fidelity(links);
        report.per_round.push_back(stats);
    }

    ExactLink final_link = links.front();
    if (cfg.purify_final_link && cfg.purifies()) {
        FinalPurification fp;
        fp.fidelity_before = bell_fidelity(final_link.state);
        final_link = purify_exact(final_link, m, cache, fp.success_probability);
        fp.fidelity_after = bell_fidelity(final_link.state);
        report.final_purification = fp;
    }
    report.final_fidelity = bell_fidelity(final_link.state);
    report.yield = std::clamp(final_link.yield, 0.0, 1.0);
    report.final_state = final_link.state;
    report.raw_pairs_per_link = raw_pairs_per_link(cfg);

    // Generation attempts are a Monte Carlo count even in Exact mode.
    Rng rng(derive_seed(cfg.seed, 0x67656eULL));
    const ChannelModel channel = cfg.segment_channel();
    std::size_t attempts = 0;
    for (std::size_t t = 0; t < cfg.trials; ++t)
        for (std::size_t k = 0; k < report.raw_pairs_per_link; ++k) attempts += generation_attempts(channel, rng);
    report.attempts_for_generation = static_cast<double>(attempts) / static_cast<double>(cfg.trials);
    return report;
}

//------------------------------------------------------------------------------
// Sampled mode

// Memo of pure functions of a list of states, keyed by exact matrix
// equality. Sampled links come from a finite set of branch states, so hits
// dominate. Values never depend on insertion order, so sharing the cache
// across threads keeps results deterministic.
template <class Value>
class StateKeyedCache {
  public:
    template <class Make>
    std::shared_ptr<const Value> get(const std::vector<const DensityMatrix *> &key, Make make) {
        const std::uint64_t h = hash(key);
        {
            std::lock_guard lock(mutex_);
            if (auto hit = find(h, key)) return hit;
        }
        auto value = std::make_shared<const Value>(make());
        std::lock_guard lock(mutex_);
        if (auto hit = find(h, key)) return hit;
        if (size_ < kCapacity) {
            std::vector<Matrix> stored;
            for (const auto *k : key) stored.push_back(k->matrix());
            buckets_[h].emplace_back(std::move(stored), value);
            ++size_;
        }
        return value;
    }

  private:
    static constexpr std::size_t kCapacity = 1 << 16;

    static std::uint64_t hash(const std::vector<const DensityMatrix *> &key) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto *k : key) {
            const auto *bytes = reinterpret_cast<const unsigned char *>(k->matrix().data());
            const std::size_t n = static_cast<std::size_t>(k->matrix().size()) * sizeof(cplx);
            for (std::size_t i = 0; i < n; ++i) h = (h ^ bytes[i]) * 0x100000001b3ULL;
        }
        return h;
    }

    std::shared_ptr<const Value> find(std::uint64_t h, const std::vector<const DensityMatrix *> &key) const {
        const auto it = buckets_.find(h);
        if (it == buckets_.end()) return nullptr;
        for (const auto &[stored, value] : it->second) {
            if (stored.size() != key.size()) continue;
            bool same = true;
            for (std::size_t i = 0; i < key.size() && same; ++i) same = stored[i] == key[i]->matrix();
            if (same) return value;
        }
        return nullptr;
    }

    std::mutex mutex_;
    std::size_t size_ = 0;
    std::unordered_map<std::uint64_t, std::vector<std::pair<std::vector<Matrix>, std::shared_ptr<const Value>>>>
        buckets_;
};

struct SamplerCaches {
    StateKeyedCache<PurificationSampler> purification;
    StateKeyedCache<SwapSampler> swap;
};

struct RoundAccumulator {
    double before = 0.0, after = 0.0, swapped = 0.0;
    std::size_t n_before = 0, n_after = 0, n_swapped = 0;
    std::size_t attempts = 0, successes = 0;
};

struct TrialOutcome {
    double fidelity = 0.0;
    std::size_t restarts = 0;
    std::size_t generation_attempts = 0;
    std::vector<RoundAccumulator> rounds; // one extra slot for the final purification
};

class SampledTrial {
  public:
    SampledTrial(const RepeaterConfig &cfg, const DensityMatrix &segment, const std::vector<std::size_t> &sizes,
                 SamplerCaches &caches, Rng rng)
        : cfg_(cfg), segment_(segment), sizes_(sizes), caches_(caches), channel_(cfg.segment_channel()),
          rng_(std::move(rng)) {
        out_.rounds.resize(sizes_.size());
    }

    TrialOutcome run() {
        const std::size_t top = sizes_.size() - 1;
        DensityMatrix link = ready(top, 0);
        if (cfg_.purify_final_link && cfg_.purifies()) link = purified(top, 0);
        out_.fidelity = bell_fidelity(link);
        return std::move(out_);
    }

  private:
    // Link `i` of `level`, before that level's purification.
    DensityMatrix ready(std::size_t level, std::size_t i) {
        if (level == 0) {
            out_.generation_attempts += generation_attempts(channel_, rng_);
            return segment_;
        }
        const std::size_t r = level - 1;
        DensityMatrix left = purified(r, 2 * i);
        DensityMatrix link = left;
        if (2 * i + 1 < sizes_[r]) {
            DensityMatrix right = purified(r, 2 * i + 1);
            const auto sampler =
                caches_.swap.get({&left, &right}, [&] { return SwapSampler(left, right, cfg_.noise); });
            link = (*sampler)(rng_);
        }
        auto &acc = out_.rounds[r];
        acc.swapped += bell_fidelity(link);
        ++acc.n_swapped;
        return link;
    }

    // A failed herald discards every copy and rebuilds them from scratch.
    DensityMatrix purified(std::size_t level, std::size_t i) {
        auto &acc = out_.rounds[level];
        const std::size_t m = cfg_.pairs_per_purification;
        for (;;) {
            std::vector<DensityMatrix> copies;
            copies.reserve(m);
            for (std::size_t k = 0; k < m; ++k) {
                copies.push_back(ready(level, i));
                acc.before += bell_fidelity(copies.back());
                ++acc.n_before;
            }
            ++acc.attempts;
            if (m == 1) {
                ++acc.successes;
                acc.after += bell_fidelity(copies.front());
                ++acc.n_after;
                return copies.front();
            }
            std::vector<const DensityMatrix *> key;
            for (const auto &c : copies) key.push_back(&c);
            const auto sampler = caches_.purification.get(
                key, [&] { return PurificationSampler(copies, cfg_.variant, cfg_.noise, cfg_.circuit); });
            auto shot = (*sampler)(rng_);
            if (shot.success) {
                ++acc.successes;
                acc.after += bell_fidelity(*shot.post_state);
                ++acc.n_after;
                return *shot.post_state;
            }
            if (++out_.restarts > kMaxRestarts)
                throw std::runtime_error("repeater: restart cap exceeded for " + cfg_.describe());
        }
    }

    const RepeaterConfig &cfg_;
    const DensityMatrix &segment_;
    const std::vector<std::size_t> &sizes_;
    SamplerCaches &caches_;
    ChannelModel channel_;
    Rng rng_;
    TrialOutcome out_;
};

inline RepeaterReport run_sampled(const RepeaterConfig &cfg) {
    const auto sizes = level_sizes(cfg.segments);
    const DensityMatrix segment = segment_link(cfg.noise, cfg.segment_channel());
    SamplerCaches caches;
    const auto outcomes = parallel_map(cfg.trials, [&](std::size_t t) {
        return SampledTrial(cfg, segment, sizes, caches, Rng::for_stream(cfg.seed, t)).run();
    });

    RepeaterReport report;
    report.rounds = sizes.size() - 1;
    report.trials = cfg.trials;
    report.raw_pairs_per_link = raw_pairs_per_link(cfg);
    std::vector<double> fidelities, clean;
    fidelities.reserve(outcomes.size());
    clean.reserve(outcomes.size());
    std::vector<RoundAccumulator> total(sizes.size());
    std::size_t restarts = 0, attempts = 0;
    for (const auto &o : outcomes) {
        fidelities.push_back(o.fidelity);
        clean.push_back(o.restarts == 0 ? 1.0 : 0.0);
        restarts += o.restarts;
        attempts += o.generation_attempts;
        if (o.restarts > 0) ++report.restarted_trials;
        for (std::size_t r = 0; r < total.size(); ++r) {
            const auto &a = o.rounds[r];
            total[r].before += a.before;
            total[r].after += a.after;
            total[r].swapped += a.swapped;
            total[r].n_before += a.n_before;
            total[r].n_after += a.n_after;
            total[r].n_swapped += a.n_swapped;
            total[r].attempts += a.attempts;
            total[r].successes += a.successes;
        }
    }
    const auto f = summarize(fidelities);
    report.final_fidelity = f.mean;
    report.fidelity_stderr = f.std_error;
    report.yield = mean(clean);
    report.yield_stderr = std::sqrt(report.yield * (1.0 - report.yield) / static_cast<double>(cfg.trials));
    report.mean_restarts = static_cast<double>(restarts) / static_cast<double>(cfg.trials);
    report.attempts_for_generation = static_cast<double>(attempts) / static_cast<double>(cfg.trials);

    auto ratio = [](double s, std::size_t n) { return n == 0 ? 0.0 : s / static_cast<double>(n); };
    for (std::size_t r = 0; r < report.rounds; ++r) {
        const auto &a = total[r];
        report.per_round.push_back({r, ratio(a.before, a.n_before), ratio(a.after, a.n_after),
                                    ratio(static_cast<double>(a.successes), a.attempts),
                                    ratio(a.swapped, a.n_swapped)});
    }
    if (cfg.purify_final_link && cfg.purifies()) {
        const auto &a = total.back();
        report.final_purification = FinalPurification{ratio(a.before, a.n_before), ratio(a.after, a.n_after),
                                                      ratio(static_cast<double>(a.successes), a.attempts)};
    }
    return report;
}

} // namespace detail

inline RepeaterReport run_repeater(const RepeaterConfig &config) {
    config.validate();
    return config.mode == RunMode::Exact ? detail::run_exact(config) : detail::run_sampled(config);
}

//==============================================================================
// Integrated three-pair circuit
//==============================================================================

struct PaperCircuitResult {
    double fidelity = 0.0;
    double fidelity_stderr = 0.0;
    double yield = 0.0;
    double yield_stderr = 0.0;
    std::size_t trials = 0;
};

// One end-to-end pair: Alice prepares (0,1) and sends qubit 1 through the
// channel to Bob, who holds (2,3). Bob swaps onto qubit 3 without feed-forward:
// CNOT(1->2), H(1), then CNOT(2->3) and CZ(1->3) as coherent corrections.
inline DensityMatrix paper_circuit_link(const NoiseParams &noise, const ChannelModel &channel) {
    noise.validate();
    channel.validate();
    const DensityMatrix sent = distribute(prepare_bell_pair(noise), 1, channel, noise);
    DensityMatrix joint = tensor(sent, prepare_bell_pair(noise));
    joint = apply_noisy(std::move(joint), gates::CNOT(), {1, 2}, noise);
    joint = apply_noisy(std::move(joint), gates::H(), {1}, noise);
    joint = apply_noisy(std::move(joint), gates::CNOT(), {2, 3}, noise);
    joint = apply_noisy(std::move(joint), gates::H(), {3}, noise);
    joint = apply_noisy(std::move(joint), gates::CNOT(), {1, 3}, noise);
    joint = apply_noisy(std::move(joint), gates::H(), {3}, noise);
    return partial_trace(joint, {0, 3});
}

// Three such pairs, Deutsch rotations and fan-out CNOTs from the kept pair,
// heralded on the two sacrificed pairs.
inline PaperCircuitResult run_paper_circuit(const NoiseParams &noise, const ChannelModel &channel,
                                            std::size_t trials = 1, std::uint64_t seed = 0,
                                            RunMode mode = RunMode::Exact) {
    if (trials < 1) throw std::invalid_argument("run_paper_circuit: trials must be >= 1");
    const DensityMatrix link = paper_circuit_link(noise, channel);
    const std::vector<DensityMatrix> pairs(3, link);
    PaperCircuitResult out;
    if (mode == RunMode::Exact) {
        const PurifyResult r = purify_multi(pairs, PurifyVariant::Deutsch, noise, MultiPairCircuit::Fanout);
        out.fidelity = r.fidelity_after;
        out.yield = r.success_probability;
        out.trials = 1;
        return out;
    }
    const PurificationSampler sampler(pairs, PurifyVariant::Deutsch, noise, MultiPairCircuit::Fanout);
    const auto shots = parallel_map(trials, [&](std::size_t t) {
        Rng rng = Rng::for_stream(seed, t);
        const auto shot = sampler(rng);
        return shot.success ? bell_fidelity(*shot.post_state) : -1.0;
    });
    std::vector<double> fidelities, successes;
    for (double f : shots) {
        successes.push_back(f >= 0.0 ? 1.0 : 0.0);
        if (f >= 0.0) fidelities.push_back(f);
    }
    const auto f = detail::summarize(fidelities);
    out.fidelity = f.mean;
    out.fidelity_stderr = f.std_error;
    out.yield = detail::mean(successes);
    out.yield_stderr = std::sqrt(out.yield * (1.0 - out.yield) / static_cast<double>(trials));
    out.trials = trials;
    return out;
}

} // namespace qrep
