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

// Dense state semantics: pure states, density matrices, gates, Kraus channels,
// partial trace, measurement and fidelity.
//
// Qubit ordering: qubit k is bit k of the basis index (bit 0 least
// significant). tensor(a, b) places `a` on the low-index qubits. Gate-local
// indices follow the same rule over the target list, so for a two-qubit gate
// applied to targets {c, t}, bit 0 of the gate's row/column index is qubit c.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qrepeater/rng.hpp"

namespace qrep {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using QubitList = std::vector<std::size_t>;

inline constexpr std::size_t kMaxQubits = 14;

inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kUnitaryTolerance = 1e-12;
inline constexpr double kHermitianTolerance = 1e-10;
inline constexpr double kTraceTolerance = 1e-10;
inline constexpr double kCptpTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-9;
// Branches below this probability carry no conditioned state.
inline constexpr double kNullBranch = 1e-14;

namespace detail {

inline std::size_t dim_of(std::size_t n_qubits) { return std::size_t{1} << n_qubits; }

inline bool is_finite(const Matrix &m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            if (!std::isfinite(m(r, c).real()) || !std::isfinite(m(r, c).imag())) return false;
    return true;
}

inline std::size_t qubits_for_dim(Eigen::Index dim, const char *what) {
    if (dim <= 1 || (dim & (dim - 1)) != 0)
        throw std::invalid_argument(std::string(what) + ": dimension must be a power of two >= 2");
    std::size_t n = 0;
    while ((Eigen::Index{1} << n) < dim) ++n;
    if (n > kMaxQubits) throw std::invalid_argument(std::string(what) + ": too many qubits");
    return n;
}

inline void check_qubits(std::span<const std::size_t> qubits, std::size_t n_qubits, const char *what) {
    for (std::size_t i = 0; i < qubits.size(); ++i) {
        if (qubits[i] >= n_qubits)
            throw std::out_of_range(std::string(what) + ": qubit index " + std::to_string(qubits[i]) +
                                    " out of range for " + std::to_string(n_qubits) + " qubits");
        for (std::size_t j = 0; j < i; ++j)
            if (qubits[j] == qubits[i])
                throw std::invalid_argument(std::string(what) + ": duplicate qubit index " +
                                            std::to_string(qubits[i]));
    }
}

// Offset of each local basis state of `targets` inside the full index space.
inline std::vector<std::size_t> local_offsets(std::span<const std::size_t> targets) {
    std::vector<std::size_t> offsets(dim_of(targets.size()), 0);
    for (std::size_t local = 0; local < offsets.size(); ++local)
        for (std::size_t b = 0; b < targets.size(); ++b)
            if ((local >> b) & 1U) offsets[local] |= std::size_t{1} << targets[b];
    return offsets;
}

// All full indices whose `targets` bits are zero, ascending.
inline std::vector<std::size_t> base_indices(std::size_t n_qubits, std::span<const std::size_t> targets) {
    std::size_t mask = 0;
    for (auto t : targets) mask |= std::size_t{1} << t;
    std::vector<std::size_t> bases;
    bases.reserve(dim_of(n_qubits) >> targets.size());
    for (std::size_t i = 0; i < dim_of(n_qubits); ++i)
        if ((i & mask) == 0) bases.push_back(i);
    return bases;
}

// Applies `op` in place to the bits `targets` of a flat array of 2^nbits
// amplitudes. A density matrix stored column-major is such an array over
// 2n bits: row qubit q is bit q, column qubit q is bit n + q.
inline void apply_local(cplx *data, std::size_t nbits, const Matrix &op, std::span<const std::size_t> targets) {
    struct Entry {
        std::size_t row, col;
        double re, im;
    };
    const auto offsets = local_offsets(targets);
    const std::size_t local = offsets.size();
    // Gates here are mostly permutations or have few nonzeros; the complex
    // product is spelled out to stay off the NaN-checking library path.
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < local; ++i)
        for (std::size_t j = 0; j < local; ++j) {
            const cplx u = op(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (u != cplx{0.0, 0.0}) entries.push_back({i, j, u.real(), u.imag()});
        }
    std::size_t mask = 0;
    for (auto t : targets) mask |= std::size_t{1} << t;
    if (local > 16) throw std::invalid_argument("apply_local: at most four target bits");
    std::array<cplx, 16> in{};
    std::array<double, 32> out{};
    const std::size_t len = dim_of(nbits);
    for (std::size_t base = 0; base < len; ++base) {
        if (base & mask) continue;
        for (std::size_t j = 0; j < local; ++j) in[j] = data[base + offsets[j]];
        out.fill(0.0);
        for (const auto &e : entries) {
            const double xr = in[e.col].real(), xi = in[e.col].imag();
            out[2 * e.row] += e.re * xr - e.im * xi;
            out[2 * e.row + 1] += e.re * xi + e.im * xr;
        }
        for (std::size_t i = 0; i < local; ++i) data[base + offsets[i]] = cplx{out[2 * i], out[2 * i + 1]};
    }
}

// m <- op m op^dagger on the target qubits of an n-qubit operator, in one
// pass: conj(op) on the column bits times op on the row bits.
inline void sandwich(Matrix &m, const Matrix &op, std::span<const std::size_t> targets, std::size_t n_qubits) {
    QubitList bits(targets.begin(), targets.end());
    for (auto t : targets) bits.push_back(t + n_qubits);
    const Matrix both = Eigen::kroneckerProduct(op.conjugate(), op).eval();
    apply_local(m.data(), 2 * n_qubits, both, bits);
}

// Scatter the bits of `value` onto the positions listed in `qubits`.
inline std::size_t scatter(std::size_t value, std::span<const std::size_t> qubits) {
    std::size_t out = 0;
    for (std::size_t b = 0; b < qubits.size(); ++b)
        if ((value >> b) & 1U) out |= std::size_t{1} << qubits[b];
    return out;
}

inline QubitList complement(std::size_t n_qubits, std::span<const std::size_t> a, std::span<const std::size_t> b = {}) {
    QubitList rest;
    for (std::size_t q = 0; q < n_qubits; ++q)
        if (std::find(a.begin(), a.end(), q) == a.end() && std::find(b.begin(), b.end(), q) == b.end())
            rest.push_back(q);
    return rest;
}

struct unchecked_t {};
inline constexpr unchecked_t unchecked{};

} // namespace detail

//==============================================================================
class PureState {
  public:
    // Validates the normalization; use normalized() to rescale arbitrary input.
    explicit PureState(Vector amplitudes) : amplitudes_(std::move(amplitudes)) {
        n_qubits_ = detail::qubits_for_dim(amplitudes_.size(), "PureState");
        for (Eigen::Index i = 0; i < amplitudes_.size(); ++i)
            if (!std::isfinite(amplitudes_[i].real()) || !std::isfinite(amplitudes_[i].imag()))
                throw std::invalid_argument("PureState: non-finite amplitude");
        if (std::abs(amplitudes_.squaredNorm() - 1.0) > kNormTolerance)
            throw std::invalid_argument("PureState: amplitudes are not normalized");
    }

    static PureState normalized(Vector amplitudes) {
        const double norm = amplitudes.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("PureState: zero or non-finite vector");
        return PureState(amplitudes / norm);
    }

    static PureState basis(std::size_t n_qubits, std::size_t index) {
        if (n_qubits == 0 || n_qubits > kMaxQubits) throw std::invalid_argument("PureState: bad qubit count");
        if (index >= detail::dim_of(n_qubits)) throw std::out_of_range("PureState: basis index out of range");
        Vector v = Vector::Zero(static_cast<Eigen::Index>(detail::dim_of(n_qubits)));
        v[static_cast<Eigen::Index>(index)] = 1.0;
        return PureState(std::move(v));
    }

    std::size_t n_qubits() const { return n_qubits_; }
    std::size_t dim() const { return static_cast<std::size_t>(amplitudes_.size()); }
    const Vector &amplitudes() const { return amplitudes_; }
    cplx operator[](std::size_t i) const { return amplitudes_[static_cast<Eigen::Index>(i)]; }

  private:
    std::size_t n_qubits_ = 0;
    Vector amplitudes_;
};

//==============================================================================
class DensityMatrix {
  public:
    // Checked construction: square, power-of-two, finite, Hermitian, unit
    // trace and positive semidefinite within the library tolerances.
    explicit DensityMatrix(Matrix elements) : elements_(std::move(elements)) {
        if (elements_.rows() != elements_.cols()) throw std::invalid_argument("DensityMatrix: matrix is not square");
        n_qubits_ = detail::qubits_for_dim(elements_.rows(), "DensityMatrix");
        if (!detail::is_finite(elements_)) throw std::invalid_argument("DensityMatrix: non-finite element");
        if (hermiticity_error() > kHermitianTolerance) throw std::invalid_argument("DensityMatrix: not Hermitian");
        if (std::abs(trace() - 1.0) > kTraceTolerance) throw std::invalid_argument("DensityMatrix: trace is not 1");
        if (min_eigenvalue() < -kPsdTolerance)
            throw std::invalid_argument("DensityMatrix: not positive semidefinite");
    }

    // Trusted construction for operation outputs.
    DensityMatrix(detail::unchecked_t, std::size_t n_qubits, Matrix elements)
        : n_qubits_(n_qubits), elements_(std::move(elements)) {}

    explicit DensityMatrix(const PureState &psi)
        : n_qubits_(psi.n_qubits()), elements_(psi.amplitudes() * psi.amplitudes().adjoint()) {}

    static DensityMatrix basis(std::size_t n_qubits, std::size_t index) {
        return DensityMatrix(PureState::basis(n_qubits, index));
    }

    static DensityMatrix maximally_mixed(std::size_t n_qubits) {
        if (n_qubits == 0 || n_qubits > kMaxQubits) throw std::invalid_argument("DensityMatrix: bad qubit count");
        const auto d = static_cast<Eigen::Index>(detail::dim_of(n_qubits));
        return {detail::unchecked, n_qubits, Matrix::Identity(d, d) / static_cast<double>(d)};
    }

    std::size_t n_qubits() const { return n_qubits_; }
    std::size_t dim() const { return static_cast<std::size_t>(elements_.rows()); }
    const Matrix &matrix() const { return elements_; }
    Matrix release() && { return std::move(elements_); }
    cplx operator()(std::size_t r, std::size_t c) const {
        return elements_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }

    double trace() const { return elements_.trace().real(); }

    double hermiticity_error() const { return (elements_ - elements_.adjoint()).cwiseAbs().maxCoeff(); }

    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Matrix> solver(elements_, Eigen::EigenvaluesOnly);
        return solver.eigenvalues().minCoeff();
    }

    Eigen::VectorXd eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Matrix> solver(elements_, Eigen::EigenvaluesOnly);
        return solver.eigenvalues();
    }

    bool is_valid() const {
        return detail::is_finite(elements_) && hermiticity_error() <= kHermitianTolerance &&
               std::abs(trace() - 1.0) <= kTraceTolerance && min_eigenvalue() >= -kPsdTolerance;
    }

  private:
    std::size_t n_qubits_ = 0;
    Matrix elements_;
};

//==============================================================================
class GateMatrix {
  public:
    GateMatrix(std::size_t arity, Matrix elements) : arity_(arity), elements_(std::move(elements)) {
        if (arity_ != 1 && arity_ != 2) throw std::invalid_argument("GateMatrix: arity must be 1 or 2");
        const auto d = static_cast<Eigen::Index>(detail::dim_of(arity_));
        if (elements_.rows() != d || elements_.cols() != d)
            throw std::invalid_argument("GateMatrix: matrix size does not match arity");
        if (!detail::is_finite(elements_)) throw std::invalid_argument("GateMatrix: non-finite element");
        const Matrix defect = elements_.adjoint() * elements_ - Matrix::Identity(d, d);
        if (defect.cwiseAbs().maxCoeff() > kUnitaryTolerance) throw std::invalid_argument("GateMatrix: not unitary");
    }

    std::size_t arity() const { return arity_; }
    const Matrix &matrix() const { return elements_; }

  private:
    std::size_t arity_;
    Matrix elements_;
};

//==============================================================================
class KrausChannel {
  public:
    KrausChannel(std::size_t arity, std::vector<Matrix> ops) : arity_(arity), ops_(std::move(ops)) {
        if (arity_ != 1 && arity_ != 2) throw std::invalid_argument("KrausChannel: arity must be 1 or 2");
        if (ops_.empty()) throw std::invalid_argument("KrausChannel: empty operator list");
        const auto d = static_cast<Eigen::Index>(detail::dim_of(arity_));
        Matrix sum = Matrix::Zero(d, d);
        for (const auto &k : ops_) {
            if (k.rows() != d || k.cols() != d)
                throw std::invalid_argument("KrausChannel: operator size does not match arity");
            if (!detail::is_finite(k)) throw std::invalid_argument("KrausChannel: non-finite element");
            sum += k.adjoint() * k;
        }
        if ((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > kCptpTolerance)
            throw std::invalid_argument("KrausChannel: operators are not trace preserving");
    }

    std::size_t arity() const { return arity_; }
    const std::vector<Matrix> &ops() const { return ops_; }

  private:
    std::size_t arity_;
    std::vector<Matrix> ops_;
};

struct MeasurementRecord {
    std::size_t qubit = 0;
    int outcome = 0;
    double probability = 0.0;
};

// One outcome of a multi-qubit computational-basis measurement. Bit j of
// `outcome` is the result on the j-th measured qubit.
struct Branch {
    std::uint64_t outcome = 0;
    double probability = 0.0;
    std::optional<DensityMatrix> state;
};

//==============================================================================
// Operations
//==============================================================================

inline PureState apply_unitary(const PureState &psi, const GateMatrix &gate, std::span<const std::size_t> targets) {
    if (targets.size() != gate.arity()) throw std::invalid_argument("apply_unitary: arity mismatch");
    detail::check_qubits(targets, psi.n_qubits(), "apply_unitary");
    Vector v = psi.amplitudes();
    detail::apply_local(v.data(), psi.n_qubits(), gate.matrix(), targets);
    return PureState::normalized(std::move(v));
}

// States are taken by value so that a circuit can move one buffer through
// successive operations.
inline DensityMatrix apply_unitary(DensityMatrix rho, const GateMatrix &gate, std::span<const std::size_t> targets) {
    if (targets.size() != gate.arity()) throw std::invalid_argument("apply_unitary: arity mismatch");
    detail::check_qubits(targets, rho.n_qubits(), "apply_unitary");
    const std::size_t n = rho.n_qubits();
    Matrix m = std::move(rho).release();
    detail::sandwich(m, gate.matrix(), targets, n);
    return {detail::unchecked, n, std::move(m)};
}

inline DensityMatrix apply_unitary(DensityMatrix rho, const GateMatrix &gate,
                                   std::initializer_list<std::size_t> targets) {
    return apply_unitary(std::move(rho), gate, std::span<const std::size_t>(targets.begin(), targets.size()));
}

inline PureState apply_unitary(const PureState &psi, const GateMatrix &gate,
                               std::initializer_list<std::size_t> targets) {
    return apply_unitary(psi, gate, std::span<const std::size_t>(targets.begin(), targets.size()));
}

inline DensityMatrix apply_channel(const DensityMatrix &rho, const KrausChannel &channel,
                                   std::span<const std::size_t> targets) {
    if (targets.size() != channel.arity()) throw std::invalid_argument("apply_channel: arity mismatch");
    detail::check_qubits(targets, rho.n_qubits(), "apply_channel");
    const auto d = static_cast<Eigen::Index>(rho.dim());
    Matrix sum = Matrix::Zero(d, d);
    Matrix m;
    for (const auto &k : channel.ops()) {
        m = rho.matrix();
        detail::sandwich(m, k, targets, rho.n_qubits());
        sum += m;
    }
    return {detail::unchecked, rho.n_qubits(), std::move(sum)};
}

inline DensityMatrix apply_channel(const DensityMatrix &rho, const KrausChannel &channel,
                                   std::initializer_list<std::size_t> targets) {
    return apply_channel(rho, channel, std::span<const std::size_t>(targets.begin(), targets.size()));
}

// (1-p) rho + p (I/d_T (x) Tr_T rho): the depolarizing channel in closed form.
// Identical to apply_channel(depolarizing_channel(p, |T|)) but O(dim^2).
inline DensityMatrix apply_depolarizing(DensityMatrix rho, double p, std::span<const std::size_t> targets) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("apply_depolarizing: probability out of range");
    detail::check_qubits(targets, rho.n_qubits(), "apply_depolarizing");
    if (p == 0.0) return rho;
    const std::size_t n = rho.n_qubits();
    const auto offsets = detail::local_offsets(targets);
    const auto bases = detail::base_indices(n, targets);
    const double share = p / static_cast<double>(offsets.size());
    Matrix m = std::move(rho).release();
    // Each (b1, b2) block only reads and writes its own entries.
    for (auto b2 : bases) {
        for (auto b1 : bases) {
            cplx reduced{0.0, 0.0};
            for (auto o : offsets) reduced += m(static_cast<Eigen::Index>(b1 + o), static_cast<Eigen::Index>(b2 + o));
            for (auto o : offsets) {
                cplx &e = m(static_cast<Eigen::Index>(b1 + o), static_cast<Eigen::Index>(b2 + o));
                e = (1.0 - p) * e + share * reduced;
            }
        }
    }
    // Entries outside the diagonal blocks just shrink.
    std::size_t mask = 0;
    for (auto t : targets) mask |= std::size_t{1} << t;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            if (((static_cast<std::size_t>(r) ^ static_cast<std::size_t>(c)) & mask) != 0) m(r, c) *= (1.0 - p);
    return {detail::unchecked, n, std::move(m)};
}

inline DensityMatrix apply_depolarizing(DensityMatrix rho, double p, std::initializer_list<std::size_t> targets) {
    return apply_depolarizing(std::move(rho), p, std::span<const std::size_t>(targets.begin(), targets.size()));
}

inline DensityMatrix tensor(const DensityMatrix &a, const DensityMatrix &b) {
    const std::size_t n = a.n_qubits() + b.n_qubits();
    if (n > kMaxQubits) throw std::invalid_argument("tensor: result exceeds the qubit limit");
    const auto da = static_cast<Eigen::Index>(a.dim());
    const auto db = static_cast<Eigen::Index>(b.dim());
    Matrix m(da * db, da * db);
    for (Eigen::Index bc = 0; bc < db; ++bc)
        for (Eigen::Index ac = 0; ac < da; ++ac)
            for (Eigen::Index br = 0; br < db; ++br)
                for (Eigen::Index ar = 0; ar < da; ++ar)
                    m(ar + br * da, ac + bc * da) = a.matrix()(ar, ac) * b.matrix()(br, bc);
    return {detail::unchecked, n, std::move(m)};
}

inline PureState tensor(const PureState &a, const PureState &b) {
    const auto da = static_cast<Eigen::Index>(a.dim());
    const auto db = static_cast<Eigen::Index>(b.dim());
    Vector v(da * db);
    for (Eigen::Index ib = 0; ib < db; ++ib)
        for (Eigen::Index ia = 0; ia < da; ++ia) v[ia + ib * da] = a.amplitudes()[ia] * b.amplitudes()[ib];
    return PureState::normalized(std::move(v));
}

// Reduced state on `keep`; qubit j of the result is keep[j].
inline DensityMatrix partial_trace(const DensityMatrix &rho, std::span<const std::size_t> keep) {
    if (keep.empty()) throw std::invalid_argument("partial_trace: keep list is empty");
    detail::check_qubits(keep, rho.n_qubits(), "partial_trace");
    const QubitList traced = detail::complement(rho.n_qubits(), keep);
    const std::size_t dk = detail::dim_of(keep.size());
    const std::size_t dt = detail::dim_of(traced.size());
    std::vector<std::size_t> keep_index(dk), traced_index(dt);
    for (std::size_t i = 0; i < dk; ++i) keep_index[i] = detail::scatter(i, keep);
    for (std::size_t t = 0; t < dt; ++t) traced_index[t] = detail::scatter(t, traced);
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
    for (std::size_t j = 0; j < dk; ++j)
        for (std::size_t i = 0; i < dk; ++i) {
            cplx acc{0.0, 0.0};
            for (auto t : traced_index)
                acc += rho(keep_index[i] | t, keep_index[j] | t);
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
        }
    return {detail::unchecked, keep.size(), std::move(out)};
}

inline DensityMatrix partial_trace(const DensityMatrix &rho, std::initializer_list<std::size_t> keep) {
    return partial_trace(rho, std::span<const std::size_t>(keep.begin(), keep.size()));
}

inline double outcome_probability(const DensityMatrix &rho, std::size_t qubit, int outcome) {
    detail::check_qubits(std::span<const std::size_t>(&qubit, 1), rho.n_qubits(), "outcome_probability");
    double p = 0.0;
    for (std::size_t i = 0; i < rho.dim(); ++i)
        if (static_cast<int>((i >> qubit) & 1U) == outcome) p += rho(i, i).real();
    return std::clamp(p, 0.0, 1.0);
}

namespace detail {

// Projects `rho` onto the given outcome of `qubits`, unnormalized.
inline Matrix project(const DensityMatrix &rho, std::span<const std::size_t> qubits, std::uint64_t outcome) {
    const std::size_t pattern = scatter(static_cast<std::size_t>(outcome), qubits);
    std::size_t mask = 0;
    for (auto q : qubits) mask |= std::size_t{1} << q;
    const auto d = static_cast<Eigen::Index>(rho.dim());
    Matrix out = Matrix::Zero(d, d);
    for (Eigen::Index c = 0; c < d; ++c) {
        if ((static_cast<std::size_t>(c) & mask) != pattern) continue;
        for (Eigen::Index r = 0; r < d; ++r)
            if ((static_cast<std::size_t>(r) & mask) == pattern) out(r, c) = rho.matrix()(r, c);
    }
    return out;
}

} // namespace detail

// Samples a computational-basis measurement of one qubit (Born rule) and
// returns the record plus the normalized post-measurement state.
inline std::pair<MeasurementRecord, DensityMatrix> measure(const DensityMatrix &rho, std::size_t qubit, Rng &rng) {
    detail::check_qubits(std::span<const std::size_t>(&qubit, 1), rho.n_qubits(), "measure");
    const double p0 = outcome_probability(rho, qubit, 0);
    const double p1 = outcome_probability(rho, qubit, 1);
    if (p0 <= 0.0 && p1 <= 0.0) throw std::domain_error("measure: both outcome probabilities vanish");
    const int outcome = rng.uniform() < p0 / (p0 + p1) ? 0 : 1;
    const double p = outcome == 0 ? p0 : p1;
    Matrix post = detail::project(rho, std::span<const std::size_t>(&qubit, 1), static_cast<std::uint64_t>(outcome));
    post /= p;
    return {MeasurementRecord{qubit, outcome, p}, DensityMatrix(detail::unchecked, rho.n_qubits(), std::move(post))};
}

// Exact enumeration of all 2^|qubits| measurement branches, in ascending
// order of the outcome word.
inline std::vector<Branch> measure_branches(const DensityMatrix &rho, std::span<const std::size_t> qubits) {
    detail::check_qubits(qubits, rho.n_qubits(), "measure_branches");
    const std::size_t count = detail::dim_of(qubits.size());
    std::vector<double> probs(count, 0.0);
    for (std::size_t i = 0; i < rho.dim(); ++i) {
        std::uint64_t word = 0;
        for (std::size_t b = 0; b < qubits.size(); ++b) word |= static_cast<std::uint64_t>((i >> qubits[b]) & 1U) << b;
        probs[word] += rho(i, i).real();
    }
    double total = 0.0;
    for (auto &p : probs) total += (p = std::max(p, 0.0));
    if (!(total > 0.0)) throw std::domain_error("measure_branches: state has no weight");
    std::vector<Branch> branches;
    branches.reserve(count);
    for (std::uint64_t word = 0; word < count; ++word) {
        Branch branch{word, probs[word] / total, std::nullopt};
        if (branch.probability >= kNullBranch) {
            Matrix m = detail::project(rho, qubits, word);
            m /= probs[word];
            branch.state.emplace(detail::unchecked, rho.n_qubits(), std::move(m));
        }
        branches.push_back(std::move(branch));
    }
    return branches;
}

inline std::vector<Branch> measure_branches(const DensityMatrix &rho, std::initializer_list<std::size_t> qubits) {
    return measure_branches(rho, std::span<const std::size_t>(qubits.begin(), qubits.size()));
}

// measure_branches followed by partial_trace onto `keep`, without forming the
// full conditioned states. Qubits neither measured nor kept are traced out.
inline std::vector<Branch> measure_branches_reduced(const DensityMatrix &rho, std::span<const std::size_t> measured,
                                                    std::span<const std::size_t> keep) {
    detail::check_qubits(measured, rho.n_qubits(), "measure_branches_reduced");
    detail::check_qubits(keep, rho.n_qubits(), "measure_branches_reduced");
    if (keep.empty()) throw std::invalid_argument("measure_branches_reduced: keep list is empty");
    for (auto k : keep)
        if (std::find(measured.begin(), measured.end(), k) != measured.end())
            throw std::invalid_argument("measure_branches_reduced: a kept qubit is also measured");
    const QubitList traced = detail::complement(rho.n_qubits(), measured, keep);
    const std::size_t count = detail::dim_of(measured.size());
    const std::size_t dk = detail::dim_of(keep.size());
    const std::size_t dt = detail::dim_of(traced.size());
    std::vector<std::size_t> keep_index(dk), traced_index(dt);
    for (std::size_t i = 0; i < dk; ++i) keep_index[i] = detail::scatter(i, keep);
    for (std::size_t t = 0; t < dt; ++t) traced_index[t] = detail::scatter(t, traced);

    std::vector<Matrix> blocks(count);
    std::vector<double> probs(count, 0.0);
    double total = 0.0;
    for (std::uint64_t word = 0; word < count; ++word) {
        const std::size_t pattern = detail::scatter(static_cast<std::size_t>(word), measured);
        Matrix block = Matrix::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
        for (std::size_t j = 0; j < dk; ++j)
            for (std::size_t i = 0; i < dk; ++i) {
                cplx acc{0.0, 0.0};
                for (auto t : traced_index) acc += rho(pattern | keep_index[i] | t, pattern | keep_index[j] | t);
                block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
            }
        probs[word] = std::max(block.trace().real(), 0.0);
        total += probs[word];
        blocks[word] = std::move(block);
    }
    if (!(total > 0.0)) throw std::domain_error("measure_branches_reduced: state has no weight");
    std::vector<Branch> branches;
    branches.reserve(count);
    for (std::uint64_t word = 0; word < count; ++word) {
        Branch branch{word, probs[word] / total, std::nullopt};
        if (branch.probability >= kNullBranch)
            branch.state.emplace(detail::unchecked, keep.size(), blocks[word] / probs[word]);
        branches.push_back(std::move(branch));
    }
    return branches;
}

inline double fidelity(const DensityMatrix &rho, const PureState &psi) {
    if (rho.dim() != psi.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
    const cplx overlap = psi.amplitudes().dot(rho.matrix() * psi.amplitudes());
    return std::clamp(overlap.real(), 0.0, 1.0);
}

namespace detail {

inline Matrix psd_sqrt(const Matrix &m) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
    Eigen::VectorXd values = solver.eigenvalues();
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values[i] < -kPsdTolerance) throw std::domain_error("fidelity: operand is not positive semidefinite");
        values[i] = std::sqrt(std::max(values[i], 0.0));
    }
    return solver.eigenvectors() * values.asDiagonal() * solver.eigenvectors().adjoint();
}

} // namespace detail

// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const DensityMatrix &rho, const DensityMatrix &sigma) {
    if (rho.dim() != sigma.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
    const Matrix root = detail::psd_sqrt(rho.matrix());
    Matrix inner = root * sigma.matrix() * root;
    inner = (inner + inner.adjoint()) * 0.5;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(inner, Eigen::EigenvaluesOnly);
    double tr = 0.0;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
        const double v = solver.eigenvalues()[i];
        if (v < -kPsdTolerance) throw std::domain_error("fidelity: intermediate operator is not positive semidefinite");
        tr += std::sqrt(std::max(v, 0.0));
    }
    return std::clamp(tr * tr, 0.0, 1.0);
}

} // namespace qrep
