#pragma once

// Shared fixtures: the desk-scale instance family and a few hand-built maps.

#include <algorithm>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "cpdilate/radon_nikodym.hpp"

namespace cpdilate::testing {

inline CStarAlgebra m_d(Index d) { return CStarAlgebra({d}); }

// M_1 (+) M_2 whose small seminorm only sees the M_2 block.
inline CStarAlgebra m1_m2() { return CStarAlgebra({1, 2}, {{1}, {0, 1}}); }

struct Sample {
    HilbertModule module;
    FlagSpace H;
    FlagSpace K;
    Index n = 1;
    Index mult = 1;
    CPPair pair;
};

// Deterministic walk through the instance family: A in {M_2, M_1+M_2},
// M in {self, free(2)}, n in {1,2,3}, multiplicity in {1,2,3}. K gets the
// smallest increments that hold the module representation, plus a spare
// dimension on odd seeds.
inline Sample family_sample(std::uint64_t seed) {
    Rng rng(derive_seed(0x5eed, seed));
    auto pick = [&](Index count) { return static_cast<Index>(rng() % static_cast<std::uint64_t>(count)); };
    const bool two_level = pick(2) == 1;
    const CStarAlgebra alg = two_level ? m1_m2() : m_d(2);
    const HilbertModule module = pick(2) == 1 ? HilbertModule::free(alg, 2) : HilbertModule::self(alg);
    Sample s{module, two_level ? FlagSpace({1, 2}) : FlagSpace({1 + pick(2)}), FlagSpace({1}), 1 + pick(3),
             1 + pick(3), {}};
    std::vector<Index> kdims;
    Index total = 0;
    for (Index l = 0; l < alg.levels(); ++l) {
        const Index rows = s.mult * module.level_rep_rows(l);
        total += std::max<Index>(1, (rows + s.n - 1) / s.n) + static_cast<Index>(seed % 2);
        kdims.push_back(total);
    }
    s.K = FlagSpace(kdims);
    s.pair = random_cp_pair(module, s.H, s.K, s.n, s.mult * alg.rep_dim(), seed);
    return s;
}

// Fixed two-level instance used by the round-trip tests.
inline Sample two_level_sample(std::uint64_t seed, Index n = 2) {
    const CStarAlgebra alg = m1_m2();
    const HilbertModule module = HilbertModule::free(alg, 2);
    const FlagSpace H({1, 2});
    const FlagSpace K({2, 5});
    return {module, H, K, n, 1, random_cp_pair(module, H, K, n, alg.rep_dim(), seed)};
}

// n = 1, phi(a) = tr(a) on H = C^1, Phi(x) = the Hilbert-Schmidt vector of x
// in K = C^{d*d}. Realized by pi = left multiplication on M_d, S = vec(I).
inline CPPair trace_pair(Index d) {
    const CStarAlgebra alg = m_d(d);
    const HilbertModule module = HilbertModule::self(alg);
    CPWitness w;
    for (const auto& e : algebra_basis(alg)) w.pi.push_back(kron(identity(d), e.represent()));
    for (const auto& x : module_basis(module)) w.Pi.push_back(kron(identity(d), x.represent()));
    CMatrix s = CMatrix::Zero(d * d, 1);
    for (Index k = 0; k < d; ++k) s(k * d + k, 0) = 1.0;
    w.S.push_back(s);
    w.W.push_back(identity(d * d));
    return cp_pair_from_witness(module, FlagSpace::trivial(1), FlagSpace::trivial(d * d), std::move(w));
}

// Two copies of the identity pair on M_d (n = 1, H = K = C^{2d}): phi(a) =
// I_2 (x) a, Phi(x) = I_2 (x) x. The dilated module representation is two
// copies of an irreducible one.
inline CPPair two_copy_pair(Index d = 2) {
    const CStarAlgebra alg = m_d(d);
    const HilbertModule module = HilbertModule::self(alg);
    CPWitness w;
    for (const auto& e : algebra_basis(alg)) w.pi.push_back(kron(identity(2), e.represent()));
    for (const auto& x : module_basis(module)) w.Pi.push_back(kron(identity(2), x.represent()));
    w.S.push_back(identity(2 * d));
    w.W.push_back(identity(2 * d));
    const FlagSpace space = FlagSpace::trivial(2 * d);
    return cp_pair_from_witness(module, space, space, std::move(w));
}

// Gram matrix of the raw space (A (x) H)^n assembled straight from the map
// entries: G[(i,u,s),(j,v,t)] = phi_ij(e_u* e_v)[s,t].
inline CMatrix explicit_gram(const NPositiveMatrixMap& phi) {
    const auto basis = algebra_basis(phi.algebra());
    const Index n = phi.n();
    const Index d = static_cast<Index>(basis.size());
    const Index h = phi.space().dim();
    CMatrix g(n * d * h, n * d * h);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            for (Index u = 0; u < d; ++u)
                for (Index v = 0; v < d; ++v) {
                    const CMatrix block = phi.apply(i, j, element_product(element_adjoint(basis[u]), basis[v]));
                    g.block((i * d + u) * h, (j * d + v) * h, h, h) = block;
                }
    return g;
}

inline ::testing::AssertionResult near_max(const CMatrix& a, const CMatrix& b, double tol) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        return ::testing::AssertionFailure() << "shape " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
                                             << b.cols();
    const double d = max_abs(a - b);
    if (d <= tol) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << "max |a - b| = " << d << " > " << tol;
}

template <typename F>
ErrorCode error_code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::IoError;
}

}  // namespace cpdilate::testing
