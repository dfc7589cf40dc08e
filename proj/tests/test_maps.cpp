// Matrices of maps, the Choi oracle, and the dilation construction.

#include <cmath>

#include "support.hpp"

namespace cpdilate {
namespace {

using testing::error_code_of;
using testing::explicit_gram;
using testing::family_sample;
using testing::m1_m2;
using testing::m_d;
using testing::near_max;
using testing::Sample;
using testing::trace_pair;
using testing::two_copy_pair;

double sorted_eigen_gap(const CMatrix& m, const std::vector<double>& expected) {
    const RVector v = herm_eig(m).values;
    double gap = 0.0;
    for (std::size_t k = 0; k < expected.size(); ++k) gap = std::max(gap, std::abs(v(static_cast<Index>(k)) - expected[k]));
    return gap;
}

ModuleCPMatrix zero_Phi(const HilbertModule& m, const FlagSpace& H, const FlagSpace& K, Index n) {
    std::vector<CMatrix> maps(n * n, CMatrix::Zero(K.dim() * H.dim(), m.dim()));
    return {m, H, K, maps, NPositiveMatrixMap::zero(n, m.algebra(), H)};
}

// The minimal dilation read off the generating witness: compress pi to the span
// of pi(a) S_i xi and Pi to the span of Pi(x) S_i xi. Shares no code with the
// Gram-quotient construction.
DilationData dilation_from_witness(const Sample& s) {
    const CPWitness& w = s.pair.witness;
    const Index h = s.H.dim();
    const Index k = s.K.dim();
    CMatrix hgen(w.pi.front().rows(), 0), kgen(w.Pi.front().rows(), 0);
    for (Index i = 0; i < s.n; ++i) {
        for (const auto& p : w.pi) {
            hgen.conservativeResize(Eigen::NoChange, hgen.cols() + h);
            hgen.rightCols(h) = p * w.S[i];
        }
        for (const auto& p : w.Pi) {
            kgen.conservativeResize(Eigen::NoChange, kgen.cols() + h);
            kgen.rightCols(h) = p * w.S[i];
        }
    }
    const CMatrix V = range_basis(hgen);
    const CMatrix U = range_basis(kgen);
    DilationData d;
    d.n = s.n;
    d.module = s.module;
    d.source = s.H;
    d.target = s.K;
    d.origin = s.pair.Phi;
    for (const auto& p : w.pi) d.pi_phi.push_back(V.adjoint() * p * V);
    for (const auto& p : w.Pi) d.pi_Phi.push_back(U.adjoint() * p * V);
    d.K_embedding = CMatrix::Zero(s.n * k, U.cols());
    for (Index i = 0; i < s.n; ++i) {
        d.S.push_back(V.adjoint() * w.S[i]);
        d.W.push_back(U.adjoint() * w.W[i]);
        d.K_embedding.middleRows(i * k, k) = d.W.back().adjoint();
        d.K_components.push_back(range_basis(d.W.back().adjoint()));
    }
    return d;
}

// ---------------------------------------------------------------------------
// cpmatrix

TEST(MatrixMap, EvaluateExamples) {
    const CPPair id = identity_cp_pair(m_d(2));
    const AlgElement e11 = AlgElement::matrix_unit(m_d(2), 0, 0, 0);
    EXPECT_TRUE(near_max(evaluate_phi(id.phi, 0, 0, e11).matrix(), e11.represent(), 0.0));

    const NPositiveMatrixMap zero = NPositiveMatrixMap::zero(2, m1_m2(), FlagSpace({1, 2}));
    Rng rng(1);
    const AlgElement a = random_element(m1_m2(), rng);
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) EXPECT_EQ(max_abs(zero.apply(i, j, a)), 0.0);

    EXPECT_EQ(error_code_of([&] { evaluate_phi(id.phi, 1, 0, e11); }), ErrorCode::IndexOutOfRange);
    EXPECT_EQ(error_code_of([&] { evaluate_phi(id.phi, 0, 0, AlgElement::unit(m_d(3))); }),
              ErrorCode::AlgebraMismatch);
}

TEST(MatrixMap, TensorContractionFixture) {
    // phi_ij(a) = S_i* (a (x) I_2) S_j against a direct contraction.
    const CStarAlgebra alg = m_d(2);
    const HilbertModule module = HilbertModule::self(alg);
    Rng rng(2);
    CPWitness w;
    for (const auto& e : algebra_basis(alg)) w.pi.push_back(kron(e.represent(), identity(2)));
    for (const auto& x : module_basis(module)) w.Pi.push_back(kron(x.represent(), identity(2)));
    for (int i = 0; i < 2; ++i) {
        w.S.push_back(random_complex(4, 3, rng));
        w.W.push_back(identity(4) / std::sqrt(2.0));
    }
    const CPWitness copy = w;
    const CPPair p = cp_pair_from_witness(module, FlagSpace::trivial(3), FlagSpace::trivial(4), std::move(w));
    for (int trial = 0; trial < 5; ++trial) {
        const AlgElement a = random_element(alg, rng);
        const CMatrix& am = a.block(0);
        for (Index i = 0; i < 2; ++i)
            for (Index j = 0; j < 2; ++j) {
                CMatrix direct = CMatrix::Zero(3, 3);
                for (Index s = 0; s < 3; ++s)
                    for (Index t = 0; t < 3; ++t)
                        for (Index r = 0; r < 2; ++r)
                            for (Index c = 0; c < 2; ++c)
                                for (Index q = 0; q < 2; ++q)
                                    direct(s, t) += std::conj(copy.S[i](r * 2 + q, s)) * am(r, c) * copy.S[j](c * 2 + q, t);
                EXPECT_TRUE(near_max(p.phi.apply(i, j, a), direct, 1e-12));
            }
    }
    EXPECT_LE(compatibility_residual(p.Phi), 1e-12);
}

TEST(Choi, IdentityIsMaximallyEntangledProjector) {
    const CMatrix choi = choi_matrix(identity_cp_pair(m_d(2)).phi);
    ASSERT_EQ(choi.rows(), 4);
    CMatrix omega = CMatrix::Zero(4, 4);
    for (Index p : {0, 3})
        for (Index q : {0, 3}) omega(p, q) = 1.0;
    EXPECT_TRUE(near_max(choi, omega, 0.0));
    EXPECT_LE(sorted_eigen_gap(choi, {2, 0, 0, 0}), 1e-14);
}

TEST(Choi, TransposeIsTheSwap) {
    const CMatrix choi = choi_matrix(transpose_map(m_d(2)));
    EXPECT_LE(sorted_eigen_gap(choi, {1, 1, 1, -1}), 1e-14);
    const CpReport r = cp_report(transpose_map(m_d(2)));
    EXPECT_FALSE(r.completely_positive);
    EXPECT_NEAR(r.min_eigenvalue, -1.0, 1e-14);
    EXPECT_FALSE(cp_check(transpose_map(m_d(3))));
}

TEST(Choi, DilationBuiltMapsArePositive) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Sample s = family_sample(seed);
        const CpReport r = cp_report(s.pair.phi);
        EXPECT_TRUE(r.completely_positive) << "seed " << seed;
        EXPECT_GE(r.min_eigenvalue, -1e-10) << "seed " << seed;
        EXPECT_LE(hermiticity_pairing_residual(s.pair.phi), 1e-12);
        EXPECT_TRUE(phi_flag_compatible(s.pair.phi));
        EXPECT_TRUE(Phi_flag_compatible(s.pair.Phi));
        for (Index i = 0; i < s.n; ++i) EXPECT_TRUE(cp_check(diagonal_entry(s.pair.phi, i))) << "seed " << seed;
    }
}

TEST(Choi, ConvexCombinationStaysPositive) {
    const Sample a = family_sample(4);
    const CPPair b = random_cp_pair(a.module, a.H, a.K, a.n, a.mult * a.module.algebra().rep_dim(), 99);
    EXPECT_TRUE(cp_check(linear_combination(0.3, a.pair.phi, 0.7, b.phi)));
    // A large negative multiple is not.
    EXPECT_FALSE(cp_check(linear_combination(1.0, a.pair.phi, -3.0, b.phi)));
}

TEST(MatrixMap, Linearity) {
    const Sample s = family_sample(7);
    const CStarAlgebra& alg = s.module.algebra();
    Rng rng(3);
    const Complex lambda(0.7, -1.3);
    for (int trial = 0; trial < 10; ++trial) {
        const AlgElement a = random_element(alg, rng);
        const AlgElement b = random_element(alg, rng);
        for (Index i = 0; i < s.n; ++i)
            for (Index j = 0; j < s.n; ++j)
                EXPECT_TRUE(near_max(s.pair.phi.apply(i, j, a + lambda * b),
                                     s.pair.phi.apply(i, j, a) + lambda * s.pair.phi.apply(i, j, b), 1e-12));
    }
}

TEST(Compatibility, Examples) {
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        EXPECT_LE(compatibility_residual(family_sample(seed).pair.Phi), 1e-10);

    const Sample s = family_sample(2);
    std::vector<CMatrix> maps = s.pair.Phi.maps();
    maps[0] *= 2.0;
    const ModuleCPMatrix bad(s.module, s.H, s.K, maps, s.pair.phi);
    EXPECT_GT(compatibility_residual(bad), 0.1);

    EXPECT_EQ(compatibility_residual(zero_Phi(s.module, s.H, s.K, 2)), 0.0);
}

TEST(RandomPair, SeedZeroSelfModule) {
    const CStarAlgebra alg = m_d(2);
    const CPPair p =
        random_cp_pair(HilbertModule::self(alg), FlagSpace::trivial(2), FlagSpace::trivial(2), 2, 2 * alg.rep_dim(), 0);
    EXPECT_TRUE(cp_check(p.phi));
    EXPECT_LE(compatibility_residual(p.Phi), 1e-10);
}

TEST(RandomPair, CanonicalInstance) {
    const CStarAlgebra alg = m_d(2);
    const CPPair p = identity_cp_pair(alg);
    Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        const AlgElement a = random_element(alg, rng);
        EXPECT_TRUE(near_max(p.phi.apply(0, 0, a), a.represent(), 1e-15));
        const ModuleElement x = random_module_element(p.Phi.module(), rng);
        EXPECT_TRUE(near_max(p.Phi.apply(0, 0, x), x.represent(), 1e-15));
    }
}

TEST(RandomPair, Deterministic) {
    const Sample a = family_sample(11);
    const Sample b = family_sample(11);
    ASSERT_EQ(a.pair.phi.maps().size(), b.pair.phi.maps().size());
    for (std::size_t k = 0; k < a.pair.phi.maps().size(); ++k) {
        EXPECT_TRUE(a.pair.phi.maps()[k] == b.pair.phi.maps()[k]);
        EXPECT_TRUE(a.pair.Phi.maps()[k] == b.pair.Phi.maps()[k]);
    }
}

TEST(RandomPair, BadMultiplicity) {
    const CStarAlgebra alg = m_d(2);
    const HilbertModule m = HilbertModule::self(alg);
    EXPECT_EQ(error_code_of([&] { random_cp_pair(m, FlagSpace({2}), FlagSpace({2}), 1, 3, 0); }),
              ErrorCode::BadMultiplicity);
    // Multiplicity 2 needs 4 rows of K per level; n = 1 with K = C^2 cannot hold them.
    EXPECT_EQ(error_code_of([&] { random_cp_pair(m, FlagSpace({2}), FlagSpace({2}), 1, 4, 0); }),
              ErrorCode::BadMultiplicity);
}

// ---------------------------------------------------------------------------
// ksgns

TEST(Dilation, IdentityMapDimension) {
    const CPPair p = identity_cp_pair(m_d(2));
    const CMatrix gram = explicit_gram(p.phi);
    ASSERT_EQ(gram.rows(), 8);
    EXPECT_EQ(numerical_rank(gram), 2);
    const DilationData d = build_dilation(p.phi, p.Phi);
    EXPECT_EQ(d.dim_H(), 2);
    EXPECT_EQ(d.dim_K(), 2);
}

TEST(Dilation, TraceDimension) {
    const CPPair p = trace_pair(2);
    EXPECT_LE(compatibility_residual(p.Phi), 1e-14);
    Rng rng(5);
    const AlgElement a = random_element(m_d(2), rng);
    EXPECT_NEAR(std::abs(p.phi.apply(0, 0, a)(0, 0) - a.block(0).trace()), 0.0, 1e-14);
    const CMatrix gram = explicit_gram(p.phi);
    ASSERT_EQ(gram.rows(), 4);
    EXPECT_EQ(numerical_rank(gram), 4);
    EXPECT_EQ(build_dilation(p.phi, p.Phi).dim_H(), 4);
}

TEST(Dilation, ZeroInstance) {
    const CStarAlgebra alg = m_d(2);
    const HilbertModule m = HilbertModule::self(alg);
    const FlagSpace H({2}), K({3});
    const ModuleCPMatrix Phi = zero_Phi(m, H, K, 2);
    const DilationData d = build_dilation(Phi.scalar_part(), Phi);
    EXPECT_EQ(d.dim_H(), 0);
    EXPECT_EQ(d.dim_K(), 0);
    for (const auto& s : d.S) EXPECT_EQ(s.size(), 0);
    for (const auto& p : d.pi_Phi) EXPECT_EQ(p.size(), 0);
    const ReconstructionResidual r = reconstruction_residual(d, Phi.scalar_part(), Phi);
    EXPECT_EQ(r.res1, 0.0);
    EXPECT_EQ(r.res2, 0.0);
    EXPECT_TRUE(minimality_check(d));
}

TEST(Dilation, Errors) {
    const CStarAlgebra alg = m_d(2);
    const NPositiveMatrixMap t = transpose_map(alg);
    const HilbertModule m = HilbertModule::self(alg);
    std::vector<CMatrix> maps(1, CMatrix::Zero(4, 4));
    const ModuleCPMatrix Phi(m, t.space(), t.space(), maps, t);
    EXPECT_EQ(error_code_of([&] { build_dilation(t, Phi); }), ErrorCode::NotCp);

    const Sample s = family_sample(3);
    std::vector<CMatrix> doubled = s.pair.Phi.maps();
    for (auto& e : doubled) e *= 2.0;
    const ModuleCPMatrix bad(s.module, s.H, s.K, doubled, s.pair.phi);
    EXPECT_EQ(error_code_of([&] { build_dilation(s.pair.phi, bad); }), ErrorCode::CompatFail);

    const Sample other = family_sample(3);
    const NPositiveMatrixMap wrong_n = NPositiveMatrixMap::zero(s.n + 1, s.module.algebra(), s.H);
    EXPECT_EQ(error_code_of([&] { build_dilation(wrong_n, other.pair.Phi); }), ErrorCode::ShapeMismatch);
}

TEST(Dilation, RoundTripOnFamily) {
    for (std::uint64_t seed = 100; seed < 140; ++seed) {
        const Sample s = family_sample(seed);
        const DilationData d = build_dilation(s.pair.phi, s.pair.Phi);
        const ReconstructionResidual r = reconstruction_residual(d, s.pair.phi, s.pair.Phi);
        EXPECT_LE(r.res1, 1e-8) << "seed " << seed;
        EXPECT_LE(r.res2, 1e-8) << "seed " << seed;
        const RepresentationResidual rep = representation_residual(d);
        EXPECT_LE(rep.multiplicative, 1e-8) << "seed " << seed;
        EXPECT_LE(rep.adjoint, 1e-8) << "seed " << seed;
        EXPECT_LE(rep.unital, 1e-8) << "seed " << seed;
        EXPECT_LE(rep.module_form, 1e-8) << "seed " << seed;
        EXPECT_LE(rep.right_action, 1e-8) << "seed " << seed;
        EXPECT_LE(rep.w_partition, 1e-8) << "seed " << seed;
        EXPECT_LE(rep.w_components, 1e-8) << "seed " << seed;
        EXPECT_TRUE(minimality_check(d)) << "seed " << seed;

        // dim H^Phi <= n dim(A) dim(H), with equality iff the Gram form is nondegenerate.
        const CMatrix gram = explicit_gram(s.pair.phi);
        const Index bound = s.n * s.module.algebra().dim() * s.H.dim();
        EXPECT_LE(d.dim_H(), bound);
        EXPECT_EQ(d.dim_H(), numerical_rank(gram));
        EXPECT_EQ(d.dim_H() == bound, numerical_rank(gram) == gram.rows());
    }
}

TEST(Dilation, CorruptedS) {
    const Sample s = family_sample(21);
    DilationData d = build_dilation(s.pair.phi, s.pair.Phi);
    d.S[0].setZero();
    const double res1 = reconstruction_residual(d, s.pair.phi, s.pair.Phi).res1;
    // With S_1 = 0 the (1,1) identity reads phi_11(e_u) = 0.
    double floor = 0.0;
    for (const auto& e : algebra_basis(s.module.algebra())) floor = std::max(floor, max_abs(s.pair.phi.apply(0, 0, e)));
    EXPECT_GE(res1, floor);
}

TEST(Dilation, PaddedIsNotMinimal) {
    const Sample s = family_sample(22);
    DilationData d = build_dilation(s.pair.phi, s.pair.Phi);
    const Index r = d.dim_H();
    for (auto& p : d.pi_phi) {
        CMatrix q = CMatrix::Zero(r + 1, r + 1);
        q.topLeftCorner(r, r) = p;
        p = q;
    }
    for (auto& x : d.S) x.conservativeResizeLike(CMatrix::Zero(r + 1, x.cols()));
    for (auto& x : d.pi_Phi) x.conservativeResizeLike(CMatrix::Zero(x.rows(), r + 1));
    const MinimalityReport rep = minimality_report(d);
    EXPECT_EQ(d.dim_H(), r + 1);
    EXPECT_EQ(rep.h_span_rank, r);
    EXPECT_FALSE(rep.minimal);
}

TEST(Equivalence, SelfWitnessIsIdentity) {
    const Sample s = family_sample(30);
    const DilationData d = build_dilation(s.pair.phi, s.pair.Phi);
    const EquivalenceWitness w = unitary_equivalence(d, d);
    EXPECT_TRUE(near_max(w.U1, identity(d.dim_H()), 1e-10));
    EXPECT_TRUE(near_max(w.U2, identity(d.dim_K()), 1e-10));
    EXPECT_LE(std::max({w.s_intertwining, w.pi_phi_intertwining, w.pi_Phi_intertwining, w.w_intertwining}), 1e-10);
}

TEST(Equivalence, RecoversConjugatingUnitaries) {
    for (std::uint64_t seed = 40; seed < 50; ++seed) {
        const Sample s = family_sample(seed);
        const DilationData d = build_dilation(s.pair.phi, s.pair.Phi);
        Rng rng(seed);
        const CMatrix U1 = random_unitary(d.dim_H(), rng);
        const CMatrix U2 = random_unitary(d.dim_K(), rng);
        const EquivalenceWitness w = unitary_equivalence(d, conjugate_dilation(d, U1, U2));
        EXPECT_TRUE(near_max(w.U1, U1, 1e-8)) << "seed " << seed;
        EXPECT_TRUE(near_max(w.U2, U2, 1e-8)) << "seed " << seed;
        EXPECT_LE(std::max({w.u1_unitarity, w.u2_unitarity, w.s_intertwining, w.pi_phi_intertwining,
                            w.pi_Phi_intertwining, w.w_intertwining}),
                  1e-8);
    }
}

TEST(Equivalence, ScaledIsNotEquivalent) {
    const Sample s = family_sample(31);
    const DilationData d = build_dilation(s.pair.phi, s.pair.Phi);
    const ModuleCPMatrix twice = scaled(s.pair.Phi, 2.0);
    const DilationData d2 = build_dilation(twice.scalar_part(), twice);
    EXPECT_EQ(error_code_of([&] { unitary_equivalence(d, d2); }), ErrorCode::NotEquivalent);
    EXPECT_FALSE(compare_dilations(d, d2).equivalent);
}

TEST(Equivalence, IndependentMinimalDilationsAgree) {
    // The witness-compressed dilation and the Gram-quotient dilation of the same pair.
    for (std::uint64_t seed = 60; seed < 80; ++seed) {
        const Sample s = family_sample(seed);
        const DilationData a = build_dilation(s.pair.phi, s.pair.Phi);
        const DilationData b = dilation_from_witness(s);
        ASSERT_LE(reconstruction_residual(b, s.pair.phi, s.pair.Phi).res2, 1e-10);
        ASSERT_TRUE(minimality_check(b)) << "seed " << seed;
        const EquivalenceWitness w = unitary_equivalence(a, b);
        EXPECT_LE(std::max({w.u1_unitarity, w.u2_unitarity, w.s_intertwining, w.pi_phi_intertwining,
                            w.pi_Phi_intertwining, w.w_intertwining}),
                  1e-7)
            << "seed " << seed;
    }
}

TEST(Equivalence, NotMinimal) {
    const Sample s = family_sample(32);
    const DilationData d = build_dilation(s.pair.phi, s.pair.Phi);
    DilationData padded = d;
    for (auto& x : padded.S) x.conservativeResizeLike(CMatrix::Zero(x.rows() + 1, x.cols()));
    for (auto& p : padded.pi_phi) p.conservativeResizeLike(CMatrix::Zero(p.rows() + 1, p.cols() + 1));
    for (auto& x : padded.pi_Phi) x.conservativeResizeLike(CMatrix::Zero(x.rows(), x.cols() + 1));
    EXPECT_EQ(error_code_of([&] { unitary_equivalence(d, padded); }), ErrorCode::NotMinimal);
}

TEST(Dilation, TwoCopyFixture) {
    const CPPair p = two_copy_pair();
    const DilationData d = build_dilation(p.phi, p.Phi);
    EXPECT_EQ(d.dim_H(), 4);
    EXPECT_EQ(d.dim_K(), 4);
    EXPECT_TRUE(nondegeneracy_check(d));
}

}  // namespace
}  // namespace cpdilate
