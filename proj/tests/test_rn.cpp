// Equivalence, domination, commutants, deformations and derivatives.

#include <cmath>

#include "support.hpp"

namespace cpdilate {
namespace {

using testing::error_code_of;
using testing::family_sample;
using testing::m_d;
using testing::near_max;
using testing::Sample;
using testing::two_copy_pair;
using testing::two_level_sample;

struct Built {
    Sample sample;
    DilationData dil;
};

Built built(const Sample& s) { return {s, build_dilation(s.pair.phi, s.pair.Phi)}; }

CMatrix random_K_unitary(const Sample& s, Rng& rng) { return random_flag_unitary(s.K, rng); }

// ---------------------------------------------------------------------------
// equivalence

TEST(EquivalenceCheck, Examples) {
    const Sample s = family_sample(1);
    Rng rng(1);
    EXPECT_TRUE(equivalence_check(s.pair.Phi, s.pair.Phi));
    EXPECT_EQ(equivalence_residual(s.pair.Phi, s.pair.Phi), 0.0);
    EXPECT_TRUE(equivalence_check(s.pair.Phi, rotated(s.pair.Phi, random_K_unitary(s, rng))));
    EXPECT_FALSE(equivalence_check(s.pair.Phi, scaled(s.pair.Phi, 2.0)));
    const Sample other = two_level_sample(1, 3);
    EXPECT_EQ(error_code_of([&] { equivalence_check(s.pair.Phi, other.pair.Phi); }), ErrorCode::ShapeMismatch);
}

TEST(EquivalenceCheck, IsAnEquivalenceRelation) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Sample s = family_sample(seed);
        Rng rng(seed);
        const ModuleCPMatrix a = s.pair.Phi;
        const ModuleCPMatrix b = rotated(a, random_K_unitary(s, rng));
        const ModuleCPMatrix c = rotated(b, random_K_unitary(s, rng));
        const ModuleCPMatrix d = scaled(a, 1.5);
        EXPECT_TRUE(equivalence_check(a, a));
        EXPECT_EQ(equivalence_check(a, b), equivalence_check(b, a));
        EXPECT_EQ(equivalence_check(a, d), equivalence_check(d, a));
        EXPECT_TRUE(equivalence_check(a, b) && equivalence_check(b, c));
        EXPECT_TRUE(equivalence_check(a, c));
        EXPECT_FALSE(equivalence_check(c, d));
    }
}

TEST(EquivalenceCheck, MatchesUnitaryEquivalenceOfDilations) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Sample s = family_sample(seed);
        Rng rng(seed + 100);
        const DilationData da = build_dilation(s.pair.phi, s.pair.Phi);
        for (const ModuleCPMatrix& other : {rotated(s.pair.Phi, random_K_unitary(s, rng)), scaled(s.pair.Phi, 2.0)}) {
            const DilationData db = build_dilation(other.scalar_part(), other);
            const bool forms = equivalence_check(s.pair.Phi, other);
            const bool dilations = compare_dilations(da, db, {}, EquivalenceScope::Representation).equivalent;
            EXPECT_EQ(forms, dilations) << "seed " << seed;
        }
    }
}

// ---------------------------------------------------------------------------
// domination

TEST(Domination, Examples) {
    const Built b = built(family_sample(5));
    const ModuleCPMatrix& Phi = b.sample.pair.Phi;
    EXPECT_EQ(domination_check(Phi, Phi, 16).verdict, DominationVerdict::Certified);
    const Index r = b.dil.dim_H(), s = b.dil.dim_K();
    const ModuleCPMatrix half = deform(b.dil, 0.5 * identity(r), 0.5 * identity(s));
    EXPECT_EQ(domination_check(half, Phi, 16).verdict, DominationVerdict::Certified);
    const DominationResult twice = domination_check(scaled(Phi, 2.0), Phi, 16);
    EXPECT_EQ(twice.verdict, DominationVerdict::Refuted);
    EXPECT_LT(twice.min_sampled_eigenvalue, 0.0);
    EXPECT_EQ(to_string(DominationVerdict::Undecided), "UNDECIDED");
}

TEST(Domination, MutualImpliesEquivalent) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const Sample s = family_sample(seed);
        Rng rng(seed);
        const ModuleCPMatrix a = s.pair.Phi;
        const ModuleCPMatrix b = rotated(a, random_K_unitary(s, rng));
        const bool ab = domination_check(a, b, 8).verdict == DominationVerdict::Certified;
        const bool ba = domination_check(b, a, 8).verdict == DominationVerdict::Certified;
        EXPECT_TRUE(ab && ba);
        if (ab && ba) EXPECT_TRUE(equivalence_check(a, b));
        // The scaled copy dominates one way only.
        const ModuleCPMatrix c = scaled(a, 0.5);
        EXPECT_EQ(domination_check(c, a, 8).verdict, DominationVerdict::Certified);
        EXPECT_EQ(domination_check(a, c, 8).verdict, DominationVerdict::Refuted);
    }
}

// ---------------------------------------------------------------------------
// commutant

TEST(Commutant, IrreducibleFixtureIsScalar) {
    const CPPair p = identity_cp_pair(m_d(2));
    const DilationData d = build_dilation(p.phi, p.Phi);
    const auto basis = commutant_basis(d);
    ASSERT_EQ(basis.size(), 1u);
    // Proportional to (I, I).
    const Complex c = basis[0].T(0, 0);
    EXPECT_TRUE(near_max(basis[0].T, c * identity(2), 1e-12));
    EXPECT_TRUE(near_max(basis[0].N, c * identity(2), 1e-12));
}

TEST(Commutant, TwoCopyFixtureHasDimensionFour) {
    const CPPair p = two_copy_pair();
    const DilationData d = build_dilation(p.phi, p.Phi);
    const auto basis = commutant_basis(d);
    EXPECT_EQ(basis.size(), 4u);
    EXPECT_LE(commutant_closure_residual(basis), 1e-8);
}

TEST(Commutant, ZeroDilationHasEmptyBasis) {
    const CStarAlgebra alg = m_d(2);
    const HilbertModule m = HilbertModule::self(alg);
    const FlagSpace H({2}), K({2});
    std::vector<CMatrix> maps(1, CMatrix::Zero(4, 4));
    const ModuleCPMatrix zero(m, H, K, maps, NPositiveMatrixMap::zero(1, alg, H));
    const DilationData d = build_dilation(zero.scalar_part(), zero);
    EXPECT_TRUE(commutant_basis(d).empty());
}

TEST(Commutant, BasisProperties) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Built b = built(family_sample(seed));
        const auto basis = commutant_basis(b.dil);
        ASSERT_FALSE(basis.empty());
        EXPECT_LE(commutant_closure_residual(basis), 1e-8) << "seed " << seed;
        for (std::size_t p = 0; p < basis.size(); ++p) {
            EXPECT_LE(commutant_residual(b.dil, basis[p].T, basis[p].N), 1e-8);
            EXPECT_LE(algebra_commutation_residual(b.dil, basis[p].T), 1e-8);
            for (std::size_t q = 0; q < basis.size(); ++q) {
                const Complex ip = basis[p].T.cwiseProduct(basis[q].T.conjugate()).sum() +
                                   basis[p].N.cwiseProduct(basis[q].N.conjugate()).sum();
                EXPECT_NEAR(std::abs(ip), p == q ? 1.0 : 0.0, 1e-10);
            }
        }
    }
}

TEST(Commutant, NDeterminedByT) {
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const Built b = built(family_sample(seed));
        if (!nondegeneracy_check(b.dil)) continue;
        ++checked;
        const auto basis = commutant_basis(b.dil);
        Rng rng(seed);
        for (int trial = 0; trial < 5; ++trial) {
            const CommutantElement z = random_commutant_element(basis, rng);
            EXPECT_TRUE(near_max(complete_from_T(b.dil, z.T), z.N, 1e-8)) << "seed " << seed;
        }
    }
    EXPECT_GT(checked, 0);
}

TEST(Commutant, RandomElementsAreOrderedContractions) {
    const Built b = built(two_level_sample(3));
    const auto basis = commutant_basis(b.dil);
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const CommutantElement z = random_commutant_element(basis, rng);
        EXPECT_LE(commutant_residual(b.dil, z.T, z.N), 1e-8);
        EXPECT_LE(hermiticity_residual(z.T), 1e-14);
        EXPECT_LE(hermiticity_residual(z.N), 1e-14);
        const CMatrix joint = block_diag(std::vector<CMatrix>{z.T, z.N});
        EXPECT_GE(min_eigenvalue(joint), -1e-12);
        EXPECT_LE(max_eigenvalue(joint), 1.0 + 1e-12);
    }
}

// ---------------------------------------------------------------------------
// deformations

TEST(Deform, ScalarExamples) {
    const Built b = built(family_sample(6));
    const ModuleCPMatrix& Phi = b.sample.pair.Phi;
    const Index r = b.dil.dim_H(), s = b.dil.dim_K();
    const ModuleCPMatrix same = deform(b.dil, identity(r), identity(s));
    for (std::size_t k = 0; k < Phi.maps().size(); ++k) {
        EXPECT_TRUE(near_max(same.maps()[k], Phi.maps()[k], 1e-10));
        EXPECT_TRUE(near_max(same.scalar_part().maps()[k], Phi.scalar_part().maps()[k], 1e-10));
    }
    const ModuleCPMatrix zero = deform(b.dil, CMatrix::Zero(r, r), CMatrix::Zero(s, s));
    for (const auto& m : zero.maps()) EXPECT_EQ(max_abs(m), 0.0);
    for (const auto& m : zero.scalar_part().maps()) EXPECT_EQ(max_abs(m), 0.0);

    const double c = 0.6;
    const ModuleCPMatrix shrunk = deform(b.dil, c * c * identity(r), c * c * identity(s));
    for (std::size_t k = 0; k < Phi.maps().size(); ++k)
        EXPECT_TRUE(near_max(shrunk.maps()[k], c * c * Phi.maps()[k], 1e-10));
    EXPECT_LE(compatibility_residual(shrunk), 1e-10);
}

TEST(Deform, OutputIsCompatibleAndCp) {
    const Built b = built(two_level_sample(4));
    const auto basis = commutant_basis(b.dil);
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const CommutantElement z = random_commutant_element(basis, rng);
        const ModuleCPMatrix psi = deform(b.dil, z.T, z.N);
        EXPECT_LE(compatibility_residual(psi), 1e-10);
        EXPECT_TRUE(cp_check(psi.scalar_part()));
    }
}

TEST(Deform, Errors) {
    const Built b = built(family_sample(8));
    const Index r = b.dil.dim_H(), s = b.dil.dim_K();
    Rng rng(8);
    EXPECT_EQ(error_code_of([&] { deform(b.dil, random_psd(r, rng), random_psd(s, rng)); }),
              ErrorCode::NotInCommutant);
    EXPECT_EQ(error_code_of([&] { deform(b.dil, -identity(r), -identity(s)); }), ErrorCode::NotPsd);
}

// ---------------------------------------------------------------------------
// derivatives

TEST(RnDerivative, SelfDerivativeIsIdentity) {
    const Built b = built(family_sample(9));
    const RNDerivative d = rn_derivative(b.dil, b.sample.pair.Phi);
    EXPECT_TRUE(near_max(d.Delta1, identity(b.dil.dim_H()), 1e-8));
    EXPECT_TRUE(near_max(d.Delta2, identity(b.dil.dim_K()), 1e-8));
}

TEST(RnDerivative, ScalarMultiple) {
    const Built b = built(two_level_sample(5));
    const double c2 = 0.36;
    const Index r = b.dil.dim_H(), s = b.dil.dim_K();
    const ModuleCPMatrix psi = derivative_inverse(b.dil, c2 * identity(r), c2 * identity(s));
    const RNDerivative d = rn_derivative(b.dil, psi);
    EXPECT_TRUE(near_max(d.Delta1, c2 * identity(r), 1e-8));
    EXPECT_TRUE(near_max(d.Delta2, c2 * identity(s), 1e-8));
}

TEST(RnDerivative, RoundTripOnRandomCommutantElements) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Built b = built(two_level_sample(seed, 2 + static_cast<Index>(seed % 2)));
        const auto basis = commutant_basis(b.dil);
        Rng rng(seed);
        for (int trial = 0; trial < 3; ++trial) {
            const CommutantElement z = random_commutant_element(basis, rng);
            const ModuleCPMatrix psi = derivative_inverse(b.dil, z.T, z.N);
            const RNDerivative d = rn_derivative(b.dil, psi);
            EXPECT_TRUE(near_max(d.Delta1, z.T, 1e-7)) << "seed " << seed;
            EXPECT_TRUE(near_max(d.Delta2, z.N, 1e-7)) << "seed " << seed;
            EXPECT_LE(d.commutant_residual, 1e-8);
            EXPECT_GE(d.spectrum_min, -1e-9);
            EXPECT_LE(d.spectrum_max, 1.0 + 1e-9);
            EXPECT_LE(d.equivalence_residual, 1e-7);
            EXPECT_TRUE(equivalence_check(derivative_inverse(b.dil, d.Delta1, d.Delta2), psi));
            // Delta_2 pi(x) = pi(x) Delta_1 on the module basis.
            for (const auto& p : b.dil.pi_Phi) EXPECT_LE(max_abs(d.Delta2 * p - p * d.Delta1), 1e-8);
        }
    }
}

TEST(RnDerivative, RequiresDomination) {
    const Built b = built(family_sample(10));
    EXPECT_EQ(error_code_of([&] { rn_derivative(b.dil, scaled(b.sample.pair.Phi, 2.0)); }),
              ErrorCode::NotDominated);
}

// ---------------------------------------------------------------------------
// order isomorphism

TEST(OrderIso, Endpoints) {
    const Built b = built(two_level_sample(0));
    const Index r = b.dil.dim_H(), s = b.dil.dim_K();
    const ModuleCPMatrix full = derivative_inverse(b.dil, identity(r), identity(s));
    const RNDerivative d = rn_derivative(b.dil, full);
    EXPECT_TRUE(near_max(d.Delta1, identity(r), 1e-8));
    const ModuleCPMatrix none = derivative_inverse(b.dil, CMatrix::Zero(r, r), CMatrix::Zero(s, s));
    EXPECT_NE(domination_check(none, full, 16).verdict, DominationVerdict::Refuted);
    const ModuleCPMatrix half = deform(b.dil, 0.5 * identity(r), 0.5 * identity(s));
    EXPECT_EQ(domination_check(half, b.sample.pair.Phi, 16).verdict, DominationVerdict::Certified);
}

TEST(OrderIso, RoundTripReport) {
    const Built b = built(two_level_sample(0));
    const IsoReport rep = order_iso_roundtrip(b.dil, 10, 0);
    EXPECT_EQ(rep.trials, 10);
    EXPECT_EQ(static_cast<Index>(rep.records.size()), 10);
    EXPECT_LE(rep.max_roundtrip_T, 1e-7);
    EXPECT_LE(rep.max_roundtrip_N, 1e-7);
    EXPECT_LE(rep.max_commutant_residual, 1e-8);
    EXPECT_LE(rep.max_equivalence_residual, 1e-7);
    EXPECT_GE(rep.min_spectrum, -1e-9);
    EXPECT_LE(rep.max_spectrum, 1.0 + 1e-9);
    EXPECT_EQ(rep.refuted, 0);
    EXPECT_EQ(rep.certified + rep.undecided + rep.refuted, 10);

    const IsoReport again = order_iso_roundtrip(b.dil, 10, 0);
    for (std::size_t t = 0; t < rep.records.size(); ++t) {
        EXPECT_TRUE(rep.records[t].z2.T == again.records[t].z2.T);
        EXPECT_TRUE(rep.records[t].Delta1 == again.records[t].Delta1);
    }
}

TEST(OrderIso, NeedsMinimalDilation) {
    Built b = built(two_level_sample(1));
    for (auto& x : b.dil.S) x.conservativeResizeLike(CMatrix::Zero(x.rows() + 1, x.cols()));
    for (auto& p : b.dil.pi_phi) p.conservativeResizeLike(CMatrix::Zero(p.rows() + 1, p.cols() + 1));
    for (auto& x : b.dil.pi_Phi) x.conservativeResizeLike(CMatrix::Zero(x.rows(), x.cols() + 1));
    EXPECT_EQ(error_code_of([&] { order_iso_roundtrip(b.dil, 1, 0); }), ErrorCode::NotMinimal);
}

}  // namespace
}  // namespace cpdilate
