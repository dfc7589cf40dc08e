#pragma once

// Order structure on [phi]-completely positive matrices: equivalence,
// domination, the commutant of pi^Phi, deformations by commutant elements,
// Radon-Nikodym derivatives and the order isomorphism onto [0, I].
//
// Convention: Sub <= Sup means <Sub(x),Sub(x)> <= <Sup(x),Sup(x)> for all x.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cpdilate/ksgns.hpp"

namespace cpdilate {

/// max over module basis pairs of |[A](x)*[A](y) - [B](x)*[B](y)|.
inline double equivalence_residual(const ModuleCPMatrix& a, const ModuleCPMatrix& b) {
    if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, "equivalence of differently shaped matrices");
    const auto basis = module_basis(a.module());
    std::vector<CMatrix> ba, bb;
    for (const auto& x : basis) {
        ba.push_back(a.apply_all(x));
        bb.push_back(b.apply_all(x));
    }
    double r = 0.0;
    for (std::size_t p = 0; p < basis.size(); ++p)
        for (std::size_t q = 0; q < basis.size(); ++q)
            r = std::max(r, max_abs(ba[p].adjoint() * ba[q] - bb[p].adjoint() * bb[q]));
    return r;
}

inline bool equivalence_check(const ModuleCPMatrix& a, const ModuleCPMatrix& b, const Tolerances& tol = {}) {
    return equivalence_residual(a, b) <= tol.residual_tol;
}

enum class DominationVerdict { Certified, Refuted, Undecided };

inline std::string to_string(DominationVerdict v) {
    switch (v) {
        case DominationVerdict::Certified: return "CERTIFIED";
        case DominationVerdict::Refuted: return "REFUTED";
        case DominationVerdict::Undecided: return "UNDECIDED";
    }
    return "UNDECIDED";
}

struct DominationResult {
    DominationVerdict verdict = DominationVerdict::Undecided;
    double min_sampled_eigenvalue = 0.0;  // over sampled (phi_sup - phi_sub)(<x,x>)
    double difference_choi_min = 0.0;     // min Choi eigenvalue of phi_sup - phi_sub
    Index samples = 0;
};

inline DominationResult domination_check(const ModuleCPMatrix& sub, const ModuleCPMatrix& sup, Index samples,
                                         const Tolerances& tol = {}, std::uint64_t seed = 0) {
    if (!sub.same_shape(sup)) throw Error(ErrorCode::ShapeMismatch, "domination of differently shaped matrices");
    DominationResult out;
    out.samples = samples;
    const NPositiveMatrixMap diff = linear_combination(1.0, sup.scalar_part(), -1.0, sub.scalar_part());
    Rng rng(seed);
    double lo = 0.0;
    for (Index k = 0; k < samples; ++k) {
        const ModuleElement x = random_module_element(sub.module(), rng);
        const CMatrix block = diff.apply_all(module_inner_product(x, x));
        lo = std::min(lo, min_eigenvalue(0.5 * (block + block.adjoint()), tol));
    }
    out.min_sampled_eigenvalue = lo;
    const CpReport cp = cp_report(diff, tol);
    out.difference_choi_min = cp.min_eigenvalue;
    if (lo < -tol.psd_tol) {
        out.verdict = DominationVerdict::Refuted;
    } else if (cp.completely_positive) {
        out.verdict = DominationVerdict::Certified;
    } else {
        out.verdict = DominationVerdict::Undecided;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commutant of pi^Phi

struct CommutantElement {
    CMatrix T;  // on H^Phi
    CMatrix N;  // on K^Phi
};

/// max over the module basis of |pi(x)T - N pi(x)| and |pi(x)* N - T pi(x)*|.
inline double commutant_residual(const DilationData& dil, const CMatrix& T, const CMatrix& N) {
    if (T.rows() != dil.dim_H() || T.cols() != dil.dim_H() || N.rows() != dil.dim_K() ||
        N.cols() != dil.dim_K()) {
        throw Error(ErrorCode::DimensionMismatch, "commutant element shape");
    }
    double r = 0.0;
    for (const auto& p : dil.pi_Phi) {
        r = std::max(r, max_abs(p * T - N * p));
        r = std::max(r, max_abs(p.adjoint() * N - T * p.adjoint()));
    }
    return r;
}

/// max over the algebra basis of |T pi^phi(a) - pi^phi(a) T|.
inline double algebra_commutation_residual(const DilationData& dil, const CMatrix& T) {
    double r = 0.0;
    for (const auto& p : dil.pi_phi) r = std::max(r, max_abs(T * p - p * T));
    return r;
}

namespace detail {

inline CVector stack(const CommutantElement& e) {
    CVector z(e.T.size() + e.N.size());
    z.head(e.T.size()) = e.T.reshaped();
    z.tail(e.N.size()) = e.N.reshaped();
    return z;
}

inline CommutantElement unstack(const CVector& z, Index r, Index s) {
    CommutantElement e;
    e.T = z.head(r * r).reshaped(r, r);
    e.N = z.tail(s * s).reshaped(s, s);
    return e;
}

}  // namespace detail

/// Frobenius-orthonormal basis of {T (+) N : pi(x)T = N pi(x), pi(x)* N = T pi(x)*}.
///
/// On the span of the ranges pi(x)H, N is forced by T through N pi(x) = pi(x) T,
/// so the linear system is solved in T alone. On the orthogonal complement of
/// that span both relations hold for any N, which contributes a free block.
inline std::vector<CommutantElement> commutant_basis(const DilationData& dil, const Tolerances& tol = {}) {
    const Index r = dil.dim_H();
    const Index s = dil.dim_K();
    std::vector<CommutantElement> out;
    if (r + s == 0) return out;
    const Index nb = static_cast<Index>(dil.pi_Phi.size());
    CMatrix in(s, nb * r);
    for (Index b = 0; b < nb; ++b) in.middleCols(b * r, r) = dil.pi_Phi[b];
    const CMatrix pinv = pseudo_inverse(in, tol);
    // N = sum_b pi(x_b) T X_b with X_b the b-th row block of pinv.
    const auto forced_N = [&](const CMatrix& T) {
        CMatrix N = CMatrix::Zero(s, s);
        for (Index b = 0; b < nb; ++b) N += dil.pi_Phi[b] * T * pinv.middleRows(b * r, r);
        return N;
    };

    CMatrix sys(2 * nb * r * s, r * r);
    for (Index j = 0; j < r; ++j)
        for (Index i = 0; i < r; ++i) {
            CMatrix N = CMatrix::Zero(s, s);
            for (Index b = 0; b < nb; ++b) N += dil.pi_Phi[b].col(i) * pinv.row(b * r + j);
            CMatrix E = CMatrix::Zero(r, r);
            E(i, j) = 1.0;
            auto col = sys.col(j * r + i);
            for (Index b = 0; b < nb; ++b) {
                const CMatrix& P = dil.pi_Phi[b];
                col.segment(2 * b * r * s, r * s) = (P * E - N * P).reshaped();
                col.segment((2 * b + 1) * r * s, r * s) = (P.adjoint() * N - E * P.adjoint()).reshaped();
            }
        }
    const CMatrix t_null = null_space(sys, tol);

    // Orthonormalize the pairs (T, N(T)) in the stacked inner product.
    CMatrix pairs(r * r + s * s, t_null.cols());
    for (Index c = 0; c < t_null.cols(); ++c) {
        const CMatrix T = t_null.col(c).reshaped(r, r);
        pairs.col(c) << T.reshaped(), forced_N(T).reshaped();
    }
    const CMatrix ortho = range_basis(pairs, tol);
    for (Index c = 0; c < ortho.cols(); ++c) out.push_back(detail::unstack(ortho.col(c), r, s));

    // These are orthogonal to the pairs above, whose N has range inside the span.
    const CMatrix complement = null_space(range_basis(in, tol).adjoint(), tol);
    for (Index l = 0; l < complement.cols(); ++l)
        for (Index k = 0; k < complement.cols(); ++k)
            out.push_back({CMatrix::Zero(r, r), complement.col(k) * complement.col(l).adjoint()});
    return out;
}

/// Re-expansion residual of products and adjoints of basis elements.
inline double commutant_closure_residual(const std::vector<CommutantElement>& basis) {
    if (basis.empty()) return 0.0;
    CMatrix B(detail::stack(basis.front()).size(), static_cast<Index>(basis.size()));
    for (std::size_t p = 0; p < basis.size(); ++p) B.col(static_cast<Index>(p)) = detail::stack(basis[p]);
    const auto off_span = [&](const CommutantElement& e) {
        const CVector z = detail::stack(e);
        const CVector proj = B * (B.adjoint() * z);
        return max_abs(z - proj);
    };
    double r = 0.0;
    for (const auto& p : basis) {
        r = std::max(r, off_span({p.T.adjoint(), p.N.adjoint()}));
        for (const auto& q : basis) r = std::max(r, off_span({p.T * q.T, p.N * q.N}));
    }
    return r;
}

/// The N with N pi(x) = pi(x) T on every generator; unique when pi^Phi is nondegenerate.
inline CMatrix complete_from_T(const DilationData& dil, const CMatrix& T, const Tolerances& tol = {}) {
    const Index r = dil.dim_H();
    const Index nb = static_cast<Index>(dil.pi_Phi.size());
    CMatrix in(dil.dim_K(), nb * r), out(dil.dim_K(), nb * r);
    for (Index b = 0; b < nb; ++b) {
        in.middleCols(b * r, r) = dil.pi_Phi[b];
        out.middleCols(b * r, r) = dil.pi_Phi[b] * T;
    }
    return lsq_define(in, out, tol).map;
}

/// Random commutant element with 0 <= T (+) N <= I: real coefficients in the
/// basis, Hermitian part, then the joint spectrum mapped affinely onto [0,1].
inline CommutantElement random_commutant_element(const std::vector<CommutantElement>& basis, Rng& rng,
                                                 const Tolerances& tol = {}) {
    if (basis.empty()) return {CMatrix(0, 0), CMatrix(0, 0)};
    const Index r = basis.front().T.rows();
    const Index s = basis.front().N.rows();
    std::normal_distribution<double> normal;
    CommutantElement z{CMatrix::Zero(r, r), CMatrix::Zero(s, s)};
    for (const auto& e : basis) {
        const double c = normal(rng);
        z.T += c * e.T;
        z.N += c * e.N;
    }
    z.T = (0.5 * (z.T + z.T.adjoint())).eval();
    z.N = (0.5 * (z.N + z.N.adjoint())).eval();
    const CMatrix joint = block_diag(std::vector<CMatrix>{z.T, z.N});
    const HermitianEigen eig = herm_eig(joint, tol);
    const double lo = eig.values.minCoeff();
    const double hi = eig.values.maxCoeff();
    const double spread = hi - lo;
    if (spread <= 1e-12 * std::max(1.0, std::abs(hi))) {
        // Scalar commutant: any multiple of I in [0,1].
        const double c = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        return {c * identity(r), c * identity(s)};
    }
    z.T = (z.T - lo * identity(r)) / spread;
    z.N = (z.N - lo * identity(s)) / spread;
    return z;
}

inline CommutantElement commutant_product(const CommutantElement& a, const CommutantElement& b) {
    return {a.T * b.T, a.N * b.N};
}

inline CommutantElement commutant_sqrt(const CommutantElement& a, const Tolerances& tol = {}) {
    return {psd_sqrt(a.T, tol), psd_sqrt(a.N, tol)};
}

// ---------------------------------------------------------------------------
// Deformations

/// Phi^{T (+) N}_ij(x) = W_i* sqrt(N) pi^Phi(x) sqrt(T) S_j, with scalar part
/// S_i* T pi^phi(a) T S_j (equal to S_i* T^2 pi^phi(a) S_j on the commutant).
inline ModuleCPMatrix deform(const DilationData& dil, const CMatrix& T, const CMatrix& N, const Tolerances& tol = {}) {
    const double comm = commutant_residual(dil, T, N);
    if (comm > tol.residual_tol) {
        throw Error(ErrorCode::NotInCommutant, "commutant residual " + std::to_string(comm));
    }
    CMatrix sqrtT, sqrtN;
    try {
        sqrtT = psd_sqrt(T, tol);
        sqrtN = psd_sqrt(N, tol);
    } catch (const Error& e) {
        throw Error(ErrorCode::NotPsd, e.what());
    }
    const FlagSpace& H = dil.source;
    const FlagSpace& K = dil.target;
    NPositiveMatrixMap phi = NPositiveMatrixMap::from_function(
        dil.n, dil.algebra(), H, [&](Index i, Index j, const AlgElement& a) -> CMatrix {
            return dil.S[i].adjoint() * T * dil.pi_phi_of(a) * T * dil.S[j];
        });
    std::vector<CMatrix> left, right;
    for (Index i = 0; i < dil.n; ++i) {
        left.push_back(dil.W[i].adjoint() * sqrtN);
        right.push_back(sqrtT * dil.S[i]);
    }
    return ModuleCPMatrix::from_function(dil.module, H, K, phi, [&](Index i, Index j, const ModuleElement& x) -> CMatrix {
        return left[i] * dil.pi_Phi_of(x) * right[j];
    });
}

/// Inverse of the Radon-Nikodym map: the [Psi] whose derivative against the
/// dilated [Phi] is T (+) N.
inline ModuleCPMatrix derivative_inverse(const DilationData& dil, const CMatrix& T, const CMatrix& N,
                                         const Tolerances& tol = {}) {
    CMatrix rt, rn;
    try {
        rt = psd_sqrt(T, tol);
        rn = psd_sqrt(N, tol);
    } catch (const Error& e) {
        throw Error(ErrorCode::NotPsd, e.what());
    }
    return deform(dil, rt, rn, tol);
}

// ---------------------------------------------------------------------------
// Radon-Nikodym derivative

struct RnOptions {
    Index samples = 16;
    std::uint64_t seed = 0;
};

struct RNDerivative {
    CMatrix R;  // H^Phi -> H^Psi
    CMatrix Q;  // K^Phi -> K^Psi
    CMatrix Delta1;
    CMatrix Delta2;
    CommutantElement as_commutant;
    DilationData psi_dilation;
    DominationResult domination;
    double r_welldef = 0.0;
    double q_welldef = 0.0;
    double commutant_residual = 0.0;
    double spectrum_min = 0.0;  // over Delta1 (+) Delta2
    double spectrum_max = 0.0;
    double equivalence_residual = 0.0;  // derivative_inverse(Delta) vs Psi
};

inline RNDerivative rn_derivative(const DilationData& dil, const ModuleCPMatrix& psi, const Tolerances& tol = {},
                                  const RnOptions& opts = {}) {
    RNDerivative out;
    out.domination = domination_check(psi, dil.origin, opts.samples, tol, opts.seed);
    if (out.domination.verdict != DominationVerdict::Certified) {
        throw Error(ErrorCode::NotDominated, "domination is " + to_string(out.domination.verdict));
    }
    out.psi_dilation = build_dilation(psi.scalar_part(), psi, tol);
    const LeastSquaresMap R = lsq_define(h_generators(dil), h_generators(out.psi_dilation), tol);
    const LeastSquaresMap Q = lsq_define(k_generators(dil), k_generators(out.psi_dilation), tol);
    out.R = R.map;
    out.Q = Q.map;
    out.r_welldef = R.welldef_residual;
    out.q_welldef = Q.welldef_residual;
    if (out.r_welldef > tol.residual_tol || out.q_welldef > tol.residual_tol) {
        throw Error(ErrorCode::NotWellDefined, "R residual " + std::to_string(out.r_welldef) + ", Q residual " +
                                                   std::to_string(out.q_welldef));
    }
    out.Delta1 = out.R.adjoint() * out.R;
    out.Delta2 = out.Q.adjoint() * out.Q;
    out.as_commutant = {out.Delta1, out.Delta2};
    out.commutant_residual = commutant_residual(dil, out.Delta1, out.Delta2);
    const CMatrix joint = block_diag(std::vector<CMatrix>{out.Delta1, out.Delta2});
    if (joint.rows() > 0) {
        const HermitianEigen eig = herm_eig(joint, tol);
        out.spectrum_min = eig.values.minCoeff();
        out.spectrum_max = eig.values.maxCoeff();
    }
    if (out.commutant_residual <= tol.residual_tol) {
        out.equivalence_residual = equivalence_residual(derivative_inverse(dil, out.Delta1, out.Delta2, tol), psi);
    } else {
        out.equivalence_residual = std::numeric_limits<double>::infinity();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Order isomorphism

/// One round-trip trial: z2 = T2 (+) N2, the ordered z1 <= z2, and the derivative recovered from z2.
struct IsoTrial {
    CommutantElement z2;
    CommutantElement z1;
    CMatrix Delta1;
    CMatrix Delta2;
    DominationVerdict order = DominationVerdict::Undecided;
};

struct IsoReport {
    Index trials = 0;
    Index commutant_dim = 0;
    double max_roundtrip_T = 0.0;  // |Delta1 - T|
    double max_roundtrip_N = 0.0;  // |Delta2 - N|
    double max_commutant_residual = 0.0;
    double max_equivalence_residual = 0.0;
    double min_spectrum = 0.0;
    double max_spectrum = 0.0;
    Index certified = 0;
    Index undecided = 0;
    Index refuted = 0;
    double closure_residual = 0.0;
    std::vector<IsoTrial> records;
};

inline IsoReport order_iso_roundtrip(const DilationData& dil, Index trials, std::uint64_t seed,
                                     const Tolerances& tol = {}, Index samples = 16) {
    if (!minimality_check(dil, tol)) throw Error(ErrorCode::NotMinimal, "order isomorphism needs a minimal dilation");
    if (!nondegeneracy_check(dil, tol)) {
        throw Error(ErrorCode::NotNondegenerate, "pi^Phi ranges do not span K^Phi");
    }
    IsoReport rep;
    rep.trials = trials;
    const auto basis = commutant_basis(dil, tol);
    rep.commutant_dim = static_cast<Index>(basis.size());
    rep.closure_residual = commutant_closure_residual(basis);
    rep.min_spectrum = 1.0;
    rep.max_spectrum = 0.0;
    for (Index t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        const CommutantElement z2 = random_commutant_element(basis, rng, tol);
        const CommutantElement y = random_commutant_element(basis, rng, tol);
        const CommutantElement root = commutant_sqrt(z2, tol);
        const CommutantElement z1 = commutant_product(commutant_product(root, y), root);

        const ModuleCPMatrix psi2 = derivative_inverse(dil, z2.T, z2.N, tol);
        const RNDerivative d = rn_derivative(dil, psi2, tol, {samples, derive_seed(seed, 1000003u + t)});
        rep.max_roundtrip_T = std::max(rep.max_roundtrip_T, max_abs(d.Delta1 - z2.T));
        rep.max_roundtrip_N = std::max(rep.max_roundtrip_N, max_abs(d.Delta2 - z2.N));
        rep.max_commutant_residual = std::max(rep.max_commutant_residual, d.commutant_residual);
        rep.max_equivalence_residual = std::max(rep.max_equivalence_residual, d.equivalence_residual);
        rep.min_spectrum = std::min(rep.min_spectrum, d.spectrum_min);
        rep.max_spectrum = std::max(rep.max_spectrum, d.spectrum_max);

        const CommutantElement z1h{0.5 * (z1.T + z1.T.adjoint()), 0.5 * (z1.N + z1.N.adjoint())};
        const ModuleCPMatrix psi1 = derivative_inverse(dil, z1h.T, z1h.N, tol);
        const DominationResult dom = domination_check(psi1, psi2, samples, tol, derive_seed(seed, 2000003u + t));
        switch (dom.verdict) {
            case DominationVerdict::Certified: ++rep.certified; break;
            case DominationVerdict::Undecided: ++rep.undecided; break;
            case DominationVerdict::Refuted: ++rep.refuted; break;
        }
        rep.records.push_back({z2, z1h, d.Delta1, d.Delta2, dom.verdict});
    }
    return rep;
}

}  // namespace cpdilate
