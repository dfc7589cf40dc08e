#pragma once

// Matrix KSGNS construction. From a completely n-positive [phi] and a
// [phi]-completely positive [Phi] it builds
//   H^Phi  = (A (x) H)^n / Gram null space,
//   pi^phi = left multiplication, S_i xi = class of 1 (x) xi in slot i,
//   K^Phi  = span of the tuples (Phi_ij(x) xi)_i inside K^n,
//   pi^Phi : H^Phi -> K^Phi, W_i : K -> K^Phi,
// such that phi_ij(a) = S_i* pi^phi(a) S_j and Phi_ij(x) = W_i* pi^Phi(x) S_j.
// Dilation spaces carry the trivial flag: for a finite seminorm chain the
// per-level tower collapses to the top level.

#include <string>
#include <vector>

#include "cpdilate/cpmatrix.hpp"

namespace cpdilate {

struct DilationData {
    Index n = 0;
    HilbertModule module;
    FlagSpace source;  // H
    FlagSpace target;  // K
    ModuleCPMatrix origin;  // the [Phi] (with its [phi]) this dilation realizes

    GramQuotient quotient;             // over raw coordinates (i, algebra unit, H basis)
    std::vector<CMatrix> pi_phi;       // per algebra basis element, r x r
    std::vector<CMatrix> S;            // n operators, r x h
    CMatrix K_embedding;               // (n k) x s, orthonormal basis of K^Phi in K^n
    std::vector<CMatrix> K_components; // per i, orthonormal basis of K_i^Phi in K
    std::vector<CMatrix> pi_Phi;       // per module basis element, s x r
    std::vector<CMatrix> W;            // n operators, s x k
    double extension_residual = 0.0;   // least-squares residual defining pi^Phi

    Index dim_H() const noexcept { return static_cast<Index>(S.empty() ? 0 : S.front().rows()); }
    Index dim_K() const noexcept { return K_embedding.cols(); }
    const CStarAlgebra& algebra() const noexcept { return module.algebra(); }

    CMatrix pi_phi_of(const AlgElement& a) const {
        const CVector c = a.to_vector();
        CMatrix out = CMatrix::Zero(dim_H(), dim_H());
        for (Index u = 0; u < c.size(); ++u)
            if (c(u) != Complex(0.0)) out += c(u) * pi_phi[u];
        return out;
    }

    CMatrix pi_Phi_of(const ModuleElement& x) const {
        const CVector c = x.to_vector();
        CMatrix out = CMatrix::Zero(dim_K(), dim_H());
        for (Index b = 0; b < c.size(); ++b)
            if (c(b) != Complex(0.0)) out += c(b) * pi_Phi[b];
        return out;
    }
};

namespace detail {

inline Index raw_index(Index i, Index u, Index t, Index dimA, Index h) {
    return (i * dimA + u) * h + t;
}

}  // namespace detail

/// Generating family of H^Phi: columns pi^phi(e_u) S_i xi_t over (i, u, t).
inline CMatrix h_generators(const DilationData& dil) {
    const Index h = dil.source.dim();
    const Index dimA = dil.algebra().dim();
    CMatrix g(dil.dim_H(), dil.n * dimA * h);
    for (Index i = 0; i < dil.n; ++i)
        for (Index u = 0; u < dimA; ++u) g.middleCols(detail::raw_index(i, u, 0, dimA, h), h) = dil.pi_phi[u] * dil.S[i];
    return g;
}

/// Generating family of K^Phi: columns pi^Phi(x_b) S_i xi_t over (i, b, t).
inline CMatrix k_generators(const DilationData& dil) {
    const Index h = dil.source.dim();
    const Index dimM = dil.module.dim();
    CMatrix g(dil.dim_K(), dil.n * dimM * h);
    for (Index i = 0; i < dil.n; ++i)
        for (Index b = 0; b < dimM; ++b) g.middleCols((i * dimM + b) * h, h) = dil.pi_Phi[b] * dil.S[i];
    return g;
}

inline DilationData build_dilation(const NPositiveMatrixMap& phi, const ModuleCPMatrix& Phi,
                                   const Tolerances& tol = {}) {
    if (!phi.same_shape(Phi.scalar_part())) {
        throw Error(ErrorCode::ShapeMismatch, "[phi] is not the scalar part shape of [Phi]");
    }
    const CpReport cp = cp_report(phi, tol);
    if (!cp.completely_positive) {
        throw Error(ErrorCode::NotCp, "min Choi eigenvalue " + std::to_string(cp.min_eigenvalue));
    }
    const double compat = compatibility_residual(
        ModuleCPMatrix(Phi.module(), Phi.source(), Phi.target(), Phi.maps(), phi));
    if (compat > tol.residual_tol) {
        throw Error(ErrorCode::CompatFail, "compatibility residual " + std::to_string(compat));
    }

    const CStarAlgebra& alg = phi.algebra();
    const HilbertModule& module = Phi.module();
    const Index n = phi.n();
    const Index h = Phi.source().dim();
    const Index k = Phi.target().dim();
    const Index dimA = alg.dim();
    const Index dimM = module.dim();
    const Index N = n * dimA * h;
    const auto abasis = algebra_basis(alg);
    const auto mbasis = module_basis(module);

    DilationData dil;
    dil.n = n;
    dil.module = module;
    dil.source = Phi.source();
    dil.target = Phi.target();
    dil.origin = ModuleCPMatrix(Phi.module(), Phi.source(), Phi.target(), Phi.maps(), phi);

    // Gram form <(e_u (x) xi_s)_i, (e_v (x) xi_t)_j> = <xi_s, phi_ij(e_u* e_v) xi_t>.
    CMatrix gram(N, N);
    for (Index u = 0; u < dimA; ++u) {
        for (Index v = 0; v < dimA; ++v) {
            const CVector prod = element_product(element_adjoint(abasis[u]), abasis[v]).to_vector();
            for (Index i = 0; i < n; ++i) {
                for (Index j = 0; j < n; ++j) {
                    const CMatrix val = phi.apply_vector(i, j, prod);
                    gram.block(detail::raw_index(i, u, 0, dimA, h), detail::raw_index(j, v, 0, dimA, h), h, h) = val;
                }
            }
        }
    }
    try {
        dil.quotient = gram_quotient(gram, tol);
    } catch (const Error& e) {
        throw Error(ErrorCode::GramNotPsd, e.what());
    }
    const CMatrix& C = dil.quotient.coord_map;
    const CMatrix& L = dil.quotient.lift;
    const Index r = dil.quotient.rank;

    // pi^phi(a) acts on raw coordinates as I_n (x) lambda(a) (x) I_h.
    for (const auto& e : abasis) {
        const CMatrix lam = left_multiplication_matrix(e);
        const CMatrix raw = kron(identity(n), kron(lam, identity(h)));
        dil.pi_phi.push_back(C * raw * L);
    }

    const CVector unit = AlgElement::unit(alg).to_vector();
    for (Index i = 0; i < n; ++i) {
        CMatrix s = CMatrix::Zero(r, h);
        for (Index u = 0; u < dimA; ++u) {
            if (unit(u) == Complex(0.0)) continue;
            s += unit(u) * C.middleCols(detail::raw_index(i, u, 0, dimA, h), h);
        }
        dil.S.push_back(std::move(s));
    }

    // Tuples (Phi_ij(x_b) xi_t)_i over (j, b, t) span K^Phi.
    std::vector<CMatrix> big;
    big.reserve(mbasis.size());
    for (const auto& x : mbasis) big.push_back(Phi.apply_all(x));  // (n k) x (n h)
    CMatrix tuples(n * k, dimM * n * h);
    for (Index b = 0; b < dimM; ++b) tuples.middleCols(b * n * h, n * h) = big[b];
    dil.K_embedding = range_basis(tuples, tol);
    const Index s = dil.K_embedding.cols();
    for (Index i = 0; i < n; ++i) {
        dil.K_components.push_back(range_basis(tuples.middleRows(i * k, k), tol));
        dil.W.push_back(dil.K_embedding.middleRows(i * k, k).adjoint());
    }

    // pi^Phi(x) on generators: class of (e_u (x) xi_t) in slot j  |->  tuple of x e_u, xi_t, j.
    CMatrix targets(s * dimM, N);
    for (Index b = 0; b < dimM; ++b) {
        CMatrix raw(n * k, N);
        for (Index u = 0; u < dimA; ++u) {
            const CMatrix xe = Phi.apply_all(module_right_action(mbasis[b], abasis[u]));
            for (Index j = 0; j < n; ++j)
                raw.middleCols(detail::raw_index(j, u, 0, dimA, h), h) = xe.middleCols(j * h, h);
        }
        targets.middleRows(b * s, s) = dil.K_embedding.adjoint() * raw;
    }
    const LeastSquaresMap ext = lsq_define(C, targets, tol);
    dil.extension_residual = ext.welldef_residual;
    for (Index b = 0; b < dimM; ++b) dil.pi_Phi.push_back(ext.map.middleRows(b * s, s));
    return dil;
}

struct ReconstructionResidual {
    double res1 = 0.0;  // phi_ij(a) = S_i* pi^phi(a) S_j
    double res2 = 0.0;  // Phi_ij(x) = W_i* pi^Phi(x) S_j
};

inline ReconstructionResidual reconstruction_residual(const DilationData& dil, const NPositiveMatrixMap& phi,
                                                      const ModuleCPMatrix& Phi) {
    ReconstructionResidual out;
    const auto abasis = algebra_basis(phi.algebra());
    for (Index i = 0; i < phi.n(); ++i)
        for (Index j = 0; j < phi.n(); ++j)
            for (Index u = 0; u < static_cast<Index>(abasis.size()); ++u)
                out.res1 = std::max(out.res1, max_abs(phi.apply(i, j, abasis[u]) -
                                                      dil.S[i].adjoint() * dil.pi_phi[u] * dil.S[j]));
    const auto mbasis = module_basis(Phi.module());
    for (Index i = 0; i < Phi.n(); ++i)
        for (Index j = 0; j < Phi.n(); ++j)
            for (Index b = 0; b < static_cast<Index>(mbasis.size()); ++b)
                out.res2 = std::max(out.res2, max_abs(Phi.apply(i, j, mbasis[b]) -
                                                      dil.W[i].adjoint() * dil.pi_Phi[b] * dil.S[j]));
    return out;
}

/// Residuals of the structural identities a dilation must satisfy.
struct RepresentationResidual {
    double multiplicative = 0.0;  // pi(e_u e_v) = pi(e_u) pi(e_v)
    double adjoint = 0.0;         // pi(e_u*) = pi(e_u)*
    double unital = 0.0;          // pi(1) = I
    double module_form = 0.0;     // pi^Phi(x)* pi^Phi(y) = pi^phi(<x,y>)
    double right_action = 0.0;    // pi^Phi(x a) = pi^Phi(x) pi^phi(a)
    double w_partition = 0.0;     // sum_i W_i W_i* = I on K^Phi
    double w_components = 0.0;    // range of W_i* lies in K_i^Phi
};

inline RepresentationResidual representation_residual(const DilationData& dil) {
    RepresentationResidual out;
    const auto abasis = algebra_basis(dil.algebra());
    const auto mbasis = module_basis(dil.module);
    const Index dimA = static_cast<Index>(abasis.size());
    for (Index u = 0; u < dimA; ++u) {
        for (Index v = 0; v < dimA; ++v) {
            const CMatrix lhs = dil.pi_phi_of(element_product(abasis[u], abasis[v]));
            out.multiplicative = std::max(out.multiplicative, max_abs(lhs - dil.pi_phi[u] * dil.pi_phi[v]));
        }
        out.adjoint = std::max(out.adjoint, max_abs(dil.pi_phi_of(element_adjoint(abasis[u])) -
                                                    dil.pi_phi[u].adjoint()));
    }
    out.unital = max_abs(dil.pi_phi_of(AlgElement::unit(dil.algebra())) - identity(dil.dim_H()));
    for (std::size_t a = 0; a < mbasis.size(); ++a) {
        for (std::size_t b = 0; b < mbasis.size(); ++b) {
            const CMatrix lhs = dil.pi_Phi[a].adjoint() * dil.pi_Phi[b];
            const CMatrix rhs = dil.pi_phi_of(module_inner_product(mbasis[a], mbasis[b]));
            out.module_form = std::max(out.module_form, max_abs(lhs - rhs));
        }
        for (Index u = 0; u < dimA; ++u) {
            const CMatrix lhs = dil.pi_Phi_of(module_right_action(mbasis[a], abasis[u]));
            out.right_action = std::max(out.right_action, max_abs(lhs - dil.pi_Phi[a] * dil.pi_phi[u]));
        }
    }
    CMatrix sum = CMatrix::Zero(dil.dim_K(), dil.dim_K());
    for (const auto& w : dil.W) sum += w * w.adjoint();
    out.w_partition = max_abs(sum - identity(dil.dim_K()));
    for (Index i = 0; i < dil.n; ++i) {
        const CMatrix& basis = dil.K_components[i];
        const CMatrix wstar = dil.W[i].adjoint();
        out.w_components = std::max(out.w_components, max_abs(wstar - basis * (basis.adjoint() * wstar)));
    }
    return out;
}

struct MinimalityReport {
    Index h_span_rank = 0;
    Index k_span_rank = 0;
    bool minimal = false;
};

inline MinimalityReport minimality_report(const DilationData& dil, const Tolerances& tol = {}) {
    MinimalityReport r;
    r.h_span_rank = numerical_rank(h_generators(dil), tol);
    r.k_span_rank = numerical_rank(k_generators(dil), tol);
    r.minimal = r.h_span_rank == dil.dim_H() && r.k_span_rank == dil.dim_K();
    return r;
}

inline bool minimality_check(const DilationData& dil, const Tolerances& tol = {}) {
    return minimality_report(dil, tol).minimal;
}

/// pi^Phi is nondegenerate when its ranges together span K^Phi.
inline bool nondegeneracy_check(const DilationData& dil, const Tolerances& tol = {}) {
    CMatrix ranges(dil.dim_K(), dil.dim_H() * static_cast<Index>(dil.pi_Phi.size()));
    for (std::size_t b = 0; b < dil.pi_Phi.size(); ++b)
        ranges.middleCols(static_cast<Index>(b) * dil.dim_H(), dil.dim_H()) = dil.pi_Phi[b];
    return numerical_rank(ranges, tol) == dil.dim_K();
}

/// New coordinates on both dilation spaces: H^Phi -> U1 H^Phi, K^Phi -> U2 K^Phi.
inline DilationData conjugate_dilation(const DilationData& dil, const CMatrix& U1, const CMatrix& U2) {
    DilationData out = dil;
    for (auto& p : out.pi_phi) p = U1 * p * U1.adjoint();
    for (auto& s : out.S) s = U1 * s;
    for (auto& p : out.pi_Phi) p = U2 * p * U1.adjoint();
    for (auto& w : out.W) w = U2 * w;
    out.K_embedding = dil.K_embedding * U2.adjoint();
    out.quotient.coord_map = U1 * dil.quotient.coord_map;
    out.quotient.lift = dil.quotient.lift * U1.adjoint();
    return out;
}

enum class EquivalenceScope {
    Full,            // S, pi^phi, pi^Phi and W intertwined
    Representation,  // S, pi^phi, pi^Phi only (dilations of equivalent but distinct [Phi])
};

struct EquivalenceWitness {
    CMatrix U1;
    CMatrix U2;
    double u1_welldef = 0.0;
    double u2_welldef = 0.0;
    double u1_unitarity = 0.0;
    double u2_unitarity = 0.0;
    double s_intertwining = 0.0;       // U1 S_i = S'_i
    double pi_phi_intertwining = 0.0;  // U1 pi^phi(a) = pi'^phi(a) U1
    double pi_Phi_intertwining = 0.0;  // U2 pi^Phi(x) = pi'^Phi(x) U1
    double w_intertwining = 0.0;       // U2 W_i = W'_i
    bool equivalent = false;
    std::string reason;
};

/// Defines U1, U2 on the generating families and reports every diagram
/// residual; never throws on mathematical failure.
inline EquivalenceWitness compare_dilations(const DilationData& a, const DilationData& b, const Tolerances& tol = {},
                                            EquivalenceScope scope = EquivalenceScope::Full) {
    if (a.n != b.n || !(a.module == b.module) || !(a.source == b.source) || !(a.target == b.target)) {
        throw Error(ErrorCode::ShapeMismatch, "dilations of differently shaped matrices");
    }
    EquivalenceWitness w;
    const LeastSquaresMap u1 = lsq_define(h_generators(a), h_generators(b), tol);
    const LeastSquaresMap u2 = lsq_define(k_generators(a), k_generators(b), tol);
    w.U1 = u1.map;
    w.U2 = u2.map;
    w.u1_welldef = u1.welldef_residual;
    w.u2_welldef = u2.welldef_residual;
    w.u1_unitarity = unitarity_residual(w.U1);
    w.u2_unitarity = unitarity_residual(w.U2);
    const bool square = a.dim_H() == b.dim_H() && a.dim_K() == b.dim_K();
    for (Index i = 0; i < a.n; ++i) {
        w.s_intertwining = std::max(w.s_intertwining, max_abs(w.U1 * a.S[i] - b.S[i]));
        w.w_intertwining = std::max(w.w_intertwining, max_abs(w.U2 * a.W[i] - b.W[i]));
    }
    for (std::size_t u = 0; u < a.pi_phi.size(); ++u)
        w.pi_phi_intertwining = std::max(w.pi_phi_intertwining, max_abs(w.U1 * a.pi_phi[u] - b.pi_phi[u] * w.U1));
    for (std::size_t x = 0; x < a.pi_Phi.size(); ++x)
        w.pi_Phi_intertwining = std::max(w.pi_Phi_intertwining, max_abs(w.U2 * a.pi_Phi[x] - b.pi_Phi[x] * w.U1));
    const double t = tol.residual_tol;
    if (!square) {
        w.reason = "dilation dimensions differ";
    } else if (w.u1_welldef > t || w.u2_welldef > t) {
        w.reason = "generator correspondence is not a well-defined linear map";
    } else if (w.u1_unitarity > t || w.u2_unitarity > t) {
        w.reason = "generator correspondence is not unitary";
    } else if (w.s_intertwining > t || w.pi_phi_intertwining > t || w.pi_Phi_intertwining > t) {
        w.reason = "intertwining relations fail";
    } else if (scope == EquivalenceScope::Full && w.w_intertwining > t) {
        w.reason = "U2 W_i != W'_i";
    } else {
        w.equivalent = true;
    }
    return w;
}

inline EquivalenceWitness unitary_equivalence(const DilationData& a, const DilationData& b, const Tolerances& tol = {},
                                              EquivalenceScope scope = EquivalenceScope::Full) {
    if (!minimality_check(a, tol) || !minimality_check(b, tol)) {
        throw Error(ErrorCode::NotMinimal, "unitary equivalence needs minimal dilations");
    }
    EquivalenceWitness w = compare_dilations(a, b, tol, scope);
    if (!w.equivalent) throw Error(ErrorCode::NotEquivalent, w.reason);
    return w;
}

}  // namespace cpdilate
