#pragma once

// Matrices of maps [phi] = (phi_ij): A -> L(H) and [Phi] = (Phi_ij): M -> L(H,K),
// stored densely (one matrix per entry acting on basis coordinates), the
// Choi oracle for complete n-positivity, and a seeded generator of
// instances in dilation form.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cpdilate/hilbert_module.hpp"

namespace cpdilate {

/// n x n grid of linear maps A -> L(H). Entry (i,j) is an (h*h) x dim(A)
/// matrix sending algebra coordinates to the row-major entries of phi_ij(a).
class NPositiveMatrixMap {
public:
    NPositiveMatrixMap() = default;

    NPositiveMatrixMap(Index n, CStarAlgebra algebra, FlagSpace space, std::vector<CMatrix> maps)
        : n_(n), algebra_(std::move(algebra)), space_(std::move(space)), maps_(std::move(maps)) {
        if (n_ < 1) throw Error(ErrorCode::DimensionMismatch, "n must be >= 1");
        if (static_cast<Index>(maps_.size()) != n_ * n_) {
            throw Error(ErrorCode::DimensionMismatch, "need n*n map entries");
        }
        if (space_.levels() != algebra_.levels()) {
            throw Error(ErrorCode::DimensionMismatch, "flag length must equal the seminorm chain length");
        }
        const Index h = space_.dim();
        for (const auto& m : maps_) {
            if (m.rows() != h * h || m.cols() != algebra_.dim()) {
                throw Error(ErrorCode::DimensionMismatch, "map entry must be (h*h) x dim(A)");
            }
        }
    }

    static NPositiveMatrixMap from_function(
        Index n, const CStarAlgebra& alg, const FlagSpace& space,
        const std::function<CMatrix(Index, Index, const AlgElement&)>& f) {
        const Index h = space.dim();
        const auto basis = algebra_basis(alg);
        std::vector<CMatrix> maps;
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                CMatrix m(h * h, alg.dim());
                for (Index u = 0; u < alg.dim(); ++u) {
                    const CMatrix out = f(i, j, basis[u]);
                    for (Index s = 0; s < h; ++s)
                        for (Index t = 0; t < h; ++t) m(s * h + t, u) = out(s, t);
                }
                maps.push_back(std::move(m));
            }
        }
        return {n, alg, space, std::move(maps)};
    }

    static NPositiveMatrixMap zero(Index n, const CStarAlgebra& alg, const FlagSpace& space) {
        const Index h = space.dim();
        return {n, alg, space, std::vector<CMatrix>(n * n, CMatrix::Zero(h * h, alg.dim()))};
    }

    Index n() const noexcept { return n_; }
    const CStarAlgebra& algebra() const noexcept { return algebra_; }
    const FlagSpace& space() const noexcept { return space_; }
    const std::vector<CMatrix>& maps() const noexcept { return maps_; }
    const CMatrix& entry(Index i, Index j) const {
        check_index(i, j);
        return maps_[i * n_ + j];
    }

    /// phi_ij(a) as an h x h matrix.
    CMatrix apply(Index i, Index j, const AlgElement& a) const {
        check_index(i, j);
        if (!(a.algebra() == algebra_)) throw Error(ErrorCode::AlgebraMismatch, "phi argument");
        return apply_vector(i, j, a.to_vector());
    }

    CMatrix apply_vector(Index i, Index j, const CVector& coords) const {
        const Index h = space_.dim();
        const CVector v = maps_[i * n_ + j] * coords;
        CMatrix out(h, h);
        for (Index s = 0; s < h; ++s)
            for (Index t = 0; t < h; ++t) out(s, t) = v(s * h + t);
        return out;
    }

    /// Block matrix (phi_ij(a))_{ij} of size nh x nh.
    CMatrix apply_all(const AlgElement& a) const {
        const Index h = space_.dim();
        CMatrix out(n_ * h, n_ * h);
        const CVector v = a.to_vector();
        for (Index i = 0; i < n_; ++i)
            for (Index j = 0; j < n_; ++j) out.block(i * h, j * h, h, h) = apply_vector(i, j, v);
        return out;
    }

    void check_index(Index i, Index j) const {
        if (i < 0 || j < 0 || i >= n_ || j >= n_) {
            throw Error(ErrorCode::IndexOutOfRange,
                        "(" + std::to_string(i) + "," + std::to_string(j) + ") with n=" +
                            std::to_string(n_));
        }
    }

    bool same_shape(const NPositiveMatrixMap& o) const {
        return n_ == o.n_ && algebra_ == o.algebra_ && space_ == o.space_;
    }

private:
    Index n_ = 0;
    CStarAlgebra algebra_;
    FlagSpace space_;
    std::vector<CMatrix> maps_;
};

inline NPositiveMatrixMap linear_combination(Complex a, const NPositiveMatrixMap& x, Complex b,
                                             const NPositiveMatrixMap& y) {
    if (!x.same_shape(y)) throw Error(ErrorCode::ShapeMismatch, "matrix maps differ in shape");
    std::vector<CMatrix> maps;
    for (std::size_t k = 0; k < x.maps().size(); ++k) maps.push_back(a * x.maps()[k] + b * y.maps()[k]);
    return {x.n(), x.algebra(), x.space(), std::move(maps)};
}

inline FlagOperator evaluate_phi(const NPositiveMatrixMap& phi, Index i, Index j, const AlgElement& a,
                                 const Tolerances& tol = {}) {
    return FlagOperator(phi.space(), phi.space(), phi.apply(i, j, a), tol);
}

/// Largest violation of phi_ji(e*) = phi_ij(e)* over the matrix-unit basis.
inline double hermiticity_pairing_residual(const NPositiveMatrixMap& phi) {
    double r = 0.0;
    const auto basis = algebra_basis(phi.algebra());
    for (Index i = 0; i < phi.n(); ++i)
        for (Index j = 0; j < phi.n(); ++j)
            for (const auto& e : basis)
                r = std::max(r, max_abs(phi.apply(j, i, element_adjoint(e)) - phi.apply(i, j, e).adjoint()));
    return r;
}

inline bool phi_flag_compatible(const NPositiveMatrixMap& phi, const Tolerances& tol = {}) {
    const auto basis = algebra_basis(phi.algebra());
    for (Index i = 0; i < phi.n(); ++i)
        for (Index j = 0; j < phi.n(); ++j)
            for (const auto& e : basis)
                if (!flag_compat_check(phi.apply(i, j, e), phi.space(), phi.space(), tol)) return false;
    return true;
}

/// Choi matrix of Theta((a_ij)) = (phi_ij(a_ij)) on M_n(A), viewing M_n(A)
/// inside M_{n*rep_dim}: sum over matrix units e of e (x) Theta(e).
/// Size (n*rep_dim*n*h) square.
inline CMatrix choi_matrix(const NPositiveMatrixMap& phi) {
    const CStarAlgebra& alg = phi.algebra();
    const Index n = phi.n();
    const Index h = phi.space().dim();
    const Index D = n * alg.rep_dim();
    const Index m = n * h;
    CMatrix choi = CMatrix::Zero(D * m, D * m);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            for (Index k = 0; k < alg.num_blocks(); ++k) {
                const Index d = alg.block_dims()[k];
                const Index off = alg.rep_offset(k);
                for (Index p = 0; p < d; ++p) {
                    for (Index q = 0; q < d; ++q) {
                        CVector unit = CVector::Zero(alg.dim());
                        unit(alg.vec_offset(k) + p * d + q) = 1.0;
                        const CMatrix val = phi.apply_vector(i, j, unit);
                        const Index row0 = (i * alg.rep_dim() + off + p) * m + i * h;
                        const Index col0 = (j * alg.rep_dim() + off + q) * m + j * h;
                        choi.block(row0, col0, h, h) += val;
                    }
                }
            }
        }
    }
    return choi;
}

struct CpReport {
    bool completely_positive = false;
    double min_eigenvalue = 0.0;
    double hermiticity_residual = 0.0;
};

inline CpReport cp_report(const NPositiveMatrixMap& phi, const Tolerances& tol = {}) {
    const CMatrix choi = choi_matrix(phi);
    CpReport r;
    r.hermiticity_residual = hermiticity_residual(choi);
    if (r.hermiticity_residual > tol.residual_tol) {
        const CMatrix sym = 0.5 * (choi + choi.adjoint());
        r.min_eigenvalue = min_eigenvalue(sym, tol);
        r.completely_positive = false;
        return r;
    }
    r.min_eigenvalue = min_eigenvalue(choi, tol);
    r.completely_positive = r.min_eigenvalue >= -tol.psd_tol;
    return r;
}

inline bool cp_check(const NPositiveMatrixMap& phi, const Tolerances& tol = {}) {
    return cp_report(phi, tol).completely_positive;
}

/// Diagonal entry phi_ii as a 1x1 matrix map.
inline NPositiveMatrixMap diagonal_entry(const NPositiveMatrixMap& phi, Index i) {
    return {1, phi.algebra(), phi.space(), {phi.entry(i, i)}};
}

// ---------------------------------------------------------------------------

/// n x n grid of linear maps M -> L(H,K) together with its scalar part [phi].
/// Entry (i,j) is a (k*h) x dim(M) matrix; outputs are row-major k x h.
class ModuleCPMatrix {
public:
    ModuleCPMatrix() = default;

    ModuleCPMatrix(HilbertModule module, FlagSpace source, FlagSpace target, std::vector<CMatrix> maps,
                   NPositiveMatrixMap scalar_part)
        : module_(std::move(module)),
          source_(std::move(source)),
          target_(std::move(target)),
          maps_(std::move(maps)),
          scalar_(std::move(scalar_part)) {
        n_ = scalar_.n();
        if (static_cast<Index>(maps_.size()) != n_ * n_) {
            throw Error(ErrorCode::DimensionMismatch, "need n*n module map entries");
        }
        if (!(scalar_.algebra() == module_.algebra()) || !(scalar_.space() == source_)) {
            throw Error(ErrorCode::DimensionMismatch, "scalar part does not match module/source space");
        }
        if (target_.levels() != source_.levels()) {
            throw Error(ErrorCode::DimensionMismatch, "H and K flags differ in length");
        }
        for (const auto& m : maps_) {
            if (m.rows() != target_.dim() * source_.dim() || m.cols() != module_.dim()) {
                throw Error(ErrorCode::DimensionMismatch, "module map entry must be (k*h) x dim(M)");
            }
        }
    }

    static ModuleCPMatrix from_function(
        const HilbertModule& module, const FlagSpace& source, const FlagSpace& target,
        const NPositiveMatrixMap& scalar_part,
        const std::function<CMatrix(Index, Index, const ModuleElement&)>& f) {
        const Index n = scalar_part.n();
        const Index h = source.dim();
        const Index k = target.dim();
        const auto basis = module_basis(module);
        std::vector<CMatrix> maps;
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                CMatrix m(k * h, module.dim());
                for (Index b = 0; b < module.dim(); ++b) {
                    const CMatrix out = f(i, j, basis[b]);
                    for (Index s = 0; s < k; ++s)
                        for (Index t = 0; t < h; ++t) m(s * h + t, b) = out(s, t);
                }
                maps.push_back(std::move(m));
            }
        }
        return {module, source, target, std::move(maps), scalar_part};
    }

    Index n() const noexcept { return n_; }
    const HilbertModule& module() const noexcept { return module_; }
    const FlagSpace& source() const noexcept { return source_; }
    const FlagSpace& target() const noexcept { return target_; }
    const std::vector<CMatrix>& maps() const noexcept { return maps_; }
    const NPositiveMatrixMap& scalar_part() const noexcept { return scalar_; }
    const CMatrix& entry(Index i, Index j) const {
        scalar_.check_index(i, j);
        return maps_[i * n_ + j];
    }

    CMatrix apply(Index i, Index j, const ModuleElement& x) const {
        scalar_.check_index(i, j);
        if (!(x.module() == module_)) throw Error(ErrorCode::ModuleMismatch, "Phi argument");
        return apply_vector(i, j, x.to_vector());
    }

    CMatrix apply_vector(Index i, Index j, const CVector& coords) const {
        const Index h = source_.dim();
        const Index k = target_.dim();
        const CVector v = maps_[i * n_ + j] * coords;
        CMatrix out(k, h);
        for (Index s = 0; s < k; ++s)
            for (Index t = 0; t < h; ++t) out(s, t) = v(s * h + t);
        return out;
    }

    /// Block operator [Phi](x) = (Phi_ij(x))_{ij} : H^n -> K^n.
    CMatrix apply_all(const ModuleElement& x) const { return apply_all_vector(x.to_vector()); }

    CMatrix apply_all_vector(const CVector& coords) const {
        const Index h = source_.dim();
        const Index k = target_.dim();
        CMatrix out(n_ * k, n_ * h);
        for (Index i = 0; i < n_; ++i)
            for (Index j = 0; j < n_; ++j) out.block(i * k, j * h, k, h) = apply_vector(i, j, coords);
        return out;
    }

    bool same_shape(const ModuleCPMatrix& o) const {
        return n_ == o.n_ && module_ == o.module_ && source_ == o.source_ && target_ == o.target_;
    }

private:
    Index n_ = 0;
    HilbertModule module_;
    FlagSpace source_;
    FlagSpace target_;
    std::vector<CMatrix> maps_;
    NPositiveMatrixMap scalar_;
};

inline FlagOperator evaluate_Phi(const ModuleCPMatrix& Phi, Index i, Index j, const ModuleElement& x,
                                 const Tolerances& tol = {}) {
    return FlagOperator(Phi.source(), Phi.target(), Phi.apply(i, j, x), tol);
}

/// <[Phi](x),[Phi](y)> = [Phi](x)* [Phi](y), the nh x nh block matrix with
/// entries sum_r Phi_ri(x)* Phi_rj(y).
inline CMatrix module_form(const ModuleCPMatrix& Phi, const ModuleElement& x, const ModuleElement& y) {
    return Phi.apply_all(x).adjoint() * Phi.apply_all(y);
}

/// max over basis pairs and (i,j) of |sum_r Phi_ri(x)* Phi_rj(y) - phi_ij(<x,y>)|.
inline double compatibility_residual(const ModuleCPMatrix& Phi) {
    const auto basis = module_basis(Phi.module());
    std::vector<CMatrix> blocks;
    blocks.reserve(basis.size());
    for (const auto& x : basis) blocks.push_back(Phi.apply_all(x));
    double r = 0.0;
    for (std::size_t a = 0; a < basis.size(); ++a) {
        for (std::size_t b = 0; b < basis.size(); ++b) {
            const CMatrix lhs = blocks[a].adjoint() * blocks[b];
            const CMatrix rhs = Phi.scalar_part().apply_all(module_inner_product(basis[a], basis[b]));
            r = std::max(r, max_abs(lhs - rhs));
        }
    }
    return r;
}

inline bool Phi_flag_compatible(const ModuleCPMatrix& Phi, const Tolerances& tol = {}) {
    for (const auto& x : module_basis(Phi.module()))
        for (Index i = 0; i < Phi.n(); ++i)
            for (Index j = 0; j < Phi.n(); ++j)
                if (!flag_compat_check(Phi.apply(i, j, x), Phi.source(), Phi.target(), tol)) return false;
    return true;
}

/// c [Phi]; its scalar part is |c|^2 [phi].
inline ModuleCPMatrix scaled(const ModuleCPMatrix& Phi, Complex c) {
    std::vector<CMatrix> maps;
    for (const auto& m : Phi.maps()) maps.push_back(c * m);
    std::vector<CMatrix> scalar;
    for (const auto& m : Phi.scalar_part().maps()) scalar.push_back(std::norm(c) * m);
    NPositiveMatrixMap phi(Phi.n(), Phi.scalar_part().algebra(), Phi.source(), std::move(scalar));
    return {Phi.module(), Phi.source(), Phi.target(), std::move(maps), std::move(phi)};
}

/// (U Phi_ij(x))_{ij} for a unitary U on K; the scalar part is unchanged.
inline ModuleCPMatrix rotated(const ModuleCPMatrix& Phi, const CMatrix& unitary) {
    const Index h = Phi.source().dim();
    const Index k = Phi.target().dim();
    if (unitary.rows() != k || unitary.cols() != k) {
        throw Error(ErrorCode::DimensionMismatch, "rotation must act on K");
    }
    // vec_rowmajor(U X) = (U (x) I_h) vec_rowmajor(X)
    const CMatrix lift = kron(unitary, identity(h));
    std::vector<CMatrix> maps;
    for (const auto& m : Phi.maps()) maps.push_back(lift * m);
    return {Phi.module(), Phi.source(), Phi.target(), std::move(maps), Phi.scalar_part()};
}

// ---------------------------------------------------------------------------
// Instances in dilation form

/// Data realizing phi_ij(a) = S_i* pi(a) S_j and Phi_ij(x) = W_i* Pi(x) S_j.
/// pi and Pi are tabulated on the algebra and module bases.
struct CPWitness {
    std::vector<CMatrix> pi;  // per algebra basis element, D x D
    std::vector<CMatrix> Pi;  // per module basis element, E x D
    std::vector<CMatrix> S;   // n operators H -> C^D
    std::vector<CMatrix> W;   // n operators K -> C^E
};

struct CPPair {
    NPositiveMatrixMap phi;
    ModuleCPMatrix Phi;
    CPWitness witness;
};

inline CPPair cp_pair_from_witness(const HilbertModule& module, const FlagSpace& H, const FlagSpace& K,
                                   CPWitness witness) {
    const Index n = static_cast<Index>(witness.S.size());
    const CStarAlgebra& alg = module.algebra();
    const auto pi_of = [&](const AlgElement& a) {
        const CVector c = a.to_vector();
        CMatrix out = CMatrix::Zero(witness.pi.front().rows(), witness.pi.front().cols());
        for (Index u = 0; u < alg.dim(); ++u)
            if (c(u) != Complex(0.0)) out += c(u) * witness.pi[u];
        return out;
    };
    const auto Pi_of = [&](const ModuleElement& x) {
        const CVector c = x.to_vector();
        CMatrix out = CMatrix::Zero(witness.Pi.front().rows(), witness.Pi.front().cols());
        for (Index b = 0; b < module.dim(); ++b)
            if (c(b) != Complex(0.0)) out += c(b) * witness.Pi[b];
        return out;
    };
    NPositiveMatrixMap phi = NPositiveMatrixMap::from_function(
        n, alg, H, [&](Index i, Index j, const AlgElement& a) -> CMatrix {
            return witness.S[i].adjoint() * pi_of(a) * witness.S[j];
        });
    ModuleCPMatrix Phi = ModuleCPMatrix::from_function(
        module, H, K, phi, [&](Index i, Index j, const ModuleElement& x) -> CMatrix {
            return witness.W[i].adjoint() * Pi_of(x) * witness.S[j];
        });
    return {std::move(phi), std::move(Phi), std::move(witness)};
}

/// Random instance in dilation form. At each flag level l the dilating
/// representation is `multiplicity` copies of the level-l quotient of A and
/// of the module; S_i, W_i are block diagonal over flag increments, and the
/// W_i satisfy sum_r W_r W_r* = I so that the compatibility law holds.
/// `dilation_dim` must be a positive multiple of rep_dim(A); the quotient is
/// the multiplicity.
inline CPPair random_cp_pair(const HilbertModule& module, const FlagSpace& H, const FlagSpace& K, Index n,
                             Index dilation_dim, std::uint64_t seed) {
    const CStarAlgebra& alg = module.algebra();
    if (n < 1) throw Error(ErrorCode::DimensionMismatch, "n must be >= 1");
    if (dilation_dim < alg.rep_dim() || dilation_dim % alg.rep_dim() != 0) {
        throw Error(ErrorCode::BadMultiplicity, "dilation_dim " + std::to_string(dilation_dim) +
                                                    " is not a positive multiple of " +
                                                    std::to_string(alg.rep_dim()));
    }
    if (H.levels() != alg.levels() || K.levels() != alg.levels()) {
        throw Error(ErrorCode::DimensionMismatch, "flag length must equal the seminorm chain length");
    }
    const Index mult = dilation_dim / alg.rep_dim();
    Rng rng(seed);

    // Levels whose H increment is empty carry no dilation (nothing maps through them).
    std::vector<Index> level_mult(alg.levels());
    for (Index l = 0; l < alg.levels(); ++l) {
        level_mult[l] = H.increment(l) == 0 ? 0 : mult;
        const Index rows = level_mult[l] * module.level_rep_rows(l);
        if (rows > n * K.increment(l)) {
            throw Error(ErrorCode::BadMultiplicity,
                        "level " + std::to_string(l) + ": module representation of dimension " +
                            std::to_string(rows) + " does not fit in K^n increment " +
                            std::to_string(n * K.increment(l)));
        }
    }

    CPWitness w;
    for (const auto& e : algebra_basis(alg)) {
        std::vector<CMatrix> parts;
        for (Index l = 0; l < alg.levels(); ++l)
            parts.push_back(kron(identity(level_mult[l]), e.represent_at_level(l)));
        w.pi.push_back(block_diag(parts));
    }
    for (const auto& x : module_basis(module)) {
        std::vector<CMatrix> parts;
        for (Index l = 0; l < alg.levels(); ++l)
            parts.push_back(kron(identity(level_mult[l]), x.represent_at_level(l)));
        w.Pi.push_back(block_diag(parts));
    }

    std::vector<std::vector<CMatrix>> S_parts(n), W_parts(n);
    for (Index l = 0; l < alg.levels(); ++l) {
        const Index dh = level_mult[l] * alg.level_rep_dim(l);
        const Index de = level_mult[l] * module.level_rep_rows(l);
        const double scale = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(dh, 1)));
        for (Index i = 0; i < n; ++i) S_parts[i].push_back(random_complex(dh, H.increment(l), rng, scale));
        // Co-isometry V (de x n*dk) with V V* = I, split into n column blocks.
        const Index dk = K.increment(l);
        CMatrix V = CMatrix::Zero(de, n * dk);
        if (de > 0) {
            const CMatrix g = random_complex(n * dk, de, rng);
            Eigen::HouseholderQR<CMatrix> qr(g);
            const CMatrix q = qr.householderQ() * CMatrix::Identity(n * dk, de);
            V = q.adjoint();
        }
        for (Index i = 0; i < n; ++i) W_parts[i].push_back(V.block(0, i * dk, de, dk));
    }
    for (Index i = 0; i < n; ++i) {
        w.S.push_back(block_diag(S_parts[i]));
        w.W.push_back(block_diag(W_parts[i]));
    }
    return cp_pair_from_witness(module, H, K, std::move(w));
}

/// n = 1, phi = id on A acting on H = C^{rep_dim}, Phi(x) = left
/// multiplication on K = C^{rep_dim}; single-level chain only.
inline CPPair identity_cp_pair(const CStarAlgebra& alg) {
    if (alg.levels() != 1) throw Error(ErrorCode::DimensionMismatch, "identity pair needs a one-level chain");
    const HilbertModule module = HilbertModule::self(alg);
    const FlagSpace H = FlagSpace::trivial(alg.rep_dim());
    CPWitness w;
    for (const auto& e : algebra_basis(alg)) w.pi.push_back(e.represent());
    for (const auto& x : module_basis(module)) w.Pi.push_back(x.represent());
    w.S.push_back(identity(alg.rep_dim()));
    w.W.push_back(identity(alg.rep_dim()));
    return cp_pair_from_witness(module, H, H, std::move(w));
}

/// n = 1, phi(a) = transpose of the defining representation (not CP for d >= 2).
inline NPositiveMatrixMap transpose_map(const CStarAlgebra& alg) {
    const FlagSpace H = FlagSpace::trivial(alg.rep_dim());
    return NPositiveMatrixMap::from_function(
        1, alg, H, [](Index, Index, const AlgElement& a) -> CMatrix { return a.represent().transpose(); });
}

}  // namespace cpdilate
