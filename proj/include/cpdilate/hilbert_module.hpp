#pragma once

// Hilbert A-modules with A-valued inner products, and the flag model of
// locally Hilbert spaces: H = H_0 c H_1 c ... c H_{m-1} with H_l spanned by
// the first flag_dims[l] coordinates.

#include <string>
#include <vector>

#include "cpdilate/algebra.hpp"

namespace cpdilate {

enum class ModuleKind { SelfModule, FreeModule, RectModule };

constexpr std::string_view to_string(ModuleKind kind) noexcept {
    switch (kind) {
    case ModuleKind::SelfModule: return "self";
    case ModuleKind::FreeModule: return "free";
    case ModuleKind::RectModule: return "rect";
    }
    return "?";
}

/// Every supported module is a direct sum over algebra blocks of
/// rectangular r_k x d_k matrices with <x,y> = x* y blockwise:
///   SelfModule      r_k = d_k          (M = A, <x,y> = x*y)
///   FreeModule(m)   r_k = m d_k        (M = A^m stacked, <x,y> = sum x_i* y_i)
///   RectModule(p)   r_k = p_k          (p_k = 0 leaves block k untouched)
class HilbertModule {
public:
    HilbertModule() = default;

    static HilbertModule self(const CStarAlgebra& alg) {
        return HilbertModule(alg, ModuleKind::SelfModule, alg.block_dims(), 1);
    }

    static HilbertModule free(const CStarAlgebra& alg, Index rank) {
        if (rank < 1) throw Error(ErrorCode::DimensionMismatch, "free module rank must be >= 1");
        std::vector<Index> rows;
        for (Index d : alg.block_dims()) rows.push_back(rank * d);
        return HilbertModule(alg, ModuleKind::FreeModule, std::move(rows), rank);
    }

    static HilbertModule rect(const CStarAlgebra& alg, std::vector<Index> rows_per_block) {
        if (static_cast<Index>(rows_per_block.size()) != alg.num_blocks()) {
            throw Error(ErrorCode::DimensionMismatch, "one row count per algebra block");
        }
        for (Index p : rows_per_block)
            if (p < 0) throw Error(ErrorCode::DimensionMismatch, "negative row count");
        return HilbertModule(alg, ModuleKind::RectModule, std::move(rows_per_block), 0);
    }

    const CStarAlgebra& algebra() const noexcept { return algebra_; }
    ModuleKind kind() const noexcept { return kind_; }
    Index rank() const noexcept { return rank_; }
    const std::vector<Index>& block_rows() const noexcept { return rows_; }
    Index dim() const noexcept { return dim_; }
    /// Row count of the defining representation (sum r_k).
    Index rep_rows() const noexcept { return rep_rows_; }

    Index level_rep_rows(Index level) const {
        algebra_.check_level(level);
        Index r = 0;
        for (Index k : algebra_.chain()[level]) r += rows_[k];
        return r;
    }

    Index vec_offset(Index block) const { return offsets_.at(block); }

    friend bool operator==(const HilbertModule& a, const HilbertModule& b) {
        return a.algebra_ == b.algebra_ && a.kind_ == b.kind_ && a.rows_ == b.rows_ &&
               a.rank_ == b.rank_;
    }

private:
    HilbertModule(const CStarAlgebra& alg, ModuleKind kind, std::vector<Index> rows, Index rank)
        : algebra_(alg), kind_(kind), rows_(std::move(rows)), rank_(rank) {
        for (Index k = 0; k < alg.num_blocks(); ++k) {
            offsets_.push_back(dim_);
            dim_ += rows_[k] * alg.block_dims()[k];
            rep_rows_ += rows_[k];
        }
    }

    CStarAlgebra algebra_;
    ModuleKind kind_ = ModuleKind::SelfModule;
    std::vector<Index> rows_;
    Index rank_ = 1;
    std::vector<Index> offsets_;
    Index dim_ = 0;
    Index rep_rows_ = 0;
};

class ModuleElement {
public:
    ModuleElement() = default;

    ModuleElement(HilbertModule module, std::vector<CMatrix> blocks)
        : module_(std::move(module)), blocks_(std::move(blocks)) {
        const auto& alg = module_.algebra();
        if (static_cast<Index>(blocks_.size()) != alg.num_blocks()) {
            throw Error(ErrorCode::DimensionMismatch, "wrong number of module blocks");
        }
        for (Index k = 0; k < alg.num_blocks(); ++k) {
            if (blocks_[k].rows() != module_.block_rows()[k] ||
                blocks_[k].cols() != alg.block_dims()[k]) {
                throw Error(ErrorCode::DimensionMismatch, "module block " + std::to_string(k));
            }
        }
    }

    static ModuleElement zero(const HilbertModule& m) {
        std::vector<CMatrix> blocks;
        for (Index k = 0; k < m.algebra().num_blocks(); ++k)
            blocks.push_back(CMatrix::Zero(m.block_rows()[k], m.algebra().block_dims()[k]));
        return {m, std::move(blocks)};
    }

    /// SelfModule elements are algebra elements.
    static ModuleElement from_algebra(const HilbertModule& m, const AlgElement& a) {
        if (m.kind() != ModuleKind::SelfModule) {
            throw Error(ErrorCode::ModuleMismatch, "from_algebra needs a SelfModule");
        }
        return {m, a.blocks()};
    }

    /// FreeModule(m) element from its m algebra-valued components.
    static ModuleElement from_components(const HilbertModule& m, const std::vector<AlgElement>& xs) {
        if (m.kind() != ModuleKind::FreeModule || static_cast<Index>(xs.size()) != m.rank()) {
            throw Error(ErrorCode::ModuleMismatch, "component count must equal the free rank");
        }
        ModuleElement x = zero(m);
        for (Index i = 0; i < m.rank(); ++i) {
            for (Index k = 0; k < m.algebra().num_blocks(); ++k) {
                const Index d = m.algebra().block_dims()[k];
                x.blocks_[k].block(i * d, 0, d, d) = xs[i].block(k);
            }
        }
        return x;
    }

    static ModuleElement from_vector(const HilbertModule& m, const CVector& v) {
        if (v.size() != m.dim()) throw Error(ErrorCode::DimensionMismatch, "module vector length");
        ModuleElement x = zero(m);
        for (Index k = 0; k < m.algebra().num_blocks(); ++k) {
            const Index d = m.algebra().block_dims()[k];
            for (Index p = 0; p < m.block_rows()[k]; ++p)
                for (Index q = 0; q < d; ++q) x.blocks_[k](p, q) = v(m.vec_offset(k) + p * d + q);
        }
        return x;
    }

    CVector to_vector() const {
        CVector v(module_.dim());
        for (Index k = 0; k < module_.algebra().num_blocks(); ++k) {
            const Index d = module_.algebra().block_dims()[k];
            for (Index p = 0; p < module_.block_rows()[k]; ++p)
                for (Index q = 0; q < d; ++q) v(module_.vec_offset(k) + p * d + q) = blocks_[k](p, q);
        }
        return v;
    }

    const HilbertModule& module() const noexcept { return module_; }
    const std::vector<CMatrix>& blocks() const noexcept { return blocks_; }
    const CMatrix& block(Index k) const { return blocks_.at(k); }

    AlgElement component(Index i) const {
        if (module_.kind() != ModuleKind::FreeModule || i < 0 || i >= module_.rank()) {
            throw Error(ErrorCode::IndexOutOfRange, "free component " + std::to_string(i));
        }
        std::vector<CMatrix> parts;
        for (Index k = 0; k < module_.algebra().num_blocks(); ++k) {
            const Index d = module_.algebra().block_dims()[k];
            parts.push_back(blocks_[k].block(i * d, 0, d, d));
        }
        return {module_.algebra(), std::move(parts)};
    }

    /// Defining representation Pi(x) : C^{rep_dim} -> C^{rep_rows}; it
    /// satisfies Pi(x)* Pi(y) = <x,y> in the defining representation of A.
    CMatrix represent() const { return block_diag(blocks_); }

    CMatrix represent_at_level(Index level) const {
        module_.algebra().check_level(level);
        std::vector<CMatrix> kept;
        for (Index k : module_.algebra().chain()[level]) kept.push_back(blocks_[k]);
        return block_diag(kept);
    }

    ModuleElement& operator+=(const ModuleElement& o) {
        require_same(o);
        for (std::size_t k = 0; k < blocks_.size(); ++k) blocks_[k] += o.blocks_[k];
        return *this;
    }
    ModuleElement& operator*=(Complex s) {
        for (auto& b : blocks_) b *= s;
        return *this;
    }
    friend ModuleElement operator+(ModuleElement a, const ModuleElement& b) { return a += b; }
    friend ModuleElement operator*(Complex s, ModuleElement a) { return a *= s; }

    void require_same(const ModuleElement& o) const {
        if (!(module_ == o.module_)) throw Error(ErrorCode::ModuleMismatch, "different modules");
    }

private:
    HilbertModule module_;
    std::vector<CMatrix> blocks_;
};

inline std::vector<ModuleElement> module_basis(const HilbertModule& m) {
    std::vector<ModuleElement> basis;
    basis.reserve(m.dim());
    for (Index b = 0; b < m.dim(); ++b) {
        CVector e = CVector::Zero(m.dim());
        e(b) = 1.0;
        basis.push_back(ModuleElement::from_vector(m, e));
    }
    return basis;
}

inline AlgElement module_inner_product(const ModuleElement& x, const ModuleElement& y) {
    x.require_same(y);
    std::vector<CMatrix> blocks;
    for (Index k = 0; k < x.module().algebra().num_blocks(); ++k)
        blocks.push_back(x.block(k).adjoint() * y.block(k));
    return {x.module().algebra(), std::move(blocks)};
}

inline ModuleElement module_right_action(const ModuleElement& x, const AlgElement& a) {
    if (!(x.module().algebra() == a.algebra())) {
        throw Error(ErrorCode::ModuleMismatch, "right action by an element of another algebra");
    }
    std::vector<CMatrix> blocks;
    for (Index k = 0; k < a.algebra().num_blocks(); ++k) blocks.push_back(x.block(k) * a.block(k));
    return {x.module(), std::move(blocks)};
}

inline ModuleElement random_module_element(const HilbertModule& m, Rng& rng) {
    return ModuleElement::from_vector(m, random_complex(m.dim(), 1, rng));
}

/// Full iff the inner products of basis pairs span all of A.
inline bool fullness_check(const HilbertModule& m, const Tolerances& tol = {}) {
    const auto basis = module_basis(m);
    CMatrix span(m.algebra().dim(), static_cast<Index>(basis.size() * basis.size()));
    Index c = 0;
    for (const auto& x : basis)
        for (const auto& y : basis) span.col(c++) = module_inner_product(x, y).to_vector();
    return numerical_rank(span, tol) == m.algebra().dim();
}

// ---------------------------------------------------------------------------
// Flags

class FlagSpace {
public:
    FlagSpace() = default;

    /// flag_dims must be nondecreasing and nonnegative; the ambient dimension is the last entry.
    explicit FlagSpace(std::vector<Index> flag_dims) : dims_(std::move(flag_dims)) {
        if (dims_.empty()) throw Error(ErrorCode::DimensionMismatch, "flag needs at least one level");
        for (std::size_t l = 0; l < dims_.size(); ++l) {
            if (dims_[l] < 0 || (l > 0 && dims_[l] < dims_[l - 1])) {
                throw Error(ErrorCode::DimensionMismatch, "flag dims must be nondecreasing");
            }
        }
    }

    static FlagSpace trivial(Index dim) { return FlagSpace({dim}); }

    Index dim() const noexcept { return dims_.empty() ? 0 : dims_.back(); }
    Index levels() const noexcept { return static_cast<Index>(dims_.size()); }
    const std::vector<Index>& flag_dims() const noexcept { return dims_; }

    Index level_dim(Index level) const {
        check_level(level);
        return dims_[level];
    }
    /// Size of H_l minus H_{l-1}.
    Index increment(Index level) const {
        check_level(level);
        return dims_[level] - (level == 0 ? 0 : dims_[level - 1]);
    }
    Index increment_offset(Index level) const {
        check_level(level);
        return level == 0 ? 0 : dims_[level - 1];
    }

    void check_level(Index level) const {
        if (level < 0 || level >= levels()) {
            throw Error(ErrorCode::LevelOutOfRange,
                        "level " + std::to_string(level) + " of " + std::to_string(levels()));
        }
    }

    friend bool operator==(const FlagSpace& a, const FlagSpace& b) { return a.dims_ == b.dims_; }

private:
    std::vector<Index> dims_;
};

/// Result of rotating arbitrary nested subspaces to leading-coordinate form:
/// the first flag_dims[l] columns of `rotation` span the l-th subspace, and an
/// operator T on the original coordinates becomes rotation* T rotation.
struct CanonicalFlag {
    FlagSpace flag;
    CMatrix rotation;
};

/// `nested` lists spanning sets (columns) of H_0 c H_1 c ... inside C^ambient.
inline CanonicalFlag canonicalize_flag(Index ambient, const std::vector<CMatrix>& nested,
                                       const Tolerances& tol = {}) {
    CMatrix basis(ambient, 0);
    std::vector<Index> dims;
    auto extend = [&](const CMatrix& span) {
        if (span.rows() != ambient) throw Error(ErrorCode::DimensionMismatch, "subspace ambient dim");
        CMatrix residual = span - basis * (basis.adjoint() * span);
        const CMatrix fresh = range_basis(residual, tol);
        CMatrix grown(ambient, basis.cols() + fresh.cols());
        grown << basis, fresh;
        basis = grown;
    };
    // Non-nested input is accepted: level l becomes the sum of the first l+1 spans.
    for (const auto& span : nested) {
        extend(span);
        dims.push_back(basis.cols());
    }
    extend(identity(ambient));
    if (dims.empty() || dims.back() != ambient) dims.push_back(ambient);
    return {FlagSpace(dims), basis};
}

inline bool flag_compat_check(const CMatrix& matrix, const FlagSpace& source, const FlagSpace& target,
                              const Tolerances& tol = {}) {
    if (matrix.rows() != target.dim() || matrix.cols() != source.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "operator shape vs flag dims");
    }
    if (source.levels() != target.levels()) {
        throw Error(ErrorCode::DimensionMismatch, "source and target flags differ in length");
    }
    for (Index l = 0; l < source.levels(); ++l) {
        const Index h = source.level_dim(l);
        const Index k = target.level_dim(l);
        // T(H_l) in K_l: rows >= k of the first h columns vanish.
        if (max_abs(matrix.block(k, 0, matrix.rows() - k, h)) > tol.residual_tol) return false;
        // T*(K_l) in H_l: columns >= h of the first k rows vanish.
        if (max_abs(matrix.block(0, h, k, matrix.cols() - h)) > tol.residual_tol) return false;
    }
    return true;
}

class FlagOperator {
public:
    FlagOperator() = default;

    FlagOperator(FlagSpace source, FlagSpace target, CMatrix matrix, const Tolerances& tol = {})
        : source_(std::move(source)), target_(std::move(target)), matrix_(std::move(matrix)) {
        if (!flag_compat_check(matrix_, source_, target_, tol)) {
            throw Error(ErrorCode::NotFlagCompatible, "operator does not respect the flags");
        }
    }

    const FlagSpace& source() const noexcept { return source_; }
    const FlagSpace& target() const noexcept { return target_; }
    const CMatrix& matrix() const noexcept { return matrix_; }

    /// T_l: restriction H_l -> K_l.
    CMatrix restriction(Index level) const {
        return matrix_.topLeftCorner(target_.level_dim(level), source_.level_dim(level));
    }

private:
    FlagSpace source_;
    FlagSpace target_;
    CMatrix matrix_;
};

inline FlagOperator flag_adjoint(const FlagOperator& t, const Tolerances& tol = {}) {
    return FlagOperator(t.target(), t.source(), t.matrix().adjoint(), tol);
}

/// ||T||_l = ||T_l* T_l||^{1/2}, the operator norm of the level-l restriction.
inline double flag_seminorm(const FlagOperator& t, Index level) {
    t.source().check_level(level);
    const CMatrix r = t.restriction(level);
    return std::sqrt(operator_norm(r.adjoint() * r));
}

/// Random operator that is block diagonal w.r.t. the flag increments.
inline CMatrix random_flag_matrix(const FlagSpace& source, const FlagSpace& target, Rng& rng) {
    CMatrix m = CMatrix::Zero(target.dim(), source.dim());
    for (Index l = 0; l < source.levels(); ++l) {
        m.block(target.increment_offset(l), source.increment_offset(l), target.increment(l),
                source.increment(l)) = random_complex(target.increment(l), source.increment(l), rng);
    }
    return m;
}

inline CMatrix random_flag_unitary(const FlagSpace& space, Rng& rng) {
    std::vector<CMatrix> blocks;
    for (Index l = 0; l < space.levels(); ++l) blocks.push_back(random_unitary(space.increment(l), rng));
    return block_diag(blocks);
}

}  // namespace cpdilate
