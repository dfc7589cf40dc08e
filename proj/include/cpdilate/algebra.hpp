#pragma once

// Finite-dimensional C*-algebras A = M_{d_1} (+) ... (+) M_{d_b} with a finite
// chain of C*-seminorms. Level l of the chain is the block subset that
// survives in the quotient A_l; for a finite chain the inverse limit is the
// top level, so A is stored once and each A_l is a view.

#include <numeric>
#include <string>
#include <vector>

#include "cpdilate/linalg.hpp"
#include "cpdilate/random.hpp"

namespace cpdilate {

class CStarAlgebra {
public:
    using BlockSet = std::vector<Index>;

    CStarAlgebra() = default;

    /// An empty chain means a single level containing every block.
    explicit CStarAlgebra(std::vector<Index> block_dims, std::vector<BlockSet> chain = {})
        : dims_(std::move(block_dims)), chain_(std::move(chain)) {
        if (dims_.empty()) {
            throw Error(ErrorCode::InvalidAlgebra, "no blocks (the zero algebra is not unital)");
        }
        for (Index d : dims_) {
            if (d <= 0) throw Error(ErrorCode::InvalidAlgebra, "block dimension must be positive");
        }
        BlockSet all(dims_.size());
        std::iota(all.begin(), all.end(), Index{0});
        if (chain_.empty()) chain_.push_back(all);
        for (std::size_t l = 0; l < chain_.size(); ++l) {
            auto& set = chain_[l];
            std::sort(set.begin(), set.end());
            set.erase(std::unique(set.begin(), set.end()), set.end());
            for (Index k : set) {
                if (k < 0 || k >= static_cast<Index>(dims_.size())) {
                    throw Error(ErrorCode::InvalidAlgebra, "chain level " + std::to_string(l) +
                                                               " names block " + std::to_string(k));
                }
            }
            if (l > 0 && !std::includes(set.begin(), set.end(), chain_[l - 1].begin(),
                                        chain_[l - 1].end())) {
                throw Error(ErrorCode::InvalidAlgebra,
                            "chain not nested at level " + std::to_string(l));
            }
        }
        if (chain_.back() != all) {
            throw Error(ErrorCode::InvalidAlgebra, "chain must end with the full block set");
        }
        Index v = 0, r = 0;
        for (Index d : dims_) {
            vec_offsets_.push_back(v);
            rep_offsets_.push_back(r);
            v += d * d;
            r += d;
        }
        dim_ = v;
        rep_dim_ = r;
    }

    const std::vector<Index>& block_dims() const noexcept { return dims_; }
    const std::vector<BlockSet>& chain() const noexcept { return chain_; }
    Index num_blocks() const noexcept { return static_cast<Index>(dims_.size()); }
    Index levels() const noexcept { return static_cast<Index>(chain_.size()); }
    /// Linear dimension sum d_k^2.
    Index dim() const noexcept { return dim_; }
    /// Dimension of the defining representation, sum d_k.
    Index rep_dim() const noexcept { return rep_dim_; }
    Index vec_offset(Index block) const { return vec_offsets_.at(block); }
    Index rep_offset(Index block) const { return rep_offsets_.at(block); }

    /// Represented dimension of the level-l quotient.
    Index level_rep_dim(Index level) const {
        check_level(level);
        Index r = 0;
        for (Index k : chain_[level]) r += dims_[k];
        return r;
    }

    void check_level(Index level) const {
        if (level < 0 || level >= levels()) {
            throw Error(ErrorCode::LevelOutOfRange,
                        "level " + std::to_string(level) + " of " + std::to_string(levels()));
        }
    }

    friend bool operator==(const CStarAlgebra& a, const CStarAlgebra& b) {
        return a.dims_ == b.dims_ && a.chain_ == b.chain_;
    }

private:
    std::vector<Index> dims_;
    std::vector<BlockSet> chain_;
    std::vector<Index> vec_offsets_;
    std::vector<Index> rep_offsets_;
    Index dim_ = 0;
    Index rep_dim_ = 0;
};

class AlgElement {
public:
    AlgElement() = default;

    AlgElement(CStarAlgebra algebra, std::vector<CMatrix> blocks)
        : algebra_(std::move(algebra)), blocks_(std::move(blocks)) {
        if (static_cast<Index>(blocks_.size()) != algebra_.num_blocks()) {
            throw Error(ErrorCode::DimensionMismatch, "wrong number of blocks");
        }
        for (Index k = 0; k < algebra_.num_blocks(); ++k) {
            const Index d = algebra_.block_dims()[k];
            if (blocks_[k].rows() != d || blocks_[k].cols() != d) {
                throw Error(ErrorCode::DimensionMismatch, "block " + std::to_string(k) +
                                                              " must be " + std::to_string(d) +
                                                              "x" + std::to_string(d));
            }
        }
    }

    static AlgElement zero(const CStarAlgebra& alg) {
        std::vector<CMatrix> blocks;
        for (Index d : alg.block_dims()) blocks.push_back(CMatrix::Zero(d, d));
        return {alg, std::move(blocks)};
    }

    static AlgElement unit(const CStarAlgebra& alg) {
        std::vector<CMatrix> blocks;
        for (Index d : alg.block_dims()) blocks.push_back(identity(d));
        return {alg, std::move(blocks)};
    }

    /// Matrix unit E^{(block)}_{row,col}.
    static AlgElement matrix_unit(const CStarAlgebra& alg, Index block, Index row, Index col) {
        AlgElement e = zero(alg);
        e.blocks_.at(block)(row, col) = 1.0;
        return e;
    }

    /// Coordinates in the matrix-unit basis: blocks concatenated, row-major.
    static AlgElement from_vector(const CStarAlgebra& alg, const CVector& v) {
        if (v.size() != alg.dim()) {
            throw Error(ErrorCode::DimensionMismatch, "algebra vector length");
        }
        AlgElement e = zero(alg);
        for (Index k = 0; k < alg.num_blocks(); ++k) {
            const Index d = alg.block_dims()[k];
            for (Index p = 0; p < d; ++p)
                for (Index q = 0; q < d; ++q) e.blocks_[k](p, q) = v(alg.vec_offset(k) + p * d + q);
        }
        return e;
    }

    CVector to_vector() const {
        CVector v(algebra_.dim());
        for (Index k = 0; k < algebra_.num_blocks(); ++k) {
            const Index d = algebra_.block_dims()[k];
            for (Index p = 0; p < d; ++p)
                for (Index q = 0; q < d; ++q) v(algebra_.vec_offset(k) + p * d + q) = blocks_[k](p, q);
        }
        return v;
    }

    const CStarAlgebra& algebra() const noexcept { return algebra_; }
    const std::vector<CMatrix>& blocks() const noexcept { return blocks_; }
    const CMatrix& block(Index k) const { return blocks_.at(k); }

    /// Block-diagonal matrix in the defining representation on C^{rep_dim}.
    CMatrix represent() const { return block_diag(blocks_); }

    /// Representation of the image in the level-l quotient (blocks of that level only).
    CMatrix represent_at_level(Index level) const {
        algebra_.check_level(level);
        std::vector<CMatrix> kept;
        for (Index k : algebra_.chain()[level]) kept.push_back(blocks_[k]);
        return block_diag(kept);
    }

    AlgElement& operator+=(const AlgElement& o) {
        require_same(o);
        for (std::size_t k = 0; k < blocks_.size(); ++k) blocks_[k] += o.blocks_[k];
        return *this;
    }
    AlgElement& operator-=(const AlgElement& o) {
        require_same(o);
        for (std::size_t k = 0; k < blocks_.size(); ++k) blocks_[k] -= o.blocks_[k];
        return *this;
    }
    AlgElement& operator*=(Complex s) {
        for (auto& b : blocks_) b *= s;
        return *this;
    }
    friend AlgElement operator+(AlgElement a, const AlgElement& b) { return a += b; }
    friend AlgElement operator-(AlgElement a, const AlgElement& b) { return a -= b; }
    friend AlgElement operator*(Complex s, AlgElement a) { return a *= s; }

    void require_same(const AlgElement& o) const {
        if (!(algebra_ == o.algebra_)) throw Error(ErrorCode::AlgebraMismatch, "different algebras");
    }

private:
    CStarAlgebra algebra_;
    std::vector<CMatrix> blocks_;
};

inline std::vector<AlgElement> algebra_basis(const CStarAlgebra& alg) {
    std::vector<AlgElement> basis;
    basis.reserve(alg.dim());
    for (Index k = 0; k < alg.num_blocks(); ++k) {
        const Index d = alg.block_dims()[k];
        for (Index p = 0; p < d; ++p)
            for (Index q = 0; q < d; ++q) basis.push_back(AlgElement::matrix_unit(alg, k, p, q));
    }
    return basis;
}

inline AlgElement element_product(const AlgElement& a, const AlgElement& b) {
    a.require_same(b);
    std::vector<CMatrix> blocks;
    for (Index k = 0; k < a.algebra().num_blocks(); ++k) blocks.push_back(a.block(k) * b.block(k));
    return {a.algebra(), std::move(blocks)};
}

inline AlgElement element_adjoint(const AlgElement& a) {
    std::vector<CMatrix> blocks;
    for (const auto& b : a.blocks()) blocks.push_back(b.adjoint());
    return {a.algebra(), std::move(blocks)};
}

inline double element_distance(const AlgElement& a, const AlgElement& b) {
    a.require_same(b);
    double m = 0.0;
    for (Index k = 0; k < a.algebra().num_blocks(); ++k)
        m = std::max(m, max_abs(a.block(k) - b.block(k)));
    return m;
}

inline bool positivity_check(const AlgElement& a, const Tolerances& tol = {}) {
    for (const auto& b : a.blocks()) {
        if (hermiticity_residual(b) > tol.residual_tol) return false;
        if (min_eigenvalue(0.5 * (b + b.adjoint()), tol) < -tol.psd_tol) return false;
    }
    return true;
}

/// p_l(a): C*-norm of the image of a in the level-l quotient.
inline double seminorm_eval(const AlgElement& a, Index level) {
    const CStarAlgebra& alg = a.algebra();
    alg.check_level(level);
    double p = 0.0;
    for (Index k : alg.chain()[level]) p = std::max(p, operator_norm(a.block(k)));
    return p;
}

/// Matrix of b -> a b on basis coordinates.
inline CMatrix left_multiplication_matrix(const AlgElement& a) {
    const CStarAlgebra& alg = a.algebra();
    CMatrix out = CMatrix::Zero(alg.dim(), alg.dim());
    const auto basis = algebra_basis(alg);
    for (Index u = 0; u < alg.dim(); ++u) out.col(u) = element_product(a, basis[u]).to_vector();
    return out;
}

inline AlgElement random_element(const CStarAlgebra& alg, Rng& rng) {
    std::vector<CMatrix> blocks;
    for (Index d : alg.block_dims()) blocks.push_back(random_complex(d, d, rng));
    return {alg, std::move(blocks)};
}

}  // namespace cpdilate
