#pragma once

// Dense complex linear algebra used by every construction in the library:
// Hermitian spectra, PSD square roots, Gram quotients and least-squares
// operator definitions. All routines are pure and take inputs by const ref.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "cpdilate/error.hpp"

namespace cpdilate {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Tolerances {
    double rank_tol = 1e-9;      // relative eigen/singular value cutoff
    double psd_tol = 1e-9;       // allowed negative eigenvalue magnitude
    double residual_tol = 1e-7;  // equation-residual acceptance

    bool valid() const noexcept {
        auto ok = [](double v) { return v > 0.0 && v <= 1e-2 && std::isfinite(v); };
        return ok(rank_tol) && ok(psd_tol) && ok(residual_tol);
    }
};

inline double max_abs(const CMatrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool all_finite(const CMatrix& m) {
    return m.allFinite();
}

inline double hermiticity_residual(const CMatrix& m) {
    if (m.rows() != m.cols()) {
        throw Error(ErrorCode::NonSquare, std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    return max_abs(m - m.adjoint());
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

inline CMatrix identity(Index n) {
    return CMatrix::Identity(n, n);
}

/// Block-diagonal assembly; zero-sized blocks are allowed.
template <typename Range>
CMatrix block_diag(const Range& blocks) {
    Index rows = 0, cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    CMatrix out = CMatrix::Zero(rows, cols);
    Index r = 0, c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

struct HermitianEigen {
    RVector values;   // descending
    CMatrix vectors;  // columns, unitary
};

inline HermitianEigen herm_eig(const CMatrix& m, const Tolerances& tol = {}) {
    const double herm = hermiticity_residual(m);
    if (herm > tol.residual_tol) {
        throw Error(ErrorCode::NonHermitian, "max |m - m*| = " + std::to_string(herm));
    }
    HermitianEigen out;
    if (m.rows() == 0) {
        out.values.resize(0);
        out.vectors.resize(0, 0);
        return out;
    }
    const CMatrix sym = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
    const Index n = m.rows();
    out.values.resize(n);
    out.vectors.resize(n, n);
    // Eigen returns ascending order.
    for (Index k = 0; k < n; ++k) {
        out.values(k) = solver.eigenvalues()(n - 1 - k);
        out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
    }
    return out;
}

inline double min_eigenvalue(const CMatrix& m, const Tolerances& tol = {}) {
    if (m.rows() == 0) return 0.0;
    return herm_eig(m, tol).values.minCoeff();
}

inline double max_eigenvalue(const CMatrix& m, const Tolerances& tol = {}) {
    if (m.rows() == 0) return 0.0;
    return herm_eig(m, tol).values.maxCoeff();
}

inline CMatrix psd_sqrt(const CMatrix& m, const Tolerances& tol = {}) {
    const HermitianEigen eig = herm_eig(m, tol);
    if (eig.values.size() == 0) return m;
    const double lo = eig.values.minCoeff();
    if (lo < -tol.psd_tol) {
        throw Error(ErrorCode::NotPsd, "min eigenvalue " + std::to_string(lo));
    }
    RVector roots = eig.values.cwiseMax(0.0).cwiseSqrt();
    CMatrix out = eig.vectors * roots.cast<Complex>().asDiagonal() * eig.vectors.adjoint();
    return 0.5 * (out + out.adjoint());
}

/// Quotient of a coefficient space by the null space of a PSD Gram form.
/// `coord_map` (rank x N) sends raw coefficient vectors to orthonormal
/// coordinates on the quotient, so coord_map* coord_map == gram; `lift`
/// (N x rank) is its right inverse, coord_map * lift == I.
struct GramQuotient {
    CMatrix gram;
    Index rank = 0;
    CMatrix coord_map;
    CMatrix lift;
};

inline GramQuotient gram_quotient(const CMatrix& gram, const Tolerances& tol = {}) {
    const HermitianEigen eig = herm_eig(gram, tol);
    GramQuotient q;
    q.gram = gram;
    const Index n = gram.rows();
    if (n == 0) {
        q.coord_map.resize(0, 0);
        q.lift.resize(0, 0);
        return q;
    }
    const double lo = eig.values.minCoeff();
    const double hi = eig.values.maxCoeff();
    if (lo < -tol.psd_tol * std::max(1.0, hi)) {
        throw Error(ErrorCode::NotPsd, "Gram min eigenvalue " + std::to_string(lo));
    }
    const double cutoff = tol.rank_tol * std::max(hi, 0.0);
    Index r = 0;
    while (r < n && eig.values(r) > cutoff && eig.values(r) > 0.0) ++r;
    q.rank = r;
    q.coord_map.resize(r, n);
    q.lift.resize(n, r);
    for (Index k = 0; k < r; ++k) {
        const double s = std::sqrt(eig.values(k));
        q.coord_map.row(k) = s * eig.vectors.col(k).adjoint();
        q.lift.col(k) = eig.vectors.col(k) / s;
    }
    return q;
}

struct SvdSpectrum {
    RVector singular_values;
    CMatrix u;
    CMatrix v;
};

inline SvdSpectrum thin_svd(const CMatrix& m, bool full_v = false) {
    SvdSpectrum out;
    if (m.size() == 0) {
        out.singular_values.resize(0);
        out.u = CMatrix::Identity(m.rows(), 0);
        out.v = full_v ? CMatrix::Identity(m.cols(), m.cols()) : CMatrix(m.cols(), 0);
        return out;
    }
    const unsigned opts = full_v ? (Eigen::ComputeThinU | Eigen::ComputeFullV)
                                 : (Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::BDCSVD<CMatrix> svd(m, opts);
    out.singular_values = svd.singularValues();
    out.u = svd.matrixU();
    out.v = svd.matrixV();
    return out;
}

inline Index numerical_rank(const CMatrix& m, const Tolerances& tol = {}) {
    if (m.size() == 0) return 0;
    const RVector s = thin_svd(m).singular_values;
    if (s.size() == 0 || s(0) <= 0.0) return 0;
    Index r = 0;
    while (r < s.size() && s(r) > tol.rank_tol * s(0)) ++r;
    return r;
}

/// Orthonormal basis (columns) of the column space.
inline CMatrix range_basis(const CMatrix& m, const Tolerances& tol = {}) {
    if (m.size() == 0) return CMatrix(m.rows(), 0);
    const SvdSpectrum svd = thin_svd(m);
    const Index r = numerical_rank(m, tol);
    return svd.u.leftCols(r);
}

/// Orthonormal basis (columns) of {z : m z = 0}.
inline CMatrix null_space(const CMatrix& m, const Tolerances& tol = {}) {
    if (m.rows() == 0) return identity(m.cols());
    if (m.rows() > m.cols()) {
        // Same right singular structure as the triangular factor, at a fraction of the cost.
        // Jacobi here: BDCSVD returns wrong V for rank-deficient triangular input.
        const Eigen::HouseholderQR<CMatrix> qr(m);
        const CMatrix r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
        const Eigen::JacobiSVD<CMatrix> svd(r, Eigen::ComputeFullV);
        const RVector& s = svd.singularValues();
        Index rank = 0;
        if (s.size() > 0 && s(0) > 0.0) {
            while (rank < s.size() && s(rank) > tol.rank_tol * s(0)) ++rank;
        }
        return svd.matrixV().rightCols(m.cols() - rank);
    }
    const SvdSpectrum svd = thin_svd(m, /*full_v=*/true);
    const RVector& s = svd.singular_values;
    Index r = 0;
    if (s.size() > 0 && s(0) > 0.0) {
        while (r < s.size() && s(r) > tol.rank_tol * s(0)) ++r;
    }
    return svd.v.rightCols(m.cols() - r);
}

inline CMatrix pseudo_inverse(const CMatrix& m, const Tolerances& tol = {}) {
    if (m.size() == 0) return CMatrix::Zero(m.cols(), m.rows());
    const SvdSpectrum svd = thin_svd(m);
    const Index r = numerical_rank(m, tol);
    RVector inv = svd.singular_values.head(r).cwiseInverse();
    return svd.v.leftCols(r) * inv.cast<Complex>().asDiagonal() * svd.u.leftCols(r).adjoint();
}

struct LeastSquaresMap {
    CMatrix map;
    double welldef_residual = 0.0;  // Frobenius norm of map*in - out
};

/// Defines a linear map on a spanning family: minimizes
/// ||map * generators_in - generators_out||_F. Columns are paired generators.
inline LeastSquaresMap lsq_define(const CMatrix& generators_in, const CMatrix& generators_out,
                                  const Tolerances& tol = {}) {
    if (generators_in.cols() != generators_out.cols()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "generator counts " + std::to_string(generators_in.cols()) + " vs " +
                        std::to_string(generators_out.cols()));
    }
    LeastSquaresMap out;
    out.map = generators_out * pseudo_inverse(generators_in, tol);
    out.welldef_residual =
        generators_in.cols() == 0 ? 0.0 : (out.map * generators_in - generators_out).norm();
    return out;
}

/// Largest singular value.
inline double operator_norm(const CMatrix& m) {
    if (m.size() == 0) return 0.0;
    return thin_svd(m).singular_values(0);
}

inline double unitarity_residual(const CMatrix& u) {
    const double a = max_abs(u.adjoint() * u - identity(u.cols()));
    const double b = max_abs(u * u.adjoint() - identity(u.rows()));
    return std::max(a, b);
}

}  // namespace cpdilate
