#pragma once

#include <cstdint>
#include <random>

#include "cpdilate/linalg.hpp"

namespace cpdilate {

// All generators take an explicit engine; there is no global RNG state.
using Rng = std::mt19937_64;

/// Per-trial seeds derived from a base seed (splitmix64 step), so results do
/// not depend on the order in which trials are evaluated.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline CMatrix random_complex(Index rows, Index cols, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale / std::sqrt(2.0));
    CMatrix m(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            const double re = normal(rng);
            const double im = normal(rng);
            m(i, j) = Complex(re, im);
        }
    }
    return m;
}

inline CMatrix random_hermitian(Index n, Rng& rng) {
    const CMatrix g = random_complex(n, n, rng);
    return 0.5 * (g + g.adjoint());
}

inline CMatrix random_psd(Index n, Rng& rng) {
    const CMatrix g = random_complex(n, n, rng);
    return g.adjoint() * g;
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase correction).
inline CMatrix random_unitary(Index n, Rng& rng) {
    if (n == 0) return CMatrix(0, 0);
    const CMatrix g = random_complex(n, n, rng);
    Eigen::HouseholderQR<CMatrix> qr(g);
    CMatrix q = qr.householderQ() * identity(n);
    const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index k = 0; k < n; ++k) {
        const double mag = std::abs(r(k, k));
        if (mag > 0.0) q.col(k) *= r(k, k) / mag;
    }
    return q;
}

}  // namespace cpdilate
