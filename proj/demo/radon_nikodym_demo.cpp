// Build a random [phi]-completely positive pair, dilate it, shrink it by a
// commutant element and read the element back as a Radon-Nikodym derivative.

#include <cstdio>

#include "cpdilate/radon_nikodym.hpp"

int main() {
    using namespace cpdilate;

    // A = M_1 (+) M_2 with a two-step seminorm chain, M = A^2.
    const CStarAlgebra alg({1, 2}, {{1}, {0, 1}});
    const HilbertModule module = HilbertModule::free(alg, 2);
    const FlagSpace H({1, 2});
    const FlagSpace K({2, 5});
    const CPPair pair = random_cp_pair(module, H, K, /*n=*/2, /*dilation_dim=*/alg.rep_dim(), /*seed=*/7);

    const DilationData dil = build_dilation(pair.phi, pair.Phi);
    const ReconstructionResidual rec = reconstruction_residual(dil, pair.phi, pair.Phi);
    std::printf("dim H^Phi = %ld, dim K^Phi = %ld, minimal = %s\n", static_cast<long>(dil.dim_H()),
                static_cast<long>(dil.dim_K()), minimality_check(dil) ? "yes" : "no");
    std::printf("reconstruction residuals: %.2e %.2e\n", rec.res1, rec.res2);

    const auto basis = commutant_basis(dil);
    Rng rng(11);
    const CommutantElement z = random_commutant_element(basis, rng);
    std::printf("commutant dimension %zu\n", basis.size());

    const ModuleCPMatrix psi = derivative_inverse(dil, z.T, z.N);
    const DominationResult dom = domination_check(psi, pair.Phi, 16);
    std::printf("psi <= Phi: %s\n", to_string(dom.verdict).c_str());

    const RNDerivative d = rn_derivative(dil, psi);
    std::printf("|Delta1 - T| = %.2e, |Delta2 - N| = %.2e, equivalence residual %.2e\n",
                max_abs(d.Delta1 - z.T), max_abs(d.Delta2 - z.N), d.equivalence_residual);
    return 0;
}
