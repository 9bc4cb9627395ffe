#pragma once

#include <cmath>

#include "sepdyn/operators.hpp"

namespace sepdyn {

// Matrix exponential by scaling-and-squaring with a Taylor kernel. Meant for
// the small (<= 64 x 64) dense matrices this project works with.
inline MatX expm(const MatX& a) {
    double nrm = a.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm
    int s = 0;
    if (nrm > 0.25) s = static_cast<int>(std::ceil(std::log2(nrm / 0.25)));
    MatX x = a / std::ldexp(1.0, s);
    MatX out = MatX::Identity(a.rows(), a.cols());
    MatX term = out;
    for (int k = 1; k <= 12; ++k) {
        term = (term * x) / static_cast<double>(k);
        out += term;
    }
    for (int i = 0; i < s; ++i) out = out * out;
    return out;
}

// exp(-i H t) for Hermitian H, exact up to floating point via
// eigendecomposition. Throws on a non-Hermitian input.
inline MatX hermitian_propagator(const MatX& h, double t) {
    if (!matrix_is_hermitian(h, 1e-10)) throw Error("propagator requires a Hermitian matrix");
    Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (h + h.adjoint()));
    VecX phases(h.rows());
    for (Eigen::Index i = 0; i < h.rows(); ++i)
        phases[i] = std::exp(cd(0.0, -es.eigenvalues()[i] * t));
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace sepdyn
