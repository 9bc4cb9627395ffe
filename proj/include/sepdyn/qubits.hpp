#pragma once

#include "sepdyn/common.hpp"

namespace sepdyn {

// Basis convention: |0> is the ground state, sigma_z = diag(1, -1),
// sigma_minus = |0><1| lowers the excited state.

inline MatX sigma_x() {
    MatX m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

inline MatX sigma_y() {
    MatX m(2, 2);
    m << 0, -kI, kI, 0;
    return m;
}

inline MatX sigma_z() {
    MatX m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

inline MatX sigma_minus() {
    MatX m = MatX::Zero(2, 2);
    m(0, 1) = 1;
    return m;
}

inline MatX sigma_plus() { return sigma_minus().adjoint().eval(); }

// |1><1| projector; the number operator of a qubit with excitation energy 1.
inline MatX excited_projector() {
    MatX m = MatX::Zero(2, 2);
    m(1, 1) = 1;
    return m;
}

inline MatX ground_projector() {
    MatX m = MatX::Zero(2, 2);
    m(0, 0) = 1;
    return m;
}

inline VecX basis_ket(int idx, int dim) {
    VecX v = VecX::Zero(dim);
    v[idx] = 1;
    return v;
}

inline VecX plus_ket() {
    VecX v(2);
    v << 1, 1;
    return v / std::sqrt(2.0);
}

// (|01> + |10>)/sqrt(2) on two qubits.
inline VecX bell_psi_plus() {
    VecX v = VecX::Zero(4);
    v[1] = v[2] = 1.0 / std::sqrt(2.0);
    return v;
}

// Two-level Gibbs state diag(1, e^{-w/T})/Z.
inline MatX thermal_qubit(double omega, double temperature) {
    double b = std::exp(-omega / temperature);
    MatX m = MatX::Zero(2, 2);
    m(0, 0) = 1.0 / (1.0 + b);
    m(1, 1) = b / (1.0 + b);
    return m;
}

}  // namespace sepdyn
