#pragma once

#include <utility>

#include "sepdyn/layout.hpp"

namespace sepdyn {

enum class Hermiticity { Hermitian, NonHermitian, Unknown };

inline bool matrix_is_hermitian(const MatX& m, double rel_tol = 1e-12) {
    double scale = m.cwiseAbs().maxCoeff();
    if (scale == 0.0) return true;
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

// Dense operator on the joint space of a layout. The hermiticity flag is an
// advisory cache; validate() recomputes from the entries.
struct OperatorMatrix {
    MatX m;
    SubsystemLayout layout;
    Hermiticity herm = Hermiticity::Unknown;

    OperatorMatrix() = default;
    OperatorMatrix(MatX mat, SubsystemLayout lay, Hermiticity h = Hermiticity::Unknown)
        : m(std::move(mat)), layout(std::move(lay)), herm(h) {
        if (m.rows() != m.cols() || m.rows() != layout.total())
            throw DimensionMismatch("operator shape does not match layout");
    }

    void validate() const {
        if (herm == Hermiticity::Hermitian && !matrix_is_hermitian(m))
            throw Error("operator flagged hermitian is not");
    }
};

struct DensityMatrix {
    MatX m;
    SubsystemLayout layout;

    DensityMatrix() = default;
    DensityMatrix(MatX mat, SubsystemLayout lay) : m(std::move(mat)), layout(std::move(lay)) {
        if (m.rows() != m.cols() || m.rows() != layout.total())
            throw DimensionMismatch("density matrix shape does not match layout");
    }

    // Hermitian within 1e-10, unit trace within 1e-10 (when expected),
    // eigenvalues >= -1e-9.
    void validate(bool expect_unit_trace = true) const {
        double scale = std::max(m.cwiseAbs().maxCoeff(), 1.0);
        if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
            throw Error("density matrix not hermitian");
        cd tr = m.trace();
        if (std::abs(tr.imag()) > 1e-10) throw Error("density matrix trace not real");
        if (expect_unit_trace && std::abs(tr.real() - 1.0) > 1e-10)
            throw Error("density matrix trace != 1");
        Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (m + m.adjoint()),
                                               Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-9)
            throw Error("density matrix has eigenvalue below -1e-9");
    }
};

}  // namespace sepdyn
