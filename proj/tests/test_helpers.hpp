#pragma once

#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "sepdyn/tensor.hpp"

namespace testutil {

using namespace sepdyn;

inline std::mt19937_64& rng() {
    static std::mt19937_64 eng(0x5eed5eedULL);
    return eng;
}

inline MatX random_matrix(int n) {
    std::normal_distribution<double> g;
    MatX m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = cd(g(rng()), g(rng()));
    return m;
}

inline MatX random_hermitian(int n) {
    MatX m = random_matrix(n);
    return 0.5 * (m + m.adjoint()).eval();
}

inline MatX random_density(int n) {
    MatX a = random_matrix(n);
    MatX rho = a * a.adjoint();
    return rho / rho.trace().real();
}

inline VecX random_vec(int n) {
    std::normal_distribution<double> g;
    VecX v(n);
    for (int i = 0; i < n; ++i) v[i] = cd(g(rng()), g(rng()));
    return v;
}

inline VecX random_unit(int n) {
    VecX v = random_vec(n);
    return v / v.norm();
}

inline ProductState random_product(const SubsystemLayout& lay, bool unit = true) {
    std::vector<VecX> locals;
    for (int d : lay.dims) locals.push_back(unit ? random_unit(d) : random_vec(d));
    return ProductState(locals, lay);
}

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
    return m.cwiseAbs().maxCoeff();
}

}  // namespace testutil
