#pragma once

#include <vector>

#include "sepdyn/operators.hpp"
#include "sepdyn/product_state.hpp"

namespace sepdyn {

inline MatX kron(const MatX& a, const MatX& b) {
    MatX out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline MatX tensor_product(const std::vector<MatX>& factors) {
    if (factors.empty()) throw DimensionMismatch("tensor product of nothing");
    MatX out = factors[0];
    for (size_t k = 1; k < factors.size(); ++k) out = kron(out, factors[k]);
    return out;
}

inline VecX tensor_product_vec(const std::vector<VecX>& factors) {
    if (factors.empty()) throw DimensionMismatch("tensor product of nothing");
    VecX out = factors[0];
    for (size_t k = 1; k < factors.size(); ++k) {
        VecX next(out.size() * factors[k].size());
        Eigen::Index pos = 0;
        for (Eigen::Index i = 0; i < out.size(); ++i)
            for (Eigen::Index j = 0; j < factors[k].size(); ++j)
                next[pos++] = out[i] * factors[k][j];
        out.swap(next);
    }
    return out;
}

namespace detail {

// Joint-index offsets of all index combinations of the subsystems other
// than k, enumerated with the lower-numbered spectator varying slowest.
inline std::vector<int> cofactor_offsets(const SubsystemLayout& lay, int k) {
    int f = lay.cofactor_dim(k);
    std::vector<int> offs(static_cast<size_t>(f), 0);
    int repeat = 1;  // how often each digit value repeats consecutively
    for (int j = lay.num_parts() - 1; j >= 0; --j) {
        if (j == k) continue;
        int dj = lay.dims[j], sj = lay.stride(j);
        for (int r = 0; r < f; ++r) offs[r] += ((r / repeat) % dj) * sj;
        repeat *= dj;
    }
    return offs;
}

// Product weights w_r = prod_{j != k} psi_j[digit_j(r)], same enumeration
// as cofactor_offsets.
inline std::vector<cd> cofactor_weights(const ProductState& s, int k) {
    const auto& lay = s.layout;
    int f = lay.cofactor_dim(k);
    std::vector<cd> w(static_cast<size_t>(f), cd(1.0, 0.0));
    int repeat = 1;
    for (int j = lay.num_parts() - 1; j >= 0; --j) {
        if (j == k) continue;
        int dj = lay.dims[j];
        for (int r = 0; r < f; ++r) w[r] *= s.locals[j][(r / repeat) % dj];
        repeat *= dj;
    }
    return w;
}

}  // namespace detail

// 1 x ... x op x ... x 1 with op acting on subsystem k.
inline MatX embed(const MatX& local_op, const SubsystemLayout& lay, int k) {
    lay.check_part(k);
    int m = lay.dims[k];
    if (local_op.rows() != m || local_op.cols() != m)
        throw DimensionMismatch("embedded operator dimension mismatch");
    int D = lay.total(), sk = lay.stride(k);
    auto offs = detail::cofactor_offsets(lay, k);
    MatX out = MatX::Zero(D, D);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            for (int off : offs) out(a * sk + off, b * sk + off) = local_op(a, b);
    return out;
}

inline cd expectation_raw(const MatX& O, const VecX& psi) {
    if (O.rows() != psi.size()) throw DimensionMismatch("expectation dimension mismatch");
    return psi.dot(O * psi);
}

inline cd expectation(const MatX& O, const VecX& psi) {
    double n2 = psi.squaredNorm();
    if (n2 < 1e-300) throw ZeroNormState("expectation of zero-norm state");
    return expectation_raw(O, psi) / n2;
}

inline cd expectation_raw(const MatX& O, const ProductState& s) {
    return expectation_raw(O, s.joint());
}

inline cd expectation(const MatX& O, const ProductState& s) {
    return expectation(O, s.joint());
}

// Tr(rho O)
inline cd expectation(const MatX& O, const DensityMatrix& rho) {
    if (O.rows() != rho.m.rows()) throw DimensionMismatch("expectation dimension mismatch");
    return (rho.m.transpose().cwiseProduct(O)).sum();
}

inline cd trace_with(const MatX& rho, const MatX& O) {
    return (rho.transpose().cwiseProduct(O)).sum();
}

// Trace out all subsystems not in `keep`; result layout is the kept dims in
// their original order.
inline MatX partial_trace(const MatX& rho, const SubsystemLayout& lay,
                          const std::vector<int>& keep) {
    if (rho.rows() != lay.total()) throw DimensionMismatch("partial trace dimension mismatch");
    if (keep.empty()) throw DimensionMismatch("partial trace must keep at least one subsystem");
    std::vector<bool> kept(static_cast<size_t>(lay.num_parts()), false);
    for (int k : keep) {
        lay.check_part(k);
        if (kept[k]) throw DimensionMismatch("duplicate subsystem in keep set");
        kept[k] = true;
    }

    // Strides of kept subsystems within the reduced space.
    int dkeep = 1;
    for (int k = 0; k < lay.num_parts(); ++k)
        if (kept[k]) dkeep *= lay.dims[k];
    std::vector<int> red_stride(static_cast<size_t>(lay.num_parts()), 0);
    {
        int s = dkeep;
        for (int k = 0; k < lay.num_parts(); ++k)
            if (kept[k]) {
                s /= lay.dims[k];
                red_stride[k] = s;
            }
    }

    MatX out = MatX::Zero(dkeep, dkeep);
    int D = lay.total();
    std::vector<int> digits(static_cast<size_t>(lay.num_parts()));
    for (int row = 0; row < D; ++row) {
        int rr = row;
        int red_row = 0;
        for (int k = 0; k < lay.num_parts(); ++k) {
            digits[k] = (row / lay.stride(k)) % lay.dims[k];
            if (kept[k]) red_row += digits[k] * red_stride[k];
        }
        (void)rr;
        for (int col = 0; col < D; ++col) {
            int red_col = 0;
            bool diag = true;
            for (int k = 0; k < lay.num_parts() && diag; ++k) {
                int dk = (col / lay.stride(k)) % lay.dims[k];
                if (kept[k])
                    red_col += dk * red_stride[k];
                else if (dk != digits[k])
                    diag = false;
            }
            if (diag) out(red_row, red_col) += rho(row, col);
        }
    }
    return out;
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& keep) {
    MatX red = partial_trace(rho.m, rho.layout, keep);
    std::vector<int> dims;
    for (int k = 0; k < rho.layout.num_parts(); ++k)
        for (int kk : keep)
            if (kk == k) dims.push_back(rho.layout.dims[k]);
    return DensityMatrix(std::move(red), SubsystemLayout(dims));
}

// (O)_k: O sandwiched with every local factor except subsystem k, divided by
// the product of the spectator norms. Invariant under rescaling any local.
inline MatX reduced_operator(const MatX& O, const ProductState& s, int k) {
    const auto& lay = s.layout;
    lay.check_part(k);
    if (O.rows() != lay.total()) throw DimensionMismatch("reduced operator dimension mismatch");

    double denom = 1.0;
    for (int j = 0; j < lay.num_parts(); ++j)
        if (j != k) denom *= s.locals[j].squaredNorm();
    if (denom < kSandwichFloor)
        throw DegenerateSandwich("reduced operator: spectator norm product below 1e-30");

    int D = lay.total(), m = lay.dims[k], f = lay.cofactor_dim(k), sk = lay.stride(k);
    auto offs = detail::cofactor_offsets(lay, k);
    auto w = detail::cofactor_weights(s, k);

    MatX U = MatX::Zero(D, m);
    for (int p = 0; p < D; ++p)
        for (int b = 0; b < m; ++b) {
            cd acc = 0;
            for (int r = 0; r < f; ++r) acc += O(p, b * sk + offs[r]) * w[r];
            U(p, b) = acc;
        }
    MatX R(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            cd acc = 0;
            for (int r = 0; r < f; ++r) acc += std::conj(w[r]) * U(a * sk + offs[r], b);
            R(a, b) = acc / denom;
        }
    return R;
}

// H_ms = sum_k 1 x ... x (H)_k x ... x 1
inline MatX constrained_hamiltonian(const MatX& H, const ProductState& s) {
    MatX out = MatX::Zero(H.rows(), H.cols());
    for (int k = 0; k < s.num_parts(); ++k)
        out += embed(reduced_operator(H, s, k), s.layout, k);
    return out;
}

inline double spectral_norm(const MatX& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<MatX> es(m.adjoint() * m, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

}  // namespace sepdyn
