#pragma once

#include <limits>
#include <string>
#include <vector>

#include "sepdyn/lindblad.hpp"
#include "sepdyn/tensor.hpp"

namespace sepdyn {

inline double internal_energy(const MatX& rho, const MatX& H) {
    return trace_with(rho, H).real();
}

inline double internal_energy(const VecX& psi, const MatX& H) {
    return expectation(H, psi).real();
}

// Q(t) = Tr{(rho(t) - rho0) H} for time-independent H.
inline double accumulated_heat(const MatX& rho_t, const MatX& rho_0, const MatX& H) {
    return trace_with(rho_t - rho_0, H).real();
}

inline double work_rate(const MatX& rho, const MatX& dHdt) {
    return trace_with(rho, dHdt).real();
}

// Free heat flow sum_k Tr(D_k(rho) H).
inline double heat_flow_free(const LindbladModel& m, const MatX& rho, const MatX& H) {
    return dissipative_heat_flow(m, rho, H);
}

// Constrained dissipator acting on a pure product state,
//   D_ms,k(rho) = J rho J^+ + (n-1)<L^+L> rho - 1/2 { sum_d embed((L^+L)_d), rho },
// with J = (x)_d (L_k)_d / <L_k>^{n-1} and all expectations on the normalized
// state. (n = 2 recovers the bipartite separability Lindblad dissipator.)
inline MatX constrained_dissipator(const LindbladModel& m, const ProductState& s, size_t k) {
    const MatX& L = m.jumps.at(k);
    int n = s.num_parts();
    ProductState sn = s.normalized();
    MatX rho = sn.density();

    cd e = expectation(L, sn);
    cd denom = std::pow(e, cd(n - 1, 0));
    if (std::abs(denom) < kSandwichFloor)
        throw DegenerateSandwich("constrained dissipator: vanishing <L>");
    std::vector<MatX> red;
    for (int d = 0; d < n; ++d) red.push_back(reduced_operator(L, sn, d));
    MatX J = red[0];
    for (int d = 1; d < n; ++d) J = kron(J, red[d]);
    J /= denom;

    MatX LdL = L.adjoint() * L;
    MatX anti = MatX::Zero(m.dim(), m.dim());
    for (int d = 0; d < n; ++d) anti += embed(reduced_operator(LdL, sn, d), s.layout, d);

    return J * rho * J.adjoint() + (static_cast<double>(n - 1) * expectation(LdL, sn)) * rho
           - 0.5 * (anti * rho + rho * anti);
}

// Constrained heat flow sum_k Tr(D_ms,k(rho_ms) H).
inline double heat_flow_constrained(const LindbladModel& m, const ProductState& s,
                                    const MatX& H) {
    double q = 0.0;
    for (size_t k = 0; k < m.jumps.size(); ++k)
        q += trace_with(constrained_dissipator(m, s, k), H).real();
    return q;
}

inline double von_neumann_entropy(const MatX& rho) {
    Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
        double p = es.eigenvalues()[i];
        if (p > kEntropyEigFloor) s -= p * std::log(p);
    }
    return std::max(0.0, s);
}

// S(rho||sigma) = Tr(rho ln rho) - Tr(rho ln sigma). Returns +infinity when
// rho carries more than 1e-10 weight outside the eigenvalue-floor support of
// sigma.
inline double relative_entropy(const MatX& rho, const MatX& sigma) {
    Eigen::SelfAdjointEigenSolver<MatX> er(0.5 * (rho + rho.adjoint()));
    Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (sigma + sigma.adjoint()));

    double tr_rho_ln_rho = 0.0;
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
        double p = er.eigenvalues()[i];
        if (p > kEntropyEigFloor) tr_rho_ln_rho += p * std::log(p);
    }

    double tr_rho_ln_sigma = 0.0, leak = 0.0;
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
        double q = es.eigenvalues()[i];
        VecX v = es.eigenvectors().col(i);
        double w = std::max(0.0, (v.adjoint() * rho * v)(0, 0).real());
        if (q > kEntropyEigFloor)
            tr_rho_ln_sigma += w * std::log(q);
        else
            leak += w;
    }
    if (leak > kSupportLeakTol) return std::numeric_limits<double>::infinity();
    return tr_rho_ln_rho - tr_rho_ln_sigma;
}

// Centered finite differences on the grid, one-sided at the ends.
inline std::vector<double> finite_difference(const std::vector<double>& t,
                                             const std::vector<double>& y) {
    size_t n = t.size();
    if (y.size() != n || n < 2) throw DimensionMismatch("finite difference needs a grid");
    std::vector<double> d(n);
    d[0] = (y[1] - y[0]) / (t[1] - t[0]);
    d[n - 1] = (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2]);
    for (size_t i = 1; i + 1 < n; ++i) d[i] = (y[i + 1] - y[i - 1]) / (t[i + 1] - t[i - 1]);
    return d;
}

// sigma(t) = -d/dt S(rho(t) || gamma)
inline std::vector<double> entropy_production_rate(const std::vector<double>& t,
                                                   const std::vector<MatX>& rhos,
                                                   const MatX& gamma) {
    std::vector<double> srel(rhos.size());
    for (size_t i = 0; i < rhos.size(); ++i) srel[i] = relative_entropy(rhos[i], gamma);
    auto d = finite_difference(t, srel);
    for (auto& x : d) x = -x;
    return d;
}

// Sdot - beta Qdot for a single-bath free run; nonnegative for
// Gibbs-preserving Markovian dynamics.
inline std::vector<double> second_law_residual(const std::vector<double>& t,
                                               const std::vector<MatX>& rhos,
                                               const LindbladModel& m, double beta,
                                               const MatX& H) {
    std::vector<double> s(rhos.size());
    for (size_t i = 0; i < rhos.size(); ++i) s[i] = von_neumann_entropy(rhos[i]);
    auto sdot = finite_difference(t, s);
    std::vector<double> out(rhos.size());
    for (size_t i = 0; i < rhos.size(); ++i)
        out[i] = sdot[i] - beta * heat_flow_free(m, rhos[i], H);
    return out;
}

// Trapezoidal running mean (1/t) int_0^t y; the t -> 0 limit is y(0).
inline std::vector<double> time_average(const std::vector<double>& t,
                                        const std::vector<double>& y) {
    if (t.size() != y.size() || t.empty()) throw DimensionMismatch("time average grid mismatch");
    std::vector<double> out(t.size());
    out[0] = y[0];
    double acc = 0.0;
    for (size_t i = 1; i < t.size(); ++i) {
        acc += 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1]);
        out[i] = acc / (t[i] - t[0]);
    }
    return out;
}

// Plateau detection on population-like series: relative change per unit time
// below `rate_tol` across the final 20% of the horizon.
inline bool plateau_detected(const std::vector<double>& t,
                             const std::vector<std::vector<double>>& series,
                             double rate_tol = 1e-3) {
    if (t.size() < 4) return false;
    size_t lo = t.size() - std::max<size_t>(2, t.size() / 5);
    for (const auto& y : series) {
        double scale = 0.0;
        for (size_t i = lo; i < t.size(); ++i) scale = std::max(scale, std::abs(y[i]));
        if (scale == 0.0) scale = 1.0;
        for (size_t i = lo + 1; i < t.size(); ++i) {
            double rate = std::abs(y[i] - y[i - 1]) / (t[i] - t[i - 1]) / scale;
            if (rate > rate_tol) return false;
        }
    }
    return true;
}

// Long-time reference state: the ensemble/state series averaged over the
// final 20% of the horizon. Returns an empty matrix when no plateau exists.
inline MatX estimate_steady_state(const std::vector<double>& t, const std::vector<MatX>& rhos,
                                  double rate_tol = 1e-3) {
    if (rhos.empty()) return MatX();
    std::vector<std::vector<double>> pops;
    for (Eigen::Index i = 0; i < rhos[0].rows(); ++i) {
        std::vector<double> p(rhos.size());
        for (size_t s = 0; s < rhos.size(); ++s) p[s] = rhos[s](i, i).real();
        pops.push_back(std::move(p));
    }
    if (!plateau_detected(t, pops, rate_tol)) return MatX();
    size_t lo = t.size() - std::max<size_t>(2, t.size() / 5);
    MatX avg = MatX::Zero(rhos[0].rows(), rhos[0].cols());
    for (size_t s = lo; s < rhos.size(); ++s) avg += rhos[s];
    avg /= static_cast<double>(rhos.size() - lo);
    return avg;
}

// Bookkeeping along one run; `mode` tags the channel it came from.
struct ThermoRecord {
    std::string mode;  // "free" | "constrained"
    std::vector<double> t;
    std::vector<double> energy;
    std::vector<double> heat;        // E(t) - E(0)
    std::vector<double> heat_rate;   // dissipator route (free channel)
    std::vector<double> work_rate;   // zero for every in-scope scenario
    std::vector<double> entropy;
    std::vector<double> rel_entropy;
    std::vector<double> entropy_production;
    std::vector<double> time_avg_heat;
};

}  // namespace sepdyn
