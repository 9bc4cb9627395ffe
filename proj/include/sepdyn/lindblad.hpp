#pragma once

#include <optional>
#include <sstream>
#include <vector>

#include "sepdyn/tensor.hpp"

namespace sepdyn {

// Markovian model d rho/dt = i[rho, H] + sum_k ( L rho L^+ - 1/2 {L^+L, rho} ).
// When `shift` is set, H and jumps are the shifted operators and the original
// pair is recoverable through unshift_operators.
struct LindbladModel {
    MatX H;
    std::vector<MatX> jumps;
    SubsystemLayout layout;
    std::optional<std::vector<cd>> shift;

    int dim() const { return layout.total(); }
};

// H -> H + (1/2i) sum_k (conj(l_k) L_k - l_k L_k^+),  L_k -> L_k + l_k.
// Leaves the generator invariant.
inline LindbladModel shift_operators(const LindbladModel& m, const std::vector<cd>& lambda) {
    if (lambda.size() != m.jumps.size())
        throw DimensionMismatch("one shift per jump operator required");
    LindbladModel out = m;
    MatX id = MatX::Identity(m.dim(), m.dim());
    for (size_t k = 0; k < lambda.size(); ++k) {
        out.H += (std::conj(lambda[k]) * m.jumps[k] - lambda[k] * m.jumps[k].adjoint())
                 / cd(0.0, 2.0);
        out.jumps[k] = m.jumps[k] + lambda[k] * id;
    }
    std::vector<cd> total(lambda);
    if (m.shift)
        for (size_t k = 0; k < total.size(); ++k) total[k] += (*m.shift)[k];
    out.shift = total;
    return out;
}

// Invert the recorded shift, recovering the original (H, L_k).
inline LindbladModel unshift_operators(const LindbladModel& m) {
    if (!m.shift) return m;
    std::vector<cd> neg(*m.shift);
    for (auto& l : neg) l = -l;
    LindbladModel plain = m;
    plain.shift.reset();
    LindbladModel out = shift_operators(plain, neg);
    out.shift.reset();
    return out;
}

// lambda_k = c * ||L_k|| (spectral norm), real and positive.
inline std::vector<cd> default_shift(const LindbladModel& m, double c) {
    std::vector<cd> out;
    out.reserve(m.jumps.size());
    for (const auto& L : m.jumps) out.emplace_back(c * spectral_norm(L), 0.0);
    return out;
}

inline MatX dissipator(const MatX& L, const MatX& rho) {
    MatX LdL = L.adjoint() * L;
    return L * rho * L.adjoint() - 0.5 * (LdL * rho + rho * LdL);
}

inline MatX lindblad_rhs(const LindbladModel& m, const MatX& rho) {
    if (rho.rows() != m.dim()) throw DimensionMismatch("rhs dimension mismatch");
    MatX out = kI * (rho * m.H - m.H * rho);
    for (const auto& L : m.jumps) out += dissipator(L, rho);
    return out;
}

struct LindbladOptions {
    double dt = 1e-3;
    int output_stride = 1;
    // When set, accumulates heat sum_k Tr(D_k(rho) H_heat) by trapezoid on
    // the integration grid.
    std::optional<MatX> heat_observable;
    double positivity_abort = 1e-8;
};

struct DensitySeries {
    std::vector<double> t;
    std::vector<MatX> rho;
    std::vector<double> heat;  // filled when heat_observable was set
};

inline double dissipative_heat_flow(const LindbladModel& m, const MatX& rho, const MatX& h) {
    double q = 0.0;
    for (const auto& L : m.jumps) q += trace_with(dissipator(L, rho), h).real();
    return q;
}

// Fixed-step RK4 integration of the master equation. Serves as the dense
// oracle for the stochastic machinery. Aborts when the state leaves the
// positive cone beyond tolerance.
inline DensitySeries lindblad_propagate(const LindbladModel& m, const MatX& rho0,
                                        double t_end, const LindbladOptions& opt) {
    if (opt.dt <= 0) throw ConfigError("lindblad dt must be positive");
    long nsteps = std::lround(t_end / opt.dt);
    if (t_end > 0 && nsteps < 1) nsteps = 1;

    DensitySeries out;
    MatX rho = rho0;
    double heat = 0.0;
    double flow_prev = opt.heat_observable
                           ? dissipative_heat_flow(m, rho, *opt.heat_observable)
                           : 0.0;

    auto record = [&](double t) {
        Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (rho + rho.adjoint()),
                                               Eigen::EigenvaluesOnly);
        double lo = es.eigenvalues().minCoeff();
        if (lo < -opt.positivity_abort) {
            std::ostringstream msg;
            msg << "lindblad propagation lost positivity at t=" << t
                << " (min eigenvalue " << lo << "); reduce dt";
            throw Error(msg.str());
        }
        if (std::abs(rho.trace().real() - rho0.trace().real()) > 1e-8)
            throw Error("lindblad propagation lost trace normalization");
        out.t.push_back(t);
        out.rho.push_back(rho);
        if (opt.heat_observable) out.heat.push_back(heat);
    };

    record(0.0);
    for (long s = 1; s <= nsteps; ++s) {
        MatX k1 = lindblad_rhs(m, rho);
        MatX k2 = lindblad_rhs(m, rho + (0.5 * opt.dt) * k1);
        MatX k3 = lindblad_rhs(m, rho + (0.5 * opt.dt) * k2);
        MatX k4 = lindblad_rhs(m, rho + opt.dt * k3);
        rho += (opt.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (opt.heat_observable) {
            double flow = dissipative_heat_flow(m, rho, *opt.heat_observable);
            heat += 0.5 * opt.dt * (flow_prev + flow);
            flow_prev = flow;
        }
        if (s % opt.output_stride == 0 || s == nsteps) record(s * opt.dt);
    }
    return out;
}

}  // namespace sepdyn
