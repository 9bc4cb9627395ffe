#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <vector>

#include "sepdyn/lindblad.hpp"
#include "sepdyn/philox.hpp"
#include "sepdyn/product_state.hpp"
#include "sepdyn/small_expm.hpp"

namespace sepdyn {

enum class JumpRule { Segment, PerStep };
enum class McwfMode { Constrained, Unconstrained };

struct McwfConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    long n_traj = 1;
    uint64_t seed = 0;
    double lambda_factor = 10.0;  // c in lambda_k = c * ||L_k||; 0 disables the shift
    JumpRule jump_rule = JumpRule::Segment;
    McwfMode mode = McwfMode::Constrained;
    int output_stride = 1;

    void validate() const {
        if (dt <= 0) throw ConfigError("mcwf dt must be positive");
        if (t_end <= 0) throw ConfigError("mcwf t_end must be positive");
        if (n_traj < 1) throw ConfigError("mcwf needs at least one trajectory");
        if (lambda_factor < 0) throw ConfigError("lambda factor must be >= 0");
        if (output_stride < 1) throw ConfigError("output stride must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Reference-level operations (general, Eigen-based). The trajectory engine
// below replicates these on flat buffers; unit tests pin the two together.
// ---------------------------------------------------------------------------

// Non-Hermitian generator of the deterministic constrained segments,
//   H_hat = i(n-1)/2 sum_k <L_k^+L_k> 1
//         + sum_d embed( (H)_d - i/2 sum_k (L_k^+L_k)_d, d ),
// with every expectation taken in the normalized supplied state.
inline MatX effective_hamiltonian_constrained(const LindbladModel& m, const ProductState& s) {
    if (s.layout != m.layout) throw DimensionMismatch("state layout does not match model");
    int n = s.num_parts();
    MatX ldl_sum = MatX::Zero(m.dim(), m.dim());
    for (const auto& L : m.jumps) ldl_sum += (L.adjoint() * L).eval();
    MatX out = (kI * (0.5 * (n - 1)) * expectation(ldl_sum, s))
               * MatX::Identity(m.dim(), m.dim());
    for (int d = 0; d < n; ++d) {
        MatX g = reduced_operator(m.H, s, d) - (0.5 * kI) * reduced_operator(ldl_sum, s, d);
        out += embed(g, s.layout, d);
    }
    return out;
}

// ptil_k = <psi| (x)_d (L_k^+)_d (L_k)_d |psi> / |<L_k>|^{2(n-1)}, normalized
// to a distribution.
inline RVecX constrained_jump_probabilities(const LindbladModel& m, const ProductState& s) {
    if (m.jumps.empty()) throw Error("no jump operators");
    int n = s.num_parts();
    ProductState sn = s.normalized();
    RVecX ptil(m.jumps.size());
    for (size_t k = 0; k < m.jumps.size(); ++k) {
        double num = 1.0;
        for (int d = 0; d < n; ++d) {
            MatX r = reduced_operator(m.jumps[k], sn, d);
            num *= expectation((r.adjoint() * r).eval(), sn.locals[d]).real();
        }
        double e = std::abs(expectation(m.jumps[k], sn));
        double denom = std::pow(e, 2.0 * (n - 1));
        if (denom < kSandwichFloor)
            throw DegenerateSandwich("jump probability: vanishing <L>; shift the operators");
        ptil[k] = num / denom;
    }
    double tot = ptil.sum();
    if (!(tot > 0)) throw Error("all jump probabilities vanish");
    return ptil / tot;
}

// |psi> -> (x)_d (L_k)_d |psi> / <L_k>^{n-1}; the result is again an exact
// product state.
inline ProductState apply_constrained_jump(const LindbladModel& m, const ProductState& s, int k) {
    if (k < 0 || k >= static_cast<int>(m.jumps.size()))
        throw DimensionMismatch("jump index out of range");
    int n = s.num_parts();
    ProductState sn = s.normalized();
    cd e = expectation(m.jumps[k], sn);
    cd denom = std::pow(e, cd(n - 1, 0));
    if (std::abs(denom) < kSandwichFloor)
        throw DegenerateSandwich("jump: vanishing <L>; shift the operators");
    ProductState out = s;
    for (int d = 0; d < n; ++d) out.locals[d] = reduced_operator(m.jumps[k], sn, d) * s.locals[d];
    out.locals[0] /= denom;
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory engine
// ---------------------------------------------------------------------------

struct ObservableSet {
    std::vector<std::string> names;
    std::vector<MatX> ops;               // joint-space Hermitian observables
    std::vector<bool> subtract_initial;  // report O(t) - O(0) per trajectory

    size_t size() const { return ops.size(); }
};

namespace engine {

inline constexpr int kMaxParts = 4;
inline constexpr int kMaxLocal = 4;
inline constexpr int kMaxDim = 64;
inline constexpr int kMaxJumps = 32;

// exp(A) for an m x m matrix in a flat row-major buffer; same
// scaling-and-squaring Taylor kernel as sepdyn::expm.
inline void small_matexp(int m, const cd* a, cd* out) {
    double nrm = 0.0;
    for (int i = 0; i < m; ++i) {
        double row = 0.0;
        for (int j = 0; j < m; ++j) row += std::abs(a[i * m + j]);
        nrm = std::max(nrm, row);
    }
    int s = 0;
    if (nrm > 0.25) s = static_cast<int>(std::ceil(std::log2(nrm / 0.25)));
    double scale = 1.0 / std::ldexp(1.0, s);

    cd x[kMaxLocal * kMaxLocal], term[kMaxLocal * kMaxLocal], tmp[kMaxLocal * kMaxLocal];
    for (int i = 0; i < m * m; ++i) x[i] = a[i] * scale;
    for (int i = 0; i < m * m; ++i) out[i] = (i % (m + 1) == 0) ? 1.0 : 0.0;
    std::memcpy(term, out, sizeof(cd) * m * m);
    for (int k = 1; k <= 12; ++k) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                cd acc = 0;
                for (int l = 0; l < m; ++l) acc += term[i * m + l] * x[l * m + j];
                tmp[i * m + j] = acc / static_cast<double>(k);
            }
        std::memcpy(term, tmp, sizeof(cd) * m * m);
        for (int i = 0; i < m * m; ++i) out[i] += term[i];
    }
    for (int r = 0; r < s; ++r) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                cd acc = 0;
                for (int l = 0; l < m; ++l) acc += out[i * m + l] * out[l * m + j];
                tmp[i * m + j] = acc;
            }
        std::memcpy(out, tmp, sizeof(cd) * m * m);
    }
}

struct LocalJump {
    bool is_local = false;
    int part = -1;
    std::array<cd, kMaxLocal * kMaxLocal> op{};  // row-major m x m
};

// Everything state-independent, shared read-only by all trajectories.
struct Precomp {
    SubsystemLayout lay;
    int n = 0, D = 0;
    std::array<int, kMaxParts> dims{}, strides{};
    std::vector<std::vector<int>> offs;  // cofactor offsets per part
    std::vector<cd> C;                   // row-major H' - i/2 sum L'^+L'
    std::vector<std::vector<cd>> jumps;  // row-major shifted jump operators
    std::vector<LocalJump> local_jumps;
    std::vector<std::vector<cd>> obs;    // row-major observables
    std::vector<bool> obs_subtract;
    // unconstrained mode
    std::vector<cd> U_step;              // row-major expm(-i dt H_eff)
    std::vector<std::vector<cd>> LdL;    // row-major L'^+L'

    static std::vector<cd> to_rowmajor(const MatX& m) {
        std::vector<cd> out(static_cast<size_t>(m.rows() * m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                out[static_cast<size_t>(i * m.cols() + j)] = m(i, j);
        return out;
    }
};

// Detect L = 1 x ... x l x ... x 1 acting on one subsystem only.
inline LocalJump detect_local(const MatX& L, const SubsystemLayout& lay) {
    LocalJump out;
    double scale = std::max(L.cwiseAbs().maxCoeff(), 1e-300);
    for (int q = 0; q < lay.num_parts(); ++q) {
        int m = lay.dims[q], f = lay.cofactor_dim(q), sq = lay.stride(q);
        auto offs = detail::cofactor_offsets(lay, q);
        MatX cand = MatX::Zero(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) {
                cd acc = 0;
                for (int off : offs) acc += L(a * sq + off, b * sq + off);
                cand(a, b) = acc / static_cast<double>(f);
            }
        if ((L - embed(cand, lay, q)).cwiseAbs().maxCoeff() <= 1e-13 * scale) {
            out.is_local = true;
            out.part = q;
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) out.op[a * m + b] = cand(a, b);
            return out;
        }
    }
    return out;
}

inline Precomp make_precomp(const LindbladModel& shifted, const McwfConfig& cfg,
                            const ObservableSet& obs) {
    const auto& lay = shifted.layout;
    if (lay.num_parts() > kMaxParts) throw DimensionMismatch("engine supports up to 4 subsystems");
    for (int dk : lay.dims)
        if (dk > kMaxLocal) throw DimensionMismatch("engine supports local dims up to 4");
    if (lay.total() > kMaxDim) throw DimensionMismatch("engine supports joint dim up to 64");
    if (shifted.jumps.size() > kMaxJumps)
        throw DimensionMismatch("engine supports up to 32 jump operators");

    Precomp p;
    p.lay = lay;
    p.n = lay.num_parts();
    p.D = lay.total();
    for (int k = 0; k < p.n; ++k) {
        p.dims[k] = lay.dims[k];
        p.strides[k] = lay.stride(k);
        p.offs.push_back(detail::cofactor_offsets(lay, k));
    }

    MatX ldl_sum = MatX::Zero(p.D, p.D);
    for (const auto& L : shifted.jumps) ldl_sum += (L.adjoint() * L).eval();
    p.C = Precomp::to_rowmajor(shifted.H - (0.5 * kI) * ldl_sum);
    for (const auto& L : shifted.jumps) {
        p.jumps.push_back(Precomp::to_rowmajor(L));
        p.local_jumps.push_back(detect_local(L, lay));
        p.LdL.push_back(Precomp::to_rowmajor((L.adjoint() * L).eval()));
    }
    for (const auto& o : obs.ops) p.obs.push_back(Precomp::to_rowmajor(o));
    p.obs_subtract.assign(obs.subtract_initial.begin(), obs.subtract_initial.end());

    if (cfg.mode == McwfMode::Unconstrained) {
        MatX heff = shifted.H - (0.5 * kI) * ldl_sum;
        p.U_step = Precomp::to_rowmajor(expm((-kI * cfg.dt) * heff));
    }
    return p;
}

// Mutable per-trajectory state. Locals are kept unit-normalized; the survival
// norm is tracked separately in log_norm2.
struct Workspace {
    std::array<std::array<cd, kMaxLocal>, kMaxParts> loc{};
    std::array<cd, kMaxDim> joint{};  // unconstrained mode state / scratch
    double log_norm2 = 0.0;
    long jumps = 0;

    std::array<cd, kMaxDim> w{};                              // cofactor weights
    std::array<cd, kMaxDim * kMaxLocal> U{};                  // contraction scratch
    std::array<std::array<cd, kMaxLocal * kMaxLocal>, kMaxParts> G{};
    std::array<std::array<cd, kMaxLocal>, kMaxParts> loc_save{};
    std::array<cd, kMaxJumps * kMaxParts * kMaxLocal * kMaxLocal> jump_red{};
};

inline void set_initial(Workspace& ws, const Precomp& p, const ProductState& s0, bool joint_mode) {
    ProductState sn = s0.normalized();
    for (int k = 0; k < p.n; ++k)
        for (int i = 0; i < p.dims[k]; ++i) ws.loc[k][i] = sn.locals[k][i];
    if (joint_mode) {
        VecX j = sn.joint();
        j /= j.norm();
        for (int i = 0; i < p.D; ++i) ws.joint[i] = j[i];
    }
    ws.log_norm2 = 0.0;
    ws.jumps = 0;
}

// Cofactor weights for subsystem d from the current locals.
inline void cofactor_weights(const Precomp& p, const Workspace& ws, int d, cd* w, int& f_out) {
    int f = p.D / p.dims[d];
    for (int r = 0; r < f; ++r) w[r] = cd(1.0, 0.0);
    int repeat = 1;
    for (int j = p.n - 1; j >= 0; --j) {
        if (j == d) continue;
        int dj = p.dims[j];
        for (int r = 0; r < f; ++r) w[r] *= ws.loc[j][(r / repeat) % dj];
        repeat *= dj;
    }
    f_out = f;
}

// Reduced operator of the row-major joint matrix `op` on subsystem d,
// assuming unit-normalized locals. Result row-major m x m in `out`.
inline void reduced_into(const Precomp& p, Workspace& ws, const cd* op, int d, cd* out) {
    int m = p.dims[d], sd = p.strides[d];
    const auto& offs = p.offs[static_cast<size_t>(d)];
    int f;
    cofactor_weights(p, ws, d, ws.w.data(), f);
    cd* U = ws.U.data();
    for (int row = 0; row < p.D; ++row)
        for (int b = 0; b < m; ++b) {
            cd acc = 0;
            const cd* oprow = op + static_cast<size_t>(row) * p.D;
            for (int r = 0; r < f; ++r) acc += oprow[b * sd + offs[r]] * ws.w[r];
            U[row * m + b] = acc;
        }
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            cd acc = 0;
            for (int r = 0; r < f; ++r) acc += std::conj(ws.w[r]) * U[(a * sd + offs[r]) * m + b];
            out[a * m + b] = acc;
        }
}

inline cd local_expect(const cd* op, const cd* v, int m) {
    cd acc = 0;
    for (int i = 0; i < m; ++i) {
        cd row = 0;
        for (int j = 0; j < m; ++j) row += op[i * m + j] * v[j];
        acc += std::conj(v[i]) * row;
    }
    return acc;
}

// One deterministic two-stage midpoint step with the non-Hermitian
// constrained generator; updates locals (renormalized) and log_norm2.
inline void constrained_det_step(const Precomp& p, Workspace& ws, double dt) {
    // stage 1: generator at the current state, evolve a scratch copy dt/2
    std::array<std::array<cd, kMaxLocal>, kMaxParts> half;
    for (int d = 0; d < p.n; ++d) reduced_into(p, ws, p.C.data(), d, ws.G[d].data());
    for (int d = 0; d < p.n; ++d) {
        int m = p.dims[d];
        cd B[kMaxLocal * kMaxLocal], E[kMaxLocal * kMaxLocal];
        for (int i = 0; i < m * m; ++i) B[i] = -kI * (0.5 * dt) * ws.G[d][i];
        small_matexp(m, B, E);
        double n2 = 0;
        for (int i = 0; i < m; ++i) {
            cd acc = 0;
            for (int j = 0; j < m; ++j) acc += E[i * m + j] * ws.loc[d][j];
            half[d][i] = acc;
            n2 += std::norm(acc);
        }
        double inv = 1.0 / std::sqrt(n2);
        for (int i = 0; i < m; ++i) half[d][i] *= inv;
    }

    // stage 2: generator at the midpoint state, evolve the original locals dt
    std::swap(ws.loc, half);  // ws.loc = midpoint for the contraction
    for (int d = 0; d < p.n; ++d) reduced_into(p, ws, p.C.data(), d, ws.G[d].data());
    // <M> = -2 Im <C> on the midpoint state (H' expectation is real)
    double expM = -2.0 * local_expect(ws.G[0].data(), ws.loc[0].data(), p.dims[0]).imag();
    std::swap(ws.loc, half);  // back to the pre-step locals

    double log_fac = dt * (p.n - 1) * expM;
    for (int d = 0; d < p.n; ++d) {
        int m = p.dims[d];
        cd B[kMaxLocal * kMaxLocal], E[kMaxLocal * kMaxLocal];
        for (int i = 0; i < m * m; ++i) B[i] = -kI * dt * ws.G[d][i];
        small_matexp(m, B, E);
        double n2 = 0;
        cd next[kMaxLocal];
        for (int i = 0; i < m; ++i) {
            cd acc = 0;
            for (int j = 0; j < m; ++j) acc += E[i * m + j] * ws.loc[d][j];
            next[i] = acc;
            n2 += std::norm(acc);
        }
        if (!(n2 > 1e-300)) throw Error("constrained step collapsed a local factor");
        double inv = 1.0 / std::sqrt(n2);
        for (int i = 0; i < m; ++i) ws.loc[d][i] = next[i] * inv;
        log_fac += std::log(n2);
    }
    ws.log_norm2 += log_fac;
}

// Quantum jump: pick k from ptil, map every local by (L_k)_d, renormalize.
inline void constrained_jump(const Precomp& p, Workspace& ws, Philox4x32& rng) {
    int K = static_cast<int>(p.jumps.size());
    double ptil[kMaxJumps];
    // reduced jump operators stashed per (k); the local fast path skips them
    cd* red = ws.jump_red.data();
    double tot = 0.0;
    for (int k = 0; k < K; ++k) {
        const auto& lj = p.local_jumps[static_cast<size_t>(k)];
        if (lj.is_local) {
            int m = p.dims[lj.part];
            cd l2[kMaxLocal * kMaxLocal];
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) {
                    cd acc = 0;
                    for (int l = 0; l < m; ++l)
                        acc += std::conj(lj.op[l * m + i]) * lj.op[l * m + j];
                    l2[i * m + j] = acc;
                }
            ptil[k] = local_expect(l2, ws.loc[lj.part].data(), m).real();
        } else {
            double num = 1.0;
            cd e{};
            for (int d = 0; d < p.n; ++d) {
                int m = p.dims[d];
                cd* rd = red + (k * kMaxParts + d) * kMaxLocal * kMaxLocal;
                reduced_into(p, ws, p.jumps[static_cast<size_t>(k)].data(), d, rd);
                cd r2[kMaxLocal * kMaxLocal];
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j) {
                        cd acc = 0;
                        for (int l = 0; l < m; ++l) acc += std::conj(rd[l * m + i]) * rd[l * m + j];
                        r2[i * m + j] = acc;
                    }
                num *= local_expect(r2, ws.loc[d].data(), m).real();
                if (d == 0) e = local_expect(rd, ws.loc[0].data(), p.dims[0]);
            }
            double denom = std::pow(std::abs(e), 2.0 * (p.n - 1));
            if (denom < kSandwichFloor)
                throw Error("constrained jump: vanishing <L>; increase lambda factor");
            ptil[k] = num / denom;
        }
        tot += ptil[k];
    }
    if (!(tot > 0)) throw Error("constrained jump: all probabilities vanish");

    double u = rng.next_unit() * tot;
    int pick = 0;
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
        acc += ptil[k];
        if (u <= acc || k == K - 1) {
            pick = k;
            break;
        }
    }

    const auto& lj = p.local_jumps[static_cast<size_t>(pick)];
    if (lj.is_local) {
        int q = lj.part, m = p.dims[q];
        cd next[kMaxLocal];
        double n2 = 0;
        for (int i = 0; i < m; ++i) {
            cd a = 0;
            for (int j = 0; j < m; ++j) a += lj.op[i * m + j] * ws.loc[q][j];
            next[i] = a;
            n2 += std::norm(a);
        }
        if (!(n2 > 1e-300)) throw Error("constrained jump annihilated the state");
        double inv = 1.0 / std::sqrt(n2);
        for (int i = 0; i < m; ++i) ws.loc[q][i] = next[i] * inv;
    } else {
        for (int d = 0; d < p.n; ++d) {
            int m = p.dims[d];
            const cd* rd = red + (pick * kMaxParts + d) * kMaxLocal * kMaxLocal;
            cd next[kMaxLocal];
            double n2 = 0;
            for (int i = 0; i < m; ++i) {
                cd a = 0;
                for (int j = 0; j < m; ++j) a += rd[i * m + j] * ws.loc[d][j];
                next[i] = a;
                n2 += std::norm(a);
            }
            if (!(n2 > 1e-300)) throw Error("constrained jump annihilated a local factor");
            double inv = 1.0 / std::sqrt(n2);
            for (int i = 0; i < m; ++i) ws.loc[d][i] = next[i] * inv;
        }
    }
    ws.log_norm2 = 0.0;
    ++ws.jumps;
}

inline void build_joint(const Precomp& p, Workspace& ws) {
    int len = p.dims[0];
    for (int i = 0; i < len; ++i) ws.joint[i] = ws.loc[0][i];
    for (int k = 1; k < p.n; ++k) {
        int m = p.dims[k];
        for (int i = len - 1; i >= 0; --i) {
            cd v = ws.joint[i];
            for (int j = m - 1; j >= 0; --j) ws.joint[i * m + j] = v * ws.loc[k][j];
        }
        len *= m;
    }
}

inline cd joint_expect(const cd* op, const cd* v, int D) {
    cd acc = 0;
    for (int i = 0; i < D; ++i) {
        cd row = 0;
        const cd* r = op + static_cast<size_t>(i) * D;
        for (int j = 0; j < D; ++j) row += r[j] * v[j];
        acc += std::conj(v[i]) * row;
    }
    return acc;
}

// unconstrained pieces -------------------------------------------------------

inline void unconstrained_det_step(const Precomp& p, Workspace& ws) {
    cd next[kMaxDim];
    double n2 = 0;
    for (int i = 0; i < p.D; ++i) {
        cd acc = 0;
        const cd* row = p.U_step.data() + static_cast<size_t>(i) * p.D;
        for (int j = 0; j < p.D; ++j) acc += row[j] * ws.joint[j];
        next[i] = acc;
        n2 += std::norm(acc);
    }
    if (!(n2 > 1e-300)) throw Error("mcwf step collapsed the state");
    double inv = 1.0 / std::sqrt(n2);
    for (int i = 0; i < p.D; ++i) ws.joint[i] = next[i] * inv;
    ws.log_norm2 += std::log(n2);
}

inline void unconstrained_jump(const Precomp& p, Workspace& ws, Philox4x32& rng) {
    int K = static_cast<int>(p.jumps.size());
    double wgt[kMaxJumps];
    double tot = 0.0;
    for (int k = 0; k < K; ++k) {
        wgt[k] = joint_expect(p.LdL[static_cast<size_t>(k)].data(), ws.joint.data(), p.D).real();
        tot += wgt[k];
    }
    if (!(tot > 0)) throw Error("jump weights vanish");
    double u = rng.next_unit() * tot;
    int pick = 0;
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
        acc += wgt[k];
        if (u <= acc || k == K - 1) {
            pick = k;
            break;
        }
    }
    cd next[kMaxDim];
    double n2 = 0;
    const cd* L = p.jumps[static_cast<size_t>(pick)].data();
    for (int i = 0; i < p.D; ++i) {
        cd a = 0;
        const cd* row = L + static_cast<size_t>(i) * p.D;
        for (int j = 0; j < p.D; ++j) a += row[j] * ws.joint[j];
        next[i] = a;
        n2 += std::norm(a);
    }
    if (!(n2 > 1e-300)) throw Error("jump annihilated the state");
    double inv = 1.0 / std::sqrt(n2);
    for (int i = 0; i < p.D; ++i) ws.joint[i] = next[i] * inv;
    ws.log_norm2 = 0.0;
    ++ws.jumps;
}

}  // namespace engine

struct TrajectorySeries {
    std::vector<double> t;
    Eigen::MatrixXd samples;  // n_out x n_obs
    long jumps = 0;
    std::vector<MatX> rho;  // |psi><psi| at the sample times (when requested)
};

namespace engine {

// Full single-trajectory run; the shared driver and the standalone API both
// land here. Branch selection for mixed initial states consumes the first
// random draw.
inline TrajectorySeries run_one(const Precomp& p, const std::vector<WeightedBranch>& branches,
                                const McwfConfig& cfg, uint64_t traj_index, bool record_rho) {
    Philox4x32 rng(cfg.seed, traj_index);

    const ProductState* init = &branches[0].state;
    if (branches.size() > 1) {
        double u = rng.next_unit();
        double acc = 0.0;
        for (const auto& b : branches) {
            acc += b.weight;
            if (u <= acc) {
                init = &b.state;
                break;
            }
            init = &b.state;
        }
    }

    bool joint_mode = (cfg.mode == McwfMode::Unconstrained);
    Workspace ws;
    set_initial(ws, p, *init, joint_mode);

    long nsteps = std::lround(cfg.t_end / cfg.dt);
    if (nsteps < 1) nsteps = 1;
    long n_out = 1;
    for (long m = 1; m <= nsteps; ++m)
        if (m % cfg.output_stride == 0 || m == nsteps) ++n_out;

    TrajectorySeries out;
    out.t.reserve(static_cast<size_t>(n_out));
    out.samples.resize(n_out, static_cast<Eigen::Index>(p.obs.size()));

    std::vector<double> baseline(p.obs.size(), 0.0);
    long row = 0;
    auto sample = [&](double t) {
        if (!joint_mode) build_joint(p, ws);
        for (size_t o = 0; o < p.obs.size(); ++o) {
            double v = joint_expect(p.obs[o].data(), ws.joint.data(), p.D).real();
            if (p.obs_subtract[o]) {
                if (row == 0) baseline[o] = v;
                v -= baseline[o];
            }
            out.samples(row, static_cast<Eigen::Index>(o)) = v;
        }
        if (record_rho) {
            MatX r(p.D, p.D);
            for (int i = 0; i < p.D; ++i)
                for (int j = 0; j < p.D; ++j)
                    r(i, j) = ws.joint[i] * std::conj(ws.joint[j]);
            out.rho.push_back(std::move(r));
        }
        out.t.push_back(t);
        ++row;
    };

    sample(0.0);
    double log_r = std::log(rng.next_unit());
    for (long m = 1; m <= nsteps; ++m) {
        if (cfg.jump_rule == JumpRule::Segment) {
            if (ws.log_norm2 <= log_r) {
                if (joint_mode)
                    unconstrained_jump(p, ws, rng);
                else
                    constrained_jump(p, ws, rng);
                log_r = std::log(rng.next_unit());
            } else {
                if (joint_mode)
                    unconstrained_det_step(p, ws);
                else
                    constrained_det_step(p, ws, cfg.dt);
            }
        } else {  // PerStep: tentative step, fresh r per step, jump from the
                  // pre-step state when the survival norm loses the draw
            ws.loc_save = ws.loc;
            std::array<cd, kMaxDim> joint_save{};
            if (joint_mode) joint_save = ws.joint;
            ws.log_norm2 = 0.0;
            if (joint_mode)
                unconstrained_det_step(p, ws);
            else
                constrained_det_step(p, ws, cfg.dt);
            double survival = std::exp(ws.log_norm2);
            double r = rng.next_unit();
            if (survival > r) {
                ws.log_norm2 = 0.0;
            } else {
                ws.loc = ws.loc_save;
                if (joint_mode) ws.joint = joint_save;
                ws.log_norm2 = 0.0;
                if (joint_mode)
                    unconstrained_jump(p, ws, rng);
                else
                    constrained_jump(p, ws, rng);
            }
        }
        if (m % cfg.output_stride == 0 || m == nsteps) sample(m * cfg.dt);
    }
    out.jumps = ws.jumps;
    return out;
}

}  // namespace engine

// Prepare the model the engine actually runs: apply the lambda shift when
// requested and keep the caller's H out of it (observables always use the
// physical operators).
inline LindbladModel prepare_shifted(const LindbladModel& model, const McwfConfig& cfg) {
    if (cfg.lambda_factor > 0 && !model.jumps.empty())
        return shift_operators(model, default_shift(model, cfg.lambda_factor));
    return model;
}

// Single stochastic trajectory (spec-level operation). `model` holds the
// physical operators; the shift is applied internally per cfg.lambda_factor.
inline TrajectorySeries mcwf_run_trajectory(const LindbladModel& model,
                                            const std::vector<WeightedBranch>& branches,
                                            const McwfConfig& cfg, uint64_t traj_index,
                                            const ObservableSet& obs, bool record_rho = false) {
    cfg.validate();
    LindbladModel shifted = prepare_shifted(model, cfg);
    engine::Precomp p = engine::make_precomp(shifted, cfg, obs);
    return engine::run_one(p, branches, cfg, traj_index, record_rho);
}

}  // namespace sepdyn
