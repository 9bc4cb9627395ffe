#pragma once

#include <atomic>
#include <mutex>
#include <thread>

#include "sepdyn/mcwf.hpp"

namespace sepdyn {

struct TrajectoryEnsemble {
    std::vector<double> t;
    std::vector<std::string> names;
    Eigen::MatrixXd mean;     // n_out x n_obs
    Eigen::MatrixXd stderr_;  // sample stddev / sqrt(n_traj)
    long n_traj = 0;
    uint64_t seed = 0;
    double dt = 0;
    unsigned long long total_jumps = 0;
    double mean_jumps = 0;
    std::vector<MatX> mean_rho;  // ensemble-averaged state (when accumulated)
};

// Pointwise mean and standard error over explicit trajectories (Appendix-style
// "repeat and take the average"). The parallel driver below reproduces this
// aggregation with a fixed chunked summation order.
inline TrajectoryEnsemble ensemble_average(const std::vector<TrajectorySeries>& trajs) {
    if (trajs.empty()) throw Error("empty ensemble");
    const auto& t0 = trajs[0].t;
    for (const auto& tr : trajs)
        if (tr.t != t0) throw Error("ensemble trajectories disagree on time grids");
    long J = static_cast<long>(trajs.size());
    Eigen::Index n_out = trajs[0].samples.rows(), n_obs = trajs[0].samples.cols();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n_out, n_obs);
    Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(n_out, n_obs);
    unsigned long long jumps = 0;
    for (const auto& tr : trajs) {
        sum += tr.samples;
        sumsq += tr.samples.cwiseProduct(tr.samples);
        jumps += static_cast<unsigned long long>(tr.jumps);
    }
    TrajectoryEnsemble out;
    out.t = t0;
    out.n_traj = J;
    out.total_jumps = jumps;
    out.mean_jumps = static_cast<double>(jumps) / static_cast<double>(J);
    out.mean = sum / static_cast<double>(J);
    if (J > 1) {
        Eigen::MatrixXd var =
            (sumsq - sum.cwiseProduct(sum) / static_cast<double>(J)) / static_cast<double>(J - 1);
        out.stderr_ = var.cwiseMax(0.0).cwiseSqrt() / std::sqrt(static_cast<double>(J));
    } else {
        out.stderr_ = Eigen::MatrixXd::Zero(n_out, n_obs);
    }
    return out;
}

namespace engine {

// Trajectories are grouped into fixed chunks of 256; each chunk is summed
// sequentially in trajectory order by whichever worker claims it, and chunk
// partials are merged in chunk order afterwards. The aggregate is therefore
// bit-identical for any worker count.
inline constexpr long kChunk = 256;

struct ChunkAccum {
    Eigen::MatrixXd sum, sumsq;
    std::vector<MatX> rho_sum;
    unsigned long long jumps = 0;
    bool used = false;
};

}  // namespace engine

// Run cfg.n_traj trajectories of the physical `model` (shift applied
// internally), averaging the observables. Deterministic in (seed, n_traj)
// for any `jobs`.
inline TrajectoryEnsemble run_ensemble(const LindbladModel& model,
                                       const std::vector<WeightedBranch>& branches,
                                       const McwfConfig& cfg, const ObservableSet& obs,
                                       int jobs = 0, bool accumulate_rho = false) {
    cfg.validate();
    if (branches.empty()) throw Error("no initial state");
    LindbladModel shifted = prepare_shifted(model, cfg);
    engine::Precomp p = engine::make_precomp(shifted, cfg, obs);

    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;

    long n_chunks = (cfg.n_traj + engine::kChunk - 1) / engine::kChunk;
    std::vector<engine::ChunkAccum> chunks(static_cast<size_t>(n_chunks));
    std::atomic<long> next{0};
    std::atomic<bool> failed{false};
    std::string error_msg;
    std::mutex error_mu;

    auto worker = [&]() {
        try {
            for (;;) {
                long c = next.fetch_add(1);
                if (c >= n_chunks || failed.load()) return;
                auto& acc = chunks[static_cast<size_t>(c)];
                long lo = c * engine::kChunk;
                long hi = std::min(cfg.n_traj, lo + engine::kChunk);
                for (long i = lo; i < hi; ++i) {
                    TrajectorySeries ts =
                        engine::run_one(p, branches, cfg, static_cast<uint64_t>(i),
                                        accumulate_rho);
                    if (!acc.used) {
                        acc.sum = ts.samples;
                        acc.sumsq = ts.samples.cwiseProduct(ts.samples);
                        if (accumulate_rho) acc.rho_sum = ts.rho;
                        acc.jumps = static_cast<unsigned long long>(ts.jumps);
                        acc.used = true;
                    } else {
                        acc.sum += ts.samples;
                        acc.sumsq += ts.samples.cwiseProduct(ts.samples);
                        if (accumulate_rho)
                            for (size_t s = 0; s < ts.rho.size(); ++s)
                                acc.rho_sum[s] += ts.rho[s];
                        acc.jumps += static_cast<unsigned long long>(ts.jumps);
                    }
                }
            }
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> g(error_mu);
            failed.store(true);
            if (error_msg.empty()) error_msg = e.what();
        }
    };

    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed.load()) throw Error("trajectory failed: " + error_msg);

    TrajectoryEnsemble out;
    long nsteps = std::lround(cfg.t_end / cfg.dt);
    if (nsteps < 1) nsteps = 1;
    out.t.push_back(0.0);
    for (long m = 1; m <= nsteps; ++m)
        if (m % cfg.output_stride == 0 || m == nsteps) out.t.push_back(m * cfg.dt);
    out.names = obs.names;
    out.seed = cfg.seed;
    out.dt = cfg.dt;
    out.n_traj = cfg.n_traj;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out.t.size()),
                                                static_cast<Eigen::Index>(obs.size()));
    Eigen::MatrixXd sumsq = sum;
    std::vector<MatX> rho_sum;
    unsigned long long jumps = 0;
    for (auto& c : chunks) {
        if (!c.used) continue;
        sum += c.sum;
        sumsq += c.sumsq;
        jumps += c.jumps;
        if (accumulate_rho) {
            if (rho_sum.empty())
                rho_sum = std::move(c.rho_sum);
            else
                for (size_t s = 0; s < rho_sum.size(); ++s) rho_sum[s] += c.rho_sum[s];
        }
    }
    double J = static_cast<double>(cfg.n_traj);
    out.mean = sum / J;
    if (cfg.n_traj > 1) {
        Eigen::MatrixXd var = (sumsq - sum.cwiseProduct(sum) / J) / (J - 1.0);
        out.stderr_ = var.cwiseMax(0.0).cwiseSqrt() / std::sqrt(J);
    } else {
        out.stderr_ = Eigen::MatrixXd::Zero(sum.rows(), sum.cols());
    }
    out.total_jumps = jumps;
    out.mean_jumps = static_cast<double>(jumps) / J;
    if (accumulate_rho)
        for (auto& r : rho_sum) out.mean_rho.push_back(r / J);
    return out;
}

}  // namespace sepdyn
