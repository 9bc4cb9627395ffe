#include "test_helpers.hpp"

#include "sepdyn/qubits.hpp"
#include "sepdyn/thermo.hpp"

using namespace sepdyn;
using namespace testutil;
using Catch::Approx;

namespace {

LindbladModel reset_qubit(double p, double omega, double T) {
    LindbladModel m;
    m.layout = SubsystemLayout::qubits(1);
    m.H = omega * excited_projector();
    MatX tau = thermal_qubit(omega, T);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            MatX e = MatX::Zero(2, 2);
            e(i, j) = 1.0;
            m.jumps.push_back(std::sqrt(p * tau(i, i).real()) * e);
        }
    return m;
}

}  // namespace

TEST_CASE("internal energy", "[thermo]") {
    MatX rho = random_density(3);
    REQUIRE(internal_energy(rho, MatX::Zero(3, 3)) == 0.0);

    double beta = 0.6, w = 1.4;
    MatX tau = thermal_qubit(w, 1.0 / beta);
    double expect = w * std::exp(-beta * w) / (1.0 + std::exp(-beta * w));
    REQUIRE(internal_energy(tau, MatX(w * excited_projector())) == Approx(expect));

    // |11> under the battery H0: twice the sigma_z eigenvalue of |1>
    double omega = 0.8;
    MatX id = MatX::Identity(2, 2);
    MatX h0 = omega * (kron(sigma_z(), id) + kron(id, sigma_z()));
    REQUIRE(internal_energy(basis_ket(3, 4).eval(), h0) == Approx(-2.0 * omega));
}

TEST_CASE("accumulated heat and work rate", "[thermo]") {
    MatX rho = random_density(4);
    MatX h = random_hermitian(4);
    REQUIRE(accumulated_heat(rho, rho, h) == 0.0);

    REQUIRE(work_rate(rho, MatX::Zero(4, 4)) == 0.0);
    REQUIRE(work_rate(rho, h) == Approx(internal_energy(rho, h)));

    // finite-difference oracle at frozen rho: d/dt Tr(rho H(t)) = Tr(rho dH)
    MatX dh = random_hermitian(4);
    double eps = 1e-6;
    double fd = (trace_with(rho, MatX(h + eps * dh)).real() -
                 trace_with(rho, MatX(h - eps * dh)).real()) /
                (2 * eps);
    REQUIRE(work_rate(rho, dh) == Approx(fd).epsilon(1e-7));
}

TEST_CASE("free heat flow", "[thermo]") {
    // commuting jumps carry no heat
    LindbladModel deph;
    deph.layout = SubsystemLayout::qubits(2);
    MatX id = MatX::Identity(2, 2);
    deph.H = 1.3 * kron(sigma_z(), sigma_z());
    deph.jumps = {kron(sigma_z(), id) + kron(id, sigma_z())};
    for (int rep = 0; rep < 5; ++rep)
        REQUIRE(std::abs(heat_flow_free(deph, random_density(4), deph.H)) < 1e-10);

    // reset channel fixed point carries no heat
    auto reset = reset_qubit(0.4, 1.0, 2.0);
    REQUIRE(std::abs(heat_flow_free(reset, thermal_qubit(1.0, 2.0), reset.H)) < 1e-12);

    // plain decay from the excited state: -omega
    LindbladModel decay;
    decay.layout = SubsystemLayout::qubits(1);
    double w = 1.7;
    decay.H = w * excited_projector();
    decay.jumps = {sigma_minus()};
    REQUIRE(heat_flow_free(decay, excited_projector(), decay.H) == Approx(-w));
}

TEST_CASE("constrained heat flow against the reduced Kraus map", "[thermo]") {
    // Oracle: one explicit small-step of the reduced Kraus map
    //   rho' = sum_m [(K_m)_A x (K_m)_B / <K_m>] rho [h.c.] / <K_m>^*
    // with K_0 = 1 - i tau H - tau/2 sum L^+L, K_m = sqrt(tau) L_m, then
    // dQ = [Tr(rho'H) - Tr(rho H)] / tau with the normalized map.
    auto lay = SubsystemLayout::qubits(2);
    LindbladModel m;
    m.layout = lay;
    m.H = 0.7 * kron(sigma_x(), sigma_x());
    m.jumps = {random_matrix(4) + 3.0 * MatX::Identity(4, 4),
               random_matrix(4) + 2.0 * MatX::Identity(4, 4)};
    ProductState s = random_product(lay);
    MatX h_heat = random_hermitian(4);

    auto kraus_heat = [&](double tau) {
        MatX ldl = MatX::Zero(4, 4);
        for (const auto& L : m.jumps) ldl += (L.adjoint() * L).eval();
        std::vector<MatX> K = {MatX(MatX::Identity(4, 4) - kI * tau * m.H - 0.5 * tau * ldl)};
        for (const auto& L : m.jumps) K.push_back(std::sqrt(tau) * L);
        MatX rho = s.density();
        MatX out = MatX::Zero(4, 4);
        for (const auto& k : K) {
            cd e = expectation(k, s);
            MatX red = kron(reduced_operator(k, s, 0), reduced_operator(k, s, 1)) / e;
            out += red * rho * red.adjoint();
        }
        out /= out.trace().real();  // trace-preserving completion
        return (trace_with(out, h_heat).real() - trace_with(rho, h_heat).real()) / tau;
    };

    // Richardson-extrapolate tau -> 0
    double q1 = kraus_heat(1e-4), q2 = kraus_heat(5e-5);
    double oracle = 2 * q2 - q1;

    double direct = heat_flow_constrained(m, s, h_heat);
    // the rate of the trace-preserving completion subtracts Tr(L rho) <H>
    double trace_rate = 0.0;
    for (size_t k = 0; k < m.jumps.size(); ++k)
        trace_rate += constrained_dissipator(m, s, k).trace().real();
    double completed = direct - trace_rate * expectation(h_heat, s).real();
    REQUIRE(completed == Approx(oracle).margin(5e-3 * std::abs(oracle) + 1e-6));
}

TEST_CASE("entropies", "[thermo]") {
    VecX psi = random_unit(3);
    REQUIRE(von_neumann_entropy((psi * psi.adjoint()).eval()) == Approx(0.0).margin(1e-12));
    REQUIRE(von_neumann_entropy(MatX(0.5 * MatX::Identity(2, 2))) == Approx(std::log(2.0)));

    MatX rho = random_density(4);
    REQUIRE(relative_entropy(rho, rho) == Approx(0.0).margin(1e-10));
    REQUIRE(relative_entropy(ground_projector(), MatX(0.5 * MatX::Identity(2, 2))) ==
            Approx(std::log(2.0)));
    REQUIRE(std::isinf(relative_entropy(excited_projector(), ground_projector())));
    REQUIRE(relative_entropy(random_density(3), MatX(MatX::Identity(3, 3) / 3.0)) >= 0.0);
}

TEST_CASE("relative entropy contracts under the dense map", "[thermo]") {
    auto m = reset_qubit(0.6, 1.0, 1.3);
    for (int rep = 0; rep < 10; ++rep) {
        MatX a = random_density(2), b = random_density(2);
        double before = relative_entropy(a, b);
        auto ra = lindblad_propagate(m, a, 0.8, {1e-3, 1 << 20});
        auto rb = lindblad_propagate(m, b, 0.8, {1e-3, 1 << 20});
        double after = relative_entropy(ra.rho.back(), rb.rho.back());
        REQUIRE(after <= before + 1e-8);
    }
}

TEST_CASE("entropy production rate", "[thermo]") {
    auto m = reset_qubit(0.5, 1.0, 1.5);
    MatX gamma = thermal_qubit(1.0, 1.5);

    // stationary at the reference: sigma = 0
    std::vector<double> t = {0.0, 0.1, 0.2, 0.3};
    std::vector<MatX> rhos(4, gamma);
    for (double v : entropy_production_rate(t, rhos, gamma))
        REQUIRE(v == Approx(0.0).margin(1e-10));

    // relaxation from |1><1|: nonnegative production
    auto run = lindblad_propagate(m, excited_projector(), 6.0, {1e-3, 60});
    auto sigma = entropy_production_rate(run.t, run.rho, gamma);
    for (double v : sigma) REQUIRE(v >= -1e-8);
}

TEST_CASE("second law residual", "[thermo]") {
    double T = 1.5;
    auto m = reset_qubit(0.5, 1.0, T);

    // thermal steady state: residual vanishes
    std::vector<double> t = {0.0, 0.1, 0.2};
    std::vector<MatX> still(3, thermal_qubit(1.0, T));
    for (double v : second_law_residual(t, still, m, 1.0 / T, m.H))
        REQUIRE(v == Approx(0.0).margin(1e-10));

    // relaxation run
    auto run = lindblad_propagate(m, excited_projector(), 6.0, {1e-3, 60});
    for (double v : second_law_residual(run.t, run.rho, m, 1.0 / T, m.H))
        REQUIRE(v >= -1e-6);

    // free dephasing: residual reduces to Sdot >= 0
    LindbladModel deph;
    deph.layout = SubsystemLayout::qubits(2);
    MatX id = MatX::Identity(2, 2);
    deph.H = kron(sigma_z(), sigma_z());
    deph.jumps = {kron(sigma_z(), id) + kron(id, sigma_z())};
    MatX plus = (plus_ket() * plus_ket().adjoint()).eval();
    auto drun = lindblad_propagate(deph, kron(plus, plus), 1.0, {1e-3, 20});
    for (double v : second_law_residual(drun.t, drun.rho, deph, 0.7, deph.H))
        REQUIRE(v >= -1e-6);
}

TEST_CASE("time average", "[thermo]") {
    std::vector<double> t, c, s;
    double kappa = 3.0;
    for (int i = 0; i <= 20000; ++i) {
        double ti = i * 1e-2;
        t.push_back(ti);
        c.push_back(2.5);
        double x = std::sin(kappa * ti);
        s.push_back(x * x);
    }
    auto ac = time_average(t, c);
    REQUIRE(ac.front() == Approx(2.5));
    REQUIRE(ac.back() == Approx(2.5));
    auto as = time_average(t, s);
    REQUIRE(as.back() == Approx(0.5).margin(1e-2));
    REQUIRE(as.front() == Approx(0.0).margin(1e-12));
}

TEST_CASE("plateau detection and steady-state estimate", "[thermo]") {
    auto m = reset_qubit(0.5, 1.0, 1.5);
    auto run = lindblad_propagate(m, excited_projector(), 40.0, {1e-2, 100});
    MatX est = estimate_steady_state(run.t, run.rho);
    REQUIRE(est.size() > 0);
    REQUIRE(max_abs(MatX(est - thermal_qubit(1.0, 1.5))) < 1e-4);

    // an oscillating series has no plateau
    std::vector<double> t;
    std::vector<MatX> rhos;
    for (int i = 0; i <= 200; ++i) {
        double ti = 0.05 * i;
        t.push_back(ti);
        MatX r = MatX::Zero(2, 2);
        r(0, 0) = 0.5 + 0.4 * std::sin(3.0 * ti);
        r(1, 1) = 1.0 - r(0, 0).real();
        rhos.push_back(r);
    }
    REQUIRE(estimate_steady_state(t, rhos).size() == 0);
}
