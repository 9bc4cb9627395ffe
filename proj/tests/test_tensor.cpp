#include "test_helpers.hpp"

#include "sepdyn/qubits.hpp"
#include "sepdyn/small_expm.hpp"

using namespace sepdyn;
using namespace testutil;
using Catch::Approx;

TEST_CASE("index convention: first subsystem varies slowest", "[tensor]") {
    auto lay = SubsystemLayout::qubits(2);
    MatX z0 = embed(sigma_z(), lay, 0);
    REQUIRE(z0(0, 0) == cd(1, 0));
    REQUIRE(z0(1, 1) == cd(1, 0));
    REQUIRE(z0(2, 2) == cd(-1, 0));
    REQUIRE(z0(3, 3) == cd(-1, 0));
    REQUIRE(lay.stride(0) == 2);
    REQUIRE(lay.stride(1) == 1);
}

TEST_CASE("tensor product basics", "[tensor]") {
    MatX id = MatX::Identity(2, 2);
    REQUIRE(max_abs(tensor_product({id, id}) - MatX::Identity(4, 4)) == 0.0);

    VecX e11 = basis_ket(3, 4);
    VecX out = tensor_product({sigma_z(), id}) * e11;
    REQUIRE(max_abs(out + e11) < 1e-15);

    out = tensor_product({sigma_x(), sigma_x()}) * basis_ket(0, 4);
    REQUIRE(max_abs(out - basis_ket(3, 4)) < 1e-15);

    REQUIRE_THROWS_AS(tensor_product({}), DimensionMismatch);
}

TEST_CASE("kronecker associativity and mixed product", "[tensor]") {
    for (int rep = 0; rep < 5; ++rep) {
        MatX a = random_matrix(2), b = random_matrix(3), c = random_matrix(2),
             d = random_matrix(3);
        REQUIRE(max_abs(kron(kron(a, b), c) - kron(a, kron(b, c))) < 1e-12);
        REQUIRE(max_abs(kron(a, b) * kron(c, d) - kron((a * c).eval(), (b * d).eval())) <
                1e-12);
    }
}

TEST_CASE("expectation values", "[tensor]") {
    REQUIRE(expectation(sigma_z(), basis_ket(0, 2)).real() == Approx(1.0));
    REQUIRE(expectation(sigma_x(), plus_ket()).real() == Approx(1.0));

    // coherent Gibbs-weighted superposition: <H_A> = w e^{-b w}/(1 + e^{-b w})
    double beta = 0.7, w = 1.3;
    VecX psi(2);
    psi << 1.0, std::exp(-beta * w / 2.0);
    MatX ha = w * excited_projector();
    double expect = w * std::exp(-beta * w) / (1.0 + std::exp(-beta * w));
    REQUIRE(expectation(ha, psi).real() == Approx(expect).epsilon(1e-12));

    // raw variant scales with the squared norm
    VecX scaled = 3.0 * psi;
    REQUIRE(expectation_raw(ha, scaled).real() ==
            Approx(9.0 * expectation_raw(ha, psi).real()));
    REQUIRE(expectation(ha, scaled).real() == Approx(expectation(ha, psi).real()));

    REQUIRE_THROWS_AS(expectation(ha, VecX::Zero(2).eval()), ZeroNormState);
}

TEST_CASE("partial trace", "[tensor]") {
    auto lay = SubsystemLayout::qubits(2);

    VecX bell = bell_psi_plus();
    MatX rho_bell = bell * bell.adjoint();
    MatX red = partial_trace(rho_bell, lay, {0});
    REQUIRE(max_abs(red - 0.5 * MatX::Identity(2, 2)) < 1e-14);

    MatX ra = random_density(2), rb = random_density(3);
    SubsystemLayout lay23({2, 3});
    REQUIRE(max_abs(partial_trace(kron(ra, rb), lay23, {0}) - ra) < 1e-12);
    REQUIRE(max_abs(partial_trace(kron(ra, rb), lay23, {1}) - rb) < 1e-12);

    // trace and hermiticity preserved
    MatX rho = random_density(6);
    MatX r = partial_trace(rho, lay23, {1});
    REQUIRE(r.trace().real() == Approx(1.0));
    REQUIRE(max_abs(MatX(r - r.adjoint())) < 1e-12);

    REQUIRE_THROWS_AS(partial_trace(rho, lay23, std::vector<int>{}), DimensionMismatch);
    REQUIRE_THROWS_AS(partial_trace(rho, lay23, {2}), DimensionMismatch);
}

TEST_CASE("swap at kappa t = pi/2 with equal baths exchanges no heat", "[tensor]") {
    // rho(t) = U rho0 U^+, U = exp(-i kappa V t) = cos(kt) - i sin(kt) V
    double w = 1.0, beta = 0.8;
    auto lay = SubsystemLayout::qubits(2);
    MatX V = MatX::Zero(4, 4);
    V(0, 0) = V(1, 2) = V(2, 1) = V(3, 3) = 1.0;
    VecX psi_a(2);
    psi_a << 1.0, std::exp(-beta * w / 2.0);
    psi_a /= psi_a.norm();
    MatX rho0 = kron((psi_a * psi_a.adjoint()).eval(), thermal_qubit(w, 1.0 / beta));
    MatX U = hermitian_propagator(V, std::numbers::pi / 2.0);
    MatX rho_t = U * rho0 * U.adjoint();
    MatX ha = w * excited_projector();
    double e0 = trace_with(partial_trace(rho0, lay, {0}), ha).real();
    double e1 = trace_with(partial_trace(rho_t, lay, {0}), ha).real();
    REQUIRE(std::abs(e1 - e0) < 1e-12);
}

TEST_CASE("reduced operator", "[tensor]") {
    auto lay = SubsystemLayout::qubits(2);
    double kappa = 1.7;
    MatX hxx = kappa * kron(sigma_x(), sigma_x());

    ProductState s({random_unit(2), basis_ket(0, 2)}, lay);
    REQUIRE(max_abs(reduced_operator(hxx, s, 0)) < 1e-14);

    ProductState sp({random_unit(2), plus_ket()}, lay);
    REQUIRE(max_abs(reduced_operator(hxx, sp, 0) - kappa * sigma_x()) < 1e-12);

    // swap sandwich: (V)_A = |psi_B><psi_B|
    MatX V = MatX::Zero(4, 4);
    V(0, 0) = V(1, 2) = V(2, 1) = V(3, 3) = 1.0;
    VecX pb = random_unit(2);
    ProductState sv({random_unit(2), pb}, lay);
    REQUIRE(max_abs(reduced_operator(V, sv, 0) - MatX(pb * pb.adjoint())) < 1e-12);

    // strictly local operator: returns the local factor exactly
    MatX hloc = random_hermitian(2);
    SubsystemLayout lay3({2, 3, 2});
    ProductState s3 = random_product(lay3);
    REQUIRE(max_abs(reduced_operator(embed(hloc, lay3, 0), s3, 0) - hloc) < 1e-12);

    // invariance under rescaling of any local factor
    MatX O = random_matrix(12);
    MatX r1 = reduced_operator(O, s3, 1);
    ProductState s3s = s3;
    s3s.locals[0] *= cd(0.3, -2.1);
    s3s.locals[2] *= cd(-5.0, 0.7);
    REQUIRE(max_abs(reduced_operator(O, s3s, 1) - r1) < 1e-10);

    // degenerate sandwich
    ProductState dead({VecX::Zero(2).eval(), random_unit(2)}, lay);
    REQUIRE_THROWS_AS(reduced_operator(hxx, dead, 1), DegenerateSandwich);
}

TEST_CASE("constrained hamiltonian", "[tensor]") {
    auto lay = SubsystemLayout::qubits(2);
    MatX id = MatX::Identity(2, 2);

    // local H: H_ms = H
    MatX ha = random_hermitian(2), hb = random_hermitian(2);
    MatX hloc = kron(ha, id) + kron(id, hb);
    ProductState s = random_product(lay);
    REQUIRE(max_abs(constrained_hamiltonian(hloc, s) - hloc) < 1e-12);

    double kappa = 0.9;
    MatX hxx = kappa * kron(sigma_x(), sigma_x());
    ProductState s00({basis_ket(0, 2), basis_ket(0, 2)}, lay);
    REQUIRE(max_abs(constrained_hamiltonian(hxx, s00)) < 1e-14);

    ProductState spp({plus_ket(), plus_ket()}, lay);
    MatX expect = kappa * (kron(sigma_x(), id) + kron(id, sigma_x()));
    REQUIRE(max_abs(constrained_hamiltonian(hxx, spp) - expect) < 1e-12);

    // hermiticity inherited
    MatX h3 = random_hermitian(8);
    ProductState s3 = random_product(SubsystemLayout::qubits(3));
    MatX hms = constrained_hamiltonian(h3, s3);
    REQUIRE(matrix_is_hermitian(hms, 1e-12));
}

TEST_CASE("no unitary heat identity <psi|[H_ms, H]|psi> = 0", "[tensor]") {
    for (const auto& dims : {std::vector<int>{2, 2}, {2, 3}, {2, 2, 2}}) {
        SubsystemLayout lay(dims);
        for (int rep = 0; rep < 10; ++rep) {
            MatX h = random_hermitian(lay.total());
            ProductState s = random_product(lay);
            MatX hms = constrained_hamiltonian(h, s);
            cd comm = expectation((hms * h - h * hms).eval(), s);
            REQUIRE(std::abs(comm) < 1e-10);
        }
    }
}

TEST_CASE("operator and density wrappers validate", "[tensor]") {
    auto lay = SubsystemLayout::qubits(1);
    REQUIRE_THROWS_AS(OperatorMatrix(MatX::Identity(3, 3), lay), DimensionMismatch);

    OperatorMatrix ok(sigma_x(), lay, Hermiticity::Hermitian);
    REQUIRE_NOTHROW(ok.validate());
    MatX bad = sigma_x();
    bad(0, 1) += cd(0, 0.5);
    OperatorMatrix flagged(bad, lay, Hermiticity::Hermitian);
    REQUIRE_THROWS_AS(flagged.validate(), Error);

    DensityMatrix rho(random_density(2), lay);
    REQUIRE_NOTHROW(rho.validate());
    DensityMatrix neg(-random_density(2), lay);
    REQUIRE_THROWS_AS(neg.validate(), Error);
}

TEST_CASE("product state joint and norm", "[tensor]") {
    SubsystemLayout lay({2, 3});
    ProductState s = random_product(lay, false);
    REQUIRE(s.joint().squaredNorm() == Approx(s.norm2()).epsilon(1e-12));
    REQUIRE(max_abs(VecX(s.joint() - tensor_product_vec(s.locals))) == 0.0);
}

TEST_CASE("matrix exponential agrees with the hermitian propagator", "[tensor]") {
    MatX h = random_hermitian(5);
    double t = 0.37;
    REQUIRE(max_abs(MatX(expm((-kI * t) * h) - hermitian_propagator(h, t))) < 1e-12);
    REQUIRE_THROWS_AS(hermitian_propagator(random_matrix(4), 1.0), Error);

    // exp(A+B) = exp(A)exp(B) for commuting A, B
    MatX a = random_matrix(3);
    REQUIRE(max_abs(MatX(expm(a + 2.0 * a) - expm(a) * expm(2.0 * a))) < 1e-11);
}
