#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

#include "ohmsim/qsim.hpp"
#include "ohmsim/rng.hpp"
#include "ohmsim/statevector.hpp"

using namespace ohmsim;

namespace {

StateVector plus_state() {
    Eigen::VectorXcd a(2);
    a << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    return StateVector(a);
}

Eigen::MatrixXcd pauli_x() {
    Eigen::MatrixXcd X(2, 2);
    X << 0, 1, 1, 0;
    return X;
}

}  // namespace

TEST_CASE("apply_unitary preserves norm and rejects non-unitaries") {
    StateVector zero = StateVector::basis_state(2, 0);
    Unitary I(Eigen::MatrixXcd::Identity(2, 2));
    CHECK((apply_unitary(zero, I).amplitudes() - zero.amplitudes()).norm() == 0.0);

    Unitary X(pauli_x());
    StateVector one = apply_unitary(zero, X);
    CHECK(std::abs(one.amplitude(1) - Complex(1, 0)) < 1e-15);

    StateVector back = apply_unitary(one, Unitary(pauli_x().adjoint()));
    CHECK((back.amplitudes() - zero.amplitudes()).norm() < 1e-12);
    CHECK(back.norm_error() < 1e-10);

    Eigen::MatrixXcd bad = 1.5 * pauli_x();
    CHECK_THROWS_AS(Unitary(bad), QsimError);
}

TEST_CASE("round trip through a random unitary holds to 1e-12") {
    RngStream rng(8, 0);
    Eigen::MatrixXcd A(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) A(i, j) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(A);
    Eigen::MatrixXcd Q = qr.householderQ();
    Unitary U(Q), Ud(Q.adjoint().eval());

    Eigen::VectorXcd v(5);
    for (int i = 0; i < 5; ++i) v(i) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    v.normalize();
    StateVector psi(v);
    StateVector round = apply_unitary(apply_unitary(psi, U), Ud);
    CHECK((round.amplitudes() - psi.amplitudes()).norm() < 1e-12);
}

TEST_CASE("controlled rotation endpoints") {
    StateVector psi = plus_state();
    auto lam = [](int) { return 1.0; };

    StateVector all_one = controlled_rotation(psi, lam, [](double) { return 1.0; });
    // ancilla |1> branch carries everything
    CHECK(std::abs(all_one.amplitude(0)) < 1e-15);
    CHECK(std::abs(all_one.amplitude(1)) < 1e-15);
    CHECK(std::norm(all_one.amplitude(2)) + std::norm(all_one.amplitude(3)) ==
          Catch::Approx(1.0));

    StateVector all_zero = controlled_rotation(psi, lam, [](double) { return 0.0; });
    CHECK(std::norm(all_zero.amplitude(0)) + std::norm(all_zero.amplitude(1)) ==
          Catch::Approx(1.0));

    CHECK(all_one.norm_error() < 1e-10);
    CHECK_THROWS_AS(controlled_rotation(psi, lam, [](double) { return 1.5; }), QsimError);
}

TEST_CASE("controlled rotation with h = C / lambda") {
    // one populated branch with lambda = 1 and C = 1/kappa puts amplitude
    // 1/kappa on the flagged ancilla
    double kappa = 4.0;
    StateVector psi = StateVector::basis_state(2, 0);
    StateVector rot = controlled_rotation(
        psi, [](int) { return 1.0; }, [&](double l) { return (1.0 / kappa) / l; });
    CHECK(std::abs(rot.amplitude(2)) == Catch::Approx(1.0 / kappa));
}

TEST_CASE("measurement on computational states") {
    RngStream rng(3, 0);
    StateVector zero = StateVector::basis_state(2, 0);
    TrialOutcome o = measure_partition(zero, {{0}, {1}}, {"0", "1"}, rng);
    CHECK(o.outcome == 0);
    CHECK(o.probability == Catch::Approx(1.0));

    TrialOutcome h = measure_partition(plus_state(), {{0}, {1}}, {"0", "1"}, rng);
    CHECK(h.probability == Catch::Approx(0.5));
    CHECK(h.posterior.norm_error() < 1e-12);
}

TEST_CASE("measurement frequencies match analytic probabilities within 3 sigma") {
    RngStream rng(17, 4);
    Eigen::VectorXcd a(3);
    a << std::sqrt(0.5), std::sqrt(0.3), std::sqrt(0.2);
    StateVector psi(a);
    const int samples = 10000;
    std::vector<int> counts(3, 0);
    for (int k = 0; k < samples; ++k) {
        TrialOutcome o = measure_partition(psi, {{0}, {1}, {2}}, {}, rng);
        counts[static_cast<std::size_t>(o.outcome)]++;
    }
    const double probs[3] = {0.5, 0.3, 0.2};
    for (int j = 0; j < 3; ++j) {
        double expect = samples * probs[j];
        double sigma = std::sqrt(samples * probs[j] * (1 - probs[j]));
        CHECK(std::abs(counts[static_cast<std::size_t>(j)] - expect) <= 3.0 * sigma);
    }
}

TEST_CASE("projector measurement validates completeness") {
    RngStream rng(5, 0);
    Eigen::MatrixXcd P0 = Eigen::MatrixXcd::Zero(2, 2);
    P0(0, 0) = 1.0;
    CHECK_THROWS_AS(measure_projectors(plus_state(), {P0}, rng), QsimError);
    Eigen::MatrixXcd P1 = Eigen::MatrixXcd::Identity(2, 2) - P0;
    TrialOutcome o = measure_projectors(plus_state(), {P0, P1}, rng);
    CHECK(o.probability == Catch::Approx(0.5));
}

TEST_CASE("phase estimation is exact on grid phases") {
    RngStream rng(11, 0);
    // U = I: any state has phase 0
    EigenUnitary eye = eigenunitary_from_phases(Eigen::VectorXd::Zero(2));
    PhaseEstimate pe = phase_estimation(eye, plus_state(), 3, PeMode::circuit, rng);
    CHECK(pe.theta == 0.0);
    CHECK(pe.probability == Catch::Approx(1.0));

    // U = diag(1, -1) on |1>, one bit suffices
    Eigen::VectorXd ph(2);
    ph << 0.0, std::numbers::pi;
    EigenUnitary z = eigenunitary_from_phases(ph);
    PhaseEstimate pz =
        phase_estimation(z, StateVector::basis_state(2, 1), 1, PeMode::circuit, rng);
    CHECK(pz.theta == Catch::Approx(std::numbers::pi));
    CHECK(pz.probability == Catch::Approx(1.0));

    // U = diag(1, e^{2 pi i 3/8}) with t = 3
    Eigen::VectorXd ph8(2);
    ph8 << 0.0, kTau * 3.0 / 8.0;
    PhaseEstimate p8 = phase_estimation(eigenunitary_from_phases(ph8),
                                        StateVector::basis_state(2, 1), 3, PeMode::circuit, rng);
    CHECK(p8.theta == Catch::Approx(kTau * 3.0 / 8.0));
    CHECK(p8.probability == Catch::Approx(1.0));
}

TEST_CASE("phase estimation hits every dyadic phase exactly") {
    RngStream rng(13, 0);
    for (int t = 1; t <= 4; ++t) {
        int big_t = 1 << t;
        for (int j = 0; j < big_t; ++j) {
            Eigen::VectorXd ph(4);
            ph << kTau * j / big_t, 0.1, 2.0, 4.0;  // eigenstate of interest first
            EigenUnitary u = eigenunitary_from_phases(ph);
            PhaseEstimate pe =
                phase_estimation(u, StateVector::basis_state(4, 0), t, PeMode::circuit, rng);
            CHECK(pe.outcome == j);
            CHECK(pe.probability == Catch::Approx(1.0));
        }
    }
}

TEST_CASE("snap mode rounds each branch to its nearest grid phase") {
    RngStream rng(29, 0);
    Eigen::VectorXd ph(2);
    ph << 0.3, 2.7;
    EigenUnitary u = eigenunitary_from_phases(ph);
    PhaseEstimate pe = phase_estimation(u, plus_state(), 4, PeMode::snap, rng);
    int y_expected_0 = static_cast<int>(std::llround(0.3 * 16 / kTau));
    int y_expected_1 = static_cast<int>(std::llround(2.7 * 16 / kTau));
    CHECK((pe.outcome == y_expected_0 || pe.outcome == y_expected_1));
    CHECK(pe.probability == Catch::Approx(0.5));
}

TEST_CASE("eigendecompositions agree with dense operators") {
    // orthogonal: random rotation-rich matrix via QR of a random matrix
    RngStream rng(31, 0);
    Eigen::MatrixXd A(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) A(i, j) = rng.uniform(-1, 1);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Eigen::MatrixXd Q = qr.householderQ();
    EigenUnitary eo = eigenunitary_from_orthogonal(Q);
    CHECK((eo.matrix().real() - Q).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(eo.matrix().imag().cwiseAbs().maxCoeff() < 1e-9);

    // hermitian generator
    Eigen::MatrixXd H = A + A.transpose();
    EigenUnitary eh = eigenunitary_from_hermitian(H, 0.37);
    Eigen::MatrixXcd expect =
        (Complex(0, 0.37) * H.cast<Complex>()).exp();
    CHECK((eh.matrix() - expect).cwiseAbs().maxCoeff() < 1e-8);

    // general unitary with a degenerate eigenvalue
    Eigen::MatrixXcd U = Eigen::MatrixXcd::Identity(3, 3);
    U(2, 2) = std::polar(1.0, 1.2);
    EigenUnitary eg = eigenunitary_from_unitary(U);
    CHECK((eg.matrix() - U).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("amplitude estimation grid behavior") {
    RngStream rng(41, 0);
    // p = 1 is a fixed point
    AmplitudeEstimateResult one = amplitude_estimate_p(1.0, 0.1, 1.0, rng, 1);
    CHECK(one.p_hat == Catch::Approx(1.0));

    // p = sin^2(pi/8) sits on the t = 3 grid: exact outcome
    double p = std::pow(std::sin(std::numbers::pi / 8.0), 2);
    for (int k = 0; k < 20; ++k) {
        double sample = ae_sample(p, 3, rng);
        CHECK(sample == Catch::Approx(p).margin(1e-12));
    }

    // p = 0 reports zero with the flag
    AmplitudeEstimateResult z = amplitude_estimate_p(0.0, 0.1, 0.5, rng, 3);
    CHECK(z.zero_flag);
    CHECK(z.p_hat == 0.0);
}

TEST_CASE("amplitude estimation meets the relative-error guarantee") {
    // |p' - p| <= eps p in at least 2/3 of seeded trials at the canonical
    // budget; single repetition per trial
    const double eps = 0.05;
    RngStream rng(43, 0);
    for (double p : {0.1, 0.25, 0.5, 0.9}) {
        int hits = 0;
        const int trials = 100;
        for (int k = 0; k < trials; ++k) {
            AmplitudeEstimateResult r = amplitude_estimate_p(p, eps, p, rng, 1);
            if (std::abs(r.p_hat - p) <= eps * p) ++hits;
        }
        CHECK(hits >= 2 * trials / 3);
    }
}

TEST_CASE("amplitude estimation error bound across planted probabilities") {
    RngStream rng(47, 0);
    const double eps = 0.1;
    for (int k = 0; k < 20; ++k) {
        double p = 0.01 + 0.98 * (k + 0.5) / 20.0;
        int hits = 0;
        const int trials = 30;
        for (int trial = 0; trial < trials; ++trial) {
            AmplitudeEstimateResult r = amplitude_estimate_p(p, eps, p, rng, 1);
            if (std::abs(r.p_hat - p) <= eps * p) ++hits;
        }
        CHECK(hits >= 2 * trials / 3);
    }
}

TEST_CASE("amplitude estimation via a preparation closure") {
    RngStream rng(53, 0);
    auto prep = [] { return plus_state(); };
    auto good = [](int k, const StateVector&) { return k == 1; };
    int hits = 0;
    for (int k = 0; k < 100; ++k) {
        AmplitudeEstimateResult r = amplitude_estimate(prep, good, 0.05, rng, 1);
        CHECK(r.p_exact == Catch::Approx(0.5));
        CHECK(r.applications > 0);
        if (std::abs(r.p_hat - 0.5) <= 0.025) ++hits;
    }
    CHECK(hits >= 66);
}

TEST_CASE("amplitude amplification with alpha = 1 uses a single application") {
    RngStream rng(59, 0);
    auto prep = [] {
        Eigen::VectorXcd a(4);
        a << 0, 0, 0, 1;  // flag qubit (leftmost) already |1>
        return StateVector(a);
    };
    auto good = [](int k, const StateVector& psi) { return k >= psi.dim() / 2; };
    AmplifyResult r = amplitude_amplify(prep, good, 1.0, 0.1, rng);
    CHECK(r.success);
    CHECK(r.applications == 1);
    CHECK(std::abs(r.state.amplitude(3) - Complex(1, 0)) < 1e-12);
}

TEST_CASE("amplitude amplification reaches the target success rate") {
    // two-qubit preparation with p = 1/4 on the flagged branch
    auto prep = [] {
        Eigen::VectorXcd a(4);
        a << 0.5, 0.5, 0.5, 0.5;
        return StateVector(a);
    };
    auto good = [](int k, const StateVector& psi) { return k >= psi.dim() / 2; };
    const double delta = 0.1;
    int ok = 0;
    const int runs = 200;
    for (int k = 0; k < runs; ++k) {
        RngStream rng(1000 + static_cast<std::uint64_t>(k), 7);
        AmplifyResult r = amplitude_amplify(prep, good, 0.25, delta, rng);
        if (r.success) {
            ++ok;
            // posterior is the exact normalized good branch
            CHECK(std::abs(r.state.amplitude(2) - Complex(1 / std::sqrt(2.0), 0)) < 1e-12);
        }
    }
    CHECK(ok >= static_cast<int>((1.0 - delta) * runs) - 15);  // 3 sigma slack
}

TEST_CASE("amplitude amplification cost scales as the promised budget") {
    // p = alpha = 1/kappa^2: applications stay within O(kappa log(1/delta))
    for (double kappa : {2.0, 4.0, 8.0, 16.0}) {
        double alpha = 1.0 / (kappa * kappa);
        double total = 0.0;
        const int runs = 50;
        for (int k = 0; k < runs; ++k) {
            RngStream rng(77 + static_cast<std::uint64_t>(k), 9);
            AmplifySchedule s = amplitude_amplify_schedule(alpha, alpha, 0.05, rng);
            total += static_cast<double>(s.applications);
        }
        double avg = total / runs;
        CHECK(avg <= 60.0 * kappa * std::log(1.0 / 0.05));
    }
}

TEST_CASE("ancilla width helper") {
    CHECK(ancilla_bits_for(kTau / 8.0) == 3 + 2);
    CHECK(ancilla_bits_for(0.1) >= 6);
    CHECK_THROWS_AS(ancilla_bits_for(0.0), QsimError);
}
