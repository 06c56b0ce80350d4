#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "ohmsim/rng.hpp"
#include "ohmsim/statevector.hpp"

namespace ohmsim {

inline constexpr double kTau = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------
// Eigendecomposed unitaries
// ---------------------------------------------------------------------

// U = V diag(e^{i theta_j}) V+ with orthonormal V. Phase estimation and
// the controlled powers U^k act block-diagonally per eigenvector, which
// is what every routine here exploits.
struct EigenUnitary {
    Eigen::VectorXd phases;    // in [0, 2pi)
    Eigen::MatrixXcd vectors;  // orthonormal columns

    int dim() const { return static_cast<int>(vectors.rows()); }

    Eigen::MatrixXcd matrix() const {
        Eigen::VectorXcd d(phases.size());
        for (int j = 0; j < phases.size(); ++j) d(j) = std::polar(1.0, phases(j));
        return vectors * d.asDiagonal() * vectors.adjoint();
    }

    void validate(double tol = 1e-8) const {
        Eigen::MatrixXcd gram = vectors.adjoint() * vectors;
        double err = (gram - Eigen::MatrixXcd::Identity(gram.rows(), gram.cols()))
                         .cwiseAbs()
                         .maxCoeff();
        if (err > tol) throw QsimError("eigenbasis is not orthonormal: " + std::to_string(err));
    }
};

inline double wrap_phase(double theta) {
    double t = std::fmod(theta, kTau);
    if (t < 0) t += kTau;
    if (t >= kTau) t = 0.0;
    return t;
}

// Signed distance of a phase from pi (or any target), wrapped to (-pi, pi].
inline double phase_distance(double theta, double target) {
    return std::abs(std::remainder(theta - target, kTau));
}

inline EigenUnitary eigenunitary_from_phases(const Eigen::VectorXd& phases) {
    EigenUnitary eu;
    eu.phases = phases.unaryExpr([](double t) { return wrap_phase(t); });
    eu.vectors = Eigen::MatrixXcd::Identity(phases.size(), phases.size());
    return eu;
}

// U = e^{i H time} for real symmetric H.
inline EigenUnitary eigenunitary_from_hermitian(const Eigen::MatrixXd& H, double time = 1.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success) throw QsimError("eigensolve failed");
    EigenUnitary eu;
    eu.phases = es.eigenvalues().unaryExpr([&](double l) { return wrap_phase(l * time); });
    eu.vectors = es.eigenvectors().cast<Complex>();
    eu.validate();
    return eu;
}

// Real orthogonal Q via the real Schur form, whose basis is exactly
// orthonormal; 2x2 rotation blocks give the conjugate eigenpairs.
inline EigenUnitary eigenunitary_from_orthogonal(const Eigen::MatrixXd& Q, double tol = 1e-8) {
    Eigen::RealSchur<Eigen::MatrixXd> schur(Q);
    if (schur.info() != Eigen::Success) throw QsimError("Schur decomposition failed");
    const Eigen::MatrixXd& T = schur.matrixT();
    const Eigen::MatrixXd& U = schur.matrixU();
    int n = static_cast<int>(Q.rows());

    EigenUnitary eu;
    eu.phases.resize(n);
    eu.vectors.resize(n, n);
    const Complex iu(0.0, 1.0);
    int j = 0;
    while (j < n) {
        bool pair = (j + 1 < n) && std::abs(T(j + 1, j)) > tol;
        if (!pair) {
            double lam = T(j, j);
            eu.phases(j) = (lam >= 0.0) ? 0.0 : std::numbers::pi;
            eu.vectors.col(j) = U.col(j).cast<Complex>();
            j += 1;
        } else {
            // rotation block [[a, b], [-b, a]]; eigenpairs a +- i|b| with
            // eigenvectors (u1 +- sgn(b) i u2)/sqrt(2)
            double a = 0.5 * (T(j, j) + T(j + 1, j + 1));
            double b = T(j, j + 1), c = T(j + 1, j);
            double im = std::sqrt(std::max(0.0, -b * c));
            double theta = std::atan2(im, a);
            double sgn = (b >= 0.0) ? 1.0 : -1.0;
            Eigen::VectorXcd u1 = U.col(j).cast<Complex>();
            Eigen::VectorXcd u2 = U.col(j + 1).cast<Complex>();
            eu.phases(j) = wrap_phase(theta);
            eu.vectors.col(j) = (u1 + sgn * iu * u2) / std::sqrt(2.0);
            eu.phases(j + 1) = wrap_phase(-theta);
            eu.vectors.col(j + 1) = (u1 - sgn * iu * u2) / std::sqrt(2.0);
            j += 2;
        }
    }
    eu.validate(1e-7);
    double recon = (eu.matrix().real() - Q).cwiseAbs().maxCoeff();
    if (recon > 1e-7) {
        throw QsimError("orthogonal eigendecomposition residual " + std::to_string(recon));
    }
    return eu;
}

// Small general unitaries (diagnostics and tests): complex eigensolve,
// then re-orthonormalize within near-degenerate phase clusters.
inline EigenUnitary eigenunitary_from_unitary(const Eigen::MatrixXcd& U, double cluster_tol = 1e-7) {
    Unitary check(U);  // validates unitarity once
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(U);
    if (es.info() != Eigen::Success) throw QsimError("eigensolve failed");
    int n = static_cast<int>(U.rows());

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
    Eigen::VectorXd ph(n);
    for (int k = 0; k < n; ++k) ph(k) = wrap_phase(std::arg(es.eigenvalues()(k)));
    std::sort(order.begin(), order.end(), [&](int a, int b) { return ph(a) < ph(b); });

    EigenUnitary eu;
    eu.phases.resize(n);
    eu.vectors.resize(n, n);
    int start = 0;
    while (start < n) {
        int stop = start + 1;
        while (stop < n &&
               phase_distance(ph(order[static_cast<std::size_t>(stop)]),
                              ph(order[static_cast<std::size_t>(start)])) < cluster_tol) {
            ++stop;
        }
        // Gram-Schmidt inside the cluster
        for (int k = start; k < stop; ++k) {
            Eigen::VectorXcd v = es.eigenvectors().col(order[static_cast<std::size_t>(k)]);
            for (int l = start; l < k; ++l) {
                v -= eu.vectors.col(l).dot(v) * eu.vectors.col(l);
            }
            double nv = v.norm();
            if (nv < 1e-12) throw QsimError("degenerate eigenvector cluster collapsed");
            eu.vectors.col(k) = v / nv;
            eu.phases(k) = ph(order[static_cast<std::size_t>(k)]);
        }
        start = stop;
    }
    eu.validate();
    return eu;
}

// ---------------------------------------------------------------------
// Phase estimation
// ---------------------------------------------------------------------

// Amplitude the canonical t-bit circuit (Hadamards, controlled-U powers,
// inverse Fourier transform) places on ancilla outcome y when the system
// branch has eigenphase theta: F_T(y, theta) with T = 2^t. Exactly a
// delta when theta sits on the measurement grid.
inline Complex pe_kernel(double theta, int y, int big_t) {
    double delta = std::remainder(theta - kTau * y / big_t, kTau);
    if (std::abs(delta) < 1e-15) return Complex(1.0, 0.0);
    double mag = std::sin(0.5 * big_t * delta) / (big_t * std::sin(0.5 * delta));
    double arg = 0.5 * (big_t - 1) * delta;
    return mag * Complex(std::cos(arg), std::sin(arg));
}

enum class PeMode {
    circuit,  // exact outcome amplitudes of the literal circuit
    snap      // idealization: each branch reports its nearest grid phase
};

// Ancilla width for a target phase precision, plus buffer bits that keep
// the per-repetition failure probability of the canonical circuit below
// 1/4.
inline int ancilla_bits_for(double precision, int buffer = 2) {
    if (!(precision > 0.0)) throw QsimError("precision must be positive");
    int t = static_cast<int>(std::ceil(std::log2(kTau / precision)));
    return std::max(1, t) + buffer;
}

struct PhaseEstimate {
    double theta = 0.0;        // 2 pi y / T
    int outcome = 0;           // measured ancilla value y
    double probability = 0.0;  // of this outcome
    StateVector posterior;     // system register after the ancilla measurement
};

inline PhaseEstimate phase_estimation(const EigenUnitary& u, const StateVector& psi, int t,
                                      PeMode mode, RngStream& rng) {
    if (t < 1) throw QsimError("phase estimation needs at least one ancilla bit");
    if (u.dim() != psi.dim()) throw QsimError("dimension mismatch");
    int big_t = 1 << t;
    Eigen::VectorXcd c = u.vectors.adjoint() * psi.amplitudes();
    int nb = static_cast<int>(c.size());

    std::vector<double> probs(static_cast<std::size_t>(big_t), 0.0);
    if (mode == PeMode::snap) {
        for (int j = 0; j < nb; ++j) {
            int y = static_cast<int>(std::llround(u.phases(j) * big_t / kTau)) % big_t;
            probs[static_cast<std::size_t>(y)] += std::norm(c(j));
        }
    } else {
        for (int y = 0; y < big_t; ++y) {
            double p = 0.0;
            for (int j = 0; j < nb; ++j) {
                if (std::norm(c(j)) < 1e-28) continue;
                p += std::norm(c(j)) * std::norm(pe_kernel(u.phases(j), y, big_t));
            }
            probs[static_cast<std::size_t>(y)] = p;
        }
    }

    int y = rng.categorical(probs);
    double p = probs[static_cast<std::size_t>(y)];

    Eigen::VectorXcd post_coeff = Eigen::VectorXcd::Zero(nb);
    for (int j = 0; j < nb; ++j) {
        if (mode == PeMode::snap) {
            int yj = static_cast<int>(std::llround(u.phases(j) * big_t / kTau)) % big_t;
            if (yj == y) post_coeff(j) = c(j);
        } else {
            post_coeff(j) = c(j) * pe_kernel(u.phases(j), y, big_t);
        }
    }
    Eigen::VectorXcd post = u.vectors * post_coeff;
    post /= std::sqrt(p);

    return PhaseEstimate{kTau * y / big_t, y, p, StateVector(std::move(post), psi.labels())};
}

// ---------------------------------------------------------------------
// Amplitude estimation
// ---------------------------------------------------------------------

// One outcome of canonical amplitude estimation with T = 2^t grid points:
// phase estimation on the Grover iterate of the preparation, whose input
// splits half-and-half across the e^{+-2i theta_p} eigenvectors. The
// outcome distribution is exactly the two-kernel mixture, independent of
// the preparation's internal structure; the estimate is sin^2(pi y / T).
inline double ae_sample(double p, int t, RngStream& rng) {
    if (p < 0.0 || p > 1.0) throw QsimError("probability out of range");
    int big_t = 1 << t;
    double theta = std::asin(std::sqrt(p));
    std::vector<double> probs(static_cast<std::size_t>(big_t));
    for (int y = 0; y < big_t; ++y) {
        probs[static_cast<std::size_t>(y)] =
            0.5 * std::norm(pe_kernel(2.0 * theta, y, big_t)) +
            0.5 * std::norm(pe_kernel(-2.0 * theta, y, big_t));
    }
    int y = rng.categorical(probs);
    double s = std::sin(std::numbers::pi * y / big_t);
    return s * s;
}

struct AmplitudeEstimateResult {
    double p_hat = 0.0;    // median over repetitions
    double p_exact = 0.0;  // exact probability driving the sampler
    int ancilla_bits = 0;
    long long applications = 0;  // of the preparation and its inverse
    int reps = 0;
    bool zero_flag = false;  // p was numerically zero
};

// Estimates p to relative error eps with the Lemma-style budget
// O(1/(eps sqrt(alpha))) applications per repetition, alpha <= p a known
// floor. Median of an odd number of repetitions boosts the per-rep 2/3
// guarantee.
inline AmplitudeEstimateResult amplitude_estimate_p(double p_exact, double eps, double alpha,
                                                    RngStream& rng, int reps = 5) {
    if (!(eps > 0.0)) throw QsimError("eps must be positive");
    if (reps < 1) reps = 1;
    if (reps % 2 == 0) ++reps;

    AmplitudeEstimateResult out;
    out.p_exact = p_exact;
    out.reps = reps;
    if (p_exact <= 0.0) {
        out.zero_flag = true;
        return out;
    }
    alpha = std::clamp(alpha, 1e-12, 1.0);
    // |p~ - p| <= eps p needs phase precision ~ eps sqrt(p) on 2 theta_p
    out.ancilla_bits = ancilla_bits_for(eps * std::sqrt(alpha));
    long long per_rep = 2LL * ((1LL << out.ancilla_bits) - 1) + 1;

    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r) {
        samples.push_back(ae_sample(p_exact, out.ancilla_bits, rng));
        out.applications += per_rep;
    }
    std::nth_element(samples.begin(), samples.begin() + reps / 2, samples.end());
    out.p_hat = samples[static_cast<std::size_t>(reps / 2)];
    return out;
}

// Preparation-driven form: runs the preparation once to read off the
// exact flagged probability, then samples the canonical distribution.
inline AmplitudeEstimateResult amplitude_estimate(
    const std::function<StateVector()>& prepare,
    const std::function<bool(int, const StateVector&)>& good, double eps, RngStream& rng,
    int reps = 5, double alpha = 0.0) {
    StateVector psi = prepare();
    double p = 0.0;
    for (int k = 0; k < psi.dim(); ++k) {
        if (good(k, psi)) p += std::norm(psi.amplitude(k));
    }
    return amplitude_estimate_p(p, eps, alpha > 0.0 ? alpha : p, rng, reps);
}

// ---------------------------------------------------------------------
// Amplitude amplification
// ---------------------------------------------------------------------

struct AmplifySchedule {
    bool success = false;
    long long applications = 0;  // of the preparation and its inverse
    int instances = 0;           // parallel instances consumed
    int attempts = 0;
};

// Success/cost schedule of amplitude amplification with known floor
// alpha <= p: per instance, Grover attempts with randomized iteration
// counts (each attempt succeeds with exactly sin^2((2l+1) theta_p));
// log(1/delta) parallel instances drive the failure rate below delta.
inline AmplifySchedule amplitude_amplify_schedule(double p, double alpha, double delta,
                                                  RngStream& rng) {
    AmplifySchedule out;
    if (!(alpha > 0.0) || alpha > 1.0) throw QsimError("alpha must lie in (0, 1]");
    if (p <= 0.0) return out;  // nothing to amplify
    double theta_p = std::asin(std::sqrt(std::min(1.0, p)));
    double theta_a = std::asin(std::sqrt(alpha));
    int l_cap = static_cast<int>(std::ceil(std::numbers::pi / (4.0 * theta_a))) + 1;
    int instances = std::max(1, static_cast<int>(std::ceil(std::log(1.0 / std::clamp(
                                                               delta, 1e-12, 0.5)) /
                                                           std::log(3.0))));
    const int attempts_per_instance = 12;

    for (int inst = 0; inst < instances; ++inst) {
        ++out.instances;
        double l_bound = 1.0;
        for (int a = 0; a < attempts_per_instance; ++a) {
            ++out.attempts;
            int l = static_cast<int>(rng.below(static_cast<std::uint64_t>(
                std::max(1, std::min(static_cast<int>(l_bound), l_cap)))));
            out.applications += 2 * l + 1;
            double s = std::sin((2.0 * l + 1.0) * theta_p);
            if (rng.bernoulli(s * s)) {
                out.success = true;
                return out;
            }
            l_bound = std::min(l_bound * 1.5, static_cast<double>(l_cap));
        }
    }
    return out;
}

struct AmplifyResult {
    bool success = false;
    StateVector state;  // good-branch posterior when success
    double p_exact = 0.0;
    long long applications = 0;
    int instances = 0;
};

// Amplifies the flagged branch of a preparation to success probability
// >= 1 - delta, given the promise p >= alpha. On success the returned
// state is the exact good-branch posterior (Grover iterations keep that
// branch invariant).
inline AmplifyResult amplitude_amplify(const std::function<StateVector()>& prepare,
                                       const std::function<bool(int, const StateVector&)>& good,
                                       double alpha, double delta, RngStream& rng) {
    StateVector psi = prepare();
    Eigen::VectorXcd good_part = Eigen::VectorXcd::Zero(psi.dim());
    double p = 0.0;
    for (int k = 0; k < psi.dim(); ++k) {
        if (good(k, psi)) {
            good_part(k) = psi.amplitude(k);
            p += std::norm(psi.amplitude(k));
        }
    }

    AmplifySchedule sched = amplitude_amplify_schedule(p, alpha, delta, rng);
    if (!sched.success) {
        return AmplifyResult{false, psi, p, sched.applications, sched.instances};
    }
    good_part /= std::sqrt(p);
    return AmplifyResult{true, StateVector(std::move(good_part), psi.labels()), p,
                         sched.applications, sched.instances};
}

}  // namespace ohmsim
