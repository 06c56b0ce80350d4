#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ohmsim/rng.hpp"

namespace ohmsim {

struct QsimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Complex = std::complex<double>;

// Complex amplitude array over a labeled basis. Operations return new
// states; values are immutable-on-return and safe to share across trials.
class StateVector {
public:
    StateVector() : amps_(Eigen::VectorXcd::Ones(1)) {}  // trivial one-dim |0>

    explicit StateVector(Eigen::VectorXcd amps, std::vector<std::string> labels = {})
        : amps_(std::move(amps)), labels_(std::move(labels)) {
        if (!labels_.empty() && static_cast<int>(labels_.size()) != amps_.size()) {
            throw QsimError("label count does not match dimension");
        }
        double n = amps_.norm();
        if (std::abs(n - 1.0) > 1e-8) {
            throw QsimError("state vector is not normalized: ||psi|| = " + std::to_string(n));
        }
    }

    static StateVector basis_state(int dim, int k, std::vector<std::string> labels = {}) {
        Eigen::VectorXcd a = Eigen::VectorXcd::Zero(dim);
        a(k) = 1.0;
        return StateVector(std::move(a), std::move(labels));
    }

    int dim() const { return static_cast<int>(amps_.size()); }
    const Eigen::VectorXcd& amplitudes() const { return amps_; }
    Complex amplitude(int k) const { return amps_(k); }

    std::string label(int k) const {
        if (labels_.empty()) return std::to_string(k);
        return labels_[static_cast<std::size_t>(k)];
    }
    const std::vector<std::string>& labels() const { return labels_; }

    double norm_error() const { return std::abs(amps_.norm() - 1.0); }

    // label -> (re, im) text map for debugging; drops near-zero entries.
    std::string dump(double cutoff = 1e-12) const {
        std::ostringstream out;
        out.precision(12);
        for (int k = 0; k < dim(); ++k) {
            if (std::abs(amps_(k)) <= cutoff) continue;
            out << label(k) << " -> (" << amps_(k).real() << ", " << amps_(k).imag() << ")\n";
        }
        return out.str();
    }

private:
    Eigen::VectorXcd amps_;
    std::vector<std::string> labels_;
};

// A registered unitary operator: unitarity is validated once here, not on
// every application.
class Unitary {
public:
    explicit Unitary(Eigen::MatrixXcd U, double tol = 1e-8) : U_(std::move(U)) {
        if (U_.rows() != U_.cols()) throw QsimError("operator must be square");
        Eigen::MatrixXcd gram = U_.adjoint() * U_;
        double err = (gram - Eigen::MatrixXcd::Identity(U_.rows(), U_.cols()))
                         .cwiseAbs()
                         .maxCoeff();
        if (err > tol) {
            throw QsimError("operator is not unitary: ||U'U - I|| = " + std::to_string(err));
        }
    }

    int dim() const { return static_cast<int>(U_.rows()); }
    const Eigen::MatrixXcd& matrix() const { return U_; }

private:
    Eigen::MatrixXcd U_;
};

inline StateVector apply_unitary(const StateVector& psi, const Unitary& U) {
    if (U.dim() != psi.dim()) throw QsimError("dimension mismatch");
    return StateVector(U.matrix() * psi.amplitudes(), psi.labels());
}

// Appends a fresh ancilla qubit (leftmost register: new index b*N + k) and
// rotates it per branch to h|1> + sqrt(1-h^2)|0>, where h = h(lambda(k)).
// |h| > 1 on a populated branch signals a bad rotation constant or a
// missing weight rescale and is an error.
inline StateVector controlled_rotation(const StateVector& psi,
                                       const std::function<double(int)>& lambda_of,
                                       const std::function<double(double)>& h,
                                       double populated_tol = 1e-12) {
    int n = psi.dim();
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(2 * n);
    for (int k = 0; k < n; ++k) {
        Complex a = psi.amplitude(k);
        if (std::abs(a) <= populated_tol) continue;
        double hk = h(lambda_of(k));
        if (std::abs(hk) > 1.0 + 1e-12) {
            throw QsimError("rotation amplitude |h| = " + std::to_string(std::abs(hk)) +
                            " exceeds 1 on a populated branch");
        }
        hk = std::clamp(hk, -1.0, 1.0);
        out(k) = a * std::sqrt(1.0 - hk * hk);  // ancilla |0>
        out(n + k) = a * hk;                    // ancilla |1>
    }
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(2 * n));
    for (int b = 0; b <= 1; ++b)
        for (int k = 0; k < n; ++k) labels.push_back(std::to_string(b) + ":" + psi.label(k));
    return StateVector(std::move(out), std::move(labels));
}

struct TrialOutcome {
    int outcome = 0;           // index of the observed projector / group
    std::string label;         // outcome label
    double probability = 0.0;  // squared norm of the unnormalized projected state
    StateVector posterior;     // renormalized post-measurement state
};

// Projective measurement over a partition of basis indices into groups.
// Groups must cover every index exactly once.
inline TrialOutcome measure_partition(const StateVector& psi,
                                      const std::vector<std::vector<int>>& groups,
                                      const std::vector<std::string>& group_labels,
                                      RngStream& rng) {
    int n = psi.dim();
    std::vector<int> owner(static_cast<std::size_t>(n), -1);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        for (int k : groups[gi]) {
            if (k < 0 || k >= n || owner[static_cast<std::size_t>(k)] != -1) {
                throw QsimError("groups must partition the basis");
            }
            owner[static_cast<std::size_t>(k)] = static_cast<int>(gi);
        }
    }
    for (int k = 0; k < n; ++k) {
        if (owner[static_cast<std::size_t>(k)] == -1) {
            throw QsimError("groups must cover every basis index");
        }
    }

    std::vector<double> probs(groups.size(), 0.0);
    for (int k = 0; k < n; ++k) {
        probs[static_cast<std::size_t>(owner[static_cast<std::size_t>(k)])] +=
            std::norm(psi.amplitude(k));
    }
    int pick = rng.categorical(probs);

    Eigen::VectorXcd post = Eigen::VectorXcd::Zero(n);
    for (int k : groups[static_cast<std::size_t>(pick)]) post(k) = psi.amplitude(k);
    double p = probs[static_cast<std::size_t>(pick)];
    post /= std::sqrt(p);

    TrialOutcome out{pick,
                     group_labels.empty() ? std::to_string(pick)
                                          : group_labels[static_cast<std::size_t>(pick)],
                     p, StateVector(std::move(post), psi.labels())};
    return out;
}

// Projective measurement given explicit projectors; they must sum to the
// identity within tolerance.
inline TrialOutcome measure_projectors(const StateVector& psi,
                                       const std::vector<Eigen::MatrixXcd>& projectors,
                                       RngStream& rng, double completeness_tol = 1e-8) {
    int n = psi.dim();
    Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& P : projectors) {
        if (P.rows() != n || P.cols() != n) throw QsimError("projector dimension mismatch");
        total += P;
    }
    double err = (total - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
    if (err > completeness_tol) {
        throw QsimError("projectors do not sum to the identity: defect " + std::to_string(err));
    }

    std::vector<Eigen::VectorXcd> projected;
    std::vector<double> probs;
    projected.reserve(projectors.size());
    for (const auto& P : projectors) {
        projected.push_back(P * psi.amplitudes());
        probs.push_back(projected.back().squaredNorm());
    }
    int pick = rng.categorical(probs);
    double p = probs[static_cast<std::size_t>(pick)];
    Eigen::VectorXcd post = projected[static_cast<std::size_t>(pick)] / std::sqrt(p);
    return TrialOutcome{pick, std::to_string(pick), p, StateVector(std::move(post), psi.labels())};
}

// Measurement of a single qubit register inside a composite index space:
// index = (left * 2 + b) * right + r with the qubit at (left, right)
// block position. Helper for flag-qubit postselection statistics.
inline std::vector<std::vector<int>> qubit_partition(int dim, int block) {
    // block = size of the register group to the right of the qubit
    std::vector<std::vector<int>> groups(2);
    for (int k = 0; k < dim; ++k) {
        int b = (k / block) % 2;
        groups[static_cast<std::size_t>(b)].push_back(k);
    }
    return groups;
}

}  // namespace ohmsim
