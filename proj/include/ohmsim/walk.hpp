#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ohmsim/electrical.hpp"
#include "ohmsim/graph.hpp"
#include "ohmsim/qsim.hpp"
#include "ohmsim/statevector.hpp"

namespace ohmsim {

// ---------------------------------------------------------------------
// The a_v / b_e vector families
// ---------------------------------------------------------------------

// a_v = (1/sqrt(d'(v))) sum_{e in E'(v)} sqrt(w_e) |e>, unit vectors over E'.
inline std::vector<Eigen::VectorXd> build_a_vectors(const AugmentedGraph& ag) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(ag.vertex_count()));
    for (int v = 0; v < ag.vertex_count(); ++v) {
        double dv = ag.weighted_degree(v);
        if (!(dv > 0.0)) throw GraphError("vertex with zero weighted degree");
        Eigen::VectorXd a = Eigen::VectorXd::Zero(ag.edge_count());
        for (int e : ag.incident(v)) a(e) = std::sqrt(ag.weight(e) / dv);
        out.push_back(std::move(a));
    }
    return out;
}

// b_e = (1/sqrt(2)) (|e+> - |e->), unit vectors over V.
inline std::vector<Eigen::VectorXd> build_b_vectors(const AugmentedGraph& ag) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(ag.edge_count()));
    const double r = 1.0 / std::sqrt(2.0);
    for (int e = 0; e < ag.edge_count(); ++e) {
        auto [head, tail] = ag.endpoints(e);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(ag.vertex_count());
        b(head) = r;
        b(tail) = -r;
        out.push_back(std::move(b));
    }
    return out;
}

// ---------------------------------------------------------------------
// State preparation for Ref_A and Ref_B
// ---------------------------------------------------------------------

// Discretization size M for the deterministic preparation at accuracy
// delta: || a_v - phi_v || <= sqrt(d'/M) <= delta with margin.
inline long long method2_discretization(const AugmentedGraph& ag, double delta) {
    if (!(delta > 0.0)) throw GraphError("delta must be positive");
    double d = static_cast<double>(ag.max_degree());
    return static_cast<long long>(std::ceil(16.0 * d / (delta * delta)));
}

// Cumulative weight grid for vertex v: M_{v,i} = ceil(M S_{v,i} / S_{v,r})
// over the incident edges in incidence order; M_{v,0} = 0, M_{v,r} = M.
inline std::vector<long long> method2_grid(const AugmentedGraph& ag, int v, long long M) {
    std::vector<int> inc = ag.incident(v);
    int r = static_cast<int>(inc.size());
    std::vector<long long> grid(static_cast<std::size_t>(r) + 1, 0);
    double total = ag.weighted_degree(v);
    double cum = 0.0;
    for (int i = 1; i <= r; ++i) {
        cum += ag.weight(inc[static_cast<std::size_t>(i - 1)]);
        grid[static_cast<std::size_t>(i)] =
            static_cast<long long>(std::ceil(static_cast<double>(M) * cum / total - 1e-12));
    }
    grid[static_cast<std::size_t>(r)] = M;  // S_{v,r} / S_{v,r} = 1 exactly
    return grid;
}

// The relabeling h_v(k) = (j, t) with M_{v,j-1} < k <= M_{v,j} and
// k = M_{v,j-1} + t; the half-open convention makes (j, t) unique.
inline std::pair<int, long long> method2_h(const AugmentedGraph& ag, int v, long long M,
                                           long long k) {
    if (k < 1 || k > M) throw GraphError("h_v(k) needs k in [M]");
    std::vector<long long> grid = method2_grid(ag, v, M);
    for (int j = 1; j < static_cast<int>(grid.size()); ++j) {
        if (grid[static_cast<std::size_t>(j - 1)] < k && k <= grid[static_cast<std::size_t>(j)]) {
            return {j, k - grid[static_cast<std::size_t>(j - 1)]};
        }
    }
    throw GraphError("h_v(k) fell through the grid");  // unreachable for valid grids
}

// Deterministic preparation: phi_v = sum_i sqrt(Z_{v,i}/M) |e_i> with
// Z_{v,i} = M_{v,i} - M_{v,i-1}.
inline Eigen::VectorXd method2_vector(const AugmentedGraph& ag, int v, long long M) {
    std::vector<int> inc = ag.incident(v);
    std::vector<long long> grid = method2_grid(ag, v, M);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(ag.edge_count());
    for (int i = 1; i <= static_cast<int>(inc.size()); ++i) {
        long long z = grid[static_cast<std::size_t>(i)] - grid[static_cast<std::size_t>(i - 1)];
        phi(inc[static_cast<std::size_t>(i - 1)]) =
            std::sqrt(static_cast<double>(z) / static_cast<double>(M));
    }
    return phi;
}

inline StateVector prep_a_state_method2(const AugmentedGraph& ag, int v, double delta) {
    return StateVector(method2_vector(ag, v, method2_discretization(ag, delta)).cast<Complex>());
}

struct Method1Prep {
    bool success = false;
    StateVector state;        // exact |a_v> on success
    long long applications = 0;
    OracleCounter queries;
};

// Postselected preparation: uniform superposition over incident edges,
// weight rotation sqrt(w_e)|1> + sqrt(1-w_e)|0>, flag postselection
// amplified to failure rate delta. Succeeds with the exact |a_v>; needs
// rescaled weights (w_e <= 1 everywhere in E').
inline Method1Prep prep_a_state_method1(const AugmentedGraph& ag, int v, double delta,
                                        RngStream& rng) {
    for (int e = 0; e < ag.edge_count(); ++e) {
        if (ag.weight(e) > 1.0 + 1e-12) {
            throw GraphError("method 1 needs rescaled weights: w_e = " +
                             std::to_string(ag.weight(e)) + " > 1");
        }
    }
    double dv = ag.weighted_degree(v);
    int deg = ag.degree(v);
    double p = dv / static_cast<double>(deg);  // flag-1 probability
    int d = ag.max_degree();
    double c = 1.0;
    {
        double lo = ag.weight(0), hi = ag.weight(0);
        for (int e = 1; e < ag.edge_count(); ++e) {
            lo = std::min(lo, ag.weight(e));
            hi = std::max(hi, ag.weight(e));
        }
        c = hi / lo;
    }
    double alpha = std::min(p, 1.0 / (static_cast<double>(d) * c));

    Method1Prep out;
    if (deg == 1) {
        // single incident edge: the rotation flags with certainty
        out.success = true;
        out.applications = 1;
    } else {
        AmplifySchedule sched = amplitude_amplify_schedule(p, alpha, delta, rng);
        out.success = sched.success;
        out.applications = sched.applications;
    }
    // per preparation: O1' superposition build and unbuild, O3' and inverse
    int log_n = 1;
    while ((1 << log_n) < ag.vertex_count()) ++log_n;
    out.queries.o1_calls = static_cast<std::uint64_t>(out.applications) *
                           static_cast<std::uint64_t>(2 * (log_n + 1));
    out.queries.o3_calls = static_cast<std::uint64_t>(out.applications) * 2ULL;

    Eigen::VectorXd av = Eigen::VectorXd::Zero(ag.edge_count());
    for (int e : ag.incident(v)) av(e) = std::sqrt(ag.weight(e) / dv);
    out.state = StateVector(av.cast<Complex>());
    return out;
}

// Exact |b_e> through the O2'-based three-step map; charges the oracle
// and its inverse.
inline StateVector prep_b_state(const AugmentedGraph& ag, int e, OracleCounter& ctr) {
    auto [head, tail] = ag.oracle_o2(ctr, e);
    ++ctr.o2_calls;  // the uncomputation step
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(ag.vertex_count());
    const double r = 1.0 / std::sqrt(2.0);
    b(head) = r;
    b(tail) = -r;
    return StateVector(std::move(b));
}

// ---------------------------------------------------------------------
// The walk operator U(A, B) = Ref_B Ref_A
// ---------------------------------------------------------------------

enum class APrep { exact, method2 };

// Dense operators over the lifted space with (edge-major, vertex-minor)
// basis (e, v) -> e * n + v.
struct WalkOperator {
    Eigen::MatrixXd A;  // (m+1)n x n,   columns |a_v>|v>
    Eigen::MatrixXd B;  // (m+1)n x m+1, columns |e>|b_e>
    Eigen::MatrixXd D;  // A^T B
    Eigen::MatrixXd U;  // Ref_B Ref_A
    Eigen::VectorXd singular_values;  // of D, descending
    double sigma_min = 0.0;           // smallest nonzero singular value
    double gap = 0.0;                 // 2 arcsin(sigma_min)
    int rank = 0;
};

inline constexpr double kSigmaOneTol = 1e-9;
inline constexpr double kSigmaZeroTol = 1e-10;

inline Eigen::MatrixXd walk_a_matrix(const AugmentedGraph& ag, APrep prep, double a_delta) {
    int n = ag.vertex_count(), m1 = ag.edge_count();
    std::vector<Eigen::VectorXd> avs;
    if (prep == APrep::exact) {
        avs = build_a_vectors(ag);
    } else {
        long long M = method2_discretization(ag, a_delta);
        for (int v = 0; v < n; ++v) avs.push_back(method2_vector(ag, v, M));
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m1 * n, n);
    for (int v = 0; v < n; ++v) {
        for (int e = 0; e < m1; ++e) A(e * n + v, v) = avs[static_cast<std::size_t>(v)](e);
    }
    return A;
}

inline Eigen::MatrixXd walk_b_matrix(const AugmentedGraph& ag) {
    int n = ag.vertex_count(), m1 = ag.edge_count();
    std::vector<Eigen::VectorXd> bes = build_b_vectors(ag);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m1 * n, m1);
    for (int e = 0; e < m1; ++e) {
        for (int v = 0; v < n; ++v) B(e * n + v, e) = bes[static_cast<std::size_t>(e)](v);
    }
    return B;
}

inline WalkOperator assemble_walk(const AugmentedGraph& ag, APrep prep = APrep::exact,
                                  double a_delta = 1e-6, int max_dim = 4096) {
    ag.base().require_connected();
    int n = ag.vertex_count(), m1 = ag.edge_count();
    if (m1 * n > max_dim) {
        throw GraphError("lifted dimension " + std::to_string(m1 * n) +
                         " exceeds the dense-operator limit " + std::to_string(max_dim));
    }
    WalkOperator w;
    w.A = walk_a_matrix(ag, prep, a_delta);
    w.B = walk_b_matrix(ag);
    w.D = w.A.transpose() * w.B;

    int dim = m1 * n;
    Eigen::MatrixXd refa = 2.0 * (w.A * w.A.transpose()) - Eigen::MatrixXd::Identity(dim, dim);
    Eigen::MatrixXd refb = 2.0 * (w.B * w.B.transpose()) - Eigen::MatrixXd::Identity(dim, dim);
    w.U = refb * refa;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(w.D);
    w.singular_values = svd.singularValues();
    w.rank = 0;
    w.sigma_min = 0.0;
    for (int j = 0; j < w.singular_values.size(); ++j) {
        if (w.singular_values(j) > kSigmaZeroTol) {
            ++w.rank;
            w.sigma_min = w.singular_values(j);  // descending order: last nonzero wins
        }
    }
    if (w.rank == 0) throw GraphError("walk operator with vanishing D");
    w.gap = 2.0 * std::asin(std::min(1.0, w.sigma_min));
    return w;
}

struct GapReport {
    double from_phases = 0.0;  // min over eigenphases != pi of |phase - pi|
    double from_sigma = 0.0;   // 2 arcsin(sigma_min)
    Eigen::VectorXd phases;    // all eigenphases of U in [0, 2pi)
};

// Gap around -1 computed from the dense spectrum, cross-checkable against
// the singular-value route. Throws when no -1 eigenvalue exists: the
// kernel of M' is never empty for a connected augmented graph, so that
// signals a build bug.
inline GapReport spectral_gap(const WalkOperator& w, double pi_tol = 1e-7) {
    EigenUnitary eu = eigenunitary_from_orthogonal(w.U);
    GapReport rep;
    rep.phases = eu.phases;
    rep.from_sigma = w.gap;
    bool has_minus_one = false;
    double best = std::numbers::pi;  // the 0-phase distance caps the gap
    for (int j = 0; j < eu.phases.size(); ++j) {
        double dist = phase_distance(eu.phases(j), std::numbers::pi);
        if (dist <= pi_tol) {
            has_minus_one = true;
        } else {
            best = std::min(best, dist);
        }
    }
    if (!has_minus_one) throw GraphError("walk operator has no -1 eigenvalue");
    rep.from_phases = best;
    return rep;
}

// The complete eigenphase list the spectral characterization predicts:
// phase 0 with multiplicity #(sigma = 1) + dim(ColA-perp cap ColB-perp),
// pi with (n - rank) + (m+1 - rank), and the pairs +-2 theta_j.
inline std::vector<double> predicted_walk_phases(const WalkOperator& w) {
    int n = static_cast<int>(w.A.cols());
    int m1 = static_cast<int>(w.B.cols());
    int dim = n * m1;
    int ones = 0, interior = 0;
    std::vector<double> phases;
    for (int j = 0; j < w.singular_values.size(); ++j) {
        double s = w.singular_values(j);
        if (s >= 1.0 - kSigmaOneTol) {
            ++ones;
        } else if (s > kSigmaZeroTol) {
            ++interior;
            double theta = std::acos(std::min(1.0, s));
            phases.push_back(wrap_phase(2.0 * theta));
            phases.push_back(wrap_phase(-2.0 * theta));
        }
    }
    int rank = ones + interior;
    int mult_pi = (n - rank) + (m1 - rank);
    // dim(ColA + ColB) = n + m1 - #(sigma = 1)
    int mult_zero = ones + (dim - n - m1 + ones);
    for (int k = 0; k < mult_pi; ++k) phases.push_back(std::numbers::pi);
    for (int k = 0; k < mult_zero; ++k) phases.push_back(0.0);
    std::sort(phases.begin(), phases.end());
    if (static_cast<int>(phases.size()) != dim) {
        throw GraphError("predicted phase count mismatch");
    }
    return phases;
}

// Text export "phase multiplicity" with phases merged within tol.
inline std::string spectra_text(const Eigen::VectorXd& phases, double tol = 1e-9) {
    std::vector<double> ph(phases.data(), phases.data() + phases.size());
    std::sort(ph.begin(), ph.end());
    std::ostringstream out;
    out.precision(12);
    std::size_t i = 0;
    while (i < ph.size()) {
        std::size_t j = i;
        while (j + 1 < ph.size() && ph[j + 1] - ph[i] <= tol) ++j;
        out << ph[(i + j) / 2] << ' ' << (j - i + 1) << '\n';
        i = j + 1;
    }
    return out.str();
}

// ---------------------------------------------------------------------
// SVD plan: everything the measurement needs, in the (m+1)-dim edge space
// ---------------------------------------------------------------------

// Spectral data of U(A, B) reduced to the right singular basis of D.
// A state B psi decomposes exactly over: phase-0 branches (sigma = 1),
// conjugate pairs e^{+-2i theta_j} splitting the weight |<y_j, psi>|^2
// evenly (sigma in (0,1)), and the exact -1 branches B(ker D) = B(ker M').
// Nothing outside Col B is ever populated, so the (m+1)n-dimensional
// space never has to be materialized.
struct WalkPlan {
    int n = 0;
    int m1 = 0;
    Eigen::MatrixXd Y;       // (m+1) x (m+1) right singular vectors of D
    Eigen::VectorXd sigma;   // per column of Y (zero-padded past min(n, m+1))
    std::vector<int> kind;   // 0: phase 0, 1: interior pair, 2: kernel (pi)
    std::vector<double> theta;  // arccos(sigma) for interior columns
    double sigma_min = 0.0;     // smallest nonzero singular value
    double gap = 0.0;           // 2 arcsin(sigma_min)
    int kernel_dim = 0;
    int unweighted_degree = 0;  // d of G', for query accounting

    // exact in-kernel probability <psi| Pi |psi>
    double kernel_probability(const Eigen::VectorXcd& psi) const {
        double p = 0.0;
        for (int j = 0; j < static_cast<int>(kind.size()); ++j) {
            if (kind[static_cast<std::size_t>(j)] == 2) {
                p += std::norm(Y.col(j).cast<Complex>().dot(psi));
            }
        }
        return p;
    }

    // exact projection Pi psi onto ker M'
    Eigen::VectorXcd kernel_project(const Eigen::VectorXcd& psi) const {
        Eigen::VectorXcd out = Eigen::VectorXcd::Zero(m1);
        for (int j = 0; j < static_cast<int>(kind.size()); ++j) {
            if (kind[static_cast<std::size_t>(j)] == 2) {
                Complex c = Y.col(j).cast<Complex>().dot(psi);
                out += c * Y.col(j).cast<Complex>();
            }
        }
        return out;
    }
};

inline WalkPlan build_walk_plan(const AugmentedGraph& ag, APrep prep = APrep::exact,
                                double a_delta = 1e-6) {
    ag.base().require_connected();
    WalkPlan plan;
    plan.n = ag.vertex_count();
    plan.m1 = ag.edge_count();
    plan.unweighted_degree = ag.max_degree();

    // D(v, e) = a_v(e) b_e(v) without the lifted-space detour
    std::vector<Eigen::VectorXd> avs;
    if (prep == APrep::exact) {
        avs = build_a_vectors(ag);
    } else {
        long long M = method2_discretization(ag, a_delta);
        for (int v = 0; v < plan.n; ++v) avs.push_back(method2_vector(ag, v, M));
    }
    const double r = 1.0 / std::sqrt(2.0);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(plan.n, plan.m1);
    for (int e = 0; e < plan.m1; ++e) {
        auto [head, tail] = ag.endpoints(e);
        D(head, e) += avs[static_cast<std::size_t>(head)](e) * r;
        D(tail, e) -= avs[static_cast<std::size_t>(tail)](e) * r;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeFullV);
    plan.Y = svd.matrixV();
    plan.sigma = Eigen::VectorXd::Zero(plan.m1);
    plan.sigma.head(svd.singularValues().size()) = svd.singularValues();

    plan.kind.resize(static_cast<std::size_t>(plan.m1));
    plan.theta.assign(static_cast<std::size_t>(plan.m1), 0.0);
    plan.sigma_min = 0.0;
    for (int j = 0; j < plan.m1; ++j) {
        double s = plan.sigma(j);
        if (s <= kSigmaZeroTol) {
            plan.kind[static_cast<std::size_t>(j)] = 2;
            ++plan.kernel_dim;
        } else {
            plan.sigma_min = s;  // descending order
            if (s >= 1.0 - kSigmaOneTol) {
                plan.kind[static_cast<std::size_t>(j)] = 0;
            } else {
                plan.kind[static_cast<std::size_t>(j)] = 1;
                plan.theta[static_cast<std::size_t>(j)] = std::acos(std::min(1.0, s));
            }
        }
    }
    if (plan.kernel_dim == 0) {
        throw GraphError("ker M' is empty; augmented graph was built inconsistently");
    }
    plan.gap = 2.0 * std::asin(std::min(1.0, plan.sigma_min));
    return plan;
}

// ---------------------------------------------------------------------
// The measurement {Pi, I - Pi}
// ---------------------------------------------------------------------

enum class MeasureMode { exact, circuit };

// Oracle cost of one controlled application of U(A, B) built from
// Q2 R2 Q2' and Q1 R1 Q1' with the deterministic preparation.
inline OracleCounter walk_u_cost(int n, int degree) {
    int log_n = 1;
    while ((1 << log_n) < n) ++log_n;
    OracleCounter c;
    c.o1_calls = static_cast<std::uint64_t>(4 * (log_n + 1 + degree) + 2);
    c.o2_calls = 2;
    c.o3_calls = static_cast<std::uint64_t>(4 * degree);
    return c;
}

struct MeasureOutcome {
    bool in_kernel = false;
    double probability = 0.0;   // of the observed outcome
    double p_in = 0.0;          // probability of the in-kernel outcome
    StateVector posterior;      // over E', mapped back through the lift
    double unlift_defect = 0.0; // weight lost mapping the branch back to E'
    int ancilla_bits = 0;
    long long u_applications = 0;
};

// Ancilla width that keeps both the grid finer than the classification
// window gap/3 and the misclassification leakage at delta.
inline int kernel_measurement_bits(double gap, double delta) {
    if (!(gap > 0.0)) throw GraphError("gap must be positive");
    delta = std::clamp(delta, 1e-9, 0.25);
    double t = std::ceil(std::log2(3.0 * std::numbers::pi / (gap * delta)));
    return std::max(2, static_cast<int>(t));
}

namespace detail {

struct BranchTerm {
    int column;    // y-column index
    double phase;  // eigenphase of this branch
    Complex coeff; // amplitude on the (lifted) branch eigenvector
    double back;   // scale of B+ u relative to y_j (1 or 1/2 pattern below)
};

// Decomposes B psi over the walk eigenbranches. For interior columns the
// +-2 theta branches carry coefficient +- i c / sqrt(2) and map back to
// the edge space as -+ i y_j / sqrt(2); phase-0 and kernel branches carry
// c and map back as y_j.
inline std::vector<BranchTerm> walk_branches(const WalkPlan& plan, const Eigen::VectorXcd& psi) {
    std::vector<BranchTerm> out;
    const Complex iu(0.0, 1.0);
    for (int j = 0; j < plan.m1; ++j) {
        Complex c = plan.Y.col(j).cast<Complex>().dot(psi);
        if (std::norm(c) < 1e-28) continue;
        switch (plan.kind[static_cast<std::size_t>(j)]) {
            case 0:
                out.push_back(BranchTerm{j, 0.0, c, 1.0});
                break;
            case 2:
                out.push_back(BranchTerm{j, std::numbers::pi, c, 1.0});
                break;
            default: {
                double th = plan.theta[static_cast<std::size_t>(j)];
                out.push_back(BranchTerm{j, wrap_phase(2.0 * th), iu * c / std::sqrt(2.0), 0.0});
                out.push_back(BranchTerm{j, wrap_phase(-2.0 * th), -iu * c / std::sqrt(2.0), 0.0});
                break;
            }
        }
    }
    return out;
}

// B+ applied to the branch eigenvector, as a multiple of y_j. Interior
// branches with phase +2theta map back through -i/sqrt(2), the conjugate
// branch through +i/sqrt(2); phase-0 and kernel branches map one-to-one.
inline Complex branch_backmap(const BranchTerm& b) {
    if (b.back == 1.0) return Complex(1.0, 0.0);
    const Complex iu(0.0, 1.0);
    return (b.phase <= std::numbers::pi) ? -iu / std::sqrt(2.0) : iu / std::sqrt(2.0);
}

}  // namespace detail

// Windowed in-kernel probability of the circuit-mode measurement: run
// t-bit phase estimation on U from B psi and accept outcomes whose phase
// is within gap/3 of pi. Kernel branches sit exactly on the pi grid
// point; everything else contributes only Dirichlet-kernel leakage.
inline double circuit_kernel_probability(const WalkPlan& plan, const Eigen::VectorXcd& psi,
                                         int t) {
    int big_t = 1 << t;
    double halfwidth = plan.gap / 3.0;
    int lo = static_cast<int>(std::ceil((std::numbers::pi - halfwidth) * big_t / kTau));
    int hi = static_cast<int>(std::floor((std::numbers::pi + halfwidth) * big_t / kTau));
    auto branches = detail::walk_branches(plan, psi);
    double p = 0.0;
    for (const auto& b : branches) {
        for (int y = lo; y <= hi; ++y) {
            p += std::norm(b.coeff) * std::norm(pe_kernel(b.phase, y, big_t));
        }
    }
    return std::min(1.0, p);
}

// Reusable circuit-mode sampler: decomposes the lifted state once,
// caches the in-window outcome distribution, and builds the full
// out-of-window distribution lazily on the first rejected trial.
class KernelMeasurementSampler {
public:
    KernelMeasurementSampler(const WalkPlan& plan, const StateVector& psi, int t)
        : m1_(plan.m1), n_(plan.n), degree_(plan.unweighted_degree), t_(t), big_t_(1 << t) {
        if (psi.dim() != plan.m1) throw GraphError("state dimension mismatch");
        labels_ = psi.labels();
        branches_ = detail::walk_branches(plan, psi.amplitudes());
        columns_.resize(m1_, static_cast<int>(branches_.size()));
        for (int b = 0; b < columns_.cols(); ++b) {
            columns_.col(b) = plan.Y.col(branches_[static_cast<std::size_t>(b)].column);
        }

        double halfwidth = plan.gap / 3.0;
        lo_ = static_cast<int>(std::ceil((std::numbers::pi - halfwidth) * big_t_ / kTau));
        hi_ = static_cast<int>(std::floor((std::numbers::pi + halfwidth) * big_t_ / kTau));
        window_probs_.assign(static_cast<std::size_t>(hi_ - lo_ + 1), 0.0);
        p_in_ = 0.0;
        for (int y = lo_; y <= hi_; ++y) {
            double p = prob_at(y);
            window_probs_[static_cast<std::size_t>(y - lo_)] = p;
            p_in_ += p;
        }
        p_in_ = std::min(1.0, p_in_);
    }

    double p_in() const { return p_in_; }
    int ancilla_bits() const { return t_; }
    long long u_applications() const { return big_t_ - 1; }

    MeasureOutcome sample(RngStream& rng, OracleCounter* ctr = nullptr) const {
        bool in = rng.bernoulli(p_in_);
        int y_obs;
        if (in) {
            y_obs = lo_ + rng.categorical(window_probs_);
        } else {
            ensure_outside();
            y_obs = rng.categorical(outside_probs_);
        }

        Eigen::VectorXcd post = Eigen::VectorXcd::Zero(m1_);
        for (int b = 0; b < columns_.cols(); ++b) {
            const auto& br = branches_[static_cast<std::size_t>(b)];
            Complex amp =
                br.coeff * pe_kernel(br.phase, y_obs, big_t_) * detail::branch_backmap(br);
            post += amp * columns_.col(b).cast<Complex>();
        }
        double lifted_norm2 = prob_at(y_obs);
        double back_norm2 = post.squaredNorm();
        if (back_norm2 < 1e-24) throw GraphError("posterior vanished mapping back to E'");

        MeasureOutcome out;
        out.in_kernel = in;
        out.p_in = p_in_;
        out.probability = in ? p_in_ : 1.0 - p_in_;
        out.unlift_defect = std::max(0.0, 1.0 - back_norm2 / std::max(lifted_norm2, 1e-300));
        out.ancilla_bits = t_;
        out.u_applications = big_t_ - 1;
        out.posterior = StateVector(post / std::sqrt(back_norm2), labels_);
        if (ctr != nullptr) charge(*ctr);
        return out;
    }

    void charge(OracleCounter& ctr) const {
        OracleCounter per = walk_u_cost(n_, degree_);
        ctr.o1_calls += per.o1_calls * static_cast<std::uint64_t>(big_t_ - 1);
        ctr.o2_calls += per.o2_calls * static_cast<std::uint64_t>(big_t_ - 1) + 2;  // lift+unlift
        ctr.o3_calls += per.o3_calls * static_cast<std::uint64_t>(big_t_ - 1);
    }

private:
    double prob_at(int y) const {
        double p = 0.0;
        for (const auto& b : branches_) {
            p += std::norm(b.coeff) * std::norm(pe_kernel(b.phase, y, big_t_));
        }
        return p;
    }

    void ensure_outside() const {
        if (!outside_probs_.empty()) return;
        if (big_t_ > (1 << 18)) {
            throw GraphError("out-of-window sampling at t = " + std::to_string(t_) +
                             " is too wide; lower the ancilla count");
        }
        outside_probs_.assign(static_cast<std::size_t>(big_t_), 0.0);
        for (int y = 0; y < big_t_; ++y) {
            if (y >= lo_ && y <= hi_) continue;
            outside_probs_[static_cast<std::size_t>(y)] = prob_at(y);
        }
    }

    int m1_, n_, degree_, t_, big_t_;
    int lo_ = 0, hi_ = 0;
    double p_in_ = 0.0;
    std::vector<detail::BranchTerm> branches_;
    Eigen::MatrixXd columns_;
    std::vector<std::string> labels_;
    std::vector<double> window_probs_;
    mutable std::vector<double> outside_probs_;
};

// One run of the measurement {Pi, I - Pi} on a state over E'.
//   exact:   samples the true projector from the plan; no queries.
//   circuit: lifts through Q2, runs t-bit phase estimation on U(A, B),
//            classifies the outcome phase against gap/3, maps the
//            posterior back through Q2^{-1}; queries charged per
//            controlled-U application.
inline MeasureOutcome kernel_measurement(const WalkPlan& plan, const StateVector& psi,
                                         MeasureMode mode, RngStream& rng,
                                         double delta = 1e-3, OracleCounter* ctr = nullptr,
                                         std::optional<int> ancilla_override = std::nullopt) {
    if (psi.dim() != plan.m1) throw GraphError("state dimension mismatch");
    const Eigen::VectorXcd& amps = psi.amplitudes();

    if (mode == MeasureMode::exact) {
        Eigen::VectorXcd proj = plan.kernel_project(amps);
        double p_in = proj.squaredNorm();
        bool in = rng.bernoulli(p_in);
        MeasureOutcome out;
        out.in_kernel = in;
        out.p_in = p_in;
        out.probability = in ? p_in : 1.0 - p_in;
        Eigen::VectorXcd post = in ? proj : (amps - proj).eval();
        double nn = post.norm();
        if (nn < 1e-15) throw GraphError("measurement produced a null branch");
        out.posterior = StateVector(post / nn, psi.labels());
        return out;
    }

    int need = kernel_measurement_bits(plan.gap, 0.25);
    int t = ancilla_override.value_or(kernel_measurement_bits(plan.gap, delta));
    if (t < need) {
        throw GraphError("circuit measurement needs at least " + std::to_string(need) +
                         " ancilla bits for precision gap/3, got " + std::to_string(t));
    }
    KernelMeasurementSampler sampler(plan, psi, t);
    return sampler.sample(rng, ctr);
}

inline MeasureOutcome kernel_measurement(const AugmentedGraph& ag, const StateVector& psi,
                                         MeasureMode mode, RngStream& rng, double delta = 1e-3,
                                         OracleCounter* ctr = nullptr,
                                         std::optional<int> ancilla_override = std::nullopt) {
    WalkPlan plan = build_walk_plan(ag);
    return kernel_measurement(plan, psi, mode, rng, delta, ctr, ancilla_override);
}

}  // namespace ohmsim
