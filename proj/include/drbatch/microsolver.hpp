#pragma once

/**
 * @file microsolver.hpp
 * @brief Damped explicit dynamic relaxation for one truss sub-problem.
 *
 * The static equilibrium problem f_int(u) = 0 on the free DOFs is turned into a fictitious
 * damped dynamic one and integrated with a two-step central difference (leapfrog) scheme until
 * the free-DOF force residual drops below tolerance. Every kernel runs through an executor from
 * execution.hpp, so the same code serves the serial oracle, the per-operation dispatch path,
 * and the team path.
 *
 * All state vectors are in solver order (see DofMap): free DOFs first, fixed DOFs last.
 */

#include "drbatch/dofmap.hpp"
#include "drbatch/errors.hpp"
#include "drbatch/execution.hpp"
#include "drbatch/linalg.hpp"
#include "drbatch/network.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace drb {

// ---------------------------------------------------------------------------
// Configuration and state
// ---------------------------------------------------------------------------

struct FixedDamping {
    double c = 0.0;
};
struct AdaptiveDamping {};

using DampingMode = std::variant<FixedDamping, AdaptiveDamping>;

struct SolverConfig {
    double tol_rel = 1e-8;
    double tol_abs = 1e-12;
    std::size_t max_iters = 200000;
    double dt_safety = 0.8;
    DampingMode damping = AdaptiveDamping{};
    std::size_t energy_check_interval = 0; ///< 0 disables the energy ledger
    std::size_t bc_ramp_iters = 0;         ///< 0 applies the boundary displacement in one step

    void validate() const {
        if (!(dt_safety > 0.0 && dt_safety <= 1.0))
            throw std::invalid_argument("dt_safety must lie in (0, 1]");
        if (!(tol_rel >= 0.0) || !(tol_abs >= 0.0) || (tol_rel == 0.0 && tol_abs == 0.0))
            throw std::invalid_argument("tolerances must be non-negative and not both zero");
        if (max_iters == 0)
            throw std::invalid_argument("max_iters must be positive");
        if (auto* f = std::get_if<FixedDamping>(&damping); f && !(f->c >= 0.0))
            throw std::invalid_argument("fixed damping coefficient must be non-negative");
    }
};

/// Work accumulated over the run. Balance: W_ext = W_int + W_kin + W_damp.
struct EnergyLedger {
    double kinetic = 0.0;
    double internal = 0.0;
    double damping = 0.0;
    double external = 0.0;
};

template <class Vec>
struct BasicMicroState {
    Vec u, v, a, f_int, f_prev, mass;
    std::size_t n_free = 0;
    double residual = 0.0;
    double dt = 0.0;
    double damping = 0.0;
    std::size_t iter = 0;
    EnergyLedger energy{};
};

using MicroState = BasicMicroState<std::vector<double>>;
using MicroStateView = BasicMicroState<std::span<double>>;

inline MicroStateView view(MicroState& s) {
    return MicroStateView{s.u, s.v, s.a, s.f_int, s.f_prev, s.mass,
                          s.n_free, s.residual, s.dt, s.damping, s.iter, s.energy};
}

struct SolveResult {
    bool converged = false;
    std::size_t iters = 0;
    double final_residual = 0.0;
    double threshold = 0.0; ///< max(tol_abs, tol_rel * r_ref) actually applied
    std::vector<double> u;  ///< original DOF order
    Mat3 avg_stress{};
    double energy_residual = std::numeric_limits<double>::quiet_NaN(); ///< NaN when the ledger is off
};

// ---------------------------------------------------------------------------
// Prepared sub-problem
// ---------------------------------------------------------------------------

struct ElementData {
    std::size_t a = 0;  ///< solver-order index of node a's x DOF
    std::size_t b = 0;  ///< solver-order index of node b's x DOF
    double length = 0.0;
    double stiffness = 0.0;   ///< E A
    double wave_time = 0.0;   ///< L sqrt(rho / E)
};

/**
 * @brief Network data laid out for the solver kernels.
 *
 * Holds a pointer to the network; the network must outlive the Problem.
 */
class Problem {
public:
    Problem(const FiberNetwork& network, const AffineBC& bc)
        : Problem(network, DofMap(network.node_count(), network.boundary_nodes())) {
        prescribed_.assign(dofs_.n_fixed(), 0.0);
        for (const auto& [node, disp] : apply_affine_bc(network, bc))
            for (int k = 0; k < 3; ++k)
                prescribed_[dofs_.perm()[3 * node + k] - dofs_.n_free()] = disp[k];
    }

    /// No constraints honoured: every DOF free, nothing prescribed. Used for raw force evaluation.
    static Problem unconstrained(const FiberNetwork& network) {
        return Problem(network, DofMap(network.node_count(), std::vector<std::size_t>{}));
    }

    const FiberNetwork& network() const noexcept { return *network_; }
    const DofMap& dofs() const noexcept { return dofs_; }
    std::size_t n_free() const noexcept { return dofs_.n_free(); }
    std::size_t n_total() const noexcept { return dofs_.n_total(); }
    const std::vector<ElementData>& elements() const noexcept { return elements_; }
    const std::vector<double>& reference() const noexcept { return reference_; }
    const std::vector<double>& prescribed() const noexcept { return prescribed_; }

private:
    Problem(const FiberNetwork& network, DofMap dofs) : network_(&network), dofs_(std::move(dofs)) {
        const auto& perm = dofs_.perm();
        reference_.resize(dofs_.n_total());
        for (std::size_t n = 0; n < network.node_count(); ++n)
            for (int k = 0; k < 3; ++k)
                reference_[perm[3 * n + k]] = network.nodes()[n][k];
        elements_.reserve(network.element_count());
        for (std::size_t e = 0; e < network.element_count(); ++e) {
            const auto& el = network.elements()[e];
            const auto& m = network.material_of(e);
            const double len = network.reference_length(e);
            elements_.push_back({perm[3 * el.node_a], perm[3 * el.node_b], len,
                                 m.elastic_modulus * m.cross_section_area,
                                 len * std::sqrt(m.density / m.elastic_modulus)});
        }
    }

    const FiberNetwork* network_;
    DofMap dofs_;
    std::vector<ElementData> elements_;
    std::vector<double> reference_;
    std::vector<double> prescribed_;
};

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Relative floor on the current element length before the direction becomes undefined.
inline constexpr double singular_length_ratio = 1e-12;

/// Each element's rho A L / 2 goes to both end nodes, and from there to all three of the node's DOFs.
inline std::vector<double> compute_lumped_mass(const FiberNetwork& network) {
    std::vector<double> node_mass(network.node_count(), 0.0);
    for (std::size_t e = 0; e < network.element_count(); ++e) {
        const auto& el = network.elements()[e];
        const auto& m = network.material_of(e);
        const double half = 0.5 * m.density * m.cross_section_area * network.reference_length(e);
        node_mass[el.node_a] += half;
        node_mass[el.node_b] += half;
    }
    std::vector<double> dof_mass(network.dof_count());
    for (std::size_t n = 0; n < node_mass.size(); ++n) {
        if (!(node_mass[n] > 0.0))
            throw ValidationError("node " + std::to_string(n) + ": zero lumped mass (not attached to any element)");
        dof_mass[3 * n] = dof_mass[3 * n + 1] = dof_mass[3 * n + 2] = node_mass[n];
    }
    return dof_mass;
}

/// Reference-length CFL bound: gamma * min_e L_e sqrt(rho_e / E_e).
inline double critical_time_step(const FiberNetwork& network, double dt_safety = 1.0) {
    double dt = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < network.element_count(); ++e) {
        const auto& m = network.material_of(e);
        dt = std::min(dt, network.reference_length(e) * std::sqrt(m.density / m.elastic_modulus));
    }
    return dt_safety * dt;
}

/**
 * Zero the force vector, then scatter each element's axial force. With `keep_previous` the
 * old forces are moved into `f_prev` in the same pass. Concurrent executors accumulate with
 * atomic adds; otherwise accumulation follows element order exactly.
 */
template <class Exec>
void internal_forces(const Problem& p, std::span<const double> u, std::span<double> f, Exec& ex,
                     std::span<double> f_prev = {}) {
    const std::size_t nt = p.n_total();
    const bool keep_previous = !f_prev.empty();
    ex.for_range(nt, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            if (keep_previous)
                f_prev[i] = f[i];
            f[i] = 0.0;
        }
    });

    const auto& X = p.reference();
    const auto& els = p.elements();
    const bool atomic = ex.concurrent();
    ex.for_range(els.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            const auto& el = els[k];
            Vec3 d;
            for (int c = 0; c < 3; ++c)
                d[c] = (X[el.b + c] + u[el.b + c]) - (X[el.a + c] + u[el.a + c]);
            const double l = norm(d);
            if (l < singular_length_ratio * el.length)
                throw SingularElementError(k, "element " + std::to_string(k) + ": current length collapsed");
            const double axial = el.stiffness * (l - el.length) / el.length;
            for (int c = 0; c < 3; ++c) {
                const double fc = axial * d[c] / l;
                if (atomic) {
                    std::atomic_ref<double>(f[el.a + c]).fetch_add(-fc, std::memory_order_relaxed);
                    std::atomic_ref<double>(f[el.b + c]).fetch_add(fc, std::memory_order_relaxed);
                } else {
                    f[el.a + c] -= fc;
                    f[el.b + c] += fc;
                }
            }
        }
    });
}

/// Internal forces for a displacement vector in original DOF order.
template <class Exec>
std::vector<double> internal_forces(const FiberNetwork& network, std::span<const double> u, Exec& ex) {
    if (u.size() != network.dof_count())
        throw std::invalid_argument("displacement length does not match DOF count");
    const auto p = Problem::unconstrained(network);
    std::vector<double> f(u.size(), 0.0);
    internal_forces(p, u, std::span<double>(f), ex);
    return f;
}

inline std::vector<double> internal_forces(const FiberNetwork& network, std::span<const double> u) {
    exec::SerialLane ex;
    return internal_forces(network, u, ex);
}

/// Total strain energy sum_e 1/2 E A L eps^2 (original DOF order). f_int is its gradient.
inline double strain_energy(const FiberNetwork& network, std::span<const double> u) {
    double w = 0.0;
    for (std::size_t e = 0; e < network.element_count(); ++e) {
        const auto& el = network.elements()[e];
        const auto& m = network.material_of(e);
        Vec3 d;
        for (int c = 0; c < 3; ++c)
            d[c] = (network.nodes()[el.node_b][c] + u[3 * el.node_b + c]) -
                   (network.nodes()[el.node_a][c] + u[3 * el.node_a + c]);
        const double len = network.reference_length(e);
        const double eps = (norm(d) - len) / len;
        w += 0.5 * m.elastic_modulus * m.cross_section_area * len * eps * eps;
    }
    return w;
}

/// L2 norm over the free prefix [0, n_free).
inline double force_residual(std::span<const double> f_int, std::size_t n_free) {
    if (n_free > f_int.size())
        throw std::invalid_argument("n_free exceeds vector length");
    double s = 0.0;
    for (std::size_t i = 0; i < n_free; ++i)
        s += f_int[i] * f_int[i];
    return std::sqrt(s);
}

/**
 * Fixed mode returns the configured coefficient. Adaptive mode returns 2 sqrt(lambda) with
 * lambda the Rayleigh quotient u'Ku / u'Mu over free DOFs, using the diagonal stiffness
 * estimate k_i = (f_i - f_prev_i) / (dt v_i) clamped at zero. Requires the state right after
 * the drift and force update, so that v holds the half-step velocity that produced the
 * displacement increment.
 */
template <class Vec, class Exec>
double damping_coefficient(const BasicMicroState<Vec>& s, const DampingMode& mode, Exec& ex) {
    if (const auto* fixed = std::get_if<FixedDamping>(&mode))
        return fixed->c;
    const auto& u = s.u;
    const auto& v = s.v;
    const auto& f = s.f_int;
    const auto& fp = s.f_prev;
    const auto& m = s.mass;
    const double dt = s.dt;
    const auto q = ex.sum(s.n_free, [&](std::size_t b, std::size_t e) {
        exec::Partials r{};
        for (std::size_t i = b; i < e; ++i) {
            double k = 0.0;
            if (v[i] != 0.0 && dt > 0.0)
                k = std::max(0.0, (f[i] - fp[i]) / (dt * v[i]));
            r[0] += u[i] * k * u[i];
            r[1] += u[i] * m[i] * u[i];
        }
        return r;
    });
    const double lambda = q[1] > 0.0 ? q[0] / q[1] : 0.0;
    return 2.0 * std::sqrt(lambda);
}

template <class Vec>
double damping_coefficient(const BasicMicroState<Vec>& s, const DampingMode& mode) {
    exec::SerialLane ex;
    return damping_coefficient(s, mode, ex);
}

/// Floor of the energy normaliser.
inline constexpr double energy_floor = 1e-300;

/// |W_ext - W_int - W_kin - W_damp| / max(|W_ext|, |W_int|, W_kin, floor)
inline double energy_balance(const EnergyLedger& e) {
    const double scale = std::max({std::abs(e.external), std::abs(e.internal), e.kinetic, energy_floor});
    return std::abs(e.external - e.internal - e.kinetic - e.damping) / scale;
}

template <class Vec>
double energy_balance(const BasicMicroState<Vec>& s) {
    return energy_balance(s.energy);
}

/// sym( (1/V) sum_b r_b (x) x_b ) over boundary nodes; u and f_int in original DOF order.
inline Mat3 average_stress(const FiberNetwork& network, std::span<const double> u, std::span<const double> f_int) {
    if (u.size() != network.dof_count() || f_int.size() != network.dof_count())
        throw std::invalid_argument("vector length does not match DOF count");
    Mat3 s{};
    for (auto b : network.boundary_nodes()) {
        Vec3 x, r;
        for (int k = 0; k < 3; ++k) {
            x[k] = network.nodes()[b][k] + u[3 * b + k];
            r[k] = f_int[3 * b + k];
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                s[i][j] += r[i] * x[j];
    }
    const double inv_v = 1.0 / network.volume();
    for (auto& row : s)
        for (auto& x : row)
            x *= inv_v;
    return symmetric_part(s);
}

// ---------------------------------------------------------------------------
// Solve loop
// ---------------------------------------------------------------------------

struct SolveOutcome {
    bool converged = false;
    std::size_t iters = 0;
    double residual = 0.0;
    double threshold = 0.0;
    double energy_residual = std::numeric_limits<double>::quiet_NaN();
};

/// Fresh state for a prepared problem: zero kinematics, lumped mass in solver order.
inline MicroState make_state(const Problem& p) {
    MicroState s;
    const std::size_t nt = p.n_total();
    s.u.assign(nt, 0.0);
    s.v.assign(nt, 0.0);
    s.a.assign(nt, 0.0);
    s.f_int.assign(nt, 0.0);
    s.f_prev.assign(nt, 0.0);
    s.mass = p.dofs().permute(compute_lumped_mass(p.network()));
    s.n_free = p.n_free();
    return s;
}

/**
 * @brief Run dynamic relaxation on one sub-problem.
 *
 * `s.mass` must already hold the lumped mass in solver order; every other vector is
 * (re)initialised here. The damping force uses the time-centred velocity
 * v^{n+1} = (v^{n+1/2} - dt/2 f/m) / (1 + c dt/2), which keeps the update stable for any c >= 0.
 */
template <class Vec, class Exec>
SolveOutcome relax(const Problem& p, BasicMicroState<Vec>& s, const SolverConfig& cfg, Exec& ex) {
    cfg.validate();
    const std::size_t nf = p.n_free();
    const std::size_t nt = p.n_total();
    const std::size_t nfix = nt - nf;
    for (const Vec* vec : {&s.u, &s.v, &s.a, &s.f_int, &s.f_prev, &s.mass})
        if (vec->size() != nt)
            throw std::invalid_argument("state vector length does not match DOF count");

    const std::span<double> u = s.u, v = s.v, a = s.a, f = s.f_int, fp = s.f_prev;
    const std::span<const double> m = s.mass;
    const auto& pre = p.prescribed();
    const auto& els = p.elements();
    const std::size_t ramp = cfg.bc_ramp_iters;
    const bool track = cfg.energy_check_interval > 0;

    s.n_free = nf;
    s.iter = 0;
    s.energy = {};
    s.residual = 0.0;

    // Displacement boundary conditions on the fixed suffix; everything else at rest.
    ex.for_range(nt, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            u[i] = (i < nf || ramp > 0) ? 0.0 : pre[i - nf];
            v[i] = 0.0;
            a[i] = 0.0;
            fp[i] = 0.0;
        }
    });

    internal_forces(p, u, f, ex);
    if (track && ramp == 0) {
        const auto w = ex.sum(nfix, [&](std::size_t b, std::size_t e) {
            exec::Partials r{};
            for (std::size_t i = b; i < e; ++i)
                r[0] += 0.5 * f[nf + i] * u[nf + i];
            return r;
        });
        s.energy.internal = s.energy.external = w[0];
    }

    ex.for_range(nf, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            a[i] = -f[i] / m[i];
    });
    s.damping = 0.0;

    SolveOutcome out;
    double r_ref = -1.0;
    double threshold = std::numeric_limits<double>::infinity();
    do {
        // Time step.
        const double dt = cfg.dt_safety * ex.min(els.size(), [&](std::size_t b, std::size_t e) {
            double t = std::numeric_limits<double>::infinity();
            for (std::size_t k = b; k < e; ++k)
                t = std::min(t, els[k].wave_time);
            return t;
        });
        s.dt = dt;

        // Half kick and drift on the free prefix.
        ex.for_range(nf, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                v[i] += 0.5 * dt * a[i];
                u[i] += dt * v[i];
            }
        });
        const bool ramping = s.iter < ramp;
        if (ramping) {
            const double now = double(s.iter + 1) / double(ramp);
            ex.for_range(nfix, [&](std::size_t b, std::size_t e) {
                for (std::size_t i = b; i < e; ++i)
                    u[nf + i] = pre[i] * now;
            });
        }

        internal_forces(p, u, f, ex, fp);

        const double c = damping_coefficient(s, cfg.damping, ex);
        s.damping = c;

        if (track && ramping) {
            const double before = double(s.iter) / double(ramp);
            const double now = double(s.iter + 1) / double(ramp);
            const auto w = ex.sum(nfix, [&](std::size_t b, std::size_t e) {
                exec::Partials r{};
                for (std::size_t i = b; i < e; ++i) {
                    const std::size_t j = nf + i;
                    r[0] += 0.5 * (f[j] + fp[j]) * (pre[i] * now - pre[i] * before);
                }
                return r;
            });
            s.energy.internal += w[0];
            s.energy.external += w[0];
        }

        // Damping force, residual, accelerations and the closing half kick, fused.
        const double inv_damp = 1.0 / (1.0 + 0.5 * c * dt);
        const auto q = ex.sum(nf, [&](std::size_t b, std::size_t e) {
            exec::Partials r{};
            for (std::size_t i = b; i < e; ++i) {
                const double v_full = (v[i] - 0.5 * dt * f[i] / m[i]) * inv_damp;
                const double f_damp = c * m[i] * v_full;
                r[0] += f[i] * f[i];
                if (track) {
                    const double du = dt * v[i];
                    const double f_damp_prev = -m[i] * a[i] - fp[i];
                    r[1] += 0.5 * (f[i] + fp[i]) * du;
                    r[2] += 0.5 * (f_damp + f_damp_prev) * du;
                }
                a[i] = (-f[i] - f_damp) / m[i];
                v[i] += 0.5 * dt * a[i];
                r[3] += 0.5 * m[i] * v[i] * v[i];
            }
            return r;
        });
        s.residual = std::sqrt(q[0]);
        if (track) {
            s.energy.internal += q[1];
            s.energy.damping += q[2];
            s.energy.kinetic = q[3];
            if ((s.iter + 1) % cfg.energy_check_interval == 0)
                out.energy_residual = energy_balance(s.energy);
        }

        ++s.iter;
        const bool bc_applied = s.iter >= ramp;
        if (bc_applied && r_ref < 0.0) {
            r_ref = s.residual;
            threshold = std::max(cfg.tol_abs, cfg.tol_rel * r_ref);
        }
        out.converged = bc_applied && s.residual <= threshold;
    } while (!out.converged && s.iter < cfg.max_iters);

    if (track)
        out.energy_residual = energy_balance(s.energy);
    out.iters = s.iter;
    out.residual = s.residual;
    out.threshold = threshold;
    return out;
}

/// Build the public result from a finished solve (u and f_int in solver order).
inline SolveResult make_result(const Problem& p, const SolveOutcome& o, std::span<const double> u_solver,
                               std::span<const double> f_solver) {
    SolveResult r;
    r.converged = o.converged;
    r.iters = o.iters;
    r.final_residual = o.residual;
    r.threshold = o.threshold;
    r.energy_residual = o.energy_residual;
    r.u.resize(p.n_total());
    std::vector<double> f(p.n_total());
    p.dofs().unpermute(u_solver, std::span<double>(r.u));
    p.dofs().unpermute(f_solver, std::span<double>(f));
    r.avg_stress = average_stress(p.network(), r.u, f);
    return r;
}

/// Single sub-problem, serial lane.
inline SolveResult dynamic_relaxation_solve(const FiberNetwork& network, const AffineBC& bc,
                                            const SolverConfig& config = {}) {
    const Problem p(network, bc);
    auto s = make_state(p);
    exec::SerialLane ex;
    const auto o = relax(p, s, config, ex);
    return make_result(p, o, s.u, s.f_int);
}

/// True when the free-DOF residual of `u` (original order), recomputed from scratch, meets `threshold`.
inline bool residual_satisfied(const FiberNetwork& network, std::span<const double> u, double threshold) {
    const auto f = internal_forces(network, u);
    const DofMap dofs(network.node_count(), network.boundary_nodes());
    const auto fs = dofs.permute(f);
    return force_residual(fs, dofs.n_free()) <= threshold;
}

} // namespace drb
