#pragma once

#include <cstddef>
#include <vector>

#include "phasereg/controls.hpp"
#include "phasereg/forward.hpp"

namespace phasereg {

struct CostSpec {
    NormPowers powers;
    double c_top = 1e8;
    double c_end = 1e9;
};

/// U(fT) = C_end dx^2 sum_ij ( |D|^r* + |DM*D|^r* + |DM^T*D|^r* ), D = fT - target.
/// A discrete W^{1,r*} misfit raised to the power r*.
double endpoint_cost(const Field& fT, const Field& target_T, const NormPowers& powers, double c_end,
                     const KernelSet& kernels);

/// dU/dF(T), chained through fT = M * F(T).
Field endpoint_cost_grad(const Field& fT, const Field& target_T, const NormPowers& powers, double c_end,
                         const KernelSet& kernels);

/// Cotangents produced by transposing one forward step.
struct StepCotangents {
    Field lambda;  // w.r.t. F(k)
    Field u;       // w.r.t. u_k
    Field m1;      // w.r.t. m1_k
    Field m2;      // w.r.t. m2_k
};

/// Jacobian-vector product of step k of `traj`: the first-order change of
/// F(k+1) for perturbations (dF, du, dm1, dm2) of (F(k), u_k, m1_k, m2_k).
/// Forward-mode counterpart of step_adjoint().
Field step_tangent(const Trajectory& traj, std::size_t k, const Field& u_k, const Field& dF, const Field& du,
                   const Field& dm1, const Field& dm2, const EvolutionModel& model);

/// Vector-Jacobian product of step k of `traj` applied to `lambda_next`
/// (a cotangent on F(k+1)). Requires the caches filled by evolve().
StepCotangents step_adjoint(const Field& lambda_next, const Trajectory& traj, std::size_t k,
                            const Field& u_k, const EvolutionModel& model);

struct GradientPair {
    std::vector<Field> grad_u;
    std::vector<Field> grad_m1;
    std::vector<Field> grad_m2;

    /// Same stacking order as ControlSet::flatten().
    std::vector<double> flatten() const;
};

struct EnergyBreakdown {
    double u_cost = 0.0;         // C_top ||u||_U^p
    double v_cost = 0.0;         // dt sum_k ||v_k||_V^p
    double endpoint = 0.0;       // U(f(T))
    double total() const { return u_cost + v_cost + endpoint; }
};

struct Evaluation {
    EnergyBreakdown energy;
    GradientPair grad;
};

/// Energy only (one forward sweep).
EnergyBreakdown energy(const ControlSet& controls, const Field& F0, const Field& target_T, const CostSpec& cost,
                       const EvolutionModel& model);
EnergyBreakdown energy(const ControlSet& controls, const Trajectory& traj, const Field& target_T,
                       const CostSpec& cost, const EvolutionModel& model);

/// Energy and its exact gradient for the trajectory produced by `controls`.
///
/// Costate convention: lambda(T) = +dU/dF(T), lambda(k) = (dF(k+1)/dF(k))^T
/// lambda(k+1); the control gradient is the norm derivative plus the
/// transported cotangent. Slot 0 gradients are zero since that slot is fixed.
Evaluation gradient(const ControlSet& controls, const Trajectory& traj, const Field& target_T,
                    const CostSpec& cost, const EvolutionModel& model);

}  // namespace phasereg
