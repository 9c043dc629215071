#pragma once

#include <cstddef>
#include <vector>

#include "phasereg/controls.hpp"
#include "phasereg/field.hpp"
#include "phasereg/field_ops.hpp"
#include "phasereg/grid.hpp"

namespace phasereg {

/// Everything the state evolution needs besides the controls.
struct EvolutionModel {
    KernelSet kernels;
    ReactionSpec reaction;
    MbpMap mbp;
    ChiSpec chi;

    const GridSpec& grid() const { return kernels.grid; }
};

/// Builds kernels for `grid`; chi defaults to psi^2 = dt * 1e-16.
EvolutionModel make_model(const GridSpec& grid, const RadialKernelSpec& kappa = {},
                          const ReactionSpec& reaction = {}, const MbpMap& mbp = {});

/// States F(0..T-1) of the time-discrete scheme. F(0) is the initial image;
/// step k (k = 0..T-2) uses control slot k and maps F(k) to F(k+1).
///
/// The per-step quantities are cached for the backward sweep: f(k) = M * F(k)
/// for every state, and the drift V(k), smoothed derivatives gx(k), gy(k)
/// and velocities v1(k), v2(k) for every step.
struct Trajectory {
    GridSpec grid;
    std::vector<Field> F;
    std::vector<Field> f;
    std::vector<Field> V;
    std::vector<Field> gx;
    std::vector<Field> gy;
    std::vector<Field> v1;
    std::vector<Field> v2;

    const Field& final_smoothed() const { return f.back(); }
};

/// Maps a {0,1} image onto the initial state. With `soft` any value in [0,1]
/// is accepted; otherwise non-binary entries throw std::invalid_argument.
Field ingest_initial(const Field& image, bool soft = false);

/// V = u chi(DM*f, DM^T*f) - v1 (DM*f) - v2 (DM^T*f) + I(f), for an already smoothed f.
Field drift(const Field& fk, const Field& u_k, const Field& v1, const Field& v2, const EvolutionModel& model);

struct StepResult {
    Field next;      // F(k+1)
    Field smoothed;  // f(k)
    Field drift;     // V(k)
    Field gx, gy;    // DM * f(k), DM^T * f(k)
    Field v1, v2;
};

/// F(k+1) = g^-1( g(f_k) + dt g'(f_k) V_k ), f_k = M * F_k.
/// Throws NumericalError naming `index` on a non-finite intermediate.
StepResult step(const Field& Fk, const Field& u_k, const Field& m1_k, const Field& m2_k,
                const EvolutionModel& model, std::size_t index = 0);

Trajectory evolve(const Field& F0, const ControlSet& controls, const EvolutionModel& model);

/// Zero-control evolution (diffusion and reaction only).
Trajectory evolve_uncontrolled(const Field& F0, const EvolutionModel& model);

}  // namespace phasereg
