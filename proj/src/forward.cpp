#include "phasereg/forward.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "phasereg/errors.hpp"

namespace phasereg {

namespace {

bool all_zero(const Field& f) {
    for (double v : f.values())
        if (v != 0.0) return false;
    return true;
}

void require_finite(const Field& f, const char* what, std::size_t index) {
    for (double v : f.values()) {
        if (!std::isfinite(v))
            throw NumericalError(std::string("non-finite ") + what + " at step " + std::to_string(index));
    }
}

Field velocity(const Field& m, const KernelSet& kernels) {
    // FFT of an all-zero field is exactly zero; skipping it is only a shortcut
    if (all_zero(m)) return Field(m.rows(), m.cols());
    return kernels.rkhs_op.apply(m);
}

Field drift_from_parts(const Field& fk, const Field& gx, const Field& gy, const Field& u_k, const Field& v1,
                       const Field& v2, const EvolutionModel& model) {
    const double psi2 = model.chi.psi * model.chi.psi;
    Field out(fk.rows(), fk.cols());
    for (std::size_t k = 0; k < fk.size(); ++k) {
        const double c = std::sqrt(gx[k] * gx[k] + gy[k] * gy[k] + psi2);
        out[k] = u_k[k] * c - v1[k] * gx[k] - v2[k] * gy[k] + model.reaction(fk[k]);
    }
    return out;
}

}  // namespace

EvolutionModel make_model(const GridSpec& grid, const RadialKernelSpec& kappa, const ReactionSpec& reaction,
                          const MbpMap& mbp) {
    if (reaction.well_depth < 0.0) throw std::invalid_argument("make_model: W must be nonnegative");
    EvolutionModel model;
    model.kernels = build_kernels(grid, kappa);
    model.reaction = reaction;
    model.mbp = mbp;
    model.chi = ChiSpec::from_time_step(grid.dt);
    return model;
}

Field ingest_initial(const Field& image, bool soft) {
    Field out(image.rows(), image.cols());
    for (std::size_t i = 0; i < image.rows(); ++i) {
        for (std::size_t j = 0; j < image.cols(); ++j) {
            const double v = image(i, j);
            const bool ok = soft ? (v >= 0.0 && v <= 1.0) : (v == 0.0 || v == 1.0);
            if (!ok) {
                throw std::invalid_argument("ingest_initial: entry (" + std::to_string(i) + ", " +
                                            std::to_string(j) + ") = " + std::to_string(v) +
                                            (soft ? " outside [0, 1]" : " is not binary (use soft input for grayscale)"));
            }
            out(i, j) = v;
        }
    }
    return out;
}

Field drift(const Field& fk, const Field& u_k, const Field& v1, const Field& v2, const EvolutionModel& model) {
    require_same_shape(fk, u_k, "drift");
    require_same_shape(fk, v1, "drift");
    require_same_shape(fk, v2, "drift");
    const Field gx = model.kernels.heat_dx_op.apply(fk);
    const Field gy = model.kernels.heat_dy_op.apply(fk);
    return drift_from_parts(fk, gx, gy, u_k, v1, v2, model);
}

StepResult step(const Field& Fk, const Field& u_k, const Field& m1_k, const Field& m2_k,
                const EvolutionModel& model, std::size_t index) {
    require_same_shape(Fk, u_k, "step");
    require_same_shape(Fk, m1_k, "step");
    require_same_shape(Fk, m2_k, "step");
    const KernelSet& ks = model.kernels;
    const MbpMap& g = model.mbp;
    const double dt = model.grid().dt;

    StepResult r;
    r.smoothed = ks.heat_op.apply(Fk);
    r.gx = ks.heat_dx_op.apply(r.smoothed);
    r.gy = ks.heat_dy_op.apply(r.smoothed);
    r.v1 = velocity(m1_k, ks);
    r.v2 = velocity(m2_k, ks);
    r.drift = drift_from_parts(r.smoothed, r.gx, r.gy, u_k, r.v1, r.v2, model);
    require_finite(r.drift, "drift", index);

    r.next = Field(Fk.rows(), Fk.cols());
    for (std::size_t k = 0; k < Fk.size(); ++k) {
        // M * F can graze the ends of (-a, 1 + a) through rounding
        const double fc = g.clamp(r.smoothed[k]);
        const double y = g.g(fc) + dt * g.g_prime(fc) * r.drift[k];
        r.next[k] = g.g_inv(y);
    }
    require_finite(r.next, "state", index);
    return r;
}

Trajectory evolve(const Field& F0, const ControlSet& controls, const EvolutionModel& model) {
    const GridSpec& grid = model.grid();
    if (F0.rows() != static_cast<std::size_t>(grid.n) || F0.cols() != static_cast<std::size_t>(grid.n))
        throw std::invalid_argument("evolve: initial state does not match the grid");
    controls.validate(grid);

    const auto steps = static_cast<std::size_t>(grid.time_steps - 1);
    Trajectory traj;
    traj.grid = grid;
    traj.F.reserve(steps + 1);
    traj.F.push_back(F0);
    for (std::size_t k = 0; k < steps; ++k) {
        StepResult r = step(traj.F.back(), controls.u.slices[k], controls.m.m1[k], controls.m.m2[k], model, k);
        traj.f.push_back(std::move(r.smoothed));
        traj.V.push_back(std::move(r.drift));
        traj.gx.push_back(std::move(r.gx));
        traj.gy.push_back(std::move(r.gy));
        traj.v1.push_back(std::move(r.v1));
        traj.v2.push_back(std::move(r.v2));
        traj.F.push_back(std::move(r.next));
    }
    traj.f.push_back(model.kernels.heat_op.apply(traj.F.back()));
    return traj;
}

Trajectory evolve_uncontrolled(const Field& F0, const EvolutionModel& model) {
    return evolve(F0, ControlSet::zeros(model.grid()), model);
}

}  // namespace phasereg
