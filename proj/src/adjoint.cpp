#include "phasereg/adjoint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace phasereg {

namespace {

// d/dx |x|^q = q |x|^(q-1) sign(x)
double abs_pow_derivative(double x, double q) {
    if (x == 0.0) return 0.0;
    const double d = q * std::pow(std::abs(x), q - 1.0);
    return x > 0.0 ? d : -d;
}

double abs_pow_sum(const Field& f, double q) {
    double s = 0.0;
    for (double v : f.values()) s += std::pow(std::abs(v), q);
    return s;
}

}  // namespace

double endpoint_cost(const Field& fT, const Field& target_T, const NormPowers& powers, double c_end,
                     const KernelSet& kernels) {
    const Field diff = fT - target_T;
    const Field d1 = kernels.heat_dx_op.apply(diff);
    const Field d2 = kernels.heat_dy_op.apply(diff);
    const double q = powers.r_star();
    return c_end * kernels.grid.cell_area() * (abs_pow_sum(diff, q) + abs_pow_sum(d1, q) + abs_pow_sum(d2, q));
}

Field endpoint_cost_grad(const Field& fT, const Field& target_T, const NormPowers& powers, double c_end,
                         const KernelSet& kernels) {
    const Field diff = fT - target_T;
    const Field d1 = kernels.heat_dx_op.apply(diff);
    const Field d2 = kernels.heat_dy_op.apply(diff);
    const double q = powers.r_star();
    const double w = c_end * kernels.grid.cell_area();

    Field c0(diff.rows(), diff.cols()), c1(diff.rows(), diff.cols()), c2(diff.rows(), diff.cols());
    for (std::size_t k = 0; k < diff.size(); ++k) {
        c0[k] = w * abs_pow_derivative(diff[k], q);
        c1[k] = w * abs_pow_derivative(d1[k], q);
        c2[k] = w * abs_pow_derivative(d2[k], q);
    }
    Field grad_f = c0;
    grad_f += kernels.heat_dx_op.apply_adjoint(c1);
    grad_f += kernels.heat_dy_op.apply_adjoint(c2);
    return kernels.heat_op.apply_adjoint(grad_f);
}

namespace {

void require_step_cache(const Trajectory& traj, std::size_t k, const char* what) {
    if (k >= traj.V.size() || k >= traj.gx.size() || k >= traj.v1.size() || k >= traj.f.size())
        throw std::out_of_range(std::string(what) + ": no cached forward data for step " + std::to_string(k));
}

}  // namespace

Field step_tangent(const Trajectory& traj, std::size_t k, const Field& u_k, const Field& dF, const Field& du,
                   const Field& dm1, const Field& dm2, const EvolutionModel& model) {
    require_step_cache(traj, k, "step_tangent");
    const Field& f = traj.f[k];
    const Field& V = traj.V[k];
    const Field& gx = traj.gx[k];
    const Field& gy = traj.gy[k];
    const Field& v1 = traj.v1[k];
    const Field& v2 = traj.v2[k];
    for (const Field* x : {&u_k, &dF, &du, &dm1, &dm2}) require_same_shape(*x, f, "step_tangent");

    const MbpMap& g = model.mbp;
    const KernelSet& ks = model.kernels;
    const double dt = model.grid().dt;
    const double psi2 = model.chi.psi * model.chi.psi;

    const Field df = ks.heat_op.apply(dF);
    const Field dgx = ks.heat_dx_op.apply(df);
    const Field dgy = ks.heat_dy_op.apply(df);
    const Field dv1 = ks.rkhs_op.apply(dm1);
    const Field dv2 = ks.rkhs_op.apply(dm2);

    Field out(f.rows(), f.cols());
    for (std::size_t e = 0; e < f.size(); ++e) {
        const double chi = std::sqrt(gx[e] * gx[e] + gy[e] * gy[e] + psi2);
        const double dchi = (gx[e] * dgx[e] + gy[e] * dgy[e]) / chi;
        const double dV = du[e] * chi + u_k[e] * dchi - dv1[e] * gx[e] - v1[e] * dgx[e] - dv2[e] * gy[e] -
                          v2[e] * dgy[e] + model.reaction.derivative(f[e]) * df[e];
        const double fc = g.clamp(f[e]);
        const double gp = g.g_prime(fc);
        double dy = dt * gp * dV;
        if (fc == f[e]) dy += (gp + dt * g.g_second(fc) * V[e]) * df[e];
        out[e] = g.g_inv_prime(g.g(fc) + dt * gp * V[e]) * dy;
    }
    return out;
}

StepCotangents step_adjoint(const Field& lambda_next, const Trajectory& traj, std::size_t k, const Field& u_k,
                            const EvolutionModel& model) {
    require_step_cache(traj, k, "step_adjoint");
    const Field& f = traj.f[k];
    const Field& V = traj.V[k];
    const Field& gx = traj.gx[k];
    const Field& gy = traj.gy[k];
    const Field& v1 = traj.v1[k];
    const Field& v2 = traj.v2[k];
    require_same_shape(lambda_next, f, "step_adjoint");
    require_same_shape(u_k, f, "step_adjoint");

    const MbpMap& g = model.mbp;
    const KernelSet& ks = model.kernels;
    const double dt = model.grid().dt;
    const double psi2 = model.chi.psi * model.chi.psi;
    const std::size_t rows = f.rows(), cols = f.cols();

    Field cf(rows, cols), cgx(rows, cols), cgy(rows, cols);
    StepCotangents out{Field(rows, cols), Field(rows, cols), Field(rows, cols), Field(rows, cols)};
    Field cv1(rows, cols), cv2(rows, cols);

    for (std::size_t e = 0; e < f.size(); ++e) {
        const double fc = g.clamp(f[e]);
        const bool interior = fc == f[e];
        const double gp = g.g_prime(fc);
        const double y = g.g(fc) + dt * gp * V[e];
        // cotangent on y = g(f) + dt g'(f) V
        const double w = lambda_next[e] * g.g_inv_prime(y);
        // cotangent on V
        const double q = dt * gp * w;
        const double chi = std::sqrt(gx[e] * gx[e] + gy[e] * gy[e] + psi2);

        double local = q * model.reaction.derivative(f[e]);
        if (interior) local += w * (gp + dt * g.g_second(fc) * V[e]);
        cf[e] = local;
        cgx[e] = q * (u_k[e] * gx[e] / chi - v1[e]);
        cgy[e] = q * (u_k[e] * gy[e] / chi - v2[e]);

        out.u[e] = q * chi;
        cv1[e] = -q * gx[e];
        cv2[e] = -q * gy[e];
    }
    cf += ks.heat_dx_op.apply_adjoint(cgx);
    cf += ks.heat_dy_op.apply_adjoint(cgy);
    out.lambda = ks.heat_op.apply_adjoint(cf);
    out.m1 = ks.rkhs_op.apply_adjoint(cv1);
    out.m2 = ks.rkhs_op.apply_adjoint(cv2);
    return out;
}

std::vector<double> GradientPair::flatten() const {
    std::vector<double> x;
    for (const auto* block : {&grad_u, &grad_m1, &grad_m2})
        for (const auto& s : *block) x.insert(x.end(), s.values().begin(), s.values().end());
    return x;
}

EnergyBreakdown energy(const ControlSet& controls, const Trajectory& traj, const Field& target_T,
                       const CostSpec& cost, const EvolutionModel& model) {
    EnergyBreakdown e;
    e.u_cost = cost.c_top * u_norm_p(controls.u, cost.powers, model.grid());
    e.v_cost = velocity_cost(controls.m, cost.powers, model.kernels);
    e.endpoint = endpoint_cost(traj.final_smoothed(), target_T, cost.powers, cost.c_end, model.kernels);
    return e;
}

EnergyBreakdown energy(const ControlSet& controls, const Field& F0, const Field& target_T, const CostSpec& cost,
                       const EvolutionModel& model) {
    return energy(controls, evolve(F0, controls, model), target_T, cost, model);
}

Evaluation gradient(const ControlSet& controls, const Trajectory& traj, const Field& target_T,
                    const CostSpec& cost, const EvolutionModel& model) {
    const GridSpec& grid = model.grid();
    const std::size_t steps = controls.steps();
    if (traj.V.size() != steps)
        throw std::invalid_argument("gradient: trajectory and controls disagree on the number of steps");
    require_same_shape(traj.final_smoothed(), target_T, "gradient");

    const double p = cost.powers.p();
    const double r = cost.powers.r();

    Evaluation ev;
    ev.energy = energy(controls, traj, target_T, cost, model);
    ev.grad.grad_u.assign(steps, grid.zeros());
    ev.grad.grad_m1.assign(steps, grid.zeros());
    ev.grad.grad_m2.assign(steps, grid.zeros());

    Field lambda =
        endpoint_cost_grad(traj.final_smoothed(), target_T, cost.powers, cost.c_end, model.kernels);

    for (std::size_t kk = steps; kk-- > 0;) {
        const Field& u = controls.u.slices[kk];
        StepCotangents ct = step_adjoint(lambda, traj, kk, u, model);
        lambda = std::move(ct.lambda);
        if (kk == 0) break;

        Field& gu = ev.grad.grad_u[kk];
        double s = 0.0;
        for (double v : u.values()) s += std::pow(std::abs(v), r);
        const double cs = s > 0.0 ? cost.c_top * p * grid.dt * std::pow(grid.cell_area() * s, (p - r) / r) *
                                        grid.cell_area()
                                  : 0.0;
        for (std::size_t e = 0; e < u.size(); ++e)
            gu[e] = cs * std::pow(std::abs(u[e]), r - 2.0) * u[e] + ct.u[e];

        const Field& v1 = traj.v1[kk];
        const Field& v2 = traj.v2[kk];
        const double qn = std::max(0.0, dot(controls.m.m1[kk], v1) + dot(controls.m.m2[kk], v2));
        const double cm = qn > 0.0 ? p * grid.dt * std::pow(qn, (p - 2.0) / 2.0) : 0.0;
        Field& g1 = ev.grad.grad_m1[kk];
        Field& g2 = ev.grad.grad_m2[kk];
        for (std::size_t e = 0; e < u.size(); ++e) {
            g1[e] = cm * v1[e] + ct.m1[e];
            g2[e] = cm * v2[e] + ct.m2[e];
        }
    }
    return ev;
}

}  // namespace phasereg
