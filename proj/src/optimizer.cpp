#include "phasereg/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "phasereg/errors.hpp"
#include "phasereg/serialize.hpp"

namespace phasereg {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct Probe {
    double alpha = 0.0;
    double value = 0.0;
    double slope = 0.0;  // d/dalpha along the direction
    std::vector<double> x;
    std::vector<double> grad;
    bool finite = true;
};

// Minimiser of the cubic through (a, fa, da), (b, fb, db); NaN if it has none.
double cubic_min(double a, double fa, double da, double b, double fb, double db) {
    const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
    const double disc = d1 * d1 - da * db;
    if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double den = db - da + 2.0 * d2;
    if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return b - (b - a) * (db + d2 - d1) / den;
}

class LineSearch {
public:
    LineSearch(const Objective& objective, std::span<const double> x0, double f0, std::span<const double> g0,
               std::span<const double> d, const OptimizerConfig& config)
        : objective_(objective), x0_(x0), f0_(f0), d_(d), config_(config), slope0_(dot(g0, d)) {}

    LineSearchResult run(double alpha) {
        LineSearchResult out;
        if (!(slope0_ < 0.0)) {
            out.failure = "not a descent direction (<g, d> = " + std::to_string(slope0_) + ")";
            return out;
        }
        if (!(alpha > 0.0) || !std::isfinite(alpha)) {
            out.failure = "initial step must be positive and finite";
            return out;
        }
        Probe prev{0.0, f0_, slope0_, {}, {}, true};
        for (int i = 0; budget_left(); ++i) {
            Probe cur = probe(alpha);
            if (!cur.finite || cur.value > armijo(alpha) || (i > 0 && cur.value >= prev.value))
                return zoom(prev, cur, out);
            if (std::abs(cur.slope) <= -config_.wolfe_c2 * slope0_) return accept(std::move(cur), out);
            if (cur.slope >= 0.0) return zoom(cur, prev, out);
            prev = std::move(cur);
            alpha *= 2.0;
        }
        return fail(out, "step bracketing exhausted the evaluation budget");
    }

private:
    bool budget_left() const { return evaluations_ < config_.max_line_search; }
    double armijo(double alpha) const { return f0_ + config_.wolfe_c1 * alpha * slope0_; }

    Probe probe(double alpha) {
        ++evaluations_;
        Probe p;
        p.alpha = alpha;
        p.x.resize(x0_.size());
        for (std::size_t i = 0; i < x0_.size(); ++i) p.x[i] = x0_[i] + alpha * d_[i];
        try {
            p.value = objective_(p.x, p.grad);
        } catch (const NumericalError&) {
            // overshoot into non-finite territory: treat as too long a step
            p.finite = false;
            return p;
        }
        p.finite = std::isfinite(p.value);
        if (p.finite) {
            p.slope = dot(p.grad, d_);
            p.finite = std::isfinite(p.slope);
        }
        return p;
    }

    LineSearchResult& accept(Probe p, LineSearchResult& out) {
        out.ok = true;
        out.step = p.alpha;
        out.value = p.value;
        out.x = std::move(p.x);
        out.grad = std::move(p.grad);
        out.evaluations = evaluations_;
        return out;
    }

    LineSearchResult& fail(LineSearchResult& out, const std::string& why) {
        out.ok = false;
        out.evaluations = evaluations_;
        out.failure = why;
        return out;
    }

    // lo satisfies sufficient decrease and has the lowest value seen so far;
    // the minimiser lies between lo and hi.
    LineSearchResult& zoom(Probe lo, Probe hi, LineSearchResult& out) {
        while (budget_left()) {
            const double a = lo.alpha, b = hi.alpha;
            const double width = std::abs(b - a);
            if (width <= 1e-16 * std::max(1.0, std::abs(a))) return fail(out, "bracket collapsed");
            double alpha = hi.finite ? cubic_min(a, lo.value, lo.slope, b, hi.value, hi.slope)
                                     : std::numeric_limits<double>::quiet_NaN();
            const double left = std::min(a, b) + 0.1 * width, right = std::max(a, b) - 0.1 * width;
            if (!std::isfinite(alpha) || alpha < left || alpha > right) alpha = 0.5 * (a + b);

            Probe cur = probe(alpha);
            if (!cur.finite || cur.value > armijo(alpha) || cur.value >= lo.value) {
                hi = std::move(cur);
                continue;
            }
            if (std::abs(cur.slope) <= -config_.wolfe_c2 * slope0_) return accept(std::move(cur), out);
            if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = std::move(lo);
            lo = std::move(cur);
        }
        return fail(out, "zoom exhausted the evaluation budget");
    }

    const Objective& objective_;
    std::span<const double> x0_;
    double f0_;
    std::span<const double> d_;
    const OptimizerConfig& config_;
    double slope0_;
    int evaluations_ = 0;
};

// -H g by the two-loop recursion, H0 = gamma diag(h0).
std::vector<double> search_direction(const OptimizerState& st, const std::vector<double>& h0) {
    const std::size_t m = st.s_hist.size();
    std::vector<double> q = st.grad;
    std::vector<double> alpha(m);
    for (std::size_t k = m; k-- > 0;) {
        const double rho = 1.0 / dot(st.y_hist[k], st.s_hist[k]);
        alpha[k] = rho * dot(st.s_hist[k], q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * st.y_hist[k][i];
    }
    double gamma = 1.0;
    if (m > 0) {
        const auto& s = st.s_hist.back();
        const auto& y = st.y_hist.back();
        double yhy = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) yhy += y[i] * y[i] * (h0.empty() ? 1.0 : h0[i]);
        gamma = dot(s, y) / yhy;
    }
    for (std::size_t i = 0; i < q.size(); ++i) q[i] *= gamma * (h0.empty() ? 1.0 : h0[i]);
    for (std::size_t k = 0; k < m; ++k) {
        const double rho = 1.0 / dot(st.y_hist[k], st.s_hist[k]);
        const double beta = rho * dot(st.y_hist[k], q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] += st.s_hist[k][i] * (alpha[k] - beta);
    }
    for (double& v : q) v = -v;
    return q;
}

std::vector<double> scaled_steepest(const std::vector<double>& g, const std::vector<double>& h0) {
    std::vector<double> d(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i] * (h0.empty() ? 1.0 : h0[i]);
    return d;
}

// First trial step: unit length for an unscaled direction, 1 once curvature is known.
double first_step(const OptimizerState& st, const std::vector<double>& d) {
    if (!st.s_hist.empty()) return 1.0;
    const double n = norm(d);
    return n > 1.0 ? 1.0 / n : 1.0;
}

bool converged(const OptimizerState& st, const OptimizerConfig& config) {
    const double g = norm(st.grad);
    return g == 0.0 || g <= config.grad_abs_tol || g <= config.grad_tol * st.initial_grad_norm;
}

void require_finite(const OptimizerState& st) {
    if (!std::isfinite(st.value))
        throw NumericalError("objective is non-finite at iteration " + std::to_string(st.iteration));
    for (double v : st.grad)
        if (!std::isfinite(v))
            throw NumericalError("gradient is non-finite at iteration " + std::to_string(st.iteration));
}

constexpr char kStateMagic[8] = {'P', 'H', 'R', 'E', 'G', 'O', 'P', 'T'};
constexpr std::uint32_t kStateVersion = 1;

void write_vec(std::ostream& os, const std::vector<double>& v) {
    write_u64(os, v.size());
    write_f64s(os, v);
}

std::vector<double> read_vec(std::istream& is) {
    const std::uint64_t n = read_u64(is);
    if (n > (std::uint64_t{1} << 36)) throw IoError("implausible vector length in optimizer state");
    return read_f64s(is, static_cast<std::size_t>(n));
}

}  // namespace

void OptimizerConfig::validate() const {
    if (memory < 1) throw std::invalid_argument("optimizer: memory must be >= 1");
    if (max_iters < 0) throw std::invalid_argument("optimizer: max_iters must be >= 0");
    if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
        throw std::invalid_argument("optimizer: need 0 < c1 < c2 < 1");
    if (!(grad_tol >= 0.0) || !(grad_abs_tol >= 0.0)) throw std::invalid_argument("optimizer: negative tolerance");
    if (max_line_search < 1) throw std::invalid_argument("optimizer: max_line_search must be >= 1");
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::converged: return "converged";
        case Termination::max_iters: return "max_iters";
        case Termination::line_search_failure: return "line_search_failure";
    }
    return "unknown";
}

LineSearchResult line_search(const Objective& objective, std::span<const double> x0, double f0,
                             std::span<const double> g0, std::span<const double> direction,
                             const OptimizerConfig& config, double initial_step) {
    if (x0.size() != g0.size() || x0.size() != direction.size())
        throw std::invalid_argument("line_search: size mismatch");
    return LineSearch(objective, x0, f0, g0, direction, config).run(initial_step);
}

LbfgsResult lbfgs(const Objective& objective, std::vector<double> x0, const OptimizerConfig& config,
                  const LbfgsOptions& options) {
    OptimizerState st;
    st.x = std::move(x0);
    st.value = objective(st.x, st.grad);
    st.evaluations = 1;
    require_finite(st);
    st.initial_grad_norm = norm(st.grad);
    st.value_trace.push_back(st.value);
    st.grad_norm_trace.push_back(st.initial_grad_norm);
    return lbfgs_resume(objective, std::move(st), config, options);
}

LbfgsResult lbfgs_resume(const Objective& objective, OptimizerState st, const OptimizerConfig& config,
                         const LbfgsOptions& options) {
    config.validate();
    if (!options.h0_diagonal.empty() && options.h0_diagonal.size() != st.x.size())
        throw std::invalid_argument("lbfgs: h0_diagonal size mismatch");
    if (st.grad.size() != st.x.size()) throw std::invalid_argument("lbfgs: state gradient size mismatch");

    LbfgsResult out;
    const auto& h0 = options.h0_diagonal;
    while (true) {
        if (converged(st, config)) {
            out.termination = Termination::converged;
            break;
        }
        if (st.iteration >= config.max_iters) {
            out.termination = Termination::max_iters;
            break;
        }

        std::vector<double> d = search_direction(st, h0);
        if (!(dot(d, st.grad) < 0.0)) {
            st.s_hist.clear();
            st.y_hist.clear();
            d = scaled_steepest(st.grad, h0);
        }
        LineSearchResult ls = line_search(objective, st.x, st.value, st.grad, d, config, first_step(st, d));
        st.evaluations += ls.evaluations;
        if (!ls.ok && !st.s_hist.empty()) {
            // stale curvature: retry once from a scaled steepest-descent step
            st.s_hist.clear();
            st.y_hist.clear();
            d = scaled_steepest(st.grad, h0);
            ls = line_search(objective, st.x, st.value, st.grad, d, config, first_step(st, d));
            st.evaluations += ls.evaluations;
        }
        if (!ls.ok) {
            out.termination = Termination::line_search_failure;
            out.message = "iteration " + std::to_string(st.iteration) + ": " + ls.failure;
            break;
        }

        std::vector<double> s(st.x.size()), y(st.x.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = ls.x[i] - st.x[i];
            y[i] = ls.grad[i] - st.grad[i];
        }
        const double sy = dot(s, y);
        st.x = std::move(ls.x);
        st.grad = std::move(ls.grad);
        st.value = ls.value;
        ++st.iteration;
        require_finite(st);
        if (sy > 0.0 && std::isfinite(sy)) {
            st.s_hist.push_back(std::move(s));
            st.y_hist.push_back(std::move(y));
            if (st.s_hist.size() > static_cast<std::size_t>(config.memory)) {
                st.s_hist.erase(st.s_hist.begin());
                st.y_hist.erase(st.y_hist.begin());
            }
        }
        st.value_trace.push_back(st.value);
        st.grad_norm_trace.push_back(norm(st.grad));
        if (options.on_iteration) options.on_iteration(st);
    }
    out.state = std::move(st);
    return out;
}

void write_state(std::ostream& os, const OptimizerState& st) {
    os.write(kStateMagic, sizeof kStateMagic);
    write_u32(os, kStateVersion);
    write_vec(os, st.x);
    write_vec(os, st.grad);
    write_f64(os, st.value);
    write_f64(os, st.initial_grad_norm);
    write_u64(os, static_cast<std::uint64_t>(st.iteration));
    write_u64(os, static_cast<std::uint64_t>(st.evaluations));
    write_u64(os, st.s_hist.size());
    for (std::size_t k = 0; k < st.s_hist.size(); ++k) {
        write_vec(os, st.s_hist[k]);
        write_vec(os, st.y_hist[k]);
    }
    write_vec(os, st.value_trace);
    write_vec(os, st.grad_norm_trace);
    if (!os) throw IoError("failed writing optimizer state");
}

OptimizerState read_state(std::istream& is) {
    char magic[sizeof kStateMagic];
    is.read(magic, sizeof magic);
    if (is.gcount() != static_cast<std::streamsize>(sizeof magic) ||
        std::memcmp(magic, kStateMagic, sizeof magic) != 0)
        throw IoError("not an optimizer state (bad magic)");
    if (read_u32(is) != kStateVersion) throw IoError("unsupported optimizer state version");
    OptimizerState st;
    st.x = read_vec(is);
    st.grad = read_vec(is);
    st.value = read_f64(is);
    st.initial_grad_norm = read_f64(is);
    st.iteration = static_cast<int>(read_u64(is));
    st.evaluations = static_cast<int>(read_u64(is));
    const std::uint64_t pairs = read_u64(is);
    if (pairs > 100000) throw IoError("implausible history length in optimizer state");
    for (std::uint64_t k = 0; k < pairs; ++k) {
        st.s_hist.push_back(read_vec(is));
        st.y_hist.push_back(read_vec(is));
    }
    st.value_trace = read_vec(is);
    st.grad_norm_trace = read_vec(is);
    return st;
}

Objective registration_objective(const Field& F0, const Field& target_T, const CostSpec& cost,
                                 const EvolutionModel& model) {
    return [&F0, &target_T, &cost, &model](std::span<const double> x, std::vector<double>& grad) {
        const ControlSet c = ControlSet::unflatten(x, model.grid());
        const Trajectory traj = evolve(F0, c, model);
        const Evaluation ev = gradient(c, traj, target_T, cost, model);
        grad = ev.grad.flatten();
        return ev.energy.total();
    };
}

void save_checkpoint(const std::string& path, const OptimizerState& state, const GridSpec& grid,
                     const NormPowers& powers) {
    // write-then-rename so an interrupted save never clobbers the last good one
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp + " for writing");
        write_controls(os, ControlSet::unflatten(state.x, grid), grid, powers);
        write_state(os, state);
        os.flush();
        if (!os) throw IoError("failed writing checkpoint " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint into place at " + path);
}

OptimizerState load_checkpoint(const std::string& path, const GridSpec& grid) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + path);
    const std::vector<double> x = read_controls(is, grid).flatten();
    OptimizerState st = read_state(is);
    if (st.x != x) throw IoError("checkpoint " + path + ": controls and optimizer state disagree");
    return st;
}

OptimizationReport minimize(const Field& F0, const Field& target_T, const CostSpec& cost,
                            const EvolutionModel& model, const OptimizerConfig& config,
                            const MinimizeOptions& options) {
    config.validate();
    const GridSpec& grid = model.grid();
    const Objective objective = registration_objective(F0, target_T, cost, model);

    LbfgsOptions lo;
    if (config.precondition_u || config.precondition_m) {
        const ControlSet zero = ControlSet::zeros(grid);
        const auto u_size = static_cast<std::ptrdiff_t>(zero.steps() * static_cast<std::size_t>(grid.n) *
                                                        static_cast<std::size_t>(grid.n));
        lo.h0_diagonal.assign(zero.flat_size(), 1.0);
        if (config.precondition_u && cost.c_top > 0.0)
            std::fill(lo.h0_diagonal.begin(), lo.h0_diagonal.begin() + u_size, 1.0 / cost.c_top);
        if (config.precondition_m) {
            const double mass = model.kernels.rkhs.sum();
            std::fill(lo.h0_diagonal.begin() + u_size, lo.h0_diagonal.end(), 1.0 / (mass * mass));
        }
    }
    lo.on_iteration = [&](const OptimizerState& st) {
        if (options.checkpoint_every > 0 && !options.checkpoint_path.empty() &&
            st.iteration % options.checkpoint_every == 0)
            save_checkpoint(options.checkpoint_path, st, grid, cost.powers);
        if (options.on_iteration) options.on_iteration(st);
    };

    LbfgsResult r;
    if (!options.resume_path.empty()) {
        r = lbfgs_resume(objective, load_checkpoint(options.resume_path, grid), config, lo);
    } else if (options.initial_controls) {
        options.initial_controls->validate(grid);
        r = lbfgs(objective, options.initial_controls->flatten(), config, lo);
    } else {
        r = lbfgs(objective, ControlSet::zeros(grid).flatten(), config, lo);
    }

    OptimizationReport rep;
    rep.iterations = r.state.iteration;
    rep.E_trace = r.state.value_trace;
    rep.grad_norm_trace = r.state.grad_norm_trace;
    rep.termination = r.termination;
    rep.message = r.message;
    rep.evaluations = r.state.evaluations;
    rep.final_controls = ControlSet::unflatten(r.state.x, grid);
    rep.final_energy = energy(rep.final_controls, F0, target_T, cost, model);
    return rep;
}

}  // namespace phasereg
