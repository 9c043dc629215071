#include "phasereg/registration.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <thread>

#include "phasereg/errors.hpp"

namespace phasereg {

void RegistrationProblem::validate() const {
    const auto n = static_cast<std::size_t>(grid.n);
    if (initial.rows() != n || initial.cols() != n) throw std::invalid_argument("registration: initial shape is not N x N");
    if (target.rows() != n || target.cols() != n) throw std::invalid_argument("registration: target shape is not N x N");
    if (!(c_end > 0.0)) throw std::invalid_argument("registration: C_end must be positive");
    if (!(c_top >= 0.0)) throw std::invalid_argument("registration: C_top must be nonnegative");
    if (psi && !(*psi > 0.0)) throw std::invalid_argument("registration: psi must be positive");
    if (restarts < 0) throw std::invalid_argument("registration: restarts must be nonnegative");
    if (restarts > 0 && !(restart_scale > 0.0))
        throw std::invalid_argument("registration: restart_scale must be positive");
    optimizer.validate();
}

EvolutionModel RegistrationProblem::model() const {
    EvolutionModel m = make_model(grid, kappa, reaction, mbp);
    if (psi) m.chi = ChiSpec{*psi};
    return m;
}

CostSpec RegistrationProblem::cost() const { return CostSpec{powers, c_top, c_end}; }

SolveResult solve(const RegistrationProblem& problem, const MinimizeOptions& options) {
    problem.validate();
    const EvolutionModel model = problem.model();
    const CostSpec cost = problem.cost();

    SolveResult out;
    out.target_T = evolve_uncontrolled(problem.target, model).final_smoothed();
    out.zero_control = energy(ControlSet::zeros(problem.grid), problem.initial, out.target_T, cost, model);
    out.report = minimize(problem.initial, out.target_T, cost, model, problem.optimizer, options);
    out.rho = out.report.final_energy.total();
    if (problem.restarts == 0) return out;

    std::mt19937_64 rng(problem.seed);
    const double m_scale = problem.restart_scale / model.kernels.rkhs.sum();
    MinimizeOptions extra;  // no checkpoints for the extra starts
    for (int s = 1; s <= problem.restarts; ++s) {
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        ControlSet c = ControlSet::zeros(problem.grid);
        // slot 0 stays zero
        for (std::size_t k = 1; k < c.steps(); ++k)
            for (double& x : c.u.slices[k].values()) x = problem.restart_scale * unit(rng);
        for (auto* block : {&c.m.m1, &c.m.m2})
            for (std::size_t k = 1; k < block->size(); ++k)
                for (double& x : (*block)[k].values()) x = m_scale * unit(rng);
        extra.initial_controls = std::move(c);
        extra.on_iteration = options.on_iteration;
        OptimizationReport rep = minimize(problem.initial, out.target_T, cost, model, problem.optimizer, extra);
        const double rho = rep.final_energy.total();
        if (rho < out.rho) {
            out.rho = rho;
            out.report = std::move(rep);
            out.start = s;
        }
    }
    return out;
}

DiscrepancyResult discrepancy(const Field& a, const Field& b, const RegistrationProblem& params, int threads,
                              const MinimizeOptions& forward_options, const MinimizeOptions& backward_options) {
    DiscrepancyResult out;
    std::string errors[2];
    auto run = [&](const Field& from, const Field& to, std::optional<SolveResult>& slot, double& rho,
                   const MinimizeOptions& options, std::string& error) {
        RegistrationProblem p = params;
        p.initial = from;
        p.target = to;
        try {
            slot = solve(p, options);
            rho = slot->rho;
        } catch (const NumericalError& e) {
            error = e.what();
            rho = std::numeric_limits<double>::infinity();
        }
    };
    if (threads >= 2) {
        std::exception_ptr thrown;
        std::thread back([&] {
            try {
                run(b, a, out.backward, out.rho_backward, backward_options, errors[1]);
            } catch (...) {
                thrown = std::current_exception();
            }
        });
        try {
            run(a, b, out.forward, out.rho_forward, forward_options, errors[0]);
        } catch (...) {
            back.join();
            throw;
        }
        back.join();
        if (thrown) std::rethrow_exception(thrown);
    } else {
        run(a, b, out.forward, out.rho_forward, forward_options, errors[0]);
        run(b, a, out.backward, out.rho_backward, backward_options, errors[1]);
    }
    if (!errors[0].empty()) out.failure += "forward: " + errors[0] + "; ";
    if (!errors[1].empty()) out.failure += "backward: " + errors[1] + "; ";
    out.partial = !out.failure.empty();
    out.d_sigma = std::min(out.rho_forward, out.rho_backward);
    return out;
}

double sample_bilinear(const Field& f, const GridSpec& grid, Point p) {
    const double fi = p.x1 / grid.dx + grid.center();
    const double fj = p.x2 / grid.dx + grid.center();
    const double last = grid.n - 1;
    if (!(fi >= 0.0 && fi <= last && fj >= 0.0 && fj <= last)) return 0.0;
    const int i0 = std::min(static_cast<int>(fi), grid.n - 2);
    const int j0 = std::min(static_cast<int>(fj), grid.n - 2);
    const double ti = fi - i0, tj = fj - j0;
    return (1 - ti) * (1 - tj) * f(i0, j0) + ti * (1 - tj) * f(i0 + 1, j0) + (1 - ti) * tj * f(i0, j0 + 1) +
           ti * tj * f(i0 + 1, j0 + 1);
}

std::vector<std::vector<Point>> flow_particles(const std::vector<Field>& v1, const std::vector<Field>& v2,
                                               const GridSpec& grid, std::vector<Point> start) {
    if (v1.size() != v2.size()) throw std::invalid_argument("flow_particles: velocity components disagree");
    std::vector<std::vector<Point>> path;
    path.reserve(v1.size() + 1);
    path.push_back(std::move(start));
    for (std::size_t k = 0; k < v1.size(); ++k) {
        std::vector<Point> next = path.back();
        for (Point& p : next) {
            const Point q = p;
            p.x1 += grid.dt * sample_bilinear(v1[k], grid, q);
            p.x2 += grid.dt * sample_bilinear(v2[k], grid, q);
        }
        path.push_back(std::move(next));
    }
    return path;
}

Field advect_by_flow(const Field& field, const std::vector<Field>& v1, const std::vector<Field>& v2,
                     const GridSpec& grid) {
    if (v1.size() != v2.size()) throw std::invalid_argument("advect_by_flow: velocity components disagree");
    std::vector<Point> y;
    y.reserve(field.size());
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j) y.push_back({grid.coord(i), grid.coord(j)});
    // trace each node back to where it came from
    for (std::size_t k = v1.size(); k-- > 0;)
        for (Point& p : y) {
            const Point q = p;
            p.x1 -= grid.dt * sample_bilinear(v1[k], grid, q);
            p.x2 -= grid.dt * sample_bilinear(v2[k], grid, q);
        }
    Field out(field.rows(), field.cols());
    for (std::size_t e = 0; e < y.size(); ++e) out[e] = sample_bilinear(field, grid, y[e]);
    return out;
}

Decomposition decompose(const OptimizationReport& report, const RegistrationProblem& problem) {
    problem.validate();
    const GridSpec& grid = problem.grid;
    const EvolutionModel model = problem.model();
    const ControlSet& c = report.final_controls;
    c.validate(grid);

    std::vector<Field> v1, v2;
    for (std::size_t k = 0; k < c.steps(); ++k) {
        auto [a, b] = momenta_to_velocity(c.m, k, model.kernels);
        v1.push_back(std::move(a));
        v2.push_back(std::move(b));
    }

    Decomposition d;
    std::vector<Point> seeds;
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j) seeds.push_back({grid.coord(i), grid.coord(j)});
    d.particles = flow_particles(v1, v2, grid, std::move(seeds));
    d.seed_component = component_labels(problem.initial, kInterfaceLevel, &d.initial_components);

    ControlSet u_only = c, v_only = c;
    for (auto* block : {&u_only.m.m1, &u_only.m.m2})
        for (Field& s : *block) s = grid.zeros();
    for (Field& s : v_only.u.slices) s = grid.zeros();
    d.u_only_endpoint = evolve(problem.initial, u_only, model).final_smoothed();
    d.v_only_endpoint = evolve(problem.initial, v_only, model).final_smoothed();

    d.advected_indicator = advect_by_flow(problem.initial, v1, v2, grid);
    for (double& v : d.advected_indicator.values()) v = v > kInterfaceLevel ? 1.0 : 0.0;
    d.advected_components = component_count(d.advected_indicator, kInterfaceLevel);
    return d;
}

std::vector<int> component_labels(const Field& field, double threshold, int* count) {
    const std::size_t rows = field.rows(), cols = field.cols();
    std::vector<int> label(field.size(), 0);
    std::vector<std::size_t> stack;
    int next = 0;
    for (std::size_t s = 0; s < field.size(); ++s) {
        if (label[s] != 0 || !(field[s] > threshold)) continue;
        label[s] = ++next;
        stack.push_back(s);
        while (!stack.empty()) {
            const std::size_t e = stack.back();
            stack.pop_back();
            const std::size_t i = e / cols, j = e % cols;
            auto visit = [&](std::size_t q) {
                if (label[q] == 0 && field[q] > threshold) {
                    label[q] = next;
                    stack.push_back(q);
                }
            };
            if (i > 0) visit(e - cols);
            if (i + 1 < rows) visit(e + cols);
            if (j > 0) visit(e - 1);
            if (j + 1 < cols) visit(e + 1);
        }
    }
    if (count) *count = next;
    return label;
}

int component_count(const Field& field, double threshold) {
    int n = 0;
    component_labels(field, threshold, &n);
    return n;
}

namespace {

// Corners of cell (i, j) counter-clockwise in (x1, x2); edge k joins corner k and k + 1.
constexpr int kCornerDi[4] = {0, 1, 1, 0};
constexpr int kCornerDj[4] = {0, 0, 1, 1};

struct CellView {
    double value[4];
    Point corner[4];
};

CellView cell_view(const Field& f, const GridSpec& g, int i, int j) {
    CellView c;
    for (int k = 0; k < 4; ++k) {
        c.value[k] = f(i + kCornerDi[k], j + kCornerDj[k]);
        c.corner[k] = {g.coord(i + kCornerDi[k]), g.coord(j + kCornerDj[k])};
    }
    return c;
}

Point crossing(const CellView& c, int edge, double level) {
    const int a = edge, b = (edge + 1) % 4;
    const double t = (level - c.value[a]) / (c.value[b] - c.value[a]);
    return {c.corner[a].x1 + t * (c.corner[b].x1 - c.corner[a].x1),
            c.corner[a].x2 + t * (c.corner[b].x2 - c.corner[a].x2)};
}

// Global id of edge k of cell (i, j): edges along x1 are even, along x2 odd.
long edge_id(int i, int j, int edge, int n) {
    switch (edge) {
        case 0: return 2L * (static_cast<long>(i) * n + j);
        case 1: return 2L * (static_cast<long>(i + 1) * n + j) + 1;
        case 2: return 2L * (static_cast<long>(i) * n + j + 1);
        default: return 2L * (static_cast<long>(i) * n + j) + 1;
    }
}

double shoelace(const std::vector<Point>& poly) {
    double s = 0.0;
    for (std::size_t k = 0; k < poly.size(); ++k) {
        const Point& a = poly[k];
        const Point& b = poly[(k + 1) % poly.size()];
        s += a.x1 * b.x2 - b.x1 * a.x2;
    }
    return 0.5 * std::abs(s);
}

}  // namespace

std::vector<Polyline> contour(const Field& field, double level, const GridSpec& grid) {
    struct Segment {
        long edge[2];
        Point p[2];
    };
    std::vector<Segment> segs;
    for (int i = 0; i + 1 < grid.n; ++i)
        for (int j = 0; j + 1 < grid.n; ++j) {
            const CellView c = cell_view(field, grid, i, j);
            bool above[4];
            int crossings = 0;
            for (int k = 0; k < 4; ++k) above[k] = c.value[k] > level;
            for (int k = 0; k < 4; ++k) crossings += above[k] != above[(k + 1) % 4];
            if (crossings == 0) continue;
            auto add = [&](int e0, int e1) {
                segs.push_back({{edge_id(i, j, e0, grid.n), edge_id(i, j, e1, grid.n)},
                                {crossing(c, e0, level), crossing(c, e1, level)}});
            };
            if (crossings == 2) {
                int e[2], m = 0;
                for (int k = 0; k < 4; ++k)
                    if (above[k] != above[(k + 1) % 4]) e[m++] = k;
                add(e[0], e[1]);
                continue;
            }
            // saddle: cut off the corners on the minority side of the centre
            const bool centre_above = 0.25 * (c.value[0] + c.value[1] + c.value[2] + c.value[3]) > level;
            for (int k = 0; k < 4; ++k)
                if (above[k] != centre_above) add((k + 3) % 4, k);
        }

    std::map<long, std::vector<std::size_t>> by_edge;
    for (std::size_t s = 0; s < segs.size(); ++s)
        for (long e : segs[s].edge) by_edge[e].push_back(s);

    std::vector<bool> used(segs.size(), false);
    std::vector<Polyline> lines;
    auto walk = [&](std::size_t s, int from_end) {
        Polyline line;
        line.push_back(segs[s].p[from_end]);
        long edge = segs[s].edge[1 - from_end];
        line.push_back(segs[s].p[1 - from_end]);
        used[s] = true;
        const long start_edge = segs[s].edge[from_end];
        while (true) {
            std::size_t nxt = segs.size();
            for (std::size_t t : by_edge[edge])
                if (!used[t]) nxt = t;
            if (nxt == segs.size()) break;
            used[nxt] = true;
            const int side = segs[nxt].edge[0] == edge ? 0 : 1;
            edge = segs[nxt].edge[1 - side];
            line.push_back(segs[nxt].p[1 - side]);
            if (edge == start_edge) {
                line.back() = line.front();
                break;
            }
        }
        lines.push_back(std::move(line));
    };
    // open chains start at a boundary edge (seen once); then closed loops
    for (std::size_t s = 0; s < segs.size(); ++s)
        for (int end = 0; end < 2; ++end)
            if (!used[s] && by_edge[segs[s].edge[end]].size() == 1) walk(s, end);
    for (std::size_t s = 0; s < segs.size(); ++s)
        if (!used[s]) walk(s, 0);
    return lines;
}

double level_set_area(const Field& field, double level, const GridSpec& grid) {
    double area = 0.0;
    for (int i = 0; i + 1 < grid.n; ++i)
        for (int j = 0; j + 1 < grid.n; ++j) {
            const CellView c = cell_view(field, grid, i, j);
            bool above[4];
            int n_above = 0, crossings = 0;
            for (int k = 0; k < 4; ++k) n_above += above[k] = c.value[k] > level;
            if (n_above == 0) continue;
            if (n_above == 4) {
                area += grid.dx * grid.dx;
                continue;
            }
            for (int k = 0; k < 4; ++k) crossings += above[k] != above[(k + 1) % 4];
            const bool centre_above = 0.25 * (c.value[0] + c.value[1] + c.value[2] + c.value[3]) > level;
            if (crossings == 4 && !centre_above) {
                // two separate corner triangles
                for (int k = 0; k < 4; ++k)
                    if (above[k]) area += shoelace({crossing(c, (k + 3) % 4, level), c.corner[k], crossing(c, k, level)});
                continue;
            }
            std::vector<Point> poly;
            for (int k = 0; k < 4; ++k) {
                if (above[k]) poly.push_back(c.corner[k]);
                if (above[k] != above[(k + 1) % 4]) poly.push_back(crossing(c, k, level));
            }
            area += shoelace(poly);
        }
    return area;
}

}  // namespace phasereg
