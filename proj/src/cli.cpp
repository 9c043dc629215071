#include "phasereg/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

#include "phasereg/errors.hpp"
#include "phasereg/serialize.hpp"

namespace phasereg::cli {
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<int>& v, char sep = ' ') {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) s.push_back(sep);
        s += std::to_string(v[k]);
    }
    return s;
}

class Manifest {
public:
    void set(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
    void set(const std::string& key, double value) { set(key, num(value)); }
    void set(const std::string& key, int value) { set(key, std::to_string(value)); }
    void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

    void write(const fs::path& path) const {
        std::ofstream out(path, std::ios::binary);
        for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
        if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

/// Collects the endpoint component count after every accepted iteration.
/// A drop in the iteration number means a new start began.
struct Recorder {
    const RegistrationProblem* problem = nullptr;
    const EvolutionModel* model = nullptr;
    std::vector<std::map<int, int>> segments;
    int last = -1;

    void operator()(const OptimizerState& st) {
        if (segments.empty() || st.iteration <= last) segments.emplace_back();
        last = st.iteration;
        const ControlSet c = ControlSet::unflatten(st.x, problem->grid);
        segments.back()[st.iteration] = component_count(evolve(problem->initial, c, *model).final_smoothed());
    }
};

void write_metrics(const fs::path& path, const OptimizationReport& rep, const std::map<int, int>& comps) {
    std::ofstream out(path, std::ios::binary);
    out << kMetricsHeader << '\n';
    for (std::size_t k = 0; k < rep.E_trace.size(); ++k) {
        const auto it = comps.find(static_cast<int>(k));
        out << k << ',' << num(rep.E_trace[k]) << ',' << num(rep.grad_norm_trace[k]) << ','
            << (it == comps.end() ? std::string("NA") : std::to_string(it->second)) << '\n';
    }
    if (!out) throw IoError("cannot write metrics '" + path.string() + "'");
}

void write_contours_csv(const fs::path& path, const std::vector<std::pair<std::string, const Field*>>& fields,
                        const GridSpec& grid) {
    std::ofstream out(path, std::ios::binary);
    out << "field,line,x1,x2\n";
    for (const auto& [name, f] : fields) {
        const auto lines = contour(*f, kInterfaceLevel, grid);
        for (std::size_t l = 0; l < lines.size(); ++l)
            for (const Point& p : lines[l]) out << name << ',' << l << ',' << num(p.x1) << ',' << num(p.x2) << '\n';
    }
    if (!out) throw IoError("cannot write contours '" + path.string() + "'");
}

int exit_for(Termination t) {
    switch (t) {
    case Termination::converged: return kExitConverged;
    case Termination::max_iters: return kExitMaxIters;
    case Termination::line_search_failure: return kExitLineSearch;
    }
    return kExitUnexpected;
}

// worse outcome wins: line-search failure over max-iters over convergence
int combine(int a, int b) {
    auto rank = [](int c) { return c == kExitLineSearch ? 2 : c == kExitMaxIters ? 1 : 0; };
    return rank(a) >= rank(b) ? a : b;
}

void describe_direction(Manifest& m, const std::string& prefix, const SolveResult& s, const RegistrationProblem& prob) {
    m.set(prefix + "termination", std::string(to_string(s.report.termination)));
    m.set(prefix + "message", s.report.message);
    m.set(prefix + "iterations", s.report.iterations);
    m.set(prefix + "evaluations", s.report.evaluations);
    m.set(prefix + "start", s.start);
    m.set(prefix + "rho", s.rho);
    m.set(prefix + "E_u_cost", s.report.final_energy.u_cost);
    m.set(prefix + "E_v_cost", s.report.final_energy.v_cost);
    m.set(prefix + "E_control_cost", s.report.final_energy.u_cost + s.report.final_energy.v_cost);
    m.set(prefix + "E_endpoint_cost", s.report.final_energy.endpoint);
    m.set(prefix + "zero_control_endpoint_cost", s.zero_control.endpoint);
    m.set(prefix + "u_norm_p", u_norm_p(s.report.final_controls.u, prob.powers, prob.grid));
}

struct Outputs {
    std::vector<std::string> files;
    void add(const fs::path& out_dir, const fs::path& p) { files.push_back(fs::relative(p, out_dir).generic_string()); }
};

/// Frames, contours and decomposition for one solved direction.
void export_direction(const RunConfig& cfg, const RegistrationProblem& prob, const EvolutionModel& model,
                      const SolveResult& s, const std::string& tag, Manifest& m, Outputs& outs) {
    const fs::path out(cfg.out);
    const GridSpec& g = prob.grid;
    const Trajectory traj = evolve(prob.initial, s.report.final_controls, model);

    std::vector<int> counts;
    for (const Field& f : traj.f) counts.push_back(component_count(f));
    m.set(tag + "frame_components", join(counts));
    m.set(tag + "final_components", counts.back());
    m.set(tag + "target_T_components", component_count(s.target_T));

    if (cfg.frames) {
        const fs::path dir = out / (tag.empty() ? "frames" : "frames_" + tag.substr(0, tag.size() - 1));
        fs::create_directories(dir);
        for (std::size_t k = 0; k < traj.f.size(); ++k) {
            char name[32];
            std::snprintf(name, sizeof name, "frame_%03zu.png", k);
            write_png((dir / name).string(), render_frame(traj.f[k], kInterfaceLevel, g, cfg.render_scale));
            outs.add(out, dir / name);
        }
        write_png((dir / "target.png").string(), render_frame(s.target_T, kInterfaceLevel, g, cfg.render_scale));
        outs.add(out, dir / "target.png");
    }
    if (cfg.contours) {
        const fs::path p = out / ("contours" + (tag.empty() ? std::string() : "_" + tag.substr(0, tag.size() - 1)) + ".csv");
        std::vector<std::pair<std::string, const Field*>> fields;
        std::vector<std::string> names;
        for (std::size_t k = 0; k < traj.f.size(); ++k) names.push_back("f" + std::to_string(k));
        for (std::size_t k = 0; k < traj.f.size(); ++k) fields.emplace_back(names[k], &traj.f[k]);
        fields.emplace_back("target", &s.target_T);
        write_contours_csv(p, fields, g);
        outs.add(out, p);
    }
    if (cfg.decompose) {
        const Decomposition d = decompose(s.report, prob);
        m.set(tag + "decompose_initial_components", d.initial_components);
        m.set(tag + "decompose_advected_components", d.advected_components);
        m.set(tag + "decompose_u_only_components", component_count(d.u_only_endpoint));
        m.set(tag + "decompose_v_only_components", component_count(d.v_only_endpoint));
        const fs::path dir = out / (tag.empty() ? "decompose" : "decompose_" + tag.substr(0, tag.size() - 1));
        fs::create_directories(dir);
        const std::pair<const char*, const Field*> figs[] = {
            {"u_only.png", &d.u_only_endpoint}, {"v_only.png", &d.v_only_endpoint}, {"advected.png", &d.advected_indicator}};
        for (const auto& [name, f] : figs) {
            write_png((dir / name).string(), render_frame(*f, kInterfaceLevel, g, cfg.render_scale));
            outs.add(out, dir / name);
        }
    }
}

void describe_config(Manifest& m, const RunConfig& cfg, const GridSpec& g, const RegistrationProblem& prob) {
    m.set("initial", cfg.initial);
    m.set("target", cfg.target);
    m.set("mode", std::string(cfg.discrepancy ? "discrepancy" : "solve"));
    m.set("N_requested", cfg.n);
    m.set("N", g.n);
    m.set("T", g.time_steps);
    m.set("L", g.half_width);
    m.set("sigma", g.sigma);
    m.set("dx", g.dx);
    m.set("dt", g.dt);
    m.set("tau", g.tau);
    m.set("p", prob.powers.p());
    m.set("r", prob.powers.r());
    m.set("W", prob.reaction.well_depth);
    m.set("a", prob.mbp.a());
    m.set("mu", prob.mbp.mu());
    m.set("psi_mode", cfg.psi_mode);
    if (cfg.psi_mode == "constant") m.set("psi", cfg.psi);
    m.set("ctop", prob.c_top);
    m.set("cend", prob.c_end);
    m.set("kernel_width", prob.kappa.resolved_width(g));
    m.set("max_iters", prob.optimizer.max_iters);
    m.set("grad_tol", prob.optimizer.grad_tol);
    m.set("memory", prob.optimizer.memory);
    m.set("precondition_u", prob.optimizer.precondition_u);
    m.set("precondition_m", prob.optimizer.precondition_m);
    m.set("restarts", prob.restarts);
    m.set("seed", std::to_string(prob.seed));
    m.set("restart_scale", prob.restart_scale);
    m.set("checkpoint_every", cfg.checkpoint_every);
    m.set("resume", cfg.resume);
    m.set("threads", cfg.threads);
    m.set("initial_image_components", component_count(prob.initial));
    m.set("target_image_components", component_count(prob.target));
}

}  // namespace

GridSpec RunConfig::grid() const {
    if (n < 3) throw ConfigError("N must be at least 3");
    if (render_scale < 1 || render_scale > 64) throw ConfigError("render-scale must be in [1, 64]");
    if (checkpoint_every < 0) throw ConfigError("checkpoint-every must be nonnegative");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    if (psi_mode != "discrete" && psi_mode != "constant") throw ConfigError("psi-mode must be 'discrete' or 'constant'");
    try {
        return build_grid(grid_n(), half_width, time_steps, sigma);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

RegistrationProblem RunConfig::problem(const Field& initial_field, const Field& target_field) const {
    try {
        RegistrationProblem prob;
        prob.grid = grid();
        prob.initial = initial_field;
        prob.target = target_field;
        prob.powers = NormPowers(p, r);
        prob.c_top = c_top;
        prob.c_end = c_end;
        if (kernel_width) {
            if (!(*kernel_width > 0.0)) throw ConfigError("kernel-width must be positive");
            prob.kappa.width = *kernel_width;
        }
        if (!(well_depth >= 0.0)) throw ConfigError("W must be nonnegative");
        prob.reaction.well_depth = well_depth;
        prob.mbp = MbpMap(a, mu);
        prob.optimizer.max_iters = max_iters;
        prob.optimizer.grad_tol = grad_tol;
        prob.optimizer.memory = memory;
        prob.optimizer.precondition_u = precondition_u;
        prob.optimizer.precondition_m = precondition_m;
        prob.restarts = restarts;
        prob.seed = seed;
        prob.restart_scale = restart_scale;
        if (psi_mode == "constant") prob.psi = psi;
        prob.validate();
        return prob;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::vector<std::string> preset_names() {
    return {"disc", "two-discs", "three-discs", "four-discs"};
}

std::vector<Disc> preset_discs(const std::string& name) {
    if (name == "disc") return {{0.0, 0.0, 0.35}};
    if (name == "two-discs") return {{-0.4, 0.0, 0.25}, {0.4, 0.0, 0.25}};
    if (name == "three-discs") return {{-0.45, -0.3, 0.22}, {0.45, -0.3, 0.22}, {0.0, 0.45, 0.22}};
    if (name == "four-discs") return {{-0.42, -0.42, 0.2}, {0.42, -0.42, 0.2}, {-0.42, 0.42, 0.2}, {0.42, 0.42, 0.2}};
    throw ConfigError("unknown preset '" + name + "'");
}

void write_fixture(const FixtureRequest& req) {
    std::vector<Disc> discs = req.discs;
    if (!req.preset.empty()) {
        const auto more = preset_discs(req.preset);
        discs.insert(discs.end(), more.begin(), more.end());
    }
    if (req.size < 1) throw ConfigError("fixture size must be positive");
    if (!(req.half_width > 0.0)) throw ConfigError("fixture L must be positive");
    for (const Disc& d : discs)
        if (!(d.radius > 0.0)) throw ConfigError("disc radius must be positive");
    const Image img = rasterize_discs(discs, req.size, req.half_width);
    if (fs::path(req.out).extension() == ".pgm")
        write_pgm(req.out, img);
    else
        write_png(req.out, img);
}

int run(const RunConfig& cfg, std::ostream& log) {
    const char* stage = "config";
    try {
        const GridSpec g = cfg.grid();
        if (cfg.initial.empty() || cfg.target.empty()) throw ConfigError("both --initial and --target are required");
        if (cfg.discrepancy && !cfg.resume.empty()) throw ConfigError("--resume is not supported with --discrepancy");
        if (cfg.n != g.n) log << "note: N = " << cfg.n << " is even, using N = " << g.n << '\n';

        stage = "load";
        const Field a = load_image(cfg.initial, g.n);
        const Field b = load_image(cfg.target, g.n);

        stage = "config";
        RegistrationProblem prob = cfg.problem(a, b);
        const EvolutionModel model = prob.model();

        stage = "output";
        const fs::path out(cfg.out);
        fs::create_directories(out);

        Manifest m;
        m.set("format", std::string("phasereg-manifest"));
        m.set("manifest_version", kManifestVersion);
        m.set("metrics_schema", std::string(kMetricsHeader));
        m.set("metrics_schema_version", kMetricsSchemaVersion);
        describe_config(m, cfg, g, prob);
        Outputs outs;

        stage = "solve";
        int code = kExitConverged;
        if (!cfg.discrepancy) {
            Recorder rec{&prob, &model, {}, -1};
            MinimizeOptions opts;
            opts.on_iteration = std::ref(rec);
            if (cfg.checkpoint_every > 0) {
                opts.checkpoint_every = cfg.checkpoint_every;
                opts.checkpoint_path = (out / "checkpoint.bin").string();
            }
            opts.resume_path = cfg.resume;
            const SolveResult s = solve(prob, opts);
            log << "solve: " << to_string(s.report.termination) << " after " << s.report.iterations
                << " iterations, rho = " << num(s.rho) << '\n';

            std::map<int, int> comps;
            if (static_cast<std::size_t>(s.start) < rec.segments.size()) comps = rec.segments[s.start];
            if (s.start == 0 && cfg.resume.empty())
                comps[0] = component_count(evolve(prob.initial, ControlSet::zeros(g), model).final_smoothed());

            stage = "export";
            write_metrics(out / "metrics.csv", s.report, comps);
            outs.add(out, out / "metrics.csv");
            if (cfg.checkpoint_every > 0 && fs::exists(out / "checkpoint.bin")) outs.add(out, out / "checkpoint.bin");
            save_controls((out / "controls.bin").string(), s.report.final_controls, g, prob.powers);
            outs.add(out, out / "controls.bin");

            describe_direction(m, "", s, prob);
            m.set("d_sigma_upper_bound", s.rho);
            export_direction(cfg, prob, model, s, "", m, outs);
            code = exit_for(s.report.termination);
        } else {
            Recorder rec_f{&prob, &model, {}, -1};
            RegistrationProblem back = prob;
            std::swap(back.initial, back.target);
            Recorder rec_b{&back, &model, {}, -1};
            MinimizeOptions of, ob;
            of.on_iteration = std::ref(rec_f);
            ob.on_iteration = std::ref(rec_b);
            if (cfg.checkpoint_every > 0) {
                of.checkpoint_every = ob.checkpoint_every = cfg.checkpoint_every;
                of.checkpoint_path = (out / "checkpoint_forward.bin").string();
                ob.checkpoint_path = (out / "checkpoint_backward.bin").string();
            }
            const DiscrepancyResult d = discrepancy(a, b, prob, cfg.threads, of, ob);
            log << "discrepancy: rho_forward = " << num(d.rho_forward) << ", rho_backward = " << num(d.rho_backward)
                << ", d_sigma = " << num(d.d_sigma) << '\n';

            stage = "export";
            m.set("rho_forward", d.rho_forward);
            m.set("rho_backward", d.rho_backward);
            m.set("d_sigma", d.d_sigma);
            m.set("partial", d.partial);
            if (d.partial) m.set("failure", d.failure);
            const std::pair<const std::optional<SolveResult>*, std::pair<const RegistrationProblem*, Recorder*>> dirs[] = {
                {&d.forward, {&prob, &rec_f}}, {&d.backward, {&back, &rec_b}}};
            const char* tags[] = {"forward", "backward"};
            for (int k = 0; k < 2; ++k) {
                const auto& slot = *dirs[k].first;
                if (!slot) continue;
                const std::string tag = tags[k];
                const RegistrationProblem& p = *dirs[k].second.first;
                const Recorder& rec = *dirs[k].second.second;
                std::map<int, int> comps;
                if (static_cast<std::size_t>(slot->start) < rec.segments.size()) comps = rec.segments[slot->start];
                if (slot->start == 0)
                    comps[0] = component_count(evolve(p.initial, ControlSet::zeros(g), model).final_smoothed());
                const fs::path mp = out / ("metrics_" + tag + ".csv");
                write_metrics(mp, slot->report, comps);
                outs.add(out, mp);
                if (cfg.checkpoint_every > 0 && fs::exists(out / ("checkpoint_" + tag + ".bin")))
                    outs.add(out, out / ("checkpoint_" + tag + ".bin"));
                describe_direction(m, tag + ".", *slot, p);
                export_direction(cfg, p, model, *slot, tag + ".", m, outs);
                code = combine(code, exit_for(slot->report.termination));
            }
            if (d.partial) code = kExitNumerical;
        }

        for (std::size_t k = 0; k < outs.files.size(); ++k) m.set("artifact." + std::to_string(k), outs.files[k]);
        m.set("exit_code", code);
        m.write(out / "manifest.txt");
        return code;
    } catch (const ConfigError& e) {
        log << "phasereg: " << stage << ": " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        log << "phasereg: " << stage << ": " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        log << "phasereg: " << stage << ": " << e.what() << '\n';
        return kExitIo;
    } catch (const NumericalError& e) {
        log << "phasereg: " << stage << ": " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        log << "phasereg: " << stage << ": " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        log << "phasereg: " << stage << ": unexpected error: " << e.what() << '\n';
        return kExitUnexpected;
    }
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Phase-field shape registration with topological and diffeomorphic controls", "phasereg"};
    app.set_config("--config", "", "key = value file; flags given on the command line win");

    app.add_option("--initial", cfg.initial, "initial shape image (PNG/PGM, 8-bit gray)");
    app.add_option("--target", cfg.target, "target shape image");
    app.add_option("--out", cfg.out, "output directory")->capture_default_str();
    app.add_option("--N", cfg.n, "grid size (even values are bumped to odd)")->capture_default_str();
    app.add_option("--T", cfg.time_steps, "time samples")->capture_default_str();
    app.add_option("--L", cfg.half_width, "domain half-width")->capture_default_str();
    app.add_option("--sigma", cfg.sigma, "diffusion scale")->capture_default_str();
    app.add_option("--ctop", cfg.c_top, "weight of the topological control")->capture_default_str();
    app.add_option("--cend", cfg.c_end, "weight of the endpoint misfit")->capture_default_str();
    app.add_option("--p", cfg.p, "time exponent of the control norms")->capture_default_str();
    app.add_option("--r", cfg.r, "space exponent of the control norms")->capture_default_str();
    app.add_option("--W", cfg.well_depth, "double-well depth")->capture_default_str();
    app.add_option("--a", cfg.a, "range margin of the substitution map")->capture_default_str();
    app.add_option("--mu", cfg.mu, "slope of the substitution map")->capture_default_str();
    app.add_option("--psi-mode", cfg.psi_mode, "discrete (psi^2 = dt 1e-16) or constant")->capture_default_str();
    app.add_option("--psi", cfg.psi, "psi for --psi-mode constant")->capture_default_str();
    app.add_option("--kernel-width", cfg.kernel_width, "RKHS kernel width (default 10 dx)");
    app.add_option("--max-iters", cfg.max_iters)->capture_default_str();
    app.add_option("--grad-tol", cfg.grad_tol, "relative gradient tolerance")->capture_default_str();
    app.add_option("--memory", cfg.memory, "L-BFGS history length")->capture_default_str();
    app.add_flag("--precondition-u,!--no-precondition-u", cfg.precondition_u, "scale the u block by 1/C_top");
    app.add_flag("--precondition-m,!--no-precondition-m", cfg.precondition_m,
                 "scale the momenta block by 1/(sum K)^2 (default on)");
    app.add_option("--restarts", cfg.restarts, "extra random starts")->capture_default_str();
    app.add_option("--seed", cfg.seed, "seed for the random starts")->capture_default_str();
    app.add_option("--restart-scale", cfg.restart_scale)->capture_default_str();
    app.add_flag("--discrepancy", cfg.discrepancy, "solve both directions and report d_sigma");
    app.add_flag("--decompose", cfg.decompose, "export u-only / v-only / advected renders");
    app.add_flag("--frames", cfg.frames, "export every f(k) with its contour");
    app.add_flag("--contours", cfg.contours, "export contour polylines as CSV");
    app.add_option("--checkpoint-every", cfg.checkpoint_every)->capture_default_str();
    app.add_option("--resume", cfg.resume, "checkpoint to continue from");
    app.add_option("--render-scale", cfg.render_scale, "pixels per grid node")->capture_default_str();
    app.add_option("--threads", cfg.threads, "run the two discrepancy directions concurrently when >= 2")
        ->envname("PHASEREG_THREADS")
        ->capture_default_str();

    FixtureRequest fx;
    std::vector<std::string> disc_specs;
    CLI::App* fixture = app.add_subcommand("fixture", "write a disc fixture image");
    fixture->add_option("--out", fx.out, "PNG or .pgm path")->required();
    fixture->add_option("--size", fx.size, "pixels per side")->capture_default_str();
    fixture->add_option("--L", fx.half_width, "domain half-width")->capture_default_str();
    fixture->add_option("--disc", disc_specs, "x1,x2,radius (repeatable)");
    fixture->add_option("--preset", fx.preset, "named layout")->check(CLI::IsMember(preset_names()));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "phasereg: config: " << e.what() << '\n';
        return kExitConfig;
    }

    if (fixture->parsed()) {
        try {
            for (const std::string& s : disc_specs) {
                Disc d;
                char tail = 0;
                if (std::sscanf(s.c_str(), "%lf,%lf,%lf%c", &d.x1, &d.x2, &d.radius, &tail) != 3)
                    throw ConfigError("--disc expects x1,x2,radius, got '" + s + "'");
                fx.discs.push_back(d);
            }
            write_fixture(fx);
            return kExitConverged;
        } catch (const ConfigError& e) {
            err << "phasereg: fixture: " << e.what() << '\n';
            return kExitConfig;
        } catch (const IoError& e) {
            err << "phasereg: fixture: " << e.what() << '\n';
            return kExitIo;
        }
    }
    return run(cfg, err);
}

}  // namespace phasereg::cli
