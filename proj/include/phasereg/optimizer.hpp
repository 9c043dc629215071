#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phasereg/adjoint.hpp"
#include "phasereg/controls.hpp"

namespace phasereg {

struct OptimizerConfig {
    int memory = 10;
    int max_iters = 300;
    /// Converged once |grad| <= grad_tol |grad_0|.
    double grad_tol = 1e-6;
    /// Also converged once |grad| <= grad_abs_tol (catches a stationary start).
    double grad_abs_tol = 0.0;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_line_search = 25;
    /// Scale the initial inverse Hessian by 1/C_top on the u block.
    bool precondition_u = false;
    /// Scale it by 1/(sum K~)^2 on the momenta blocks, so that a unit step
    /// moves v about as much as a unit step moves u.
    bool precondition_m = false;

    void validate() const;
};

/// Value and gradient at x; the gradient is written into `grad` (resized by the callee).
using Objective = std::function<double(std::span<const double> x, std::vector<double>& grad)>;

struct LineSearchResult {
    bool ok = false;
    double step = 0.0;
    double value = 0.0;
    std::vector<double> x;
    std::vector<double> grad;
    int evaluations = 0;
    std::string failure;
};

/// Strong Wolfe search along `direction` from (x0, f0, g0), bracketing then
/// zooming with cubic interpolation. A direction with <g0, d> >= 0 fails at once.
LineSearchResult line_search(const Objective& objective, std::span<const double> x0, double f0,
                             std::span<const double> g0, std::span<const double> direction,
                             const OptimizerConfig& config, double initial_step = 1.0);

enum class Termination { converged, max_iters, line_search_failure };

const char* to_string(Termination t);

/// Everything needed to continue a run exactly where it stopped.
struct OptimizerState {
    std::vector<double> x;
    std::vector<double> grad;
    double value = 0.0;
    double initial_grad_norm = 0.0;
    int iteration = 0;
    std::vector<std::vector<double>> s_hist;
    std::vector<std::vector<double>> y_hist;
    std::vector<double> value_trace;
    std::vector<double> grad_norm_trace;
    int evaluations = 0;
};

void write_state(std::ostream& os, const OptimizerState& state);
OptimizerState read_state(std::istream& is);

struct LbfgsOptions {
    /// Diagonal of the initial inverse-Hessian scaling (empty: identity).
    std::vector<double> h0_diagonal;
    /// Called after every accepted iteration.
    std::function<void(const OptimizerState&)> on_iteration;
};

struct LbfgsResult {
    OptimizerState state;
    Termination termination = Termination::max_iters;
    std::string message;
};

/// Limited-memory BFGS from x0. Throws NumericalError naming the iteration
/// if the objective is non-finite at an accepted point.
LbfgsResult lbfgs(const Objective& objective, std::vector<double> x0, const OptimizerConfig& config,
                  const LbfgsOptions& options = {});

/// Continue a run from a saved state.
LbfgsResult lbfgs_resume(const Objective& objective, OptimizerState state, const OptimizerConfig& config,
                         const LbfgsOptions& options = {});

struct OptimizationReport {
    int iterations = 0;
    std::vector<double> E_trace;
    std::vector<double> grad_norm_trace;
    Termination termination = Termination::max_iters;
    std::string message;
    ControlSet final_controls;
    EnergyBreakdown final_energy;
    int evaluations = 0;
};

struct MinimizeOptions {
    /// Write a checkpoint every this many iterations (0: never).
    int checkpoint_every = 0;
    std::string checkpoint_path;
    /// Resume from this checkpoint instead of starting at zero controls.
    std::string resume_path;
    /// Start from these controls instead of zero (ignored when resuming).
    std::optional<ControlSet> initial_controls;
    std::function<void(const OptimizerState&)> on_iteration;
};

/// Minimise E over the controls, starting from u = 0, m = 0 unless told otherwise.
OptimizationReport minimize(const Field& F0, const Field& target_T, const CostSpec& cost,
                            const EvolutionModel& model, const OptimizerConfig& config,
                            const MinimizeOptions& options = {});

/// The objective used by minimize(), on the stacked control vector.
Objective registration_objective(const Field& F0, const Field& target_T, const CostSpec& cost,
                                 const EvolutionModel& model);

/// Checkpoint = controls container for x followed by the optimizer state.
void save_checkpoint(const std::string& path, const OptimizerState& state, const GridSpec& grid,
                     const NormPowers& powers);
OptimizerState load_checkpoint(const std::string& path, const GridSpec& grid);

}  // namespace phasereg
