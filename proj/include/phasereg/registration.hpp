#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phasereg/adjoint.hpp"
#include "phasereg/forward.hpp"
#include "phasereg/optimizer.hpp"

namespace phasereg {

/// Interface level used for contours and component counts.
inline constexpr double kInterfaceLevel = 0.5;

struct RegistrationProblem {
    Field initial;  // binary (or soft, in [0, 1]) N x N
    Field target;
    GridSpec grid;
    NormPowers powers;
    double c_top = 1e8;
    double c_end = 1e9;
    RadialKernelSpec kappa;
    ReactionSpec reaction;
    MbpMap mbp;
    /// Constant psi in chi; unset means psi^2 = dt * 1e-16.
    std::optional<double> psi;
    OptimizerConfig optimizer;
    /// Extra optimisations from random controls; the best rho wins. Draws
    /// come from a generator seeded with `seed`, uniform in +-restart_scale
    /// for u and scaled so the momenta give velocities of the same size.
    int restarts = 0;
    std::uint64_t seed = 0;
    double restart_scale = 1.0;

    /// Throws std::invalid_argument on shape mismatches or C_end <= 0, C_top < 0.
    void validate() const;
    EvolutionModel model() const;
    CostSpec cost() const;
};

struct SolveResult {
    OptimizationReport report;
    /// Best energy found; a local optimum, so an upper bound on the true minimum.
    double rho = 0.0;
    /// Which start produced the result (0 = zero controls).
    int start = 0;
    /// Energy of the zero-control guess (pure endpoint misfit).
    EnergyBreakdown zero_control;
    /// The target after T steps of zero-control evolution, smoothed.
    Field target_T;
};

SolveResult solve(const RegistrationProblem& problem, const MinimizeOptions& options = {});

struct DiscrepancyResult {
    double rho_forward = 0.0;   // initial -> target
    double rho_backward = 0.0;  // target -> initial
    double d_sigma = 0.0;       // min of the two
    std::optional<SolveResult> forward;
    std::optional<SolveResult> backward;
    /// Set when a direction aborted; its rho is then +inf.
    bool partial = false;
    std::string failure;
};

/// Runs solve in both directions. Uses problem's grid and parameters with
/// the shapes a and b in place of initial and target. With threads >= 2 the
/// two directions run concurrently; results do not depend on it.
DiscrepancyResult discrepancy(const Field& a, const Field& b, const RegistrationProblem& params,
                              int threads = 1, const MinimizeOptions& forward_options = {},
                              const MinimizeOptions& backward_options = {});

struct Point {
    double x1 = 0.0;
    double x2 = 0.0;
};

/// Bilinear interpolation of a grid field at a physical point; zero outside the grid.
double sample_bilinear(const Field& f, const GridSpec& grid, Point p);

/// Explicit Euler particle paths through per-step velocity fields:
/// X_{k+1} = X_k + dt v_k(X_k). Returns positions at every step (size steps + 1).
std::vector<std::vector<Point>> flow_particles(const std::vector<Field>& v1, const std::vector<Field>& v2,
                                               const GridSpec& grid, std::vector<Point> start);

/// Pulls `field` back through the inverse of the flow (backward Euler-in-time
/// characteristics) and samples it at the grid nodes.
Field advect_by_flow(const Field& field, const std::vector<Field>& v1, const std::vector<Field>& v2,
                     const GridSpec& grid);

struct Decomposition {
    /// Particle positions per step, seeded at every grid node (row-major).
    std::vector<std::vector<Point>> particles;
    /// Component label (1-based, 0 = outside) of each particle's seed in the initial shape.
    std::vector<int> seed_component;
    Field u_only_endpoint;  // evolve with optimal u, m = 0
    Field v_only_endpoint;  // evolve with optimal m, u = 0
    Field advected_indicator;  // initial shape carried by the v flow, thresholded
    int initial_components = 0;
    int advected_components = 0;
};

Decomposition decompose(const OptimizationReport& report, const RegistrationProblem& problem);

/// Labels of the 4-connected components of {field > threshold}; 0 outside.
std::vector<int> component_labels(const Field& field, double threshold, int* count = nullptr);
int component_count(const Field& field, double threshold = kInterfaceLevel);

using Polyline = std::vector<Point>;

/// Marching-squares level set, chained into polylines (closed ones repeat
/// their first point at the end). Saddles are resolved by the cell average.
std::vector<Polyline> contour(const Field& field, double level, const GridSpec& grid);

/// Area of {field > level} with the field linear along cell edges: each cell
/// contributes the polygon cut from it by the edge crossings.
double level_set_area(const Field& field, double level, const GridSpec& grid);

}  // namespace phasereg
