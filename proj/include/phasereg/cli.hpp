#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "phasereg/image_io.hpp"
#include "phasereg/registration.hpp"

namespace phasereg::cli {

enum ExitCode : int {
    kExitConverged = 0,
    kExitUnexpected = 1,
    kExitMaxIters = 2,
    kExitLineSearch = 3,
    kExitIo = 4,
    kExitConfig = 5,
    kExitNumerical = 6,
};

/// Bad parameter combination; maps to kExitConfig.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kManifestVersion = 1;
inline constexpr int kMetricsSchemaVersion = 1;
inline constexpr const char* kMetricsHeader = "iteration,E,grad_norm,components";

struct RunConfig {
    std::string initial;
    std::string target;
    std::string out = "phasereg_out";

    int n = 151;  // as requested; even values are bumped to the next odd one
    int time_steps = 30;
    double half_width = 1.0;
    double sigma = 0.1;
    double p = 4.0;
    double r = 6.0;
    double well_depth = 100.0;
    double a = 0.01;
    double mu = 0.05;
    std::string psi_mode = "discrete";  // or "constant"
    double psi = 1e-8;                   // used when psi_mode == "constant"
    double c_top = 1e8;
    double c_end = 1e9;
    std::optional<double> kernel_width;  // physical units; unset means 10 dx

    int max_iters = 300;
    double grad_tol = 1e-6;
    int memory = 10;
    bool precondition_u = false;
    bool precondition_m = true;
    int restarts = 0;
    std::uint64_t seed = 0;
    double restart_scale = 1.0;

    bool discrepancy = false;
    bool decompose = false;
    bool frames = false;
    bool contours = false;
    int checkpoint_every = 0;
    std::string resume;
    int render_scale = 4;
    int threads = 1;

    int grid_n() const { return n % 2 == 1 ? n : n + 1; }
    /// Throws ConfigError.
    GridSpec grid() const;
    RegistrationProblem problem(const Field& initial_field, const Field& target_field) const;
};

struct FixtureRequest {
    std::string out;
    int size = 256;
    double half_width = 1.0;
    std::vector<Disc> discs;
    std::string preset;
};

/// Named disc layouts used by the examples and tests.
std::vector<Disc> preset_discs(const std::string& name);
std::vector<std::string> preset_names();

/// Writes the fixture as PNG, or PGM when the name ends in .pgm.
void write_fixture(const FixtureRequest& req);

/// Runs one registration (or a discrepancy pair) and writes its artifacts
/// under config.out. Progress and errors go to `log`.
int run(const RunConfig& config, std::ostream& log);

/// Command line entry point: `phasereg [options]` or `phasereg fixture [options]`.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace phasereg::cli
