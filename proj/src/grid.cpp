#include "phasereg/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace phasereg {

// Measured from the centre so that the origin and the mirror symmetry
// x_{c+k} = -x_{c-k} are exact in floating point.
double GridSpec::coord(int i) const { return dx * static_cast<double>(i - center()); }

GridSpec build_grid(int n, double half_width, int time_steps, double sigma) {
    if (n < 3) throw std::invalid_argument("build_grid: N must be at least 3, got " + std::to_string(n));
    if (n % 2 == 0) throw std::invalid_argument("build_grid: N must be odd, got " + std::to_string(n));
    if (!(half_width > 0.0)) throw std::invalid_argument("build_grid: L must be positive");
    if (time_steps < 2) throw std::invalid_argument("build_grid: T must be at least 2");
    if (!(sigma > 0.0)) throw std::invalid_argument("build_grid: sigma must be positive");

    GridSpec g;
    g.n = n;
    g.half_width = half_width;
    g.dx = 2.0 * half_width / static_cast<double>(n - 1);
    g.time_steps = time_steps;
    g.dt = 1.0 / static_cast<double>(time_steps - 1);
    g.sigma = sigma;
    g.tau = sigma * std::sqrt(g.dt);
    return g;
}

double RadialKernelSpec::resolved_width(const GridSpec& grid) const {
    const double s = width.value_or(10.0 * grid.dx);
    if (!(s > 0.0)) throw std::invalid_argument("RadialKernelSpec: width must be positive");
    return s;
}

double RadialKernelSpec::operator()(double rho, const GridSpec& grid) const {
    const double s = resolved_width(grid);
    return std::exp(-rho * rho / (2.0 * s * s));
}

namespace {

// FFTW's planner is not re-entrant; execution of an existing plan is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::size_t next_fast_size(std::size_t n) {
    for (std::size_t m = n;; ++m) {
        std::size_t r = m;
        for (std::size_t p : {2u, 3u, 5u, 7u})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

void require_odd_kernel(const Field& kernel, const char* what) {
    if (kernel.empty() || kernel.rows() % 2 == 0 || kernel.cols() % 2 == 0) {
        throw std::invalid_argument(std::string(what) + ": kernel extents must be odd, got " +
                                    std::to_string(kernel.rows()) + "x" +
                                    std::to_string(kernel.cols()));
    }
}

struct FftwBuffer {
    explicit FftwBuffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {
        if (!ptr) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(ptr); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
    void* ptr;
};

}  // namespace

struct Convolution::Impl {
    std::size_t rows = 0, cols = 0;
    std::size_t krow_c = 0, kcol_c = 0;
    std::size_t prow = 0, pcol = 0, pcol_half = 0;
    std::vector<std::complex<double>> spectrum;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;

    Impl(const Field& kernel, std::size_t r, std::size_t c) : rows(r), cols(c) {
        require_odd_kernel(kernel, "Convolution");
        krow_c = (kernel.rows() - 1) / 2;
        kcol_c = (kernel.cols() - 1) / 2;
        prow = next_fast_size(rows + kernel.rows() - 1);
        pcol = next_fast_size(cols + kernel.cols() - 1);
        pcol_half = pcol / 2 + 1;

        FftwBuffer real(sizeof(double) * prow * pcol);
        FftwBuffer cplx(sizeof(fftw_complex) * prow * pcol_half);
        {
            std::lock_guard lock(planner_mutex());
            forward = fftw_plan_dft_r2c_2d(static_cast<int>(prow), static_cast<int>(pcol),
                                           static_cast<double*>(real.ptr),
                                           static_cast<fftw_complex*>(cplx.ptr), FFTW_ESTIMATE);
            backward = fftw_plan_dft_c2r_2d(static_cast<int>(prow), static_cast<int>(pcol),
                                            static_cast<fftw_complex*>(cplx.ptr),
                                            static_cast<double*>(real.ptr), FFTW_ESTIMATE);
        }
        if (!forward || !backward) throw std::runtime_error("Convolution: FFTW planning failed");

        auto* in = static_cast<double*>(real.ptr);
        std::fill(in, in + prow * pcol, 0.0);
        for (std::size_t i = 0; i < kernel.rows(); ++i)
            for (std::size_t j = 0; j < kernel.cols(); ++j) in[i * pcol + j] = kernel(i, j);
        fftw_execute_dft_r2c(forward, in, static_cast<fftw_complex*>(cplx.ptr));

        const double scale = 1.0 / static_cast<double>(prow * pcol);
        auto* out = static_cast<fftw_complex*>(cplx.ptr);
        spectrum.resize(prow * pcol_half);
        for (std::size_t k = 0; k < spectrum.size(); ++k)
            spectrum[k] = std::complex<double>(out[k][0], out[k][1]) * scale;
    }

    ~Impl() {
        std::lock_guard lock(planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
    }

    Impl(const Impl&) = delete;
    Impl& operator=(const Impl&) = delete;

    Field run(const Field& field, bool adjoint) const {
        if (field.rows() != rows || field.cols() != cols) {
            throw std::invalid_argument("Convolution: field is " + std::to_string(field.rows()) + "x" +
                                        std::to_string(field.cols()) + ", expected " +
                                        std::to_string(rows) + "x" + std::to_string(cols));
        }
        FftwBuffer real(sizeof(double) * prow * pcol);
        FftwBuffer cplx(sizeof(fftw_complex) * prow * pcol_half);
        auto* in = static_cast<double*>(real.ptr);
        auto* freq = static_cast<fftw_complex*>(cplx.ptr);

        std::fill(in, in + prow * pcol, 0.0);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) in[i * pcol + j] = field(i, j);
        fftw_execute_dft_r2c(forward, in, freq);

        for (std::size_t k = 0; k < spectrum.size(); ++k) {
            const std::complex<double> h(freq[k][0], freq[k][1]);
            const std::complex<double> prod = adjoint ? std::conj(spectrum[k]) * h : spectrum[k] * h;
            freq[k][0] = prod.real();
            freq[k][1] = prod.imag();
        }
        fftw_execute_dft_c2r(backward, freq, in);

        Field out(rows, cols);
        if (!adjoint) {
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j)
                    out(i, j) = in[(i + krow_c) * pcol + (j + kcol_c)];
        } else {
            // circular cross-correlation; negative lags wrap to the padded tail
            for (std::size_t i = 0; i < rows; ++i) {
                const std::size_t pi = (i + prow - krow_c) % prow;
                for (std::size_t j = 0; j < cols; ++j) {
                    const std::size_t pj = (j + pcol - kcol_c) % pcol;
                    out(i, j) = in[pi * pcol + pj];
                }
            }
        }
        return out;
    }
};

Convolution::Convolution(const Field& kernel, std::size_t rows, std::size_t cols)
    : impl_(std::make_shared<const Impl>(kernel, rows, cols)) {}

Field Convolution::apply(const Field& field) const {
    if (!impl_) throw std::logic_error("Convolution: not initialised");
    return impl_->run(field, false);
}

Field Convolution::apply_adjoint(const Field& field) const {
    if (!impl_) throw std::logic_error("Convolution: not initialised");
    return impl_->run(field, true);
}

KernelSet build_kernels(const GridSpec& grid, const RadialKernelSpec& kappa) {
    if (grid.n < 3 || grid.n % 2 == 0 || !(grid.tau > 0.0))
        throw std::invalid_argument("build_kernels: invalid GridSpec");

    const auto n = static_cast<std::size_t>(grid.n);
    const double tau2 = grid.tau * grid.tau;
    // 2D Gaussian normalisation 1 / (2 pi tau^2), so that sum(M) ~ 1
    const double norm = grid.cell_area() / (2.0 * std::numbers::pi * tau2);

    KernelSet ks;
    ks.grid = grid;
    ks.heat = Field::square(n);
    ks.heat_dx = Field::square(n);
    for (int i = 0; i < grid.n; ++i) {
        const double xi = grid.coord(i);
        for (int j = 0; j < grid.n; ++j) {
            const double xj = grid.coord(j);
            const double m = norm * std::exp(-(xi * xi + xj * xj) / (2.0 * tau2));
            ks.heat(i, j) = m;
            ks.heat_dx(i, j) = -(xi / tau2) * m;
        }
    }
    ks.heat_dy = ks.heat_dx.transposed();

    const std::size_t w = 2 * n - 1;
    ks.rkhs = Field::square(w);
    for (std::size_t a = 0; a < w; ++a) {
        const double ox = grid.dx * (static_cast<double>(a) - static_cast<double>(n - 1));
        for (std::size_t b = 0; b < w; ++b) {
            const double oy = grid.dx * (static_cast<double>(b) - static_cast<double>(n - 1));
            ks.rkhs(a, b) = kappa(std::sqrt(ox * ox + oy * oy), grid);
        }
    }

    ks.heat_op = Convolution(ks.heat, n, n);
    ks.heat_dx_op = Convolution(ks.heat_dx, n, n);
    ks.heat_dy_op = Convolution(ks.heat_dy, n, n);
    ks.rkhs_op = Convolution(ks.rkhs, n, n);
    return ks;
}

Field convolve(const Field& kernel, const Field& field) {
    return Convolution(kernel, field.rows(), field.cols()).apply(field);
}

Field adjoint_convolve(const Field& kernel, const Field& field) {
    return Convolution(kernel, field.rows(), field.cols()).apply_adjoint(field);
}

Field convolve_direct(const Field& kernel, const Field& field) {
    require_odd_kernel(kernel, "convolve_direct");
    const auto kc_r = static_cast<long>((kernel.rows() - 1) / 2);
    const auto kc_c = static_cast<long>((kernel.cols() - 1) / 2);
    const auto rows = static_cast<long>(field.rows());
    const auto cols = static_cast<long>(field.cols());
    Field out(field.rows(), field.cols());
    for (long i = 0; i < rows; ++i) {
        for (long j = 0; j < cols; ++j) {
            double s = 0.0;
            for (long a = 0; a < static_cast<long>(kernel.rows()); ++a) {
                const long si = i - (a - kc_r);
                if (si < 0 || si >= rows) continue;
                for (long b = 0; b < static_cast<long>(kernel.cols()); ++b) {
                    const long sj = j - (b - kc_c);
                    if (sj < 0 || sj >= cols) continue;
                    s += kernel(a, b) * field(si, sj);
                }
            }
            out(i, j) = s;
        }
    }
    return out;
}

Field adjoint_convolve_direct(const Field& kernel, const Field& field) {
    require_odd_kernel(kernel, "adjoint_convolve_direct");
    Field flipped(kernel.rows(), kernel.cols());
    for (std::size_t a = 0; a < kernel.rows(); ++a)
        for (std::size_t b = 0; b < kernel.cols(); ++b)
            flipped(kernel.rows() - 1 - a, kernel.cols() - 1 - b) = kernel(a, b);
    return convolve_direct(flipped, field);
}

}  // namespace phasereg
