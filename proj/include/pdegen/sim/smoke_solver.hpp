// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "pdegen/core/rng.hpp"
#include "pdegen/geo/field_sample.hpp"

namespace pdegen::sim {

struct SmokeSpec {
    int resolution = 32;
    int frames = 24;          // stored frames including the initial state
    double dt = 0.04;
    double viscosity = 1e-4;
    double buoyancy = 0.5;
    double cfl_limit = 2.0;
    int pressure_max_iters = 400;
    double pressure_tol = 1e-10;

    void validate() const {
        if (resolution < 4) throw UsageError("smoke spec: resolution too small");
        if (frames < 2) throw UsageError("smoke spec: need at least two frames");
        if (dt <= 0) throw UsageError("smoke spec: dt must be positive");
        if (viscosity < 0) throw UsageError("smoke spec: negative viscosity");
    }
};

// Buoyant smoke in a closed box on a MAC grid: semi-Lagrangian advection of
// velocity and density, explicit viscous diffusion, upward buoyancy force
// proportional to density, and a conjugate-gradient pressure projection that
// keeps the velocity field discretely divergence-free.
class SmokeSolver {
public:
    explicit SmokeSolver(const SmokeSpec& spec) : spec_(spec) {
        spec_.validate();
        n_ = spec_.resolution;
        h_ = 1.0 / n_;
        u_.assign(static_cast<size_t>((n_ + 1) * n_), 0.0);
        v_.assign(static_cast<size_t>(n_ * (n_ + 1)), 0.0);
        density_.assign(static_cast<size_t>(n_ * n_), 0.0);
    }

    int resolution() const { return n_; }
    std::vector<double>& density() { return density_; }
    const std::vector<double>& density() const { return density_; }

    // Collocated initial state (cell centers, channels vx, vy, d).
    void set_initial_from_centers(const std::vector<float>& centers) {
        if (centers.size() != static_cast<size_t>(n_ * n_ * 3))
            throw DataError("smoke solver: initial frame size mismatch");
        for (int i = 0; i < n_ * n_; ++i) density_[static_cast<size_t>(i)] = std::max(0.0, double(centers[static_cast<size_t>(i * 3 + 2)]));
        // centers -> faces by averaging; boundary faces stay closed
        for (int i = 1; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                u_[static_cast<size_t>(i * n_ + j)] =
                    0.5 * (double(centers[static_cast<size_t>(((i - 1) * n_ + j) * 3)]) +
                           double(centers[static_cast<size_t>((i * n_ + j) * 3)]));
        for (int i = 0; i < n_; ++i)
            for (int j = 1; j < n_; ++j)
                v_[static_cast<size_t>(i * (n_ + 1) + j)] =
                    0.5 * (double(centers[static_cast<size_t>((i * n_ + (j - 1)) * 3 + 1)]) +
                           double(centers[static_cast<size_t>((i * n_ + j) * 3 + 1)]));
        enforce_boundary();
    }

    void add_gaussian_plume(double cx, double cy, double width, double amplitude) {
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) {
                const double x = (i + 0.5) * h_, y = (j + 0.5) * h_;
                const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                auto& d = density_[static_cast<size_t>(i * n_ + j)];
                d = std::min(1.0, d + amplitude * std::exp(-r2 / (2.0 * width * width)));
            }
    }

    void step() {
        check_cfl();
        advect_velocity();
        if (spec_.viscosity > 0) diffuse_velocity();
        add_buoyancy();
        enforce_boundary();
        project();
        enforce_boundary();
        advect_density();
    }

    // RMS divergence over interior cells (after projection).
    double divergence_rms() const {
        double acc = 0;
        int count = 0;
        for (int i = 1; i < n_ - 1; ++i)
            for (int j = 1; j < n_ - 1; ++j) {
                const double div = (u_at(i + 1, j) - u_at(i, j) + v_at(i, j + 1) - v_at(i, j)) / h_;
                acc += div * div;
                ++count;
            }
        return std::sqrt(acc / count);
    }

    double total_mass() const {
        double m = 0;
        for (double d : density_) m += d;
        return m * h_ * h_;
    }

    double max_speed() const {
        double m = 0;
        for (double x : u_) m = std::max(m, std::abs(x));
        for (double x : v_) m = std::max(m, std::abs(x));
        return m;
    }

    // Density centroid (for buoyancy sanity checks).
    std::pair<double, double> density_centroid() const {
        double mx = 0, my = 0, m = 0;
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) {
                const double d = density_[static_cast<size_t>(i * n_ + j)];
                mx += d * (i + 0.5) * h_;
                my += d * (j + 0.5) * h_;
                m += d;
            }
        if (m <= 0) return {0.5, 0.5};
        return {mx / m, my / m};
    }

    // Current state collocated at cell centers: vx, vy, density.
    void write_centers(std::vector<float>& out) const {
        out.resize(static_cast<size_t>(n_ * n_ * 3));
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) {
                const size_t o = static_cast<size_t>((i * n_ + j) * 3);
                out[o] = float(0.5 * (u_at(i, j) + u_at(i + 1, j)));
                out[o + 1] = float(0.5 * (v_at(i, j) + v_at(i, j + 1)));
                out[o + 2] = float(density_[static_cast<size_t>(i * n_ + j)]);
            }
    }

    // Runs the configured horizon and returns the trajectory as a grid sample.
    geo::FieldSample run() {
        geo::FieldSample s;
        s.time_count = spec_.frames;
        s.spatial_dim = 2;
        s.channels = 3;
        s.grid_extents = {n_, n_};
        s.channel_names = {"vx", "vy", "density"};
        s.values.reserve(static_cast<size_t>(spec_.frames) * n_ * n_ * 3);
        std::vector<float> frame;
        write_centers(frame);
        s.values.insert(s.values.end(), frame.begin(), frame.end());
        for (int t = 1; t < spec_.frames; ++t) {
            step();
            write_centers(frame);
            s.values.insert(s.values.end(), frame.begin(), frame.end());
        }
        return s;
    }

private:
    double u_at(int i, int j) const { return u_[static_cast<size_t>(i * n_ + j)]; }
    double v_at(int i, int j) const { return v_[static_cast<size_t>(i * (n_ + 1) + j)]; }

    void check_cfl() const {
        const double cfl = max_speed() * spec_.dt / h_;
        if (cfl > spec_.cfl_limit)
            throw NumericalError("smoke solver: CFL " + std::to_string(cfl) + " exceeds limit " +
                                 std::to_string(spec_.cfl_limit) + " (reduce dt or buoyancy)");
    }

    void enforce_boundary() {
        for (int j = 0; j < n_; ++j) {
            u_[static_cast<size_t>(0 * n_ + j)] = 0.0;
            u_[static_cast<size_t>(n_ * n_ + j)] = 0.0;
        }
        for (int i = 0; i < n_; ++i) {
            v_[static_cast<size_t>(i * (n_ + 1) + 0)] = 0.0;
            v_[static_cast<size_t>(i * (n_ + 1) + n_)] = 0.0;
        }
    }

    // Bilinear samplers over the staggered layouts; coordinates in [0,1]^2.
    double sample_u(double x, double y) const {
        const double gx = std::min(std::max(x / h_, 0.0), double(n_));
        const double gy = std::min(std::max(y / h_ - 0.5, 0.0), double(n_ - 1));
        const int i0 = std::min(static_cast<int>(gx), n_ - 1);
        const int j0 = std::min(static_cast<int>(gy), n_ - 2 >= 0 ? n_ - 2 : 0);
        const double fx = gx - i0, fy = gy - j0;
        return (1 - fx) * (1 - fy) * u_at(i0, j0) + fx * (1 - fy) * u_at(i0 + 1, j0) +
               (1 - fx) * fy * u_at(i0, j0 + 1) + fx * fy * u_at(i0 + 1, j0 + 1);
    }

    double sample_v(double x, double y) const {
        const double gx = std::min(std::max(x / h_ - 0.5, 0.0), double(n_ - 1));
        const double gy = std::min(std::max(y / h_, 0.0), double(n_));
        const int i0 = std::min(static_cast<int>(gx), n_ - 2 >= 0 ? n_ - 2 : 0);
        const int j0 = std::min(static_cast<int>(gy), n_ - 1);
        const double fx = gx - i0, fy = gy - j0;
        return (1 - fx) * (1 - fy) * v_at(i0, j0) + fx * (1 - fy) * v_at(i0 + 1, j0) +
               (1 - fx) * fy * v_at(i0, j0 + 1) + fx * fy * v_at(i0 + 1, j0 + 1);
    }

    double sample_center(const std::vector<double>& f, double x, double y) const {
        const double gx = std::min(std::max(x / h_ - 0.5, 0.0), double(n_ - 1));
        const double gy = std::min(std::max(y / h_ - 0.5, 0.0), double(n_ - 1));
        const int i0 = std::min(static_cast<int>(gx), n_ - 2 >= 0 ? n_ - 2 : 0);
        const int j0 = std::min(static_cast<int>(gy), n_ - 2 >= 0 ? n_ - 2 : 0);
        const double fx = gx - i0, fy = gy - j0;
        return (1 - fx) * (1 - fy) * f[static_cast<size_t>(i0 * n_ + j0)] +
               fx * (1 - fy) * f[static_cast<size_t>((i0 + 1) * n_ + j0)] +
               (1 - fx) * fy * f[static_cast<size_t>(i0 * n_ + j0 + 1)] +
               fx * fy * f[static_cast<size_t>((i0 + 1) * n_ + j0 + 1)];
    }

    // RK2 backtrace from (x, y).
    void backtrace(double x, double y, double& sx, double& sy) const {
        const double mx = x - 0.5 * spec_.dt * sample_u(x, y);
        const double my = y - 0.5 * spec_.dt * sample_v(x, y);
        sx = std::min(std::max(x - spec_.dt * sample_u(mx, my), 0.0), 1.0);
        sy = std::min(std::max(y - spec_.dt * sample_v(mx, my), 0.0), 1.0);
    }

    void advect_velocity() {
        std::vector<double> nu(u_.size()), nv(v_.size());
        for (int i = 0; i <= n_; ++i)
            for (int j = 0; j < n_; ++j) {
                double sx, sy;
                backtrace(i * h_, (j + 0.5) * h_, sx, sy);
                nu[static_cast<size_t>(i * n_ + j)] = sample_u(sx, sy);
            }
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j <= n_; ++j) {
                double sx, sy;
                backtrace((i + 0.5) * h_, j * h_, sx, sy);
                nv[static_cast<size_t>(i * (n_ + 1) + j)] = sample_v(sx, sy);
            }
        u_ = std::move(nu);
        v_ = std::move(nv);
    }

    void advect_density() {
        std::vector<double> nd(density_.size());
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) {
                double sx, sy;
                backtrace((i + 0.5) * h_, (j + 0.5) * h_, sx, sy);
                nd[static_cast<size_t>(i * n_ + j)] = std::max(0.0, sample_center(density_, sx, sy));
            }
        density_ = std::move(nd);
    }

    void diffuse_velocity() {
        const double k = spec_.viscosity * spec_.dt / (h_ * h_);
        std::vector<double> nu(u_), nv(v_);
        for (int i = 1; i < n_; ++i)
            for (int j = 0; j < n_; ++j) {
                const double c = u_at(i, j);
                const double l = u_at(i - 1, j), r = u_at(i + 1, j);
                const double b = j > 0 ? u_at(i, j - 1) : c;
                const double t = j < n_ - 1 ? u_at(i, j + 1) : c;
                nu[static_cast<size_t>(i * n_ + j)] = c + k * (l + r + b + t - 4 * c);
            }
        for (int i = 0; i < n_; ++i)
            for (int j = 1; j < n_; ++j) {
                const double c = v_at(i, j);
                const double b = v_at(i, j - 1), t = v_at(i, j + 1);
                const double l = i > 0 ? v_at(i - 1, j) : c;
                const double r = i < n_ - 1 ? v_at(i + 1, j) : c;
                nv[static_cast<size_t>(i * (n_ + 1) + j)] = c + k * (l + r + b + t - 4 * c);
            }
        u_ = std::move(nu);
        v_ = std::move(nv);
    }

    void add_buoyancy() {
        for (int i = 0; i < n_; ++i)
            for (int j = 1; j < n_; ++j) {
                const double d = 0.5 * (density_[static_cast<size_t>(i * n_ + j - 1)] +
                                        density_[static_cast<size_t>(i * n_ + j)]);
                v_[static_cast<size_t>(i * (n_ + 1) + j)] += spec_.dt * spec_.buoyancy * d;
            }
    }

    // 5-point Neumann Laplacian applied to cell-centered p.
    void apply_laplacian(const std::vector<double>& p, std::vector<double>& out) const {
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) {
                const double c = p[static_cast<size_t>(i * n_ + j)];
                double acc = 0;
                int nb = 0;
                if (i > 0) { acc += p[static_cast<size_t>((i - 1) * n_ + j)]; ++nb; }
                if (i < n_ - 1) { acc += p[static_cast<size_t>((i + 1) * n_ + j)]; ++nb; }
                if (j > 0) { acc += p[static_cast<size_t>(i * n_ + j - 1)]; ++nb; }
                if (j < n_ - 1) { acc += p[static_cast<size_t>(i * n_ + j + 1)]; ++nb; }
                out[static_cast<size_t>(i * n_ + j)] = (acc - nb * c) / (h_ * h_);
            }
    }

    void project() {
        // solve lap(p) = div(v)/dt, then v -= dt * grad(p)
        const size_t cells = static_cast<size_t>(n_ * n_);
        std::vector<double> rhs(cells);
        double mean = 0;
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) {
                const double div = (u_at(i + 1, j) - u_at(i, j) + v_at(i, j + 1) - v_at(i, j)) / h_;
                rhs[static_cast<size_t>(i * n_ + j)] = div / spec_.dt;
                mean += rhs[static_cast<size_t>(i * n_ + j)];
            }
        mean /= double(cells);
        for (auto& x : rhs) x -= mean;  // Neumann compatibility

        std::vector<double> p(cells, 0.0), r(rhs), d(rhs), q(cells);
        double rho = 0;
        for (double x : r) rho += x * x;
        const double tol2 = spec_.pressure_tol * spec_.pressure_tol * std::max(rho, 1e-300);
        for (int it = 0; it < spec_.pressure_max_iters && rho > tol2; ++it) {
            apply_laplacian(d, q);
            double dq = 0;
            for (size_t k = 0; k < cells; ++k) dq += d[k] * q[k];
            if (std::abs(dq) < 1e-300) break;
            const double alpha = rho / dq;
            double rho_new = 0;
            for (size_t k = 0; k < cells; ++k) {
                p[k] += alpha * d[k];
                r[k] -= alpha * q[k];
                rho_new += r[k] * r[k];
            }
            const double beta = rho_new / rho;
            rho = rho_new;
            for (size_t k = 0; k < cells; ++k) d[k] = r[k] + beta * d[k];
        }

        for (int i = 1; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                u_[static_cast<size_t>(i * n_ + j)] -=
                    spec_.dt * (p[static_cast<size_t>(i * n_ + j)] - p[static_cast<size_t>((i - 1) * n_ + j)]) / h_;
        for (int i = 0; i < n_; ++i)
            for (int j = 1; j < n_; ++j)
                v_[static_cast<size_t>(i * (n_ + 1) + j)] -=
                    spec_.dt * (p[static_cast<size_t>(i * n_ + j)] - p[static_cast<size_t>(i * n_ + j - 1)]) / h_;
    }

    SmokeSpec spec_;
    int n_ = 0;
    double h_ = 0;
    std::vector<double> u_, v_, density_;
};

}  // namespace pdegen::sim
