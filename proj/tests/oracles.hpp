#pragma once
// Brute-force reference computations used only by tests.
#include <proxymtl/core.hpp>
#include <array>
#include <cmath>
#include <functional>

namespace proxymtl::testutil {

/// Nuclear norm of a 2x2 matrix: sqrt(||Z||_F^2 + 2 |det Z|).
inline double nuclear_2x2(const std::array<double, 4>& z)
{
    const double fro2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2] + z[3] * z[3];
    const double det = z[0] * z[3] - z[1] * z[2];
    return std::sqrt(fro2 + 2 * std::abs(det));
}

inline double l21_2x2(const std::array<double, 4>& z)
{
    return std::hypot(z[0], z[1]) + std::hypot(z[2], z[3]);
}

/**
 * Minimizes 1/2 ||Z - M||_F^2 + t * pen(Z) over 2x2 Z (row-major z) by
 * grid search: first over a grid of half-width 2 ||M||_max, then on
 * successively finer grids around the incumbent, ending at step `step`.
 * The objective has kinks, so the grid argmin can sit several steps away
 * from the true minimizer; callers pick `step` well below their tolerance.
 */
inline Matrix grid_prox_2x2(const Matrix& M, double t, const std::function<double(const std::array<double, 4>&)>& pen,
                            double step = 1e-5)
{
    const std::array<double, 4> m{M(0, 0), M(0, 1), M(1, 0), M(1, 1)};
    auto f = [&](const std::array<double, 4>& z) {
        double q = 0;
        for (int i = 0; i < 4; ++i) q += (z[i] - m[i]) * (z[i] - m[i]);
        return 0.5 * q + t * pen(z);
    };
    std::array<double, 4> center{0, 0, 0, 0};
    double half = 2.0 * M.cwiseAbs().maxCoeff() + step;
    double h = half / 8;
    while (true) {
        h = std::max(h, step);
        const int K = static_cast<int>(std::ceil(half / h));
        std::array<double, 4> best = center;
        double fbest = f(center);
        std::array<double, 4> z{};
        for (int a = -K; a <= K; ++a) {
            z[0] = center[0] + a * h;
            for (int b = -K; b <= K; ++b) {
                z[1] = center[1] + b * h;
                for (int c = -K; c <= K; ++c) {
                    z[2] = center[2] + c * h;
                    for (int d = -K; d <= K; ++d) {
                        z[3] = center[3] + d * h;
                        const double v = f(z);
                        if (v < fbest) {
                            fbest = v;
                            best = z;
                        }
                    }
                }
            }
        }
        center = best;
        if (h <= step) break;
        half = 4 * h;
        h /= 4;
    }
    Matrix out(2, 2);
    out << center[0], center[1], center[2], center[3];
    return out;
}

} // namespace proxymtl::testutil
