#pragma once

#include "pode/linalg.hpp"

#include <functional>
#include <vector>

namespace pode {

/// J(z) = 0.5 z^T H z - b^T z + constant with H symmetric PSD, given as a
/// matrix-free product.
struct NonnegQuadratic {
    std::function<Vector(const Vector&)> apply_h;
    Vector b;
    double constant = 0.0;

    double value(const Vector& z, const Vector& hz) const { return 0.5 * z.dot(hz) - b.dot(z) + constant; }
};

struct NonnegOptions {
    int max_iters = 500;    // outer projection + subspace cycles
    int projection_steps = 5;
    double tol = 1e-10;     // scaled KKT residual, see kkt_residual()
    double armijo = 1e-4;
};

struct NonnegSolution {
    Vector z;
    std::vector<double> objective_trace;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Worst violation of the KKT conditions for min J(z) s.t. z >= 0, scaled by
/// max(1, ||b||_inf): |g_i| on free coordinates, max(0, -g_i) on active ones.
double kkt_residual(const Vector& z, const Vector& gradient, const Vector& b);

/// Gradient projection with conjugate-gradient refinement on the current
/// face. Every accepted step satisfies an Armijo decrease, so the objective
/// trace is nonincreasing.
NonnegSolution solve_nonneg_quadratic(const NonnegQuadratic& problem, const Vector& z0,
                                      const NonnegOptions& options = {});

} // namespace pode
