#pragma once

#include <vector>

namespace interp3d {

/// Per-run interpolation schedule: frame coefficients plus the denoise-time
/// hyperparameters shared by both stages.
struct MorphSchedule {
    int frame_count = 0;              // L
    std::vector<double> alphas;       // L values in [0,1], endpoints exact
    double beta_param = 5.0;
    int denoise_steps = 25;           // T
    int max_patch_side = 4;           // s_max
    float tau0 = 0.5f;

    void validate() const;
};

/// Regularized incomplete beta function I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);

/// Beta(b, b) quantile by bisection on the regularized incomplete beta,
/// converged to 1e-10.
double beta_inverse_cdf(double beta_param, double p);

/// L coefficients at Beta(beta, beta) quantiles of i/(L-1); endpoints forced
/// to exactly 0 and 1.
MorphSchedule alpha_schedule(int frame_count, double beta_param);

/// Patch side at denoise step t: s_max halves on an even split of the step
/// range, reaching 1 by the final step. s_max must be a power of two.
int patch_size_schedule(int t, int total_steps, int s_max);

}  // namespace interp3d
