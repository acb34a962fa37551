#pragma once

#include <span>
#include <vector>

#include "interp3d/tensor.hpp"

namespace interp3d {

/// a (R x K) times b (K x C), accumulated in double.
FeatureMatrix matmul(const FeatureMatrix& a, const FeatureMatrix& b);

/// (1-alpha)*a + alpha*b. Exactly a at alpha=0 and b at alpha=1.
FeatureMatrix lerp_matrix(const FeatureMatrix& a, const FeatureMatrix& b, float alpha);

/// Pairwise (cascade) summation; order-independent given the same input vector.
double pairwise_sum(std::span<const double> values);

/// Entry (j,k) = cos(a_j, b_k). Throws InvalidInputError on channel mismatch or
/// a row with norm below 1e-12 (message names the input and row).
FeatureMatrix cosine_similarity_matrix(const FeatureMatrix& a, const FeatureMatrix& b);

/// Symmetric eigendecomposition (cyclic Jacobi, double precision).
/// Eigenvalues ascending; eigenvectors returned as columns of `vectors`.
struct SymmetricEigen {
    std::vector<double> values;
    std::vector<double> vectors;  // d x d row-major, column j is eigenvector j
};
SymmetricEigen symmetric_eigen(const std::vector<double>& s, int d);

/// PSD square root via eigendecomposition. Eigenvalues in [-1e-8, 0) are
/// clamped to 0; values below -1e-8 or asymmetry beyond 1e-6 throw.
std::vector<double> psd_sqrt(const std::vector<double>& s, int d);

FeatureMatrix psd_sqrt(const FeatureMatrix& s);

}  // namespace interp3d
