#pragma once

// Representation similarity measures: linear CKA, SVCCA, PWCCA.
// Inputs are n × d representation matrices with one row per sample.

#include <string>
#include <vector>

#include "stirkit/linalg.hpp"

namespace stirkit {

enum class RsmKind { linear_cka, svcca, pwcca };

std::string to_string(RsmKind kind);
/// Accepts "cka", "linear_cka", "svcca", "pwcca".
RsmKind parse_rsm_kind(const std::string& text);

struct CcaResult {
    std::vector<double> rhos;  // descending, clamped to [0,1]
    Matrix x_variates;         // n × k canonical variates of x, orthonormal columns
};

/// Canonical correlations via SVD whitening. Components with singular value
/// below 1e-10·σ_max are dropped on each side; k = min of the two ranks.
/// Throws NumericalError("degenerate representation") on zero rank.
CcaResult cca(const Matrix& x, const Matrix& y);

/// HSIC estimate (1/(n−1)²)·⟨HKH, HLH⟩_F for n × n gram matrices.
double hsic(const Matrix& k, const Matrix& l);

/// HSIC(K,L)/√(HSIC(K,K)·HSIC(L,L)) with K = XXᵀ, L = YYᵀ on column-centered
/// representations. Throws NumericalError("zero-variance representation")
/// when either side is constant across rows.
double linear_cka(const Matrix& x, const Matrix& y);

/// Mean canonical correlation after pruning each side to the leading
/// principal components holding ≥ 99% of the variance.
double svcca(const Matrix& x, const Matrix& y);

/// Canonical correlations weighted by α_i = Σ_j |⟨h_i, z_j⟩|, where h_i are
/// x-side canonical variates and z_j the columns of centered x.
double pwcca(const Matrix& x, const Matrix& y);

double similarity(RsmKind kind, const Matrix& x, const Matrix& y);

}  // namespace stirkit
