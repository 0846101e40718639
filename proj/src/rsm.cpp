#include "stirkit/rsm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stirkit/error.hpp"

namespace stirkit {

namespace {

constexpr double kRankTol = 1e-10;
constexpr double kVarianceKept = 0.99;

void require_paired(const Matrix& x, const Matrix& y, const char* op) {
    if (x.rows() != y.rows())
        throw DimensionError(std::string(op) + ": representations differ in sample count (" +
                             std::to_string(x.rows()) + " vs " + std::to_string(y.rows()) + ")");
    if (x.rows() < 2) throw InvalidArgument(std::string(op) + ": need at least 2 samples");
}

// Orthonormal basis (n × r) of the column space of centered `a`.
Matrix whitened_basis(const Matrix& centered) {
    SvdResult svd = svd_thin(centered);
    const std::size_t rank = effective_rank(svd.s, kRankTol);
    if (rank == 0) throw NumericalError("degenerate representation");
    return svd.u.left_columns(rank);
}

// Scores on the leading principal components holding ≥ 99% of Σσ².
Matrix prune_to_variance(const Matrix& centered) {
    SvdResult svd = svd_thin(centered);
    const double total = std::inner_product(svd.s.begin(), svd.s.end(), svd.s.begin(), 0.0);
    if (!(total > 0.0)) throw NumericalError("degenerate representation");
    std::size_t keep = 0;
    double acc = 0.0;
    while (keep < svd.s.size()) {
        acc += svd.s[keep] * svd.s[keep];
        ++keep;
        if (acc >= kVarianceKept * total) break;
    }
    Matrix scores(centered.rows(), keep);
    for (std::size_t i = 0; i < centered.rows(); ++i)
        for (std::size_t j = 0; j < keep; ++j) scores(i, j) = svd.u(i, j) * svd.s[j];
    return scores;
}

}  // namespace

std::string to_string(RsmKind kind) {
    switch (kind) {
        case RsmKind::linear_cka: return "cka";
        case RsmKind::svcca: return "svcca";
        case RsmKind::pwcca: return "pwcca";
    }
    return "cka";
}

RsmKind parse_rsm_kind(const std::string& text) {
    if (text == "cka" || text == "linear_cka") return RsmKind::linear_cka;
    if (text == "svcca") return RsmKind::svcca;
    if (text == "pwcca") return RsmKind::pwcca;
    throw InvalidArgument("unknown similarity measure '" + text + "' (cka|svcca|pwcca)");
}

CcaResult cca(const Matrix& x, const Matrix& y) {
    require_paired(x, y, "cca");
    const Matrix qx = whitened_basis(center_columns(x));
    const Matrix qy = whitened_basis(center_columns(y));
    // Singular values of Qxᵀ·Qy are the canonical correlations.
    SvdResult inner = svd_thin(matmul_tn(qx, qy));
    const std::size_t k = std::min(qx.cols(), qy.cols());
    CcaResult r;
    r.rhos.resize(k);
    for (std::size_t i = 0; i < k; ++i) r.rhos[i] = std::clamp(inner.s[i], 0.0, 1.0);
    r.x_variates = matmul(qx, inner.u.left_columns(k));
    return r;
}

double hsic(const Matrix& k, const Matrix& l) {
    if (k.rows() != k.cols() || l.rows() != l.cols())
        throw DimensionError("hsic: gram matrices must be square");
    if (k.rows() != l.rows()) throw DimensionError("hsic: gram matrices differ in size");
    const std::size_t n = k.rows();
    if (n < 2) throw InvalidArgument("hsic: need n ≥ 2");
    const double denom = static_cast<double>(n - 1) * static_cast<double>(n - 1);
    return frobenius_inner(center_gram(k), center_gram(l)) / denom;
}

double linear_cka(const Matrix& x, const Matrix& y) {
    require_paired(x, y, "linear_cka");
    const Matrix xc = center_columns(x);
    const Matrix yc = center_columns(y);
    // Constant columns leave only rounding residue after centering.
    if (frobenius_norm(xc) <= 1e-12 * std::max(1.0, frobenius_norm(x)) ||
        frobenius_norm(yc) <= 1e-12 * std::max(1.0, frobenius_norm(y)))
        throw NumericalError("zero-variance representation");
    const Matrix k = matmul_nt(xc, xc);
    const Matrix l = matmul_nt(yc, yc);
    const double kl = hsic(k, l);
    const double kk = hsic(k, k);
    const double ll = hsic(l, l);
    if (!(kk > 0.0) || !(ll > 0.0)) throw NumericalError("zero-variance representation");
    return std::clamp(kl / std::sqrt(kk * ll), 0.0, 1.0);
}

double svcca(const Matrix& x, const Matrix& y) {
    require_paired(x, y, "svcca");
    const Matrix xp = prune_to_variance(center_columns(x));
    const Matrix yp = prune_to_variance(center_columns(y));
    const CcaResult r = cca(xp, yp);
    return std::accumulate(r.rhos.begin(), r.rhos.end(), 0.0) / static_cast<double>(r.rhos.size());
}

double pwcca(const Matrix& x, const Matrix& y) {
    require_paired(x, y, "pwcca");
    const CcaResult r = cca(x, y);
    const Matrix z = center_columns(x);
    // α_i = Σ_j |⟨h_i, z_j⟩|, i.e. column sums of |Hᵀ Z|.
    const Matrix inner = matmul_tn(r.x_variates, z);
    double weighted = 0.0, total = 0.0;
    for (std::size_t i = 0; i < r.rhos.size(); ++i) {
        double alpha = 0.0;
        for (std::size_t j = 0; j < inner.cols(); ++j) alpha += std::abs(inner(i, j));
        weighted += alpha * r.rhos[i];
        total += alpha;
    }
    if (!(total > 0.0)) throw NumericalError("pwcca: all projection weights are zero");
    return weighted / total;
}

double similarity(RsmKind kind, const Matrix& x, const Matrix& y) {
    switch (kind) {
        case RsmKind::linear_cka: return linear_cka(x, y);
        case RsmKind::svcca: return svcca(x, y);
        case RsmKind::pwcca: return pwcca(x, y);
    }
    throw InvalidArgument("similarity: unknown measure");
}

}  // namespace stirkit
