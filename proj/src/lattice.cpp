#include "spv/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace spv {

mpz_class dot_rows(const std::vector<mpz_class>& a, const std::vector<mpz_class>& b) {
    mpz_class s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

LatticeBasis::LatticeBasis(std::vector<std::vector<mpz_class>> rows) : rows_(std::move(rows)) {
    if (rows_.empty()) throw std::invalid_argument("lattice: empty basis");
    const size_t dim = rows_[0].size();
    for (const auto& r : rows_)
        if (r.size() != dim) throw std::invalid_argument("lattice: ragged rows");
    if (rows_.size() > dim)
        throw std::invalid_argument("lattice: more rows than the ambient dimension");
    rebuild_gs_cache();
}

void LatticeBasis::rebuild_gs_cache() {
    const int b = count();
    lambda_.assign(b, {});
    dd_.assign(b, mpz_class(0));
    for (int i = 0; i < b; ++i) lambda_[i].assign(i, mpz_class(0));
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j <= i; ++j) {
            mpz_class u = dot_rows(rows_[i], rows_[j]);
            for (int l = 0; l < j; ++l) {
                const mpz_class prev = l == 0 ? mpz_class(1) : dd_[l - 1];
                u = (dd_[l] * u - lambda_[i][l] * lambda_[j][l]) / prev;
            }
            if (j < i)
                lambda_[i][j] = u;
            else
                dd_[i] = u;
        }
        if (dd_[i] <= 0) throw std::runtime_error("lattice: rows are linearly dependent");
    }
}

mpq_class LatticeBasis::mu(int i, int j) const {
    mpq_class q(lambda_[i][j], dd_[j]);
    q.canonicalize();
    return q;
}

bool LatticeBasis::is_size_reduced() const {
    for (int i = 1; i < count(); ++i)
        for (int j = 0; j < i; ++j)
            if (2 * abs(lambda_[i][j]) > dd_[j]) return false;
    return true;
}

bool LatticeBasis::lovasz_holds(long delta_num, long delta_den) const {
    for (int k = 1; k < count(); ++k) {
        const mpz_class dkm2 = k >= 2 ? dd_[k - 2] : mpz_class(1);
        // D_k D_{k-2} >= delta D_{k-1}^2 - lambda_{k,k-1}^2
        const mpz_class lhs = delta_den * dd_[k] * dkm2 + delta_den * lambda_[k][k - 1] * lambda_[k][k - 1];
        const mpz_class rhs = delta_num * dd_[k - 1] * dd_[k - 1];
        if (lhs < rhs) return false;
    }
    return true;
}

void LatticeBasis::size_reduce_step(int k, int l) {
    // |mu_{k,l}| <= 1/2 after: subtract q = round(lambda/dd_l) times row l.
    if (2 * abs(lambda_[k][l]) <= dd_[l]) return;
    mpz_class q, rem;
    // round to nearest: q = floor((2 lambda + dd) / (2 dd))
    mpz_class num = 2 * lambda_[k][l] + dd_[l];
    mpz_class den = 2 * dd_[l];
    mpz_fdiv_q(q.get_mpz_t(), num.get_mpz_t(), den.get_mpz_t());
    if (q == 0) return;
    for (int c = 0; c < dimension(); ++c) rows_[k][c] -= q * rows_[l][c];
    for (int j = 0; j < l; ++j) lambda_[k][j] -= q * lambda_[l][j];
    lambda_[k][l] -= q * dd_[l];
}

void LatticeBasis::swap_step(int k) {
    std::swap(rows_[k], rows_[k - 1]);
    for (int j = 0; j < k - 1; ++j) std::swap(lambda_[k][j], lambda_[k - 1][j]);
    const mpz_class lam = lambda_[k][k - 1];
    const mpz_class dkm2 = k >= 2 ? dd_[k - 2] : mpz_class(1);
    const mpz_class bnew = (dkm2 * dd_[k] + lam * lam) / dd_[k - 1];
    for (int i = k + 1; i < count(); ++i) {
        const mpz_class t = lambda_[i][k];
        lambda_[i][k] = (dd_[k] * lambda_[i][k - 1] - lam * t) / dd_[k - 1];
        lambda_[i][k - 1] = (bnew * t + lam * lambda_[i][k]) / dd_[k];
    }
    dd_[k - 1] = bnew;
}

void LatticeBasis::lll_reduce(double lovasz_delta) {
    if (!(lovasz_delta > 0.25) || !(lovasz_delta < 1.0))
        throw std::invalid_argument("lll: delta must be in (1/4, 1)");
    const long den = 1L << 20;
    const long num = static_cast<long>(std::llround(lovasz_delta * den));
    int k = 1;
    while (k < count()) {
        size_reduce_step(k, k - 1);
        const mpz_class dkm2 = k >= 2 ? dd_[k - 2] : mpz_class(1);
        const mpz_class lhs = den * dd_[k] * dkm2 + den * lambda_[k][k - 1] * lambda_[k][k - 1];
        const mpz_class rhs = num * dd_[k - 1] * dd_[k - 1];
        if (lhs < rhs) {
            swap_step(k);
            k = std::max(k - 1, 1);
        } else {
            for (int l = k - 2; l >= 0; --l) size_reduce_step(k, l);
            ++k;
        }
    }
}

LatticeBasis lll_reduce(const LatticeBasis& basis, double lovasz_delta) {
    LatticeBasis out = basis;
    out.lll_reduce(lovasz_delta);
    return out;
}

}  // namespace spv
