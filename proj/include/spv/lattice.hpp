#pragma once

#include <gmpxx.h>

#include <vector>

namespace spv {

// Integer lattice basis with the exact Gram-Schmidt cache kept in de Weger
// integral form: mu_{i,j} = lambda_{i,j}/Dd_j and ||b*_i||^2 = Dd_i/Dd_{i-1},
// all mpz, so reduction never touches floating point.
class LatticeBasis {
public:
    // rows: b linearly independent integer vectors of dimension >= b.
    explicit LatticeBasis(std::vector<std::vector<mpz_class>> rows);

    int count() const { return static_cast<int>(rows_.size()); }
    int dimension() const { return rows_.empty() ? 0 : static_cast<int>(rows_[0].size()); }
    const std::vector<mpz_class>& row(int i) const { return rows_[i]; }
    const std::vector<std::vector<mpz_class>>& rows() const { return rows_; }

    // mu_{i,j} as an exact rational (i > j).
    mpq_class mu(int i, int j) const;

    bool is_size_reduced() const;
    bool lovasz_holds(long delta_num, long delta_den) const;

    // In-place LLL; 1/4 < delta < 1. Throws std::invalid_argument for a bad
    // delta and std::runtime_error for dependent rows.
    void lll_reduce(double lovasz_delta);

private:
    void rebuild_gs_cache();
    void size_reduce_step(int k, int l);
    void swap_step(int k);

    std::vector<std::vector<mpz_class>> rows_;
    std::vector<std::vector<mpz_class>> lambda_;  // lambda_[i][j], j < i
    std::vector<mpz_class> dd_;                   // dd_[i] = D_i, with D_{-1} = 1 implicit
};

// Convenience: reduce a copy.
LatticeBasis lll_reduce(const LatticeBasis& basis, double lovasz_delta);

mpz_class dot_rows(const std::vector<mpz_class>& a, const std::vector<mpz_class>& b);

}  // namespace spv
