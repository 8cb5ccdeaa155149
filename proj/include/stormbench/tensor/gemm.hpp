#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace stormbench::detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// C[m,n] (+)= op(A) * op(B) on row-major buffers, where op(A) is m x k and
/// op(B) is k x n. A transposed operand is stored with swapped extents.
template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
          bool accumulate) {
    using CMap = Eigen::Map<const RowMat<T>>;
    const auto M = static_cast<Eigen::Index>(m);
    const auto N = static_cast<Eigen::Index>(n);
    const auto K = static_cast<Eigen::Index>(k);
    Eigen::Map<RowMat<T>> C(c, M, N);
    CMap A(a, trans_a ? K : M, trans_a ? M : K);
    CMap B(b, trans_b ? N : K, trans_b ? K : N);
    auto apply = [&](const auto& lhs, const auto& rhs) {
        if (accumulate)
            C.noalias() += lhs * rhs;
        else
            C.noalias() = lhs * rhs;
    };
    if (trans_a && trans_b)
        apply(A.transpose(), B.transpose());
    else if (trans_a)
        apply(A.transpose(), B);
    else if (trans_b)
        apply(A, B.transpose());
    else
        apply(A, B);
}

}  // namespace stormbench::detail
