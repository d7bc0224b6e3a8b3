#pragma once

// Symmetric tridiagonal eigenpairs by bisection with guaranteed index
// selection (LAPACK dstevr, RANGE='I').

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

namespace magsplit {

struct TridiagEigs {
  std::vector<double> values;  // ascending, indices il..iu (1-based in LAPACK terms)
  Eigen::MatrixXd vectors;     // one column per eigenvalue; empty if not requested
};

// diag has size n, off has size n-1. Eigenvalue indices are 1-based and
// inclusive: il=iu=1 selects the lowest eigenvalue.
inline TridiagEigs tridiag_eigs(std::vector<double> diag, std::vector<double> off,
                                int il, int iu, bool want_vectors) {
  const int n = static_cast<int>(diag.size());
  if (n < 2 || off.size() + 1 != diag.size())
    throw std::invalid_argument("tridiag_eigs: inconsistent sizes");
  if (il < 1 || iu < il || iu > n)
    throw std::invalid_argument("tridiag_eigs: bad index range");
  const int m_req = iu - il + 1;
  std::vector<double> w(n);
  Eigen::MatrixXd z;
  std::vector<lapack_int> isuppz(2 * std::max(1, m_req));
  lapack_int m = 0;
  lapack_int info;
  if (want_vectors) {
    z.resize(n, m_req);
    info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', n, diag.data(), off.data(),
                          0.0, 0.0, il, iu, 0.0, &m, w.data(), z.data(), n,
                          isuppz.data());
  } else {
    info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'N', 'I', n, diag.data(), off.data(),
                          0.0, 0.0, il, iu, 0.0, &m, w.data(), nullptr, n,
                          isuppz.data());
  }
  if (info != 0)
    throw std::runtime_error("tridiag_eigs: dstevr failed, info=" + std::to_string(info));
  if (m != m_req)
    throw std::runtime_error("tridiag_eigs: dstevr returned wrong count");
  TridiagEigs out;
  out.values.assign(w.begin(), w.begin() + m);
  if (want_vectors) out.vectors = std::move(z);
  return out;
}

}  // namespace magsplit
