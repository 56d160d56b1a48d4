#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "lsm/lattice.hpp"

namespace lsm {

using cd = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<cd>;

// spin-s matrices on C^{2s+1}; basis ordered by decreasing S^3 value,
// so sz = diag(s, s-1, ..., -s)
struct SpinOps {
  double s = 0.5;
  int q = 2;
  MatC sp, sm, sx, sy, sz;
  static SpinOps make(double s);
};

bool is_half_integer(double s);

// Product basis of nsites spins, site 0 carrying the most significant base-q
// digit. Optionally restricted to a total-S^3 sector; `states` then lists the
// member codes in increasing order.
struct Space {
  int nsites = 0;
  int q = 2;
  double s = 0.5;
  bool restricted = false;
  double sz_value = 0;
  std::vector<int64_t> states;

  static Space full(int nsites, double s);
  static Space sz_sector(int nsites, double s, double sz);

  int64_t dim() const;
  int64_t code_of(int64_t idx) const { return restricted ? states[idx] : idx; }
  int64_t index_of(int64_t code) const;  // -1 if not in the space

  int digit(int64_t code, int site) const;
  double mval(int digit) const { return s - digit; }
  double sz_of_code(int64_t code) const;

  // per-state weights sum_{x in sites} m(x); the diagonal of sum_x S^3_x
  VecR sz_weights(const std::vector<int>& sites) const;
};

// local operator on the listed sites (matrix dim q^{sites.size()}),
// site order in `sites` fixes the tensor factor order
SpMat embed(const Space& sp, const std::vector<int>& sites, const MatC& local);

// permutation T with T^* S^3_{(n,v)} T = S^3_{(n+1,v)} (columns periodic)
SpMat translation_op(const Space& sp, const Lattice& lat);

// apply a diagonal phase exp(i*theta*w) elementwise
VecC phase_diag(const VecR& w, double theta);

// density matrix of psi on the listed sites (complement traced out)
MatC partial_trace(const Space& sp, const VecC& psi, const std::vector<int>& keep);

double trace_norm(const MatC& a);          // sum of singular values
double op_norm(const MatC& a);             // largest singular value
double op_norm(const SpMat& a);

// Unitary U with Tr(rho U) = 0 for a density matrix rho of dimension >= 2.
// Built in the eigenbasis of rho from pair swaps; odd dimensions use a 2x2
// rotation block plus a phase chosen so the first three eigenvalues cancel.
MatC zero_expectation_unitary(const MatC& rho, double tol = 1e-10);

MatC commutator(const MatC& a, const MatC& b);

}  // namespace lsm
