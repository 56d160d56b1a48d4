#pragma once

#include "lsm/algebra.hpp"
#include "lsm/spectral.hpp"

namespace lsm {

// scaled complementary error function, e^{x^2} erfc(x); series branch for large x
double erfcx(double x);

struct FilterParams {
  double a = 0;       // Gaussian regularization width
  double T_cut = 0;   // imaginary-time cutoff
  double M = 0;       // real-time integration cutoff (quadrature backend only)
  int s_panels = 0;   // 0: auto-size from M and the spectral diameter
  void validate(bool need_m = false) const;
};

// F(E) = (1/2) int_0^T e^{tE} erfc((E+2at)/(2 sqrt a)) dt.
// Evaluated through erfcx so the e^{tE} factor never overflows.
double filter_weight(const FilterParams& p, double E);

// Direct quadrature of the defining double integral
//   (1/2 pi i) int_0^T e^{-a t^2} int_R e^{-iEs} e^{-a s^2} / (s - it) ds dt.
// Slow; exists to cross-validate filter_weight.
double filter_weight_reference(const FilterParams& p, double E);

// B in the eigenbasis: B_{kl} = -A_{kl} F(E_l-E_k) + conj(A_{lk}) F(E_k-E_l).
// Anti-hermitian by construction; real-linear (not complex-linear) in A.
MatC b_spectral_eigenbasis(const MatC& a_eig, const VecR& evals, const FilterParams& p);

// Hadamard kernel for hermitian A: B = A_eig o kernel, kernel_{kl} = F(E_k-E_l) - F(E_l-E_k)
Eigen::MatrixXd spectral_kernel(const VecR& evals, const FilterParams& p);

// full-space B via the spectral backend
MatC b_spectral(const MatC& a, const SpectralData& sd, const FilterParams& p);

// full-space B via real-time quadrature truncated at |s| <= M; the evolved
// operators are formed from sd, but the t-integral is never done in closed form
MatC b_quadrature(const MatC& a, const SpectralData& sd, const FilterParams& p);

// matvec-only quadrature path: B psi without eigenvectors (Krylov stepping).
// hnorm_est must upper-bound the spectral diameter of h.
VecC b_apply_quadrature(const SpMat& a, const SpMat& h, const VecC& psi,
                        const FilterParams& p, double hnorm_est);

// B(A,H) psi0 = -sum_{k>0} psi_k <psi_k|A|psi_0> / (E_k - E_0).
// Requires the ground-sector block of A to vanish: |<psi_0|A|psi_0>| <= tol ||A psi_0||.
VecC b_exact_on_ground(const MatC& a, const SpectralData& sd, double tol = 1e-10);
VecC b_exact_on_ground(const SpMat& a, const SpectralData& sd, double tol = 1e-10);

// ||B_{a,T}|| <= (||A||/2) sqrt(pi/a)
double shanti_bound(double a, double norm_a);

// || int_0^T (A_a - A_{a,M}) dt || <= (T/2M)(||A||/sqrt(pi a)) e^{-a M^2}
double truncation_bound(const FilterParams& p, double norm_a);

// ||(B_{a,T}-B) P_0|| <= T e^{-gap^2/4a}(nA+nAstar)/2 + e^{-gap T} nA / gap,
// valid for 2 a T <= gap; nA = ||A psi0||, nAstar = ||A* psi0||
double gap_lemma_bound(const FilterParams& p, double gap, double n_a, double n_a_star);

// positive root of a M^2 + c2 M - c3 = 0
double dressing_m(double a, double c2, double c3);

// ||B(A,H0)-B(A,H1)|| <= (2T/M) e^{-aM^2} (||A||/sqrt(pi a) + c1 M^2/pi),
// with M = dressing_m(a, c2, c3) and c1 e^{c2|t|-c3} an envelope of ||[H2, alpha_t^{(1)}(A)]||
double dressing_bound(const FilterParams& p, double norm_a, double c1, double c2, double c3);

}  // namespace lsm
