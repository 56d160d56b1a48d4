#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lsm/algebra.hpp"
#include "lsm/lattice.hpp"

namespace lsm {

// One interaction term: a matrix acting on the listed sites. `wraps` marks
// terms crossing the seam between columns L and 1; those belong to the
// periodic completion only and are never twisted.
struct Term {
  std::vector<int> sites;
  MatC op;
  bool wraps = false;
};

struct Interaction {
  double spin = 0.5;
  std::vector<Term> open_terms;
  std::vector<Term> wrap_terms;
  int range = 1;  // max 1-direction width over open terms

  std::vector<const Term*> all_terms() const;
};

// two-site exchange matrices on C^q ⊗ C^q
MatC exchange_matrix(double s, double J, double delta);  // J(SxSx+SySy+delta SzSz)

Interaction heisenberg(const Lattice& lat, double s, double J);
Interaction xxz(const Lattice& lat, double s, double J, double delta);
// alternating bond strengths along the 1-direction: J1 on odd columns,
// J2 on even ones; rungs (if any) get J1
Interaction dimerized(const Lattice& lat, double s, double J1, double J2);
// arbitrary per-edge couplings, keyed by (min site, max site)
Interaction coupled(const Lattice& lat, double s,
                    const std::map<std::pair<int, int>, double>& J, double delta);

// twist bookkeeping for the double cut at columns m and m+L/2
struct TwistConfig {
  int m = 1;
  static TwistConfig make(const Lattice& lat, const Interaction& inter,
                          std::optional<int> m_override = std::nullopt);
  int partner(const Lattice& lat) const { return m + lat.L / 2; }
};

SpMat build_h(const Space& sp, const Interaction& inter);       // periodic
SpMat build_h_open(const Space& sp, const Interaction& inter);  // seam removed

// H_{theta1,theta2}: periodic H plus the two twist corrections at the cuts
// (m, m+1) and (m+L/2, m+L/2+1); only open terms straddling a cut change.
SpMat build_h_twisted(const Space& sp, const Interaction& inter, const Lattice& lat,
                      const TwistConfig& tw, double theta1, double theta2);

// window radius used for the window/strip split; degenerate geometries are
// widened to radius 1
int window_radius(const Lattice& lat, const Interaction& inter);
std::vector<int> window_sites(const Lattice& lat, int center_col, int radius);

struct SplitH {
  SpMat window;  // twisted terms, supported inside the two windows
  SpMat strip;   // untwisted terms meeting the strip complement
  std::vector<int> window_cols;
};
SplitH window_strip_split(const Space& sp, const Interaction& inter, const Lattice& lat,
                          const TwistConfig& tw, double theta1, double theta2);

// terms supported inside the single window about `cut`, with the ones
// straddling the cut twisted by theta; the rest H - window_hamiltonian(..., 0)
// is theta-independent, so H_{theta,0} = H + Hw(theta) - Hw(0)
SpMat window_hamiltonian(const Space& sp, const Interaction& inter, const Lattice& lat,
                         int cut, double theta);

// d/dtheta of the single-cut twist correction at angle theta, for the cut
// between columns `cut` and `cut`+1
SpMat twist_derivative(const Space& sp, const Interaction& inter, const Lattice& lat,
                       int cut, double theta);
std::vector<int> cut_support(const Interaction& inter, const Lattice& lat, int cut);

// diagonal phase weights: sum of S^3 over sites with col > cut  (the half
// rotation), over one column, and over the block cut < col <= cut + L/2
VecR half_rotation_weights(const Space& sp, const Lattice& lat, int cut);
VecR column_weights(const Space& sp, const Lattice& lat, int col);
VecR block_weights(const Space& sp, const Lattice& lat, int cut);  // for W

// T_{theta1,theta2} = diag * T with phases on columns m and m+L/2
SpMat twisted_translation(const Space& sp, const Lattice& lat, const TwistConfig& tw,
                          double theta1, double theta2, const SpMat& plain_t);

struct InteractionNorms {
  double one_norm = 0;     // sup_x sum_{X∋x} |Phi(X)|
  double two_norm = 0;     // sup_x sum_{X∋x} |X| sum_{x'} |[S3_{x'},Phi(X)]|
  double lambda_norm = 0;  // sup_{x,y} sum_{X∋x,y} |Phi(X)| / F_lambda(d(x,y))
};
InteractionNorms interaction_norms(const Lattice& lat, const Interaction& inter,
                                   const DecayFunction& f);

struct LsmStaticReport {
  bool translation_covariant = false;
  int range = 0;
  bool rotation_invariant = false;
  bool odd_parity = false;
  bool real_matrices = false;
  bool ok() const {
    return translation_covariant && rotation_invariant && odd_parity && real_matrices;
  }
};
LsmStaticReport lsm_static_checks(const Lattice& lat, const Interaction& inter, double tol = 1e-12);

}  // namespace lsm
