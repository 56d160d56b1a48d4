#pragma once

#include <string>
#include <vector>

#include "lsm/algebra.hpp"
#include "lsm/filter.hpp"
#include "lsm/lattice.hpp"
#include "lsm/model.hpp"
#include "lsm/spectral.hpp"

namespace lsm {

struct LocalOp {
  std::vector<int> sites;
  MatC op;
};

// One inequality checked on a sample grid. margin(i) = rhs[i] - lhs[i];
// passed iff the worst margin is >= -1e-9 * scale with
// scale = max(1, max |lhs|, max |rhs|). An empty grid passes vacuously.
struct BoundReport {
  std::string name;
  std::vector<double> grid;
  std::vector<double> lhs, rhs;
  double worst_margin = 0;
  double scale = 1;
  bool passed = true;

  void finalize();
};

// ||[alpha_t(A), B]|| against the decay-function envelope; the commutator is
// evaluated by dense evolution, the envelope keeps its -1 only for disjoint
// supports.
BoundReport lieb_robinson_check(const Lattice& lat, const Interaction& inter,
                                const LocalOp& a, const LocalOp& b,
                                const DecayFunction& f,
                                const std::vector<double>& tgrid);

struct RestrictionReport {
  // ||alpha^0_t(A) - alpha^1_t(A)|| <= integral over [0,t] of ||[H2, alpha^1_s(A)]||
  BoundReport dynamics;
  // ||B_{a,T}(A,H0) - B_{a,T}(A,H1)|| <= dressed cutoff bound from the envelope
  BoundReport filtered_difference;
  double c1 = 0, c2 = 0, c3 = 0;  // ||[H2, alpha^1_t(A)]|| <= c1 e^{c2|t| - c3}
  double m_star = 0;              // cutoff entering the dressed bound
};

// H0 = window + strip from the model split at (theta, -theta); the inner
// dynamics alpha^1 is generated by the window part alone.
RestrictionReport restriction_dynamics_check(const Lattice& lat, const Interaction& inter,
                                             const TwistConfig& tw, double theta,
                                             const LocalOp& a, const DecayFunction& f,
                                             const FilterParams& p,
                                             const std::vector<double>& tgrid);

struct ClusteringReport {
  BoundReport pointwise;        // |<gs, A alpha_{it}(B) gs>| on the admissible window
  BoundReport single_integral;  // integral over t >= 0 of the correlator
  BoundReport double_integral;  // doubly integrated correlator
  double mu = 0, cab = 0;
  int dist = 0;
  double t_max = 0;  // admissible window edge
  bool window_empty = false;
};

// B is recentered so that its ground-state expectation vanishes; supports of
// a and b must be disjoint.
ClusteringReport clustering_check(const Lattice& lat, const Interaction& inter,
                                  const LocalOp& a, const LocalOp& b,
                                  const DecayFunction& f,
                                  const std::vector<double>& tgrid);

}  // namespace lsm
