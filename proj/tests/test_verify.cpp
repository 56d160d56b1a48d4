#include <cmath>
#include <complex>

#include "doctest.h"
#include "lsm/verify.hpp"

using namespace lsm;

namespace {

LocalOp site_op(int site, const MatC& m) { return LocalOp{{site}, m}; }

}  // namespace

TEST_CASE("bound report finalize") {
  BoundReport r;
  r.name = "demo";
  r.grid = {0.0, 1.0, 2.0};
  r.lhs = {0.5, 1.0, 3.0};
  r.rhs = {1.0, 1.5, 3.5};
  r.finalize();
  CHECK(r.worst_margin == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.scale == doctest::Approx(3.5).epsilon(1e-15));
  CHECK(r.passed);

  BoundReport v;
  v.name = "small violation";
  v.grid = {0.0};
  v.lhs = {1.0 + 1e-6};
  v.rhs = {1.0};
  v.finalize();
  CHECK(!v.passed);
  CHECK(v.worst_margin == doctest::Approx(-1e-6).epsilon(1e-6));

  // roundoff-level violations pass relative to the scale of the bound
  BoundReport tiny;
  tiny.grid = {0.0};
  tiny.lhs = {100.0 + 1e-8};
  tiny.rhs = {100.0};
  tiny.finalize();
  CHECK(tiny.passed);

  BoundReport empty;
  empty.finalize();
  CHECK(empty.passed);
  CHECK(empty.scale == 1.0);
}

TEST_CASE("commutator growth stays under the decay envelope") {
  Lattice lat = Lattice::build(6, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  DecayFunction f{2.0, 0.5};
  SpinOps so = SpinOps::make(0.5);
  std::vector<double> tgrid = {0.0, 0.3, 0.6, 0.9, 1.2};

  BoundReport far = lieb_robinson_check(lat, inter, site_op(0, so.sx),
                                        site_op(3, so.sx), f, tgrid);
  CHECK(far.passed);
  REQUIRE(far.grid.size() == tgrid.size());
  // the commutator really is zero at t = 0 for disjoint supports
  CHECK(far.lhs[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(far.lhs[3] > 1e-6);  // and really grows
  // disjoint supports keep the -1 in the envelope; at t = 0 that makes rhs 0
  CHECK(far.rhs[0] == doctest::Approx(0.0).epsilon(1e-12));

  BoundReport touching = lieb_robinson_check(lat, inter, site_op(2, so.sx),
                                             site_op(2, so.sz), f, tgrid);
  CHECK(touching.passed);
  // overlapping supports drop the -1: the envelope starts positive
  CHECK(touching.rhs[0] > 0.0);
  CHECK(touching.lhs[0] > 0.1);  // [sx, sz] != 0 on the shared site
}

TEST_CASE("restricted dynamics and the dressed filter difference") {
  Lattice lat = Lattice::build(8, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  TwistConfig tw = TwistConfig::make(lat, inter);
  DecayFunction f{2.0, 1.0};
  SpinOps so = SpinOps::make(0.5);
  // A lives inside the window about the first cut
  LocalOp a = site_op(tw.m - 1, so.sx);
  FilterParams p{0.15, 2.0, 0.0, 0};
  std::vector<double> tgrid = {0.0, 0.4, 0.8};
  RestrictionReport rr =
      restriction_dynamics_check(lat, inter, tw, 1.0, a, f, p, tgrid);

  CHECK(rr.dynamics.passed);
  REQUIRE(rr.dynamics.grid.size() == tgrid.size());
  CHECK(rr.dynamics.lhs[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rr.dynamics.lhs[2] > 1e-8);  // the strip really bends the dynamics
  for (double v : rr.dynamics.rhs) CHECK(v >= 0.0);

  CHECK(rr.c1 > 0);
  CHECK(rr.c2 > 0);
  CHECK(rr.m_star > 0);
  CHECK(rr.filtered_difference.passed);
  REQUIRE(rr.filtered_difference.lhs.size() == 1);
  // the dressed bound must also hold numerically
  CHECK(rr.filtered_difference.lhs[0] <= rr.filtered_difference.rhs[0] + 1e-12);
}

TEST_CASE("ground-state clustering inside the admissible window") {
  Lattice lat = Lattice::build(6, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  DecayFunction f{2.0, 1.0};
  SpinOps so = SpinOps::make(0.5);
  LocalOp a = site_op(0, so.sz);
  // shift B so its raw ground expectation is nonzero; the check recenters it
  LocalOp b = site_op(3, (so.sz + 0.3 * MatC::Identity(2, 2)).eval());

  ClusteringReport probe = clustering_check(lat, inter, a, b, f, {0.0});
  CHECK(probe.t_max > 0);
  CHECK(probe.mu > 0);
  CHECK(probe.cab > 0);
  CHECK(probe.dist == 3);

  int n = 7;
  std::vector<double> tgrid(n);
  for (int k = 0; k < n; ++k) tgrid[k] = 0.9 * probe.t_max * k / (n - 1);
  ClusteringReport cr = clustering_check(lat, inter, a, b, f, tgrid);
  CHECK(!cr.window_empty);
  CHECK(cr.pointwise.passed);
  CHECK(cr.single_integral.passed);
  CHECK(cr.double_integral.passed);
  REQUIRE(cr.pointwise.grid.size() == tgrid.size());
  // recentering: the t = 0 correlator is the truncated one
  GroundInfo g = ground_and_gap(build_h(Space::full(6, 0.5), inter), "dense");
  Space sp = Space::full(6, 0.5);
  MatC am = MatC(embed(sp, a.sites, a.op));
  MatC bm = MatC(embed(sp, b.sites, b.op));
  cd ea = g.psi0.dot(am * g.psi0), eb = g.psi0.dot(bm * g.psi0);
  cd tr = g.psi0.dot(am * (bm * g.psi0)) - ea * eb;
  CHECK(cr.pointwise.lhs[0] == doctest::Approx(std::abs(tr)).epsilon(1e-10));

  // grid points beyond the admissible window are dropped, not checked
  ClusteringReport off = clustering_check(lat, inter, a, b, f,
                                          {10 * probe.t_max, 20 * probe.t_max});
  CHECK(off.window_empty);
  CHECK(off.pointwise.passed);
  CHECK(off.pointwise.grid.empty());

  CHECK_THROWS_AS(clustering_check(lat, inter, a, site_op(0, so.sx), f, {0.0}),
                  std::invalid_argument);
}
