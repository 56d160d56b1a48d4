#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "lsm/filter.hpp"
#include "lsm/model.hpp"

using namespace lsm;

namespace {

// trapezoid on int_0^T e^{tE} erfc((E+2at)/(2 sqrt a)) dt / 2, refined until stable
double filter_weight_trapezoid(double a, double T, double E) {
  auto f = [&](double t) {
    return 0.5 * std::exp(t * E) * std::erfc((E + 2 * a * t) / (2 * std::sqrt(a)));
  };
  int n = 64;
  double prev = 0, cur = 0;
  for (int pass = 0; pass < 14; ++pass, n *= 2) {
    double h = T / n, s = 0.5 * (f(0) + f(T));
    for (int k = 1; k < n; ++k) s += f(k * h);
    prev = cur;
    cur = s * h;
    if (pass > 3 && std::abs(cur - prev) <= 1e-13 * (1 + std::abs(cur))) break;
  }
  return cur;
}

MatC random_hermitian(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  MatC m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cd(g(rng), g(rng));
  return (m + m.adjoint()).eval() / 2;
}

}  // namespace

TEST_CASE("erfcx matches the direct product and stays smooth") {
  for (double x : {-3.0, -1.0, -0.2, 0.0, 0.5, 2.0, 5.0, 10.0, 25.0})
    CHECK(erfcx(x) ==
          doctest::Approx(std::exp(x * x) * std::erfc(x)).epsilon(1e-12));
  // continuity across the series/branch switch
  for (double x0 : {6.0, 8.0, 12.0, 20.0}) {
    double lo = erfcx(x0 * (1 - 1e-9)), hi = erfcx(x0 * (1 + 1e-9));
    CHECK(std::abs(hi - lo) <= 1e-8 * lo);
  }
  CHECK(erfcx(1e4) == doctest::Approx(1.0 / (1e4 * std::sqrt(M_PI))).epsilon(1e-6));
}

TEST_CASE("filter weight against two independent evaluations") {
  FilterParams p{0.25, 3.0, 0.0, 0};
  for (double E : {-6.0, -2.0, -0.5, 0.0, 0.3, 1.0, 4.0}) {
    double w = filter_weight(p, E);
    CHECK(w == doctest::Approx(filter_weight_trapezoid(p.a, p.T_cut, E))
                   .epsilon(1e-10));
    FilterParams pm = p;
    pm.M = 12.0;
    CHECK(w == doctest::Approx(filter_weight_reference(pm, E)).epsilon(1e-8));
  }
}

TEST_CASE("filter weight envelopes") {
  for (double a : {0.1, 0.3, 1.0}) {
    for (double T : {1.0, 3.0, 10.0}) {
      FilterParams p{a, T, 0.0, 0};
      for (int k = 0; k <= 24; ++k) {
        double E = -10.0 + 20.0 * k / 24;
        double w = filter_weight(p, E);
        CHECK(w >= 0.0);
        if (E >= 0)
          CHECK(w <= 0.5 * T * std::exp(-E * E / (4 * a)) + 1e-15);
        if (E >= 2 * a * T) {
          double lhs = (std::abs(E) < 1e-300 ? T : (1 - std::exp(-E * T)) / E) -
                       filter_weight(p, -E);
          CHECK(lhs <= 0.5 * T * std::exp(-E * E / (4 * a)) + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("spectral transform is anti-hermitian and matches the kernel form") {
  VecR evals(5);
  evals << -2.0, -0.7, -0.1, 0.9, 2.3;
  MatC a_eig = random_hermitian(5, 11);
  FilterParams p{0.3, 2.0, 0.0, 0};
  MatC b = b_spectral_eigenbasis(a_eig, evals, p);
  CHECK((b + b.adjoint()).norm() <= 1e-12 * a_eig.norm());
  Eigen::MatrixXd ker = spectral_kernel(evals, p);
  CHECK((ker + ker.transpose()).norm() <= 1e-14);
  MatC b2 = a_eig.cwiseProduct(ker.cast<cd>());
  CHECK((b - b2).norm() <= 1e-12);
}

TEST_CASE("quadrature backend agrees with the spectral one") {
  Lattice lat = Lattice::build(6, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  Space sp = Space::full(6, 0.5);
  SpMat h = build_h(sp, inter);
  SpectralData sd = diag_dense(h);
  TwistConfig tw = TwistConfig::make(lat, inter);
  SpMat a1 = twist_derivative(sp, inter, lat, tw.m, 0.7);
  MatC a = MatC(a1);

  FilterParams p{0.2, 2.5, 0.0, 0};
  MatC bs = b_spectral(a, sd, p);
  CHECK((bs + bs.adjoint()).norm() <= 1e-10 * op_norm(a));
  CHECK(op_norm(bs) <= shanti_bound(p.a, op_norm(a)) + 1e-9);

  FilterParams pq = p;
  pq.M = 14.0;
  MatC bq = b_quadrature(a, sd, pq);
  CHECK((bs - bq).norm() <= 1e-6 * std::max(1.0, op_norm(a)));

  // panel doubling is converged
  FilterParams p2 = pq;
  p2.s_panels = 256;
  FilterParams p3 = pq;
  p3.s_panels = 512;
  CHECK((b_quadrature(a, sd, p2) - b_quadrature(a, sd, p3)).norm() <= 1e-7);

  // matvec-only path
  VecC psi = VecC::Zero(sp.dim());
  psi(2) = cd(0.8, 0);
  psi(9) = cd(0, 0.6);
  VecC via_mat = bq * psi;
  VecC via_apply = b_apply_quadrature(a1, h, psi, pq, 2.0 * 6 * 0.75);
  CHECK((via_mat - via_apply).norm() <= 1e-6);
}

TEST_CASE("exact ground-row solve matches a pseudoinverse oracle") {
  Lattice lat = Lattice::build(6, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  Space sp = Space::full(6, 0.5);
  TwistConfig tw = TwistConfig::make(lat, inter);
  // the ground expectation of the cut derivative vanishes only along the
  // equal-and-opposite twist line, so pair A with the matching Hamiltonian
  const double th = 1.1;
  SpMat h = build_h_twisted(sp, inter, lat, tw, th, -th);
  SpectralData sd = diag_dense(h);
  SpMat a1 = twist_derivative(sp, inter, lat, tw.m, th);

  VecC v = b_exact_on_ground(a1, sd);
  // oracle: minimum-norm solution of (H - E0) x = -(1 - P0) A psi0
  const int d = sp.dim();
  VecC psi0 = sd.evecs.col(0);
  MatC hd = MatC(h) - sd.evals(0) * MatC::Identity(d, d);
  VecC rhs = MatC(a1) * psi0;
  rhs -= psi0 * psi0.dot(rhs);
  Eigen::CompleteOrthogonalDecomposition<MatC> cod(hd);
  VecC x = cod.solve(-rhs);
  x -= psi0 * psi0.dot(x);
  CHECK((v - x).norm() <= 1e-9);
  // the ground matrix element must vanish for the solve to be admissible
  CHECK(std::abs(psi0.dot(MatC(a1) * psi0)) <= 1e-10 * rhs.norm() + 1e-12);
}

TEST_CASE("closed-form bounds") {
  CHECK(shanti_bound(0.25, 2.0) ==
        doctest::Approx(0.5 * 2.0 * std::sqrt(M_PI / 0.25)).epsilon(1e-14));

  FilterParams p{0.3, 2.0, 5.0, 0};
  double tb = truncation_bound(p, 1.7);
  CHECK(tb == doctest::Approx((2.0 / (2 * 5.0)) * (1.7 / std::sqrt(M_PI * 0.3)) *
                              std::exp(-0.3 * 25.0))
                  .epsilon(1e-13));

  double gap = 0.8, na = 1.3, nas = 0.9;
  FilterParams ok{0.1, 3.0, 0.0, 0};  // 2aT = 0.6 <= gap
  double gl = gap_lemma_bound(ok, gap, na, nas);
  CHECK(gl == doctest::Approx(3.0 * std::exp(-gap * gap / 0.4) * (na + nas) / 2 +
                              std::exp(-gap * 3.0) * na / gap)
                  .epsilon(1e-13));
  FilterParams bad{1.0, 3.0, 0.0, 0};  // 2aT = 6 > gap
  CHECK_THROWS_AS(gap_lemma_bound(bad, gap, na, nas), std::invalid_argument);

  double a = 0.4, c2 = 1.1, c3 = 2.7;
  double m = dressing_m(a, c2, c3);
  CHECK(m > 0);
  CHECK(a * m * m + c2 * m - c3 == doctest::Approx(0.0).epsilon(1e-12));

  FilterParams dp{0.4, 1.5, 0.0, 0};
  double c1 = 0.8;
  double db = dressing_bound(dp, 2.0, c1, c2, c3);
  CHECK(db == doctest::Approx((2 * 1.5 / m) * std::exp(-a * m * m) *
                              (2.0 / std::sqrt(M_PI * a) + c1 * m * m / M_PI))
                  .epsilon(1e-12));

  FilterParams unval{-1.0, 2.0, 0.0, 0};
  CHECK_THROWS_AS(unval.validate(), std::invalid_argument);
  FilterParams nom{0.3, 2.0, 0.0, 0};
  CHECK_NOTHROW(nom.validate());
  CHECK_THROWS_AS(nom.validate(true), std::invalid_argument);
}
