#include <cmath>
#include <complex>

#include "doctest.h"
#include "lsm/filter.hpp"
#include "lsm/spectral.hpp"
#include "lsm/variational.hpp"

using namespace lsm;

namespace {

constexpr double kTwoPi = 2 * 3.14159265358979323846;

// Independent endpoint: fixed-step RK4 where every stage rebuilds the twisted
// Hamiltonian, rediagonalizes it, and applies the filtered generator densely.
// Slow but has no shared code with the flow's staged evaluation.
VecC reference_endpoint(const Lattice& lat, const Interaction& inter, int steps,
                        const FilterParams& p) {
  Space sp = Space::full(lat.L, inter.spin);
  TwistConfig tw = TwistConfig::make(lat, inter);
  GroundInfo g = ground_and_gap(build_h(sp, inter), "dense");
  VecC psi = g.psi0;
  auto rhs = [&](double th, const VecC& v) -> VecC {
    SpectralData sd = diag_dense(build_h_twisted(sp, inter, lat, tw, th, -th));
    MatC b = b_spectral(MatC(twist_derivative(sp, inter, lat, tw.m, th)), sd, p);
    return b * v;
  };
  const double h = kTwoPi / steps;
  for (int j = 0; j < steps; ++j) {
    double th = j * h;
    VecC k1 = rhs(th, psi);
    VecC k2 = rhs(th + h / 2, psi + (h / 2) * k1);
    VecC k3 = rhs(th + h / 2, psi + (h / 2) * k2);
    VecC k4 = rhs(th + h, psi + h * k3);
    psi += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return psi;
}

}  // namespace

TEST_CASE("flow endpoint against an independent integrator") {
  Lattice lat = Lattice::build(4, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  FlowConfig cfg;
  cfg.theta_steps = 128;
  FlowResult fr = hastings_flow(lat, inter, cfg);
  VecC oracle = reference_endpoint(lat, inter, 128, {fr.a, fr.T_cut, 0.0, 0});
  CHECK((fr.psi1 - oracle).norm() <= 1e-9);
}

TEST_CASE("flow defaults and invariants on the smallest ring") {
  Lattice lat = Lattice::build(4, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  FlowConfig cfg;
  cfg.theta_steps = 128;
  cfg.samples = 8;
  cfg.diagnostics = true;
  FlowResult fr = hastings_flow(lat, inter, cfg);

  CHECK(fr.a == doctest::Approx(fr.gap / 4).epsilon(1e-13));
  CHECK(fr.T_cut == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(fr.m == 1);
  CHECK(fr.dim == 16);
  CHECK(fr.E0 == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(fr.gap == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fr.norm_drift <= 1e-8);
  CHECK(std::abs(fr.psi1.norm() - 1.0) <= 1e-8);
  CHECK(fr.overlap <= fr.majorant + 1e-9);
  CHECK(refined_gap_bound(fr) >= fr.gap - 1e-9);
  CHECK(fr.delta_e > 0);

  REQUIRE(fr.records.size() == 9);
  CHECK(fr.records.front().theta == 0.0);
  CHECK(fr.records.back().theta == doctest::Approx(kTwoPi).epsilon(1e-15));
  CHECK(fr.records.front().window_tdist == doctest::Approx(0.0).epsilon(1e-10));
  for (const ThetaRecord& r : fr.records) {
    CHECK(std::abs(r.norm - 1.0) <= 1e-8);
    CHECK(r.d1_norm <= 1e-8);
    CHECK(r.d_difference <= 1e-8);
    CHECK(r.d_identity_gap <= 1e-8);
    CHECK(std::abs(r.energy_identity_residual) <= 1e-8);
    CHECK(r.a1_expectation <= 1e-7);
    CHECK(r.a2_expectation <= 1e-7);
    CHECK(r.r1 >= -1e-12);
    CHECK(r.r2 >= -1e-12);
    CHECK(r.r3 >= -1e-12);
  }
  // the state starts at the ground state and ends nearly orthogonal
  CHECK(fr.records.front().overlap_gs == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fr.overlap == doctest::Approx(fr.records.back().overlap_gs).epsilon(1e-9));
}

TEST_CASE("sector blocking reproduces the full-space flow") {
  Lattice lat = Lattice::build(6, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  FlowConfig cfg;
  cfg.theta_steps = 128;
  FlowResult full = hastings_flow(lat, inter, cfg);
  cfg.sector_blocking = true;
  FlowResult blocked = hastings_flow(lat, inter, cfg);

  CHECK(!full.blocked);
  CHECK(blocked.blocked);
  CHECK(blocked.dim < full.dim);
  Space sector = flow_space(lat, inter, true);
  CHECK(blocked.dim == sector.dim());
  VecC psi_full = scatter_to_full(sector, blocked.psi1);
  // global phases are fixed independently, so compare up to a phase
  phase_fix(psi_full);
  VecC ref = full.psi1;
  phase_fix(ref);
  CHECK((psi_full - ref).norm() <= 1e-10);
  CHECK(blocked.overlap == doctest::Approx(full.overlap).epsilon(1e-10));
  CHECK(blocked.majorant == doctest::Approx(full.majorant).epsilon(1e-10));
}

TEST_CASE("scatter round trip") {
  Space sector = Space::sz_sector(4, 0.5, 0.0);
  VecC v = VecC::Zero(sector.dim());
  v(0) = cd(0.6, 0.1);
  v(3) = cd(0, -0.7);
  VecC full = scatter_to_full(sector, v);
  CHECK(full.size() == 16);
  CHECK(full.norm() == doctest::Approx(v.norm()).epsilon(1e-15));
  for (int i = 0; i < sector.dim(); ++i)
    CHECK(full(sector.states[i]) == v(i));
}

TEST_CASE("quadrature backend tracks the spectral one") {
  Lattice lat = Lattice::build(4, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  FlowConfig cfg;
  cfg.theta_steps = 128;
  FlowResult spec = hastings_flow(lat, inter, cfg);
  cfg.filter_backend = "quadrature";
  FlowResult quad = hastings_flow(lat, inter, cfg);
  CHECK(quad.backend == "quadrature");
  CHECK((spec.psi1 - quad.psi1).norm() <= 1e-6);
}

TEST_CASE("step halving is converged") {
  Lattice lat = Lattice::build(4, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  FlowConfig cfg;
  cfg.theta_steps = 256;
  VecC coarse = hastings_flow(lat, inter, cfg).psi1;
  cfg.theta_steps = 512;
  VecC fine = hastings_flow(lat, inter, cfg).psi1;
  CHECK((coarse - fine).norm() <= 1e-6);
}

TEST_CASE("inhomogeneous endpoint") {
  Lattice lat = Lattice::build(4, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  FlowConfig cfg;
  cfg.theta_steps = 128;
  FlowResult fr = hastings_flow(lat, inter, cfg);

  double zero_l1 = -1;
  VecC same = inhomogeneous_endpoint(
      lat, inter, cfg, [&](double) { return VecC::Zero(fr.psi1.size()).eval(); },
      &zero_l1);
  CHECK((same - fr.psi1).norm() <= 1e-13);
  CHECK(zero_l1 == doctest::Approx(0.0).epsilon(1e-15));

  VecC dir = VecC::Zero(fr.psi1.size());
  dir(1) = cd(0.01, 0.0);
  double beta_l1 = -1;
  VecC moved = inhomogeneous_endpoint(
      lat, inter, cfg, [&](double th) { return (std::sin(th / 2) * dir).eval(); },
      &beta_l1);
  // ||beta(th)|| integrates to 0.04 over a full period
  CHECK(beta_l1 == doctest::Approx(0.04).epsilon(1e-4));
  CHECK((moved - fr.psi1).norm() <= beta_l1 * (1 + 1e-6) + 1e-12);
}

TEST_CASE("flow rejects bad configurations") {
  Lattice lat = Lattice::build(4, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  FlowConfig cfg;
  cfg.theta_steps = 32;
  CHECK_THROWS_AS(hastings_flow(lat, inter, cfg), std::invalid_argument);
  cfg.theta_steps = 128;
  cfg.filter_backend = "cheby";
  CHECK_THROWS_AS(hastings_flow(lat, inter, cfg), std::invalid_argument);

  // ferromagnets have a degenerate ground multiplet
  FlowConfig ok;
  ok.theta_steps = 128;
  bool threw = false;
  try {
    hastings_flow(lat, heisenberg(lat, 0.5, -1.0), ok);
  } catch (const std::runtime_error& e) {
    threw = true;
    CHECK(std::string(e.what()).find("degenerate ground state") != std::string::npos);
  }
  CHECK(threw);

  // refined bound is undefined when the endpoint stays on the ground state
  FlowResult fake = hastings_flow(lat, inter, ok);
  fake.overlap = 1.0;
  CHECK_THROWS_AS(refined_gap_bound(fake), std::runtime_error);
}

TEST_CASE("m placement override") {
  Lattice lat = Lattice::build(6, 1, Geometry::ring);
  Interaction inter = heisenberg(lat, 0.5, 1.0);
  FlowConfig cfg;
  cfg.theta_steps = 128;
  cfg.m_override = 1;
  FlowResult fr = hastings_flow(lat, inter, cfg);
  CHECK(fr.m == 1);
  // physics must not depend on where the cuts sit
  cfg.m_override = 2;
  FlowResult fr2 = hastings_flow(lat, inter, cfg);
  CHECK(fr2.m == 2);
  CHECK(fr.overlap == doctest::Approx(fr2.overlap).epsilon(1e-9));
  CHECK(fr.delta_e == doctest::Approx(fr2.delta_e).epsilon(1e-9));
}
