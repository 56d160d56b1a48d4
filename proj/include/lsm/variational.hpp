#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lsm/algebra.hpp"
#include "lsm/filter.hpp"
#include "lsm/lattice.hpp"
#include "lsm/model.hpp"
#include "lsm/spectral.hpp"

namespace lsm {

struct FlowConfig {
  int theta_steps = 512;  // fixed-step RK4 grid on [0, 2pi]; must be >= 64
  bool renormalize = false;
  std::string filter_backend = "spectral";  // "spectral" or "quadrature"
  std::optional<int> m_override;
  // filter parameters; non-positive entries pick the defaults a = gap/L,
  // T = L/2, and (quadrature only) M = sqrt(40/a)
  double a = -1, T_cut = -1, M = -1;
  int s_panels = 0;
  bool sector_blocking = false;  // integrate inside the ground-state S^3 sector
  int samples = 16;              // number of recorded theta intervals
  bool diagnostics = false;      // extended per-record diagnostics (costly)
};

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct ThetaRecord {
  double theta = 0;
  double norm = 0;
  double energy = 0;              // <psi, H psi>, untwisted H
  double energy_twisted = 0;      // <psi, H_{theta,-theta} psi>
  double overlap_gs = 0;          // |<psi0, psi>|
  double overlap_rotated = 0;     // |<W(theta) psi0, psi>|
  double translation_defect = 0;  // ||T_{theta,0} psi - psi||
  double window_tdist = 0;        // ||Tr over the window complement of rho_psi - rho_0'||_1
  double d1_norm = 0;             // ||D_1(theta) psi_0'||

  // extended diagnostics, NaN unless FlowConfig::diagnostics
  double d2_norm = kUnset;         // ||D_2(theta) psi_0'||
  double d_difference = kUnset;    // ||(D_1 - D_2) psi_0'||, zero in exact arithmetic
  double d_identity_gap = kUnset;  // | ||D_1 psi_0'||^2 - <D_1 psi_0', D_2 psi_0'> |
  double dat_norm = kUnset;        // ||D_{a,T}(theta) psi||
  double cat_norm = kUnset;        // ||C_{a,T}(theta) psi||
  double dat_integral = kUnset;    // running integral of dat_norm up to theta
  double r1 = kUnset, r2 = kUnset, r3 = kUnset;  // remainder trace norms
  double r_integral = kUnset;                    // running integral of r1+r2+r3
  double energy_r1 = kUnset, energy_r2 = kUnset;
  double energy_identity_residual = kUnset;  // (<psi,H_{theta,0}psi> - E0) - R1 - R2
  double a1_expectation = kUnset;  // |<A_1(theta)>_theta|, zero by gauge invariance
  double a2_expectation = kUnset;
};

struct FlowResult {
  double a = 0, T_cut = 0;
  int m = 0, steps = 0;
  std::string backend;
  bool blocked = false;
  int64_t dim = 0;
  double E0 = 0, E1 = 0, gap = 0;  // of the untwisted H, over all sectors
  double energy1 = 0;              // Rayleigh quotient of psi1
  double delta_e = 0;              // energy1 - E0
  double overlap = 0;              // |<psi0, psi1>| / ||psi1||
  double majorant = 0;             // (1/2) ||(T_{2pi,0} - I) psi1|| / ||psi1||
  double norm_drift = 0;           // max |(norm before renormalizing) - 1|
  double refined_bound = kUnset;   // delta_e / (1 - overlap^2) when overlap < 1 - 1e-6
  VecC psi1;                       // flow endpoint, unnormalized, in flow-space coordinates
  std::vector<ThetaRecord> records;
};

// Integrates d/dtheta psi = B_{a,T}(theta) psi from psi(0) = psi0 to 2pi,
// where B_{a,T}(theta) is the filtered generator built from A_1(theta) and
// the dynamics of H_{theta,-theta}. Throws on a degenerate ground state and
// when the norm drift exceeds 1e-6.
FlowResult hastings_flow(const Lattice& lat, const Interaction& inter,
                         const FlowConfig& cfg = {});

// delta_e / (1 - overlap^2): an upper bound on the spectral gap by the
// variational principle. Throws when the overlap is within 1e-6 of 1.
double refined_gap_bound(const FlowResult& fr);

// Endpoint of the inhomogeneous equation d/dtheta Y = B_{a,T}(theta) Y + beta(theta)
// from Y(0) = psi0, on the same grid as hastings_flow. If beta_l1 is non-null
// it receives the integral of ||beta|| over [0, 2pi]. Supports the
// norm-preservation contract: ||Y(2pi) - psi1|| <= integral of ||beta||.
VecC inhomogeneous_endpoint(const Lattice& lat, const Interaction& inter,
                            const FlowConfig& cfg,
                            const std::function<VecC(double)>& beta,
                            double* beta_l1 = nullptr);

// the space hastings_flow integrates in (full, or the ground-state sector)
Space flow_space(const Lattice& lat, const Interaction& inter, bool sector_blocking);

// coordinates of a restricted-space vector in the full product basis
VecC scatter_to_full(const Space& sp, const VecC& v);

}  // namespace lsm
