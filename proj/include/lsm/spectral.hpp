#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsm/algebra.hpp"
#include "lsm/model.hpp"

namespace lsm {

struct SpectralData {
  VecR evals;  // ascending
  MatC evecs;  // matching columns, orthonormal
};

SpectralData diag_dense(const SpMat& h);
VecR eigenvalues_only(const SpMat& h);
double ground_energy(const SpMat& h);

// Lanczos with full reorthogonalization; returns the lowest `want` Ritz pairs.
SpectralData lanczos_lowest(const SpMat& h, int want, int max_iter, uint64_t seed,
                            double tol = 1e-12);

// exp(-i tau H) psi, or exp(-tau H) psi when imaginary = true
VecC evolve(const SpectralData& sd, const VecC& psi, double tau, bool imaginary = false);
VecC krylov_evolve(const SpMat& h, const VecC& psi, double tau, bool imaginary = false,
                   int krylov_dim = 48);

// global phase fixed so the largest-magnitude entry is real positive
void phase_fix(VecC& v);

struct GroundInfo {
  double E0 = 0, E1 = 0, gap = 0;
  bool degenerate = false;
  VecC psi0;
};
// backend: "dense" or "krylov"
GroundInfo ground_and_gap(const SpMat& h, const std::string& backend = "dense",
                          uint64_t seed = 1);

// all total-S^3 sectors of the periodic Hamiltonian, lowest two merged
struct SectorSpectra {
  std::vector<double> sz_values;
  std::vector<VecR> evals;
  int gs_sector = -1;
  double E0 = 0, E1 = 0;
  bool degenerate = false;
  VecC psi0;      // coordinates of the ground-state sector space
  Space gs_space; // that sector
};
SectorSpectra diag_all_sectors(const Lattice& lat, const Interaction& inter);

// E0 over a list of twist angle pairs
std::vector<double> energy_surface(const Space& sp, const Interaction& inter,
                                   const Lattice& lat, const TwistConfig& tw,
                                   const std::vector<std::pair<double, double>>& angles);

// energy of the one-site zero-expectation excitation: gap <= cost <= 2 |||Phi|||_1
struct SimpleGapBound {
  double gap = 0;
  double energy_cost = 0;
  double twice_one_norm = 0;
};
SimpleGapBound simple_gap_bound(const Space& sp, const SpMat& h, const VecC& psi0,
                                double E0, double gap, double one_norm, int site = 0);

}  // namespace lsm
