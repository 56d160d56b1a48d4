#include "lsm/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace lsm {

static bool effectively_real(const MatC& m) {
  return m.imag().cwiseAbs().maxCoeff() <= 1e-13 * std::max(1.0, m.real().cwiseAbs().maxCoeff());
}

SpectralData diag_dense(const SpMat& h) {
  MatC dense(h);
  SpectralData sd;
  if (dense.rows() > 0 && effectively_real(dense)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense.real());
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
    sd.evals = es.eigenvalues();
    sd.evecs = es.eigenvectors().cast<cd>();
  } else {
    Eigen::SelfAdjointEigenSolver<MatC> es(dense);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
    sd.evals = es.eigenvalues();
    sd.evecs = es.eigenvectors();
  }
  return sd;
}

VecR eigenvalues_only(const SpMat& h) {
  MatC dense(h);
  if (dense.rows() > 0 && effectively_real(dense)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense.real(), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }
  Eigen::SelfAdjointEigenSolver<MatC> es(dense, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double ground_energy(const SpMat& h) { return eigenvalues_only(h)[0]; }

SpectralData lanczos_lowest(const SpMat& h, int want, int max_iter, uint64_t seed, double tol) {
  const int64_t n = h.rows();
  max_iter = static_cast<int>(std::min<int64_t>(max_iter, n));
  want = std::min<int>(want, static_cast<int>(n));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  VecC v(n);
  for (int64_t i = 0; i < n; ++i) v[i] = cd(gauss(rng), gauss(rng));
  v.normalize();

  std::vector<VecC> basis;
  std::vector<double> alpha, beta;
  basis.push_back(v);
  VecC w;
  double prev_low = 1e300;
  int m = 0;
  for (int it = 0; it < max_iter; ++it) {
    w = h * basis[it];
    double a = std::real(basis[it].dot(w));
    alpha.push_back(a);
    w -= a * basis[it];
    if (it > 0) w -= beta[it - 1] * basis[it - 1];
    for (const auto& b : basis) w -= b.dot(w) * b;  // full reorthogonalization
    for (const auto& b : basis) w -= b.dot(w) * b;
    double bnorm = w.norm();
    m = it + 1;
    if (bnorm < 1e-13) break;

    if (m >= std::max(2 * want, 10) && m % 5 == 0) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        t(i, i) = alpha[i];
        if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
      double low = es.eigenvalues()[std::min(want, m) - 1];
      if (std::abs(low - prev_low) < tol * std::max(1.0, std::abs(low))) break;
      prev_low = low;
    }
    beta.push_back(bnorm);
    basis.push_back(w / bnorm);
  }

  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);

  SpectralData sd;
  int keep = std::min(want, m);
  sd.evals.resize(keep);
  sd.evecs.resize(n, keep);
  for (int k = 0; k < keep; ++k) {
    sd.evals[k] = es.eigenvalues()[k];
    VecC rv = VecC::Zero(n);
    for (int i = 0; i < m; ++i) rv += es.eigenvectors()(i, k) * basis[i];
    rv.normalize();
    sd.evecs.col(k) = rv;
  }
  return sd;
}

VecC evolve(const SpectralData& sd, const VecC& psi, double tau, bool imaginary) {
  VecC proj = sd.evecs.adjoint() * psi;
  if (imaginary) {
    // exp(-tau H); shift by E0 only inside, restore after, to avoid overflow
    double e0 = sd.evals[0];
    for (Eigen::Index k = 0; k < proj.size(); ++k)
      proj[k] *= std::exp(-tau * (sd.evals[k] - e0));
    return std::exp(-tau * e0) * (sd.evecs * proj);
  }
  for (Eigen::Index k = 0; k < proj.size(); ++k)
    proj[k] *= std::polar(1.0, -tau * sd.evals[k]);
  return sd.evecs * proj;
}

VecC krylov_evolve(const SpMat& h, const VecC& psi, double tau, bool imaginary, int kdim) {
  double nrm = psi.norm();
  if (nrm == 0 || tau == 0) return psi;
  const int64_t n = h.rows();
  kdim = static_cast<int>(std::min<int64_t>(kdim, n));

  // single Krylov space; callers keep |tau| * |H| moderate
  std::vector<VecC> basis;
  basis.push_back(psi / nrm);
  std::vector<double> alpha, beta;
  int m = 0;
  for (int it = 0; it < kdim; ++it) {
    VecC w = h * basis[it];
    double a = std::real(basis[it].dot(w));
    alpha.push_back(a);
    w -= a * basis[it];
    if (it > 0) w -= beta[it - 1] * basis[it - 1];
    for (const auto& b : basis) w -= b.dot(w) * b;
    double bnorm = w.norm();
    m = it + 1;
    if (bnorm < 1e-14) break;
    if (it + 1 < kdim) {
      beta.push_back(bnorm);
      basis.push_back(w / bnorm);
    }
  }
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(m);
  e1[0] = 1.0;
  Eigen::VectorXd c = es.eigenvectors().transpose() * e1;
  VecC small(m);
  if (imaginary) {
    double e0 = es.eigenvalues().minCoeff();
    for (int i = 0; i < m; ++i)
      small[i] = c[i] * std::exp(-tau * (es.eigenvalues()[i] - e0));
    small *= std::exp(-tau * e0);
  } else {
    for (int i = 0; i < m; ++i)
      small[i] = c[i] * std::polar(1.0, -tau * es.eigenvalues()[i]);
  }
  VecC coeff = es.eigenvectors().cast<cd>() * small;
  VecC out = VecC::Zero(n);
  for (int i = 0; i < m; ++i) out += coeff[i] * basis[i];
  return nrm * out;
}

void phase_fix(VecC& v) {
  Eigen::Index best = 0;
  double mx = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > mx + 1e-14) {
      mx = std::abs(v[i]);
      best = i;
    }
  if (mx == 0) return;
  v *= std::conj(v[best]) / mx;
}

GroundInfo ground_and_gap(const SpMat& h, const std::string& backend, uint64_t seed) {
  GroundInfo g;
  if (backend == "dense") {
    SpectralData sd = diag_dense(h);
    g.E0 = sd.evals[0];
    g.E1 = sd.evals.size() > 1 ? sd.evals[1] : sd.evals[0];
    g.psi0 = sd.evecs.col(0);
  } else if (backend == "krylov") {
    SpectralData sd = lanczos_lowest(h, 2, 400, seed);
    g.E0 = sd.evals[0];
    g.E1 = sd.evals.size() > 1 ? sd.evals[1] : sd.evals[0];
    g.psi0 = sd.evecs.col(0);
  } else {
    throw std::invalid_argument("unknown eigensolver backend: " + backend);
  }
  g.gap = g.E1 - g.E0;
  g.degenerate = g.gap <= 1e-9 * std::max(1.0, std::abs(g.E0));
  phase_fix(g.psi0);
  return g;
}

SectorSpectra diag_all_sectors(const Lattice& lat, const Interaction& inter) {
  const int N = lat.n_sites();
  const double smax = N * inter.spin;
  SectorSpectra out;
  int nsec = static_cast<int>(std::round(2 * smax)) + 1;
  double best = 1e300;
  for (int k = 0; k < nsec; ++k) {
    double sz = smax - k;
    Space sec = Space::sz_sector(N, inter.spin, sz);
    out.sz_values.push_back(sz);
    out.evals.push_back(eigenvalues_only(build_h(sec, inter)));
    if (out.evals.back()[0] < best) {
      best = out.evals.back()[0];
      out.gs_sector = k;
    }
  }
  std::vector<double> merged;
  for (const auto& ev : out.evals)
    for (Eigen::Index i = 0; i < ev.size(); ++i) merged.push_back(ev[i]);
  std::sort(merged.begin(), merged.end());
  out.E0 = merged[0];
  out.E1 = merged.size() > 1 ? merged[1] : merged[0];
  out.degenerate = (out.E1 - out.E0) <= 1e-9 * std::max(1.0, std::abs(out.E0));

  out.gs_space = Space::sz_sector(N, inter.spin, out.sz_values[out.gs_sector]);
  SpectralData sd = diag_dense(build_h(out.gs_space, inter));
  out.psi0 = sd.evecs.col(0);
  phase_fix(out.psi0);
  return out;
}

std::vector<double> energy_surface(const Space& sp, const Interaction& inter,
                                   const Lattice& lat, const TwistConfig& tw,
                                   const std::vector<std::pair<double, double>>& angles) {
  std::vector<double> out;
  out.reserve(angles.size());
  for (const auto& [t1, t2] : angles)
    out.push_back(ground_energy(build_h_twisted(sp, inter, lat, tw, t1, t2)));
  return out;
}

SimpleGapBound simple_gap_bound(const Space& sp, const SpMat& h, const VecC& psi0,
                                double E0, double gap, double one_norm, int site) {
  if (sp.restricted)
    throw std::invalid_argument("simple_gap_bound: needs the full product space");
  MatC rho = partial_trace(sp, psi0, {site});
  MatC u = zero_expectation_unitary(rho);
  VecC excited = embed(sp, {site}, u) * psi0;
  SimpleGapBound b;
  b.gap = gap;
  b.energy_cost = std::real(excited.dot(h * excited)) - E0 * excited.squaredNorm();
  b.twice_one_norm = 2.0 * one_norm;
  return b;
}

}  // namespace lsm
