#include "lsm/variational.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace lsm {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Tr over the complement of `keep` of |u><v|, as a matrix on the kept factor
MatC keep_rest_matrix(const Space& sp, const VecC& v, const std::vector<int>& keep) {
  std::vector<bool> kept(sp.nsites, false);
  for (int x : keep) kept.at(x) = true;
  std::vector<int> rest;
  for (int x = 0; x < sp.nsites; ++x)
    if (!kept[x]) rest.push_back(x);
  int64_t da = 1, db = 1;
  for (size_t i = 0; i < keep.size(); ++i) da *= sp.q;
  for (size_t i = 0; i < rest.size(); ++i) db *= sp.q;
  MatC m = MatC::Zero(da, db);
  for (int64_t idx = 0; idx < sp.dim(); ++idx) {
    int64_t code = sp.code_of(idx);
    int64_t a = 0, b = 0;
    for (int x : keep) a = a * sp.q + sp.digit(code, x);
    for (int x : rest) b = b * sp.q + sp.digit(code, x);
    m(a, b) += v[idx];
  }
  return m;
}

double rank2_trace_norm(const Space& sp, const VecC& u, const VecC& v,
                        const std::vector<int>& keep) {
  MatC cu = keep_rest_matrix(sp, u, keep);
  MatC cv = keep_rest_matrix(sp, v, keep);
  MatC m = cu * cv.adjoint();
  return trace_norm(m + m.adjoint());
}

struct RunningAcc {
  double prev_theta = 0;
  double prev_dat = 0, dat_sum = 0;
  double prev_r = 0, r_sum = 0;
  bool started = false;
};

struct Engine {
  const Lattice& lat;
  const Interaction& inter;
  const FlowConfig& cfg;

  TwistConfig tw;
  Space sp;
  SpMat h;
  SpectralData sd;
  VecC psi0;
  double e0 = 0, e1 = 0, gap = 0;  // global, over all sectors
  FilterParams fp;
  bool spectral_backend = true;
  VecR hw, bw, nm1, nm2;
  SpMat plain_t;
  MatC kernel_c;  // Hadamard kernel of the spectral backend, complex cast
  SpMat a0;       // A_1(0)
  std::vector<int> keep;
  double half = 0;
  int steps = 0;

  struct Slot {
    long j = -1;
    MatC b;
  };
  std::array<Slot, 3> cache;
  int cpos = 0;

  Engine(const Lattice& l, const Interaction& in, const FlowConfig& c)
      : lat(l), inter(in), cfg(c), tw(TwistConfig::make(l, in, c.m_override)) {
    if (cfg.theta_steps < 64)
      throw std::invalid_argument("flow: theta_steps must be >= 64");
    if (lat.L % 2 != 0) throw std::invalid_argument("flow: L must be even");
    if (cfg.filter_backend != "spectral" && cfg.filter_backend != "quadrature")
      throw std::invalid_argument("flow: unknown filter backend " + cfg.filter_backend);
    spectral_backend = cfg.filter_backend == "spectral";
    steps = cfg.theta_steps;
    half = kPi / steps;

    if (cfg.sector_blocking) {
      SectorSpectra ss = diag_all_sectors(lat, inter);
      if (ss.degenerate)
        throw std::runtime_error("hastings flow: degenerate ground state at theta = 0");
      sp = ss.gs_space;
      e0 = ss.E0;
      e1 = ss.E1;
      h = build_h(sp, inter);
      sd = diag_dense(h);
      if (std::abs(sd.evals[0] - e0) > 1e-8 * std::max(1.0, std::abs(e0)))
        throw std::runtime_error("hastings flow: sector ground energy mismatch");
    } else {
      sp = Space::full(lat.n_sites(), inter.spin);
      h = build_h(sp, inter);
      sd = diag_dense(h);
      e0 = sd.evals[0];
      e1 = sd.evals[1];
    }
    gap = e1 - e0;
    if (gap <= 1e-9 * std::max(1.0, std::abs(e0)))
      throw std::runtime_error("hastings flow: degenerate ground state at theta = 0");
    psi0 = sd.evecs.col(0);
    phase_fix(psi0);
    sd.evecs.col(0) = psi0;

    fp.a = cfg.a > 0 ? cfg.a : gap / lat.L;
    fp.T_cut = cfg.T_cut > 0 ? cfg.T_cut : lat.L / 2.0;
    fp.M = cfg.M;
    fp.s_panels = cfg.s_panels;
    if (!spectral_backend && fp.M <= 0) fp.M = std::sqrt(40.0 / fp.a);
    fp.validate(!spectral_backend);

    hw = half_rotation_weights(sp, lat, tw.m);
    bw = block_weights(sp, lat, tw.m);
    nm1 = column_weights(sp, lat, tw.m);
    nm2 = column_weights(sp, lat, tw.partner(lat));
    plain_t = translation_op(sp, lat);
    a0 = twist_derivative(sp, inter, lat, tw.m, 0.0);
    if (spectral_backend) kernel_c = spectral_kernel(sd.evals, fp).cast<cd>();
    keep = window_sites(lat, tw.m, window_radius(lat, inter));
  }

  const MatC& stage_b(long j) {
    for (auto& s : cache)
      if (s.j == j) return s.b;
    const double theta = j * half;
    MatC b;
    if (spectral_backend) {
      // A_1(theta) in the eigenbasis of H_{theta,-theta}: one phase sandwich
      VecC p = phase_diag(hw - bw, theta);
      MatC g = p.asDiagonal() * sd.evecs;
      MatC t = a0 * g;
      b = (g.adjoint() * t).cwiseProduct(kernel_c);
    } else {
      VecC w = phase_diag(bw, -theta);
      SpectralData sdt{sd.evals, w.asDiagonal() * sd.evecs};
      MatC a_theta = MatC(twist_derivative(sp, inter, lat, tw.m, theta));
      b = b_quadrature(a_theta, sdt, fp);
    }
    Slot& s = cache[cpos];
    cpos = (cpos + 1) % static_cast<int>(cache.size());
    s.j = j;
    s.b = std::move(b);
    return s.b;
  }

  // B_{a,T}(theta_j) x
  VecC apply_b(long j, const VecC& x) {
    const MatC& b = stage_b(j);
    if (!spectral_backend) return b * x;
    const double theta = j * half;
    VecC w = phase_diag(bw, -theta);
    VecC u = sd.evecs.adjoint() * (w.conjugate().asDiagonal() * x).eval();
    return w.asDiagonal() * (sd.evecs * (b * u)).eval();
  }

  ThetaRecord make_record(long j, const VecC& psi, RunningAcc& acc) {
    const double theta = j * half;
    ThetaRecord r;
    r.theta = theta;
    r.norm = psi.norm();
    r.energy = std::real(psi.dot(h * psi));
    SpMat ht = build_h_twisted(sp, inter, lat, tw, theta, -theta);
    r.energy_twisted = std::real(psi.dot(ht * psi));
    VecC w = phase_diag(bw, -theta);
    VecC psi0p = w.cwiseProduct(psi0);
    r.overlap_gs = std::abs(psi0.dot(psi));
    r.overlap_rotated = std::abs(psi0p.dot(psi));
    SpMat tth0 = twisted_translation(sp, lat, tw, theta, 0.0, plain_t);
    r.translation_defect = (tth0 * psi - psi).norm();
    r.window_tdist =
        trace_norm(partial_trace(sp, psi, keep) - partial_trace(sp, psi0p, keep));

    SpectralData sdt{sd.evals, w.asDiagonal() * sd.evecs};
    SpMat a1 = twist_derivative(sp, inter, lat, tw.m, theta);
    VecC v1 = b_exact_on_ground(a1, sdt);
    SpMat ttw = twisted_translation(sp, lat, tw, theta, -theta, plain_t);
    cd c = psi0p.dot(ttw * psi0p);  // translation eigenvalue of the twisted ground state
    VecC in1 = cd(0, 1) * nm1.cast<cd>().cwiseProduct(psi0p);
    VecC d1 = in1 + std::conj(c) * (ttw * v1) - v1;
    r.d1_norm = d1.norm();

    if (!cfg.diagnostics) return r;

    SpMat a2 = twist_derivative(sp, inter, lat, tw.partner(lat), -theta);
    VecC v2 = b_exact_on_ground(a2, sdt);
    VecC in2 = cd(0, 1) * nm2.cast<cd>().cwiseProduct(psi0p);
    VecC d2 = in2 + std::conj(c) * (ttw * v2) - v2;
    r.d2_norm = d2.norm();
    r.d_difference = (d1 - d2).norm();
    r.d_identity_gap = std::abs(cd(d1.squaredNorm(), 0) - d1.dot(d2));
    r.a1_expectation = std::abs(psi0p.dot(a1 * psi0p));
    r.a2_expectation = std::abs(psi0p.dot(a2 * psi0p));

    VecC bpsi = apply_b(j, psi);
    VecC cat = cd(0, 1) * nm1.cast<cd>().cwiseProduct(psi) +
               tth0 * apply_b(j, (tth0.adjoint() * psi).eval());
    VecC dat = cat - bpsi;
    r.cat_norm = cat.norm();
    r.dat_norm = dat.norm();

    SplitH split = window_strip_split(sp, inter, lat, tw, theta, -theta);
    SpectralData sdw = diag_dense(split.window);
    MatC bw_op = b_spectral(MatC(a1), sdw, fp);
    VecC x1 = bpsi - bw_op * psi;
    r.r1 = rank2_trace_norm(sp, x1, psi, keep);
    VecC wv = bw_op * psi0p - v1;
    r.r2 = rank2_trace_norm(sp, wv, psi0p, keep);
    r.r3 = rank2_trace_norm(sp, v2, psi0p, keep);

    SpMat hw1t = window_hamiltonian(sp, inter, lat, tw.m, theta);
    SpMat hw10 = window_hamiltonian(sp, inter, lat, tw.m, 0.0);
    SpMat ht0 = build_h_twisted(sp, inter, lat, tw, theta, 0.0);
    r.energy_r1 = std::real(psi.dot(hw1t * psi)) - std::real(psi0p.dot(hw1t * psi0p));
    r.energy_r2 = std::real(psi.dot((h - hw10) * psi)) -
                  std::real(psi0.dot((h - hw10) * psi0));
    r.energy_identity_residual =
        (std::real(psi.dot(ht0 * psi)) - e0) - r.energy_r1 - r.energy_r2;

    if (acc.started) {
      double dth = theta - acc.prev_theta;
      acc.dat_sum += 0.5 * dth * (acc.prev_dat + r.dat_norm);
      acc.r_sum += 0.5 * dth * (acc.prev_r + (r.r1 + r.r2 + r.r3));
    }
    acc.started = true;
    acc.prev_theta = theta;
    acc.prev_dat = r.dat_norm;
    acc.prev_r = r.r1 + r.r2 + r.r3;
    r.dat_integral = acc.dat_sum;
    r.r_integral = acc.r_sum;
    return r;
  }
};

}  // namespace

FlowResult hastings_flow(const Lattice& lat, const Interaction& inter,
                         const FlowConfig& cfg) {
  Engine eng(lat, inter, cfg);
  const int steps = eng.steps;
  const double hstep = 2 * eng.half;

  int samples = std::max(1, std::min(cfg.samples, steps));
  std::set<int> rec;
  for (int k = 0; k < samples; ++k)
    rec.insert(static_cast<int>(std::llround(double(k) * steps / samples)));
  rec.insert(0);

  FlowResult out;
  out.a = eng.fp.a;
  out.T_cut = eng.fp.T_cut;
  out.m = eng.tw.m;
  out.steps = steps;
  out.backend = cfg.filter_backend;
  out.blocked = cfg.sector_blocking;
  out.dim = eng.sp.dim();
  out.E0 = eng.e0;
  out.E1 = eng.e1;
  out.gap = eng.gap;

  RunningAcc acc;
  VecC psi = eng.psi0;
  for (int i = 0; i < steps; ++i) {
    if (rec.count(i)) out.records.push_back(eng.make_record(2L * i, psi, acc));
    VecC k1 = eng.apply_b(2L * i, psi);
    VecC k2 = eng.apply_b(2L * i + 1, (psi + (hstep / 2) * k1).eval());
    VecC k3 = eng.apply_b(2L * i + 1, (psi + (hstep / 2) * k2).eval());
    VecC k4 = eng.apply_b(2L * i + 2, (psi + hstep * k3).eval());
    psi += (hstep / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    double nrm = psi.norm();
    out.norm_drift = std::max(out.norm_drift, std::abs(nrm - 1));
    if (std::abs(nrm - 1) > 1e-6) {
      char msg[160];
      std::snprintf(msg, sizeof(msg),
                    "hastings flow: norm drift %.3e at theta = %.6f; "
                    "raise theta_steps to shrink the RK4 step",
                    std::abs(nrm - 1), (i + 1) * hstep);
      throw std::runtime_error(msg);
    }
    if (cfg.renormalize) psi /= nrm;
  }
  out.records.push_back(eng.make_record(2L * steps, psi, acc));

  out.psi1 = psi;
  VecC psi1n = psi / psi.norm();
  out.energy1 = std::real(psi1n.dot(eng.h * psi1n));
  out.delta_e = out.energy1 - eng.e0;
  out.overlap = std::abs(eng.psi0.dot(psi1n));
  SpMat t2pi = twisted_translation(eng.sp, lat, eng.tw, 2 * kPi, 0.0, eng.plain_t);
  out.majorant = 0.5 * (t2pi * psi1n - psi1n).norm();
  if (out.overlap < 1 - 1e-6)
    out.refined_bound = out.delta_e / (1 - out.overlap * out.overlap);
  return out;
}

double refined_gap_bound(const FlowResult& fr) {
  if (!(fr.overlap < 1 - 1e-6))
    throw std::runtime_error(
        "refined gap bound: overlap too close to 1, the bound is vacuous");
  return fr.delta_e / (1 - fr.overlap * fr.overlap);
}

VecC inhomogeneous_endpoint(const Lattice& lat, const Interaction& inter,
                            const FlowConfig& cfg,
                            const std::function<VecC(double)>& beta,
                            double* beta_l1) {
  Engine eng(lat, inter, cfg);
  const int steps = eng.steps;
  const double hstep = 2 * eng.half;
  double acc = 0;
  VecC y = eng.psi0;
  for (int i = 0; i < steps; ++i) {
    double th = 2L * i * eng.half;
    VecC b1 = beta(th);
    VecC bm = beta((2L * i + 1) * eng.half);
    VecC b2 = beta((2L * i + 2) * eng.half);
    VecC k1 = eng.apply_b(2L * i, y) + b1;
    VecC k2 = eng.apply_b(2L * i + 1, (y + (hstep / 2) * k1).eval()) + bm;
    VecC k3 = eng.apply_b(2L * i + 1, (y + (hstep / 2) * k2).eval()) + bm;
    VecC k4 = eng.apply_b(2L * i + 2, (y + hstep * k3).eval()) + b2;
    y += (hstep / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    acc += hstep / 6 * (b1.norm() + 4 * bm.norm() + b2.norm());
  }
  if (beta_l1) *beta_l1 = acc;
  return y;
}

Space flow_space(const Lattice& lat, const Interaction& inter, bool sector_blocking) {
  if (!sector_blocking) return Space::full(lat.n_sites(), inter.spin);
  return diag_all_sectors(lat, inter).gs_space;
}

VecC scatter_to_full(const Space& sp, const VecC& v) {
  if (!sp.restricted) return v;
  int64_t full = 1;
  for (int i = 0; i < sp.nsites; ++i) full *= sp.q;
  VecC out = VecC::Zero(full);
  for (int64_t idx = 0; idx < sp.dim(); ++idx) out[sp.states[idx]] = v[idx];
  return out;
}

}  // namespace lsm
