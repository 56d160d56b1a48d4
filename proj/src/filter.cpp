#include "lsm/filter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace lsm {

namespace {

constexpr double kPi = 3.14159265358979323846;

// 16-point Gauss-Legendre rule on [-1,1], positive half
constexpr double kGlX[8] = {
    0.09501250983763744, 0.28160355077925891, 0.45801677765722739,
    0.61787624440264375, 0.75540440835500303, 0.86563120238783174,
    0.94457502307323258, 0.98940093499164993};
constexpr double kGlW[8] = {
    0.18945061045506850, 0.18260341504492359, 0.16915651939500254,
    0.14959598881657673, 0.12462897125553387, 0.09515851168249278,
    0.06225352393864789, 0.02715245941175409};

template <class F>
auto gl16(F&& f, double lo, double hi) -> decltype(f(lo)) {
  const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
  decltype(f(lo)) acc = f(c + h * kGlX[0]) * kGlW[0] + f(c - h * kGlX[0]) * kGlW[0];
  for (int i = 1; i < 8; ++i)
    acc += (f(c + h * kGlX[i]) + f(c - h * kGlX[i])) * kGlW[i];
  return acc * h;
}

void sort_unique(std::vector<double>& v, double tol) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end(),
                      [tol](double x, double y) { return y - x <= tol; }),
          v.end());
}

}  // namespace

double erfcx(double x) {
  if (x < 6.0) return std::exp(x * x) * std::erfc(x);
  // asymptotic series: (1/(x sqrt(pi))) sum (-1)^k (2k-1)!! / (2x^2)^k
  const double ix2 = 1.0 / (2.0 * x * x);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 25; ++k) {
    term *= -(2 * k - 1) * ix2;
    sum += term;
    if (std::abs(term) < 1e-18 * sum) break;
  }
  return sum / (x * std::sqrt(kPi));
}

void FilterParams::validate(bool need_m) const {
  if (!(a > 0)) throw std::invalid_argument("filter: a must be positive");
  if (!(T_cut > 0)) throw std::invalid_argument("filter: T_cut must be positive");
  if (need_m && !(M > 0))
    throw std::invalid_argument("filter: quadrature backend needs M > 0");
}

double filter_weight(const FilterParams& p, double E) {
  p.validate();
  const double a = p.a, T = p.T_cut, sa = std::sqrt(a);
  const double inv4a = 1.0 / (4.0 * a);
  auto g = [&](double t) {
    double x = (E + 2.0 * a * t) / (2.0 * sa);
    double expo = -E * E * inv4a - a * t * t;  // equals tE - x^2
    if (x >= 0) return erfcx(x) * std::exp(expo);
    return 2.0 * std::exp(t * E) - erfcx(-x) * std::exp(expo);
  };
  int n = (int)std::ceil(T * std::max({std::abs(E), 2.0 * a * T, 1.0}) / 3.0);
  n = std::clamp(n, 48, 4096);
  double acc = 0;
  const double w = T / n;
  for (int i = 0; i < n; ++i) acc += gl16(g, i * w, (i + 1) * w);
  return 0.5 * acc;
}

double filter_weight_reference(const FilterParams& p, double E) {
  p.validate();
  const double a = p.a, T = p.T_cut;
  const double smax = std::sqrt(52.0 / a);
  auto inner = [&](double t) -> cd {
    std::vector<double> bd{0.0, smax};
    for (double g = std::max(t, 1e-12) / 8.0; g < 1.0 && g < smax; g *= 2) bd.push_back(g);
    const double step = std::min(0.5, 3.0 / std::max(1.0, std::abs(E)));
    for (double x = 1.0; x < smax; x += step) bd.push_back(x);
    sort_unique(bd, 1e-14);
    auto f = [&](double s) {
      return std::exp(cd(-a * s * s, -E * s)) / cd(s, -t) +
             std::exp(cd(-a * s * s, E * s)) / cd(-s, -t);
    };
    cd acc = 0;
    for (size_t i = 0; i + 1 < bd.size(); ++i) acc += gl16(f, bd[i], bd[i + 1]);
    return acc;
  };
  std::vector<double> tb{0.0, T};
  for (int k = 1; k <= 31; ++k) tb.push_back(T * std::ldexp(1.0, -k));
  sort_unique(tb, 0.0);
  auto h = [&](double t) { return std::exp(-a * t * t) * inner(t); };
  cd acc = 0;
  for (size_t i = 0; i + 1 < tb.size(); ++i) acc += gl16(h, tb[i], tb[i + 1]);
  return std::real(acc / cd(0.0, 2.0 * kPi));
}

Eigen::MatrixXd spectral_kernel(const VecR& evals, const FilterParams& p) {
  const Eigen::Index n = evals.size();
  Eigen::MatrixXd f(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index l = 0; l < n; ++l) f(k, l) = filter_weight(p, evals[k] - evals[l]);
  return f - f.transpose().eval();
}

MatC b_spectral_eigenbasis(const MatC& a_eig, const VecR& evals, const FilterParams& p) {
  const Eigen::Index n = evals.size();
  Eigen::MatrixXd f(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index l = 0; l < n; ++l) f(k, l) = filter_weight(p, evals[k] - evals[l]);
  MatC b(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index l = 0; l < n; ++l)
      b(k, l) = -a_eig(k, l) * f(l, k) + std::conj(a_eig(l, k)) * f(k, l);
  return b;
}

MatC b_spectral(const MatC& a, const SpectralData& sd, const FilterParams& p) {
  MatC a_eig = sd.evecs.adjoint() * a * sd.evecs;
  return sd.evecs * b_spectral_eigenbasis(a_eig, sd.evals, p) * sd.evecs.adjoint();
}

namespace {

// q(s) = int_0^T e^{-a t^2} s/(s^2+t^2) dt and w(s) = same with t/(s^2+t^2).
// Panels geometric from the s-scale plus arithmetic refinement on the Gaussian scale.
std::pair<double, double> qw_kernels(double s, double a, double T) {
  std::vector<double> bd{0.0, T};
  for (double g = s / 8.0; g < T; g *= 2) {
    if (g <= 0) break;
    bd.push_back(g);
  }
  const double step = 0.75 / std::sqrt(a);
  for (double x = step; x < T; x += step) bd.push_back(x);
  sort_unique(bd, 1e-15 * T);
  double q = 0, w = 0;
  for (size_t i = 0; i + 1 < bd.size(); ++i) {
    q += gl16([&](double t) { return std::exp(-a * t * t) * s / (s * s + t * t); },
              bd[i], bd[i + 1]);
    w += gl16([&](double t) { return std::exp(-a * t * t) * t / (s * s + t * t); },
              bd[i], bd[i + 1]);
  }
  return {q, w};
}

struct SNode {
  double s, weight;
};

// nodes on [0,M]: uniform base panels sized to resolve e^{i s dmax}, the first
// panel subdivided geometrically to absorb the logarithmic kernel at s = 0
std::vector<SNode> s_nodes(const FilterParams& p, double dmax) {
  int n_base = p.s_panels > 0
                   ? p.s_panels
                   : std::clamp((int)std::ceil(p.M * std::max(dmax, 1.0) / 7.0), 24, 20000);
  std::vector<double> bd;
  const double w = p.M / n_base;
  for (int i = 1; i <= n_base; ++i) bd.push_back(i * w);
  for (int k = 1; k <= 44; ++k) bd.push_back(std::ldexp(w, -k));
  bd.push_back(0.0);
  std::sort(bd.begin(), bd.end());
  std::vector<SNode> nodes;
  nodes.reserve((bd.size() - 1) * 16);
  for (size_t i = 0; i + 1 < bd.size(); ++i) {
    const double c = 0.5 * (bd[i] + bd[i + 1]), h = 0.5 * (bd[i + 1] - bd[i]);
    for (int j = 0; j < 8; ++j) {
      nodes.push_back({c - h * kGlX[j], kGlW[j] * h});
      nodes.push_back({c + h * kGlX[j], kGlW[j] * h});
    }
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const SNode& x, const SNode& y) { return x.s < y.s; });
  return nodes;
}

}  // namespace

MatC b_quadrature(const MatC& a, const SpectralData& sd, const FilterParams& p) {
  p.validate(true);
  const Eigen::Index n = sd.evals.size();
  MatC a_eig = sd.evecs.adjoint() * a * sd.evecs;
  MatC ah = 0.5 * (a_eig + a_eig.adjoint().eval());
  MatC ak = (a_eig - a_eig.adjoint().eval()) / cd(0, 2);
  const bool has_h = ah.cwiseAbs().maxCoeff() > 0;
  const bool has_k = ak.cwiseAbs().maxCoeff() > 0;
  Eigen::MatrixXd delta(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index l = 0; l < n; ++l) delta(k, l) = sd.evals[k] - sd.evals[l];
  const double dmax = sd.evals[n - 1] - sd.evals[0];
  MatC b = MatC::Zero(n, n);
  for (const SNode& nd : s_nodes(p, dmax)) {
    auto [q, w] = qw_kernels(nd.s, p.a, p.T_cut);
    const double damp = nd.weight * std::exp(-p.a * nd.s * nd.s) * 2.0 / kPi;
    if (has_h)
      b.array() -= damp * q * (nd.s * delta).array().sin() * ah.array();
    if (has_k)
      b.array() -= cd(0, damp * w) * (nd.s * delta).array().cos() * ak.array();
  }
  return sd.evecs * b * sd.evecs.adjoint();
}

VecC b_apply_quadrature(const SpMat& a, const SpMat& h, const VecC& psi,
                        const FilterParams& p, double hnorm_est) {
  p.validate(true);
  if (!(hnorm_est > 0)) throw std::invalid_argument("filter: hnorm_est must be positive");
  SpMat ah_s = SpMat(0.5 * (a + SpMat(a.adjoint())));
  SpMat ak_s = SpMat((a - SpMat(a.adjoint())) / cd(0, 2));
  const bool has_h = ah_s.nonZeros() > 0;
  const bool has_k = ak_s.nonZeros() > 0;
  auto stepped = [&](VecC v, double tau) {
    int nsub = std::max(1, (int)std::ceil(std::abs(tau) * hnorm_est / 20.0));
    for (int i = 0; i < nsub; ++i) v = krylov_evolve(h, v, tau / nsub);
    return v;
  };
  VecC fwd = psi, bwd = psi;  // e^{-isH} psi and e^{+isH} psi, advanced node to node
  double s_prev = 0;
  VecC acc = VecC::Zero(psi.size());
  for (const SNode& nd : s_nodes(p, hnorm_est)) {
    fwd = stepped(fwd, nd.s - s_prev);
    bwd = stepped(bwd, -(nd.s - s_prev));
    s_prev = nd.s;
    auto [q, w] = qw_kernels(nd.s, p.a, p.T_cut);
    const double damp = nd.weight * std::exp(-p.a * nd.s * nd.s) / kPi;
    if (has_h)
      acc += cd(0, damp * q) *
             (stepped(ah_s * fwd, -nd.s) - stepped(ah_s * bwd, nd.s));
    if (has_k)
      acc -= cd(0, damp * w) *
             (stepped(ak_s * fwd, -nd.s) + stepped(ak_s * bwd, nd.s));
  }
  return acc;
}

VecC b_exact_on_ground(const MatC& a, const SpectralData& sd, double tol) {
  VecC a0 = sd.evecs.adjoint() * (a * sd.evecs.col(0));
  const Eigen::Index n = a0.size();
  const double scale = std::max(1.0, a0.norm());
  if (std::abs(a0[0]) > tol * scale)
    throw std::invalid_argument("b_exact_on_ground: ground-sector residual " +
                                std::to_string(std::abs(a0[0])));
  VecC coef = VecC::Zero(n);
  for (Eigen::Index k = 1; k < n; ++k) {
    double gap = sd.evals[k] - sd.evals[0];
    if (gap <= 1e-12 * std::max(1.0, std::abs(sd.evals[0]))) {
      if (std::abs(a0[k]) > tol * scale)
        throw std::runtime_error("b_exact_on_ground: degenerate level carries weight");
      continue;
    }
    coef[k] = -a0[k] / gap;
  }
  return sd.evecs * coef;
}

VecC b_exact_on_ground(const SpMat& a, const SpectralData& sd, double tol) {
  return b_exact_on_ground(MatC(a), sd, tol);
}

double shanti_bound(double a, double norm_a) {
  return 0.5 * norm_a * std::sqrt(kPi / a);
}

double truncation_bound(const FilterParams& p, double norm_a) {
  p.validate(true);
  return p.T_cut / (2.0 * p.M) * norm_a / std::sqrt(kPi * p.a) *
         std::exp(-p.a * p.M * p.M);
}

double gap_lemma_bound(const FilterParams& p, double gap, double n_a, double n_a_star) {
  p.validate();
  if (!(gap > 0)) throw std::invalid_argument("gap_lemma_bound: gap must be positive");
  if (2.0 * p.a * p.T_cut > gap * (1.0 + 1e-12))
    throw std::invalid_argument("gap_lemma_bound: requires 2 a T <= gap");
  return p.T_cut * std::exp(-gap * gap / (4.0 * p.a)) * 0.5 * (n_a + n_a_star) +
         std::exp(-gap * p.T_cut) / gap * n_a;
}

double dressing_m(double a, double c2, double c3) {
  if (!(a > 0) || !(c3 > 0) || c2 < 0)
    throw std::invalid_argument("dressing_m: needs a > 0, c3 > 0, c2 >= 0");
  return (-c2 + std::sqrt(c2 * c2 + 4.0 * a * c3)) / (2.0 * a);
}

double dressing_bound(const FilterParams& p, double norm_a, double c1, double c2,
                      double c3) {
  p.validate();
  const double m = dressing_m(p.a, c2, c3);
  return 2.0 * p.T_cut / m * std::exp(-p.a * m * m) *
         (norm_a / std::sqrt(kPi * p.a) + c1 * m * m / kPi);
}

}  // namespace lsm
