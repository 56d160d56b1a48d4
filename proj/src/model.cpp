#include "lsm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lsm {

std::vector<const Term*> Interaction::all_terms() const {
  std::vector<const Term*> out;
  out.reserve(open_terms.size() + wrap_terms.size());
  for (const auto& t : open_terms) out.push_back(&t);
  for (const auto& t : wrap_terms) out.push_back(&t);
  return out;
}

static MatC kron2(const MatC& a, const MatC& b) {
  MatC out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

MatC exchange_matrix(double s, double J, double delta) {
  SpinOps op = SpinOps::make(s);
  return J * (kron2(op.sx, op.sx) + kron2(op.sy, op.sy) + delta * kron2(op.sz, op.sz));
}

static int term_width(const Lattice& lat, const std::vector<int>& sites) {
  int lo = lat.L, hi = 1;
  for (int x : sites) {
    lo = std::min(lo, lat.col(x));
    hi = std::max(hi, lat.col(x));
  }
  return hi - lo;
}

static Interaction from_edge_couplings(const Lattice& lat, double s,
                                       const std::map<std::pair<int, int>, double>& J,
                                       double delta) {
  Interaction inter;
  inter.spin = s;
  for (const auto& e : lat.edges) {
    auto it = J.find({e[0], e[1]});
    if (it == J.end() || it->second == 0.0) continue;
    Term t;
    t.sites = {e[0], e[1]};
    t.op = exchange_matrix(s, it->second, delta);
    // a 1-direction bond between columns L and 1 crosses the seam
    t.wraps = std::abs(lat.col(e[0]) - lat.col(e[1])) == lat.L - 1;
    if (t.wraps)
      inter.wrap_terms.push_back(std::move(t));
    else
      inter.open_terms.push_back(std::move(t));
  }
  int R = 0;
  for (const auto& t : inter.open_terms) R = std::max(R, term_width(lat, t.sites));
  inter.range = std::max(R, 1);
  return inter;
}

Interaction heisenberg(const Lattice& lat, double s, double J) {
  return xxz(lat, s, J, 1.0);
}

Interaction xxz(const Lattice& lat, double s, double J, double delta) {
  std::map<std::pair<int, int>, double> cpl;
  for (const auto& e : lat.edges) cpl[{e[0], e[1]}] = J;
  return from_edge_couplings(lat, s, cpl, delta);
}

Interaction dimerized(const Lattice& lat, double s, double J1, double J2) {
  std::map<std::pair<int, int>, double> cpl;
  for (const auto& e : lat.edges) {
    int c0 = lat.col(e[0]), c1 = lat.col(e[1]);
    if (c0 == c1) {
      cpl[{e[0], e[1]}] = J1;  // rung
    } else {
      int n = std::min(c0, c1);
      if (std::abs(c0 - c1) == lat.L - 1) n = lat.L;  // seam bond belongs to column L
      cpl[{e[0], e[1]}] = (n % 2 == 1) ? J1 : J2;
    }
  }
  return from_edge_couplings(lat, s, cpl, 1.0);
}

Interaction coupled(const Lattice& lat, double s,
                    const std::map<std::pair<int, int>, double>& J, double delta) {
  return from_edge_couplings(lat, s, J, delta);
}

TwistConfig TwistConfig::make(const Lattice& lat, const Interaction& inter,
                              std::optional<int> m_override) {
  const int R = inter.range;
  if (lat.L < 4 * R)
    throw std::invalid_argument("twist: L < 4R, twist windows do not fit");
  TwistConfig tw;
  int lo = R, hi = lat.L / 2 - R;
  if (m_override) {
    tw.m = *m_override;
    if (tw.m < lo || tw.m > hi)
      throw std::invalid_argument("twist: m outside [R, L/2-R]");
  } else {
    tw.m = std::clamp((lat.L + 2) / 4, lo, hi);
  }
  return tw;
}

SpMat build_h(const Space& sp, const Interaction& inter) {
  SpMat h(sp.dim(), sp.dim());
  for (const Term* t : inter.all_terms()) h += embed(sp, t->sites, t->op);
  return h;
}

SpMat build_h_open(const Space& sp, const Interaction& inter) {
  SpMat h(sp.dim(), sp.dim());
  for (const auto& t : inter.open_terms) h += embed(sp, t.sites, t.op);
  return h;
}

static bool straddles(const Lattice& lat, const Term& t, int cut) {
  if (t.wraps) return false;
  int lo = lat.L, hi = 1;
  for (int x : t.sites) {
    lo = std::min(lo, lat.col(x));
    hi = std::max(hi, lat.col(x));
  }
  return lo <= cut && cut < hi;
}

// conjugate the local matrix by the diagonal rotation exp(i sum_rotated
// theta S^3); factors with col > cut pick up the phase
static MatC twisted_local(const Space& sp, const Lattice& lat, const Term& t,
                          const std::vector<std::pair<int, double>>& cuts) {
  const int k = static_cast<int>(t.sites.size());
  int64_t ldim = t.op.rows();
  std::vector<double> ang(k, 0.0);
  bool any = false;
  for (int i = 0; i < k; ++i)
    for (const auto& [cut, theta] : cuts)
      if (lat.col(t.sites[i]) > cut) {
        ang[i] += theta;
        any = true;
      }
  if (!any) return t.op;
  VecC r(ldim);
  for (int64_t l = 0; l < ldim; ++l) {
    int64_t rem = l;
    double phase = 0;
    for (int i = k - 1; i >= 0; --i) {
      phase += ang[i] * sp.mval(static_cast<int>(rem % sp.q));
      rem /= sp.q;
    }
    r[l] = std::polar(1.0, phase);
  }
  return r.conjugate().asDiagonal() * t.op * r.asDiagonal();
}

SpMat build_h_twisted(const Space& sp, const Interaction& inter, const Lattice& lat,
                      const TwistConfig& tw, double theta1, double theta2) {
  const int m1 = tw.m, m2 = tw.partner(lat);
  SpMat h(sp.dim(), sp.dim());
  for (const auto& t : inter.wrap_terms) h += embed(sp, t.sites, t.op);
  for (const auto& t : inter.open_terms) {
    std::vector<std::pair<int, double>> cuts;
    if (straddles(lat, t, m1)) cuts.push_back({m1, theta1});
    if (straddles(lat, t, m2)) cuts.push_back({m2, theta2});
    h += embed(sp, t.sites, cuts.empty() ? t.op : twisted_local(sp, lat, t, cuts));
  }
  return h;
}

int window_radius(const Lattice& lat, const Interaction& inter) {
  int w = static_cast<int>(std::floor(lat.L / 4.0 - inter.range + 1e-9));
  return std::max(w, 1);
}

std::vector<int> window_sites(const Lattice& lat, int center_col, int radius) {
  std::vector<int> out;
  for (int x = 0; x < lat.n_sites(); ++x)
    if (lat.col_distance(lat.col(x), center_col) <= radius) out.push_back(x);
  return out;
}

SplitH window_strip_split(const Space& sp, const Interaction& inter, const Lattice& lat,
                          const TwistConfig& tw, double theta1, double theta2) {
  const int m1 = tw.m, m2 = tw.partner(lat);
  const int w = window_radius(lat, inter);
  if (w < inter.range)
    throw std::invalid_argument("window split: radius below interaction range");

  std::vector<bool> in_window(lat.L + 1, false);
  for (int n = 1; n <= lat.L; ++n)
    if (lat.col_distance(n, m1) <= w || lat.col_distance(n, m2) <= w) in_window[n] = true;

  SplitH out;
  for (int n = 1; n <= lat.L; ++n)
    if (in_window[n]) out.window_cols.push_back(n);
  out.window = SpMat(sp.dim(), sp.dim());
  out.strip = SpMat(sp.dim(), sp.dim());

  for (const Term* t : inter.all_terms()) {
    bool meets_strip = false;
    for (int x : t->sites)
      if (!in_window[lat.col(x)]) meets_strip = true;
    std::vector<std::pair<int, double>> cuts;
    if (straddles(lat, *t, m1)) cuts.push_back({m1, theta1});
    if (straddles(lat, *t, m2)) cuts.push_back({m2, theta2});
    if (meets_strip) {
      if (!cuts.empty())
        throw std::runtime_error("window split: twisted term leaks into the strip");
      out.strip += embed(sp, t->sites, t->op);
    } else {
      out.window += embed(sp, t->sites, cuts.empty() ? t->op : twisted_local(sp, lat, *t, cuts));
    }
  }
  return out;
}

SpMat window_hamiltonian(const Space& sp, const Interaction& inter, const Lattice& lat,
                         int cut, double theta) {
  const int w = window_radius(lat, inter);
  SpMat h(sp.dim(), sp.dim());
  for (const Term* t : inter.all_terms()) {
    bool inside = true;
    for (int x : t->sites)
      if (lat.col_distance(lat.col(x), cut) > w) inside = false;
    if (!inside) continue;
    if (!t->wraps && straddles(lat, *t, cut))
      h += embed(sp, t->sites, twisted_local(sp, lat, *t, {{cut, theta}}));
    else
      h += embed(sp, t->sites, t->op);
  }
  return h;
}

SpMat twist_derivative(const Space& sp, const Interaction& inter, const Lattice& lat,
                       int cut, double theta) {
  SpMat a(sp.dim(), sp.dim());
  for (const auto& t : inter.open_terms) {
    if (!straddles(lat, t, cut)) continue;
    const int k = static_cast<int>(t.sites.size());
    const int64_t ldim = t.op.rows();
    // weights of sum_{col > cut} S^3 on the local factors
    std::vector<double> wloc(ldim, 0.0);
    for (int64_t l = 0; l < ldim; ++l) {
      int64_t rem = l;
      for (int i = k - 1; i >= 0; --i) {
        if (lat.col(t.sites[i]) > cut) wloc[l] += sp.mval(static_cast<int>(rem % sp.q));
        rem /= sp.q;
      }
    }
    MatC dM(ldim, ldim);
    for (int64_t r = 0; r < ldim; ++r)
      for (int64_t c = 0; c < ldim; ++c)
        dM(r, c) = cd(0, -1) * (wloc[r] - wloc[c]) * t.op(r, c);  // -i [N_+, op]
    Term dt;
    dt.sites = t.sites;
    dt.op = dM;
    a += embed(sp, t.sites, twisted_local(sp, lat, dt, {{cut, theta}}));
  }
  return a;
}

std::vector<int> cut_support(const Interaction& inter, const Lattice& lat, int cut) {
  std::vector<bool> seen(lat.n_sites(), false);
  for (const auto& t : inter.open_terms)
    if (straddles(lat, t, cut))
      for (int x : t.sites) seen[x] = true;
  std::vector<int> out;
  for (int x = 0; x < lat.n_sites(); ++x)
    if (seen[x]) out.push_back(x);
  return out;
}

VecR half_rotation_weights(const Space& sp, const Lattice& lat, int cut) {
  std::vector<int> sites;
  for (int x = 0; x < lat.n_sites(); ++x)
    if (lat.col(x) > cut) sites.push_back(x);
  return sp.sz_weights(sites);
}

VecR column_weights(const Space& sp, const Lattice& lat, int col) {
  std::vector<int> sites;
  for (int v = 1; v <= lat.legs; ++v) sites.push_back(lat.site(col, v));
  return sp.sz_weights(sites);
}

VecR block_weights(const Space& sp, const Lattice& lat, int cut) {
  std::vector<int> sites;
  for (int n = cut + 1; n <= cut + lat.L / 2; ++n)
    for (int v = 1; v <= lat.legs; ++v) sites.push_back(lat.site(n, v));
  return sp.sz_weights(sites);
}

SpMat twisted_translation(const Space& sp, const Lattice& lat, const TwistConfig& tw,
                          double theta1, double theta2, const SpMat& plain_t) {
  VecR w1 = column_weights(sp, lat, tw.m);
  VecR w2 = column_weights(sp, lat, tw.partner(lat));
  VecC d = phase_diag(w1, theta1).cwiseProduct(phase_diag(w2, theta2));
  return d.asDiagonal() * plain_t;
}

InteractionNorms interaction_norms(const Lattice& lat, const Interaction& inter,
                                   const DecayFunction& f) {
  const int N = lat.n_sites();
  const int q = static_cast<int>(std::round(2 * inter.spin)) + 1;
  auto terms = inter.all_terms();
  std::vector<double> nrm(terms.size()), comm(terms.size());
  for (size_t i = 0; i < terms.size(); ++i) {
    const Term& t = *terms[i];
    nrm[i] = op_norm(t.op);
    const int k = static_cast<int>(t.sites.size());
    const int64_t ldim = t.op.rows();
    double csum = 0;
    for (int j = 0; j < k; ++j) {
      // [S^3 at factor j, op] elementwise, S^3 being diagonal
      auto dig = [&](int64_t l) {
        for (int i2 = k - 1; i2 > j; --i2) l /= q;
        return static_cast<int>(l % q);
      };
      MatC c(ldim, ldim);
      for (int64_t r = 0; r < ldim; ++r)
        for (int64_t cc = 0; cc < ldim; ++cc) {
          double wr = inter.spin - dig(r), wc = inter.spin - dig(cc);
          c(r, cc) = (wr - wc) * t.op(r, cc);
        }
      csum += op_norm(c);
    }
    comm[i] = csum;
  }

  InteractionNorms out;
  for (int x = 0; x < N; ++x) {
    double s1 = 0, s2 = 0;
    for (size_t i = 0; i < terms.size(); ++i) {
      const auto& X = terms[i]->sites;
      if (std::find(X.begin(), X.end(), x) == X.end()) continue;
      s1 += nrm[i];
      s2 += static_cast<double>(X.size()) * comm[i];
    }
    out.one_norm = std::max(out.one_norm, s1);
    out.two_norm = std::max(out.two_norm, s2);
  }
  for (int x = 0; x < N; ++x)
    for (int y = 0; y < N; ++y) {
      double s = 0;
      for (size_t i = 0; i < terms.size(); ++i) {
        const auto& X = terms[i]->sites;
        if (std::find(X.begin(), X.end(), x) == X.end()) continue;
        if (std::find(X.begin(), X.end(), y) == X.end()) continue;
        s += nrm[i];
      }
      out.lambda_norm = std::max(out.lambda_norm, s / f.F_weighted(lat.distance(x, y)));
    }
  return out;
}

// permutation taking the term's site list to ascending order, applied to the
// tensor factors of the matrix
static void canonicalize(const Space& sp, std::vector<int>& sites, MatC& op) {
  const int k = static_cast<int>(sites.size());
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](int a, int b) { return sites[a] < sites[b]; });
  bool sorted = true;
  for (int i = 0; i < k; ++i)
    if (perm[i] != i) sorted = false;
  if (sorted) return;

  std::vector<int> ns(k);
  for (int i = 0; i < k; ++i) ns[i] = sites[perm[i]];
  const int64_t ldim = op.rows();
  std::vector<int64_t> map(ldim);
  std::vector<int> dg(k);
  for (int64_t l = 0; l < ldim; ++l) {
    int64_t rem = l;
    for (int i = k - 1; i >= 0; --i) {
      dg[i] = static_cast<int>(rem % sp.q);
      rem /= sp.q;
    }
    int64_t nl = 0;
    for (int i = 0; i < k; ++i) nl = nl * sp.q + dg[perm[i]];
    map[l] = nl;
  }
  MatC nop(ldim, ldim);
  for (int64_t r = 0; r < ldim; ++r)
    for (int64_t c = 0; c < ldim; ++c) nop(map[r], map[c]) = op(r, c);
  sites = ns;
  op = nop;
}

LsmStaticReport lsm_static_checks(const Lattice& lat, const Interaction& inter, double tol) {
  LsmStaticReport rep;
  rep.range = inter.range;
  Space sp = Space::full(std::min(lat.n_sites(), 4), inter.spin);  // digits only

  // group terms by canonical support
  std::map<std::vector<int>, MatC> by_support;
  for (const Term* t : inter.all_terms()) {
    std::vector<int> s = t->sites;
    MatC m = t->op;
    canonicalize(sp, s, m);
    auto it = by_support.find(s);
    if (it == by_support.end())
      by_support[s] = m;
    else
      it->second += m;
  }

  rep.translation_covariant = true;
  for (const auto& [sites, m] : by_support) {
    std::vector<int> ts(sites.size());
    for (size_t i = 0; i < sites.size(); ++i) {
      int n = lat.col(sites[i]) % lat.L + 1;
      ts[i] = lat.site(n, lat.leg(sites[i]));
    }
    MatC tm = m;
    canonicalize(sp, ts, tm);
    auto it = by_support.find(ts);
    if (it == by_support.end() || (it->second - tm).cwiseAbs().maxCoeff() > tol) {
      rep.translation_covariant = false;
      break;
    }
  }

  rep.rotation_invariant = true;
  rep.real_matrices = true;
  for (const Term* t : inter.all_terms()) {
    const int k = static_cast<int>(t->sites.size());
    const int64_t ldim = t->op.rows();
    double worst = 0;
    for (int64_t r = 0; r < ldim; ++r)
      for (int64_t c = 0; c < ldim; ++c) {
        double wr = 0, wc = 0;
        int64_t rr = r, cc = c;
        for (int i = k - 1; i >= 0; --i) {
          wr += inter.spin - static_cast<double>(rr % sp.q);
          wc += inter.spin - static_cast<double>(cc % sp.q);
          rr /= sp.q;
          cc /= sp.q;
        }
        worst = std::max(worst, std::abs((wr - wc) * t->op(r, c)));
        rep.real_matrices = rep.real_matrices && std::abs(t->op(r, c).imag()) <= tol;
      }
    if (worst > tol) rep.rotation_invariant = false;
  }

  double col_spin = lat.legs * inter.spin;
  double frac = col_spin - std::floor(col_spin);
  rep.odd_parity = std::abs(frac - 0.5) < 1e-12;
  return rep;
}

}  // namespace lsm
