#include "lsm/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lsm {

bool is_half_integer(double s) {
  double two_s = 2.0 * s;
  return std::abs(two_s - std::round(two_s)) < 1e-12 && std::round(two_s) >= 1;
}

SpinOps SpinOps::make(double s) {
  if (!is_half_integer(s) && std::abs(s - std::round(s)) > 1e-12)
    throw std::invalid_argument("spin magnitude must be a positive multiple of 1/2");
  SpinOps ops;
  ops.s = s;
  ops.q = static_cast<int>(std::round(2 * s)) + 1;
  const int q = ops.q;
  ops.sp = MatC::Zero(q, q);
  ops.sm = MatC::Zero(q, q);
  ops.sz = MatC::Zero(q, q);
  for (int c = 0; c < q; ++c) {
    double m = s - c;
    ops.sz(c, c) = m;
    if (c > 0) ops.sp(c - 1, c) = std::sqrt(s * (s + 1) - (m + 1) * m);
    if (c < q - 1) ops.sm(c + 1, c) = std::sqrt(s * (s + 1) - (m - 1) * m);
  }
  ops.sx = 0.5 * (ops.sp + ops.sm);
  ops.sy = cd(0, -0.5) * (ops.sp - ops.sm);
  return ops;
}

Space Space::full(int nsites, double s) {
  Space sp;
  sp.nsites = nsites;
  sp.s = s;
  sp.q = static_cast<int>(std::round(2 * s)) + 1;
  double logdim = nsites * std::log2(double(sp.q));
  if (logdim > 26) throw std::invalid_argument("space: dimension too large");
  return sp;
}

Space Space::sz_sector(int nsites, double s, double sz) {
  Space sp = full(nsites, s);
  sp.restricted = true;
  sp.sz_value = sz;
  int64_t total = 1;
  for (int i = 0; i < nsites; ++i) total *= sp.q;
  for (int64_t code = 0; code < total; ++code)
    if (std::abs(sp.sz_of_code(code) - sz) < 1e-9) sp.states.push_back(code);
  if (sp.states.empty()) throw std::invalid_argument("space: empty sector");
  return sp;
}

int64_t Space::dim() const {
  if (restricted) return static_cast<int64_t>(states.size());
  int64_t d = 1;
  for (int i = 0; i < nsites; ++i) d *= q;
  return d;
}

int64_t Space::index_of(int64_t code) const {
  if (!restricted) return code;
  auto it = std::lower_bound(states.begin(), states.end(), code);
  if (it == states.end() || *it != code) return -1;
  return it - states.begin();
}

int Space::digit(int64_t code, int site) const {
  // site 0 holds the most significant digit
  for (int i = nsites - 1; i > site; --i) code /= q;
  return static_cast<int>(code % q);
}

double Space::sz_of_code(int64_t code) const {
  double tot = 0;
  for (int i = nsites - 1; i >= 0; --i) {
    tot += mval(static_cast<int>(code % q));
    code /= q;
  }
  return tot;
}

VecR Space::sz_weights(const std::vector<int>& sites) const {
  VecR w = VecR::Zero(dim());
  for (int64_t idx = 0; idx < dim(); ++idx) {
    int64_t code = code_of(idx);
    double tot = 0;
    for (int x : sites) tot += mval(digit(code, x));
    w[idx] = tot;
  }
  return w;
}

SpMat embed(const Space& sp, const std::vector<int>& sites, const MatC& local) {
  const int k = static_cast<int>(sites.size());
  int64_t ldim = 1;
  for (int i = 0; i < k; ++i) ldim *= sp.q;
  if (local.rows() != ldim || local.cols() != ldim)
    throw std::invalid_argument("embed: local matrix dimension mismatch");
  for (int x : sites)
    if (x < 0 || x >= sp.nsites) throw std::invalid_argument("embed: site out of range");

  // strides of each site's digit in the global code
  std::vector<int64_t> stride(sp.nsites, 1);
  for (int i = sp.nsites - 2; i >= 0; --i) stride[i] = stride[i + 1] * sp.q;

  // nonzero pattern per column of the local matrix
  std::vector<std::vector<std::pair<int64_t, cd>>> cols(ldim);
  for (int64_t c = 0; c < ldim; ++c)
    for (int64_t r = 0; r < ldim; ++r)
      if (local(r, c) != cd(0, 0)) cols[c].push_back({r, local(r, c)});

  std::vector<Eigen::Triplet<cd>> trips;
  std::vector<int> dg(k);
  for (int64_t idx = 0; idx < sp.dim(); ++idx) {
    int64_t code = sp.code_of(idx);
    int64_t lcol = 0;
    for (int i = 0; i < k; ++i) {
      dg[i] = sp.digit(code, sites[i]);
      lcol = lcol * sp.q + dg[i];
    }
    for (const auto& [lrow, val] : cols[lcol]) {
      int64_t r = lrow, ncode = code;
      for (int i = k - 1; i >= 0; --i) {
        int nd = static_cast<int>(r % sp.q);
        r /= sp.q;
        ncode += (int64_t(nd) - dg[i]) * stride[sites[i]];
      }
      int64_t nidx = sp.index_of(ncode);
      if (nidx < 0) {
        if (std::abs(val) > 1e-14)
          throw std::runtime_error("embed: operator leaves the restricted space");
        continue;
      }
      trips.emplace_back(static_cast<int>(nidx), static_cast<int>(idx), val);
    }
  }
  SpMat out(sp.dim(), sp.dim());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

SpMat translation_op(const Space& sp, const Lattice& lat) {
  if (sp.nsites != lat.n_sites())
    throw std::invalid_argument("translation: space/lattice mismatch");
  std::vector<int64_t> stride(sp.nsites, 1);
  for (int i = sp.nsites - 2; i >= 0; --i) stride[i] = stride[i + 1] * sp.q;

  std::vector<Eigen::Triplet<cd>> trips;
  for (int64_t idx = 0; idx < sp.dim(); ++idx) {
    int64_t code = sp.code_of(idx), ncode = 0;
    // digit at (n,v) of the image equals digit at (n+1,v) of the source
    for (int n = 1; n <= lat.L; ++n)
      for (int v = 1; v <= lat.legs; ++v) {
        int src = lat.site(n % lat.L + 1, v);
        ncode += int64_t(sp.digit(code, src)) * stride[lat.site(n, v)];
      }
    int64_t nidx = sp.index_of(ncode);
    if (nidx < 0) throw std::runtime_error("translation: sector not shift invariant");
    trips.emplace_back(static_cast<int>(nidx), static_cast<int>(idx), cd(1, 0));
  }
  SpMat t(sp.dim(), sp.dim());
  t.setFromTriplets(trips.begin(), trips.end());
  return t;
}

VecC phase_diag(const VecR& w, double theta) {
  VecC d(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    d[i] = std::polar(1.0, theta * w[i]);
  return d;
}

MatC partial_trace(const Space& sp, const VecC& psi, const std::vector<int>& keep) {
  if (psi.size() != sp.dim()) throw std::invalid_argument("partial_trace: size mismatch");
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
    m(a, b) += psi[idx];
  }
  return m * m.adjoint();
}

double trace_norm(const MatC& a) {
  Eigen::JacobiSVD<MatC> svd(a);
  return svd.singularValues().sum();
}

double op_norm(const MatC& a) {
  if (a.rows() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<MatC> es(a.adjoint() * a, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double op_norm(const SpMat& a) { return op_norm(MatC(a)); }

MatC commutator(const MatC& a, const MatC& b) { return a * b - b * a; }

MatC zero_expectation_unitary(const MatC& rho, double tol) {
  const int n = static_cast<int>(rho.rows());
  if (n < 2) throw std::invalid_argument("zero_expectation_unitary: need dim >= 2");
  if ((rho - rho.adjoint()).norm() > 1e-10 * std::max(1.0, rho.norm()))
    throw std::invalid_argument("zero_expectation_unitary: rho not hermitian");

  Eigen::SelfAdjointEigenSolver<MatC> es(rho);
  // nonincreasing eigenvalues
  VecR p(n);
  MatC v(n, n);
  for (int i = 0; i < n; ++i) {
    p[i] = es.eigenvalues()[n - 1 - i];
    v.col(i) = es.eigenvectors().col(n - 1 - i);
  }

  MatC u = MatC::Zero(n, n);
  int start = 0;
  if (n % 2 == 1) {
    // 2x2 block [[a, conj(b)], [b, -conj(a)]] plus a phase on the third
    // state; the constraint is a*p0 - conj(a)*p1 + e^{i phi} p2 = 0.
    double p0 = p[0], p1 = p[1], p2 = p[2];
    cd a, eiphi;
    if (p0 - p1 >= p2 && p0 - p1 > 0) {
      a = -p2 / (p0 - p1);  // real branch
      eiphi = cd(1, 0);
    } else if (p2 <= tol && p0 - p1 <= tol) {
      a = cd(0, 0);
      eiphi = cd(1, 0);
    } else {
      a = cd(0, p2 / (p0 + p1));  // imaginary branch, always admissible
      eiphi = cd(0, -1);
    }
    double b = std::sqrt(std::max(0.0, 1.0 - std::norm(a)));
    u(0, 0) = a;
    u(1, 1) = -std::conj(a);
    u(1, 0) = b;
    u(0, 1) = b;
    u(2, 2) = eiphi;
    start = 3;
  }
  for (int i = start; i + 1 < n; i += 2) {
    u(i, i + 1) = 1;
    u(i + 1, i) = 1;
  }

  MatC out = v * u * v.adjoint();
  if ((out * out.adjoint() - MatC::Identity(n, n)).norm() > 1e-8)
    throw std::runtime_error("zero_expectation_unitary: lost unitarity");
  if (std::abs((rho * out).trace()) > std::max(tol, 1e-10))
    throw std::runtime_error("zero_expectation_unitary: trace did not cancel");
  return out;
}

}  // namespace lsm
