#include "lsm/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

namespace lsm {

Geometry geometry_from_string(const std::string& s) {
  if (s == "ring") return Geometry::ring;
  if (s == "ladder") return Geometry::ladder;
  if (s == "cylinder") return Geometry::cylinder;
  throw std::invalid_argument("unknown geometry: " + s);
}

std::string to_string(Geometry g) {
  switch (g) {
    case Geometry::ring: return "ring";
    case Geometry::ladder: return "ladder";
    case Geometry::cylinder: return "cylinder";
  }
  return "?";
}

int Lattice::col_distance(int n1, int n2) const {
  int d = std::abs(n1 - n2);
  return std::min(d, L - d);
}

Lattice Lattice::build(int L, int legs, Geometry kind) {
  if (L < 4) throw std::invalid_argument("lattice: L must be >= 4");
  if (L % 2 != 0) throw std::invalid_argument("lattice: L must be even");
  if (legs < 1) throw std::invalid_argument("lattice: legs must be >= 1");
  if (kind == Geometry::ring && legs != 1)
    throw std::invalid_argument("lattice: ring requires legs == 1");
  if (kind != Geometry::ring && legs < 2)
    throw std::invalid_argument("lattice: ladder/cylinder require legs >= 2");

  Lattice lat;
  lat.L = L;
  lat.legs = legs;
  lat.kind = kind;
  lat.dim_label = (kind == Geometry::ring) ? 1 : 2;

  std::set<std::array<int, 2>> es;
  auto add = [&](int a, int b) {
    if (a == b) return;
    es.insert({std::min(a, b), std::max(a, b)});
  };
  for (int n = 1; n <= L; ++n) {
    int np = (n % L) + 1;  // periodic neighbour in the 1-direction
    for (int v = 1; v <= legs; ++v) {
      add(lat.site(n, v), lat.site(np, v));
      if (v < legs) add(lat.site(n, v), lat.site(n, v + 1));
    }
    if (kind == Geometry::cylinder && legs > 2)
      add(lat.site(n, legs), lat.site(n, 1));
  }
  lat.edges.assign(es.begin(), es.end());

  const int N = lat.n_sites();
  std::vector<std::vector<int>> adj(N);
  for (const auto& e : lat.edges) {
    adj[e[0]].push_back(e[1]);
    adj[e[1]].push_back(e[0]);
  }

  lat.dist.setConstant(N, N, -1);
  for (int s0 = 0; s0 < N; ++s0) {
    std::queue<int> q;
    q.push(s0);
    lat.dist(s0, s0) = 0;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int w : adj[u])
        if (lat.dist(s0, w) < 0) {
          lat.dist(s0, w) = lat.dist(s0, u) + 1;
          q.push(w);
        }
    }
  }
  if ((lat.dist.array() < 0).any())
    throw std::runtime_error("lattice: bond graph is not connected");
  return lat;
}

double DecayFunction::F(double x) const { return std::pow(1.0 + x, -power); }

double DecayFunction::F_weighted(double x) const {
  return std::exp(-lambda * x) * F(x);
}

DecayConstants decay_constants(const Lattice& lat, const DecayFunction& f) {
  const int N = lat.n_sites();
  DecayConstants c;
  for (int x = 0; x < N; ++x) {
    double s = 0, sl = 0;
    for (int y = 0; y < N; ++y) {
      s += f.F(lat.distance(x, y));
      sl += f.F_weighted(lat.distance(x, y));
    }
    c.normF = std::max(c.normF, s);
    c.normF_lambda = std::max(c.normF_lambda, sl);
  }
  for (int x = 0; x < N; ++x)
    for (int y = 0; y < N; ++y) {
      double s = 0, sl = 0;
      for (int z = 0; z < N; ++z) {
        s += f.F(lat.distance(x, z)) * f.F(lat.distance(z, y));
        sl += f.F_weighted(lat.distance(x, z)) * f.F_weighted(lat.distance(z, y));
      }
      c.CF = std::max(c.CF, s / f.F(lat.distance(x, y)));
      c.CF_lambda = std::max(c.CF_lambda, sl / f.F_weighted(lat.distance(x, y)));
    }
  return c;
}

}  // namespace lsm
