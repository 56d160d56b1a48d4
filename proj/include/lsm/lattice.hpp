#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lsm {

enum class Geometry { ring, ladder, cylinder };

Geometry geometry_from_string(const std::string& s);
std::string to_string(Geometry g);

// Finite strip [1,L] x [1,legs], periodic in the 1-direction. Sites are
// indexed lexicographically by (n,v) with n major, so idx = (n-1)*legs + (v-1).
// The metric is the graph distance on the bond graph.
struct Lattice {
  int L = 0;
  int legs = 1;
  Geometry kind = Geometry::ring;
  int dim_label = 1;  // 1 for rings, 2 for ladders and cylinders

  std::vector<std::array<int, 2>> edges;  // deduplicated, each {a,b} with a<b
  Eigen::MatrixXi dist;                   // all-pairs graph distance

  static Lattice build(int L, int legs, Geometry kind);

  int n_sites() const { return L * legs; }
  int site(int n, int v) const { return (n - 1) * legs + (v - 1); }
  int col(int s) const { return s / legs + 1; }
  int leg(int s) const { return s % legs + 1; }
  int distance(int a, int b) const { return dist(a, b); }

  // periodic distance between column indices (both in 1..L)
  int col_distance(int n1, int n2) const;
};

// F(x) = (1+x)^{-power} and its exponentially weighted version
// F_lambda(x) = exp(-lambda*x) * F(x).
struct DecayFunction {
  double power = 2.0;   // defaults to dim_label + 1
  double lambda = 1.0;

  double F(double x) const;         // bare
  double F_weighted(double x) const;  // with exp(-lambda x)
};

// normF   = sup_x sum_y F(d(x,y))
// CF      = sup_{x,y} sum_z F(d(x,z)) F(d(z,y)) / F(d(x,y))
// and the same two sums for F_lambda.
struct DecayConstants {
  double normF = 0;
  double CF = 0;
  double normF_lambda = 0;
  double CF_lambda = 0;
};

DecayConstants decay_constants(const Lattice& lat, const DecayFunction& f);

}  // namespace lsm
