#pragma once

#include <Eigen/Dense>
#include <string>

#include "spr/error.hpp"

namespace spr {

// Learned dictionary: one atom per column, every atom inside the unit
// l2 ball (the constraint set that keeps the factorization bounded).
struct Dictionary {
  int patch_dim = 0;   // m
  int atom_count = 0;  // k
  Eigen::MatrixXd atoms;  // patch_dim x atom_count

  static Dictionary identity(int m) {
    Dictionary d;
    d.patch_dim = m;
    d.atom_count = m;
    d.atoms = Eigen::MatrixXd::Identity(m, m);
    return d;
  }
};

inline double max_atom_norm(const Dictionary& d) {
  double mx = 0.0;
  for (int j = 0; j < d.atom_count; ++j) mx = std::max(mx, d.atoms.col(j).norm());
  return mx;
}

inline void require_atom_constraint(const Dictionary& d) {
  const double mx = max_atom_norm(d);
  if (mx > 1.0 + 1e-12)
    throw invalid_argument("dictionary violates the unit-ball atom constraint, max norm " +
                           std::to_string(mx));
}

inline void require_shape(const Dictionary& d) {
  if (d.patch_dim <= 0 || d.atom_count <= 0 || d.atoms.rows() != d.patch_dim ||
      d.atoms.cols() != d.atom_count)
    throw invalid_argument("dictionary shape fields disagree with the atom matrix");
}

}  // namespace spr
