#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spr/dictionary.hpp"
#include "spr/error.hpp"
#include "spr/grid.hpp"
#include "spr/parallel.hpp"
#include "spr/patch.hpp"

namespace spr {

// Sparse code of one patch: atom indices in selection order with the
// least-squares coefficients on that support. uninformative marks a patch
// whose mask left no data to constrain the code.
struct SparseCode {
  std::vector<int> support;
  std::vector<double> coeffs;
  bool uninformative = false;

  int sparsity() const { return static_cast<int>(support.size()); }
};

struct CodingParams {
  double delta = 0.0;  // squared-residual budget
  int max_atoms = 4;   // hard cap on the support size
};

struct CodingReport {
  long coded_patches = 0;
  long uninformative_patches = 0;
  long total_atoms_used = 0;
};

struct DenoiseReport {
  CodingReport coding;
  long uncovered_pixels = 0;  // pixels whose every covering patch was uninformative
};

namespace detail {

// Dense workspace reused across patches by one worker.
struct OmpWorkspace {
  Eigen::MatrixXd dict_rows;   // valid rows of the dictionary
  Eigen::VectorXd target;      // valid rows of the patch
  Eigen::VectorXd residual;
  Eigen::MatrixXd chol;        // lower Cholesky factor of the support Gram
  Eigen::MatrixXd support_atoms;
  Eigen::VectorXd rhs;
  Eigen::VectorXd coef;
  std::vector<char> in_support;
  std::vector<char> ineligible;
};

// Greedy pursuit on (D, z) restricted to rows [0, nrows): pick the atom with
// the largest absolute residual correlation (lowest index on ties), re-solve
// least squares on the support through an incrementally grown Cholesky
// factor, and stop once the squared residual is within delta or the support
// hits max_atoms. Atoms whose addition would make the support Gram
// numerically singular are skipped for the remainder of the patch.
inline SparseCode omp_core(const Eigen::MatrixXd& dict, const Eigen::VectorXd& z,
                           const CodingParams& p, OmpWorkspace& ws) {
  const int nrows = static_cast<int>(dict.rows());
  const int k = static_cast<int>(dict.cols());
  const int cap = std::min(p.max_atoms, std::min(nrows, k));

  SparseCode code;
  if (nrows == 0) {
    code.uninformative = true;
    return code;
  }

  ws.residual = z;
  ws.chol.resize(cap, cap);
  ws.support_atoms.resize(nrows, cap);
  ws.rhs.resize(cap);
  ws.coef.resize(cap);
  ws.in_support.assign(static_cast<std::size_t>(k), 0);
  ws.ineligible.assign(static_cast<std::size_t>(k), 0);
  for (int j = 0; j < k; ++j)
    if (dict.col(j).norm() < 1e-8) ws.ineligible[static_cast<std::size_t>(j)] = 1;

  double res2 = ws.residual.squaredNorm();
  double prev_res2 = res2;

  while (res2 > p.delta && code.sparsity() < cap) {
    // Largest |d_j^T r| over eligible atoms, lowest index wins ties.
    int best = -1;
    double best_abs = 0.0;
    for (int j = 0; j < k; ++j) {
      if (ws.in_support[static_cast<std::size_t>(j)] ||
          ws.ineligible[static_cast<std::size_t>(j)])
        continue;
      const double c = dict.col(j).dot(ws.residual);
      const double a = std::abs(c);
      if (a > best_abs) {
        best_abs = a;
        best = j;
      }
    }
    if (best < 0 || best_abs == 0.0) break;  // nothing correlates; give up

    // Grow the Cholesky factor of the support Gram by one atom.
    const int s = code.sparsity();
    const double gjj = dict.col(best).squaredNorm();
    double piv2 = gjj;
    for (int i = 0; i < s; ++i) {
      double w = dict.col(code.support[static_cast<std::size_t>(i)]).dot(dict.col(best));
      for (int q = 0; q < i; ++q) w -= ws.chol(i, q) * ws.chol(s, q);
      ws.chol(s, i) = w / ws.chol(i, i);
      piv2 -= ws.chol(s, i) * ws.chol(s, i);
    }
    if (!(piv2 > 1e-12 * std::max(gjj, 1e-300))) {
      ws.ineligible[static_cast<std::size_t>(best)] = 1;  // collinear with support
      continue;
    }
    ws.chol(s, s) = std::sqrt(piv2);
    ws.support_atoms.col(s) = dict.col(best);
    ws.in_support[static_cast<std::size_t>(best)] = 1;
    code.support.push_back(best);

    // Least squares on the support: L L^T c = A^T z.
    const int ns = code.sparsity();
    for (int i = 0; i < ns; ++i) ws.rhs(i) = ws.support_atoms.col(i).dot(z);
    for (int i = 0; i < ns; ++i) {
      double v = ws.rhs(i);
      for (int q = 0; q < i; ++q) v -= ws.chol(i, q) * ws.coef(q);
      ws.coef(i) = v / ws.chol(i, i);
    }
    for (int i = ns - 1; i >= 0; --i) {
      double v = ws.coef(i);
      for (int q = i + 1; q < ns; ++q) v -= ws.chol(q, i) * ws.coef(q);
      ws.coef(i) = v / ws.chol(i, i);
    }

    ws.residual = z;
    for (int i = 0; i < ns; ++i) ws.residual -= ws.coef(i) * ws.support_atoms.col(i);
    res2 = ws.residual.squaredNorm();
    if (res2 > prev_res2 + 1e-9 * (1.0 + prev_res2))
      throw degenerate_fit_error("omp: residual increased, support Gram is numerically unsound");
    prev_res2 = res2;
  }

  code.coeffs.resize(code.support.size());
  for (std::size_t i = 0; i < code.coeffs.size(); ++i)
    code.coeffs[i] = ws.coef(static_cast<int>(i));
  return code;
}

inline void check_patch_vector(const Dictionary& d, const Eigen::VectorXd& z) {
  require_shape(d);
  if (z.size() != d.patch_dim)
    throw invalid_argument("patch length " + std::to_string(z.size()) +
                           " does not match dictionary patch_dim " +
                           std::to_string(d.patch_dim));
  for (int i = 0; i < z.size(); ++i)
    if (!std::isfinite(z(i))) throw invalid_argument("omp: non-finite patch value");
}

}  // namespace detail

inline SparseCode omp(const Dictionary& d, const Eigen::VectorXd& z, const CodingParams& p) {
  detail::check_patch_vector(d, z);
  if (p.delta < 0.0 || p.max_atoms < 1)
    throw invalid_argument("omp: delta must be >= 0 and max_atoms >= 1");
  detail::OmpWorkspace ws;
  return detail::omp_core(d.atoms, z, p, ws);
}

// Pursuit on the row-deleted problem: rows with mask 0 are dropped from
// correlations, least squares and the residual budget alike. An all-ones
// mask reduces bit for bit to omp; an all-zero mask yields an empty code
// flagged uninformative.
inline SparseCode masked_omp(const Dictionary& d, const Eigen::VectorXd& z,
                             const Eigen::VectorXd& mask, const CodingParams& p) {
  detail::check_patch_vector(d, z);
  if (mask.size() != z.size())
    throw invalid_argument("masked_omp: mask length does not match patch length");
  if (p.delta < 0.0 || p.max_atoms < 1)
    throw invalid_argument("masked_omp: delta must be >= 0 and max_atoms >= 1");

  int nvalid = 0;
  for (int i = 0; i < mask.size(); ++i) {
    if (mask(i) != 0.0 && mask(i) != 1.0)
      throw invalid_argument("masked_omp: mask entries must be 0 or 1");
    nvalid += mask(i) == 1.0;
  }
  if (nvalid == 0) {
    SparseCode code;
    code.uninformative = true;
    return code;
  }

  detail::OmpWorkspace ws;
  if (nvalid == mask.size()) return detail::omp_core(d.atoms, z, p, ws);

  ws.dict_rows.resize(nvalid, d.atom_count);
  ws.target.resize(nvalid);
  int r = 0;
  for (int i = 0; i < mask.size(); ++i) {
    if (mask(i) != 1.0) continue;
    ws.dict_rows.row(r) = d.atoms.row(i);
    ws.target(r) = z(i);
    ++r;
  }
  return detail::omp_core(ws.dict_rows, ws.target, p, ws);
}

inline Eigen::VectorXd reconstruct(const Dictionary& d, const SparseCode& code) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d.patch_dim);
  for (std::size_t i = 0; i < code.support.size(); ++i)
    out += code.coeffs[i] * d.atoms.col(code.support[i]);
  return out;
}

// Codes every patch against the dictionary with its mask column and returns
// the full reconstructions D*alpha -- including values at masked rows, which
// is where the inpainting happens. Fully masked patches produce zero columns
// and are tallied in the report.
inline PatchMatrix code_all_patches(const Dictionary& d, const PatchMatrix& patches,
                                    const PatchMatrix& mask_patches, const CodingParams& p,
                                    int threads = 1, CodingReport* report = nullptr) {
  require_shape(d);
  if (patches.patch_dim != d.patch_dim)
    throw invalid_argument("code_all_patches: patch_dim mismatch with dictionary");
  if (mask_patches.patch_dim != patches.patch_dim ||
      mask_patches.count() != patches.count())
    throw invalid_argument("code_all_patches: mask patches do not match data patches");

  const long n = patches.count();
  PatchMatrix out;
  out.patch_dim = patches.patch_dim;
  out.edge = patches.edge;
  out.columns.resize(patches.patch_dim, n);

  std::vector<std::uint8_t> uninformative(static_cast<std::size_t>(n), 0);
  std::vector<int> atoms_used(static_cast<std::size_t>(n), 0);

  parallel_for(n, threads, [&](long b, long e) {
    detail::OmpWorkspace ws;
    for (long i = b; i < e; ++i) {
      const Eigen::VectorXd z = patches.columns.col(i);
      const Eigen::VectorXd m = mask_patches.columns.col(i);
      SparseCode code;
      int nvalid = 0;
      for (int q = 0; q < m.size(); ++q) nvalid += m(q) == 1.0;
      if (nvalid == 0) {
        code.uninformative = true;
      } else if (nvalid == m.size()) {
        code = detail::omp_core(d.atoms, z, p, ws);
      } else {
        ws.dict_rows.resize(nvalid, d.atom_count);
        ws.target.resize(nvalid);
        int r = 0;
        for (int q = 0; q < m.size(); ++q) {
          if (m(q) != 1.0) continue;
          ws.dict_rows.row(r) = d.atoms.row(q);
          ws.target(r) = z(q);
          ++r;
        }
        code = detail::omp_core(ws.dict_rows, ws.target, p, ws);
      }
      if (code.uninformative) {
        uninformative[static_cast<std::size_t>(i)] = 1;
        out.columns.col(i).setZero();
      } else {
        out.columns.col(i) = reconstruct(d, code);
        atoms_used[static_cast<std::size_t>(i)] = code.sparsity();
      }
    }
  });

  if (report) {
    report->coded_patches = n;
    for (long i = 0; i < n; ++i) {
      report->uninformative_patches += uninformative[static_cast<std::size_t>(i)];
      report->total_atoms_used += atoms_used[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

// extract -> masked coding -> compose. Every output pixel, masked or not,
// is the average of its patch reconstructions.
inline Grid denoise(const Grid& g, const BitMask& mk, const Dictionary& d,
                    const CodingParams& p, int edge, int threads = 1,
                    DenoiseReport* report = nullptr) {
  require_same_shape(g, mk);
  require_shape(d);
  if (edge * edge != d.patch_dim)
    throw invalid_argument("denoise: edge^2 must equal the dictionary patch_dim");

  const PatchMatrix patches = extract_patches(g, edge);
  const PatchMatrix mask_patches = extract_mask_patches(mk, edge);
  CodingReport coding;
  const PatchMatrix recon =
      code_all_patches(d, patches, mask_patches, p, threads, &coding);

  if (report) {
    report->coding = coding;
    if (coding.uninformative_patches > 0) {
      // A pixel is uncovered when every window containing it was fully masked.
      Grid informative(g.rows, g.cols, 0.0);
      const int per_row = g.cols - edge + 1;
      for (int pi = 0; pi < mask_patches.count(); ++pi) {
        if (mask_patches.columns.col(pi).maxCoeff() != 1.0) continue;
        const int pr = pi / per_row, pc = pi % per_row;
        for (int dr = 0; dr < edge; ++dr)
          for (int dc = 0; dc < edge; ++dc) informative.at(pr + dr, pc + dc) += 1.0;
      }
      for (double v : informative.values) report->uncovered_pixels += (v == 0.0);
    }
  }
  return compose_patches(recon, g.rows, g.cols);
}

// Idealized relative noise attenuation of a p-dimensional projection in an
// m-dimensional patch space.
inline double noise_attenuation_ratio(int p_sparsity, int m) {
  if (m < 1 || p_sparsity < 0 || p_sparsity > m)
    throw invalid_argument("noise_attenuation_ratio: need 0 <= p <= m, m >= 1");
  return static_cast<double>(p_sparsity) / static_cast<double>(m);
}

}  // namespace spr
