#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "spr/dictionary.hpp"
#include "spr/error.hpp"
#include "spr/parallel.hpp"
#include "spr/patch.hpp"
#include "spr/rng.hpp"

namespace spr {

struct LearnConfig {
  double lambda = 0.11;
  int atom_count = 64;
  int batch_size = 256;
  int epochs = 5;
  std::uint64_t seed = 0;
  double tol = 1e-8;  // coding convergence tolerance
  int threads = 1;
};

// Online-learning state: the dictionary plus the surrogate sufficient
// statistics A = sum alpha alpha^T and B = sum z alpha^T over all batches
// seen so far (Mairal et al. 2009 style).
struct LearnState {
  Dictionary dictionary;
  Eigen::MatrixXd A;  // k x k, symmetric PSD
  Eigen::MatrixXd B;  // m x k
  long batches_seen = 0;
};

struct UpdateStats {
  int reseeded_atoms = 0;
};

struct LearnReport {
  long clean_patches = 0;
  long discarded_patches = 0;
  long validation_patches = 0;
  long reseeds = 0;
  double objective_init = 0.0;
  double objective_final = 0.0;
  // Per dictionary_update, the surrogate against the same statistics just
  // before and just after the atom pass; after <= before except when a dead
  // atom was reseeded (reseed_trace says how many were).
  std::vector<double> surrogate_before;
  std::vector<double> surrogate_after;
  std::vector<int> reseed_trace;
};

namespace detail {

inline double soft_threshold(double x, double lambda) {
  if (x > lambda) return x - lambda;
  if (x < -lambda) return x + lambda;
  return 0.0;
}

// Cyclic coordinate descent on 0.5*||z - D a||^2 + lambda*||a||_1 expressed
// through the Gram matrix G = D^T D and correlations b = D^T z. The running
// vector c = b - G a is refreshed from scratch on a fixed schedule to stop
// incremental drift. Coordinate order is 0..k-1; stops when no coefficient
// moved by tol or more during a sweep.
inline Eigen::VectorXd lasso_cd(const Eigen::MatrixXd& gram, const Eigen::VectorXd& corr,
                                double lambda, double tol) {
  const int k = static_cast<int>(gram.cols());
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd c = corr;
  constexpr int kMaxSweeps = 20000;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (sweep > 0 && sweep % 64 == 0) c = corr - gram * alpha;
    double max_change = 0.0;
    for (int j = 0; j < k; ++j) {
      const double gjj = gram(j, j);
      if (gjj <= 0.0) continue;  // zero atom never enters the code
      const double rho = c(j) + gjj * alpha(j);
      const double next = soft_threshold(rho, lambda) / gjj;
      const double delta = next - alpha(j);
      if (delta != 0.0) {
        c -= gram.col(j) * delta;
        alpha(j) = next;
        const double a = std::abs(delta);
        if (a > max_change) max_change = a;
      }
    }
    if (max_change < tol) break;
  }
  return alpha;
}

inline double patch_objective(const Dictionary& d, const Eigen::VectorXd& z,
                              const Eigen::VectorXd& alpha, double lambda) {
  const double resid = (z - d.atoms * alpha).squaredNorm();
  return 0.5 * resid + lambda * alpha.lpNorm<1>();
}

}  // namespace detail

// Seeds the dictionary with k distinct nonzero patches scaled to unit norm.
inline Dictionary init_dictionary(const PatchMatrix& patches, int k, std::uint64_t seed) {
  if (k < 1) throw invalid_argument("init_dictionary: atom count must be >= 1");
  std::vector<int> nonzero;
  nonzero.reserve(static_cast<std::size_t>(patches.count()));
  for (int i = 0; i < patches.count(); ++i)
    if (patches.columns.col(i).norm() > 0.0) nonzero.push_back(i);
  if (static_cast<int>(nonzero.size()) < k)
    throw insufficient_data_error("init_dictionary: only " +
                                  std::to_string(nonzero.size()) +
                                  " nonzero patches available for " + std::to_string(k) +
                                  " atoms");
  SeededRng rng(seed);
  Dictionary d;
  d.patch_dim = patches.patch_dim;
  d.atom_count = k;
  d.atoms.resize(patches.patch_dim, k);
  // Partial Fisher-Yates: the first k entries become the sample.
  for (int i = 0; i < k; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        static_cast<std::size_t>(rng.below(nonzero.size() - static_cast<std::size_t>(i)));
    std::swap(nonzero[static_cast<std::size_t>(i)], nonzero[j]);
    const Eigen::VectorXd col = patches.columns.col(nonzero[static_cast<std::size_t>(i)]);
    d.atoms.col(i) = col / col.norm();
  }
  return d;
}

// l1-regularized code of one patch. The returned vector satisfies the lasso
// subgradient conditions to within a small multiple of tol.
inline Eigen::VectorXd lasso_code(const Dictionary& d, const Eigen::VectorXd& z,
                                  double lambda, double tol) {
  require_shape(d);
  if (z.size() != d.patch_dim)
    throw invalid_argument("lasso_code: patch length does not match dictionary");
  for (int i = 0; i < z.size(); ++i)
    if (!std::isfinite(z(i))) throw invalid_argument("lasso_code: non-finite patch value");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw invalid_argument("lasso_code: lambda must be finite and nonnegative");
  if (!(tol > 0.0)) throw invalid_argument("lasso_code: tol must be positive");
  const Eigen::MatrixXd gram = d.atoms.transpose() * d.atoms;
  const Eigen::VectorXd corr = d.atoms.transpose() * z;
  return detail::lasso_cd(gram, corr, lambda, tol);
}

// Largest violation of the lasso optimality conditions; test hook and
// convergence diagnostic.
inline double lasso_kkt_residual(const Dictionary& d, const Eigen::VectorXd& z,
                                 const Eigen::VectorXd& alpha, double lambda) {
  const Eigen::VectorXd corr = d.atoms.transpose() * (z - d.atoms * alpha);
  double worst = 0.0;
  for (int j = 0; j < d.atom_count; ++j) {
    const double v = alpha(j) == 0.0 ? std::max(0.0, std::abs(corr(j)) - lambda)
                                     : std::abs(corr(j) - lambda * (alpha(j) > 0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

// Quadratic surrogate tracked by the online learner:
//   0.5 * tr(D^T D A) - tr(D^T B).
inline double surrogate_value(const LearnState& state) {
  const Eigen::MatrixXd& d = state.dictionary.atoms;
  return 0.5 * (d * state.A).cwiseProduct(d).sum() - d.cwiseProduct(state.B).sum();
}

// One block-coordinate pass over the atoms against the surrogate statistics.
// Each visited atom is set to the exact constrained minimizer of the
// surrogate in that coordinate, so the surrogate cannot increase. Atoms with
// no accumulated usage (A_jj ~ 0) are reseeded from the worst-represented
// column of the supplied batch; reseeds are counted in stats.
inline void dictionary_update(LearnState& state, const Eigen::MatrixXd* batch = nullptr,
                              const Eigen::MatrixXd* codes = nullptr,
                              UpdateStats* stats = nullptr) {
  if (state.batches_seen < 1)
    throw invalid_argument("dictionary_update: no batches accumulated yet");
  Dictionary& dict = state.dictionary;
  require_shape(dict);
  const int k = dict.atom_count;
  if (state.A.rows() != k || state.A.cols() != k || state.B.rows() != dict.patch_dim ||
      state.B.cols() != k)
    throw invalid_argument("dictionary_update: statistic shapes disagree with dictionary");

  const double eps = 1e-12 * std::max(1.0, state.A.trace() / k);

  // Residuals for dead-atom reseeding, ranked once against the entry
  // dictionary; each dead atom takes the next worst column.
  std::vector<int> reseed_order;
  std::size_t next_reseed = 0;
  if (batch && codes) {
    std::vector<double> res2(static_cast<std::size_t>(batch->cols()));
    for (int i = 0; i < batch->cols(); ++i)
      res2[static_cast<std::size_t>(i)] =
          (batch->col(i) - dict.atoms * codes->col(i)).squaredNorm();
    reseed_order.resize(res2.size());
    std::iota(reseed_order.begin(), reseed_order.end(), 0);
    std::stable_sort(reseed_order.begin(), reseed_order.end(),
                     [&](int a, int b) { return res2[static_cast<std::size_t>(a)] >
                                                res2[static_cast<std::size_t>(b)]; });
  }

  for (int j = 0; j < k; ++j) {
    const double ajj = state.A(j, j);
    if (ajj > eps) {
      const Eigen::VectorXd u =
          dict.atoms.col(j) + (state.B.col(j) - dict.atoms * state.A.col(j)) / ajj;
      const double nrm = u.norm();
      dict.atoms.col(j) = nrm > 1.0 ? Eigen::VectorXd(u / nrm) : u;
    } else if (next_reseed < reseed_order.size()) {
      const Eigen::VectorXd z = batch->col(reseed_order[next_reseed++]);
      const double nrm = z.norm();
      if (nrm > 0.0) {
        dict.atoms.col(j) = z / nrm;
        if (stats) ++stats->reseeded_atoms;
      }
    }
  }
}

// Objective of the full sparse-factorization problem on a patch set, with
// codes obtained by lasso_code at a tight fixed tolerance.
inline double objective_value(const Dictionary& d, const PatchMatrix& patches,
                              double lambda) {
  require_shape(d);
  if (patches.patch_dim != d.patch_dim)
    throw invalid_argument("objective_value: patch_dim mismatch");
  const Eigen::MatrixXd gram = d.atoms.transpose() * d.atoms;
  double total = 0.0;
  for (int i = 0; i < patches.count(); ++i) {
    const Eigen::VectorXd z = patches.columns.col(i);
    const Eigen::VectorXd alpha =
        detail::lasso_cd(gram, d.atoms.transpose() * z, lambda, 1e-9);
    total += detail::patch_objective(d, z, alpha, lambda);
  }
  return total;
}

// Online dictionary learning over the fully-valid patches: seeded mini-batch
// schedule, lasso coding per patch, sufficient-statistics accumulation and a
// block dictionary update per batch. Patches whose mask column contains any
// zero are discarded before anything else happens.
inline Dictionary learn(const PatchMatrix& patches, const PatchMatrix& mask_patches,
                        const LearnConfig& cfg, LearnReport* report = nullptr) {
  if (patches.count() != mask_patches.count() ||
      patches.patch_dim != mask_patches.patch_dim)
    throw invalid_argument("learn: mask patches do not match data patches");
  if (!(cfg.lambda > 0.0)) throw invalid_argument("learn: lambda must be positive");
  if (cfg.atom_count < 1 || cfg.batch_size < 1 || cfg.epochs < 0 || !(cfg.tol > 0.0))
    throw invalid_argument("learn: bad hyperparameters");

  std::vector<int> clean;
  clean.reserve(static_cast<std::size_t>(patches.count()));
  for (int i = 0; i < patches.count(); ++i)
    if (mask_patches.columns.col(i).minCoeff() == 1.0) clean.push_back(i);
  const long discarded = patches.count() - static_cast<long>(clean.size());
  if (static_cast<int>(clean.size()) < cfg.atom_count)
    throw insufficient_data_error(
        "learn: only " + std::to_string(clean.size()) + " outlier-free patches for " +
        std::to_string(cfg.atom_count) +
        " atoms; shrink the patch edge or fix the mask");

  PatchMatrix clean_pm;
  clean_pm.patch_dim = patches.patch_dim;
  clean_pm.edge = patches.edge;
  clean_pm.columns.resize(patches.patch_dim, static_cast<long>(clean.size()));
  for (std::size_t i = 0; i < clean.size(); ++i)
    clean_pm.columns.col(static_cast<long>(i)) = patches.columns.col(clean[i]);

  LearnState state;
  state.dictionary = init_dictionary(clean_pm, cfg.atom_count, cfg.seed);
  const int k = cfg.atom_count;
  const int m = patches.patch_dim;
  state.A = Eigen::MatrixXd::Zero(k, k);
  state.B = Eigen::MatrixXd::Zero(m, k);

  // Held-out split used only for before/after objective reporting.
  std::vector<int> order(clean.size());
  std::iota(order.begin(), order.end(), 0);
  SeededRng split_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  split_rng.shuffle(order);
  const long nval = std::min<long>(static_cast<long>(order.size()) / 10, 2048);
  std::vector<int> val_idx(order.begin(), order.begin() + nval);
  std::vector<int> train_idx(order.begin() + nval, order.end());
  if (static_cast<int>(train_idx.size()) < k) {
    train_idx = order;  // tiny corpus: train on everything, skip the split
    val_idx.clear();
  }

  PatchMatrix val_pm;
  val_pm.patch_dim = m;
  val_pm.edge = patches.edge;
  val_pm.columns.resize(m, static_cast<long>(val_idx.size()));
  for (std::size_t i = 0; i < val_idx.size(); ++i)
    val_pm.columns.col(static_cast<long>(i)) = clean_pm.columns.col(val_idx[i]);

  if (report) {
    report->clean_patches = static_cast<long>(clean.size());
    report->discarded_patches = discarded;
    report->validation_patches = static_cast<long>(val_idx.size());
    report->objective_init =
        val_idx.empty() ? 0.0 : objective_value(state.dictionary, val_pm, cfg.lambda);
  }

  SeededRng rng(cfg.seed);
  Eigen::MatrixXd batch(m, cfg.batch_size);
  Eigen::MatrixXd codes(k, cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(train_idx);
    for (std::size_t off = 0; off < train_idx.size();
         off += static_cast<std::size_t>(cfg.batch_size)) {
      const long bs =
          std::min<long>(cfg.batch_size, static_cast<long>(train_idx.size() - off));
      for (long i = 0; i < bs; ++i)
        batch.col(i) = clean_pm.columns.col(train_idx[off + static_cast<std::size_t>(i)]);

      const Eigen::MatrixXd gram =
          state.dictionary.atoms.transpose() * state.dictionary.atoms;
      parallel_for(bs, cfg.threads, [&](long b, long e) {
        for (long i = b; i < e; ++i)
          codes.col(i) = detail::lasso_cd(
              gram, state.dictionary.atoms.transpose() * batch.col(i), cfg.lambda, cfg.tol);
      });

      const auto batch_block = batch.leftCols(bs);
      const auto code_block = codes.leftCols(bs);
      state.A.noalias() += code_block * code_block.transpose();
      state.B.noalias() += batch_block * code_block.transpose();
      ++state.batches_seen;

      UpdateStats stats;
      const Eigen::MatrixXd batch_copy = batch_block;
      const Eigen::MatrixXd code_copy = code_block;
      const double before = report ? surrogate_value(state) : 0.0;
      dictionary_update(state, &batch_copy, &code_copy, &stats);
      if (report) {
        report->reseeds += stats.reseeded_atoms;
        report->surrogate_before.push_back(before);
        report->surrogate_after.push_back(surrogate_value(state));
        report->reseed_trace.push_back(stats.reseeded_atoms);
      }
    }
  }

  if (report)
    report->objective_final =
        val_idx.empty() ? 0.0 : objective_value(state.dictionary, val_pm, cfg.lambda);
  return state.dictionary;
}

}  // namespace spr
