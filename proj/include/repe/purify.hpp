#pragma once

// Removes confounder components from a concept direction:
//   z = (I - P_O) v,  z_hat = z / |z|
// with P_O the orthogonal projector onto span(confounders).

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "repe/bundle.hpp"
#include "repe/common.hpp"
#include "repe/extract.hpp"

namespace repe {

inline constexpr double rank_rel_tol = 1e-8;
inline constexpr double purify_residual_tol = 1e-8;

struct PurifiedVector {
  Factor factor = Factor::superiority;
  std::size_t layer = 0;
  Vec direction;
  std::vector<Factor> confounders;
  double residual_norm_before_renorm = 0;
};

/// Orthonormal basis (columns) of span(vectors), via SVD. Singular values below
/// rank_rel_tol * s_max are treated as zero.
inline Mat confounder_basis(std::span<const Vec> vectors) {
  if (vectors.empty()) throw Error(ErrorKind::invalid_argument, "confounder_basis: no vectors");
  const auto d = vectors.front().size();
  Mat a(d, static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    if (vectors[j].size() != d) throw Error(ErrorKind::invalid_argument, "confounder_basis: dimension mismatch");
    a.col(static_cast<Eigen::Index>(j)) = vectors[j];
  }
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || !(s[0] > 0)) throw Error(ErrorKind::degenerate, "confounder_basis: all input vectors are zero");
  Eigen::Index rank = 0;
  while (rank < s.size() && s[rank] > rank_rel_tol * s[0]) ++rank;
  return svd.matrixU().leftCols(rank);
}

/// Projects `target` onto the orthogonal complement of the confounders and re-normalizes.
inline PurifiedVector orthogonalize(const ConceptVector& target, std::span<const ConceptVector> confounders) {
  PurifiedVector out;
  out.factor = target.factor;
  out.layer = target.layer;
  std::vector<Vec> vs;
  for (const auto& c : confounders) {
    if (c.factor == target.factor) throw Error(ErrorKind::invalid_argument, "orthogonalize: target listed among its confounders");
    if (c.layer != target.layer || c.direction.size() != target.direction.size())
      throw Error(ErrorKind::invalid_argument, "orthogonalize: confounders must share the target's layer and dimension");
    vs.push_back(c.direction);
    out.confounders.push_back(c.factor);
  }
  std::sort(out.confounders.begin(), out.confounders.end());
  Vec z = target.direction;
  if (!vs.empty()) {
    const Mat basis = confounder_basis(vs);
    z -= basis * (basis.transpose() * z);
  }
  out.residual_norm_before_renorm = z.norm();
  if (!(out.residual_norm_before_renorm >= purify_residual_tol))
    throw Error(ErrorKind::degenerate, std::string("purification of ") + std::string(factor_name(target.factor)) + " at layer " +
                                           std::to_string(target.layer) + " leaves no residual: target lies in the confounder span");
  out.direction = z / out.residual_norm_before_renorm;
  return out;
}

/// The confounders for factor t: the other operationalized antecedents (never jealousy).
inline std::vector<Factor> confounders_of(Factor t) {
  std::vector<Factor> out;
  for (Factor f : antecedent_factors)
    if (f != t) out.push_back(f);
  return out;
}

struct PurifyOutcome {
  VectorBundle bundle;
  std::vector<std::string> failures; // "factor@layer: reason"
};

/// Purifies every antecedent direction of a raw bundle, layer by layer. Layers
/// missing any antecedent vector are skipped and reported.
inline PurifyOutcome purify_bundle(const VectorBundle& raw) {
  PurifyOutcome out;
  out.bundle.kind = "purified";
  out.bundle.dim = raw.dim;
  std::set<std::size_t> layers;
  for (const auto& e : raw.entries) layers.insert(e.layer);
  for (std::size_t layer : layers) {
    for (Factor t : antecedent_factors) {
      const auto* target = raw.find(t, layer);
      std::vector<ConceptVector> conf;
      bool complete = target != nullptr;
      for (Factor c : confounders_of(t)) {
        const auto* e = raw.find(c, layer);
        if (!e) complete = false;
        else conf.push_back(from_bundle_entry(*e));
      }
      if (!complete) {
        out.failures.push_back(std::string(factor_name(t)) + "@" + std::to_string(layer) + ": missing raw vector");
        continue;
      }
      try {
        const auto p = orthogonalize(from_bundle_entry(*target), conf);
        BundleEntry e;
        e.factor = t;
        e.layer = layer;
        e.direction = p.direction;
        e.n_pairs_used = target->n_pairs_used;
        e.source_hash = target->source_hash;
        e.confounders = p.confounders;
        e.residual_norm = p.residual_norm_before_renorm;
        out.bundle.entries.push_back(std::move(e));
      } catch (const Error& err) {
        out.failures.push_back(std::string(factor_name(t)) + "@" + std::to_string(layer) + ": " + err.what());
      }
    }
  }
  return out;
}

} // namespace repe
