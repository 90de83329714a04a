#include "recfair/recourse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "recfair/math.hpp"
#include "recfair/parallel.hpp"
#include "recfair/rng.hpp"

namespace recfair {

double CostFunction::operator()(const Vector& x, const Vector& x_cf) const {
  if (x.size() != x_cf.size()) throw std::invalid_argument("cost: length mismatch");
  const Array diff = (x_cf - x).array();
  const double raw = norm == Norm::L2 ? std::sqrt(diff.square().sum()) : diff.abs().sum();
  return scale * raw;
}

double eval_cost(const Vector& x, const Vector& x_cf) {
  if (x.size() != x_cf.size()) throw std::invalid_argument("eval_cost: length mismatch");
  return 100.0 * (x_cf - x).norm();
}

void GsConfig::validate() const {
  if (samples_per_shell < 1 || max_shells < 1 || shrink_steps < 0)
    throw std::invalid_argument("gs config: counts must be positive");
  if (!(initial_radius > 0.0)) throw std::invalid_argument("gs config: initial_radius must be > 0");
  if (!(growth > 1.0)) throw std::invalid_argument("gs config: growth must be > 1");
}

void WtConfig::validate() const {
  if (!(step_size > 0.0) || !(lambda > 0.0))
    throw std::invalid_argument("wt config: step_size and lambda must be > 0");
  if (max_iter < 1) throw std::invalid_argument("wt config: max_iter must be >= 1");
}

namespace {

std::vector<Index> mutable_indices(const std::vector<bool>& mask, Index d) {
  std::vector<Index> idx;
  if (mask.empty()) {
    for (Index j = 0; j < d; ++j) idx.push_back(j);
    return idx;
  }
  if (static_cast<Index>(mask.size()) != d)
    throw std::invalid_argument("recourse: mask length does not match feature width");
  for (Index j = 0; j < d; ++j) {
    if (mask[static_cast<std::size_t>(j)]) idx.push_back(j);
  }
  return idx;
}

// Uniform sample in the annulus a <= r <= b of the mutable-coordinate
// subspace, clamped into the unit box.
Matrix sample_annulus(const Vector& x, const std::vector<Index>& mut, double a, double b,
                      int count, Rng& rng) {
  const auto k = static_cast<double>(mut.size());
  Matrix batch(count, x.size());
  Vector dir(static_cast<Index>(mut.size()));
  for (int s = 0; s < count; ++s) {
    batch.row(s) = x.transpose();
    for (Index j = 0; j < dir.size(); ++j) dir[j] = rng.normal();
    const double len = dir.norm();
    if (len == 0.0) continue;
    const double u = rng.uniform();
    const double ak = std::pow(a, k);
    const double bk = std::pow(b, k);
    const double r = std::pow(ak + u * (bk - ak), 1.0 / k);
    for (std::size_t j = 0; j < mut.size(); ++j) {
      const Index col = mut[j];
      batch(s, col) = std::clamp(x[col] + r * dir[static_cast<Index>(j)] / len, 0.0, 1.0);
    }
  }
  return batch;
}

// Nearest positively classified row of a candidate batch, if any.
bool nearest_positive(const Model& m, const Matrix& batch, const Vector& x, Vector& best,
                      double& best_dist) {
  const Vector p = predict_proba(m, batch);
  bool found = false;
  for (Index i = 0; i < batch.rows(); ++i) {
    if (p[i] < 0.5) continue;
    const double dist = (batch.row(i).transpose() - x).norm();
    if (!found || dist < best_dist) {
      best = batch.row(i).transpose();
      best_dist = dist;
      found = true;
    }
  }
  return found;
}

}  // namespace

RecourseResult growing_spheres(const Model& m, const Vector& x, const GsConfig& cfg,
                               const std::vector<bool>& mask) {
  cfg.validate();
  RecourseResult result;
  result.method = "gs";
  result.counterfactual = x;

  if (predict(m, x) == 1) {
    result.success = true;
    return result;
  }
  const auto mut = mutable_indices(mask, x.size());
  if (mut.empty()) return result;

  Rng rng(cfg.seed);
  Vector best;
  double best_dist = 0.0;
  bool found = false;
  double inner = 0.0;
  double outer = cfg.initial_radius;
  int shells = 0;
  while (shells < cfg.max_shells) {
    ++shells;
    const Matrix batch = sample_annulus(x, mut, inner, outer, cfg.samples_per_shell, rng);
    if (nearest_positive(m, batch, x, best, best_dist)) {
      found = true;
      break;
    }
    inner = outer;
    outer *= cfg.growth;
  }
  result.iterations = shells;
  if (!found) return result;

  // Shrink phase: bisect on the radius below the hit, keeping the nearest
  // positive sample seen.
  double lo = inner;
  double hi = best_dist;
  for (int step = 0; step < cfg.shrink_steps && hi > lo; ++step) {
    ++result.iterations;
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo)) break;
    const Matrix batch = sample_annulus(x, mut, lo, mid, cfg.samples_per_shell, rng);
    Vector cand;
    double cand_dist = 0.0;
    if (nearest_positive(m, batch, x, cand, cand_dist)) {
      if (cand_dist < best_dist) {
        best = cand;
        best_dist = cand_dist;
      }
      hi = std::min(hi, cand_dist);
    } else {
      lo = mid;
    }
  }

  result.counterfactual = best;
  result.success = true;
  result.cost = eval_cost(x, best);
  return result;
}

RecourseResult wachter(const Model& m, const Vector& x, const WtConfig& cfg,
                       const std::vector<bool>& mask) {
  cfg.validate();
  RecourseResult result;
  result.method = "wt";
  result.counterfactual = x;

  if (predict(m, x, cfg.decision_threshold) == 1) {
    result.success = true;
    return result;
  }
  const auto mut = mutable_indices(mask, x.size());

  Vector xp = x;
  const double shrink = cfg.step_size * cfg.lambda;
  for (int it = 0; it < cfg.max_iter; ++it) {
    const double p = predict_proba(m, xp);
    if (p >= cfg.decision_threshold) break;
    result.iterations = it + 1;

    const Vector grad = 2.0 * (p - cfg.target_prob) * input_gradient(m, xp);
    for (const Index j : mut) {
      // Gradient step on the smooth part, then soft-threshold toward x for
      // the L1 term.
      const double u = xp[j] - cfg.step_size * grad[j];
      double v = x[j] + soft_threshold(u - x[j], shrink);
      if (cfg.clamp) v = std::clamp(v, 0.0, 1.0);
      if (!std::isfinite(v))
        throw std::runtime_error("wachter: non-finite iterate; check model parameters");
      xp[j] = v;
    }
  }

  result.counterfactual = xp;
  result.success = predict(m, xp, cfg.decision_threshold) == 1;
  result.cost = eval_cost(x, xp);
  return result;
}

std::string method_name(MethodKind kind) {
  return kind == MethodKind::GrowingSpheres ? "gs" : "wt";
}

MethodKind method_from_name(const std::string& name) {
  if (name == "gs") return MethodKind::GrowingSpheres;
  if (name == "wt") return MethodKind::Wachter;
  throw std::invalid_argument("unknown recourse method '" + name + "' (expected gs or wt)");
}

RecourseResult run_recourse(const Model& m, const Vector& x, const RecourseSpec& spec,
                            const std::vector<bool>& mask, seed_t row_salt) {
  if (spec.method == MethodKind::GrowingSpheres) {
    GsConfig cfg = spec.gs;
    cfg.seed = derive_seed(spec.seed, row_salt);
    return growing_spheres(m, x, cfg, mask);
  }
  return wachter(m, x, spec.wt, mask);
}

PopulationRecourse recourse_costs_population(const Model& m, const Matrix& X,
                                             const RecourseSpec& spec,
                                             const std::vector<bool>& mask) {
  const Index n = X.rows();
  PopulationRecourse out;
  out.costs = Vector::Zero(n);
  out.success.assign(static_cast<std::size_t>(n), 1);
  out.needed.assign(static_cast<std::size_t>(n), 0);
  out.iterations.assign(static_cast<std::size_t>(n), 0);

  const Eigen::VectorXi preds = predict(m, X);
  parallel_for(n, [&](Index i) {
    if (preds[i] == 1) return;
    out.needed[static_cast<std::size_t>(i)] = 1;
    const RecourseResult r =
        run_recourse(m, X.row(i).transpose(), spec, mask, static_cast<seed_t>(i));
    out.costs[i] = r.cost;
    out.success[static_cast<std::size_t>(i)] = r.success ? 1 : 0;
    out.iterations[static_cast<std::size_t>(i)] = r.iterations;
  });

  Index needed_count = 0;
  double max_success_cost = 0.0;
  bool any_success_cost = false;
  for (Index i = 0; i < n; ++i) {
    if (!out.needed[static_cast<std::size_t>(i)]) continue;
    ++needed_count;
    if (out.success[static_cast<std::size_t>(i)]) {
      max_success_cost = std::max(max_success_cost, out.costs[i]);
      any_success_cost = true;
    } else {
      ++out.failures;
    }
  }

  if (out.failures > 0) {
    double penalty = 0.0;
    switch (spec.on_failure) {
      case FailurePolicy::MaxObserved:
        penalty = any_success_cost ? max_success_cost
                                   : 100.0 * std::sqrt(static_cast<double>(X.cols()));
        break;
      case FailurePolicy::BoxDiameter:
        penalty = 100.0 * std::sqrt(static_cast<double>(X.cols()));
        break;
      case FailurePolicy::Zero:
        penalty = 0.0;
        break;
    }
    for (Index i = 0; i < n; ++i) {
      if (out.needed[static_cast<std::size_t>(i)] && !out.success[static_cast<std::size_t>(i)])
        out.costs[i] = penalty;
    }
  }
  out.failure_rate =
      needed_count > 0 ? static_cast<double>(out.failures) / static_cast<double>(needed_count)
                       : 0.0;
  return out;
}

void write_recourse_trace(const std::string& path, const Matrix& X,
                          const std::vector<RecourseResult>& results) {
  if (static_cast<Index>(results.size()) != X.rows())
    throw std::invalid_argument("trace: result count does not match rows");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);

  out << "row,method,success,iterations,cost";
  for (Index j = 0; j < X.cols(); ++j) out << ",x_" << j;
  for (Index j = 0; j < X.cols(); ++j) out << ",cf_" << j;
  out << '\n';
  out.precision(17);
  for (Index i = 0; i < X.rows(); ++i) {
    const auto& r = results[static_cast<std::size_t>(i)];
    out << i << ',' << r.method << ',' << (r.success ? 1 : 0) << ',' << r.iterations << ','
        << r.cost;
    for (Index j = 0; j < X.cols(); ++j) out << ',' << X(i, j);
    for (Index j = 0; j < X.cols(); ++j) out << ',' << r.counterfactual[j];
    out << '\n';
  }
}

}  // namespace recfair
