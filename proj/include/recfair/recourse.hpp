#pragma once

#include <string>
#include <vector>

#include "recfair/model.hpp"
#include "recfair/types.hpp"

namespace recfair {

enum class Norm { L1, L2 };

// Distance between an instance and its counterfactual. The evaluation
// convention throughout is L2 x 100; Wachter's internal penalty is plain L1.
struct CostFunction {
  Norm norm = Norm::L2;
  double scale = 100.0;
  std::vector<bool> mask;  // mutability over encoded features, empty = all mutable

  double operator()(const Vector& x, const Vector& x_cf) const;
};

// Evaluation cost: 100 * ||x_cf - x||_2.
double eval_cost(const Vector& x, const Vector& x_cf);

struct RecourseResult {
  Vector counterfactual;
  bool success = false;
  double cost = 0.0;  // eval_cost(x, counterfactual)
  int iterations = 0;
  std::string method;
};

struct GsConfig {
  int samples_per_shell = 200;
  double initial_radius = 0.1;
  double growth = 2.0;
  int max_shells = 20;
  int shrink_steps = 10;
  seed_t seed = 0;

  void validate() const;
};

struct WtConfig {
  double step_size = 0.01;
  double lambda = 0.01;
  int max_iter = 1000;
  bool clamp = true;
  double decision_threshold = 0.5;
  // Descent target sits slightly above the threshold so success is robust to
  // float noise at the boundary.
  double target_prob = 0.55;

  void validate() const;
};

// Random search over expanding spherical shells restricted to mutable
// coordinates and clamped to [0,1]^d; once a shell contains a positively
// classified sample, a radius bisection keeps the nearest positive point.
// Failure (max shells exhausted) is a result state, not an error.
RecourseResult growing_spheres(const Model& m, const Vector& x, const GsConfig& cfg,
                               const std::vector<bool>& mask);

// Proximal gradient descent on (p(x') - target)^2 + lambda * ||x' - x||_1
// with immutable coordinates frozen and per-step clamping; stops as soon as
// the prediction flips.
RecourseResult wachter(const Model& m, const Vector& x, const WtConfig& cfg,
                       const std::vector<bool>& mask);

enum class MethodKind { GrowingSpheres, Wachter };

std::string method_name(MethodKind kind);
MethodKind method_from_name(const std::string& name);

// How failed recourse enters downstream cost vectors. MaxObserved charges
// the largest successful cost in the batch; BoxDiameter charges 100*sqrt(d);
// Zero leaves the row costless (failures are always reported separately).
enum class FailurePolicy { MaxObserved, BoxDiameter, Zero };

struct RecourseSpec {
  MethodKind method = MethodKind::GrowingSpheres;
  GsConfig gs;
  WtConfig wt;
  FailurePolicy on_failure = FailurePolicy::MaxObserved;
  seed_t seed = 0;
};

RecourseResult run_recourse(const Model& m, const Vector& x, const RecourseSpec& spec,
                            const std::vector<bool>& mask, seed_t row_salt);

struct PopulationRecourse {
  Vector costs;                      // per row; 0 for positively predicted rows
  std::vector<std::uint8_t> success;  // per row; positives count as success
  std::vector<std::uint8_t> needed;   // rows that were predicted negative
  std::vector<int> iterations;
  Index failures = 0;
  double failure_rate = 0.0;  // failures / needed, 0 when nothing was needed
};

// Positively predicted rows take no action and cost 0 (the assumption behind
// both decomposition identities); negatively predicted rows run the recourse
// method, fanned out across rows.
PopulationRecourse recourse_costs_population(const Model& m, const Matrix& X,
                                             const RecourseSpec& spec,
                                             const std::vector<bool>& mask);

// One CSV record per instance: row, method, success, iterations, cost, then
// the original and counterfactual coordinates.
void write_recourse_trace(const std::string& path, const Matrix& X,
                          const std::vector<RecourseResult>& results);

}  // namespace recfair
