#pragma once

#include <string>
#include <vector>

#include "recfair/types.hpp"

namespace recfair {

enum class ModelKind { Logistic, Mlp };

struct ModelSpec {
  ModelKind kind = ModelKind::Mlp;
  std::vector<int> hidden = {128, 128};  // ignored for logistic

  void validate() const;
};

// Binary classifier with a sigmoid probability output. Logistic regression
// is the zero-hidden-layer case; the MLP uses ReLU hidden activations.
// Weight matrices are (out x in). Trained models are immutable values; all
// prediction paths are pure.
struct Model {
  ModelSpec spec;
  int input_dim = 0;
  seed_t seed = 0;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  int layer_count() const { return static_cast<int>(weights.size()); }
  Index parameter_count() const;
};

struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 256;
  int epochs = 6;
  seed_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct TrainStats {
  double final_epoch_loss = 0.0;  // mean weighted loss over the last epoch
};

// Adam moment estimates, exposed so iterative procedures can continue
// optimization across separate train_weighted calls instead of restarting
// the moment accumulators each time.
struct AdamState {
  std::vector<Matrix> weight_m, weight_v;
  std::vector<Vector> bias_m, bias_v;
  long step = 0;

  bool initialized() const { return step > 0 || !weight_m.empty(); }
};

// Weights drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases
// zero; deterministic per seed.
Model init_model(const ModelSpec& spec, int input_dim, seed_t seed);

// Final pre-activations for a batch of rows.
Vector logits(const Model& m, const Matrix& X);

double predict_proba(const Model& m, const Vector& x);
Vector predict_proba(const Model& m, const Matrix& X);

// 1 iff predict_proba >= threshold (the boundary classifies as 1).
int predict(const Model& m, const Vector& x, double threshold = 0.5);
Eigen::VectorXi predict(const Model& m, const Matrix& X, double threshold = 0.5);

// Exact gradient of predict_proba with respect to the input. The ReLU
// subgradient at 0 is taken as 0.
Vector input_gradient(const Model& m, const Vector& x);

// Minibatch Adam on the mean of per-sample weighted binary cross-entropy
// losses. Batch order is shuffled deterministically per (seed, epoch). Adam
// moments start fresh unless an initialized AdamState is passed, in which
// case optimization continues from it and the state is updated in place.
// Throws on a non-finite loss.
Model train_weighted(const Model& m, const Matrix& X, const Vector& y,
                     const Vector& sample_weights, const TrainConfig& cfg,
                     TrainStats* stats = nullptr, AdamState* state = nullptr);

// Mean weighted BCE over the full set; the quantity train_weighted descends.
double weighted_loss(const Model& m, const Matrix& X, const Vector& y,
                     const Vector& sample_weights);

struct LossGradients {
  double loss = 0.0;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

// Analytic gradients of the mean weighted BCE with respect to every
// parameter; the same backprop the trainer steps on.
LossGradients weighted_loss_gradients(const Model& m, const Matrix& X, const Vector& y,
                                      const Vector& sample_weights);

std::string model_to_json(const Model& m);
Model model_from_json(const std::string& text);
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace recfair
