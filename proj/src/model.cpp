#include "recfair/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "recfair/math.hpp"
#include "recfair/rng.hpp"

namespace recfair {

void ModelSpec::validate() const {
  if (kind == ModelKind::Mlp) {
    if (hidden.empty()) throw std::invalid_argument("model spec: mlp needs hidden sizes");
    for (int h : hidden) {
      if (h <= 0) throw std::invalid_argument("model spec: hidden sizes must be positive");
    }
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("train config: epochs must be >= 0");
}

Index Model::parameter_count() const {
  Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

Model init_model(const ModelSpec& spec, int input_dim, seed_t seed) {
  spec.validate();
  if (input_dim < 1) throw std::invalid_argument("init_model: input_dim must be >= 1");

  std::vector<int> sizes;
  sizes.push_back(input_dim);
  if (spec.kind == ModelKind::Mlp) {
    for (int h : spec.hidden) sizes.push_back(h);
  }
  sizes.push_back(1);

  Model m;
  m.spec = spec;
  m.input_dim = input_dim;
  m.seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix W(fan_out, fan_in);
    for (Index i = 0; i < W.rows(); ++i) {
      for (Index j = 0; j < W.cols(); ++j) W(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
    }
    m.weights.push_back(std::move(W));
    m.biases.push_back(Vector::Zero(fan_out));
  }
  return m;
}

namespace {

// Forward pass keeping per-layer pre-activations and activations; needed by
// both backprop and input gradients.
struct ForwardCache {
  std::vector<Matrix> pre;   // Z_l, one per layer
  std::vector<Matrix> act;   // A_0 = X, then ReLU(Z_l) for hidden layers
};

Vector forward(const Model& m, const Matrix& X, ForwardCache* cache) {
  if (X.cols() != m.input_dim)
    throw std::invalid_argument("model: input width " + std::to_string(X.cols()) +
                                " != expected " + std::to_string(m.input_dim));
  Matrix a = X;
  if (cache) cache->act.push_back(a);
  const int L = m.layer_count();
  for (int l = 0; l < L; ++l) {
    Matrix z = (a * m.weights[static_cast<std::size_t>(l)].transpose()).rowwise() +
               m.biases[static_cast<std::size_t>(l)].transpose();
    if (cache) cache->pre.push_back(z);
    if (l + 1 < L) {
      a = z.cwiseMax(0.0);
      if (cache) cache->act.push_back(a);
    } else {
      a = std::move(z);
    }
  }
  return a.col(0);
}

}  // namespace

Vector logits(const Model& m, const Matrix& X) { return forward(m, X, nullptr); }

Vector predict_proba(const Model& m, const Matrix& X) {
  return sigmoid(logits(m, X).array()).matrix();
}

double predict_proba(const Model& m, const Vector& x) {
  return predict_proba(m, Matrix(x.transpose()))[0];
}

int predict(const Model& m, const Vector& x, double threshold) {
  return predict_proba(m, x) >= threshold ? 1 : 0;
}

Eigen::VectorXi predict(const Model& m, const Matrix& X, double threshold) {
  const Vector p = predict_proba(m, X);
  Eigen::VectorXi out(p.size());
  for (Index i = 0; i < p.size(); ++i) out[i] = p[i] >= threshold ? 1 : 0;
  return out;
}

Vector input_gradient(const Model& m, const Vector& x) {
  ForwardCache cache;
  const double z_out = forward(m, Matrix(x.transpose()), &cache)[0];
  const double p = sigmoid(z_out);

  const int L = m.layer_count();
  // delta starts as dp/dz at the output and is pulled back layer by layer.
  Vector delta = Vector::Constant(1, p * (1.0 - p));
  for (int l = L - 1; l >= 1; --l) {
    Vector back = m.weights[static_cast<std::size_t>(l)].transpose() * delta;
    const auto& z = cache.pre[static_cast<std::size_t>(l - 1)];
    for (Index i = 0; i < back.size(); ++i) {
      if (z(0, i) <= 0.0) back[i] = 0.0;  // subgradient at 0 taken as 0
    }
    delta = std::move(back);
  }
  return m.weights[0].transpose() * delta;
}

double weighted_loss(const Model& m, const Matrix& X, const Vector& y,
                     const Vector& sample_weights) {
  const Vector z = logits(m, X);
  double total = 0.0;
  for (Index i = 0; i < z.size(); ++i)
    total += sample_weights[i] * (log1pexp(z[i]) - y[i] * z[i]);
  return total / static_cast<double>(z.size());
}

LossGradients weighted_loss_gradients(const Model& m, const Matrix& X, const Vector& y,
                                      const Vector& sample_weights) {
  const Index n = X.rows();
  if (y.size() != n || sample_weights.size() != n)
    throw std::invalid_argument("loss gradients: X, y and weights must align");
  const int L = m.layer_count();

  ForwardCache cache;
  const Vector z = forward(m, X, &cache);

  LossGradients out;
  out.weights.resize(static_cast<std::size_t>(L));
  out.biases.resize(static_cast<std::size_t>(L));
  for (Index i = 0; i < n; ++i)
    out.loss += sample_weights[i] * (log1pexp(z[i]) - y[i] * z[i]);
  out.loss /= static_cast<double>(n);

  // dL/dz_i = w_i (p_i - y_i) / n for the weighted-mean BCE objective.
  Matrix delta(n, 1);
  for (Index i = 0; i < n; ++i)
    delta(i, 0) = sample_weights[i] * (sigmoid(z[i]) - y[i]) / static_cast<double>(n);

  for (int l = L - 1; l >= 0; --l) {
    out.weights[static_cast<std::size_t>(l)] =
        delta.transpose() * cache.act[static_cast<std::size_t>(l)];
    out.biases[static_cast<std::size_t>(l)] = delta.colwise().sum().transpose();
    if (l > 0) {
      Matrix back = delta * m.weights[static_cast<std::size_t>(l)];
      const auto& zl = cache.pre[static_cast<std::size_t>(l - 1)];
      delta = (zl.array() > 0.0).select(back, 0.0);
    }
  }
  return out;
}

Model train_weighted(const Model& m, const Matrix& X, const Vector& y,
                     const Vector& sample_weights, const TrainConfig& cfg,
                     TrainStats* stats, AdamState* state) {
  cfg.validate();
  const Index n = X.rows();
  if (y.size() != n || sample_weights.size() != n)
    throw std::invalid_argument("train_weighted: X, y and weights must align");
  if (sample_weights.size() > 0 && sample_weights.minCoeff() < 0.0)
    throw std::invalid_argument("train_weighted: sample weights must be non-negative");

  Model model = m;
  const int L = model.layer_count();

  AdamState local;
  AdamState& adam_state = state ? *state : local;
  if (!adam_state.initialized()) {
    adam_state.weight_m.resize(L);
    adam_state.weight_v.resize(L);
    adam_state.bias_m.resize(L);
    adam_state.bias_v.resize(L);
    for (int l = 0; l < L; ++l) {
      adam_state.weight_m[l] = Matrix::Zero(model.weights[l].rows(), model.weights[l].cols());
      adam_state.weight_v[l] = adam_state.weight_m[l];
      adam_state.bias_m[l] = Vector::Zero(model.biases[l].size());
      adam_state.bias_v[l] = adam_state.bias_m[l];
    }
    adam_state.step = 0;
  }
  std::vector<Matrix>& mW = adam_state.weight_m;
  std::vector<Matrix>& vW = adam_state.weight_v;
  std::vector<Vector>& mB = adam_state.bias_m;
  std::vector<Vector>& vB = adam_state.bias_v;
  long& step = adam_state.step;

  std::vector<Index> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);

  double last_epoch_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, static_cast<seed_t>(epoch)));
    shuffle(order, rng);

    double epoch_loss = 0.0;
    Index seen = 0;
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index bsz = std::min<Index>(cfg.batch_size, n - start);
      Matrix Xb(bsz, X.cols());
      Vector yb(bsz), wb(bsz);
      for (Index i = 0; i < bsz; ++i) {
        const Index r = order[static_cast<std::size_t>(start + i)];
        Xb.row(i) = X.row(r);
        yb[i] = y[r];
        wb[i] = sample_weights[r];
      }

      const LossGradients grads = weighted_loss_gradients(model, Xb, yb, wb);
      if (!std::isfinite(grads.loss))
        throw std::runtime_error(
            "train_weighted: non-finite training loss; try a smaller learning_rate");
      epoch_loss += grads.loss * static_cast<double>(bsz);
      seen += bsz;

      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (int l = 0; l < L; ++l) {
        auto adam = [&](auto& param, auto& mm, auto& vv, const auto& g) {
          mm = cfg.beta1 * mm + (1.0 - cfg.beta1) * g;
          vv = cfg.beta2 * vv + (1.0 - cfg.beta2) * g.cwiseProduct(g);
          param.array() -= cfg.learning_rate * (mm.array() / bc1) /
                           ((vv.array() / bc2).sqrt() + cfg.epsilon);
        };
        adam(model.weights[static_cast<std::size_t>(l)], mW[l], vW[l],
             grads.weights[static_cast<std::size_t>(l)]);
        adam(model.biases[static_cast<std::size_t>(l)], mB[l], vB[l],
             grads.biases[static_cast<std::size_t>(l)]);
      }
    }
    last_epoch_loss = epoch_loss / static_cast<double>(seen);
  }

  if (stats) stats->final_epoch_loss = last_epoch_loss;
  return model;
}

std::string model_to_json(const Model& m) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["kind"] = m.spec.kind == ModelKind::Logistic ? "logistic" : "mlp";
  if (m.spec.kind == ModelKind::Mlp) j["hidden"] = m.spec.hidden;
  j["input_dim"] = m.input_dim;
  j["seed"] = m.seed;
  j["layers"] = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    nlohmann::ordered_json jl;
    jl["rows"] = m.weights[l].rows();
    jl["cols"] = m.weights[l].cols();
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(m.weights[l].size()));
    for (Index r = 0; r < m.weights[l].rows(); ++r) {
      for (Index c = 0; c < m.weights[l].cols(); ++c) w.push_back(m.weights[l](r, c));
    }
    jl["weights"] = w;
    jl["bias"] = std::vector<double>(m.biases[l].data(), m.biases[l].data() + m.biases[l].size());
    j["layers"].push_back(jl);
  }
  return j.dump();
}

Model model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("model: invalid JSON: ") + e.what());
  }
  if (j.value("version", 0) != 1) throw std::invalid_argument("model: unsupported version");

  Model m;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "logistic") {
    m.spec.kind = ModelKind::Logistic;
    m.spec.hidden.clear();
  } else if (kind == "mlp") {
    m.spec.kind = ModelKind::Mlp;
    m.spec.hidden = j.at("hidden").get<std::vector<int>>();
  } else {
    throw std::invalid_argument("model: unknown kind '" + kind + "'");
  }
  m.input_dim = j.at("input_dim").get<int>();
  m.seed = j.at("seed").get<seed_t>();
  for (const auto& jl : j.at("layers")) {
    const Index rows = jl.at("rows").get<Index>();
    const Index cols = jl.at("cols").get<Index>();
    const auto w = jl.at("weights").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (static_cast<Index>(w.size()) != rows * cols || static_cast<Index>(b.size()) != rows)
      throw std::invalid_argument("model: layer shape mismatch");
    Matrix W(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) W(r, c) = w[static_cast<std::size_t>(r * cols + c)];
    }
    m.weights.push_back(std::move(W));
    m.biases.push_back(Eigen::Map<const Vector>(b.data(), rows));
  }

  // Shapes must chain from input_dim to 1.
  Index expect = m.input_dim;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    if (m.weights[l].cols() != expect) throw std::invalid_argument("model: layer chain broken");
    expect = m.weights[l].rows();
  }
  if (expect != 1) throw std::invalid_argument("model: final layer must have one output");
  return m;
}

void save_model(const Model& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << model_to_json(m) << '\n';
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace recfair
