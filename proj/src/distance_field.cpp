#include "posefield/distance_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "posefield/random.hpp"

namespace posefield {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr std::uint64_t kTagInit = 0x696e6974u;
constexpr std::uint64_t kTagSplit = 0x73706c74u;
constexpr std::uint64_t kTagEpoch = 0x65706f63u;

inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct LayerCache {
  Eigen::MatrixXd pre;  // weight * input + bias
  Eigen::MatrixXd act;  // tanh(pre); unused for a layer stack's last (linear) layer
};

struct Workspace {
  std::vector<Eigen::MatrixXd> enc_in;             // [joint] input block (1 or 1+latent rows)
  std::vector<std::vector<LayerCache>> enc;        // [joint][layer]
  Eigen::MatrixXd concat;                          // stacked latents, (K * latent) x B
  std::vector<LayerCache> head;
  Eigen::RowVectorXd pred;                         // softplus of head output
};

// Parameter-shaped gradient and moment buffers.
struct TensorSet {
  std::vector<std::vector<DenseLayer>> enc;
  std::vector<DenseLayer> head;
};

TensorSet make_like(const FieldModel& m, bool zero) {
  TensorSet t;
  t.enc.resize(m.encoders.size());
  for (std::size_t k = 0; k < m.encoders.size(); ++k) {
    t.enc[k].resize(m.encoders[k].size());
    for (std::size_t l = 0; l < m.encoders[k].size(); ++l) {
      const auto& src = m.encoders[k][l];
      t.enc[k][l].weight = zero ? Eigen::MatrixXd::Zero(src.weight.rows(), src.weight.cols())
                                : src.weight;
      t.enc[k][l].bias = zero ? Eigen::VectorXd::Zero(src.bias.size()) : src.bias;
    }
  }
  t.head.resize(m.head.size());
  for (std::size_t l = 0; l < m.head.size(); ++l) {
    t.head[l].weight = zero ? Eigen::MatrixXd::Zero(m.head[l].weight.rows(), m.head[l].weight.cols())
                            : m.head[l].weight;
    t.head[l].bias = zero ? Eigen::VectorXd::Zero(m.head[l].bias.size()) : m.head[l].bias;
  }
  return t;
}

void set_zero(TensorSet& t) {
  for (auto& enc : t.enc) {
    for (auto& l : enc) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }
  for (auto& l : t.head) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

void forward_batch(const FieldModel& m, const Eigen::MatrixXd& q_cols, Workspace& ws) {
  const int joints = static_cast<int>(m.parent.size());
  const int latent = m.arch.latent_dim;
  const Eigen::Index batch = q_cols.cols();

  ws.enc_in.resize(static_cast<std::size_t>(joints));
  ws.enc.resize(static_cast<std::size_t>(joints));
  ws.concat.resize(static_cast<Eigen::Index>(joints) * latent, batch);

  for (int k = 0; k < joints; ++k) {
    const int p = m.parent[static_cast<std::size_t>(k)];
    const Eigen::Index in_dim = p < 0 ? 1 : 1 + latent;
    Eigen::MatrixXd& x = ws.enc_in[static_cast<std::size_t>(k)];
    x.resize(in_dim, batch);
    x.row(0) = q_cols.row(k);
    if (p >= 0) {
      x.bottomRows(latent) = ws.concat.middleRows(static_cast<Eigen::Index>(p) * latent, latent);
    }

    const auto& layers = m.encoders[static_cast<std::size_t>(k)];
    auto& cache = ws.enc[static_cast<std::size_t>(k)];
    cache.resize(layers.size());
    const Eigen::MatrixXd* cur = &x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      cache[l].pre.noalias() = layers[l].weight * (*cur);
      cache[l].pre.colwise() += layers[l].bias;
      if (l + 1 < layers.size()) {
        cache[l].act = cache[l].pre.array().tanh().matrix();
        cur = &cache[l].act;
      } else {
        cur = &cache[l].pre;  // latent output is linear
      }
    }
    ws.concat.middleRows(static_cast<Eigen::Index>(k) * latent, latent) = *cur;
  }

  ws.head.resize(m.head.size());
  const Eigen::MatrixXd* cur = &ws.concat;
  for (std::size_t l = 0; l < m.head.size(); ++l) {
    ws.head[l].pre.noalias() = m.head[l].weight * (*cur);
    ws.head[l].pre.colwise() += m.head[l].bias;
    if (l + 1 < m.head.size()) {
      ws.head[l].act = ws.head[l].pre.array().tanh().matrix();
      cur = &ws.head[l].act;
    }
  }

  const Eigen::MatrixXd& z = ws.head.back().pre;  // 1 x B
  ws.pred.resize(batch);
  for (Eigen::Index j = 0; j < batch; ++j) ws.pred[j] = softplus(z(0, j));
}

// Reverse-mode pass. d_pred is dLoss/dPrediction per column. Parameter
// gradients accumulate into *grads when given; input gradients land in *dq
// (joints x B) when given. ws must hold the matching forward pass.
void backward_batch(const FieldModel& m, const Workspace& ws, const Eigen::RowVectorXd& d_pred,
                    TensorSet* grads, Eigen::MatrixXd* dq) {
  const int joints = static_cast<int>(m.parent.size());
  const int latent = m.arch.latent_dim;
  const Eigen::Index batch = d_pred.cols();

  const Eigen::MatrixXd& z = ws.head.back().pre;
  Eigen::MatrixXd dcur(1, batch);
  for (Eigen::Index j = 0; j < batch; ++j) dcur(0, j) = d_pred[j] * sigmoid(z(0, j));

  for (int l = static_cast<int>(m.head.size()) - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    const Eigen::MatrixXd& input = (l == 0) ? ws.concat : ws.head[lu - 1].act;
    if (grads) {
      grads->head[lu].weight.noalias() += dcur * input.transpose();
      grads->head[lu].bias += dcur.rowwise().sum();
    }
    Eigen::MatrixXd dinput;
    dinput.noalias() = m.head[lu].weight.transpose() * dcur;
    if (l > 0) {
      dcur = (dinput.array() * (1.0 - ws.head[lu - 1].act.array().square())).matrix();
    } else {
      dcur = std::move(dinput);
    }
  }
  Eigen::MatrixXd dconcat = std::move(dcur);

  // Children carry gradient into their parent's latent; walking indices in
  // descending order visits every child before its parent.
  std::vector<Eigen::MatrixXd> child_accum(static_cast<std::size_t>(joints));
  for (int k = joints - 1; k >= 0; --k) {
    const auto ku = static_cast<std::size_t>(k);
    Eigen::MatrixXd d = dconcat.middleRows(static_cast<Eigen::Index>(k) * latent, latent);
    if (child_accum[ku].size() != 0) d += child_accum[ku];

    const auto& layers = m.encoders[ku];
    const auto& cache = ws.enc[ku];
    for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
      const auto lu = static_cast<std::size_t>(l);
      if (l + 1 < static_cast<int>(layers.size())) {
        d = (d.array() * (1.0 - cache[lu].act.array().square())).matrix();
      }
      const Eigen::MatrixXd& input = (l == 0) ? ws.enc_in[ku] : cache[lu - 1].act;
      if (grads) {
        grads->enc[ku][lu].weight.noalias() += d * input.transpose();
        grads->enc[ku][lu].bias += d.rowwise().sum();
      }
      Eigen::MatrixXd dinput;
      dinput.noalias() = layers[lu].weight.transpose() * d;
      d = std::move(dinput);
    }

    if (dq) dq->row(k) = d.row(0);
    const int p = m.parent[ku];
    if (p >= 0) {
      const auto pu = static_cast<std::size_t>(p);
      if (child_accum[pu].size() == 0) {
        child_accum[pu] = d.bottomRows(latent);
      } else {
        child_accum[pu] += d.bottomRows(latent);
      }
    }
  }
}

void check_query(const FieldModel& m, const Eigen::VectorXd& q, const char* who) {
  if (q.size() != m.dim()) {
    throw DimensionMismatch(std::string(who) + ": query length " + std::to_string(q.size()) +
                            " != model dimension " + std::to_string(m.dim()));
  }
}

void validate_arch(const FieldArchitecture& arch) {
  if (arch.latent_dim < 1) throw ArchMismatch("field architecture: latent_dim must be >= 1");
  for (int h : arch.encoder_hidden) {
    if (h < 1) throw ArchMismatch("field architecture: encoder hidden widths must be >= 1");
  }
  for (int h : arch.head_hidden) {
    if (h < 1) throw ArchMismatch("field architecture: head hidden widths must be >= 1");
  }
}

// Layer widths for encoder k / the head, derived from the architecture.
std::vector<Eigen::Index> encoder_widths(const FieldArchitecture& arch, bool is_root) {
  std::vector<Eigen::Index> w;
  w.push_back(is_root ? 1 : 1 + arch.latent_dim);
  for (int h : arch.encoder_hidden) w.push_back(h);
  w.push_back(arch.latent_dim);
  return w;
}

std::vector<Eigen::Index> head_widths(const FieldArchitecture& arch, int joints) {
  std::vector<Eigen::Index> w;
  w.push_back(static_cast<Eigen::Index>(joints) * arch.latent_dim);
  for (int h : arch.head_hidden) w.push_back(h);
  w.push_back(1);
  return w;
}

bool all_finite(const FieldModel& m) {
  const auto ok = [](const DenseLayer& l) {
    return l.weight.allFinite() && l.bias.allFinite();
  };
  for (const auto& enc : m.encoders) {
    for (const auto& l : enc) {
      if (!ok(l)) return false;
    }
  }
  for (const auto& l : m.head) {
    if (!ok(l)) return false;
  }
  return true;
}

}  // namespace

double FieldModel::value(const Eigen::VectorXd& q) const { return field_forward(*this, q); }

Eigen::VectorXd FieldModel::gradient(const Eigen::VectorXd& q) const {
  return field_input_gradient(*this, q);
}

FieldModel init_field(const RobotModel& robot, const FieldArchitecture& arch, std::uint64_t seed) {
  if (robot.n_joints() < 1) throw InvalidParams("init_field: robot has no joints");
  validate_arch(arch);

  FieldModel m;
  m.robot_name = robot.name;
  m.arch = arch;
  m.parent.resize(static_cast<std::size_t>(robot.n_joints()));
  for (int i = 0; i < robot.n_joints(); ++i) {
    m.parent[static_cast<std::size_t>(i)] = robot.joints[static_cast<std::size_t>(i)].parent;
  }

  std::mt19937_64 eng = make_engine(seed, kTagInit, 0);
  const auto make_layer = [&eng](Eigen::Index out, Eigen::Index in) {
    DenseLayer l;
    l.weight.resize(out, in);
    const double a = std::sqrt(3.0 / static_cast<double>(in));
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) l.weight(r, c) = uniform(eng, -a, a);
    }
    l.bias = Eigen::VectorXd::Zero(out);
    return l;
  };

  m.encoders.resize(m.parent.size());
  for (std::size_t k = 0; k < m.parent.size(); ++k) {
    const auto widths = encoder_widths(arch, m.parent[k] < 0);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      m.encoders[k].push_back(make_layer(widths[l + 1], widths[l]));
    }
  }
  const auto hw = head_widths(arch, robot.n_joints());
  for (std::size_t l = 0; l + 1 < hw.size(); ++l) {
    m.head.push_back(make_layer(hw[l + 1], hw[l]));
  }
  return m;
}

double field_forward(const FieldModel& model, const Eigen::VectorXd& q) {
  check_query(model, q, "field_forward");
  Workspace ws;
  forward_batch(model, q, ws);
  const double out = ws.pred[0];
  if (!std::isfinite(out)) {
    throw NonFiniteParameters("field_forward: model produced a non-finite value");
  }
  return out;
}

Eigen::VectorXd field_forward_batch(const FieldModel& model, const Eigen::MatrixXd& q_cols) {
  if (q_cols.rows() != model.dim()) {
    throw DimensionMismatch("field_forward_batch: query rows " + std::to_string(q_cols.rows()) +
                            " != model dimension " + std::to_string(model.dim()));
  }
  Workspace ws;
  forward_batch(model, q_cols, ws);
  return ws.pred.transpose();
}

Eigen::VectorXd field_input_gradient(const FieldModel& model, const Eigen::VectorXd& q) {
  check_query(model, q, "field_input_gradient");
  Workspace ws;
  forward_batch(model, q, ws);
  Eigen::RowVectorXd d_pred = Eigen::RowVectorXd::Ones(1);
  Eigen::MatrixXd dq(model.dim(), 1);
  backward_batch(model, ws, d_pred, nullptr, &dq);
  return dq.col(0);
}

std::vector<EpochStats> train_field(FieldModel& model, const std::vector<LabeledSample>& data,
                                    const TrainConfig& cfg) {
  if (data.empty()) throw EmptyDataset("train_field: no samples");
  if (!(cfg.learning_rate > 0.0)) throw InvalidParams("train_field: learning_rate must be > 0");
  if (cfg.batch_size < 1) throw InvalidParams("train_field: batch_size must be >= 1");
  if (cfg.epochs < 1) throw InvalidParams("train_field: epochs must be >= 1");
  if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction <= 0.5)) {
    throw InvalidParams("train_field: validation_fraction must be in [0, 0.5]");
  }

  const Eigen::Index joints = model.dim();
  const auto n = static_cast<Eigen::Index>(data.size());
  for (const auto& s : data) {
    if (s.q.size() != joints) {
      throw DimensionMismatch("train_field: sample length " + std::to_string(s.q.size()) +
                              " != model dimension " + std::to_string(joints));
    }
    if (!std::isfinite(s.label) || s.label < 0.0) {
      throw InvalidParams("train_field: labels must be finite and non-negative");
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  {
    std::mt19937_64 eng = make_engine(cfg.seed, kTagSplit, 0);
    shuffle_indices(order, eng);
  }
  const auto n_val = static_cast<Eigen::Index>(cfg.validation_fraction * static_cast<double>(n));
  const Eigen::Index n_train = n - n_val;
  if (n_train < 1) throw InvalidParams("train_field: validation split leaves no training samples");

  Eigen::MatrixXd q_train(joints, n_train), q_val(joints, n_val);
  Eigen::VectorXd y_train(n_train), y_val(n_val);
  for (Eigen::Index i = 0; i < n_val; ++i) {
    const auto& s = data[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    q_val.col(i) = s.q;
    y_val[i] = s.label;
  }
  for (Eigen::Index i = 0; i < n_train; ++i) {
    const auto& s = data[static_cast<std::size_t>(order[static_cast<std::size_t>(n_val + i)])];
    q_train.col(i) = s.q;
    y_train[i] = s.label;
  }

  TensorSet grads = make_like(model, true);
  TensorSet adam_m = make_like(model, true);
  TensorSet adam_v = make_like(model, true);
  int step = 0;

  // Cosine-annealed step size: full learning_rate on the first update,
  // decaying to ~0 by the last. Collapses Adam's late-training dither,
  // which otherwise floors the achievable MAE near learning_rate.
  const Eigen::Index batches_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  const double total_steps =
      static_cast<double>(cfg.epochs) * static_cast<double>(batches_per_epoch);
  double lr_now = cfg.learning_rate;

  // Fixed tensor order keeps the update sequence reproducible.
  const auto adam_update = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& g, Eigen::MatrixXd& mm,
                               Eigen::MatrixXd& vv) {
    mm = cfg.beta1 * mm + (1.0 - cfg.beta1) * g;
    vv = cfg.beta2 * vv + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double mc = 1.0 - std::pow(cfg.beta1, step);
    const double vc = 1.0 - std::pow(cfg.beta2, step);
    p -= (lr_now * (mm / mc).array() / ((vv / vc).array().sqrt() + cfg.adam_eps)).matrix();
  };
  const auto adam_update_vec = [&](Eigen::VectorXd& p, const Eigen::VectorXd& g,
                                   Eigen::VectorXd& mm, Eigen::VectorXd& vv) {
    mm = cfg.beta1 * mm + (1.0 - cfg.beta1) * g;
    vv = cfg.beta2 * vv + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double mc = 1.0 - std::pow(cfg.beta1, step);
    const double vc = 1.0 - std::pow(cfg.beta2, step);
    p -= (lr_now * (mm / mc).array() / ((vv / vc).array().sqrt() + cfg.adam_eps)).matrix();
  };
  const auto apply_adam = [&]() {
    for (std::size_t k = 0; k < model.encoders.size(); ++k) {
      for (std::size_t l = 0; l < model.encoders[k].size(); ++l) {
        adam_update(model.encoders[k][l].weight, grads.enc[k][l].weight, adam_m.enc[k][l].weight,
                    adam_v.enc[k][l].weight);
        adam_update_vec(model.encoders[k][l].bias, grads.enc[k][l].bias, adam_m.enc[k][l].bias,
                        adam_v.enc[k][l].bias);
      }
    }
    for (std::size_t l = 0; l < model.head.size(); ++l) {
      adam_update(model.head[l].weight, grads.head[l].weight, adam_m.head[l].weight,
                  adam_v.head[l].weight);
      adam_update_vec(model.head[l].bias, grads.head[l].bias, adam_m.head[l].bias,
                      adam_v.head[l].bias);
    }
  };

  Workspace ws;
  Eigen::MatrixXd q_batch;
  Eigen::VectorXd y_batch;
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n_train));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});

  std::vector<EpochStats> history;
  history.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 eng = make_engine(cfg.seed, kTagEpoch, static_cast<std::uint64_t>(epoch));
    shuffle_indices(perm, eng);

    double sum_abs = 0.0;
    for (Eigen::Index start = 0; start < n_train; start += cfg.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(cfg.batch_size, n_train - start);
      q_batch.resize(joints, b);
      y_batch.resize(b);
      for (Eigen::Index i = 0; i < b; ++i) {
        const Eigen::Index src = perm[static_cast<std::size_t>(start + i)];
        q_batch.col(i) = q_train.col(src);
        y_batch[i] = y_train[src];
      }

      forward_batch(model, q_batch, ws);
      Eigen::RowVectorXd err = ws.pred - y_batch.transpose();
      sum_abs += err.cwiseAbs().sum();
      Eigen::RowVectorXd d_pred(b);
      const double inv_b = 1.0 / static_cast<double>(b);
      for (Eigen::Index i = 0; i < b; ++i) {
        d_pred[i] = err[i] > 0.0 ? inv_b : (err[i] < 0.0 ? -inv_b : 0.0);
      }

      set_zero(grads);
      backward_batch(model, ws, d_pred, &grads, nullptr);
      lr_now = cfg.learning_rate * 0.5 *
               (1.0 + std::cos(M_PI * static_cast<double>(step) / total_steps));
      ++step;
      apply_adam();
    }

    EpochStats stats;
    stats.train_mae = sum_abs / static_cast<double>(n_train);
    if (n_val > 0) {
      double val_abs = 0.0;
      constexpr Eigen::Index kChunk = 4096;
      for (Eigen::Index start = 0; start < n_val; start += kChunk) {
        const Eigen::Index b = std::min(kChunk, n_val - start);
        forward_batch(model, q_val.middleCols(start, b), ws);
        val_abs += (ws.pred.transpose() - y_val.segment(start, b)).cwiseAbs().sum();
      }
      stats.val_mae = val_abs / static_cast<double>(n_val);
    } else {
      stats.val_mae = std::numeric_limits<double>::quiet_NaN();
    }

    if (!std::isfinite(stats.train_mae) || (n_val > 0 && !std::isfinite(stats.val_mae))) {
      throw DivergedLoss("train_field: loss became non-finite at epoch " + std::to_string(epoch));
    }
    history.push_back(stats);
  }

  if (!all_finite(model)) {
    throw DivergedLoss("train_field: parameters became non-finite");
  }
  return history;
}

namespace {

void append_double(std::string& s, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  s += buf;
}

void append_string(std::string& s, const std::string& v) {
  s += '"';
  for (char c : v) {
    switch (c) {
      case '"': s += "\\\""; break;
      case '\\': s += "\\\\"; break;
      case '\n': s += "\\n"; break;
      case '\t': s += "\\t"; break;
      case '\r': s += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          s += buf;
        } else {
          s += c;
        }
    }
  }
  s += '"';
}

void append_vector(std::string& s, const Eigen::VectorXd& v) {
  s += '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    append_double(s, v[i]);
  }
  s += ']';
}

void append_matrix(std::string& s, const Eigen::MatrixXd& m) {
  s += '[';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (r) s += ',';
    s += '[';
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) s += ',';
      append_double(s, m(r, c));
    }
    s += ']';
  }
  s += ']';
}

void append_layer(std::string& s, const DenseLayer& l) {
  s += "{\"W\":";
  append_matrix(s, l.weight);
  s += ",\"b\":";
  append_vector(s, l.bias);
  s += '}';
}

void append_int_list(std::string& s, const std::vector<int>& v) {
  s += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  s += ']';
}

DenseLayer layer_from_json(const nlohmann::json& j) {
  DenseLayer l;
  const auto& w = j.at("W");
  const auto& b = j.at("b");
  if (!w.is_array() || w.empty() || !w[0].is_array() || !b.is_array()) {
    throw FormatVersionError("checkpoint: malformed layer");
  }
  const auto rows = static_cast<Eigen::Index>(w.size());
  const auto cols = static_cast<Eigen::Index>(w[0].size());
  l.weight.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = w[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw FormatVersionError("checkpoint: ragged weight matrix");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      l.weight(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  l.bias.resize(static_cast<Eigen::Index>(b.size()));
  for (Eigen::Index i = 0; i < l.bias.size(); ++i) {
    l.bias[i] = b[static_cast<std::size_t>(i)].get<double>();
  }
  if (l.bias.size() != l.weight.rows()) {
    throw FormatVersionError("checkpoint: bias length != weight rows");
  }
  return l;
}

}  // namespace

void save_checkpoint(const FieldModel& model, const std::string& path) {
  if (!all_finite(model)) {
    throw NonFiniteParameters("save_checkpoint: model has non-finite parameters");
  }
  std::string s;
  s.reserve(1 << 20);
  s += "{\"format_version\":";
  s += std::to_string(kCheckpointVersion);
  s += ",\"robot_name\":";
  append_string(s, model.robot_name);
  s += ",\"n_joints\":";
  s += std::to_string(model.parent.size());
  s += ",\"parent\":";
  append_int_list(s, model.parent);
  s += ",\"arch\":{\"latent_dim\":";
  s += std::to_string(model.arch.latent_dim);
  s += ",\"encoder_hidden\":";
  append_int_list(s, model.arch.encoder_hidden);
  s += ",\"head_hidden\":";
  append_int_list(s, model.arch.head_hidden);
  s += ",\"output_nonlinearity\":\"softplus\"},\"encoders\":[";
  for (std::size_t k = 0; k < model.encoders.size(); ++k) {
    if (k) s += ',';
    s += '[';
    for (std::size_t l = 0; l < model.encoders[k].size(); ++l) {
      if (l) s += ',';
      append_layer(s, model.encoders[k][l]);
    }
    s += ']';
  }
  s += "],\"head\":[";
  for (std::size_t l = 0; l < model.head.size(); ++l) {
    if (l) s += ',';
    append_layer(s, model.head[l]);
  }
  s += "]}\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_checkpoint: cannot open '" + path + "' for writing");
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  out.flush();
  if (!out) throw IoError("save_checkpoint: write failed for '" + path + "'");
}

FieldModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("load_checkpoint: read failed for '" + path + "'");

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception&) {
    throw FormatVersionError("load_checkpoint: '" + path + "' is not a valid checkpoint document");
  }

  FieldModel m;
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw FormatVersionError("load_checkpoint: unsupported format_version " +
                               std::to_string(version));
    }
    m.robot_name = doc.at("robot_name").get<std::string>();
    const int joints = doc.at("n_joints").get<int>();
    if (joints < 1) throw FormatVersionError("load_checkpoint: n_joints must be >= 1");
    m.parent = doc.at("parent").get<std::vector<int>>();
    if (static_cast<int>(m.parent.size()) != joints) {
      throw FormatVersionError("load_checkpoint: parent list length != n_joints");
    }
    for (int k = 0; k < joints; ++k) {
      const int p = m.parent[static_cast<std::size_t>(k)];
      if (p < -1 || p >= k) throw FormatVersionError("load_checkpoint: invalid parent map");
    }
    const auto& arch = doc.at("arch");
    m.arch.latent_dim = arch.at("latent_dim").get<int>();
    m.arch.encoder_hidden = arch.at("encoder_hidden").get<std::vector<int>>();
    m.arch.head_hidden = arch.at("head_hidden").get<std::vector<int>>();
    validate_arch(m.arch);

    const auto& encs = doc.at("encoders");
    if (!encs.is_array() || static_cast<int>(encs.size()) != joints) {
      throw FormatVersionError("load_checkpoint: encoder count != n_joints");
    }
    m.encoders.resize(static_cast<std::size_t>(joints));
    for (int k = 0; k < joints; ++k) {
      const auto widths = encoder_widths(m.arch, m.parent[static_cast<std::size_t>(k)] < 0);
      const auto& stack = encs[static_cast<std::size_t>(k)];
      if (!stack.is_array() || stack.size() + 1 != widths.size()) {
        throw FormatVersionError("load_checkpoint: encoder layer count mismatch");
      }
      for (std::size_t l = 0; l < stack.size(); ++l) {
        DenseLayer layer = layer_from_json(stack[l]);
        if (layer.weight.rows() != widths[l + 1] || layer.weight.cols() != widths[l]) {
          throw FormatVersionError("load_checkpoint: encoder layer shape mismatch");
        }
        m.encoders[static_cast<std::size_t>(k)].push_back(std::move(layer));
      }
    }

    const auto hw = head_widths(m.arch, joints);
    const auto& head = doc.at("head");
    if (!head.is_array() || head.size() + 1 != hw.size()) {
      throw FormatVersionError("load_checkpoint: head layer count mismatch");
    }
    for (std::size_t l = 0; l < head.size(); ++l) {
      DenseLayer layer = layer_from_json(head[l]);
      if (layer.weight.rows() != hw[l + 1] || layer.weight.cols() != hw[l]) {
        throw FormatVersionError("load_checkpoint: head layer shape mismatch");
      }
      m.head.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception&) {
    throw FormatVersionError("load_checkpoint: '" + path + "' has missing or mistyped fields");
  }

  if (!all_finite(m)) {
    throw NonFiniteParameters("load_checkpoint: checkpoint contains non-finite parameters");
  }
  return m;
}

void check_robot(const FieldModel& model, const RobotModel& robot) {
  bool ok = model.robot_name == robot.name &&
            static_cast<int>(model.parent.size()) == robot.n_joints();
  if (ok) {
    for (int i = 0; i < robot.n_joints(); ++i) {
      if (model.parent[static_cast<std::size_t>(i)] !=
          robot.joints[static_cast<std::size_t>(i)].parent) {
        ok = false;
        break;
      }
    }
  }
  if (!ok) {
    throw RobotMismatch("model was trained for robot '" + model.robot_name +
                        "' and does not match robot '" + robot.name + "'");
  }
}

double OracleField::value(const Eigen::VectorXd& q) const { return corpus_->nearest(q).distance; }

Eigen::VectorXd OracleField::gradient(const Eigen::VectorXd& q) const {
  const NearestResult nn = corpus_->nearest(q);
  const Eigen::VectorXd row = corpus_->row(nn.index);
  Eigen::VectorXd g(q.size());
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    const double d = q[j] - row[j];
    g[j] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
  }
  return g;
}

}  // namespace posefield
