#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "posefield/errors.hpp"
#include "posefield/pose_corpus.hpp"
#include "posefield/robot_model.hpp"
#include "posefield/sampler.hpp"

namespace posefield {

// Non-negative scalar field over configuration space with a (sub)gradient.
// Implementations are immutable after construction and safe for any number
// of concurrent readers.
class PoseField {
 public:
  virtual ~PoseField() = default;
  virtual Eigen::Index dim() const = 0;
  virtual double value(const Eigen::VectorXd& q) const = 0;
  virtual Eigen::VectorXd gradient(const Eigen::VectorXd& q) const = 0;
};

// y = weight * x + bias. Doubles throughout.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct FieldArchitecture {
  int latent_dim = 16;
  std::vector<int> encoder_hidden = {32};
  std::vector<int> head_hidden = {256, 128};
};

// Learned distance-to-corpus model wired along the kinematic tree: each
// joint has its own encoder; a root encoder reads that joint's angle (raw
// radians), a child encoder reads its angle concatenated with the parent's
// latent code. All per-joint latents concatenate into a shared head whose
// scalar output passes through softplus, keeping predictions positive.
// Hidden activations are tanh everywhere.
class FieldModel : public PoseField {
 public:
  std::string robot_name;
  std::vector<int> parent;  // kinematic parent per joint, -1 for roots
  FieldArchitecture arch;
  std::vector<std::vector<DenseLayer>> encoders;  // [joint][layer]
  std::vector<DenseLayer> head;

  Eigen::Index dim() const override { return static_cast<Eigen::Index>(parent.size()); }
  double value(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& q) const override;
};

/// Fresh model for a robot: weights ~ U(-sqrt(3/fan_in), sqrt(3/fan_in)),
/// biases zero, draw order fixed by the seed.
FieldModel init_field(const RobotModel& robot, const FieldArchitecture& arch, std::uint64_t seed);

/// Prediction for one configuration. DimensionMismatch on length mismatch;
/// NonFiniteParameters if the model produces a non-finite value.
double field_forward(const FieldModel& model, const Eigen::VectorXd& q);

/// Predictions for queries stored as columns of q_cols.
Eigen::VectorXd field_forward_batch(const FieldModel& model, const Eigen::MatrixXd& q_cols);

/// d(prediction)/d(q) by reverse-mode accumulation through the tree.
Eigen::VectorXd field_input_gradient(const FieldModel& model, const Eigen::VectorXd& q);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 1024;
  int epochs = 30;
  double validation_fraction = 0.1;  // in [0, 0.5]
  std::uint64_t seed = 0;
  // Adam moments.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct EpochStats {
  double train_mae = 0.0;
  double val_mae = 0.0;  // NaN when validation_fraction rounds to zero samples
};

/// Minimizes mean absolute error with Adam over seed-shuffled mini-batches.
/// The validation split is seeded and disjoint from the training split.
/// Returns per-epoch train/validation MAE. Throws EmptyDataset,
/// DimensionMismatch, InvalidParams on bad config, DivergedLoss when the
/// loss goes non-finite.
std::vector<EpochStats> train_field(FieldModel& model, const std::vector<LabeledSample>& data,
                                    const TrainConfig& cfg);

/// Writes the model as a single JSON document; floats carry 17 significant
/// digits so a load reproduces every parameter bitwise.
void save_checkpoint(const FieldModel& model, const std::string& path);

/// Inverse of save_checkpoint. Unreadable file -> IoError; malformed or
/// wrong-version content -> FormatVersionError (never a partial model);
/// non-finite parameters -> NonFiniteParameters.
FieldModel load_checkpoint(const std::string& path);

/// Throws RobotMismatch unless the model was built for this robot (name,
/// joint count, and parent map all match).
void check_robot(const FieldModel& model, const RobotModel& robot);

// Exact field backed by a corpus: value is the nearest-row distance,
// gradient is the L1 subgradient sign(q - nearest row) (zero components
// where q matches the row). The corpus must outlive the oracle.
class OracleField : public PoseField {
 public:
  explicit OracleField(const PoseCorpus& corpus) : corpus_(&corpus) {}
  Eigen::Index dim() const override { return corpus_->n_joints(); }
  double value(const Eigen::VectorXd& q) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& q) const override;

 private:
  const PoseCorpus* corpus_;
};

}  // namespace posefield
