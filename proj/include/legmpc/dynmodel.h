#ifndef LEGMPC_DYNMODEL_H_
#define LEGMPC_DYNMODEL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "legmpc/simworld.h"

namespace legmpc {

// Plain models see [s; a]. OneHot and Embedding models additionally take a
// terrain vector e that is fused with a state-action hidden layer through an
// outer product.
enum class ModelVariant : std::uint32_t { kPlain = 0, kOneHot = 1, kEmbedding = 2 };

std::string to_string(ModelVariant v);
ModelVariant parse_variant(const std::string& name);
inline bool is_conditioned(ModelVariant v) { return v != ModelVariant::kPlain; }

struct Architecture {
  ModelVariant variant = ModelVariant::kPlain;
  int state_dim = kStateDim;
  int action_dim = kActionDim;
  int embed_dim = 0;                   // k, conditioned variants only
  std::vector<int> hidden = {250, 250};  // plain hidden widths
  int fusion_width = 64;               // m, state-action width before fusion
  std::vector<int> post_fusion = {250};

  int input_dim() const { return state_dim + action_dim; }
  // Width of a raw input column: [s; a] plus e when conditioned.
  int column_dim() const { return input_dim() + (is_conditioned(variant) ? embed_dim : 0); }
  void validate() const;
};

// Per-dimension normalization. The input statistics cover [s; a; e]; for the
// embedding rows the mean is pinned to zero and the scale is the RMS, so a
// constant direction survives the outer-product fusion.
struct NormStats {
  Eigen::VectorXd mean_in;
  Eigen::VectorXd std_in;
  Eigen::VectorXd mean_out;
  Eigen::VectorXd std_out;

  static constexpr double kStdFloor = 1e-8;

  // inputs: column_dim x n, targets: state_dim x n.
  static NormStats compute(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                           int embed_rows);
  static NormStats identity(int in_dim, int out_dim);

  Eigen::MatrixXd normalize_inputs(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd normalize_targets(const Eigen::MatrixXd& y) const;
  Eigen::MatrixXd denormalize_targets(const Eigen::MatrixXd& y) const;
};

struct DenseLayer {
  int in = 0;
  int out = 0;
  bool relu = false;
  std::size_t offset = 0;  // weights (out x in, column-major) then biases
};

class DynModel {
 public:
  // He-initialized weights, zero biases, identity normalization.
  DynModel(const Architecture& arch, std::uint64_t init_seed);

  const Architecture& arch() const { return arch_; }
  ModelVariant variant() const { return arch_.variant; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  // Index of the first layer fed by the fused vector; -1 for plain models.
  int fusion_layer() const { return fusion_layer_; }

  Eigen::VectorXd& params() { return theta_; }
  const Eigen::VectorXd& params() const { return theta_; }
  NormStats& norm() { return norm_; }
  const NormStats& norm() const { return norm_; }

  Eigen::Map<const Eigen::MatrixXd> weight(int l) const;
  Eigen::Map<const Eigen::VectorXd> bias(int l) const;
  Eigen::Map<Eigen::MatrixXd> weight(int l);
  Eigen::Map<Eigen::VectorXd> bias(int l);

  // Rounds parameters to float precision (the on-disk precision).
  void round_to_float();

  bool operator==(const DynModel& other) const;

 private:
  friend DynModel load_model(const std::string& path);
  DynModel() = default;
  void build_layers();

  Architecture arch_;
  std::vector<DenseLayer> layers_;
  int fusion_layer_ = -1;
  Eigen::VectorXd theta_;
  NormStats norm_;
};

// Flattened outer product h e^T, index i * k + j holds h_i * e_j.
Eigen::VectorXd fuse(const Eigen::VectorXd& h, const Eigen::VectorXd& e);

// Normalized-space network output for normalized input columns.
Eigen::MatrixXd forward_normalized(const DynModel& model, const Eigen::MatrixXd& x_norm);

// Denormalized predicted state change. e must be given iff the model is
// conditioned.
Eigen::VectorXd forward(const DynModel& model, const StateVector& s, const Action& a,
                        const Eigen::VectorXd* e = nullptr);

// Rescales every (cos, sin) pair to unit norm.
void renormalize_angle_pairs(StateVector& s);

StateVector predict_next(const DynModel& model, const StateVector& s, const Action& a,
                         const Eigen::VectorXd* e = nullptr);

// Planner-side evaluator. The terrain vector is folded into the first
// post-fusion layer, so the (m * k)-wide fused product is never formed.
// Samples are processed in tiles of kTile columns by a register-blocked
// kernel that applies the same instruction sequence to every column: a
// sample's result does not depend on its tile or on its neighbours, which is
// what lets serial, parallel and one-at-a-time evaluation agree bit for bit.
class Predictor {
 public:
  static constexpr int kTile = 8;

  explicit Predictor(const DynModel& model, std::optional<Eigen::VectorXd> e = std::nullopt);

  Eigen::VectorXd delta(const StateVector& s, const Action& a) const;
  StateVector predict_next(const StateVector& s, const Action& a) const;

  // next[t] = predict_next(s[t], a[t]) for t < kTile.
  void predict_tile(const StateVector* s, const Action* a, StateVector* next) const;

  const DynModel& model() const { return *model_; }

 private:
  // Denormalized deltas, row-major [state_dim][kTile].
  void delta_tile(const StateVector* s, const Action* a, double* out) const;

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  const DynModel* model_;
  std::vector<RowMajor> weights_;  // per layer, fusion layer folded
  int max_width_ = 0;
};

// Raw (pre-normalization) training columns. inputs: column_dim x n (embedding
// rows appended for conditioned models), targets: state_dim x n of s' - s.
struct Batch {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;

  Eigen::Index size() const { return inputs.cols(); }
};

// Mean over the batch of 0.5 * ||norm(target) - f_norm(norm(input))||^2.
double loss(const DynModel& model, const Batch& batch);

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd grad;  // shaped like params()
};

LossGradient loss_and_gradient(const DynModel& model, const Batch& batch);
Eigen::VectorXd backward(const DynModel& model, const Batch& batch);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(Eigen::Index n);
};

void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& st, double lr);

struct TrainConfig {
  int epochs = 50;
  double lr = 1e-3;
  int batch_size = 1000;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

// Training columns plus the rollout id of each column (for grouped splits).
struct TrainingSet {
  Batch data;
  std::vector<std::uint32_t> group;
};

struct GroupSplit {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> val;
};

// Splits column indices by group: round(train_ratio * groups) groups train.
GroupSplit split_by_group(std::span<const std::uint32_t> group, double train_ratio,
                          std::uint64_t seed);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;  // mean minibatch loss over the epoch
  double val_loss = 0.0;    // held-out loss after the epoch (NaN if no split)
};

struct TrainResult {
  DynModel model;
  std::vector<EpochStats> curve;
};

TrainResult train(const TrainingSet& set, const Architecture& arch, const TrainConfig& cfg);

void save_model(const std::string& path, const DynModel& model);
DynModel load_model(const std::string& path);

}  // namespace legmpc

#endif  // LEGMPC_DYNMODEL_H_
