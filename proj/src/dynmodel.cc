#include "legmpc/dynmodel.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace legmpc {

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::kPlain: return "plain";
    case ModelVariant::kOneHot: return "onehot";
    case ModelVariant::kEmbedding: return "embedding";
  }
  return "?";
}

ModelVariant parse_variant(const std::string& name) {
  if (name == "plain") return ModelVariant::kPlain;
  if (name == "onehot") return ModelVariant::kOneHot;
  if (name == "embedding") return ModelVariant::kEmbedding;
  throw ConfigError("unknown model variant '" + name + "' (expected plain|onehot|embedding)");
}

void Architecture::validate() const {
  if (state_dim < 1 || action_dim < 1) throw ConfigError("architecture: empty state or action");
  auto positive = [](const std::vector<int>& v) {
    return std::all_of(v.begin(), v.end(), [](int w) { return w >= 1; });
  };
  if (is_conditioned(variant)) {
    if (embed_dim < 1) throw ConfigError("architecture: conditioned model needs embed_dim >= 1");
    if (fusion_width < 1 || !positive(post_fusion)) {
      throw ConfigError("architecture: fusion widths must be >= 1");
    }
  } else if (!positive(hidden)) {
    throw ConfigError("architecture: hidden widths must be >= 1");
  }
}

// ---------------------------------------------------------------------------
// NormStats

NormStats NormStats::compute(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                             int embed_rows) {
  NormStats ns;
  const double n = static_cast<double>(inputs.cols());
  auto moments = [n](const Eigen::MatrixXd& m, Eigen::VectorXd& mean, Eigen::VectorXd& sd) {
    mean = m.rowwise().sum() / n;
    sd = ((m.colwise() - mean).array().square().rowwise().sum() / n).sqrt().matrix();
  };
  moments(inputs, ns.mean_in, ns.std_in);
  moments(targets, ns.mean_out, ns.std_out);
  const Eigen::Index first_embed = inputs.rows() - embed_rows;
  for (Eigen::Index r = first_embed; r < inputs.rows(); ++r) {
    ns.mean_in[r] = 0.0;
    ns.std_in[r] = std::sqrt(inputs.row(r).squaredNorm() / n);
  }
  ns.std_in = ns.std_in.cwiseMax(kStdFloor);
  ns.std_out = ns.std_out.cwiseMax(kStdFloor);
  return ns;
}

NormStats NormStats::identity(int in_dim, int out_dim) {
  return {Eigen::VectorXd::Zero(in_dim), Eigen::VectorXd::Ones(in_dim),
          Eigen::VectorXd::Zero(out_dim), Eigen::VectorXd::Ones(out_dim)};
}

Eigen::MatrixXd NormStats::normalize_inputs(const Eigen::MatrixXd& x) const {
  return ((x.colwise() - mean_in).array().colwise() / std_in.array()).matrix();
}

Eigen::MatrixXd NormStats::normalize_targets(const Eigen::MatrixXd& y) const {
  return ((y.colwise() - mean_out).array().colwise() / std_out.array()).matrix();
}

Eigen::MatrixXd NormStats::denormalize_targets(const Eigen::MatrixXd& y) const {
  return ((y.array().colwise() * std_out.array()).matrix().colwise() + mean_out);
}

// ---------------------------------------------------------------------------
// DynModel

DynModel::DynModel(const Architecture& arch, std::uint64_t init_seed) : arch_(arch) {
  arch_.validate();
  if (!is_conditioned(arch_.variant)) arch_.embed_dim = 0;
  build_layers();
  norm_ = NormStats::identity(arch_.column_dim(), arch_.state_dim);

  Rng rng(init_seed);
  for (int l = 0; l < static_cast<int>(layers_.size()); ++l) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / layers_[l].in));
    auto w = weight(l);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
    }
  }
}

void DynModel::build_layers() {
  std::vector<int> widths;
  layers_.clear();
  std::size_t offset = 0;
  auto add = [&](int in, int out, bool relu) {
    layers_.push_back({in, out, relu, offset});
    offset += static_cast<std::size_t>(in) * out + out;
  };
  if (is_conditioned(arch_.variant)) {
    add(arch_.input_dim(), arch_.fusion_width, true);
    fusion_layer_ = 1;
    int prev = arch_.fusion_width * arch_.embed_dim;
    for (int w : arch_.post_fusion) {
      add(prev, w, true);
      prev = w;
    }
    add(prev, arch_.state_dim, false);
  } else {
    fusion_layer_ = -1;
    int prev = arch_.input_dim();
    for (int w : arch_.hidden) {
      add(prev, w, true);
      prev = w;
    }
    add(prev, arch_.state_dim, false);
  }
  theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

Eigen::Map<const Eigen::MatrixXd> DynModel::weight(int l) const {
  const DenseLayer& L = layers_[l];
  return {theta_.data() + L.offset, L.out, L.in};
}

Eigen::Map<const Eigen::VectorXd> DynModel::bias(int l) const {
  const DenseLayer& L = layers_[l];
  return {theta_.data() + L.offset + static_cast<std::size_t>(L.in) * L.out, L.out};
}

Eigen::Map<Eigen::MatrixXd> DynModel::weight(int l) {
  const DenseLayer& L = layers_[l];
  return {theta_.data() + L.offset, L.out, L.in};
}

Eigen::Map<Eigen::VectorXd> DynModel::bias(int l) {
  const DenseLayer& L = layers_[l];
  return {theta_.data() + L.offset + static_cast<std::size_t>(L.in) * L.out, L.out};
}

void DynModel::round_to_float() {
  theta_ = theta_.cast<float>().cast<double>();
}

bool DynModel::operator==(const DynModel& o) const {
  return arch_.variant == o.arch_.variant && arch_.embed_dim == o.arch_.embed_dim &&
         layers_.size() == o.layers_.size() &&
         std::equal(layers_.begin(), layers_.end(), o.layers_.begin(),
                    [](const DenseLayer& a, const DenseLayer& b) {
                      return a.in == b.in && a.out == b.out && a.relu == b.relu;
                    }) &&
         theta_ == o.theta_ && norm_.mean_in == o.norm_.mean_in &&
         norm_.std_in == o.norm_.std_in && norm_.mean_out == o.norm_.mean_out &&
         norm_.std_out == o.norm_.std_out;
}

// ---------------------------------------------------------------------------
// Forward

Eigen::VectorXd fuse(const Eigen::VectorXd& h, const Eigen::VectorXd& e) {
  Eigen::VectorXd out(h.size() * e.size());
  Eigen::Map<Eigen::MatrixXd>(out.data(), e.size(), h.size()) = e * h.transpose();
  return out;
}

namespace {

Eigen::MatrixXd fuse_columns(const Eigen::MatrixXd& h, const Eigen::MatrixXd& e) {
  Eigen::MatrixXd out(h.rows() * e.rows(), h.cols());
  for (Eigen::Index s = 0; s < h.cols(); ++s) {
    Eigen::Map<Eigen::MatrixXd>(out.col(s).data(), e.rows(), h.rows()) =
        e.col(s) * h.col(s).transpose();
  }
  return out;
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> layer_in;  // input fed to layer l
  std::vector<Eigen::MatrixXd> pre;       // pre-activation of layer l
  Eigen::MatrixXd embed;                  // normalized embedding rows
  Eigen::MatrixXd out;
};

void run_forward(const DynModel& model, const Eigen::MatrixXd& x_norm, ForwardCache& cache) {
  const Architecture& arch = model.arch();
  const int n_layers = static_cast<int>(model.layers().size());
  if (x_norm.rows() != arch.column_dim()) {
    throw Error("forward: input has " + std::to_string(x_norm.rows()) + " rows, model expects " +
                std::to_string(arch.column_dim()));
  }
  cache.layer_in.resize(n_layers);
  cache.pre.resize(n_layers);
  cache.embed = x_norm.bottomRows(arch.column_dim() - arch.input_dim());
  Eigen::MatrixXd a = x_norm.topRows(arch.input_dim());
  for (int l = 0; l < n_layers; ++l) {
    if (l == model.fusion_layer()) a = fuse_columns(a, cache.embed);
    cache.layer_in[l] = std::move(a);
    cache.pre[l] = (model.weight(l) * cache.layer_in[l]).colwise() + model.bias(l);
    a = model.layers()[l].relu ? Eigen::MatrixXd(cache.pre[l].cwiseMax(0.0)) : cache.pre[l];
  }
  cache.out = std::move(a);
}

Eigen::VectorXd input_column(const DynModel& model, const StateVector& s, const Action& a,
                             const Eigen::VectorXd* e) {
  const Architecture& arch = model.arch();
  if (is_conditioned(arch.variant) != (e != nullptr)) {
    throw Error(is_conditioned(arch.variant) ? "forward: conditioned model needs an embedding"
                                             : "forward: plain model takes no embedding");
  }
  if (e && e->size() != arch.embed_dim) {
    throw Error("forward: embedding has dimension " + std::to_string(e->size()) +
                ", model expects " + std::to_string(arch.embed_dim));
  }
  Eigen::VectorXd x(arch.column_dim());
  for (int i = 0; i < kStateDim; ++i) x[i] = s[i];
  x[kStateDim] = a.left;
  x[kStateDim + 1] = a.right;
  if (e) x.tail(arch.embed_dim) = *e;
  if (!x.allFinite()) throw Error("forward: non-finite input");
  return x;
}

}  // namespace

Eigen::MatrixXd forward_normalized(const DynModel& model, const Eigen::MatrixXd& x_norm) {
  ForwardCache cache;
  run_forward(model, x_norm, cache);
  return cache.out;
}

Eigen::VectorXd forward(const DynModel& model, const StateVector& s, const Action& a,
                        const Eigen::VectorXd* e) {
  const Eigen::MatrixXd x = input_column(model, s, a, e);
  return model.norm().denormalize_targets(
      forward_normalized(model, model.norm().normalize_inputs(x)));
}

void renormalize_angle_pairs(StateVector& s) {
  for (const auto& [ci, si] : kAnglePairs) {
    const double n = std::hypot(s[ci], s[si]);
    if (n > 0.0 && std::isfinite(n)) {
      s[ci] /= n;
      s[si] /= n;
    } else if (n == 0.0) {
      s[ci] = 1.0;
    }
  }
}

StateVector predict_next(const DynModel& model, const StateVector& s, const Action& a,
                         const Eigen::VectorXd* e) {
  const Eigen::VectorXd d = forward(model, s, a, e);
  StateVector next;
  for (int i = 0; i < kStateDim; ++i) next[i] = s[i] + d[i];
  renormalize_angle_pairs(next);
  return next;
}

Predictor::Predictor(const DynModel& model, std::optional<Eigen::VectorXd> e) : model_(&model) {
  const Architecture& arch = model.arch();
  if (is_conditioned(arch.variant) != e.has_value()) {
    throw Error(is_conditioned(arch.variant) ? "predictor: conditioned model needs an embedding"
                                             : "predictor: plain model takes no embedding");
  }
  if (e && e->size() != arch.embed_dim) throw Error("predictor: embedding dimension mismatch");
  const int n_layers = static_cast<int>(model.layers().size());
  max_width_ = arch.input_dim();
  for (int l = 0; l < n_layers; ++l) {
    if (l == model.fusion_layer()) {
      const int k = arch.embed_dim;
      const Eigen::VectorXd e_norm =
          ((*e - model.norm().mean_in.tail(k)).array() / model.norm().std_in.tail(k).array())
              .matrix();
      const auto w = model.weight(l);
      const int m = arch.fusion_width;
      Eigen::MatrixXd folded(w.rows(), m);
      for (int i = 0; i < m; ++i) folded.col(i) = w.middleCols(i * k, k) * e_norm;
      weights_.emplace_back(folded);
    } else {
      weights_.emplace_back(model.weight(l));
    }
    max_width_ = std::max(max_width_, model.layers()[l].out);
  }
}

namespace {

constexpr int kT = Predictor::kTile;

// z[r][t] = b[r] + sum_k w[r][k] * h[k][t], summed in increasing k for every
// (r, t). Rows are blocked by four to reuse each loaded h[k] vector.
void dense_tile(const double* w, const double* b, int out, int in, const double* h, double* z,
                bool relu) {
  int r = 0;
  for (; r + 4 <= out; r += 4) {
    double acc[4][kT];
    for (int rr = 0; rr < 4; ++rr) {
      for (int t = 0; t < kT; ++t) acc[rr][t] = b[r + rr];
    }
    const double* w0 = w + static_cast<std::size_t>(r) * in;
    const double* w1 = w0 + in;
    const double* w2 = w1 + in;
    const double* w3 = w2 + in;
    for (int k = 0; k < in; ++k) {
      const double* hk = h + static_cast<std::size_t>(k) * kT;
      for (int t = 0; t < kT; ++t) {
        acc[0][t] += w0[k] * hk[t];
        acc[1][t] += w1[k] * hk[t];
        acc[2][t] += w2[k] * hk[t];
        acc[3][t] += w3[k] * hk[t];
      }
    }
    for (int rr = 0; rr < 4; ++rr) {
      for (int t = 0; t < kT; ++t) {
        z[static_cast<std::size_t>(r + rr) * kT + t] = relu ? std::max(acc[rr][t], 0.0) : acc[rr][t];
      }
    }
  }
  for (; r < out; ++r) {
    double acc[kT];
    for (int t = 0; t < kT; ++t) acc[t] = b[r];
    const double* wr = w + static_cast<std::size_t>(r) * in;
    for (int k = 0; k < in; ++k) {
      const double* hk = h + static_cast<std::size_t>(k) * kT;
      for (int t = 0; t < kT; ++t) acc[t] += wr[k] * hk[t];
    }
    for (int t = 0; t < kT; ++t) z[static_cast<std::size_t>(r) * kT + t] = relu ? std::max(acc[t], 0.0) : acc[t];
  }
}

}  // namespace

void Predictor::delta_tile(const StateVector* s, const Action* a, double* out) const {
  const DynModel& model = *model_;
  const NormStats& ns = model.norm();
  thread_local std::vector<double> buf_a, buf_b;
  const std::size_t need = static_cast<std::size_t>(max_width_) * kT;
  if (buf_a.size() < need) {
    buf_a.resize(need);
    buf_b.resize(need);
  }
  double* h = buf_a.data();
  double* z = buf_b.data();
  for (int i = 0; i < kStateDim; ++i) {
    for (int t = 0; t < kT; ++t) h[i * kT + t] = (s[t][i] - ns.mean_in[i]) / ns.std_in[i];
  }
  for (int t = 0; t < kT; ++t) {
    h[kStateDim * kT + t] = (a[t].left - ns.mean_in[kStateDim]) / ns.std_in[kStateDim];
    h[(kStateDim + 1) * kT + t] = (a[t].right - ns.mean_in[kStateDim + 1]) / ns.std_in[kStateDim + 1];
  }
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto bias = model.bias(static_cast<int>(l));
    const int in = l == static_cast<std::size_t>(model.fusion_layer()) ? model.arch().fusion_width
                                                                        : layers[l].in;
    dense_tile(weights_[l].data(), bias.data(), layers[l].out, in, h, z, layers[l].relu);
    std::swap(h, z);
  }
  for (int i = 0; i < kStateDim; ++i) {
    for (int t = 0; t < kT; ++t) out[i * kT + t] = h[i * kT + t] * ns.std_out[i] + ns.mean_out[i];
  }
}

void Predictor::predict_tile(const StateVector* s, const Action* a, StateVector* next) const {
  double d[kStateDim * kT];
  delta_tile(s, a, d);
  for (int t = 0; t < kT; ++t) {
    for (int i = 0; i < kStateDim; ++i) next[t][i] = s[t][i] + d[i * kT + t];
    renormalize_angle_pairs(next[t]);
  }
}

Eigen::VectorXd Predictor::delta(const StateVector& s, const Action& a) const {
  StateVector ss[kT];
  Action aa[kT];
  for (int t = 0; t < kT; ++t) {
    ss[t] = s;
    aa[t] = a;
  }
  double d[kStateDim * kT];
  delta_tile(ss, aa, d);
  Eigen::VectorXd out(kStateDim);
  for (int i = 0; i < kStateDim; ++i) out[i] = d[i * kT];
  return out;
}

StateVector Predictor::predict_next(const StateVector& s, const Action& a) const {
  const Eigen::VectorXd d = delta(s, a);
  StateVector next;
  for (int i = 0; i < kStateDim; ++i) next[i] = s[i] + d[i];
  renormalize_angle_pairs(next);
  return next;
}

// ---------------------------------------------------------------------------
// Loss and gradient

namespace {

LossGradient normalized_loss_gradient(const DynModel& model, const Eigen::MatrixXd& x_norm,
                                      const Eigen::MatrixXd& t_norm, bool want_grad) {
  const double n = static_cast<double>(x_norm.cols());
  ForwardCache cache;
  run_forward(model, x_norm, cache);
  Eigen::MatrixXd diff = cache.out - t_norm;
  LossGradient lg;
  lg.loss = 0.5 * diff.squaredNorm() / n;
  if (!want_grad) return lg;

  lg.grad = Eigen::VectorXd::Zero(model.params().size());
  const auto& layers = model.layers();
  Eigen::MatrixXd dz = diff / n;
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const DenseLayer& L = layers[l];
    Eigen::Map<Eigen::MatrixXd> gw(lg.grad.data() + L.offset, L.out, L.in);
    Eigen::Map<Eigen::VectorXd> gb(lg.grad.data() + L.offset + static_cast<std::size_t>(L.in) * L.out,
                                   L.out);
    gw.noalias() = dz * cache.layer_in[l].transpose();
    gb = dz.rowwise().sum();
    if (l == 0) break;

    Eigen::MatrixXd da = model.weight(l).transpose() * dz;
    if (l == model.fusion_layer()) {
      // d/dh of vec(e h^T): contract the k x m gradient block with e.
      const Eigen::Index k = cache.embed.rows();
      const Eigen::Index m = da.rows() / k;
      Eigen::MatrixXd dh(m, da.cols());
      for (Eigen::Index s = 0; s < da.cols(); ++s) {
        dh.col(s) = Eigen::Map<const Eigen::MatrixXd>(da.col(s).data(), k, m).transpose() *
                    cache.embed.col(s);
      }
      da = std::move(dh);
    }
    if (layers[l - 1].relu) {
      dz = (cache.pre[l - 1].array() > 0.0).select(da, 0.0);
    } else {
      dz = std::move(da);
    }
  }
  return lg;
}

void check_batch(const DynModel& model, const Batch& batch) {
  if (batch.size() == 0) throw Error("loss: empty batch");
  if (batch.inputs.rows() != model.arch().column_dim() ||
      batch.targets.rows() != model.arch().state_dim || batch.targets.cols() != batch.size()) {
    throw Error("loss: batch dimensions do not match the model");
  }
}

}  // namespace

double loss(const DynModel& model, const Batch& batch) {
  check_batch(model, batch);
  return normalized_loss_gradient(model, model.norm().normalize_inputs(batch.inputs),
                                  model.norm().normalize_targets(batch.targets), false)
      .loss;
}

LossGradient loss_and_gradient(const DynModel& model, const Batch& batch) {
  check_batch(model, batch);
  return normalized_loss_gradient(model, model.norm().normalize_inputs(batch.inputs),
                                  model.norm().normalize_targets(batch.targets), true);
}

Eigen::VectorXd backward(const DynModel& model, const Batch& batch) {
  return loss_and_gradient(model, batch).grad;
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::zeros(Eigen::Index n) {
  AdamState st;
  st.m = Eigen::VectorXd::Zero(n);
  st.v = Eigen::VectorXd::Zero(n);
  return st;
}

void adam_step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, AdamState& st, double lr) {
  if (grad.size() != theta.size() || st.m.size() != theta.size() || st.v.size() != theta.size()) {
    throw Error("adam_step: shape mismatch");
  }
  st.step_count += 1;
  st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
  st.v = st.beta2 * st.v + (1.0 - st.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
  theta.array() -= lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + st.eps);
}

// ---------------------------------------------------------------------------
// Training

GroupSplit split_by_group(std::span<const std::uint32_t> group, double train_ratio,
                          std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw Error("split: ratio must be in (0, 1)");
  std::vector<std::uint32_t> ids(std::set<std::uint32_t>(group.begin(), group.end()).size());
  {
    std::set<std::uint32_t> uniq(group.begin(), group.end());
    std::copy(uniq.begin(), uniq.end(), ids.begin());
  }
  if (ids.size() < 2) throw Error("split: need at least two rollouts");
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_ratio * ids.size()));
  n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
  const std::set<std::uint32_t> train_ids(ids.begin(), ids.begin() + n_train);

  GroupSplit out;
  for (std::size_t i = 0; i < group.size(); ++i) {
    (train_ids.count(group[i]) ? out.train : out.val).push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

TrainResult train(const TrainingSet& set, const Architecture& arch, const TrainConfig& cfg) {
  const Batch& data = set.data;
  if (data.size() == 0) throw Error("train: empty dataset");
  if (data.inputs.rows() != arch.column_dim() || data.targets.rows() != arch.state_dim) {
    throw ArtifactError("train: data has " + std::to_string(data.inputs.rows()) +
                        " input rows, architecture expects " + std::to_string(arch.column_dim()));
  }
  if (static_cast<Eigen::Index>(set.group.size()) != data.size()) {
    throw Error("train: group labels do not match the data");
  }
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.lr > 0.0)) {
    throw ConfigError("train: epochs, batch size and learning rate must be positive");
  }

  std::vector<Eigen::Index> train_idx;
  std::vector<Eigen::Index> val_idx;
  const std::set<std::uint32_t> groups(set.group.begin(), set.group.end());
  if (cfg.val_fraction > 0.0 && groups.size() >= 2) {
    GroupSplit sp = split_by_group(set.group, 1.0 - cfg.val_fraction, substream_seed(cfg.seed, 0));
    train_idx = std::move(sp.train);
    val_idx = std::move(sp.val);
  } else {
    train_idx.resize(static_cast<std::size_t>(data.size()));
    std::iota(train_idx.begin(), train_idx.end(), Eigen::Index{0});
  }

  const Eigen::MatrixXd x_train = data.inputs(Eigen::all, train_idx);
  const Eigen::MatrixXd t_train = data.targets(Eigen::all, train_idx);
  TrainResult result{DynModel(arch, substream_seed(cfg.seed, 1)), {}};
  DynModel& model = result.model;
  model.norm() = NormStats::compute(x_train, t_train, arch.column_dim() - arch.input_dim());

  const Eigen::MatrixXd xn = model.norm().normalize_inputs(x_train);
  const Eigen::MatrixXd tn = model.norm().normalize_targets(t_train);
  Eigen::MatrixXd xn_val;
  Eigen::MatrixXd tn_val;
  if (!val_idx.empty()) {
    xn_val = model.norm().normalize_inputs(data.inputs(Eigen::all, val_idx));
    tn_val = model.norm().normalize_targets(data.targets(Eigen::all, val_idx));
  }

  const Eigen::Index n = xn.cols();
  const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n);
  AdamState adam = AdamState::zeros(model.params().size());
  Rng shuffle_rng(substream_seed(cfg.seed, 2));
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += bs) {
      const Eigen::Index len = std::min(bs, n - start);
      const std::vector<Eigen::Index> idx(perm.begin() + start, perm.begin() + start + len);
      const LossGradient lg =
          normalized_loss_gradient(model, xn(Eigen::all, idx), tn(Eigen::all, idx), true);
      adam_step(model.params(), lg.grad, adam, cfg.lr);
      loss_sum += lg.loss * static_cast<double>(len);
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / static_cast<double>(n);
    st.val_loss = val_idx.empty()
                      ? std::numeric_limits<double>::quiet_NaN()
                      : normalized_loss_gradient(model, xn_val, tn_val, false).loss;
    result.curve.push_back(st);
  }
  model.round_to_float();
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr std::string_view kModelMagic = "RCHM";
constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint32_t kNoFusion = 0xFFFFFFFFu;

void write_vec(ByteWriter& w, const Eigen::VectorXd& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (double x : v) w.f64(x);
}

Eigen::VectorXd read_vec(ByteReader& r, Eigen::Index expected) {
  const std::uint32_t n = r.u32();
  if (n != expected) throw ArtifactError(r.what() + ": normalization size mismatch");
  Eigen::VectorXd v(n);
  for (auto& x : v) x = r.f64();
  return v;
}

}  // namespace

void save_model(const std::string& path, const DynModel& model) {
  const Architecture& a = model.arch();
  ByteWriter w;
  w.magic(kModelMagic);
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(a.variant));
  w.u32(static_cast<std::uint32_t>(a.state_dim));
  w.u32(static_cast<std::uint32_t>(a.action_dim));
  w.u32(static_cast<std::uint32_t>(a.embed_dim));
  w.u32(model.fusion_layer() < 0 ? kNoFusion : static_cast<std::uint32_t>(model.fusion_layer()));
  w.u32(static_cast<std::uint32_t>(model.layers().size()));
  for (const DenseLayer& L : model.layers()) {
    w.u32(static_cast<std::uint32_t>(L.in));
    w.u32(static_cast<std::uint32_t>(L.out));
    w.u32(L.relu ? 1u : 0u);
  }
  const NormStats& ns = model.norm();
  write_vec(w, ns.mean_in);
  write_vec(w, ns.std_in);
  write_vec(w, ns.mean_out);
  write_vec(w, ns.std_out);
  w.u64(static_cast<std::uint64_t>(model.params().size()));
  for (double p : model.params()) w.f32(static_cast<float>(p));
  w.seal();
  w.write_file(path);
}

DynModel load_model(const std::string& path) {
  ByteReader r = ByteReader::from_file(path, "model '" + path + "'");
  r.expect_magic(kModelMagic);
  const std::uint32_t version = r.u32();
  if (version != kModelVersion) {
    throw ArtifactError(r.what() + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t variant = r.u32();
  if (variant > 2) throw ArtifactError(r.what() + ": unknown variant tag");

  DynModel model;
  Architecture& a = model.arch_;
  a.variant = static_cast<ModelVariant>(variant);
  a.state_dim = static_cast<int>(r.u32());
  a.action_dim = static_cast<int>(r.u32());
  a.embed_dim = static_cast<int>(r.u32());
  const std::uint32_t fusion = r.u32();
  const std::uint32_t n_layers = r.u32();
  if (n_layers < 1 || n_layers > 64) throw ArtifactError(r.what() + ": bad layer count");
  std::vector<DenseLayer> layers(n_layers);
  for (auto& L : layers) {
    L.in = static_cast<int>(r.u32());
    L.out = static_cast<int>(r.u32());
    L.relu = r.u32() != 0;
  }
  // Recover the architecture description from the layer list.
  if (is_conditioned(a.variant)) {
    if (fusion != 1 || n_layers < 2) throw ArtifactError(r.what() + ": bad fusion layout");
    a.fusion_width = layers[0].out;
    a.post_fusion.clear();
    for (std::uint32_t l = 1; l + 1 < n_layers; ++l) a.post_fusion.push_back(layers[l].out);
    a.hidden.clear();
  } else {
    if (fusion != kNoFusion) throw ArtifactError(r.what() + ": plain model with fusion layer");
    a.hidden.clear();
    for (std::uint32_t l = 0; l + 1 < n_layers; ++l) a.hidden.push_back(layers[l].out);
  }
  try {
    a.validate();
  } catch (const ConfigError& e) {
    throw ArtifactError(r.what() + ": " + e.what());
  }
  model.build_layers();
  if (model.layers_.size() != layers.size()) throw ArtifactError(r.what() + ": layer mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& L = model.layers_[l];
    if (L.in != layers[l].in || L.out != layers[l].out || L.relu != layers[l].relu) {
      throw ArtifactError(r.what() + ": layer dimensions do not chain");
    }
  }
  model.norm_.mean_in = read_vec(r, a.column_dim());
  model.norm_.std_in = read_vec(r, a.column_dim());
  model.norm_.mean_out = read_vec(r, a.state_dim);
  model.norm_.std_out = read_vec(r, a.state_dim);
  const std::uint64_t n_params = r.u64();
  if (n_params != static_cast<std::uint64_t>(model.theta_.size())) {
    throw ArtifactError(r.what() + ": parameter count mismatch");
  }
  for (auto& p : model.theta_) p = static_cast<double>(r.f32());
  if (!r.at_end()) throw ArtifactError(r.what() + ": trailing bytes");
  if (!model.theta_.allFinite()) throw ArtifactError(r.what() + ": non-finite parameters");
  return model;
}

}  // namespace legmpc
