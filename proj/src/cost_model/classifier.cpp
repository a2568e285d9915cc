#include "rlsf/cost_model/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rlsf/core/errors.hpp"

namespace rlsf::cost {
namespace {

constexpr std::string_view kMagic = "rlsf-cost-model";
constexpr int kFormatVersion = 1;

std::string encoding_name(ActionEncoding e) {
  switch (e) {
    case ActionEncoding::none: return "none";
    case ActionEncoding::one_hot: return "one_hot";
    case ActionEncoding::raw: return "raw";
  }
  return "?";
}

ActionEncoding parse_encoding(const std::string& s) {
  if (s == "none") return ActionEncoding::none;
  if (s == "one_hot") return ActionEncoding::one_hot;
  if (s == "raw") return ActionEncoding::raw;
  throw ValidationError("unknown action encoding '" + s + "'");
}

std::string header_text(const CostModel& model, std::uint64_t config_hash) {
  const auto& layout = model.classifier.layout();
  const auto& shape = model.classifier.net().shape();
  std::ostringstream os;
  os << kMagic << ' ' << kFormatVersion << '\n';
  os << "state_dim " << layout.state_dim << '\n';
  os << "mask";
  for (auto i : layout.state_mask) os << ' ' << i;
  os << '\n';
  os << "action " << encoding_name(layout.action) << ' ' << layout.action_size << '\n';
  os << "layers " << shape.input;
  for (auto h : shape.hidden) os << ' ' << h;
  os << ' ' << shape.output << '\n';
  os.precision(17);
  os << "threshold " << model.threshold << '\n';
  os << "trained " << (model.trained ? 1 : 0) << '\n';
  os << "config_hash " << std::hex << config_hash << std::dec << '\n';
  os << "params " << model.classifier.net().num_params() << '\n';
  os << "payload\n";
  return os.str();
}

std::vector<std::size_t> parse_sizes(std::istringstream& is) {
  std::vector<std::size_t> out;
  std::size_t v = 0;
  while (is >> v) out.push_back(v);
  return out;
}

std::string expect_line(std::istream& in, std::string_view key) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("cost-model checkpoint truncated before '" + std::string(key) + "'");
  if (line.rfind(key, 0) != 0) throw ValidationError("cost-model checkpoint: expected '" + std::string(key) + "'");
  return line.substr(key.size());
}

}  // namespace

std::size_t FeatureLayout::input_dim() const {
  const std::size_t s = state_mask.empty() ? state_dim : state_mask.size();
  return s + (action == ActionEncoding::none ? 0 : action_size);
}

void FeatureLayout::validate() const {
  if (state_dim == 0) throw ValidationError("feature layout needs a non-zero observation dimension");
  for (auto i : state_mask) {
    if (i >= state_dim) throw ValidationError("feature mask index beyond observation dimension");
  }
  if (action != ActionEncoding::none && action_size == 0) throw ValidationError("action encoding needs a size");
}

void FeatureLayout::check_compatible(std::size_t obs_dim) const {
  if (state_mask.empty()) {
    if (obs_dim != state_dim) {
      throw ValidationError("observation dimension " + std::to_string(obs_dim) + " does not match classifier input " +
                            std::to_string(state_dim));
    }
    return;
  }
  const auto max_index = *std::max_element(state_mask.begin(), state_mask.end());
  if (max_index >= obs_dim) {
    throw ValidationError("feature mask addresses index " + std::to_string(max_index) +
                          " but the observation has dimension " + std::to_string(obs_dim));
  }
}

void FeatureLayout::write_features(const StateVec& s, const ActionVec& a, std::span<double> out) const {
  check_compatible(s.dim());
  if (out.size() != input_dim()) throw ValidationError("feature buffer has wrong size");
  std::size_t k = 0;
  if (state_mask.empty()) {
    for (double v : s.values) out[k++] = v;
  } else {
    for (auto i : state_mask) out[k++] = s.values[i];
  }
  switch (action) {
    case ActionEncoding::none: break;
    case ActionEncoding::one_hot: {
      const int idx = a.index();
      if (idx < 0 || static_cast<std::size_t>(idx) >= action_size) throw ValidationError("action index out of range");
      for (std::size_t j = 0; j < action_size; ++j) out[k + j] = (static_cast<std::size_t>(idx) == j) ? 1.0 : 0.0;
      break;
    }
    case ActionEncoding::raw: {
      if (a.dim() != action_size) throw ValidationError("action dimension mismatch");
      for (std::size_t j = 0; j < action_size; ++j) out[k + j] = a.values[j];
      break;
    }
  }
}

double clamped_sigmoid(double logit) {
  const double z = std::clamp(logit, -kLogitClamp, kLogitClamp);
  return 1.0 / (1.0 + std::exp(-z));
}

SafetyClassifier::SafetyClassifier(FeatureLayout layout, std::vector<std::size_t> hidden, Rng& rng)
    : layout_(std::move(layout)) {
  layout_.validate();
  net_ = nn::Mlp({layout_.input_dim(), std::move(hidden), 1}, rng);
}

SafetyClassifier::SafetyClassifier(FeatureLayout layout, nn::Mlp net) : layout_(std::move(layout)), net_(std::move(net)) {
  layout_.validate();
  if (net_.shape().input != layout_.input_dim() || net_.shape().output != 1) {
    throw ValidationError("classifier network does not match the feature layout");
  }
}

Eigen::VectorXd SafetyClassifier::features(const StateVec& s, const ActionVec& a) const {
  Eigen::VectorXd f(static_cast<Eigen::Index>(layout_.input_dim()));
  layout_.write_features(s, a, {f.data(), static_cast<std::size_t>(f.size())});
  return f;
}

Eigen::MatrixXd SafetyClassifier::feature_matrix(std::span<const LabeledExample> examples) const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(layout_.input_dim()), static_cast<Eigen::Index>(examples.size()));
  for (std::size_t i = 0; i < examples.size(); ++i) {
    layout_.write_features(examples[i].state, examples[i].action,
                           {X.col(static_cast<Eigen::Index>(i)).data(), layout_.input_dim()});
  }
  return X;
}

Eigen::MatrixXd SafetyClassifier::feature_matrix(const Trajectory& traj) const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(layout_.input_dim()), static_cast<Eigen::Index>(traj.size()));
  for (std::size_t i = 0; i < traj.size(); ++i) {
    layout_.write_features(traj.transitions[i].state, traj.transitions[i].action,
                           {X.col(static_cast<Eigen::Index>(i)).data(), layout_.input_dim()});
  }
  return X;
}

double SafetyClassifier::logit(const StateVec& s, const ActionVec& a) const {
  const Eigen::VectorXd f = features(s, a);
  return net_.forward({f.data(), static_cast<std::size_t>(f.size())})(0);
}

double SafetyClassifier::p_safe(const StateVec& s, const ActionVec& a) const { return clamped_sigmoid(logit(s, a)); }

Eigen::VectorXd SafetyClassifier::p_safe_batch(const Eigen::MatrixXd& features, nn::ExecutionPolicy policy) const {
  const Eigen::MatrixXd logits = nn::forward_all(net_, features, policy);
  Eigen::VectorXd p(logits.cols());
  for (Eigen::Index i = 0; i < logits.cols(); ++i) p(i) = clamped_sigmoid(logits(0, i));
  return p;
}

nn::LossGradient surrogate_loss_gradient(const SafetyClassifier& clf, const Eigen::MatrixXd& features,
                                         std::span<const int> labels, nn::ExecutionPolicy policy) {
  if (static_cast<std::size_t>(features.cols()) != labels.size()) {
    throw ValidationError("feature/label count mismatch");
  }
  if (labels.empty()) throw ValidationError("surrogate loss on an empty batch");
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  auto head = [&](std::size_t first, const Eigen::MatrixXd& out, Eigen::MatrixXd& d_out) {
    double loss = 0.0;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const int y = labels[first + static_cast<std::size_t>(j)];
      const double z = out(0, j);
      const double zc = std::clamp(z, -kLogitClamp, kLogitClamp);
      // -log sigmoid(zc) = softplus(-zc); -log(1 - sigmoid(zc)) = softplus(zc)
      const double signed_z = y == 1 ? -zc : zc;
      loss += std::max(signed_z, 0.0) + std::log1p(std::exp(-std::abs(signed_z)));
      const double p = 1.0 / (1.0 + std::exp(-zc));
      const bool inside = z > -kLogitClamp && z < kLogitClamp;
      d_out(0, j) = inside ? (p - static_cast<double>(y)) * inv_n : 0.0;
    }
    return loss * inv_n;
  };
  return nn::loss_and_gradient(clf.net(), features, head, policy);
}

TrainReport train_classifier(SafetyClassifier& clf, std::span<const LabeledExample> buffer, const TrainConfig& config,
                             Rng& rng, nn::Adam* optimizer) {
  if (buffer.empty()) throw ValidationError("train_classifier on an empty buffer");
  if (config.epochs < 0 || config.batch_size == 0 || !(config.lr > 0.0)) {
    throw ValidationError("invalid classifier training configuration");
  }
  TrainReport report;
  std::size_t n_safe = 0;
  for (const auto& ex : buffer) {
    if (ex.y_safe != 0 && ex.y_safe != 1) throw ValidationError("labels must be 0 or 1");
    n_safe += static_cast<std::size_t>(ex.y_safe);
  }
  if (n_safe == 0 || n_safe == buffer.size()) {
    report.single_class = true;
    log_warn("train_classifier: buffer holds a single class; the classifier will saturate toward it");
  }

  nn::Adam local;
  nn::Adam& adam = optimizer ? *optimizer : local;
  if (adam.size() != clf.net().num_params()) adam = nn::Adam(clf.net().num_params(), config.lr);
  adam.set_learning_rate(config.lr);

  const Eigen::MatrixXd all_features = clf.feature_matrix(buffer);
  std::vector<int> all_labels(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) all_labels[i] = buffer[i].y_safe;

  const bool full_batch = config.batch_size >= buffer.size();
  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Eigen::MatrixXd batch_features;
  std::vector<int> batch_labels;
  report.losses.reserve(static_cast<std::size_t>(config.epochs));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    nn::LossGradient lg;
    if (full_batch) {
      lg = surrogate_loss_gradient(clf, all_features, all_labels);
    } else {
      // Partial Fisher-Yates: the first batch_size entries become a uniform sample without replacement.
      for (std::size_t i = 0; i < config.batch_size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
        std::swap(order[i], order[pick(rng)]);
      }
      batch_features.resize(all_features.rows(), static_cast<Eigen::Index>(config.batch_size));
      batch_labels.resize(config.batch_size);
      for (std::size_t i = 0; i < config.batch_size; ++i) {
        batch_features.col(static_cast<Eigen::Index>(i)) = all_features.col(static_cast<Eigen::Index>(order[i]));
        batch_labels[i] = all_labels[order[i]];
      }
      lg = surrogate_loss_gradient(clf, batch_features, batch_labels);
    }
    if (!std::isfinite(lg.loss)) throw NumericalError("classifier loss became non-finite");
    report.losses.push_back(lg.loss);
    adam.step(clf.net().params(), lg.grad);
  }
  return report;
}

int CostModel::cost(const StateVec& s, const ActionVec& a) const {
  return classifier.p_safe(s, a) < threshold ? 1 : 0;
}

std::vector<int> infer_cost(const CostModel& model, const Trajectory& traj) {
  if (!model.trained) throw StateError("infer_cost on an untrained cost model");
  std::vector<int> costs;
  costs.reserve(traj.size());
  if (traj.empty()) return costs;
  const Eigen::VectorXd p = model.classifier.p_safe_batch(model.classifier.feature_matrix(traj));
  for (Eigen::Index i = 0; i < p.size(); ++i) costs.push_back(p(i) < model.threshold ? 1 : 0);
  return costs;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void save_cost_model(const CostModel& model, const std::filesystem::path& path, std::string_view config_text) {
  static_assert(std::endian::native == std::endian::little, "checkpoint payload is little-endian");
  const std::string header = header_text(model, fnv1a64(config_text));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << header;
  const auto params = model.classifier.net().params();
  out.write(reinterpret_cast<const char*>(params.data()), static_cast<std::streamsize>(params.size_bytes()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

CostModel load_cost_model(const std::filesystem::path& path, std::optional<std::size_t> target_obs_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open cost-model checkpoint " + path.string());

  std::string line;
  std::getline(in, line);
  {
    std::istringstream is(line);
    std::string magic;
    int version = 0;
    is >> magic >> version;
    if (magic != kMagic) throw ValidationError("not a cost-model checkpoint: " + path.string());
    if (version != kFormatVersion) throw ValidationError("unsupported cost-model format version " + std::to_string(version));
  }

  FeatureLayout layout;
  layout.state_dim = std::stoul(expect_line(in, "state_dim "));
  {
    std::istringstream is(expect_line(in, "mask"));
    layout.state_mask = parse_sizes(is);
  }
  {
    std::istringstream is(expect_line(in, "action "));
    std::string enc;
    is >> enc >> layout.action_size;
    layout.action = parse_encoding(enc);
  }
  nn::MlpShape shape;
  {
    std::istringstream is(expect_line(in, "layers "));
    const auto sizes = parse_sizes(is);
    if (sizes.size() < 2) throw ValidationError("cost-model checkpoint: malformed layer sizes");
    shape.input = sizes.front();
    shape.output = sizes.back();
    shape.hidden.assign(sizes.begin() + 1, sizes.end() - 1);
  }
  CostModel model;
  model.threshold = std::stod(expect_line(in, "threshold "));
  model.trained = std::stoi(expect_line(in, "trained ")) == 1;
  expect_line(in, "config_hash ");
  const std::size_t n_params = std::stoul(expect_line(in, "params "));
  expect_line(in, "payload");

  nn::Mlp net(shape);
  if (net.num_params() != n_params) throw ValidationError("cost-model checkpoint: parameter count mismatch");
  std::vector<double> params(n_params);
  in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(n_params * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(n_params * sizeof(double))) {
    throw ValidationError("cost-model checkpoint: truncated payload");
  }
  net.set_params(params);
  model.classifier = SafetyClassifier(layout, std::move(net));
  if (target_obs_dim) layout.check_compatible(*target_obs_dim);
  return model;
}

}  // namespace rlsf::cost
