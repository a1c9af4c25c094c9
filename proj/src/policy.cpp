#include "crowdnav/policy.hpp"

#include <cmath>
#include <numbers>

#include "crowdnav/errors.hpp"

namespace crowdnav {

namespace {

using Eigen::MatrixXd;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Columns (b*out_len + j) hold the receptive field of output j of sample b, rows ordered
// (channel * kernel + k). `input` is channels x (B * in_len).
void im2col(const MatrixXd& input, int channels, int in_len, int kernel, int stride, int out_len,
            int batch, MatrixXd& cols) {
  cols.resize(static_cast<Eigen::Index>(channels) * kernel,
              static_cast<Eigen::Index>(batch) * out_len);
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < out_len; ++j) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * out_len + j;
      const Eigen::Index base = static_cast<Eigen::Index>(b) * in_len + j * stride;
      for (int c = 0; c < channels; ++c) {
        for (int k = 0; k < kernel; ++k) cols(c * kernel + k, col) = input(c, base + k);
      }
    }
  }
}

void col2im_add(const MatrixXd& dcols, int channels, int in_len, int kernel, int stride,
                int out_len, int batch, MatrixXd& dinput) {
  dinput.setZero(channels, static_cast<Eigen::Index>(batch) * in_len);
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < out_len; ++j) {
      const Eigen::Index col = static_cast<Eigen::Index>(b) * out_len + j;
      const Eigen::Index base = static_cast<Eigen::Index>(b) * in_len + j * stride;
      for (int c = 0; c < channels; ++c) {
        for (int k = 0; k < kernel; ++k) dinput(c, base + k) += dcols(c * kernel + k, col);
      }
    }
  }
}

void relu_inplace(MatrixXd& m) { m = m.cwiseMax(0.0); }

void relu_mask(MatrixXd& grad, const MatrixXd& activated) {
  grad.array() *= (activated.array() > 0.0).cast<double>();
}

void add_into(std::vector<double>& grad, const ParamLayout::Block& b, const MatrixXd& m) {
  Eigen::Map<MatrixXd>(grad.data() + b.offset, b.rows, b.cols) += m;
}

void orthogonal_fill(Eigen::Map<MatrixXd> w, double gain, std::mt19937_64& rng) {
  const Eigen::Index rows = w.rows();
  const Eigen::Index cols = w.cols();
  const Eigen::Index big = std::max(rows, cols);
  const Eigen::Index small = std::min(rows, cols);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd a(big, small);
  for (Eigen::Index j = 0; j < small; ++j) {
    for (Eigen::Index i = 0; i < big; ++i) a(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(big, small);
  const MatrixXd r = qr.matrixQR().topLeftCorner(small, small);
  for (Eigen::Index j = 0; j < small; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  if (rows >= cols) {
    w = gain * q;
  } else {
    w = gain * q.transpose();
  }
}

}  // namespace

void PolicyArch::validate() const {
  if (history < 1 || rays < 2 || state_dim < 1) throw ConfigError("invalid observation shape");
  if (conv1_channels < 1 || conv2_channels < 1 || conv1_kernel < 1 || conv2_kernel < 1 ||
      conv1_stride < 1 || conv2_stride < 1) {
    throw ConfigError("invalid convolution shape");
  }
  if (conv1_kernel > rays || conv2_kernel > conv1_length()) {
    throw ConfigError("convolution kernel exceeds its input length");
  }
  if (feature_dim < 1 || hidden1 < 1 || hidden2 < 1) throw ConfigError("invalid layer widths");
  if (!(log_std_min < log_std_max)) throw ConfigError("log std bounds are inverted");
}

nlohmann::json PolicyArch::to_json() const {
  return {{"history", history},
          {"rays", rays},
          {"state_dim", state_dim},
          {"conv1", {conv1_channels, conv1_kernel, conv1_stride}},
          {"conv2", {conv2_channels, conv2_kernel, conv2_stride}},
          {"feature_dim", feature_dim},
          {"hidden", {hidden1, hidden2}},
          {"action_dim", kActionDim},
          {"aux_dim", kAuxDim},
          {"log_std_bounds", {log_std_min, log_std_max}},
          {"observation_layout", kObservationLayoutVersion}};
}

PolicyArch PolicyArch::from_json(const nlohmann::json& j) {
  if (j.at("action_dim").get<int>() != kActionDim || j.at("aux_dim").get<int>() != kAuxDim ||
      j.at("observation_layout").get<int>() != kObservationLayoutVersion) {
    throw DigestMismatch("checkpoint architecture uses a different observation/action layout");
  }
  PolicyArch a;
  a.history = j.at("history").get<int>();
  a.rays = j.at("rays").get<int>();
  a.state_dim = j.at("state_dim").get<int>();
  a.conv1_channels = j.at("conv1")[0].get<int>();
  a.conv1_kernel = j.at("conv1")[1].get<int>();
  a.conv1_stride = j.at("conv1")[2].get<int>();
  a.conv2_channels = j.at("conv2")[0].get<int>();
  a.conv2_kernel = j.at("conv2")[1].get<int>();
  a.conv2_stride = j.at("conv2")[2].get<int>();
  a.feature_dim = j.at("feature_dim").get<int>();
  a.hidden1 = j.at("hidden")[0].get<int>();
  a.hidden2 = j.at("hidden")[1].get<int>();
  a.log_std_min = j.at("log_std_bounds")[0].get<double>();
  a.log_std_max = j.at("log_std_bounds")[1].get<double>();
  a.validate();
  return a;
}

ParamLayout::ParamLayout(const PolicyArch& a) {
  auto take = [this](int rows, int cols) {
    Block b{total, rows, cols};
    total += b.size();
    return b;
  };
  conv1_w = take(a.conv1_channels, a.history * a.conv1_kernel);
  conv1_b = take(a.conv1_channels, 1);
  conv2_w = take(a.conv2_channels, a.conv1_channels * a.conv2_kernel);
  conv2_b = take(a.conv2_channels, 1);
  proj_w = take(a.feature_dim, a.flat_dim());
  proj_b = take(a.feature_dim, 1);
  fc1_w = take(a.hidden1, a.feature_dim + a.state_dim);
  fc1_b = take(a.hidden1, 1);
  fc2_w = take(a.hidden2, a.hidden1);
  fc2_b = take(a.hidden2, 1);
  mean_w = take(kActionDim, a.hidden2);
  mean_b = take(kActionDim, 1);
  log_std = take(kActionDim, 1);
  value_w = take(1, a.hidden2);
  value_b = take(1, 1);
  aux_w = take(kAuxDim, a.feature_dim);
  aux_b = take(kAuxDim, 1);
}

PolicyParams::PolicyParams(const PolicyArch& arch)
    : arch_(arch), layout_(arch), data_(layout_.total, 0.0) {
  arch_.validate();
}

PolicyParams PolicyParams::initialized(const PolicyArch& arch, std::uint64_t seed,
                                       const PolicyInit& init) {
  PolicyParams p(arch);
  std::mt19937_64 rng(seed);
  const ParamLayout& l = p.layout_;
  const double hidden_gain = std::numbers::sqrt2;
  orthogonal_fill(p.block(l.conv1_w), hidden_gain, rng);
  orthogonal_fill(p.block(l.conv2_w), hidden_gain, rng);
  orthogonal_fill(p.block(l.proj_w), hidden_gain, rng);
  orthogonal_fill(p.block(l.fc1_w), hidden_gain, rng);
  orthogonal_fill(p.block(l.fc2_w), hidden_gain, rng);
  orthogonal_fill(p.block(l.mean_w), init.mean_head_gain, rng);
  orthogonal_fill(p.block(l.value_w), 1.0, rng);
  orthogonal_fill(p.block(l.aux_w), 1.0, rng);
  p.block(l.log_std).setConstant(init.log_std);
  return p;
}

bool PolicyParams::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ObsBatch ObsBatch::from(const std::vector<const Observation*>& obs) {
  if (obs.empty()) throw ContractViolation("empty observation batch");
  ObsBatch b;
  const auto scan_dim = static_cast<Eigen::Index>(obs.front()->scans.size());
  const auto state_dim = static_cast<Eigen::Index>(obs.front()->state.size());
  const auto n = static_cast<Eigen::Index>(obs.size());
  b.scans.resize(scan_dim, n);
  b.state.resize(state_dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Observation& o = *obs[i];
    if (static_cast<Eigen::Index>(o.scans.size()) != scan_dim ||
        static_cast<Eigen::Index>(o.state.size()) != state_dim) {
      throw ContractViolation("observations in a batch differ in shape");
    }
    b.scans.col(i) = Eigen::Map<const Eigen::VectorXd>(o.scans.data(), scan_dim);
    b.state.col(i) = Eigen::Map<const Eigen::VectorXd>(o.state.data(), state_dim);
  }
  return b;
}

ObsBatch ObsBatch::single(const Observation& obs) { return from({&obs}); }

PolicyOutput policy_forward(const PolicyParams& params, const ObsBatch& obs, ForwardCache* cache) {
  const PolicyArch& a = params.arch();
  const ParamLayout& l = params.layout();
  if (obs.scans.rows() != a.scan_dim() || obs.state.rows() != a.state_dim ||
      obs.state.cols() != obs.scans.cols()) {
    throw ContractViolation("observation shape does not match the policy architecture");
  }
  const int batch = obs.size();
  const int len1 = a.conv1_length();
  const int len2 = a.conv2_length();

  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;

  // Scans arrive as (history * rays) x B; view them as history channels x (B * rays).
  MatrixXd scan_channels(a.history, static_cast<Eigen::Index>(batch) * a.rays);
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < a.history; ++h) {
      scan_channels.block(h, static_cast<Eigen::Index>(b) * a.rays, 1, a.rays) =
          obs.scans.block(static_cast<Eigen::Index>(h) * a.rays, b, a.rays, 1).transpose();
    }
  }

  im2col(scan_channels, a.history, a.rays, a.conv1_kernel, a.conv1_stride, len1, batch, c.col1);
  c.y1.noalias() = params.block(l.conv1_w) * c.col1;
  c.y1.colwise() += Eigen::VectorXd(params.block(l.conv1_b));
  relu_inplace(c.y1);

  im2col(c.y1, a.conv1_channels, len1, a.conv2_kernel, a.conv2_stride, len2, batch, c.col2);
  c.y2.noalias() = params.block(l.conv2_w) * c.col2;
  c.y2.colwise() += Eigen::VectorXd(params.block(l.conv2_b));
  relu_inplace(c.y2);

  const Eigen::Map<const MatrixXd> flat(c.y2.data(), a.flat_dim(), batch);
  c.feat.noalias() = params.block(l.proj_w) * flat;
  c.feat.colwise() += Eigen::VectorXd(params.block(l.proj_b));
  relu_inplace(c.feat);

  c.xcat.resize(a.feature_dim + a.state_dim, batch);
  c.xcat.topRows(a.feature_dim) = c.feat;
  c.xcat.bottomRows(a.state_dim) = obs.state;

  c.h1.noalias() = params.block(l.fc1_w) * c.xcat;
  c.h1.colwise() += Eigen::VectorXd(params.block(l.fc1_b));
  relu_inplace(c.h1);
  c.h2.noalias() = params.block(l.fc2_w) * c.h1;
  c.h2.colwise() += Eigen::VectorXd(params.block(l.fc2_b));
  relu_inplace(c.h2);

  PolicyOutput out;
  out.mean.noalias() = params.block(l.mean_w) * c.h2;
  out.mean.colwise() += Eigen::VectorXd(params.block(l.mean_b));
  out.value.noalias() = params.block(l.value_w) * c.h2;
  out.value.array() += params.block(l.value_b)(0, 0);
  out.aux.noalias() = params.block(l.aux_w) * c.feat;
  out.aux.colwise() += Eigen::VectorXd(params.block(l.aux_b));

  c.raw_log_std = params.block(l.log_std);
  out.log_std = c.raw_log_std.cwiseMax(a.log_std_min).cwiseMin(a.log_std_max);
  return out;
}

void policy_backward(const PolicyParams& params, const ForwardCache& c, const OutputGrads& g,
                     std::vector<double>& grad) {
  const PolicyArch& a = params.arch();
  const ParamLayout& l = params.layout();
  if (grad.size() != params.size()) grad.assign(params.size(), 0.0);
  const int batch = static_cast<int>(c.h2.cols());
  const int len1 = a.conv1_length();
  const int len2 = a.conv2_length();

  add_into(grad, l.mean_w, g.mean * c.h2.transpose());
  add_into(grad, l.mean_b, g.mean.rowwise().sum());
  add_into(grad, l.value_w, g.value * c.h2.transpose());
  add_into(grad, l.value_b, MatrixXd::Constant(1, 1, g.value.sum()));
  for (int i = 0; i < kActionDim; ++i) {
    const double raw = c.raw_log_std(i);
    if (raw >= a.log_std_min && raw <= a.log_std_max) grad[l.log_std.offset + i] += g.log_std(i);
  }

  MatrixXd dh2 = params.block(l.mean_w).transpose() * g.mean;
  dh2.noalias() += params.block(l.value_w).transpose() * g.value;
  relu_mask(dh2, c.h2);
  add_into(grad, l.fc2_w, dh2 * c.h1.transpose());
  add_into(grad, l.fc2_b, dh2.rowwise().sum());

  MatrixXd dh1 = params.block(l.fc2_w).transpose() * dh2;
  relu_mask(dh1, c.h1);
  add_into(grad, l.fc1_w, dh1 * c.xcat.transpose());
  add_into(grad, l.fc1_b, dh1.rowwise().sum());

  MatrixXd dfeat = (params.block(l.fc1_w).transpose() * dh1).topRows(a.feature_dim);
  add_into(grad, l.aux_w, g.aux * c.feat.transpose());
  add_into(grad, l.aux_b, g.aux.rowwise().sum());
  dfeat.noalias() += params.block(l.aux_w).transpose() * g.aux;
  relu_mask(dfeat, c.feat);

  const Eigen::Map<const MatrixXd> flat(c.y2.data(), a.flat_dim(), batch);
  add_into(grad, l.proj_w, dfeat * flat.transpose());
  add_into(grad, l.proj_b, dfeat.rowwise().sum());
  MatrixXd dflat = params.block(l.proj_w).transpose() * dfeat;
  MatrixXd dy2 = Eigen::Map<MatrixXd>(dflat.data(), a.conv2_channels,
                                      static_cast<Eigen::Index>(batch) * len2);
  relu_mask(dy2, c.y2);
  add_into(grad, l.conv2_w, dy2 * c.col2.transpose());
  add_into(grad, l.conv2_b, dy2.rowwise().sum());

  const MatrixXd dcol2 = params.block(l.conv2_w).transpose() * dy2;
  MatrixXd dy1;
  col2im_add(dcol2, a.conv1_channels, len1, a.conv2_kernel, a.conv2_stride, len2, batch, dy1);
  relu_mask(dy1, c.y1);
  add_into(grad, l.conv1_w, dy1 * c.col1.transpose());
  add_into(grad, l.conv1_b, dy1.rowwise().sum());
}

std::vector<std::uint8_t> activation_pattern(const ForwardCache& c, const PolicyArch& a) {
  std::vector<std::uint8_t> bits;
  for (const MatrixXd* m : {&c.y1, &c.y2, &c.feat, &c.h1, &c.h2}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) bits.push_back(m->data()[i] > 0.0 ? 1 : 0);
  }
  for (int i = 0; i < kActionDim; ++i) {
    const double raw = c.raw_log_std(i);
    bits.push_back(raw < a.log_std_min ? 2 : (raw > a.log_std_max ? 3 : 0));
  }
  return bits;
}

Action squash(const Eigen::Vector3d& s, double max_speed) {
  Action a;
  a.speed = max_speed / (1.0 + std::exp(-s(0)));
  a.motion_heading = std::numbers::pi * std::tanh(s(1));
  a.camera_heading = std::numbers::pi * std::tanh(s(2));
  return a;
}

Eigen::Vector3d unsquash(const Action& a, double max_speed) {
  const double p = a.speed / max_speed;
  return {std::log(p / (1.0 - p)), std::atanh(a.motion_heading / std::numbers::pi),
          std::atanh(a.camera_heading / std::numbers::pi)};
}

double squash_log_det(const Eigen::Vector3d& s, double max_speed) {
  // log sigmoid'(x) = -softplus(-x) - softplus(x); log(1 - tanh^2 x) = 2 (log 2 - x - softplus(-2x)).
  const double speed = std::log(max_speed) - softplus(-s(0)) - softplus(s(0));
  auto tanh_term = [](double x) {
    return std::log(std::numbers::pi) + 2.0 * (std::numbers::ln2 - x - softplus(-2.0 * x));
  };
  return speed + tanh_term(s(1)) + tanh_term(s(2));
}

double gaussian_log_prob(const Eigen::Vector3d& mean, const Eigen::Vector3d& log_std,
                         const Eigen::Vector3d& sample) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (int i = 0; i < kActionDim; ++i) {
    const double z = (sample(i) - mean(i)) * std::exp(-log_std(i));
    lp += -0.5 * z * z - log_std(i) - half_log_2pi;
  }
  return lp;
}

double log_prob(const ActionDistribution& dist, const Eigen::Vector3d& sample, double max_speed) {
  return gaussian_log_prob(dist.mean, dist.log_std, sample) - squash_log_det(sample, max_speed);
}

double gaussian_entropy(const Eigen::Vector3d& log_std) {
  return log_std.sum() + kActionDim * 0.5 * (1.0 + std::log(2.0 * std::numbers::pi));
}

Eigen::Vector3d sample_action(const ActionDistribution& dist, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector3d s;
  for (int i = 0; i < kActionDim; ++i) s(i) = dist.mean(i) + std::exp(dist.log_std(i)) * normal(rng);
  return s;
}

PolicyStep evaluate_policy(const PolicyParams& params, const Observation& obs) {
  const PolicyOutput out = policy_forward(params, ObsBatch::single(obs));
  PolicyStep step;
  step.dist.mean = out.mean.col(0);
  step.dist.log_std = out.log_std;
  step.value = out.value(0);
  step.aux = out.aux.col(0);
  return step;
}

}  // namespace crowdnav
