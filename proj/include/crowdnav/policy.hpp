#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "crowdnav/control.hpp"
#include "crowdnav/sensing.hpp"

namespace crowdnav {

inline constexpr int kActionDim = 3;
inline constexpr int kAuxDim = 3;

// Layer sizes of the local planner network. Two strided 1-D convolutions over the scan
// history (history slots are input channels), a projection to the feature vector, a
// two-layer MLP over [feature, state], Gaussian mean/value heads, and an auxiliary head
// reading the feature vector before fusion.
struct PolicyArch {
  int history = 4;
  int rays = 64;
  int state_dim = obs_index::kStateSize;
  int conv1_channels = 16;
  int conv1_kernel = 5;
  int conv1_stride = 2;
  int conv2_channels = 16;
  int conv2_kernel = 3;
  int conv2_stride = 2;
  int feature_dim = 32;
  int hidden1 = 128;
  int hidden2 = 64;
  double log_std_min = -5.0;
  double log_std_max = 1.0;

  int conv1_length() const { return (rays - conv1_kernel) / conv1_stride + 1; }
  int conv2_length() const { return (conv1_length() - conv2_kernel) / conv2_stride + 1; }
  int flat_dim() const { return conv2_channels * conv2_length(); }
  int scan_dim() const { return history * rays; }

  void validate() const;
  nlohmann::json to_json() const;
  static PolicyArch from_json(const nlohmann::json& j);
  bool operator==(const PolicyArch&) const = default;
};

// Offsets of every parameter block inside the flat parameter vector.
struct ParamLayout {
  struct Block {
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  };

  Block conv1_w, conv1_b, conv2_w, conv2_b, proj_w, proj_b, fc1_w, fc1_b, fc2_w, fc2_b, mean_w,
      mean_b, log_std, value_w, value_b, aux_w, aux_b;
  std::size_t total = 0;

  explicit ParamLayout(const PolicyArch& arch);
};

struct PolicyInit {
  double log_std = -0.5;
  double mean_head_gain = 0.01;
};

class PolicyParams {
 public:
  PolicyParams() : PolicyParams(PolicyArch{}) {}
  explicit PolicyParams(const PolicyArch& arch);  // all-zero parameters

  static PolicyParams initialized(const PolicyArch& arch, std::uint64_t seed,
                                  const PolicyInit& init = {});

  const PolicyArch& arch() const { return arch_; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
  using MatMap = Eigen::Map<Eigen::MatrixXd>;
  ConstMatMap block(const ParamLayout::Block& b) const {
    return ConstMatMap(data_.data() + b.offset, b.rows, b.cols);
  }
  MatMap block(const ParamLayout::Block& b) {
    return MatMap(data_.data() + b.offset, b.rows, b.cols);
  }

  bool all_finite() const;

 private:
  PolicyArch arch_;
  ParamLayout layout_;
  std::vector<double> data_;
};

// Column-per-sample batch of observations.
struct ObsBatch {
  Eigen::MatrixXd scans;  // scan_dim x B
  Eigen::MatrixXd state;  // state_dim x B

  int size() const { return static_cast<int>(scans.cols()); }
  static ObsBatch from(const std::vector<const Observation*>& obs);
  static ObsBatch single(const Observation& obs);
};

struct PolicyOutput {
  Eigen::MatrixXd mean;     // 3 x B
  Eigen::Vector3d log_std;  // clamped
  Eigen::RowVectorXd value;
  Eigen::MatrixXd aux;  // 3 x B
};

// Intermediate activations kept for the backward pass.
struct ForwardCache {
  Eigen::MatrixXd col1, y1, col2, y2, feat, xcat, h1, h2;
  Eigen::Vector3d raw_log_std;
};

PolicyOutput policy_forward(const PolicyParams& params, const ObsBatch& obs,
                            ForwardCache* cache = nullptr);

struct OutputGrads {
  Eigen::MatrixXd mean;  // 3 x B
  Eigen::Vector3d log_std = Eigen::Vector3d::Zero();
  Eigen::RowVectorXd value;
  Eigen::MatrixXd aux;  // 3 x B
};

// Accumulates d(loss)/d(params) into grad (same layout as the parameter vector).
void policy_backward(const PolicyParams& params, const ForwardCache& cache, const OutputGrads& g,
                     std::vector<double>& grad);

// Bit pattern of every ReLU and clamp decision in a cached forward pass.
std::vector<std::uint8_t> activation_pattern(const ForwardCache& cache, const PolicyArch& arch);

// Diagonal Gaussian in pre-squash space.
struct ActionDistribution {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d log_std = Eigen::Vector3d::Zero();

  Eigen::Vector3d std() const { return log_std.array().exp(); }
};

// v = v_max * sigmoid(s0); motion = pi * tanh(s1); camera = pi * tanh(s2).
Action squash(const Eigen::Vector3d& sample, double max_speed);
Eigen::Vector3d unsquash(const Action& action, double max_speed);
// log |det d(squash)/d(sample)|.
double squash_log_det(const Eigen::Vector3d& sample, double max_speed);

double gaussian_log_prob(const Eigen::Vector3d& mean, const Eigen::Vector3d& log_std,
                         const Eigen::Vector3d& sample);
// Density of the squashed action: Gaussian log density minus the squash log-det.
double log_prob(const ActionDistribution& dist, const Eigen::Vector3d& sample, double max_speed);
double gaussian_entropy(const Eigen::Vector3d& log_std);

Eigen::Vector3d sample_action(const ActionDistribution& dist, std::mt19937_64& rng);

// Single-observation evaluation used by rollout and evaluation workers.
struct PolicyStep {
  ActionDistribution dist;
  double value = 0.0;
  Eigen::Vector3d aux = Eigen::Vector3d::Zero();
};
PolicyStep evaluate_policy(const PolicyParams& params, const Observation& obs);

}  // namespace crowdnav
