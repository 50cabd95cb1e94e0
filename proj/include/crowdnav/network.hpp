#pragma once

// Convolutional policy/value network with hand-written reverse mode.
//
// Layout (all weights row-major, out x in):
//   conv1.W conv1.b conv2.W conv2.b conv3.W conv3.b      3x3 same-padded, ReLU, 2x2 max-pool
//   flat.W flat.b                                        pooled features -> flat_units, ReLU
//   goal.W goal.b                                        goal (3) -> goal_units, linear
//   fc1.W fc1.b                                          [flat, goal] -> hidden, ReLU
//   fc2.W fc2.b                                          hidden -> hidden, ReLU
//   head.W head.b                                        hidden -> outputs, linear
//   log_std (outputs)            gaussian head, LogStdMode::parameter
//   log_std.W log_std.b          gaussian head, LogStdMode::head

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crowdnav/random.hpp"

namespace crowdnav::nn {

enum class HeadKind { categorical, gaussian, value };
enum class LogStdMode { parameter, head };

struct NetArch {
  int in_channels = 4;
  int map_size = 48;
  std::array<int, 3> filters = {32, 64, 64};
  int kernel = 3;
  int flat_units = 512;
  int goal_dim = 3;
  int goal_units = 3;
  int hidden = 512;
  HeadKind head = HeadKind::categorical;
  int outputs = 28;
  LogStdMode log_std = LogStdMode::parameter;

  static NetArch policy_discrete();
  static NetArch policy_continuous();
  static NetArch value();

  /// Spatial size after the three pooling stages.
  int pooled_size() const;
  std::size_t feature_count() const;
  std::size_t parameter_count() const;
  std::uint64_t hash() const;
  std::string describe() const;
};

struct ParamSlice {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;  // 1 for bias vectors
  std::size_t size() const { return rows * cols; }
};

struct ParamLayout {
  std::array<ParamSlice, 3> conv_w;
  std::array<ParamSlice, 3> conv_b;
  ParamSlice flat_w, flat_b, goal_w, goal_b, fc1_w, fc1_b, fc2_w, fc2_b, head_w, head_b;
  ParamSlice log_std_w, log_std_b;  // log_std_w unused in parameter mode
  std::size_t total = 0;

  explicit ParamLayout(const NetArch& arch);
  /// Named slices in storage order, for diagnostics and gradient checks.
  std::vector<std::pair<std::string, ParamSlice>> named() const;
};

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A batch of network inputs: maps are n x C x S x S, goals n x goal_dim.
template <typename T>
struct Batch {
  std::size_t n = 0;
  std::vector<T> maps;
  std::vector<T> goals;
};

template <typename T>
struct ForwardCache {
  std::size_t n = 0;
  std::vector<T> input;
  std::array<std::vector<T>, 3> conv_out;  // post-ReLU, pre-pool
  std::array<std::vector<T>, 3> pooled;
  std::array<std::vector<std::int32_t>, 3> argmax;
  Mat<T> goals, flat, goal_proj, concat, fc1, fc2;
};

template <typename T>
struct ForwardResult {
  Mat<T> out;      // n x outputs (logits, mean, or value)
  Mat<T> log_std;  // n x outputs for gaussian heads, empty otherwise
  ForwardCache<T> cache;
};

template <typename T>
class ConvNet {
 public:
  explicit ConvNet(NetArch arch);
  ConvNet(NetArch arch, std::uint64_t init_seed);

  const NetArch& arch() const { return arch_; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }

  /// Orthogonal init scaled per layer, zero biases, log-std -0.5.
  void initialize(Rng& rng);

  /// Rejects non-finite inputs with std::invalid_argument.
  ForwardResult<T> forward(const Batch<T>& batch, bool keep_cache = true) const;

  /// Accumulates dL/dparams into `grad` (size parameter_count()). `d_log_std`
  /// may be empty for non-gaussian heads.
  void backward(const ForwardCache<T>& cache, const Mat<T>& d_out, const Mat<T>& d_log_std,
                std::span<T> grad) const;

 private:
  NetArch arch_;
  ParamLayout layout_;
  std::vector<T> params_;
};

extern template class ConvNet<float>;
extern template class ConvNet<double>;

}  // namespace crowdnav::nn
