#include "crowdnav/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace crowdnav::nn {

NetArch NetArch::policy_discrete() { return NetArch{}; }

NetArch NetArch::policy_continuous() {
  NetArch a;
  a.head = HeadKind::gaussian;
  a.outputs = 2;
  return a;
}

NetArch NetArch::value() {
  NetArch a;
  a.head = HeadKind::value;
  a.outputs = 1;
  return a;
}

int NetArch::pooled_size() const {
  int s = map_size;
  for (int i = 0; i < 3; ++i) s /= 2;
  return s;
}

std::size_t NetArch::feature_count() const {
  const auto p = static_cast<std::size_t>(pooled_size());
  return static_cast<std::size_t>(filters[2]) * p * p;
}

std::size_t NetArch::parameter_count() const { return ParamLayout(*this).total; }

std::uint64_t NetArch::hash() const {
  // FNV-1a over the textual description.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : describe()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string NetArch::describe() const {
  std::ostringstream os;
  os << "in=" << in_channels << " size=" << map_size << " filters=" << filters[0] << ','
     << filters[1] << ',' << filters[2] << " k=" << kernel << " flat=" << flat_units
     << " goal=" << goal_dim << "->" << goal_units << " hidden=" << hidden << " head="
     << (head == HeadKind::categorical ? "categorical" : head == HeadKind::gaussian ? "gaussian" : "value")
     << " out=" << outputs;
  if (head == HeadKind::gaussian) {
    os << " logstd=" << (log_std == LogStdMode::parameter ? "parameter" : "head");
  }
  return os.str();
}

ParamLayout::ParamLayout(const NetArch& a) {
  std::size_t off = 0;
  auto take = [&](std::size_t rows, std::size_t cols) {
    ParamSlice s{off, rows, cols};
    off += rows * cols;
    return s;
  };
  std::size_t in_c = static_cast<std::size_t>(a.in_channels);
  const auto k2 = static_cast<std::size_t>(a.kernel * a.kernel);
  for (std::size_t l = 0; l < 3; ++l) {
    const auto f = static_cast<std::size_t>(a.filters[l]);
    conv_w[l] = take(f, in_c * k2);
    conv_b[l] = take(f, 1);
    in_c = f;
  }
  const auto flat = static_cast<std::size_t>(a.flat_units);
  const auto gu = static_cast<std::size_t>(a.goal_units);
  const auto hid = static_cast<std::size_t>(a.hidden);
  const auto out = static_cast<std::size_t>(a.outputs);
  flat_w = take(flat, a.feature_count());
  flat_b = take(flat, 1);
  goal_w = take(gu, static_cast<std::size_t>(a.goal_dim));
  goal_b = take(gu, 1);
  fc1_w = take(hid, flat + gu);
  fc1_b = take(hid, 1);
  fc2_w = take(hid, hid);
  fc2_b = take(hid, 1);
  head_w = take(out, hid);
  head_b = take(out, 1);
  if (a.head == HeadKind::gaussian) {
    if (a.log_std == LogStdMode::head) log_std_w = take(out, hid);
    log_std_b = take(out, 1);
  }
  total = off;
}

std::vector<std::pair<std::string, ParamSlice>> ParamLayout::named() const {
  std::vector<std::pair<std::string, ParamSlice>> v;
  for (std::size_t l = 0; l < 3; ++l) {
    v.emplace_back("conv" + std::to_string(l + 1) + ".W", conv_w[l]);
    v.emplace_back("conv" + std::to_string(l + 1) + ".b", conv_b[l]);
  }
  v.emplace_back("flat.W", flat_w);
  v.emplace_back("flat.b", flat_b);
  v.emplace_back("goal.W", goal_w);
  v.emplace_back("goal.b", goal_b);
  v.emplace_back("fc1.W", fc1_w);
  v.emplace_back("fc1.b", fc1_b);
  v.emplace_back("fc2.W", fc2_w);
  v.emplace_back("fc2.b", fc2_b);
  v.emplace_back("head.W", head_w);
  v.emplace_back("head.b", head_b);
  if (log_std_w.size() > 0) v.emplace_back("log_std.W", log_std_w);
  if (log_std_b.size() > 0) v.emplace_back("log_std", log_std_b);
  return v;
}

namespace {

template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const Mat<T>>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
CMapMat<T> view(const std::vector<T>& p, const ParamSlice& s) {
  return CMapMat<T>(p.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                    static_cast<Eigen::Index>(s.cols));
}

template <typename T>
MapMat<T> view(std::span<T> p, const ParamSlice& s) {
  return MapMat<T>(p.data() + s.offset, static_cast<Eigen::Index>(s.rows),
                   static_cast<Eigen::Index>(s.cols));
}

// Same-padded im2col: rows = channel * k * k, cols = h * w.
template <typename T>
void im2col(const T* in, int channels, int size, int k, Mat<T>& col) {
  const int pad = k / 2;
  col.resize(channels * k * k, size * size);
  for (int c = 0; c < channels; ++c) {
    const T* plane = in + static_cast<std::ptrdiff_t>(c) * size * size;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = col.data() + static_cast<std::ptrdiff_t>((c * k + ki) * k + kj) * size * size;
        const int shift = kj - pad;
        const int x0 = std::max(0, -shift);
        const int x1 = std::min(size, size - shift);
        for (int y = 0; y < size; ++y) {
          T* dst = row + y * size;
          const int sy = y + ki - pad;
          if (sy < 0 || sy >= size) {
            std::fill(dst, dst + size, T(0));
            continue;
          }
          std::fill(dst, dst + x0, T(0));
          std::copy(plane + sy * size + x0 + shift, plane + sy * size + x1 + shift, dst + x0);
          std::fill(dst + x1, dst + size, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im(const Mat<T>& col, int channels, int size, int k, T* out) {
  const int pad = k / 2;
  std::fill(out, out + channels * size * size, T(0));
  for (int c = 0; c < channels; ++c) {
    T* plane = out + static_cast<std::ptrdiff_t>(c) * size * size;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row =
            col.data() + static_cast<std::ptrdiff_t>((c * k + ki) * k + kj) * size * size;
        const int shift = kj - pad;
        const int x0 = std::max(0, -shift);
        const int x1 = std::min(size, size - shift);
        for (int y = 0; y < size; ++y) {
          const int sy = y + ki - pad;
          if (sy < 0 || sy >= size) continue;
          const T* src = row + y * size;
          T* dst = plane + sy * size + shift;
          for (int x = x0; x < x1; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

// 2x2 stride-2 max pool; ties resolve to the first cell in row-major order.
template <typename T>
void max_pool(const T* in, int channels, int size, T* out, std::int32_t* arg) {
  const int half = size / 2;
  for (int c = 0; c < channels; ++c) {
    const T* plane = in + static_cast<std::ptrdiff_t>(c) * size * size;
    for (int y = 0; y < half; ++y) {
      for (int x = 0; x < half; ++x) {
        int best = (2 * y) * size + 2 * x;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (2 * y + dy) * size + 2 * x + dx;
            if (plane[idx] > plane[best]) best = idx;
          }
        }
        const std::ptrdiff_t o = (static_cast<std::ptrdiff_t>(c) * half + y) * half + x;
        out[o] = plane[best];
        arg[o] = static_cast<std::int32_t>(c * size * size + best);
      }
    }
  }
}

template <typename T>
void relu_inplace(Mat<T>& m) {
  m = m.cwiseMax(T(0));
}

template <typename T>
void orthogonal_fill(MapMat<T> w, double gain, Rng& rng) {
  const Eigen::Index rows = w.rows();
  const Eigen::Index cols = w.cols();
  const Eigen::Index big = std::max(rows, cols);
  const Eigen::Index small = std::min(rows, cols);
  Eigen::MatrixXd g(big, small);
  for (Eigen::Index i = 0; i < big; ++i) {
    for (Eigen::Index j = 0; j < small; ++j) g(i, j) = standard_normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(small, small);
  for (Eigen::Index j = 0; j < small; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  if (rows >= cols) {
    w = (q * gain).template cast<T>();
  } else {
    w = (q.transpose() * gain).template cast<T>();
  }
}

}  // namespace

template <typename T>
ConvNet<T>::ConvNet(NetArch arch) : arch_(arch), layout_(arch_), params_(layout_.total, T(0)) {
  if (arch_.pooled_size() < 1) throw std::invalid_argument("map too small for three pooling stages");
}

template <typename T>
ConvNet<T>::ConvNet(NetArch arch, std::uint64_t init_seed) : ConvNet(arch) {
  Rng rng = make_rng(init_seed);
  initialize(rng);
}

template <typename T>
void ConvNet<T>::initialize(Rng& rng) {
  std::fill(params_.begin(), params_.end(), T(0));
  std::span<T> p(params_);
  const double relu_gain = std::sqrt(2.0);
  for (std::size_t l = 0; l < 3; ++l) orthogonal_fill<T>(view(p, layout_.conv_w[l]), relu_gain, rng);
  orthogonal_fill<T>(view(p, layout_.flat_w), relu_gain, rng);
  orthogonal_fill<T>(view(p, layout_.goal_w), 1.0, rng);
  orthogonal_fill<T>(view(p, layout_.fc1_w), relu_gain, rng);
  orthogonal_fill<T>(view(p, layout_.fc2_w), relu_gain, rng);
  orthogonal_fill<T>(view(p, layout_.head_w), arch_.head == HeadKind::value ? 1.0 : 0.01, rng);
  if (arch_.head == HeadKind::gaussian) {
    if (arch_.log_std == LogStdMode::head) orthogonal_fill<T>(view(p, layout_.log_std_w), 0.01, rng);
    auto b = view(p, layout_.log_std_b);
    b.setConstant(T(-0.5));
  }
}

template <typename T>
ForwardResult<T> ConvNet<T>::forward(const Batch<T>& batch, bool keep_cache) const {
  const NetArch& a = arch_;
  const std::size_t n = batch.n;
  const auto in_size = static_cast<std::size_t>(a.in_channels * a.map_size * a.map_size);
  if (n == 0) throw std::invalid_argument("forward: empty batch");
  if (batch.maps.size() != n * in_size || batch.goals.size() != n * static_cast<std::size_t>(a.goal_dim)) {
    throw std::invalid_argument("forward: batch shape does not match architecture");
  }
  auto finite = [](T v) { return std::isfinite(static_cast<double>(v)); };
  if (!std::all_of(batch.maps.begin(), batch.maps.end(), finite) ||
      !std::all_of(batch.goals.begin(), batch.goals.end(), finite)) {
    throw std::invalid_argument("forward: non-finite input");
  }

  ForwardResult<T> res;
  ForwardCache<T>& c = res.cache;
  c.n = n;
  c.input = batch.maps;

  const std::vector<T>& p = params_;
  int channels = a.in_channels;
  int size = a.map_size;
  const std::vector<T>* layer_in = &c.input;
  Mat<T> col;
  for (std::size_t l = 0; l < 3; ++l) {
    const int f = a.filters[l];
    const int half = size / 2;
    const auto plane_in = static_cast<std::size_t>(channels * size * size);
    const auto plane_out = static_cast<std::size_t>(f * size * size);
    const auto plane_pool = static_cast<std::size_t>(f * half * half);
    c.conv_out[l].assign(n * plane_out, T(0));
    c.pooled[l].assign(n * plane_pool, T(0));
    c.argmax[l].assign(n * plane_pool, 0);
    const auto w = view(p, layout_.conv_w[l]);
    const auto b = view(p, layout_.conv_b[l]);
    for (std::size_t s = 0; s < n; ++s) {
      im2col(layer_in->data() + s * plane_in, channels, size, a.kernel, col);
      MapMat<T> out(c.conv_out[l].data() + s * plane_out, f, size * size);
      out.noalias() = w * col;
      out.colwise() += b.col(0);
      out = out.cwiseMax(T(0));
      max_pool(out.data(), f, size, c.pooled[l].data() + s * plane_pool,
               c.argmax[l].data() + s * plane_pool);
    }
    layer_in = &c.pooled[l];
    channels = f;
    size = half;
  }

  const auto feat = static_cast<Eigen::Index>(a.feature_count());
  const CMapMat<T> features(c.pooled[2].data(), static_cast<Eigen::Index>(n), feat);
  c.flat = (features * view(p, layout_.flat_w).transpose()).rowwise() +
           view(p, layout_.flat_b).col(0).transpose();
  relu_inplace(c.flat);

  c.goals = CMapMat<T>(batch.goals.data(), static_cast<Eigen::Index>(n), a.goal_dim);
  c.goal_proj = (c.goals * view(p, layout_.goal_w).transpose()).rowwise() +
                view(p, layout_.goal_b).col(0).transpose();

  c.concat.resize(static_cast<Eigen::Index>(n), a.flat_units + a.goal_units);
  c.concat << c.flat, c.goal_proj;

  c.fc1 = (c.concat * view(p, layout_.fc1_w).transpose()).rowwise() +
          view(p, layout_.fc1_b).col(0).transpose();
  relu_inplace(c.fc1);
  c.fc2 = (c.fc1 * view(p, layout_.fc2_w).transpose()).rowwise() +
          view(p, layout_.fc2_b).col(0).transpose();
  relu_inplace(c.fc2);

  res.out = (c.fc2 * view(p, layout_.head_w).transpose()).rowwise() +
            view(p, layout_.head_b).col(0).transpose();
  if (a.head == HeadKind::gaussian) {
    if (a.log_std == LogStdMode::head) {
      res.log_std = (c.fc2 * view(p, layout_.log_std_w).transpose()).rowwise() +
                    view(p, layout_.log_std_b).col(0).transpose();
    } else {
      res.log_std = view(p, layout_.log_std_b).col(0).transpose().replicate(static_cast<Eigen::Index>(n), 1);
    }
  }
  if (!keep_cache) c = ForwardCache<T>{};
  return res;
}

template <typename T>
void ConvNet<T>::backward(const ForwardCache<T>& c, const Mat<T>& d_out, const Mat<T>& d_log_std,
                          std::span<T> grad) const {
  const NetArch& a = arch_;
  const auto n = static_cast<Eigen::Index>(c.n);
  if (grad.size() != layout_.total) throw std::invalid_argument("backward: gradient size mismatch");
  if (d_out.rows() != n || d_out.cols() != a.outputs) {
    throw std::invalid_argument("backward: output gradient shape mismatch");
  }
  if (c.input.empty()) throw std::invalid_argument("backward: forward cache not recorded");
  const std::vector<T>& p = params_;

  // Head.
  view(grad, layout_.head_w).noalias() += d_out.transpose() * c.fc2;
  view(grad, layout_.head_b).col(0) += d_out.colwise().sum().transpose();
  Mat<T> d_fc2 = d_out * view(p, layout_.head_w);

  if (a.head == HeadKind::gaussian && d_log_std.size() > 0) {
    if (a.log_std == LogStdMode::head) {
      view(grad, layout_.log_std_w).noalias() += d_log_std.transpose() * c.fc2;
      view(grad, layout_.log_std_b).col(0) += d_log_std.colwise().sum().transpose();
      d_fc2.noalias() += d_log_std * view(p, layout_.log_std_w);
    } else {
      view(grad, layout_.log_std_b).col(0) += d_log_std.colwise().sum().transpose();
    }
  }

  // Trunk.
  d_fc2 = d_fc2.cwiseProduct((c.fc2.array() > T(0)).matrix().template cast<T>());
  view(grad, layout_.fc2_w).noalias() += d_fc2.transpose() * c.fc1;
  view(grad, layout_.fc2_b).col(0) += d_fc2.colwise().sum().transpose();
  Mat<T> d_fc1 = d_fc2 * view(p, layout_.fc2_w);

  d_fc1 = d_fc1.cwiseProduct((c.fc1.array() > T(0)).matrix().template cast<T>());
  view(grad, layout_.fc1_w).noalias() += d_fc1.transpose() * c.concat;
  view(grad, layout_.fc1_b).col(0) += d_fc1.colwise().sum().transpose();
  const Mat<T> d_concat = d_fc1 * view(p, layout_.fc1_w);

  const Mat<T> d_goal = d_concat.rightCols(a.goal_units);
  view(grad, layout_.goal_w).noalias() += d_goal.transpose() * c.goals;
  view(grad, layout_.goal_b).col(0) += d_goal.colwise().sum().transpose();

  Mat<T> d_flat = d_concat.leftCols(a.flat_units);
  d_flat = d_flat.cwiseProduct((c.flat.array() > T(0)).matrix().template cast<T>());
  const auto feat = static_cast<Eigen::Index>(a.feature_count());
  const CMapMat<T> features(c.pooled[2].data(), n, feat);
  view(grad, layout_.flat_w).noalias() += d_flat.transpose() * features;
  view(grad, layout_.flat_b).col(0) += d_flat.colwise().sum().transpose();
  Mat<T> d_features = d_flat * view(p, layout_.flat_w);

  // Conv stack, last layer first.
  std::vector<T> d_pooled(d_features.data(), d_features.data() + d_features.size());
  std::vector<T> d_conv;
  std::vector<T> d_below;
  Mat<T> col;
  Mat<T> d_col;
  for (int l = 2; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    const int f = a.filters[lu];
    const int size = a.map_size >> l;
    const int half = size / 2;
    const int channels = l == 0 ? a.in_channels : a.filters[lu - 1];
    const auto plane_out = static_cast<std::size_t>(f * size * size);
    const auto plane_pool = static_cast<std::size_t>(f * half * half);
    const auto plane_in = static_cast<std::size_t>(channels * size * size);
    const std::vector<T>& layer_in = l == 0 ? c.input : c.pooled[lu - 1];

    d_conv.assign(c.n * plane_out, T(0));
    for (std::size_t i = 0; i < c.n * plane_pool; ++i) {
      const std::size_t s = i / plane_pool;
      d_conv[s * plane_out + static_cast<std::size_t>(c.argmax[lu][i])] += d_pooled[i];
    }
    // ReLU mask on the pre-pool activations.
    for (std::size_t i = 0; i < d_conv.size(); ++i) {
      if (c.conv_out[lu][i] <= T(0)) d_conv[i] = T(0);
    }

    auto gw = view(grad, layout_.conv_w[lu]);
    auto gb = view(grad, layout_.conv_b[lu]);
    const auto w = view(p, layout_.conv_w[lu]);
    if (l > 0) d_below.assign(c.n * plane_in, T(0));
    for (std::size_t s = 0; s < c.n; ++s) {
      const CMapMat<T> dz(d_conv.data() + s * plane_out, f, size * size);
      im2col(layer_in.data() + s * plane_in, channels, size, a.kernel, col);
      gw.noalias() += dz * col.transpose();
      gb.col(0) += dz.rowwise().sum();
      if (l > 0) {
        d_col.noalias() = w.transpose() * dz;
        col2im(d_col, channels, size, a.kernel, d_below.data() + s * plane_in);
      }
    }
    if (l > 0) d_pooled.swap(d_below);
  }
}

template class ConvNet<float>;
template class ConvNet<double>;

}  // namespace crowdnav::nn
