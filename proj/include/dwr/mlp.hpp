#pragma once

// Dense tanh network R^2 -> R with exact first and second spatial
// derivatives. Parameters live in one flat vector; layer i contributes its
// weight matrix W_i (n_i x n_{i-1}, column-major) followed by its bias b_i.
//
// Derivatives are propagated forward as jets (value, d/dx, d/dy, d2/dx2,
// d2/dy2). Batches of points are processed as matrices of shape
// n_i x 5N whose column blocks hold the five jet components.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dwr/errors.hpp"
#include "dwr/geometry.hpp"

namespace dwr {

struct NetJet {
  double value = 0.0;
  Point grad;
  double laplacian = 0.0;
};

/// Output jets of a batch, one row each, plus the cached layer states needed
/// for the reverse pass.
struct BatchJets {
  Eigen::Index n_points = 0;
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per hidden layer, n_i x 5N
  std::vector<Eigen::MatrixXd> post;  // layer inputs (post[0] = input jets)
  Eigen::RowVectorXd out;             // 1 x 5N

  auto component(int c) const { return out.segment(c * n_points, n_points); }
};

enum JetComponent : int { kValue = 0, kDx = 1, kDy = 2, kDxx = 3, kDyy = 4 };

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

class Mlp {
 public:
  Mlp() = default;

  /// All parameters zero.
  explicit Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    detail::require(sizes_.size() >= 2, "Mlp: need at least input and output layers");
    detail::require(sizes_.front() == 2, "Mlp: input size must be 2");
    detail::require(sizes_.back() == 1, "Mlp: output size must be 1");
    std::size_t n = 0;
    for (std::size_t i = 1; i < sizes_.size(); ++i) {
      detail::require(sizes_[i] > 0, "Mlp: layer sizes must be positive");
      offsets_.push_back(n);
      n += static_cast<std::size_t>(sizes_[i]) * static_cast<std::size_t>(sizes_[i - 1] + 1);
    }
    params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  }

  /// Weights uniform in [-1/sqrt(n_in), 1/sqrt(n_in)], biases zero.
  static Mlp init(std::vector<int> layer_sizes, std::uint64_t seed) {
    Mlp net(std::move(layer_sizes));
    std::mt19937_64 rng(detail::splitmix64(seed));
    for (int l = 0; l < net.n_layers(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(net.sizes_[l]));
      auto W = net.weights(l);
      for (Eigen::Index j = 0; j < W.cols(); ++j)
        for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = bound * (2.0 * detail::unit_uniform(rng) - 1.0);
    }
    return net;
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int n_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  Eigen::Index n_params() const { return params_.size(); }
  const Eigen::VectorXd& params() const { return params_; }

  void set_params(const Eigen::VectorXd& p) {
    detail::require(p.size() == params_.size(), "Mlp: parameter vector has wrong length");
    params_ = p;
  }

  bool all_finite() const { return params_.allFinite(); }

  Eigen::Map<Eigen::MatrixXd> weights(int l) {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<const Eigen::MatrixXd> weights(int l) const {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<Eigen::VectorXd> bias(int l) {
    return {params_.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1] * sizes_[l]), sizes_[l + 1]};
  }
  Eigen::Map<const Eigen::VectorXd> bias(int l) const {
    return {params_.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1] * sizes_[l]), sizes_[l + 1]};
  }

  double operator()(Point x) const { return forward_with_derivatives(x).value; }

  NetJet forward_with_derivatives(Point x) const {
    Eigen::Matrix2Xd pts(2, 1);
    pts << x.x, x.y;
    const BatchJets j = forward_batch(pts);
    return {j.out[kValue], {j.out[kDx], j.out[kDy]}, j.out[kDxx] + j.out[kDyy]};
  }

  /// Jets for every column of pts.
  BatchJets forward_batch(const Eigen::Matrix2Xd& pts) const {
    const Eigen::Index N = pts.cols();
    BatchJets j;
    j.n_points = N;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2, 5 * N);
    h.leftCols(N) = pts;
    h.block(0, N, 1, N).setOnes();
    h.block(1, 2 * N, 1, N).setOnes();
    for (int l = 0; l < n_layers(); ++l) {
      Eigen::MatrixXd a = weights(l) * h;
      a.leftCols(N).colwise() += bias(l);
      j.post.push_back(std::move(h));
      if (l + 1 == n_layers()) {
        j.out = a.row(0);
        break;
      }
      h = activate(a, N);
      j.pre.push_back(std::move(a));
    }
    return j;
  }

  /// Parameter gradient of sum_c sum_p g(c, p) * out_c(p), where g is 1 x 5N
  /// in the same block layout as BatchJets::out.
  Eigen::VectorXd backward(const BatchJets& j, const Eigen::RowVectorXd& g) const {
    const Eigen::Index N = j.n_points;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
    Eigen::MatrixXd ga = g;
    for (int l = n_layers() - 1; l >= 0; --l) {
      Eigen::Map<Eigen::MatrixXd> gW(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
      Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1] * sizes_[l]),
                                     sizes_[l + 1]);
      gW.noalias() = ga * j.post[l].transpose();
      gb = ga.leftCols(N).rowwise().sum();
      if (l == 0) break;
      const Eigen::MatrixXd gh = weights(l).transpose() * ga;
      ga = activate_backward(j.pre[l - 1], gh, N);
    }
    return grad;
  }

  /// Text snapshot: "dwr-mlp 1", "layers n0 n1 ...", "params P", then one
  /// hex-float parameter per line.
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("Mlp::save: cannot open " + path);
    out << to_text();
    if (!out) throw std::runtime_error("Mlp::save: write failed for " + path);
  }

  std::string to_text() const {
    std::ostringstream s;
    s << "dwr-mlp 1\nlayers";
    for (int n : sizes_) s << ' ' << n;
    s << "\nparams " << params_.size() << '\n';
    char buf[64];
    for (Eigen::Index i = 0; i < params_.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%a\n", params_[i]);
      s << buf;
    }
    return s.str();
  }

  static Mlp load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("Mlp::load: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
  }

  static Mlp from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line, word;
    std::getline(in, line);
    if (line != "dwr-mlp 1") throw InvalidArgument("Mlp: bad snapshot header");
    std::getline(in, line);
    std::istringstream ls(line);
    ls >> word;
    if (word != "layers") throw InvalidArgument("Mlp: missing layers line");
    std::vector<int> sizes;
    for (int n; ls >> n;) sizes.push_back(n);
    Mlp net(sizes);
    std::getline(in, line);
    std::istringstream ps(line);
    long long count = -1;
    ps >> word >> count;
    if (word != "params" || count != net.n_params()) throw InvalidArgument("Mlp: parameter count mismatch");
    for (Eigen::Index i = 0; i < net.n_params(); ++i) {
      if (!std::getline(in, line)) throw InvalidArgument("Mlp: truncated snapshot");
      net.params_[i] = std::strtod(line.c_str(), nullptr);
    }
    return net;
  }

 private:
  static Eigen::MatrixXd activate(const Eigen::MatrixXd& a, Eigen::Index N) {
    Eigen::MatrixXd h(a.rows(), a.cols());
    const auto t = a.leftCols(N).array().tanh().eval();
    const auto s1 = (1.0 - t.square()).eval();
    const auto s2 = (-2.0 * t * s1).eval();
    const auto ax = a.middleCols(N, N).array();
    const auto ay = a.middleCols(2 * N, N).array();
    h.leftCols(N) = t.matrix();
    h.middleCols(N, N) = (s1 * ax).matrix();
    h.middleCols(2 * N, N) = (s1 * ay).matrix();
    h.middleCols(3 * N, N) = (s1 * a.middleCols(3 * N, N).array() + s2 * ax.square()).matrix();
    h.middleCols(4 * N, N) = (s1 * a.middleCols(4 * N, N).array() + s2 * ay.square()).matrix();
    return h;
  }

  static Eigen::MatrixXd activate_backward(const Eigen::MatrixXd& a, const Eigen::MatrixXd& gh, Eigen::Index N) {
    const auto t = a.leftCols(N).array().tanh().eval();
    const auto s1 = (1.0 - t.square()).eval();
    const auto s2 = (-2.0 * t * s1).eval();
    const auto s3 = (-2.0 * s1.square() - 2.0 * t * s2).eval();
    const auto ax = a.middleCols(N, N).array();
    const auto ay = a.middleCols(2 * N, N).array();
    const auto axx = a.middleCols(3 * N, N).array();
    const auto ayy = a.middleCols(4 * N, N).array();
    const auto gv = gh.leftCols(N).array();
    const auto gx = gh.middleCols(N, N).array();
    const auto gy = gh.middleCols(2 * N, N).array();
    const auto gxx = gh.middleCols(3 * N, N).array();
    const auto gyy = gh.middleCols(4 * N, N).array();
    Eigen::MatrixXd ga(a.rows(), a.cols());
    ga.leftCols(N) = (gv * s1 + gx * s2 * ax + gy * s2 * ay + gxx * (s3 * ax.square() + s2 * axx) +
                      gyy * (s3 * ay.square() + s2 * ayy))
                         .matrix();
    ga.middleCols(N, N) = (gx * s1 + 2.0 * gxx * s2 * ax).matrix();
    ga.middleCols(2 * N, N) = (gy * s1 + 2.0 * gyy * s2 * ay).matrix();
    ga.middleCols(3 * N, N) = (gxx * s1).matrix();
    ga.middleCols(4 * N, N) = (gyy * s1).matrix();
    return ga;
  }

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd params_;
};

}  // namespace dwr
