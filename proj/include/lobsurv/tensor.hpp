#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lobsurv {

using Mat = Eigen::MatrixXd;

enum class MaskKind { Causal, LogSparse };
std::string to_string(MaskKind m);
MaskKind mask_kind_from_string(const std::string& s);

inline constexpr double kMaskValue = -1e9;
inline constexpr double kPositiveFloor = 1e-6;

// Additive T x T mask: 0 where j may be attended from i, kMaskValue elsewhere.
// LogSparse keeps j = i and j = i - 2^k.
Mat attention_mask(int T, MaskKind kind);

enum class Init { Zeros, Xavier, Positive };

struct Param {
  std::string name;
  Mat value;  // unconstrained storage u
  Mat grad;
  bool positive = false;  // effective weight softplus(u) + kPositiveFloor
  Init init = Init::Xavier;
};

// Named parameters in insertion order (order fixes serialization and RNG draws).
class ParamStore {
 public:
  Param& add(const std::string& name, int rows, int cols, Init init, bool positive = false);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  void initialize(std::uint64_t seed);
  void zero_grad();
  double grad_norm() const;
  double value_norm() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

 private:
  std::vector<Param> params_;
  std::map<std::string, std::size_t> index_;
};

class Graph;

// Handle to a node on a Graph tape.
struct Var {
  Graph* g = nullptr;
  int id = -1;

  const Mat& value() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
};

// Reverse-mode tape. Nodes are appended in topological order; backward walks
// them in reverse.
class Graph {
 public:
  Var constant(Mat value);
  // Leaf whose gradient is retained, for grad_wrt_input.
  Var input(Mat value);
  // Effective parameter; positive params pass through softplus + floor.
  Var param(Param& p);

  // Parameter gradients are added into Param::grad unless accumulate_params is false.
  void backward(Var output, bool accumulate_params = true);
  std::size_t size() const { return nodes_.size(); }

  // Internal API used by the op implementations.
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    std::function<void(Graph&, int)> back;
    Param* param = nullptr;
  };
  Var push(Mat value, bool needs_grad, std::function<void(Graph&, int)> back);
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  void accumulate(int id, const Mat& g);

 private:
  std::deque<Node> nodes_;  // stable references across push
};

// Shape-checked primitives. Mismatches throw UsageError naming both shapes.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var add_row(Var a, Var row);  // broadcast a 1 x C row over every row of a
Var mul_row(Var a, Var row);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var neg(Var a);
Var tanh(Var a);
Var dtanh(Var a);  // 1 - tanh(a)^2, evaluated as sech^2
Var sigmoid(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var clamp_min(Var a, double floor);
Var softmax_rows(Var a);
Var softmax_rows(Var a, const Mat& additive_mask);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index n);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index n);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
// Row r of the result is row idx[r] of a, or zeros when idx[r] < 0.
Var gather_rows(Var a, const std::vector<Eigen::Index>& idx);
Var transpose(Var a);
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);  // R x C -> R x 1

// Causal convolution over stacked sequences: x is (B*T) x C_in with each run
// of T rows one sequence, kernel is (s*C_in) x C_out with tap tau in rows
// [tau*C_in, (tau+1)*C_in). y(t) = sum_tau x(t - p*tau) k_tau, zero padded.
Var dilated_causal_conv1d(Var x, Var kernel, int dilation, int T);
Var dilated_causal_conv1d(Var x, Var kernel, int dilation);  // single sequence

// softmax(Q K^T / sqrt(d_k) + M) V for a single sequence.
Var masked_attention(Var Q, Var K, Var V, const Mat& mask);

// Multi-head masked attention over stacked sequences (fused). Q, K, V are
// (B*T) x (H*d_k); head h uses columns [h*d_k, (h+1)*d_k). If `weights` is
// given it receives the post-softmax matrices, index b*H + h.
Var multihead_attention(Var Q, Var K, Var V, int T, int heads, const Mat& mask,
                        std::vector<Mat>* weights = nullptr);
// Final query row only: q_last is B x (H*d_k); the last position attends to
// every allowed key, so the result equals the last row of the full version.
Var multihead_attention_last(Var q_last, Var K, Var V, int T, int heads, const Mat& mask);

// d output / d input(r, c) by a reverse sweep; output must be 1 x 1.
// Throws UsageError if `input` was not created with Graph::input or does not
// reach the output.
double grad_wrt_input(Var output, Var input, Eigen::Index r, Eigen::Index c);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  // Applies one step from the accumulated gradients; returns the pre-clip norm.
  double step(ParamStore& store);
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  long t_ = 0;
  std::vector<Mat> m_, v_;
};

inline double softplus_scalar(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }
// Inverse of softplus(u) + kPositiveFloor.
double positive_inverse(double w);

}  // namespace lobsurv
