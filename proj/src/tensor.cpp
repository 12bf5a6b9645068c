#include "lobsurv/tensor.hpp"

#include <cmath>
#include <memory>

#include "lobsurv/error.hpp"

namespace lobsurv {

namespace {

std::string shape(const Mat& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

void require_same(const char* op, Var a, Var b) {
  if (a.g != b.g) throw UsageError(std::string(op) + ": operands belong to different graphs");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError(std::string(op) + ": shape mismatch " + shape(a.value()) + " vs " + shape(b.value()));
  }
}

bool needs(Var a) { return a.g->node(a.id).needs_grad; }

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Unary elementwise op with derivative computed from (input, output).
template <class F, class D>
Var unary(Var a, F f, D d) {
  Mat out = a.value().unaryExpr(f);
  const int ia = a.id;
  return a.g->push(std::move(out), needs(a), [ia, d](Graph& g, int self) {
    const Mat& x = g.node(ia).value;
    const Mat& y = g.node(self).value;
    Mat local(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) local(i) = d(x(i), y(i));
    g.accumulate(ia, g.node(self).grad.cwiseProduct(local));
  });
}

}  // namespace

std::string to_string(MaskKind m) { return m == MaskKind::Causal ? "causal" : "log_sparse"; }

MaskKind mask_kind_from_string(const std::string& s) {
  if (s == "causal") return MaskKind::Causal;
  if (s == "log_sparse") return MaskKind::LogSparse;
  throw UsageError("unknown mask kind '" + s + "'");
}

Mat attention_mask(int T, MaskKind kind) {
  Mat m = Mat::Constant(T, T, kMaskValue);
  for (int i = 0; i < T; ++i) {
    if (kind == MaskKind::Causal) {
      for (int j = 0; j <= i; ++j) m(i, j) = 0.0;
    } else {
      m(i, i) = 0.0;
      for (int step = 1; step <= i; step *= 2) m(i, i - step) = 0.0;
    }
  }
  return m;
}

double positive_inverse(double w) {
  const double v = w - kPositiveFloor;
  if (!(v > 0)) throw UsageError("positive parameter must exceed the floor");
  return v > 30 ? v : std::log(std::expm1(v));
}

// ---- ParamStore ----

Param& ParamStore::add(const std::string& name, int rows, int cols, Init init, bool positive) {
  if (index_.count(name)) throw UsageError("duplicate parameter name '" + name + "'");
  index_[name] = params_.size();
  params_.push_back(Param{name, Mat::Zero(rows, cols), Mat::Zero(rows, cols), positive, init});
  return params_.back();
}

Param& ParamStore::get(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter '" + name + "'");
  return params_[it->second];
}

const Param& ParamStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter '" + name + "'");
  return params_[it->second];
}

void ParamStore::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& p : params_) {
    const double fan_in = static_cast<double>(p.value.rows());
    const double fan_out = static_cast<double>(p.value.cols());
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      switch (p.init) {
        case Init::Zeros:
          p.value(i) = 0.0;
          break;
        case Init::Xavier:
          p.value(i) = (2.0 * unit(rng) - 1.0) * a;
          break;
        case Init::Positive:
          p.value(i) = positive_inverse(kPositiveFloor + a * (0.25 + 0.75 * unit(rng)));
          break;
      }
    }
    p.grad.setZero();
  }
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

double ParamStore::grad_norm() const {
  double s = 0;
  for (const auto& p : params_) s += p.grad.squaredNorm();
  return std::sqrt(s);
}

double ParamStore::value_norm() const {
  double s = 0;
  for (const auto& p : params_) s += p.value.squaredNorm();
  return std::sqrt(s);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

// ---- Graph ----

const Mat& Var::value() const { return g->node(id).value; }
const Mat& Var::grad() const { return g->node(id).grad; }

double Var::scalar() const {
  if (rows() != 1 || cols() != 1) throw UsageError("scalar() on shape " + shape(value()));
  return value()(0, 0);
}

Var Graph::push(Mat value, bool needs_grad, std::function<void(Graph&, int)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Mat value) { return push(std::move(value), false, nullptr); }

Var Graph::input(Mat value) { return push(std::move(value), true, [](Graph&, int) {}); }

Var Graph::param(Param& p) {
  Var raw = push(p.value, true, [](Graph&, int) {});
  node(raw.id).param = &p;
  if (!p.positive) return raw;
  return add_scalar(softplus(raw), kPositiveFloor);
}

void Graph::accumulate(int id, const Mat& g) {
  Node& n = node(id);
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Graph::backward(Var output, bool accumulate_params) {
  if (output.g != this) throw UsageError("backward on a foreign variable");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  node(output.id).grad = Mat::Ones(output.rows(), output.cols());
  for (int i = output.id; i >= 0; --i) {
    Node& n = node(i);
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.back) n.back(*this, i);
    if (n.param && accumulate_params) n.param->grad += n.grad;
  }
}

// ---- primitives ----

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw UsageError("matmul: shape mismatch " + shape(a.value()) + " vs " + shape(b.value()));
  }
  const int ia = a.id, ib = b.id;
  return a.g->push(a.value() * b.value(), needs(a) || needs(b), [ia, ib](Graph& g, int self) {
    const Mat& d = g.node(self).grad;
    if (g.node(ia).needs_grad) g.accumulate(ia, d * g.node(ib).value.transpose());
    if (g.node(ib).needs_grad) g.accumulate(ib, g.node(ia).value.transpose() * d);
  });
}

Var add(Var a, Var b) {
  require_same("add", a, b);
  const int ia = a.id, ib = b.id;
  return a.g->push(a.value() + b.value(), needs(a) || needs(b), [ia, ib](Graph& g, int self) {
    g.accumulate(ia, g.node(self).grad);
    g.accumulate(ib, g.node(self).grad);
  });
}

Var sub(Var a, Var b) {
  require_same("sub", a, b);
  const int ia = a.id, ib = b.id;
  return a.g->push(a.value() - b.value(), needs(a) || needs(b), [ia, ib](Graph& g, int self) {
    g.accumulate(ia, g.node(self).grad);
    g.accumulate(ib, -g.node(self).grad);
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a, b);
  const int ia = a.id, ib = b.id;
  return a.g->push(a.value().cwiseProduct(b.value()), needs(a) || needs(b), [ia, ib](Graph& g, int self) {
    const Mat& d = g.node(self).grad;
    g.accumulate(ia, d.cwiseProduct(g.node(ib).value));
    g.accumulate(ib, d.cwiseProduct(g.node(ia).value));
  });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw UsageError("add_row: shape mismatch " + shape(a.value()) + " vs " + shape(row.value()));
  }
  const int ia = a.id, ir = row.id;
  Mat out = a.value().rowwise() + row.value().row(0);
  return a.g->push(std::move(out), needs(a) || needs(row), [ia, ir](Graph& g, int self) {
    const Mat& d = g.node(self).grad;
    g.accumulate(ia, d);
    g.accumulate(ir, d.colwise().sum());
  });
}

Var mul_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw UsageError("mul_row: shape mismatch " + shape(a.value()) + " vs " + shape(row.value()));
  }
  const int ia = a.id, ir = row.id;
  Mat out = a.value().array().rowwise() * row.value().row(0).array();
  return a.g->push(std::move(out), needs(a) || needs(row), [ia, ir](Graph& g, int self) {
    const Mat& d = g.node(self).grad;
    const Mat& r = g.node(ir).value;
    if (g.node(ia).needs_grad) {
      Mat da = d.array().rowwise() * r.row(0).array();
      g.accumulate(ia, da);
    }
    if (g.node(ir).needs_grad) g.accumulate(ir, d.cwiseProduct(g.node(ia).value).colwise().sum());
  });
}

Var scale(Var a, double c) {
  const int ia = a.id;
  return a.g->push(a.value() * c, needs(a), [ia, c](Graph& g, int self) { g.accumulate(ia, g.node(self).grad * c); });
}

Var add_scalar(Var a, double c) {
  const int ia = a.id;
  Mat out = a.value().array() + c;
  return a.g->push(std::move(out), needs(a), [ia](Graph& g, int self) { g.accumulate(ia, g.node(self).grad); });
}

Var neg(Var a) { return scale(a, -1.0); }

namespace {

using Arr = Eigen::ArrayXXd;

// exp(-2|x|), vectorized; tanh and sech^2 are both rational in it.
Arr neg2abs_exp(const Mat& x) { return (-2.0 * x.array().abs()).exp(); }

Arr tanh_values(const Mat& x) {
  const Arr e = neg2abs_exp(x);
  return x.array().sign() * (1.0 - e) / (1.0 + e);
}

Arr sech2_values(const Mat& x) {
  const Arr e = neg2abs_exp(x);
  return 4.0 * e / ((1.0 + e) * (1.0 + e));
}

}  // namespace

Var tanh(Var a) {
  const int ia = a.id;
  return a.g->push(tanh_values(a.value()).matrix(), needs(a), [ia](Graph& g, int self) {
    g.accumulate(ia, (g.node(self).grad.array() * sech2_values(g.node(ia).value)).matrix());
  });
}

Var dtanh(Var a) {
  // d/dx sech^2(x) = -2 tanh(x) sech^2(x)
  const int ia = a.id;
  return a.g->push(sech2_values(a.value()).matrix(), needs(a), [ia](Graph& g, int self) {
    const Arr local = -2.0 * tanh_values(g.node(ia).value) * g.node(self).value.array();
    g.accumulate(ia, (g.node(self).grad.array() * local).matrix());
  });
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return sigmoid_scalar(x); }, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return unary(
      a, [](double x) { return softplus_scalar(x); }, [](double x, double) { return sigmoid_scalar(x); });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (Eigen::Index i = 0; i < a.value().size(); ++i) {
    if (!(a.value()(i) > 0)) throw NumericError("log of non-positive value " + std::to_string(a.value()(i)));
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var clamp_min(Var a, double floor) {
  return unary(
      a, [floor](double x) { return x < floor ? floor : x; },
      [floor](double x, double) { return x < floor ? 0.0 : 1.0; });
}

Var softmax_rows(Var a) { return softmax_rows(a, Mat::Zero(a.rows(), a.cols())); }

Var softmax_rows(Var a, const Mat& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) {
    throw UsageError("softmax_rows: shape mismatch " + shape(a.value()) + " vs mask " + shape(mask));
  }
  Mat s = a.value() + mask;
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp();
    s.row(r) /= s.row(r).sum();
  }
  const int ia = a.id;
  return a.g->push(std::move(s), needs(a), [ia](Graph& g, int self) {
    const Mat& p = g.node(self).value;
    const Mat& d = g.node(self).grad;
    const Eigen::VectorXd dot = d.cwiseProduct(p).rowwise().sum();
    Mat da = p.cwiseProduct(d.colwise() - dot);
    g.accumulate(ia, da);
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.rows()) {
    throw UsageError("slice_rows out of range for " + shape(a.value()));
  }
  const int ia = a.id;
  return a.g->push(a.value().middleRows(start, n), needs(a), [ia, start, n](Graph& g, int self) {
    Mat d = Mat::Zero(g.node(ia).value.rows(), g.node(ia).value.cols());
    d.middleRows(start, n) = g.node(self).grad;
    g.accumulate(ia, d);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index n) {
  if (start < 0 || n < 0 || start + n > a.cols()) {
    throw UsageError("slice_cols out of range for " + shape(a.value()));
  }
  const int ia = a.id;
  return a.g->push(a.value().middleCols(start, n), needs(a), [ia, start, n](Graph& g, int self) {
    Mat d = Mat::Zero(g.node(ia).value.rows(), g.node(ia).value.cols());
    d.middleCols(start, n) = g.node(self).grad;
    g.accumulate(ia, d);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat_cols of nothing");
  Eigen::Index cols = 0;
  bool any = false;
  for (const Var& p : parts) {
    if (p.rows() != parts[0].rows()) {
      throw UsageError("concat_cols: shape mismatch " + shape(parts[0].value()) + " vs " + shape(p.value()));
    }
    cols += p.cols();
    any = any || needs(p);
  }
  Mat out(parts[0].rows(), cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id);
    offsets.push_back(off);
    off += p.cols();
  }
  return parts[0].g->push(std::move(out), any, [ids, offsets](Graph& g, int self) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!g.node(ids[k]).needs_grad) continue;
      g.accumulate(ids[k], g.node(self).grad.middleCols(offsets[k], g.node(ids[k]).value.cols()));
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat_rows of nothing");
  Eigen::Index rows = 0;
  bool any = false;
  for (const Var& p : parts) {
    if (p.cols() != parts[0].cols()) {
      throw UsageError("concat_rows: shape mismatch " + shape(parts[0].value()) + " vs " + shape(p.value()));
    }
    rows += p.rows();
    any = any || needs(p);
  }
  Mat out(rows, parts[0].cols());
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    ids.push_back(p.id);
    offsets.push_back(off);
    off += p.rows();
  }
  return parts[0].g->push(std::move(out), any, [ids, offsets](Graph& g, int self) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!g.node(ids[k]).needs_grad) continue;
      g.accumulate(ids[k], g.node(self).grad.middleRows(offsets[k], g.node(ids[k]).value.rows()));
    }
  });
}

Var gather_rows(Var a, const std::vector<Eigen::Index>& idx) {
  Mat out = Mat::Zero(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= a.rows()) throw UsageError("gather_rows index out of range for " + shape(a.value()));
    if (idx[r] >= 0) out.row(static_cast<Eigen::Index>(r)) = a.value().row(idx[r]);
  }
  const int ia = a.id;
  return a.g->push(std::move(out), needs(a), [ia, idx](Graph& g, int self) {
    Mat d = Mat::Zero(g.node(ia).value.rows(), g.node(ia).value.cols());
    const Mat& up = g.node(self).grad;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] >= 0) d.row(idx[r]) += up.row(static_cast<Eigen::Index>(r));
    }
    g.accumulate(ia, d);
  });
}

Var transpose(Var a) {
  const int ia = a.id;
  return a.g->push(a.value().transpose(), needs(a),
                   [ia](Graph& g, int self) { g.accumulate(ia, g.node(self).grad.transpose()); });
}

Var sum(Var a) {
  const int ia = a.id;
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return a.g->push(std::move(out), needs(a), [ia](Graph& g, int self) {
    const Mat& x = g.node(ia).value;
    g.accumulate(ia, Mat::Constant(x.rows(), x.cols(), g.node(self).grad(0, 0)));
  });
}

Var mean(Var a) {
  if (a.value().size() == 0) throw UsageError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var row_sum(Var a) {
  const int ia = a.id;
  Mat out = a.value().rowwise().sum();
  return a.g->push(std::move(out), needs(a), [ia](Graph& g, int self) {
    const Mat& x = g.node(ia).value;
    Mat d = g.node(self).grad.replicate(1, x.cols());
    g.accumulate(ia, d);
  });
}

// ---- convolution ----

namespace {

// out rows (b*T + t) += in rows (b*T + t - shift), per sequence.
void shift_add(Mat& out, const Mat& in, Eigen::Index shift, int T, Eigen::Index B) {
  if (shift >= T) return;
  for (Eigen::Index b = 0; b < B; ++b) {
    out.middleRows(b * T + shift, T - shift) += in.middleRows(b * T, T - shift);
  }
}

// out rows (b*T + t) = in rows (b*T + t + shift), zeros past the end.
Mat shift_back(const Mat& in, Eigen::Index shift, int T, Eigen::Index B) {
  Mat out = Mat::Zero(in.rows(), in.cols());
  if (shift >= T) return out;
  for (Eigen::Index b = 0; b < B; ++b) {
    out.middleRows(b * T, T - shift) = in.middleRows(b * T + shift, T - shift);
  }
  return out;
}

}  // namespace

Var dilated_causal_conv1d(Var x, Var kernel, int dilation, int T) {
  if (dilation < 1) throw UsageError("dilation must be >= 1");
  if (T < 1 || x.rows() % T != 0) {
    throw UsageError("dilated_causal_conv1d: " + shape(x.value()) + " is not a stack of length-" +
                     std::to_string(T) + " sequences");
  }
  const Eigen::Index cin = x.cols();
  if (cin == 0 || kernel.rows() % cin != 0 || kernel.rows() == 0) {
    throw UsageError("dilated_causal_conv1d: shape mismatch " + shape(x.value()) + " vs kernel " +
                     shape(kernel.value()));
  }
  const Eigen::Index taps = kernel.rows() / cin;
  const Eigen::Index B = x.rows() / T;
  Mat y = Mat::Zero(x.rows(), kernel.cols());
  for (Eigen::Index tau = 0; tau < taps; ++tau) {
    const Eigen::Index shift = tau * dilation;
    if (shift >= T) break;
    const Mat xw = x.value() * kernel.value().middleRows(tau * cin, cin);
    shift_add(y, xw, shift, T, B);
  }
  const int ix = x.id, ik = kernel.id;
  return x.g->push(std::move(y), needs(x) || needs(kernel),
                   [ix, ik, taps, cin, dilation, T, B](Graph& g, int self) {
                     const Mat& d = g.node(self).grad;
                     const Mat& xv = g.node(ix).value;
                     const Mat& kv = g.node(ik).value;
                     Mat dx = Mat::Zero(xv.rows(), xv.cols());
                     Mat dk = Mat::Zero(kv.rows(), kv.cols());
                     for (Eigen::Index tau = 0; tau < taps; ++tau) {
                       const Eigen::Index shift = tau * dilation;
                       if (shift >= T) break;
                       const Mat ds = shift_back(d, shift, T, B);
                       if (g.node(ix).needs_grad) dx.noalias() += ds * kv.middleRows(tau * cin, cin).transpose();
                       if (g.node(ik).needs_grad) dk.middleRows(tau * cin, cin).noalias() += xv.transpose() * ds;
                     }
                     g.accumulate(ix, dx);
                     g.accumulate(ik, dk);
                   });
}

Var dilated_causal_conv1d(Var x, Var kernel, int dilation) {
  return dilated_causal_conv1d(x, kernel, dilation, static_cast<int>(x.rows()));
}

// ---- attention ----

Var masked_attention(Var Q, Var K, Var V, const Mat& mask) {
  if (Q.cols() != K.cols() || K.rows() != V.rows()) {
    throw UsageError("masked_attention: shape mismatch Q" + shape(Q.value()) + " K" + shape(K.value()) + " V" +
                     shape(V.value()));
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
  Var scores = scale(matmul(Q, transpose(K)), inv);
  return matmul(softmax_rows(scores, mask), V);
}

Var multihead_attention(Var Q, Var K, Var V, int T, int heads, const Mat& mask, std::vector<Mat>* weights) {
  require_same("multihead_attention", Q, K);
  require_same("multihead_attention", K, V);
  if (T < 1 || Q.rows() % T != 0 || heads < 1 || Q.cols() % heads != 0) {
    throw UsageError("multihead_attention: bad layout " + shape(Q.value()) + " for T=" + std::to_string(T) +
                     ", heads=" + std::to_string(heads));
  }
  if (mask.rows() != T || mask.cols() != T) throw UsageError("multihead_attention: mask shape " + shape(mask));
  const Eigen::Index B = Q.rows() / T;
  const Eigen::Index dk = Q.cols() / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  auto probs = std::make_shared<std::vector<Mat>>(static_cast<std::size_t>(B * heads));
  Mat out(Q.rows(), Q.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    for (int h = 0; h < heads; ++h) {
      const auto q = Q.value().block(b * T, h * dk, T, dk);
      const auto k = K.value().block(b * T, h * dk, T, dk);
      const auto v = V.value().block(b * T, h * dk, T, dk);
      Mat s = (q * k.transpose()) * inv + mask;
      for (Eigen::Index r = 0; r < T; ++r) {
        const double m = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - m).exp();
        s.row(r) /= s.row(r).sum();
      }
      out.block(b * T, h * dk, T, dk) = s * v;
      (*probs)[static_cast<std::size_t>(b * heads + h)] = std::move(s);
    }
  }
  if (weights) *weights = *probs;
  const int iq = Q.id, ik = K.id, iv = V.id;
  const bool any = needs(Q) || needs(K) || needs(V);
  return Q.g->push(std::move(out), any, [iq, ik, iv, T, heads, B, dk, inv, probs](Graph& g, int self) {
    const Mat& d = g.node(self).grad;
    const Mat& qv = g.node(iq).value;
    const Mat& kv = g.node(ik).value;
    const Mat& vv = g.node(iv).value;
    Mat dq = Mat::Zero(qv.rows(), qv.cols());
    Mat dkm = Mat::Zero(kv.rows(), kv.cols());
    Mat dv = Mat::Zero(vv.rows(), vv.cols());
    for (Eigen::Index b = 0; b < B; ++b) {
      for (int h = 0; h < heads; ++h) {
        const Mat& p = (*probs)[static_cast<std::size_t>(b * heads + h)];
        const auto dout = d.block(b * T, h * dk, T, dk);
        dv.block(b * T, h * dk, T, dk) = p.transpose() * dout;
        const Mat dp = dout * vv.block(b * T, h * dk, T, dk).transpose();
        const Eigen::VectorXd dot = dp.cwiseProduct(p).rowwise().sum();
        const Mat ds = p.cwiseProduct(dp.colwise() - dot) * inv;
        dq.block(b * T, h * dk, T, dk) = ds * kv.block(b * T, h * dk, T, dk);
        dkm.block(b * T, h * dk, T, dk) = ds.transpose() * qv.block(b * T, h * dk, T, dk);
      }
    }
    g.accumulate(iq, dq);
    g.accumulate(ik, dkm);
    g.accumulate(iv, dv);
  });
}

Var multihead_attention_last(Var q_last, Var K, Var V, int T, int heads, const Mat& mask) {
  require_same("multihead_attention_last", K, V);
  if (T < 1 || K.rows() % T != 0 || heads < 1 || K.cols() % heads != 0 || q_last.cols() != K.cols() ||
      q_last.rows() * T != K.rows()) {
    throw UsageError("multihead_attention_last: bad layout q" + shape(q_last.value()) + " K" + shape(K.value()) +
                     " for T=" + std::to_string(T));
  }
  if (mask.rows() != T || mask.cols() != T) throw UsageError("multihead_attention_last: mask shape " + shape(mask));
  const Eigen::Index B = q_last.rows();
  const Eigen::Index dk = K.cols() / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  const Eigen::RowVectorXd last_mask = mask.row(T - 1);
  auto probs = std::make_shared<std::vector<Eigen::RowVectorXd>>(static_cast<std::size_t>(B * heads));
  Mat out(B, K.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    for (int h = 0; h < heads; ++h) {
      const auto q = q_last.value().block(b, h * dk, 1, dk);
      const auto k = K.value().block(b * T, h * dk, T, dk);
      Eigen::RowVectorXd s = (q * k.transpose()) * inv + last_mask;
      const double m = s.maxCoeff();
      s = (s.array() - m).exp();
      s /= s.sum();
      out.block(b, h * dk, 1, dk) = s * V.value().block(b * T, h * dk, T, dk);
      (*probs)[static_cast<std::size_t>(b * heads + h)] = std::move(s);
    }
  }
  const int iq = q_last.id, ik = K.id, iv = V.id;
  const bool any = needs(q_last) || needs(K) || needs(V);
  return q_last.g->push(std::move(out), any, [iq, ik, iv, T, heads, B, dk, inv, probs](Graph& g, int self) {
    const Mat& d = g.node(self).grad;
    const Mat& qv = g.node(iq).value;
    const Mat& kv = g.node(ik).value;
    const Mat& vv = g.node(iv).value;
    Mat dq = Mat::Zero(qv.rows(), qv.cols());
    Mat dkm = Mat::Zero(kv.rows(), kv.cols());
    Mat dv = Mat::Zero(vv.rows(), vv.cols());
    for (Eigen::Index b = 0; b < B; ++b) {
      for (int h = 0; h < heads; ++h) {
        const Eigen::RowVectorXd& p = (*probs)[static_cast<std::size_t>(b * heads + h)];
        const auto dout = d.block(b, h * dk, 1, dk);
        dv.block(b * T, h * dk, T, dk) = p.transpose() * dout;
        const Eigen::RowVectorXd dp = dout * vv.block(b * T, h * dk, T, dk).transpose();
        const double dot = dp.dot(p);
        const Eigen::RowVectorXd ds = (p.array() * (dp.array() - dot)).matrix() * inv;
        dq.block(b, h * dk, 1, dk) = ds * kv.block(b * T, h * dk, T, dk);
        dkm.block(b * T, h * dk, T, dk) = ds.transpose() * qv.block(b, h * dk, 1, dk);
      }
    }
    g.accumulate(iq, dq);
    g.accumulate(ik, dkm);
    g.accumulate(iv, dv);
  });
}

double grad_wrt_input(Var output, Var input, Eigen::Index r, Eigen::Index c) {
  if (output.g != input.g) throw UsageError("grad_wrt_input: variables from different graphs");
  const auto& in = input.g->node(input.id);
  if (!in.needs_grad || in.param) throw UsageError("grad_wrt_input: not a graph input");
  if (r < 0 || c < 0 || r >= input.rows() || c >= input.cols()) {
    throw UsageError("grad_wrt_input: index out of range for " + shape(input.value()));
  }
  if (input.id > output.id) throw UsageError("grad_wrt_input: input is detached from the output");
  output.g->backward(output, false);
  const Mat& gin = input.g->node(input.id).grad;
  if (gin.size() == 0) throw UsageError("grad_wrt_input: input is detached from the output");
  return gin(r, c);
}

// ---- Adam ----

double Adam::step(ParamStore& store) {
  auto& ps = store.params();
  if (m_.size() != ps.size()) {
    m_.clear();
    v_.clear();
    for (const auto& p : ps) {
      m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    }
  }
  const double norm = store.grad_norm();
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  const double factor = config_.clip_norm > 0 && norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Mat g = ps[i].grad * factor;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    ps[i].value.array() -= config_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.eps);
  }
  return norm;
}

}  // namespace lobsurv
