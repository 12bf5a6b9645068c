#include "lobsurv/models.hpp"

#include <cmath>
#include <limits>

#include "lobsurv/error.hpp"

namespace lobsurv {

std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::Mlp:
      return "mlp";
    case EncoderKind::Cnn:
      return "cnn";
    case EncoderKind::ConvTransformer:
      return "conv_transformer";
  }
  return "?";
}

EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "mlp") return EncoderKind::Mlp;
  if (s == "cnn") return EncoderKind::Cnn;
  if (s == "conv_transformer") return EncoderKind::ConvTransformer;
  throw UsageError("unknown encoder '" + s + "' (expected mlp, cnn or conv_transformer)");
}

std::string display_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::Mlp:
      return "MN-MLP";
    case EncoderKind::Cnn:
      return "MN-CNN";
    case EncoderKind::ConvTransformer:
      return "MN-Conv-Trans";
  }
  return "?";
}

void EncoderConfig::validate() const {
  if (T < 1 || F < 1 || latent < 1) throw UsageError("encoder T, F and latent must be positive");
  if (kernel < 1) throw UsageError("kernel size s must be >= 1");
  if (dilation < 1) throw UsageError("dilation p must be >= 1");
  if (heads < 1 || d_k < 1) throw UsageError("heads and d_k must be positive");
  if (layers < 1) throw UsageError("layers must be >= 1");
  if (mlp_hidden < 1 || cnn_layers < 1) throw UsageError("mlp_hidden and cnn_layers must be positive");
}

SurvivalModel::SurvivalModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.encoder.validate();
  if (!(config_.t_max > 0)) throw UsageError("t_max must be positive");
  const auto F = static_cast<std::size_t>(config_.encoder.F);
  if (!config_.feature_mean.empty() && (config_.feature_mean.size() != F || config_.feature_std.size() != F)) {
    throw UsageError("standardization vectors do not match F=" + std::to_string(F));
  }
  if (!config_.feature_names.empty() && config_.feature_names.size() != F) {
    throw UsageError("feature name count does not match F=" + std::to_string(F));
  }
  build_params();
  params_.initialize(seed);
  if (config_.encoder.kind == EncoderKind::ConvTransformer) {
    mask_ = attention_mask(config_.encoder.T, config_.encoder.mask);
  }
}

void SurvivalModel::build_params() {
  const auto& e = config_.encoder;
  switch (e.kind) {
    case EncoderKind::Mlp:
      params_.add("mlp.w1", e.T * e.F, e.mlp_hidden, Init::Xavier);
      params_.add("mlp.b1", 1, e.mlp_hidden, Init::Zeros);
      params_.add("mlp.w2", e.mlp_hidden, e.latent, Init::Xavier);
      params_.add("mlp.b2", 1, e.latent, Init::Zeros);
      break;
    case EncoderKind::Cnn:
      for (int l = 0; l < e.cnn_layers; ++l) {
        const int cin = l == 0 ? e.F : e.width();
        params_.add("cnn.k" + std::to_string(l), e.kernel * cin, e.width(), Init::Xavier);
        params_.add("cnn.b" + std::to_string(l), 1, e.width(), Init::Zeros);
      }
      params_.add("cnn.wo", e.width(), e.latent, Init::Xavier);
      params_.add("cnn.bo", 1, e.latent, Init::Zeros);
      break;
    case EncoderKind::ConvTransformer:
      for (int l = 0; l < e.layers; ++l) {
        const int cin = l == 0 ? e.F : e.width();
        for (const char* m : {"q", "k", "v"}) {
          params_.add("att" + std::to_string(l) + ".w" + m, e.kernel * cin, e.width(), Init::Xavier);
        }
      }
      params_.add("att.merge.w", e.width(), e.latent, Init::Xavier);
      params_.add("att.merge.b", 1, e.latent, Init::Zeros);
      break;
  }
  const auto& hidden = config_.decoder.hidden;
  const int first = hidden.empty() ? 1 : hidden[0];
  params_.add("dec.wq", e.latent, first, Init::Xavier);
  params_.add("dec.wt", 1, first, Init::Positive, true);
  params_.add("dec.b0", 1, first, Init::Zeros);
  for (std::size_t k = 1; k <= hidden.size(); ++k) {
    const int out = k < hidden.size() ? hidden[k] : 1;
    params_.add("dec.w" + std::to_string(k), hidden[k - 1], out, Init::Positive, true);
    params_.add("dec.b" + std::to_string(k), 1, out, Init::Zeros);
  }
}

double SurvivalModel::t_tilde(double t) const { return std::log1p(t) / std::log1p(config_.t_max); }

double SurvivalModel::dt_tilde(double t) const { return 1.0 / ((1.0 + t) * std::log1p(config_.t_max)); }

Mat SurvivalModel::prepare(std::span<const FeatureWindow* const> windows) const {
  const auto& e = config_.encoder;
  const auto B = static_cast<Eigen::Index>(windows.size());
  const bool flat = e.kind == EncoderKind::Mlp;
  Mat out = flat ? Mat(B, e.T * e.F) : Mat(B * e.T, e.F);
  const bool standardize = !config_.feature_mean.empty();
  for (Eigen::Index b = 0; b < B; ++b) {
    const FeatureWindow& w = *windows[static_cast<std::size_t>(b)];
    if (w.rows != static_cast<std::size_t>(e.T) || w.cols != static_cast<std::size_t>(e.F)) {
      throw DataError("window shape " + std::to_string(w.rows) + "x" + std::to_string(w.cols) +
                      " does not match model T=" + std::to_string(e.T) + ", F=" + std::to_string(e.F));
    }
    for (int t = 0; t < e.T; ++t) {
      for (int f = 0; f < e.F; ++f) {
        double v = w.at(static_cast<std::size_t>(t), static_cast<std::size_t>(f));
        if (standardize) {
          v = (v - config_.feature_mean[static_cast<std::size_t>(f)]) / config_.feature_std[static_cast<std::size_t>(f)];
        }
        if (flat) {
          out(b, t * e.F + f) = v;
        } else {
          out(b * e.T + t, f) = v;
        }
      }
    }
  }
  return out;
}

Mat SurvivalModel::prepare(const std::vector<FeatureWindow>& windows) const {
  std::vector<const FeatureWindow*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  return prepare(ptrs);
}

Var SurvivalModel::encode(Graph& g, const Mat& input, std::vector<Mat>* attention) {
  switch (config_.encoder.kind) {
    case EncoderKind::Mlp:
      return encode_mlp(g, input);
    case EncoderKind::Cnn:
      return encode_cnn(g, input);
    case EncoderKind::ConvTransformer:
      return encode_conv_transformer(g, input, attention);
  }
  throw UsageError("unknown encoder");
}

Var SurvivalModel::encode_mlp(Graph& g, const Mat& input) {
  Var x = g.constant(input);
  Var h = tanh(add_row(matmul(x, g.param(params_.get("mlp.w1"))), g.param(params_.get("mlp.b1"))));
  return add_row(matmul(h, g.param(params_.get("mlp.w2"))), g.param(params_.get("mlp.b2")));
}

namespace {

std::vector<Eigen::Index> last_rows(Eigen::Index B, int T, Eigen::Index back = 0) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) {
    idx[static_cast<std::size_t>(b)] = back < T ? b * T + T - 1 - back : -1;
  }
  return idx;
}

}  // namespace

int cnn_receptive_field(const EncoderConfig& e) {
  long rf = 1;
  for (int l = 0; l < e.cnn_layers; ++l) rf += static_cast<long>(e.kernel - 1) * (static_cast<long>(e.dilation) << l);
  return static_cast<int>(std::min<long>(rf, std::numeric_limits<int>::max()));
}

Var SurvivalModel::encode_cnn(Graph& g, const Mat& input) {
  const auto& e = config_.encoder;
  const Eigen::Index B = input.rows() / e.T;
  int T = e.T;
  Var h;
  if (e.pooling == Pooling::Last && cnn_receptive_field(e) < e.T) {
    // The last step only sees its receptive field; dropping older rows is exact.
    T = cnn_receptive_field(e);
    Mat cut(B * T, input.cols());
    for (Eigen::Index b = 0; b < B; ++b) cut.middleRows(b * T, T) = input.middleRows(b * e.T + e.T - T, T);
    h = g.constant(std::move(cut));
  } else {
    h = g.constant(input);
  }
  for (int l = 0; l < e.cnn_layers; ++l) {
    const std::string s = std::to_string(l);
    const int dil = e.dilation << l;
    Var y = tanh(add_row(dilated_causal_conv1d(h, g.param(params_.get("cnn.k" + s)), dil, T),
                         g.param(params_.get("cnn.b" + s))));
    h = l == 0 ? y : add(h, y);
  }
  Var pooled;
  if (e.pooling == Pooling::Last) {
    pooled = gather_rows(h, last_rows(B, T));
  } else {
    Mat avg = Mat::Zero(B, B * e.T);
    for (Eigen::Index b = 0; b < B; ++b) avg.block(b, b * e.T, 1, e.T).setConstant(1.0 / e.T);
    pooled = matmul(g.constant(std::move(avg)), h);
  }
  return add_row(matmul(pooled, g.param(params_.get("cnn.wo"))), g.param(params_.get("cnn.bo")));
}

Var SurvivalModel::encode_conv_transformer(Graph& g, const Mat& input, std::vector<Mat>* attention) {
  const auto& e = config_.encoder;
  const Eigen::Index B = input.rows() / e.T;
  Var h = g.constant(input);
  Var summary;
  for (int l = 0; l < e.layers; ++l) {
    const std::string p = "att" + std::to_string(l) + ".w";
    Var wq = g.param(params_.get(p + "q"));
    Var wk = g.param(params_.get(p + "k"));
    Var wv = g.param(params_.get(p + "v"));
    Var K = dilated_causal_conv1d(h, wk, e.dilation, e.T);
    Var V = dilated_causal_conv1d(h, wv, e.dilation, e.T);
    const bool last = l + 1 == e.layers;
    if (last && attention == nullptr) {
      // Only the final query row feeds the summary.
      const Eigen::Index cin = h.cols();
      Var q_last;
      for (int tau = 0; tau < e.kernel; ++tau) {
        Var tap = matmul(gather_rows(h, last_rows(B, e.T, static_cast<Eigen::Index>(tau) * e.dilation)),
                         slice_rows(wq, tau * cin, cin));
        q_last = tau == 0 ? tap : add(q_last, tap);
      }
      summary = multihead_attention_last(q_last, K, V, e.T, e.heads, mask_);
    } else {
      Var Q = dilated_causal_conv1d(h, wq, e.dilation, e.T);
      Var A = multihead_attention(Q, K, V, e.T, e.heads, mask_, last ? attention : nullptr);
      if (last) {
        summary = gather_rows(A, last_rows(B, e.T));
      } else {
        h = h.cols() == A.cols() ? add(h, A) : A;
      }
    }
  }
  return add_row(matmul(summary, g.param(params_.get("att.merge.w"))), g.param(params_.get("att.merge.b")));
}

DecoderOutput SurvivalModel::decode(Graph& g, Var latent, Var tt) {
  const auto& hidden = config_.decoder.hidden;
  const Eigen::Index B = latent.rows();
  Var wt = g.param(params_.get("dec.wt"));
  Var a = add_row(add(matmul(latent, g.param(params_.get("dec.wq"))), matmul(tt, wt)),
                  g.param(params_.get("dec.b0")));
  // Forward tangent: da/dt~ through the positive-weight path.
  Var da = matmul(g.constant(Mat::Ones(B, 1)), wt);
  for (std::size_t k = 1; k <= hidden.size(); ++k) {
    const std::string s = std::to_string(k);
    Var h = tanh(a);
    Var dh = mul(dtanh(a), da);
    Var w = g.param(params_.get("dec.w" + s));
    a = add_row(matmul(h, w), g.param(params_.get("dec.b" + s)));
    da = matmul(dh, w);
  }
  return {a, da};
}

Var SurvivalModel::loss(Graph& g, const Mat& input, std::span<const double> z, std::span<const int> delta) {
  Var q = encode(g, input);
  const Eigen::Index B = q.rows();
  if (static_cast<std::size_t>(B) != z.size() || z.size() != delta.size()) {
    throw UsageError("loss: batch of " + std::to_string(B) + " windows with " + std::to_string(z.size()) +
                     " outcomes");
  }
  Mat tt(B, 1), log_dt(B, 1), ev(B, 1), cens(B, 1);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto i = static_cast<std::size_t>(b);
    tt(b, 0) = t_tilde(z[i]);
    log_dt(b, 0) = std::log(dt_tilde(z[i]));
    ev(b, 0) = delta[i] == 1 ? 1.0 : 0.0;
    cens(b, 0) = 1.0 - ev(b, 0);
  }
  DecoderOutput d = decode(g, q, g.constant(tt));
  // log S = -softplus(a), log F = -softplus(-a), log f = log F + log S + log a' + log dt~/dt
  Var log_s = neg(softplus(d.logit));
  Var log_F = neg(softplus(neg(d.logit)));
  Var log_f = add(add(add(log_F, log_s), log(clamp_min(d.dlogit, 1e-300))), g.constant(log_dt));
  const double floor = std::log(kLogFloor);
  Var term = add(mul(g.constant(ev), clamp_min(log_f, floor)), mul(g.constant(cens), clamp_min(log_s, floor)));
  return neg(mean(term));
}

Mat SurvivalModel::latent(const std::vector<FeatureWindow>& windows) {
  Graph g;
  return encode(g, prepare(windows)).value();
}

std::vector<SurvivalPrediction> SurvivalModel::predict_latent(const Mat& latent, std::span<const double> t) {
  if (static_cast<std::size_t>(latent.rows()) != t.size()) throw UsageError("predict: latent/time count mismatch");
  Graph g;
  Mat tt(latent.rows(), 1);
  for (Eigen::Index b = 0; b < latent.rows(); ++b) tt(b, 0) = t_tilde(t[static_cast<std::size_t>(b)]);
  DecoderOutput d = decode(g, g.constant(latent), g.constant(tt));
  constexpr double tiny = std::numeric_limits<double>::min();
  std::vector<SurvivalPrediction> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double a = d.logit.value()(static_cast<Eigen::Index>(i), 0);
    const double log_s = -softplus_scalar(a);
    const double log_F = -softplus_scalar(-a);
    const double log_f = log_F + log_s + std::log(d.dlogit.value()(static_cast<Eigen::Index>(i), 0)) +
                         std::log(dt_tilde(t[i]));
    out[i].survival = std::max(std::exp(log_s), tiny);
    out[i].density = std::max(std::exp(log_f), tiny);
  }
  return out;
}

std::vector<SurvivalPrediction> SurvivalModel::predict(const std::vector<FeatureWindow>& windows,
                                                       std::span<const double> t) {
  return predict_latent(latent(windows), t);
}

double SurvivalModel::survival(double t, const FeatureWindow& x) {
  const std::vector<FeatureWindow> one{x};
  return predict(one, std::span<const double>(&t, 1))[0].survival;
}

double SurvivalModel::density(double t, const FeatureWindow& x) {
  const Mat q = latent({x});
  Graph g;
  Var tin = g.input(Mat::Constant(1, 1, t));
  Var tt = scale(log(add_scalar(tin, 1.0)), 1.0 / std::log1p(config_.t_max));
  DecoderOutput d = decode(g, g.constant(q), tt);
  Var s = sigmoid(neg(d.logit));
  return -grad_wrt_input(s, tin, 0, 0);
}

std::vector<double> SurvivalModel::survival_grid(const FeatureWindow& x, std::span<const double> grid) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw UsageError("survival grid must be strictly increasing");
  }
  const Mat q = latent({x});
  const Mat rep = q.replicate(static_cast<Eigen::Index>(grid.size()), 1);
  const auto preds = predict_latent(rep, grid);
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = preds[i].survival;
  return out;
}

std::vector<Mat> SurvivalModel::attention_heatmaps(const FeatureWindow& x) {
  if (config_.encoder.kind != EncoderKind::ConvTransformer) {
    throw UsageError("attention heatmaps need a conv_transformer encoder, model is " + to_string(config_.encoder.kind));
  }
  Graph g;
  std::vector<Mat> weights;
  encode(g, prepare({x}), &weights);
  return weights;
}

void fit_standardization(ModelConfig& config, const std::vector<const FeatureWindow*>& windows) {
  if (windows.empty()) throw DataError("cannot standardize an empty training set");
  const std::size_t F = windows[0]->cols;
  std::vector<double> sum(F, 0.0), sq(F, 0.0);
  double n = 0;
  for (const auto* w : windows) {
    for (std::size_t r = 0; r < w->rows; ++r) {
      for (std::size_t c = 0; c < F; ++c) sum[c] += w->at(r, c);
    }
    n += static_cast<double>(w->rows);
  }
  config.feature_mean.assign(F, 0.0);
  for (std::size_t c = 0; c < F; ++c) config.feature_mean[c] = sum[c] / n;
  for (const auto* w : windows) {
    for (std::size_t r = 0; r < w->rows; ++r) {
      for (std::size_t c = 0; c < F; ++c) {
        const double d = w->at(r, c) - config.feature_mean[c];
        sq[c] += d * d;
      }
    }
  }
  config.feature_std.assign(F, 1.0);
  for (std::size_t c = 0; c < F; ++c) {
    const double s = std::sqrt(sq[c] / n);
    config.feature_std[c] = s > 1e-12 ? s : 1.0;
  }
}

}  // namespace lobsurv
