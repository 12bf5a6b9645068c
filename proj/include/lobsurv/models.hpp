#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lobsurv/features.hpp"
#include "lobsurv/survival_stats.hpp"
#include "lobsurv/tensor.hpp"

namespace lobsurv {

enum class EncoderKind { Mlp, Cnn, ConvTransformer };
std::string to_string(EncoderKind k);
EncoderKind encoder_kind_from_string(const std::string& s);
// Table label, e.g. "MN-Conv-Trans".
std::string display_name(EncoderKind k);

enum class Pooling { Last, Mean };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::ConvTransformer;
  int T = 50;
  int F = 24;
  int latent = 16;
  // Convolutional front end (cnn, conv_transformer).
  int kernel = 3;
  int dilation = 1;
  // Attention.
  int heads = 4;
  int d_k = 4;
  int layers = 1;
  MaskKind mask = MaskKind::Causal;
  // mlp hidden width; cnn stack depth (dilation doubles per layer).
  int mlp_hidden = 32;
  int cnn_layers = 4;
  Pooling pooling = Pooling::Last;

  int width() const { return heads * d_k; }
  void validate() const;
};

// Rows of history that reach the final step of the CNN stack.
int cnn_receptive_field(const EncoderConfig& e);

struct DecoderConfig {
  std::vector<int> hidden{16, 16};
};

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  double t_max = 1.0;  // time scale: t~ = log1p(t) / log1p(t_max)
  std::vector<std::string> feature_names;
  std::vector<double> feature_mean;  // empty = no standardization
  std::vector<double> feature_std;
};

// Decoder output for a batch: pre-sigmoid CDF logit and its derivative in t~.
struct DecoderOutput {
  Var logit;   // B x 1; F = sigmoid(logit), S = sigmoid(-logit)
  Var dlogit;  // B x 1; d logit / d t~, strictly positive
};

class SurvivalModel {
 public:
  SurvivalModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  double t_tilde(double t) const;
  double dt_tilde(double t) const;

  // Standardized encoder input: (B*T) x F for sequence encoders, B x (T*F) for mlp.
  Mat prepare(std::span<const FeatureWindow* const> windows) const;
  Mat prepare(const std::vector<FeatureWindow>& windows) const;

  // B x latent. `attention` (conv_transformer only) receives the final layer's
  // post-softmax matrices, index b*H + h, and forces the full T x T path.
  Var encode(Graph& g, const Mat& input, std::vector<Mat>* attention = nullptr);
  DecoderOutput decode(Graph& g, Var latent, Var t_tilde);

  // Mean negative log score over the batch (log floor kLogFloor).
  Var loss(Graph& g, const Mat& input, std::span<const double> z, std::span<const int> delta);

  Mat latent(const std::vector<FeatureWindow>& windows);
  // S and f at one time per window (forward tangent route).
  std::vector<SurvivalPrediction> predict(const std::vector<FeatureWindow>& windows, std::span<const double> t);
  std::vector<SurvivalPrediction> predict_latent(const Mat& latent, std::span<const double> t);

  double survival(double t, const FeatureWindow& x);
  // -dS/dt by reverse-mode differentiation with respect to the time input.
  double density(double t, const FeatureWindow& x);
  std::vector<double> survival_grid(const FeatureWindow& x, std::span<const double> grid);

  // Post-softmax T x T matrix per head for one window.
  std::vector<Mat> attention_heatmaps(const FeatureWindow& x);

 private:
  Var encode_mlp(Graph& g, const Mat& input);
  Var encode_cnn(Graph& g, const Mat& input);
  Var encode_conv_transformer(Graph& g, const Mat& input, std::vector<Mat>* attention);
  void build_params();

  ModelConfig config_;
  ParamStore params_;
  Mat mask_;
};

// Checkpoint: JSON manifest at `path` plus raw little-endian f64 parameter
// data at `path + ".bin"`.
void save_checkpoint(const SurvivalModel& model, const std::string& path);
SurvivalModel load_checkpoint(const std::string& path);

// Per-column mean and standard deviation over every row of every window.
void fit_standardization(ModelConfig& config, const std::vector<const FeatureWindow*>& windows);

}  // namespace lobsurv
