#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "driftscope/attribution_matrix.h"
#include "driftscope/events.h"
#include "driftscope/rng.h"

namespace driftscope {

struct ModelConfig {
  int hidden_size = 64;
  double input_dropout = 0.03;
  double output_dropout = 0.02;
  double recurrent_dropout = 0.01;
  double learning_rate = 0.002;
  int batch_size = 16;
  double clip_norm = 6.0;
  double eta = 0.0;  // smoothing coefficient
  int max_epochs = 20;
  int patience = 3;
  std::uint64_t seed = 0;
  bool attention = true;

  // Throws ConfigError naming the first invalid field.
  void validate() const;
};

// LSTM cell weights. Gate blocks in the 4H dimension are ordered
// [input, forget, cell, output].
struct ModelParams {
  int input_dim = 0;
  int hidden = 0;
  Eigen::MatrixXd w_input;      // 4H x d
  Eigen::MatrixXd w_recurrent;  // 4H x H
  Eigen::VectorXd bias;         // 4H
  Eigen::VectorXd w_out;        // H
  double b_out = 0.0;
  Eigen::MatrixXd w_attention;  // H x H, empty when the head is disabled

  bool has_attention() const { return w_attention.size() > 0; }
  static ModelParams zeros_like(const ModelParams& p);

  Eigen::Index size() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
};

ModelParams model_init(const ModelConfig& config, int input_dim);

// Inverted-dropout masks: entries are 0 or 1/(1-rate). The recurrent mask
// is shared by every step of a sequence.
struct DropoutMasks {
  Eigen::MatrixXd input;      // d x T
  Eigen::VectorXd recurrent;  // H
  Eigen::MatrixXd output;     // H x T
};

DropoutMasks sample_dropout_masks(const ModelConfig& config, int input_dim,
                                  int hidden, int steps, Rng& rng);

struct RiskSeries {
  std::vector<double> p;
  std::vector<double> logits;
  std::vector<double> step_time;
  double p_base = 0.5;  // prediction on the empty prefix

  int steps() const { return static_cast<int>(p.size()); }
  // 1-based; at(0) is p_base.
  double at(int t) const { return t == 0 ? p_base : p.at(t - 1); }
};

struct AttentionState {
  Eigen::VectorXd scores;
  Eigen::VectorXd weights;
  Eigen::VectorXd context;
  double logit = 0.0;
  double prediction = 0.5;
};

struct ForwardCache {
  std::optional<DropoutMasks> masks;
  Eigen::MatrixXd x_in;        // inputs after dropout, d x T
  Eigen::MatrixXd h_in;        // recurrent inputs after dropout, H x T
  Eigen::MatrixXd gates;       // activated gates, 4H x T
  Eigen::MatrixXd cell;        // H x T
  Eigen::MatrixXd cell_tanh;   // H x T
  Eigen::MatrixXd hidden;      // H x T
  Eigen::MatrixXd hidden_out;  // after output dropout, H x T
  std::optional<AttentionState> attention;
};

struct ForwardResult {
  RiskSeries risk;
  ForwardCache cache;
};

enum class Mode { kTrain, kEval };

// masks == nullptr is eval mode.
ForwardResult forward(const ModelParams& params, const StepSeries& steps,
                      const DropoutMasks* masks = nullptr);
ForwardResult forward(const ModelParams& params, const StepSeries& steps,
                      Mode mode, const ModelConfig& config, Rng& rng);

inline constexpr double kProbabilityClamp = 1e-7;

double smoothing_penalty(const RiskSeries& risk);
// Mean per-step cross-entropy against the episode outcome plus
// eta * sum_{t>=2} (p_t - p_{t-1})^2.
double loss(const RiskSeries& risk, bool outcome, double eta);

struct Gradients {
  ModelParams params;
  Eigen::MatrixXd inputs;  // d x T
};

// Reverse-mode pass seeded with dObjective/dlogit_t per step and, when the
// attention head ran, dObjective/d(attention logit).
Gradients backward_seeded(const ModelParams& params, const ForwardCache& cache,
                          const StepSeries& steps,
                          const Eigen::VectorXd& dlogits,
                          double dattention_logit = 0.0,
                          bool param_grads = true);

// Gradients of loss(risk, outcome, eta).
Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const StepSeries& steps, bool outcome, double eta);

// The training objective adds the attention head's cross-entropy on the
// final step to loss() when the head is present.
double training_objective(const ForwardResult& fwd, bool outcome, double eta);
Gradients training_backward(const ModelParams& params, const ForwardResult& fwd,
                            const StepSeries& steps, bool outcome, double eta);

// dp_{t1}/dx_t for every t, eval mode. Columns after t1 are zero.
AttributionMatrix grad_wrt_inputs(const ModelParams& params,
                                  const StepSeries& steps, int t1);

struct AttentionResult {
  double prediction = 0.5;
  std::vector<double> weights;
  AttributionMatrix attribution;  // weight of step t on its active feature
};

AttentionResult attention_forward(const ModelParams& params,
                                  const StepSeries& steps);

struct EncodedEpisode {
  std::string episode_id;
  StepSeries steps;
  bool outcome = false;
  Split split = Split::kTrain;
};

struct EpochReport {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_auroc = 0.0;
};

struct TrainingReport {
  std::vector<EpochReport> epochs;
  int best_epoch = 0;  // 0 when no epoch ran
  std::string to_csv() const;
};

struct TrainResult {
  ModelParams params;
  TrainingReport report;
};

// Adam with global-norm clipping; batches are gradient-accumulation groups
// over sequences shuffled per epoch. Early stopping on validation loss.
// Throws NumericError on a non-finite loss.
TrainResult train(const std::vector<EncodedEpisode>& corpus,
                  const ModelConfig& config);

// Area under the ROC curve with average ranks for ties.
double auroc(const std::vector<double>& scores, const std::vector<bool>& labels);

struct Checkpoint {
  ModelParams params;
  ModelConfig config;
  FeatureStats stats;
};

std::string checkpoint_to_json(const ModelParams& params,
                               const ModelConfig& config,
                               const FeatureCatalog& catalog,
                               const FeatureStats& stats);
// Throws DataError when the checkpoint was written for a different catalog.
Checkpoint checkpoint_from_json(std::string_view text,
                                const FeatureCatalog& catalog);

}  // namespace driftscope
