#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "driftscope/attribution_matrix.h"
#include "driftscope/events.h"
#include "driftscope/lds_oracle.h"
#include "driftscope/seqmodel.h"

namespace driftscope {

// A differentiable per-step risk model, as seen by the gradient methods.
class RiskModel {
 public:
  virtual ~RiskModel() = default;
  // p_{t1} on the given inputs (1-based).
  virtual double risk_at(const StepSeries& steps, int t1) const = 0;
  // dp_{t1}/dx_t for all t; dim() x steps(), zero after t1.
  virtual Eigen::MatrixXd input_gradient(const StepSeries& steps,
                                         int t1) const = 0;
};

// The LSTM risk model in eval mode.
class RecurrentRisk final : public RiskModel {
 public:
  explicit RecurrentRisk(const ModelParams& params) : params_(params) {}
  double risk_at(const StepSeries& steps, int t1) const override;
  Eigen::MatrixXd input_gradient(const StepSeries& steps, int t1) const override;

 private:
  const ModelParams& params_;
};

// The quadratic-risk linear system driven directly by the step vectors.
class LinearSystemRisk final : public RiskModel {
 public:
  explicit LinearSystemRisk(lds::LDSystem sys);
  double risk_at(const StepSeries& steps, int t1) const override;
  Eigen::MatrixXd input_gradient(const StepSeries& steps, int t1) const override;

 private:
  lds::LDSystem sys_;
  Eigen::MatrixXd q_;
};

// Keeps columns t with t0 < t <= t1 and zeroes the rest.
AttributionMatrix time_restrict(const AttributionMatrix& a, int t0, int t1);

// Counterfactual in which no result changed after t0: every value channel
// after t0 is replaced by the feature's latest value at or before t0 (0 when
// the feature was not observed by then). Indicator and delta-time channels
// are copied, so the measurement pattern is identical.
StepSeries build_carry_forward_baseline(const StepSeries& steps, int t0);

// Path-integrated gradients of p_{t1} from the carry-forward baseline at t0
// to the observed inputs, using an m-point midpoint rule. Window (t0, t1].
AttributionMatrix integrated_gradients(const RiskModel& model,
                                       const StepSeries& steps, int t0, int t1,
                                       int m = 64);

// Column t is (p_t - p_{t-1}) on the active feature, with p_0 = p_base.
AttributionMatrix discrete_time_derivatives(const RiskSeries& risk,
                                            const StepSeries& steps);

enum class DiffReference { kMax, kMostRecent };

// Neutral reference weight for features not seen by t0.
inline constexpr double kNeutralRatio = 1.0;     // odds ratio, Rothman index
inline constexpr double kNeutralAdditive = 0.0;  // gradient family

// Subtracts from each in-window event weight the feature's reference
// weight over steps <= t0 (max by default, or the most recent one).
AttributionMatrix time_diff(const AttributionMatrix& a, const StepSeries& steps,
                            int t0, int t1, double neutral,
                            DiffReference reference = DiffReference::kMax);

// Weight of the event at 1-based step t: a[value row of i_t, t].
double event_weight(const AttributionMatrix& a, const StepSeries& steps, int t);

struct ExplanationItem {
  int step = 0;
  int feature = 0;
  double time_s = 0.0;
  double raw_value = 0.0;
  double weight = 0.0;
};

struct Explanation {
  std::vector<ExplanationItem> items;
  bool short_list = false;  // fewer than k items were available
};

// k events drawn uniformly from the k-subsets of window events with
// pairwise-distinct features.
Explanation random_guess(const StepSeries& steps, int t0, int t1, int k,
                         std::uint64_t seed);

// Probability that each window step is included by random_guess.
std::vector<double> random_guess_inclusion(const StepSeries& steps, int t0,
                                           int t1, int k);

// Greedy highest-weight events with distinct features. Ties go to the later
// step, then the lower feature index. Zero weights are never selected.
Explanation top_k_explanations(const AttributionMatrix& a,
                               const StepSeries& steps, int k);

}  // namespace driftscope
