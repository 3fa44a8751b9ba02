#include "driftscope/attribution.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace driftscope {

double RecurrentRisk::risk_at(const StepSeries& steps, int t1) const {
  const ForwardResult fwd = forward(params_, steps.prefix(t1));
  return fwd.risk.at(t1);
}

Eigen::MatrixXd RecurrentRisk::input_gradient(const StepSeries& steps,
                                              int t1) const {
  return grad_wrt_inputs(params_, steps, t1).a;
}

LinearSystemRisk::LinearSystemRisk(lds::LDSystem sys) : sys_(std::move(sys)) {
  sys_.validate();
  q_ = sys_.quadratic_form();
}

double LinearSystemRisk::risk_at(const StepSeries& steps, int t1) const {
  Eigen::VectorXd h = sys_.h0;
  for (int t = 0; t < t1; ++t) h = sys_.A * h + sys_.B * steps.x.col(t);
  return 0.5 * h.dot(q_ * h);
}

Eigen::MatrixXd LinearSystemRisk::input_gradient(const StepSeries& steps,
                                                 int t1) const {
  Eigen::VectorXd h = sys_.h0;
  for (int t = 0; t < t1; ++t) h = sys_.A * h + sys_.B * steps.x.col(t);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(steps.dim(), steps.steps());
  // Adjoint recursion: lambda_{t1} = Q h_{t1}, lambda_{t-1} = A' lambda_t.
  Eigen::VectorXd lambda = q_ * h;
  for (int t = t1; t >= 1; --t) {
    grad.col(t - 1) = sys_.B.transpose() * lambda;
    lambda = sys_.A.transpose() * lambda;
  }
  return grad;
}

namespace {

void check_window(int t0, int t1, int T) {
  if (t0 > t1) throw std::invalid_argument("window: t0 > t1");
  if (t0 < 0 || t1 > T) throw std::invalid_argument("window: out of range");
}

}  // namespace

AttributionMatrix time_restrict(const AttributionMatrix& a, int t0, int t1) {
  check_window(t0, t1, a.steps());
  AttributionMatrix out;
  out.method = a.method;
  out.window = Window{t0, t1};
  out.a = Eigen::MatrixXd::Zero(a.a.rows(), a.a.cols());
  out.a.middleCols(t0, t1 - t0) = a.a.middleCols(t0, t1 - t0);
  return out;
}

StepSeries build_carry_forward_baseline(const StepSeries& steps, int t0) {
  check_window(t0, t0, steps.steps());
  StepSeries b = steps;
  std::vector<double> last(steps.n_features, 0.0);
  for (int j = 0; j < t0; ++j) {
    last[steps.step_feature[j]] = steps.x(steps.value_row(steps.step_feature[j]), j);
  }
  for (int j = t0; j < steps.steps(); ++j) {
    const int f = steps.step_feature[j];
    b.x(steps.value_row(f), j) = last[f];
  }
  return b;
}

AttributionMatrix integrated_gradients(const RiskModel& model,
                                       const StepSeries& steps, int t0, int t1,
                                       int m) {
  if (m < 1) throw std::invalid_argument("integrated_gradients: m < 1");
  check_window(t0, t1, steps.steps());
  if (t0 >= t1) throw std::invalid_argument("integrated_gradients: empty window");
  const StepSeries baseline = build_carry_forward_baseline(steps, t0);
  const Eigen::MatrixXd delta = steps.x - baseline.x;

  AttributionMatrix out;
  out.method = "integrated_gradients";
  out.a = Eigen::MatrixXd::Zero(steps.dim(), steps.steps());
  if (delta.cwiseAbs().maxCoeff() == 0.0) {
    out.window = Window{t0, t1};
    return out;
  }
  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(steps.dim(), steps.steps());
  StepSeries point = steps;
  for (int k = 0; k < m; ++k) {
    const double alpha = (k + 0.5) / m;
    point.x = alpha * baseline.x + (1.0 - alpha) * steps.x;
    avg += model.input_gradient(point, t1);
  }
  avg /= static_cast<double>(m);
  out.a = avg.cwiseProduct(delta);
  return time_restrict(out, t0, t1);
}

AttributionMatrix discrete_time_derivatives(const RiskSeries& risk,
                                            const StepSeries& steps) {
  if (risk.steps() != steps.steps()) {
    throw std::invalid_argument("discrete_time_derivatives: length mismatch");
  }
  AttributionMatrix out;
  out.method = "derivative";
  out.a = Eigen::MatrixXd::Zero(steps.dim(), steps.steps());
  for (int t = 1; t <= steps.steps(); ++t) {
    out.a(steps.value_row(steps.step_feature[t - 1]), t - 1) =
        risk.at(t) - risk.at(t - 1);
  }
  return out;
}

double event_weight(const AttributionMatrix& a, const StepSeries& steps, int t) {
  return a.a(steps.value_row(steps.step_feature[t - 1]), t - 1);
}

AttributionMatrix time_diff(const AttributionMatrix& a, const StepSeries& steps,
                            int t0, int t1, double neutral,
                            DiffReference reference) {
  check_window(t0, t1, steps.steps());
  std::vector<double> ref(steps.n_features, 0.0);
  std::vector<bool> seen(steps.n_features, false);
  for (int t = 1; t <= t0; ++t) {
    const int f = steps.step_feature[t - 1];
    const double w = event_weight(a, steps, t);
    if (!seen[f] || reference == DiffReference::kMostRecent) {
      ref[f] = w;
    } else {
      ref[f] = std::max(ref[f], w);
    }
    seen[f] = true;
  }
  AttributionMatrix out;
  out.method = a.method;
  out.window = Window{t0, t1};
  out.a = Eigen::MatrixXd::Zero(a.a.rows(), a.a.cols());
  for (int t = t0 + 1; t <= t1; ++t) {
    const int f = steps.step_feature[t - 1];
    out.a(steps.value_row(f), t - 1) =
        event_weight(a, steps, t) - (seen[f] ? ref[f] : neutral);
  }
  return out;
}

namespace {

struct WindowGroups {
  std::vector<int> features;            // distinct, ascending
  std::vector<std::vector<int>> steps;  // window steps per feature
};

WindowGroups group_window(const StepSeries& steps, int t0, int t1) {
  std::map<int, std::vector<int>> by_feature;
  for (int t = t0 + 1; t <= t1; ++t) by_feature[steps.step_feature[t - 1]].push_back(t);
  WindowGroups g;
  for (auto& [f, ts] : by_feature) {
    g.features.push_back(f);
    g.steps.push_back(std::move(ts));
  }
  return g;
}

// e[j][r]: elementary symmetric polynomial of degree r in the group sizes
// of features j..end. The number of distinct-feature r-subsets of those
// features' events.
std::vector<std::vector<double>> suffix_symmetric(const WindowGroups& g, int k) {
  const int n = static_cast<int>(g.features.size());
  std::vector<std::vector<double>> e(n + 1, std::vector<double>(k + 1, 0.0));
  e[n][0] = 1.0;
  for (int j = n - 1; j >= 0; --j) {
    const double c = static_cast<double>(g.steps[j].size());
    e[j][0] = 1.0;
    for (int r = 1; r <= k; ++r) e[j][r] = e[j + 1][r] + c * e[j + 1][r - 1];
  }
  return e;
}

ExplanationItem item_at(const StepSeries& steps, int t, double weight) {
  return {t, steps.step_feature[t - 1], steps.step_time[t - 1],
          steps.step_raw_value[t - 1], weight};
}

}  // namespace

Explanation random_guess(const StepSeries& steps, int t0, int t1, int k,
                         std::uint64_t seed) {
  check_window(t0, t1, steps.steps());
  if (k < 1) throw std::invalid_argument("random_guess: k < 1");
  const WindowGroups g = group_window(steps, t0, t1);
  const int n = static_cast<int>(g.features.size());
  Explanation out;
  const int take = std::min(k, n);
  out.short_list = take < k;
  if (take == 0) return out;
  const auto e = suffix_symmetric(g, take);
  Rng rng(seed);
  int remaining = take;
  std::vector<int> chosen;
  for (int j = 0; j < n && remaining > 0; ++j) {
    const double c = static_cast<double>(g.steps[j].size());
    const double p_include = c * e[j + 1][remaining - 1] / e[j][remaining];
    if (rng.uniform() < p_include) {
      chosen.push_back(g.steps[j][rng.below(g.steps[j].size())]);
      --remaining;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  for (int t : chosen) out.items.push_back(item_at(steps, t, 0.0));
  return out;
}

std::vector<double> random_guess_inclusion(const StepSeries& steps, int t0,
                                           int t1, int k) {
  check_window(t0, t1, steps.steps());
  const WindowGroups g = group_window(steps, t0, t1);
  const int n = static_cast<int>(g.features.size());
  std::vector<double> incl(steps.steps(), 0.0);
  const int take = std::min(k, n);
  if (take == 0) return incl;
  // P(feature j selected) = c_j * e_{take-1}(others) / e_take(all).
  const auto all = suffix_symmetric(g, take);
  for (int j = 0; j < n; ++j) {
    WindowGroups others = g;
    others.features.erase(others.features.begin() + j);
    others.steps.erase(others.steps.begin() + j);
    const auto e = suffix_symmetric(others, take);
    const double c = static_cast<double>(g.steps[j].size());
    const double p_feature = c * e[0][take - 1] / all[0][take];
    for (int t : g.steps[j]) incl[t - 1] = p_feature / c;
  }
  return incl;
}

Explanation top_k_explanations(const AttributionMatrix& a,
                               const StepSeries& steps, int k) {
  const Window w = a.window.value_or(Window{0, steps.steps()});
  check_window(w.t0, w.t1, steps.steps());
  std::vector<ExplanationItem> candidates;
  for (int t = w.t0 + 1; t <= w.t1; ++t) {
    const double weight = event_weight(a, steps, t);
    if (weight != 0.0 && std::isfinite(weight)) {
      candidates.push_back(item_at(steps, t, weight));
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const ExplanationItem& x, const ExplanationItem& y) {
              if (x.weight != y.weight) return x.weight > y.weight;
              if (x.step != y.step) return x.step > y.step;
              return x.feature < y.feature;
            });
  Explanation out;
  std::vector<bool> used(steps.n_features, false);
  for (const auto& c : candidates) {
    if (static_cast<int>(out.items.size()) >= k) break;
    if (used[c.feature]) continue;
    used[c.feature] = true;
    out.items.push_back(c);
  }
  out.short_list = static_cast<int>(out.items.size()) < k;
  return out;
}

}  // namespace driftscope
