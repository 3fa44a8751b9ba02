#include "driftscope/alerts.h"

#include <algorithm>
#include <cmath>

#include "driftscope/csv.h"
#include "driftscope/errors.h"

namespace driftscope {

void AlertRule::validate() const {
  if (!(ratio_threshold > 1.0)) throw ConfigError("ratio_threshold", "must exceed 1");
  if (!(floor > 0.0 && floor < 1.0)) throw ConfigError("floor", "must be in (0, 1)");
  if (!(anchor_time_s < horizon_s)) {
    throw ConfigError("anchor_time", "must precede the horizon");
  }
  if (!(check_interval_s > 0.0)) throw ConfigError("check_interval", "must be positive");
  if (min_new_events < 0) throw ConfigError("min_new_events", "must be non-negative");
}

bool AlertRule::fires(double p0, double p1) const {
  const double needed = std::max(floor, ratio_threshold * p0);
  return p1 >= needed * (1.0 - 1e-12);
}

std::vector<Alert> scan_alerts(const RiskSeries& risk, const AlertRule& rule) {
  rule.validate();
  const int t0 = last_step_at_or_before(risk.step_time, rule.anchor_time_s);
  if (t0 == 0) throw DataError("no anchor");
  const double p0 = risk.at(t0);
  std::vector<Alert> out;
  // Integer stepping avoids drift in the check schedule.
  for (int n = 1;; ++n) {
    const double check = rule.anchor_time_s + n * rule.check_interval_s;
    if (check > rule.horizon_s) break;
    const int t = last_step_at_or_before(risk.step_time, check);
    const double p = risk.at(t);
    if (t > t0 && rule.fires(p0, p)) {
      Alert a;
      a.t0 = t0;
      a.t1 = t;
      a.t0_time_s = risk.step_time[t0 - 1];
      a.t1_time_s = risk.step_time[t - 1];
      a.p0 = p0;
      a.p1 = p;
      a.new_event_count = t - t0;
      out.push_back(a);
    }
  }
  return out;
}

std::optional<Alert> evaluate_alert_rule(const RiskSeries& risk,
                                         const AlertRule& rule) {
  auto all = scan_alerts(risk, rule);
  if (all.empty()) return std::nullopt;
  return all.front();
}

std::vector<Alert> select_alert_cohort(
    const std::vector<std::pair<std::string, RiskSeries>>& episodes,
    const AlertRule& rule) {
  rule.validate();
  std::vector<Alert> cohort;
  for (const auto& [id, risk] : episodes) {
    if (last_step_at_or_before(risk.step_time, rule.anchor_time_s) == 0) continue;
    auto alerts = scan_alerts(risk, rule);
    if (rule.first_alert_only && alerts.size() > 1) alerts.resize(1);
    for (auto& a : alerts) {
      if (a.new_event_count < rule.min_new_events) continue;
      a.episode_id = id;
      cohort.push_back(std::move(a));
    }
  }
  std::stable_sort(cohort.begin(), cohort.end(), [](const Alert& a, const Alert& b) {
    return a.episode_id < b.episode_id;
  });
  return cohort;
}

std::string alerts_to_csv(const std::vector<Alert>& alerts) {
  std::string out = "episode,t0,t1,t0_time,t1_time,p0,p1,new_events\n";
  for (const auto& a : alerts) {
    out += csv::join({a.episode_id, std::to_string(a.t0), std::to_string(a.t1),
                      csv::format_double(a.t0_time_s),
                      csv::format_double(a.t1_time_s), csv::format_double(a.p0),
                      csv::format_double(a.p1),
                      std::to_string(a.new_event_count)});
    out += '\n';
  }
  return out;
}

}  // namespace driftscope
