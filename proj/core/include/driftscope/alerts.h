#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "driftscope/seqmodel.h"

namespace driftscope {

struct AlertRule {
  double ratio_threshold = 1.5;
  double floor = 0.2;
  double anchor_time_s = 12 * 3600.0;
  double horizon_s = 24 * 3600.0;
  double check_interval_s = 2 * 3600.0;
  int min_new_events = 40;
  bool first_alert_only = true;

  void validate() const;
  // Inclusive threshold test; a relative slack of 1e-12 absorbs rounding in
  // ratio_threshold * p0.
  bool fires(double p0, double p1) const;
};

struct Alert {
  std::string episode_id;
  int t0 = 0;  // anchor step
  int t1 = 0;  // alerting step
  double t0_time_s = 0.0;
  double t1_time_s = 0.0;
  double p0 = 0.0;
  double p1 = 0.0;
  int new_event_count = 0;  // steps in (t0, t1]
};

// Every check time at which the rule fires, in schedule order. Risk at a
// wall-clock time is the last prediction at or before it. Throws DataError
// ("no anchor") when no step precedes the anchor time.
std::vector<Alert> scan_alerts(const RiskSeries& risk, const AlertRule& rule);

std::optional<Alert> evaluate_alert_rule(const RiskSeries& risk,
                                         const AlertRule& rule);

// Per episode: the first alert (or all when first_alert_only is off), with
// fewer than min_new_events new steps dropped. Sorted by episode id.
// Episodes without an anchor step are skipped.
std::vector<Alert> select_alert_cohort(
    const std::vector<std::pair<std::string, RiskSeries>>& episodes,
    const AlertRule& rule);

std::string alerts_to_csv(const std::vector<Alert>& alerts);

}  // namespace driftscope
