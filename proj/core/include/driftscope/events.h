#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace driftscope {

enum class Split { kTrain, kValidation, kTest };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

// Ordered list of feature identifiers. The position of a feature in the
// catalog is its index in every model-facing representation, so the order
// must not change for the lifetime of a model.
class FeatureCatalog {
 public:
  struct Entry {
    std::string id;
    std::string display_name;
  };

  FeatureCatalog() = default;
  explicit FeatureCatalog(std::vector<Entry> entries);

  int size() const { return static_cast<int>(entries_.size()); }
  const Entry& operator[](int i) const { return entries_.at(i); }
  const std::vector<Entry>& entries() const { return entries_; }

  std::optional<int> index_of(std::string_view id) const;
  // Throws DataError naming the identifier when it is not in the catalog.
  int require(std::string_view id) const;

  // Hex digest of the ordered identifiers; stored in checkpoints.
  std::string fingerprint() const;

  std::string to_json() const;
  static FeatureCatalog from_json(std::string_view text);

 private:
  std::vector<Entry> entries_;
  std::map<std::string, int, std::less<>> index_;
};

struct Event {
  double time_s = 0.0;  // seconds since episode start
  int feature = 0;
  double value = 0.0;      // normalized after normalize(), raw before
  double raw_value = 0.0;  // always the value in native units
};

struct EventSequence {
  std::string episode_id;
  std::vector<Event> events;
  bool outcome = false;
  Split split = Split::kTrain;
};

// Stable sort by time, then catalog index; equal keys keep input order.
void sort_events(std::vector<Event>& events);

// Reads the JSONL event format. Episodes are returned in order of first
// appearance. Throws DataError with the offending line number.
std::vector<EventSequence> parse_event_log(std::istream& in,
                                           const FeatureCatalog& catalog);
void write_event_log(std::ostream& out,
                     const std::vector<EventSequence>& corpus,
                     const FeatureCatalog& catalog);

struct FeatureSummary {
  bool present = false;     // observed in the train split
  bool degenerate = false;  // zero spread after clamping
  double mean = 0.0;
  double std = 0.0;
  double clamp_lo = 0.0;
  double clamp_hi = 0.0;
};

struct FeatureStats {
  std::vector<FeatureSummary> features;

  // Clamp to the fitted percentile range, then z-score. Absent and
  // degenerate features map to 0.
  double normalize_value(int feature, double raw) const;

  std::string to_json(const FeatureCatalog& catalog) const;
  static FeatureStats from_json(std::string_view text,
                                const FeatureCatalog& catalog);
};

// Nearest-rank percentile of an ascending-sorted sample, q in [0, 100].
double nearest_rank_percentile(const std::vector<double>& sorted, double q);

// Fits per-feature statistics from split == train only. Values are clamped
// to their [1st, 99th] nearest-rank percentiles before the mean and the
// population standard deviation are taken.
FeatureStats fit_feature_stats(const std::vector<EventSequence>& corpus,
                               int n_features);

EventSequence normalize(const EventSequence& seq, const FeatureStats& stats);

// Model-facing encoding: one column per event. Rows are laid out as
// [value channels | presence indicators | delta-time].
struct StepSeries {
  int n_features = 0;
  Eigen::MatrixXd x;  // dim() x steps()
  std::vector<int> step_feature;
  std::vector<double> step_time;
  std::vector<double> step_raw_value;

  int steps() const { return static_cast<int>(step_feature.size()); }
  int dim() const { return 2 * n_features + 1; }
  int value_row(int feature) const { return feature; }
  int indicator_row(int feature) const { return n_features + feature; }
  int delta_row() const { return 2 * n_features; }

  // Value in the active feature's channel at 1-based step t.
  double active_value(int t) const {
    return x(step_feature[t - 1], t - 1);
  }
  // First t1 steps (1-based, inclusive).
  StepSeries prefix(int t1) const;
};

double encode_delta_time(double delta_seconds);

StepSeries encode_steps(const EventSequence& seq,
                        const FeatureCatalog& catalog);

// Inverse of encode_steps on the normalized values.
std::vector<Event> decode_steps(const StepSeries& steps);

// Index of the last step (1-based) with step_time <= t, or 0 when none.
int last_step_at_or_before(const StepSeries& steps, double time_s);
int last_step_at_or_before(const std::vector<double>& step_time,
                           double time_s);

}  // namespace driftscope
