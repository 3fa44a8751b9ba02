#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "driftscope/attribution_matrix.h"
#include "driftscope/events.h"

namespace driftscope {

enum class Statistic { kOddsRatio, kRothman };
enum class RothmanReference { kAverageBin, kBaseRate };

struct StatWeightConfig {
  Statistic statistic = Statistic::kOddsRatio;
  double laplace_alpha = 0.5;
  int bins_per_feature = 10;
  RothmanReference rothman_reference = RothmanReference::kAverageBin;

  void validate() const;
};

// Discretization of one feature. Bin b covers [cuts[b-1], cuts[b]) with the
// outer bins open-ended, so there are cuts.size() + 1 bins.
struct FeatureBins {
  bool present = false;
  std::vector<double> cuts;      // strictly increasing
  std::vector<std::int64_t> pos;  // observations from outcome-positive episodes
  std::vector<std::int64_t> neg;
  int average_bin = 0;  // bin holding the train mean
  double mean = 0.0;

  int bins() const { return static_cast<int>(cuts.size()) + 1; }
  int bin_of(double value) const;
};

struct BinTable {
  std::vector<FeatureBins> features;

  std::string to_json(const FeatureCatalog& catalog) const;
  static BinTable from_json(std::string_view text, const FeatureCatalog& catalog);
};

// Quantile bins from raw train-split values; counts are per observation.
// Bins that would be empty are merged into their neighbour.
BinTable fit_bins(const std::vector<EventSequence>& corpus, int n_features,
                  const StatWeightConfig& config);

// [(pos_in + a)/(neg_in + a)] / [(pos_out + a)/(neg_out + a)]
double odds_ratio(const BinTable& table, int feature, int bin,
                  double alpha = 0.5);

// risk(bin) / risk(reference) with risk = (pos + a)/(pos + neg + 2a). The
// reference is the average-value bin or the feature's overall rate.
double rothman_index(const BinTable& table, int feature, int bin,
                     double alpha = 0.5,
                     RothmanReference reference = RothmanReference::kAverageBin);

// Per-event statistic of the bin holding the event's raw value, placed on
// the active feature's value channel.
AttributionMatrix stat_weights(const StepSeries& steps, const EventSequence& raw,
                               const BinTable& table,
                               const StatWeightConfig& config);

}  // namespace driftscope
