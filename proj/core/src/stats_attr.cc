#include "driftscope/stats_attr.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "driftscope/errors.h"
#include <nlohmann/json.hpp>

namespace driftscope {

using nlohmann::json;

void StatWeightConfig::validate() const {
  if (!(laplace_alpha > 0.0)) throw ConfigError("laplace_alpha", "must be positive");
  if (bins_per_feature < 2) throw ConfigError("bins_per_feature", "must be at least 2");
}

int FeatureBins::bin_of(double value) const {
  return static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), value) -
                          cuts.begin());
}

namespace {

// Linear-interpolation quantile of a sorted sample.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

BinTable fit_bins(const std::vector<EventSequence>& corpus, int n_features,
                  const StatWeightConfig& config) {
  config.validate();
  struct Obs {
    double value;
    bool outcome;
  };
  std::vector<std::vector<Obs>> obs(n_features);
  bool any_train = false;
  for (const auto& seq : corpus) {
    if (seq.split != Split::kTrain) continue;
    any_train = true;
    for (const auto& e : seq.events) {
      obs.at(e.feature).push_back({e.raw_value, seq.outcome});
    }
  }
  if (!any_train) throw DataError("fit_bins: empty train split");

  BinTable table;
  table.features.resize(n_features);
  for (int f = 0; f < n_features; ++f) {
    FeatureBins& fb = table.features[f];
    if (obs[f].empty()) {
      fb.pos.assign(1, 0);
      fb.neg.assign(1, 0);
      continue;
    }
    fb.present = true;
    std::vector<double> sorted;
    sorted.reserve(obs[f].size());
    for (const auto& o : obs[f]) sorted.push_back(o.value);
    std::sort(sorted.begin(), sorted.end());

    // Keep a cut only if it leaves values on both sides of it within the
    // current bin; this merges would-be empty bins.
    double last_cut = -INFINITY;
    for (int j = 1; j < config.bins_per_feature; ++j) {
      const double c = quantile(sorted, static_cast<double>(j) /
                                            config.bins_per_feature);
      const auto below_begin =
          std::lower_bound(sorted.begin(), sorted.end(), last_cut);
      const auto at_c = std::lower_bound(sorted.begin(), sorted.end(), c);
      if (at_c == below_begin || at_c == sorted.end() || c <= last_cut) continue;
      fb.cuts.push_back(c);
      last_cut = c;
    }
    fb.pos.assign(fb.bins(), 0);
    fb.neg.assign(fb.bins(), 0);
    double sum = 0.0;
    for (const auto& o : obs[f]) {
      const int b = fb.bin_of(o.value);
      (o.outcome ? fb.pos : fb.neg)[b] += 1;
      sum += o.value;
    }
    fb.mean = sum / static_cast<double>(obs[f].size());
    fb.average_bin = fb.bin_of(fb.mean);
  }
  return table;
}

double odds_ratio(const BinTable& table, int feature, int bin, double alpha) {
  const FeatureBins& fb = table.features.at(feature);
  if (bin < 0 || bin >= fb.bins()) throw std::out_of_range("odds_ratio: bin");
  const double pos_in = static_cast<double>(fb.pos[bin]);
  const double neg_in = static_cast<double>(fb.neg[bin]);
  const double pos_out =
      static_cast<double>(std::accumulate(fb.pos.begin(), fb.pos.end(),
                                          std::int64_t{0})) - pos_in;
  const double neg_out =
      static_cast<double>(std::accumulate(fb.neg.begin(), fb.neg.end(),
                                          std::int64_t{0})) - neg_in;
  return ((pos_in + alpha) / (neg_in + alpha)) /
         ((pos_out + alpha) / (neg_out + alpha));
}

double rothman_index(const BinTable& table, int feature, int bin, double alpha,
                     RothmanReference reference) {
  const FeatureBins& fb = table.features.at(feature);
  if (bin < 0 || bin >= fb.bins()) throw std::out_of_range("rothman_index: bin");
  auto risk = [alpha](double pos, double neg) {
    return (pos + alpha) / (pos + neg + 2.0 * alpha);
  };
  const double r = risk(static_cast<double>(fb.pos[bin]),
                        static_cast<double>(fb.neg[bin]));
  double ref;
  if (reference == RothmanReference::kAverageBin) {
    ref = risk(static_cast<double>(fb.pos[fb.average_bin]),
               static_cast<double>(fb.neg[fb.average_bin]));
  } else {
    ref = risk(static_cast<double>(std::accumulate(fb.pos.begin(), fb.pos.end(),
                                                   std::int64_t{0})),
               static_cast<double>(std::accumulate(fb.neg.begin(), fb.neg.end(),
                                                   std::int64_t{0})));
  }
  return r / ref;
}

AttributionMatrix stat_weights(const StepSeries& steps, const EventSequence& raw,
                               const BinTable& table,
                               const StatWeightConfig& config) {
  if (static_cast<int>(raw.events.size()) != steps.steps()) {
    throw std::invalid_argument("stat_weights: raw events not aligned with steps");
  }
  AttributionMatrix out;
  out.method = config.statistic == Statistic::kOddsRatio ? "odds_ratio" : "rothman";
  out.a = Eigen::MatrixXd::Zero(steps.dim(), steps.steps());
  for (int j = 0; j < steps.steps(); ++j) {
    const Event& e = raw.events[j];
    if (e.feature != steps.step_feature[j]) {
      throw std::invalid_argument("stat_weights: raw events not aligned with steps");
    }
    // bin_of already maps out-of-range values to the outer bins.
    const int b = table.features.at(e.feature).bin_of(e.raw_value);
    const double w =
        config.statistic == Statistic::kOddsRatio
            ? odds_ratio(table, e.feature, b, config.laplace_alpha)
            : rothman_index(table, e.feature, b, config.laplace_alpha,
                            config.rothman_reference);
    out.a(steps.value_row(e.feature), j) = w;
  }
  return out;
}

std::string BinTable::to_json(const FeatureCatalog& catalog) const {
  json per = json::object();
  for (int f = 0; f < catalog.size(); ++f) {
    const FeatureBins& fb = features.at(f);
    per[catalog[f].id] = {{"present", fb.present},
                          {"edges", fb.cuts},
                          {"pos", fb.pos},
                          {"neg", fb.neg},
                          {"average_bin", fb.average_bin},
                          {"mean", fb.mean}};
  }
  return json{{"format", "driftscope-bins"}, {"features", per}}.dump(1) + "\n";
}

BinTable BinTable::from_json(std::string_view text, const FeatureCatalog& catalog) {
  BinTable table;
  table.features.resize(catalog.size());
  try {
    const json j = json::parse(text);
    for (const auto& [id, v] : j.at("features").items()) {
      FeatureBins& fb = table.features[catalog.require(id)];
      fb.present = v.at("present").get<bool>();
      fb.cuts = v.at("edges").get<std::vector<double>>();
      fb.pos = v.at("pos").get<std::vector<std::int64_t>>();
      fb.neg = v.at("neg").get<std::vector<std::int64_t>>();
      fb.average_bin = v.at("average_bin").get<int>();
      fb.mean = v.at("mean").get<double>();
      if (static_cast<int>(fb.pos.size()) != fb.bins() ||
          static_cast<int>(fb.neg.size()) != fb.bins() ||
          !std::is_sorted(fb.cuts.begin(), fb.cuts.end()) ||
          fb.average_bin < 0 || fb.average_bin >= fb.bins()) {
        throw DataError("bins: inconsistent table for '" + id + "'");
      }
    }
    for (auto& fb : table.features) {
      if (fb.pos.empty()) {
        fb.pos.assign(1, 0);
        fb.neg.assign(1, 0);
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("bins: ") + e.what());
  }
  return table;
}

}  // namespace driftscope
