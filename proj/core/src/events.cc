#include "driftscope/events.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "driftscope/errors.h"
#include <nlohmann/json.hpp>

namespace driftscope {

using nlohmann::json;

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw DataError("unknown split '" + std::string(name) + "'");
}

FeatureCatalog::FeatureCatalog(std::vector<Entry> entries)
    : entries_(std::move(entries)) {
  for (int i = 0; i < size(); ++i) {
    auto [it, inserted] = index_.emplace(entries_[i].id, i);
    if (!inserted) {
      throw DataError("duplicate feature identifier '" + entries_[i].id + "'");
    }
  }
}

std::optional<int> FeatureCatalog::index_of(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int FeatureCatalog::require(std::string_view id) const {
  if (auto i = index_of(id)) return *i;
  throw DataError("unknown feature identifier '" + std::string(id) + "'");
}

std::string FeatureCatalog::fingerprint() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001B3ULL;
  };
  for (const auto& e : entries_) {
    for (unsigned char c : e.id) mix(c);
    mix(0);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string FeatureCatalog::to_json() const {
  json features = json::array();
  for (const auto& e : entries_) {
    features.push_back({{"id", e.id}, {"name", e.display_name}});
  }
  return json{{"features", features}, {"fingerprint", fingerprint()}}.dump(2);
}

FeatureCatalog FeatureCatalog::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    std::vector<Entry> entries;
    for (const auto& f : j.at("features")) {
      entries.push_back({f.at("id").get<std::string>(),
                         f.value("name", f.at("id").get<std::string>())});
    }
    return FeatureCatalog(std::move(entries));
  } catch (const json::exception& e) {
    throw DataError(std::string("catalog: ") + e.what());
  }
}

void sort_events(std::vector<Event>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) {
                     if (a.time_s != b.time_s) return a.time_s < b.time_s;
                     return a.feature < b.feature;
                   });
}

namespace {

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
  throw DataError("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::vector<EventSequence> parse_event_log(std::istream& in,
                                           const FeatureCatalog& catalog) {
  std::vector<EventSequence> corpus;
  std::unordered_map<std::string, std::size_t> by_episode;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      line_error(line_no, std::string("malformed record: ") + e.what());
    }
    if (!rec.is_object()) line_error(line_no, "malformed record: not an object");

    auto field = [&](const char* key) -> const json& {
      auto it = rec.find(key);
      if (it == rec.end()) {
        line_error(line_no, std::string("malformed record: missing '") + key +
                                "'");
      }
      return *it;
    };
    const json& episode = field("episode");
    const json& time = field("time_s");
    const json& feature = field("feature");
    const json& value = field("value");
    const json& outcome = field("outcome");
    const json& split = field("split");
    if (!episode.is_string() || !time.is_number() || !feature.is_string() ||
        !value.is_number() || !outcome.is_number_integer() ||
        !split.is_string()) {
      line_error(line_no, "malformed record: field has wrong type");
    }
    const double t = time.get<double>();
    if (!std::isfinite(t)) line_error(line_no, "non-finite time");
    if (t < 0) line_error(line_no, "negative time");
    const double v = value.get<double>();
    if (!std::isfinite(v)) line_error(line_no, "non-finite value");
    const auto o = outcome.get<long long>();
    if (o != 0 && o != 1) line_error(line_no, "outcome must be 0 or 1");

    const auto f = catalog.index_of(feature.get<std::string>());
    if (!f) {
      line_error(line_no, "unknown feature identifier '" +
                              feature.get<std::string>() + "'");
    }
    Split sp;
    try {
      sp = parse_split(split.get<std::string>());
    } catch (const DataError& e) {
      line_error(line_no, e.what());
    }

    const auto id = episode.get<std::string>();
    auto [it, inserted] = by_episode.emplace(id, corpus.size());
    if (inserted) {
      corpus.push_back(EventSequence{id, {}, o == 1, sp});
    }
    EventSequence& seq = corpus[it->second];
    if (seq.outcome != (o == 1) || seq.split != sp) {
      line_error(line_no, "outcome/split disagree within episode '" + id + "'");
    }
    seq.events.push_back(Event{t, *f, v, v});
  }
  for (auto& seq : corpus) sort_events(seq.events);
  return corpus;
}

void write_event_log(std::ostream& out,
                     const std::vector<EventSequence>& corpus,
                     const FeatureCatalog& catalog) {
  for (const auto& seq : corpus) {
    for (const auto& e : seq.events) {
      json rec = {{"episode", seq.episode_id},
                  {"time_s", e.time_s},
                  {"feature", catalog[e.feature].id},
                  {"value", e.raw_value},
                  {"outcome", seq.outcome ? 1 : 0},
                  {"split", std::string(split_name(seq.split))}};
      out << rec.dump() << '\n';
    }
  }
}

double FeatureStats::normalize_value(int feature, double raw) const {
  const FeatureSummary& s = features.at(feature);
  if (!s.present || s.degenerate) return 0.0;
  const double clamped = std::clamp(raw, s.clamp_lo, s.clamp_hi);
  return (clamped - s.mean) / s.std;
}

std::string FeatureStats::to_json(const FeatureCatalog& catalog) const {
  json per = json::object();
  for (int f = 0; f < catalog.size(); ++f) {
    const auto& s = features.at(f);
    per[catalog[f].id] = {{"present", s.present},   {"degenerate", s.degenerate},
                          {"mean", s.mean},         {"std", s.std},
                          {"clamp_lo", s.clamp_lo}, {"clamp_hi", s.clamp_hi}};
  }
  return json{{"features", per}}.dump(2);
}

FeatureStats FeatureStats::from_json(std::string_view text,
                                     const FeatureCatalog& catalog) {
  FeatureStats stats;
  stats.features.resize(catalog.size());
  try {
    const json j = json::parse(text);
    for (const auto& [id, s] : j.at("features").items()) {
      FeatureSummary& out = stats.features[catalog.require(id)];
      out.present = s.at("present").get<bool>();
      out.degenerate = s.at("degenerate").get<bool>();
      out.mean = s.at("mean").get<double>();
      out.std = s.at("std").get<double>();
      out.clamp_lo = s.at("clamp_lo").get<double>();
      out.clamp_hi = s.at("clamp_hi").get<double>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("feature stats: ") + e.what());
  }
  return stats;
}

double nearest_rank_percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("percentile of empty sample");
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

FeatureStats fit_feature_stats(const std::vector<EventSequence>& corpus,
                               int n_features) {
  std::vector<std::vector<double>> values(n_features);
  bool any_train = false;
  for (const auto& seq : corpus) {
    if (seq.split != Split::kTrain) continue;
    any_train = true;
    for (const auto& e : seq.events) values.at(e.feature).push_back(e.raw_value);
  }
  if (!any_train) throw DataError("feature stats: no train-split sequence");

  FeatureStats stats;
  stats.features.resize(n_features);
  for (int f = 0; f < n_features; ++f) {
    auto& v = values[f];
    FeatureSummary& s = stats.features[f];
    if (v.empty()) continue;
    s.present = true;
    std::sort(v.begin(), v.end());
    s.clamp_lo = nearest_rank_percentile(v, 1.0);
    s.clamp_hi = nearest_rank_percentile(v, 99.0);
    if (s.clamp_lo == s.clamp_hi && v.front() != v.back()) {
      // A heavy tie would collapse the clamp range; keep the full range.
      s.clamp_lo = v.front();
      s.clamp_hi = v.back();
    }
    double sum = 0.0;
    for (double x : v) sum += std::clamp(x, s.clamp_lo, s.clamp_hi);
    s.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) {
      const double d = std::clamp(x, s.clamp_lo, s.clamp_hi) - s.mean;
      ss += d * d;
    }
    s.std = std::sqrt(ss / static_cast<double>(v.size()));
    s.degenerate = !(s.std > 0.0);
  }
  return stats;
}

EventSequence normalize(const EventSequence& seq, const FeatureStats& stats) {
  EventSequence out = seq;
  for (auto& e : out.events) e.value = stats.normalize_value(e.feature, e.raw_value);
  return out;
}

StepSeries StepSeries::prefix(int t1) const {
  StepSeries out;
  out.n_features = n_features;
  out.x = x.leftCols(t1);
  out.step_feature.assign(step_feature.begin(), step_feature.begin() + t1);
  out.step_time.assign(step_time.begin(), step_time.begin() + t1);
  out.step_raw_value.assign(step_raw_value.begin(),
                            step_raw_value.begin() + t1);
  return out;
}

double encode_delta_time(double delta_seconds) {
  return std::log1p(delta_seconds / 3600.0);
}

StepSeries encode_steps(const EventSequence& seq,
                        const FeatureCatalog& catalog) {
  StepSeries s;
  s.n_features = catalog.size();
  const int T = static_cast<int>(seq.events.size());
  s.x = Eigen::MatrixXd::Zero(s.dim(), T);
  s.step_feature.reserve(T);
  s.step_time.reserve(T);
  s.step_raw_value.reserve(T);
  double prev_time = 0.0;
  for (int t = 0; t < T; ++t) {
    const Event& e = seq.events[t];
    s.x(s.value_row(e.feature), t) = e.value;
    s.x(s.indicator_row(e.feature), t) = 1.0;
    s.x(s.delta_row(), t) = encode_delta_time(e.time_s - prev_time);
    prev_time = e.time_s;
    s.step_feature.push_back(e.feature);
    s.step_time.push_back(e.time_s);
    s.step_raw_value.push_back(e.raw_value);
  }
  return s;
}

std::vector<Event> decode_steps(const StepSeries& steps) {
  std::vector<Event> events;
  events.reserve(steps.steps());
  for (int t = 0; t < steps.steps(); ++t) {
    int active = -1;
    for (int f = 0; f < steps.n_features; ++f) {
      if (steps.x(steps.indicator_row(f), t) == 1.0) active = f;
    }
    events.push_back(Event{steps.step_time[t], active,
                           steps.x(steps.value_row(active), t),
                           steps.step_raw_value[t]});
  }
  return events;
}

int last_step_at_or_before(const std::vector<double>& step_time,
                           double time_s) {
  auto it = std::upper_bound(step_time.begin(), step_time.end(), time_s);
  return static_cast<int>(it - step_time.begin());
}

int last_step_at_or_before(const StepSeries& steps, double time_s) {
  return last_step_at_or_before(steps.step_time, time_s);
}

}  // namespace driftscope
