#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

namespace driftscope {

// Explanation window (t0, t1] over 1-based steps; t0 == 0 is episode start.
struct Window {
  int t0 = 0;
  int t1 = 0;
  bool contains(int t) const { return t0 < t && t <= t1; }
  friend bool operator==(const Window&, const Window&) = default;
};

// Attribution weights over inputs: row = input channel, column = step
// (column t-1 holds step t). Event-level methods put their weight on the
// value channel of the step's active feature.
struct AttributionMatrix {
  Eigen::MatrixXd a;
  std::optional<Window> window;
  std::string method;

  int steps() const { return static_cast<int>(a.cols()); }
};

}  // namespace driftscope
