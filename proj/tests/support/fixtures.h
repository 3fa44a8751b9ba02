#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "driftscope/events.h"
#include "driftscope/lds_oracle.h"
#include "driftscope/rng.h"
#include "driftscope/seqmodel.h"

namespace driftscope::testing {

inline FeatureCatalog catalog_of(int n) {
  std::vector<FeatureCatalog::Entry> entries;
  for (int i = 0; i < n; ++i) {
    entries.push_back({"f" + std::to_string(i), "feature " + std::to_string(i)});
  }
  return FeatureCatalog(std::move(entries));
}

// (feature, value, time_s) triples; values are used as both raw and
// normalized.
inline EventSequence sequence_of(const std::vector<std::tuple<int, double, double>>& ev,
                                 bool outcome = false, std::string id = "e") {
  EventSequence seq;
  seq.episode_id = std::move(id);
  seq.outcome = outcome;
  for (const auto& [f, v, t] : ev) seq.events.push_back(Event{t, f, v, v});
  return seq;
}

inline StepSeries steps_of(const std::vector<std::tuple<int, double, double>>& ev,
                           int n_features) {
  return encode_steps(sequence_of(ev), catalog_of(n_features));
}

// Random episode with T events over n_features features, one event per
// 10 minutes on average.
inline StepSeries random_steps(Rng& rng, int T, int n_features) {
  std::vector<std::tuple<int, double, double>> ev;
  double t = 0.0;
  for (int i = 0; i < T; ++i) {
    t += std::round(rng.exponential(600.0));
    ev.emplace_back(static_cast<int>(rng.below(n_features)), rng.normal(), t);
  }
  return steps_of(ev, n_features);
}

inline Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
  }
  return m;
}

// Random stable system; Q is optional PSD. A is rescaled to spectral radius
// at most 0.95 so risks stay O(1) over 20 steps and absolute tolerances on
// them are meaningful.
inline lds::LDSystem random_system(Rng& rng, int n, int d, bool with_q) {
  lds::LDSystem sys;
  sys.A = random_matrix(rng, n, n, 0.9 / std::sqrt(static_cast<double>(n)));
  const double rho = Eigen::EigenSolver<Eigen::MatrixXd>(sys.A).eigenvalues().cwiseAbs().maxCoeff();
  if (rho > 0.95) sys.A *= 0.95 / rho;
  sys.B = random_matrix(rng, n, d);
  sys.h0 = random_matrix(rng, n, 1, 0.5);
  if (with_q) {
    const Eigen::MatrixXd L = random_matrix(rng, n, n);
    sys.Q = L * L.transpose() / n;
  }
  return sys;
}

// Independent scalar recursion in quad precision: p_{t1} of the system on
// inputs x. Central differences of a quadratic are exact up to rounding, so
// evaluating them this way makes the oracle tight.
using quad = __float128;

inline quad lds_risk_quad(const lds::LDSystem& sys, const Eigen::MatrixXd& x, int t1) {
  const int n = sys.state_dim(), d = sys.input_dim();
  std::vector<quad> h(n), next(n);
  for (int i = 0; i < n; ++i) h[i] = sys.h0(i);
  for (int t = 0; t < t1; ++t) {
    for (int i = 0; i < n; ++i) {
      quad acc = 0;
      for (int j = 0; j < n; ++j) acc += quad(sys.A(i, j)) * h[j];
      for (int j = 0; j < d; ++j) acc += quad(sys.B(i, j)) * x(j, t);
      next[i] = acc;
    }
    h.swap(next);
  }
  quad p = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const quad q = sys.Q ? (*sys.Q)(i, j) : (i == j ? quad(1) : quad(0));
      p += quad(0.5) * h[i] * q * h[j];
    }
  }
  return p;
}

inline double lds_central_difference(const lds::LDSystem& sys, const Eigen::MatrixXd& x,
                                     int row, int t, int t1, double step) {
  Eigen::MatrixXd xp = x, xm = x;
  xp(row, t - 1) += step;
  xm(row, t - 1) -= step;
  const quad actual = static_cast<quad>(xp(row, t - 1)) - xm(row, t - 1);
  return static_cast<double>((lds_risk_quad(sys, xp, t1) - lds_risk_quad(sys, xm, t1)) / actual);
}

// Parameters with every block randomized, including the output projection.
inline ModelParams random_params(Rng& rng, int d, int hidden, bool attention,
                                 double scale = 0.5) {
  ModelParams p;
  p.input_dim = d;
  p.hidden = hidden;
  p.w_input = random_matrix(rng, 4 * hidden, d, scale);
  p.w_recurrent = random_matrix(rng, 4 * hidden, hidden, scale);
  p.bias = random_matrix(rng, 4 * hidden, 1, scale);
  p.w_out = random_matrix(rng, hidden, 1, scale);
  p.b_out = scale * rng.normal();
  if (attention) p.w_attention = random_matrix(rng, hidden, hidden, scale);
  return p;
}

// Central-difference relative error with a denominator floor; the floor
// keeps entries that are zero up to rounding from dominating.
inline double rel_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("driftscope_" + tag + "_" + std::to_string(rng.next() % 1000000007));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace driftscope::testing
