#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

// Closed-form reference for a linear recurrence with quadratic risk:
//
//   h_t = A h_{t-1} + B x_t,   p_t = 0.5 h_t' Q h_t,   Q = I by default.
//
// Steps are 1-based: inputs x_1..x_T are the columns 0..T-1 of a d x T
// matrix, and h_0 is given by the system.
namespace driftscope::lds {

struct LDSystem {
  Eigen::MatrixXd A;   // n x n
  Eigen::MatrixXd B;   // n x d
  Eigen::VectorXd h0;  // n
  std::optional<Eigen::MatrixXd> Q;  // n x n, symmetric PSD

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
  Eigen::MatrixXd quadratic_form() const;

  // Throws std::invalid_argument on inconsistent shapes or a Q that is not
  // symmetric positive semidefinite.
  void validate() const;

  std::string to_json() const;
  static LDSystem from_json(std::string_view text);
};

struct LDSTrace {
  std::vector<Eigen::VectorXd> hidden;  // h_1..h_T
  std::vector<double> risk;             // p_1..p_T

  int steps() const { return static_cast<int>(risk.size()); }
  // h_t for t in [0, T]; h_0 comes from the system.
  const Eigen::VectorXd& state(const LDSystem& sys, int t) const {
    return t == 0 ? sys.h0 : hidden.at(t - 1);
  }
};

// Memoized A^k. Powers are built by repeated multiplication.
class MatrixPowers {
 public:
  explicit MatrixPowers(Eigen::MatrixXd a);
  const Eigen::MatrixXd& operator()(int k);

 private:
  std::vector<Eigen::MatrixXd> powers_;
};

LDSTrace lds_run(const LDSystem& sys, const Eigen::MatrixXd& x);

// dp_{t1}/dx_t = (Q h_{t1})' A^{t1-t} B, returned as a d-vector.
Eigen::VectorXd lds_input_gradient(const LDSystem& sys, const LDSTrace& trace,
                                   int t, int t1);

// Path-integrated gradient from baseline b to target x for p_{t1}. Column
// t-1 holds the midpoint gradient ((h_{t1}[b] + h_{t1}[x]) / 2)' Q A^{t1-t} B
// multiplied elementwise by (x_t - b_t). Returns d x t1.
Eigen::MatrixXd lds_integrated_gradient(const LDSystem& sys,
                                        const Eigen::MatrixXd& baseline,
                                        const Eigen::MatrixXd& x, int t1);

// Averaged gradient only (before multiplying by x - b). d x t1.
Eigen::MatrixXd lds_average_gradient(const LDSystem& sys,
                                     const Eigen::MatrixXd& baseline,
                                     const Eigen::MatrixXd& x, int t1);

// h_t' Q A h_{t-1} + h_t' Q B x_t for t = 1..T.
std::vector<double> lds_time_derivative(const LDSystem& sys,
                                        const LDSTrace& trace,
                                        const Eigen::MatrixXd& x);

}  // namespace driftscope::lds
