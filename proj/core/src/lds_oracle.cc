#include "driftscope/lds_oracle.h"

#include <stdexcept>

#include "driftscope/errors.h"
#include <nlohmann/json.hpp>

namespace driftscope::lds {

using nlohmann::json;

Eigen::MatrixXd LDSystem::quadratic_form() const {
  if (Q) return *Q;
  return Eigen::MatrixXd::Identity(state_dim(), state_dim());
}

void LDSystem::validate() const {
  const auto n = A.rows();
  if (A.cols() != n) throw std::invalid_argument("lds: A must be square");
  if (B.rows() != n) throw std::invalid_argument("lds: B rows must match A");
  if (h0.size() != n) throw std::invalid_argument("lds: h0 size must match A");
  if (Q) {
    if (Q->rows() != n || Q->cols() != n) {
      throw std::invalid_argument("lds: Q must be n x n");
    }
    const double scale = std::max(1.0, Q->cwiseAbs().maxCoeff());
    if ((*Q - Q->transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw std::invalid_argument("lds: Q must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*Q);
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw std::invalid_argument("lds: Q must be positive semidefinite");
    }
  }
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw DataError("lds: ragged matrix row");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

std::string LDSystem::to_json() const {
  json j = {{"A", matrix_to_json(A)},
            {"B", matrix_to_json(B)},
            {"h0", std::vector<double>(h0.data(), h0.data() + h0.size())}};
  if (Q) j["Q"] = matrix_to_json(*Q);
  return j.dump(2);
}

LDSystem LDSystem::from_json(std::string_view text) {
  LDSystem sys;
  try {
    const json j = json::parse(text);
    sys.A = matrix_from_json(j.at("A"));
    sys.B = matrix_from_json(j.at("B"));
    const auto h = j.at("h0").get<std::vector<double>>();
    sys.h0 = Eigen::Map<const Eigen::VectorXd>(h.data(),
                                               static_cast<Eigen::Index>(h.size()));
    if (j.contains("Q")) sys.Q = matrix_from_json(j.at("Q"));
  } catch (const json::exception& e) {
    throw DataError(std::string("lds: ") + e.what());
  }
  sys.validate();
  return sys;
}

MatrixPowers::MatrixPowers(Eigen::MatrixXd a) {
  powers_.push_back(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  powers_.push_back(std::move(a));
}

const Eigen::MatrixXd& MatrixPowers::operator()(int k) {
  if (k < 0) throw std::invalid_argument("lds: negative matrix power");
  while (static_cast<int>(powers_.size()) <= k) {
    powers_.push_back(powers_.back() * powers_[1]);
  }
  return powers_[k];
}

LDSTrace lds_run(const LDSystem& sys, const Eigen::MatrixXd& x) {
  sys.validate();
  if (x.rows() != sys.input_dim()) {
    throw std::invalid_argument("lds: input dimension mismatch");
  }
  const Eigen::MatrixXd Q = sys.quadratic_form();
  LDSTrace trace;
  trace.hidden.reserve(x.cols());
  trace.risk.reserve(x.cols());
  Eigen::VectorXd h = sys.h0;
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    h = sys.A * h + sys.B * x.col(t);
    trace.risk.push_back(0.5 * h.dot(Q * h));
    trace.hidden.push_back(h);
  }
  return trace;
}

Eigen::VectorXd lds_input_gradient(const LDSystem& sys, const LDSTrace& trace,
                                   int t, int t1) {
  if (t > t1) throw std::invalid_argument("lds: gradient of a future input");
  if (t < 1 || t1 > trace.steps()) {
    throw std::invalid_argument("lds: step out of range");
  }
  MatrixPowers powers(sys.A);
  const Eigen::VectorXd qh = sys.quadratic_form() * trace.state(sys, t1);
  return sys.B.transpose() * (powers(t1 - t).transpose() * qh);
}

Eigen::MatrixXd lds_average_gradient(const LDSystem& sys,
                                     const Eigen::MatrixXd& baseline,
                                     const Eigen::MatrixXd& x, int t1) {
  if (baseline.rows() != x.rows() || baseline.cols() != x.cols()) {
    throw std::invalid_argument("lds: baseline and target shapes differ");
  }
  if (t1 < 1 || t1 > x.cols()) throw std::invalid_argument("lds: t1 out of range");
  const LDSTrace tb = lds_run(sys, baseline.leftCols(t1));
  const LDSTrace tx = lds_run(sys, x.leftCols(t1));
  const Eigen::VectorXd mid =
      sys.quadratic_form() * (0.5 * (tb.hidden.back() + tx.hidden.back()));
  MatrixPowers powers(sys.A);
  Eigen::MatrixXd grad(x.rows(), t1);
  for (int t = 1; t <= t1; ++t) {
    grad.col(t - 1) = sys.B.transpose() * (powers(t1 - t).transpose() * mid);
  }
  return grad;
}

Eigen::MatrixXd lds_integrated_gradient(const LDSystem& sys,
                                        const Eigen::MatrixXd& baseline,
                                        const Eigen::MatrixXd& x, int t1) {
  const Eigen::MatrixXd grad = lds_average_gradient(sys, baseline, x, t1);
  return grad.cwiseProduct(x.leftCols(t1) - baseline.leftCols(t1));
}

std::vector<double> lds_time_derivative(const LDSystem& sys,
                                        const LDSTrace& trace,
                                        const Eigen::MatrixXd& x) {
  if (x.cols() != trace.steps()) {
    throw std::invalid_argument("lds: trace and input lengths differ");
  }
  const Eigen::MatrixXd Q = sys.quadratic_form();
  std::vector<double> out;
  out.reserve(trace.steps());
  for (int t = 1; t <= trace.steps(); ++t) {
    const Eigen::VectorXd qh = Q * trace.state(sys, t);
    out.push_back(qh.dot(sys.A * trace.state(sys, t - 1)) +
                  qh.dot(sys.B * x.col(t - 1)));
  }
  return out;
}

}  // namespace driftscope::lds
