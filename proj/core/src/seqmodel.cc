#include "driftscope/seqmodel.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "driftscope/csv.h"
#include "driftscope/errors.h"
#include <nlohmann/json.hpp>

namespace driftscope {

using nlohmann::json;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

Eigen::VectorXd tanh_vec(const Eigen::VectorXd& z) {
  return z.unaryExpr([](double v) { return std::tanh(v); });
}

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

double cross_entropy(double p, bool outcome) {
  const double pc = clamp_probability(p);
  return outcome ? -std::log(pc) : -std::log1p(-pc);
}

// d cross_entropy / d logit; zero where the clamp is active.
double cross_entropy_logit_grad(double p, bool outcome) {
  if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
  return p - (outcome ? 1.0 : 0.0);
}

}  // namespace

void ModelConfig::validate() const {
  if (hidden_size < 1) throw ConfigError("hidden_size", "must be positive");
  auto prob = [](const char* name, double v) {
    if (!(v >= 0.0 && v < 1.0)) throw ConfigError(name, "must be in [0, 1)");
  };
  prob("input_dropout", input_dropout);
  prob("output_dropout", output_dropout);
  prob("recurrent_dropout", recurrent_dropout);
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate", "must be a finite non-negative number");
  }
  if (batch_size < 1) throw ConfigError("batch_size", "must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm", "must be positive");
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw ConfigError("eta", "must be finite and non-negative");
  }
  if (max_epochs < 0) throw ConfigError("max_epochs", "must be non-negative");
  if (patience < 1) throw ConfigError("patience", "must be positive");
}

ModelParams ModelParams::zeros_like(const ModelParams& p) {
  ModelParams z;
  z.input_dim = p.input_dim;
  z.hidden = p.hidden;
  z.w_input = Eigen::MatrixXd::Zero(p.w_input.rows(), p.w_input.cols());
  z.w_recurrent =
      Eigen::MatrixXd::Zero(p.w_recurrent.rows(), p.w_recurrent.cols());
  z.bias = Eigen::VectorXd::Zero(p.bias.size());
  z.w_out = Eigen::VectorXd::Zero(p.w_out.size());
  z.b_out = 0.0;
  z.w_attention =
      Eigen::MatrixXd::Zero(p.w_attention.rows(), p.w_attention.cols());
  return z;
}

Eigen::Index ModelParams::size() const {
  return w_input.size() + w_recurrent.size() + bias.size() + w_out.size() + 1 +
         w_attention.size();
}

Eigen::VectorXd ModelParams::flatten() const {
  Eigen::VectorXd flat(size());
  Eigen::Index o = 0;
  auto put = [&](const auto& m) {
    flat.segment(o, m.size()) =
        Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    o += m.size();
  };
  put(w_input);
  put(w_recurrent);
  put(bias);
  put(w_out);
  flat(o++) = b_out;
  put(w_attention);
  return flat;
}

void ModelParams::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != size()) throw std::invalid_argument("params: size mismatch");
  Eigen::Index o = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(o, m.size());
    o += m.size();
  };
  take(w_input);
  take(w_recurrent);
  take(bias);
  take(w_out);
  b_out = flat(o++);
  take(w_attention);
}

ModelParams model_init(const ModelConfig& config, int input_dim) {
  config.validate();
  if (input_dim < 1) throw std::invalid_argument("model_init: input_dim < 1");
  const int H = config.hidden_size;
  ModelParams p;
  p.input_dim = input_dim;
  p.hidden = H;
  Rng rng(derive_seed(config.seed, "model_init"));
  const double s = 1.0 / std::sqrt(static_cast<double>(H));
  auto fill = [&](Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
    m.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-s, s);
    }
  };
  fill(p.w_input, 4 * H, input_dim);
  fill(p.w_recurrent, 4 * H, H);
  p.bias = Eigen::VectorXd::Zero(4 * H);
  p.bias.segment(H, H).setOnes();
  p.w_out = Eigen::VectorXd::Zero(H);
  p.b_out = 0.0;
  if (config.attention) fill(p.w_attention, H, H);
  return p;
}

DropoutMasks sample_dropout_masks(const ModelConfig& config, int input_dim,
                                  int hidden, int steps, Rng& rng) {
  auto draw = [&rng](double rate) {
    if (rate <= 0.0) return 1.0;
    return rng.uniform() < rate ? 0.0 : 1.0 / (1.0 - rate);
  };
  DropoutMasks m;
  m.input.resize(input_dim, steps);
  m.recurrent.resize(hidden);
  m.output.resize(hidden, steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    for (int r = 0; r < input_dim; ++r) m.input(r, t) = draw(config.input_dropout);
  }
  for (int r = 0; r < hidden; ++r) m.recurrent(r) = draw(config.recurrent_dropout);
  for (Eigen::Index t = 0; t < steps; ++t) {
    for (int r = 0; r < hidden; ++r) m.output(r, t) = draw(config.output_dropout);
  }
  return m;
}

ForwardResult forward(const ModelParams& params, const StepSeries& steps,
                      const DropoutMasks* masks) {
  const int T = steps.steps();
  const int H = params.hidden;
  if (steps.dim() != params.input_dim) {
    throw std::invalid_argument("forward: step dimension does not match model");
  }
  ForwardResult out;
  ForwardCache& cache = out.cache;
  if (masks) {
    if (masks->input.cols() != T || masks->output.cols() != T ||
        masks->recurrent.size() != H) {
      throw std::invalid_argument("forward: dropout mask shape mismatch");
    }
    cache.masks = *masks;
    cache.x_in = steps.x.cwiseProduct(masks->input);
  } else {
    cache.x_in = steps.x;
  }
  cache.h_in.resize(H, T);
  cache.gates.resize(4 * H, T);
  cache.cell.resize(H, T);
  cache.cell_tanh.resize(H, T);
  cache.hidden.resize(H, T);
  cache.hidden_out.resize(H, T);

  RiskSeries& risk = out.risk;
  risk.p.resize(T);
  risk.logits.resize(T);
  risk.step_time = steps.step_time;
  risk.p_base = sigmoid(params.b_out);  // h_0 = 0

  Eigen::VectorXd h = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd z(4 * H);
  for (int j = 0; j < T; ++j) {
    if (masks) {
      cache.h_in.col(j) = h.cwiseProduct(masks->recurrent);
    } else {
      cache.h_in.col(j) = h;
    }
    // Column-wise products keep every step's arithmetic independent of T.
    z.noalias() = params.w_input * cache.x_in.col(j);
    z.noalias() += params.w_recurrent * cache.h_in.col(j);
    z += params.bias;
    const Eigen::VectorXd i = sigmoid(z.segment(0, H));
    const Eigen::VectorXd f = sigmoid(z.segment(H, H));
    const Eigen::VectorXd g = tanh_vec(z.segment(2 * H, H));
    const Eigen::VectorXd o = sigmoid(z.segment(3 * H, H));
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    const Eigen::VectorXd tc = tanh_vec(c);
    h = o.cwiseProduct(tc);
    cache.gates.col(j) << i, f, g, o;
    cache.cell.col(j) = c;
    cache.cell_tanh.col(j) = tc;
    cache.hidden.col(j) = h;
    if (masks) {
      cache.hidden_out.col(j) = h.cwiseProduct(masks->output.col(j));
    } else {
      cache.hidden_out.col(j) = h;
    }
    risk.logits[j] = params.w_out.dot(cache.hidden_out.col(j)) + params.b_out;
    risk.p[j] = sigmoid(risk.logits[j]);
  }

  if (params.has_attention() && T > 0) {
    AttentionState att;
    const Eigen::VectorXd v = params.w_attention * cache.hidden.col(T - 1);
    att.scores = cache.hidden.transpose() * v;
    const double mx = att.scores.maxCoeff();
    att.weights = (att.scores.array() - mx).exp().matrix();
    att.weights /= att.weights.sum();
    att.context = cache.hidden * att.weights;
    att.logit = params.w_out.dot(att.context) + params.b_out;
    att.prediction = sigmoid(att.logit);
    cache.attention = std::move(att);
  }
  return out;
}

ForwardResult forward(const ModelParams& params, const StepSeries& steps,
                      Mode mode, const ModelConfig& config, Rng& rng) {
  if (mode == Mode::kEval) return forward(params, steps);
  const DropoutMasks masks = sample_dropout_masks(
      config, params.input_dim, params.hidden, steps.steps(), rng);
  return forward(params, steps, &masks);
}

double smoothing_penalty(const RiskSeries& risk) {
  double s = 0.0;
  for (int j = 1; j < risk.steps(); ++j) {
    const double d = risk.p[j] - risk.p[j - 1];
    s += d * d;
  }
  return s;
}

double loss(const RiskSeries& risk, bool outcome, double eta) {
  const int T = risk.steps();
  if (T < 1) throw std::invalid_argument("loss: empty risk series");
  double ce = 0.0;
  for (double p : risk.p) ce += cross_entropy(p, outcome);
  return ce / T + eta * smoothing_penalty(risk);
}

namespace {

Eigen::VectorXd loss_logit_seeds(const RiskSeries& risk, bool outcome,
                                 double eta) {
  const int T = risk.steps();
  Eigen::VectorXd seeds(T);
  for (int j = 0; j < T; ++j) {
    const double p = risk.p[j];
    double dp = 0.0;
    if (j >= 1) dp += 2.0 * eta * (p - risk.p[j - 1]);
    if (j + 1 < T) dp -= 2.0 * eta * (risk.p[j + 1] - p);
    seeds(j) = cross_entropy_logit_grad(p, outcome) / T + dp * p * (1.0 - p);
  }
  return seeds;
}

}  // namespace

Gradients backward_seeded(const ModelParams& params, const ForwardCache& cache,
                          const StepSeries& steps,
                          const Eigen::VectorXd& dlogits,
                          double dattention_logit, bool param_grads) {
  const int T = steps.steps();
  const int H = params.hidden;
  if (dlogits.size() != T || cache.hidden.cols() != T) {
    throw std::invalid_argument("backward: cache does not match steps");
  }
  Gradients grads{ModelParams::zeros_like(params), {}};
  ModelParams& g = grads.params;

  Eigen::MatrixXd dh_extra;  // attention contributions to dL/dh_t
  if (dattention_logit != 0.0 && cache.attention && T > 0) {
    const AttentionState& att = *cache.attention;
    const double a = dattention_logit;
    dh_extra = Eigen::MatrixXd::Zero(H, T);
    g.w_out += a * att.context;
    g.b_out += a;
    const Eigen::VectorXd dctx = a * params.w_out;
    const Eigen::VectorXd dweights = cache.hidden.transpose() * dctx;
    const double mean_dw = att.weights.dot(dweights);
    const Eigen::VectorXd dscores =
        att.weights.cwiseProduct(dweights.array().matrix() -
                                 Eigen::VectorXd::Constant(T, mean_dw));
    const Eigen::VectorXd v = params.w_attention * cache.hidden.col(T - 1);
    dh_extra.noalias() += dctx * att.weights.transpose();
    dh_extra.noalias() += v * dscores.transpose();
    const Eigen::VectorXd dv = cache.hidden * dscores;
    g.w_attention.noalias() += dv * cache.hidden.col(T - 1).transpose();
    dh_extra.col(T - 1) += params.w_attention.transpose() * dv;
  }

  Eigen::MatrixXd dz(4 * H, T);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
  const Eigen::VectorXd zero_h = Eigen::VectorXd::Zero(H);
  for (int j = T - 1; j >= 0; --j) {
    const double dl = dlogits(j);
    Eigen::VectorXd dh = dh_next;
    if (dl != 0.0) {
      g.w_out += dl * cache.hidden_out.col(j);
      g.b_out += dl;
      if (cache.masks) {
        dh += dl * params.w_out.cwiseProduct(cache.masks->output.col(j));
      } else {
        dh += dl * params.w_out;
      }
    }
    if (dh_extra.size()) dh += dh_extra.col(j);

    const auto i = cache.gates.col(j).segment(0, H).array();
    const auto f = cache.gates.col(j).segment(H, H).array();
    const auto gg = cache.gates.col(j).segment(2 * H, H).array();
    const auto o = cache.gates.col(j).segment(3 * H, H).array();
    const auto tc = cache.cell_tanh.col(j).array();
    const Eigen::ArrayXd c_prev =
        j > 0 ? Eigen::ArrayXd(cache.cell.col(j - 1).array()) : zero_h.array();

    const Eigen::ArrayXd dha = dh.array();
    const Eigen::ArrayXd dc = dc_next.array() + dha * o * (1.0 - tc * tc);
    dz.col(j).segment(0, H) = (dc * gg * i * (1.0 - i)).matrix();
    dz.col(j).segment(H, H) = (dc * c_prev * f * (1.0 - f)).matrix();
    dz.col(j).segment(2 * H, H) = (dc * i * (1.0 - gg * gg)).matrix();
    dz.col(j).segment(3 * H, H) = (dha * tc * o * (1.0 - o)).matrix();
    dc_next = (dc * f).matrix();
    Eigen::VectorXd dh_in = params.w_recurrent.transpose() * dz.col(j);
    if (cache.masks) dh_in = dh_in.cwiseProduct(cache.masks->recurrent);
    dh_next = std::move(dh_in);
  }

  grads.inputs = params.w_input.transpose() * dz;
  if (cache.masks) grads.inputs = grads.inputs.cwiseProduct(cache.masks->input);
  if (param_grads) {
    g.w_input.noalias() += dz * cache.x_in.transpose();
    g.w_recurrent.noalias() += dz * cache.h_in.transpose();
    g.bias += dz.rowwise().sum();
  }
  return grads;
}

Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   const StepSeries& steps, bool outcome, double eta) {
  RiskSeries risk;
  const int T = steps.steps();
  risk.p.resize(T);
  for (int j = 0; j < T; ++j) {
    const double logit =
        params.w_out.dot(cache.hidden_out.col(j)) + params.b_out;
    risk.p[j] = sigmoid(logit);
  }
  return backward_seeded(params, cache, steps,
                         loss_logit_seeds(risk, outcome, eta));
}

double training_objective(const ForwardResult& fwd, bool outcome, double eta) {
  double obj = loss(fwd.risk, outcome, eta);
  if (fwd.cache.attention) {
    obj += cross_entropy(fwd.cache.attention->prediction, outcome);
  }
  return obj;
}

Gradients training_backward(const ModelParams& params, const ForwardResult& fwd,
                            const StepSeries& steps, bool outcome, double eta) {
  double datt = 0.0;
  if (fwd.cache.attention) {
    datt = cross_entropy_logit_grad(fwd.cache.attention->prediction, outcome);
  }
  return backward_seeded(params, fwd.cache, steps,
                         loss_logit_seeds(fwd.risk, outcome, eta), datt);
}

AttributionMatrix grad_wrt_inputs(const ModelParams& params,
                                  const StepSeries& steps, int t1) {
  if (t1 < 1 || t1 > steps.steps()) {
    throw std::invalid_argument("grad_wrt_inputs: t1 out of range");
  }
  const StepSeries prefix = steps.prefix(t1);
  ModelParams no_attention = params;
  no_attention.w_attention.resize(0, 0);
  const ForwardResult fwd = forward(no_attention, prefix);
  Eigen::VectorXd seeds = Eigen::VectorXd::Zero(t1);
  const double p = fwd.risk.p[t1 - 1];
  seeds(t1 - 1) = p * (1.0 - p);
  const Gradients g =
      backward_seeded(no_attention, fwd.cache, prefix, seeds, 0.0, false);
  AttributionMatrix out;
  out.method = "gradient";
  out.a = Eigen::MatrixXd::Zero(steps.dim(), steps.steps());
  out.a.leftCols(t1) = g.inputs;
  return out;
}

AttentionResult attention_forward(const ModelParams& params,
                                  const StepSeries& steps) {
  if (!params.has_attention()) {
    throw std::invalid_argument("attention_forward: model has no attention head");
  }
  AttentionResult out;
  out.attribution.method = "attention";
  out.attribution.a = Eigen::MatrixXd::Zero(steps.dim(), steps.steps());
  if (steps.steps() == 0) return out;
  const ForwardResult fwd = forward(params, steps);
  const AttentionState& att = *fwd.cache.attention;
  out.prediction = att.prediction;
  out.weights.assign(att.weights.data(), att.weights.data() + att.weights.size());
  for (int j = 0; j < steps.steps(); ++j) {
    out.attribution.a(steps.value_row(steps.step_feature[j]), j) = att.weights(j);
  }
  return out;
}

double auroc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]]) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.5;
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1) / 2.0) /
         (np * static_cast<double>(n_neg));
}

std::string TrainingReport::to_csv() const {
  std::string out = "epoch,train_loss,validation_loss,validation_auroc\n";
  for (const auto& e : epochs) {
    out += csv::join({std::to_string(e.epoch), csv::format_double(e.train_loss),
                      csv::format_double(e.validation_loss),
                      csv::format_double(e.validation_auroc)});
    out += '\n';
  }
  return out;
}

namespace {

struct Adam {
  explicit Adam(Eigen::Index n)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad, double lr) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    theta.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon);
  }

  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int t = 0;
  Eigen::VectorXd m, v;
};

struct Evaluation {
  double loss = 0.0;
  double auroc = 0.5;
};

Evaluation evaluate(const ModelParams& params,
                    const std::vector<const EncodedEpisode*>& episodes,
                    double eta) {
  Evaluation ev;
  std::vector<double> scores;
  std::vector<bool> labels;
  for (const auto* ep : episodes) {
    const ForwardResult fwd = forward(params, ep->steps);
    ev.loss += loss(fwd.risk, ep->outcome, eta);
    scores.push_back(fwd.risk.p.back());
    labels.push_back(ep->outcome);
  }
  ev.loss /= static_cast<double>(episodes.size());
  ev.auroc = auroc(scores, labels);
  return ev;
}

}  // namespace

TrainResult train(const std::vector<EncodedEpisode>& corpus,
                  const ModelConfig& config) {
  config.validate();
  std::vector<const EncodedEpisode*> train_set, validation_set;
  int input_dim = 0;
  for (const auto& ep : corpus) {
    if (ep.steps.steps() == 0) continue;
    input_dim = ep.steps.dim();
    if (ep.split == Split::kTrain) train_set.push_back(&ep);
    if (ep.split == Split::kValidation) validation_set.push_back(&ep);
  }
  if (train_set.empty()) throw DataError("train: empty train split");
  if (validation_set.empty()) throw DataError("train: empty validation split");

  TrainResult result;
  result.params = model_init(config, input_dim);
  if (config.max_epochs == 0) return result;

  ModelParams params = result.params;
  Eigen::VectorXd theta = params.flatten();
  Adam adam(theta.size());
  Rng rng(derive_seed(config.seed, "train"));
  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::vector<const EncodedEpisode*> order = train_set;
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
      for (std::size_t b = start; b < end; ++b) {
        const EncodedEpisode& ep = *order[b];
        const ForwardResult fwd =
            forward(params, ep.steps, Mode::kTrain, config, rng);
        const double obj = training_objective(fwd, ep.outcome, config.eta);
        if (!std::isfinite(obj)) {
          throw NumericError("train: non-finite loss at epoch " +
                             std::to_string(epoch) + " on episode '" +
                             ep.episode_id + "'");
        }
        epoch_loss += obj;
        grad += training_backward(params, fwd, ep.steps, ep.outcome, config.eta)
                    .params.flatten();
      }
      grad /= static_cast<double>(end - start);
      const double norm = grad.norm();
      if (!std::isfinite(norm)) {
        throw NumericError("train: non-finite gradient at epoch " +
                           std::to_string(epoch));
      }
      if (norm > config.clip_norm) grad *= config.clip_norm / norm;
      adam.step(theta, grad, config.learning_rate);
      params.assign(theta);
    }

    const Evaluation ev = evaluate(params, validation_set, config.eta);
    if (!std::isfinite(ev.loss)) {
      throw NumericError("train: non-finite validation loss at epoch " +
                         std::to_string(epoch));
    }
    result.report.epochs.push_back(
        {epoch, epoch_loss / static_cast<double>(order.size()), ev.loss,
         ev.auroc});
    if (ev.loss < best_loss) {
      best_loss = ev.loss;
      result.params = params;
      result.report.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols,
                            const char* name) {
  if (j.at("rows").get<Eigen::Index>() != rows ||
      j.at("cols").get<Eigen::Index>() != cols) {
    throw DataError(std::string("checkpoint: shape mismatch for ") + name);
  }
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw DataError(std::string("checkpoint: wrong element count for ") + name);
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
  }
  return m;
}

}  // namespace

std::string checkpoint_to_json(const ModelParams& params,
                               const ModelConfig& config,
                               const FeatureCatalog& catalog,
                               const FeatureStats& stats) {
  json cfg = {{"hidden_size", config.hidden_size},
              {"input_dropout", config.input_dropout},
              {"output_dropout", config.output_dropout},
              {"recurrent_dropout", config.recurrent_dropout},
              {"learning_rate", config.learning_rate},
              {"batch_size", config.batch_size},
              {"clip_norm", config.clip_norm},
              {"eta", config.eta},
              {"max_epochs", config.max_epochs},
              {"patience", config.patience},
              {"seed", config.seed},
              {"attention", config.attention}};
  std::vector<std::string> ids;
  for (const auto& e : catalog.entries()) ids.push_back(e.id);
  json j = {{"format", "driftscope-checkpoint"},
            {"version", 1},
            {"catalog", ids},
            {"catalog_fingerprint", catalog.fingerprint()},
            {"config", cfg},
            {"input_dim", params.input_dim},
            {"hidden", params.hidden},
            {"params",
             {{"w_input", matrix_json(params.w_input)},
              {"w_recurrent", matrix_json(params.w_recurrent)},
              {"bias", matrix_json(params.bias)},
              {"w_out", matrix_json(params.w_out)},
              {"b_out", params.b_out},
              {"w_attention", matrix_json(params.w_attention)}}},
            {"feature_stats", json::parse(stats.to_json(catalog))}};
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(std::string_view text,
                                const FeatureCatalog& catalog) {
  Checkpoint ck;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "driftscope-checkpoint") {
      throw DataError("checkpoint: unrecognized format");
    }
    if (j.at("catalog_fingerprint").get<std::string>() != catalog.fingerprint()) {
      throw DataError("checkpoint: feature catalog mismatch (checkpoint " +
                      j.at("catalog_fingerprint").get<std::string>() +
                      ", expected " + catalog.fingerprint() + ")");
    }
    const json& c = j.at("config");
    ModelConfig& cfg = ck.config;
    cfg.hidden_size = c.at("hidden_size");
    cfg.input_dropout = c.at("input_dropout");
    cfg.output_dropout = c.at("output_dropout");
    cfg.recurrent_dropout = c.at("recurrent_dropout");
    cfg.learning_rate = c.at("learning_rate");
    cfg.batch_size = c.at("batch_size");
    cfg.clip_norm = c.at("clip_norm");
    cfg.eta = c.at("eta");
    cfg.max_epochs = c.at("max_epochs");
    cfg.patience = c.at("patience");
    cfg.seed = c.at("seed");
    cfg.attention = c.at("attention");

    ModelParams& p = ck.params;
    p.input_dim = j.at("input_dim");
    p.hidden = j.at("hidden");
    if (p.input_dim != 2 * catalog.size() + 1) {
      throw DataError("checkpoint: input dimension does not match catalog");
    }
    const int H = p.hidden;
    const json& w = j.at("params");
    p.w_input = matrix_from(w.at("w_input"), 4 * H, p.input_dim, "w_input");
    p.w_recurrent = matrix_from(w.at("w_recurrent"), 4 * H, H, "w_recurrent");
    p.bias = matrix_from(w.at("bias"), 4 * H, 1, "bias");
    p.w_out = matrix_from(w.at("w_out"), H, 1, "w_out");
    p.b_out = w.at("b_out").get<double>();
    const Eigen::Index att = cfg.attention ? H : 0;
    p.w_attention = matrix_from(w.at("w_attention"), att, att, "w_attention");
    ck.stats = FeatureStats::from_json(j.at("feature_stats").dump(), catalog);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return ck;
}

}  // namespace driftscope
