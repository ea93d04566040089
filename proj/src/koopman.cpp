#include "ikd/koopman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ikd/errors.hpp"
#include "ikd/rng.hpp"

namespace ikd {

namespace {

constexpr double kLatentOverflow = 1e100;

void flatten_matrix(Eigen::VectorXd& flat, Eigen::Index& pos, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      flat(pos++) = m(r, c);
    }
  }
}

void unflatten_matrix(const Eigen::VectorXd& flat, Eigen::Index& pos, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = flat(pos++);
    }
  }
}

void check_segment(const KoopmanModel& model, const Segment& seg) {
  if (seg.states.cols() != model.state_dim() || seg.controls.cols() != model.control_dim()) {
    throw ShapeMismatch("segment dims do not match model dims");
  }
  if (seg.states.rows() != seg.controls.rows() + 1) {
    throw ShapeMismatch("segment must have one more state row than control rows");
  }
  if (seg.controls.rows() < 1) {
    throw ShapeMismatch("segment must contain at least one step");
  }
}

}  // namespace

KoopmanGrads KoopmanGrads::zeros_like(const KoopmanModel& model) {
  KoopmanGrads g;
  g.net = NetGrads::zeros_like(model.net);
  g.A = Eigen::MatrixXd::Zero(model.A.rows(), model.A.cols());
  g.B = Eigen::MatrixXd::Zero(model.B.rows(), model.B.cols());
  return g;
}

void KoopmanGrads::add(const KoopmanGrads& other) {
  net.add(other.net);
  A += other.A;
  B += other.B;
}

void KoopmanGrads::scale(double s) {
  net.scale(s);
  A *= s;
  B *= s;
}

Eigen::MatrixXd latent_rollout(const KoopmanModel& model, const Eigen::VectorXd& x0,
                               const Eigen::MatrixXd& controls) {
  if (controls.cols() != model.control_dim() && controls.rows() > 0) {
    throw ShapeMismatch("latent_rollout: control dimension mismatch");
  }
  const int steps = static_cast<int>(controls.rows());
  Eigen::MatrixXd z(steps + 1, model.lift_dim());
  Eigen::VectorXd cur = embed_forward(model.net, x0);
  z.row(0) = cur.transpose();
  for (int t = 0; t < steps; ++t) {
    cur = model.A * cur + model.B * controls.row(t).transpose();
    if (!cur.allFinite() || cur.cwiseAbs().maxCoeff() > kLatentOverflow) {
      std::ostringstream os;
      os << "latent rollout diverged at step " << t + 1;
      throw NonFinitePrediction(os.str());
    }
    z.row(t + 1) = cur.transpose();
  }
  return z;
}

Eigen::MatrixXd predict_states(const KoopmanModel& model, const Eigen::VectorXd& x0,
                               const Eigen::MatrixXd& controls, bool denormalize) {
  const Eigen::MatrixXd z = latent_rollout(model, x0, controls);
  Eigen::MatrixXd x = z.leftCols(model.state_dim());
  return denormalize ? model.normalizer.invert_rows(x) : x;
}

namespace {

LossBreakdown loss_impl(const KoopmanModel& model, const Segment& seg, const LossConfig& cfg,
                        KoopmanGrads* grads) {
  check_segment(model, seg);
  const int H = static_cast<int>(seg.controls.rows());
  const int n = model.lift_dim();
  const int np = model.state_dim();

  // Normalized states and their lifts. z_target[h] = g(x_h).
  std::vector<Eigen::VectorXd> x_norm(H + 1);
  std::vector<Eigen::VectorXd> z_target(H + 1);
  for (int h = 0; h <= H; ++h) {
    x_norm[h] = model.normalizer.apply(seg.states.row(h).transpose());
    z_target[h] = embed_forward(model.net, x_norm[h]);
  }

  // Predicted latents: zhat_0 = z_target_0, then the linear recursion.
  std::vector<Eigen::VectorXd> zhat(H + 1);
  zhat[0] = z_target[0];
  for (int h = 1; h <= H; ++h) {
    zhat[h] = model.A * zhat[h - 1] + model.B * seg.controls.row(h - 1).transpose();
  }

  LossBreakdown loss;
  std::vector<Eigen::VectorXd> direct;
  std::vector<Eigen::VectorXd> target_grad;
  if (grads) {
    direct.assign(H + 1, Eigen::VectorXd::Zero(n));
    target_grad.assign(H + 1, Eigen::VectorXd::Zero(n));
  }
  double discount = 1.0;
  for (int h = 1; h <= H; ++h) {
    discount *= cfg.gamma;
    const double w = discount / H;
    const Eigen::VectorXd e = zhat[h] - z_target[h];
    const Eigen::VectorXd r = zhat[h].head(np) - x_norm[h];
    loss.latent += w * e.squaredNorm();
    loss.recon += w * r.squaredNorm();
    if (grads) {
      direct[h] = 2.0 * w * e;
      direct[h].head(np) += 2.0 * w * cfg.alpha * r;
      target_grad[h] = -2.0 * w * e;
    }
  }
  loss.total = loss.latent + cfg.alpha * loss.recon;
  if (!grads) return loss;

  // Adjoint sweep through the latent recursion.
  std::vector<Eigen::VectorXd> lambda(H + 1, Eigen::VectorXd::Zero(n));
  lambda[H] = direct[H];
  for (int h = H - 1; h >= 1; --h) {
    lambda[h] = direct[h] + model.A.transpose() * lambda[h + 1];
  }
  const Eigen::VectorXd lambda0 = model.A.transpose() * lambda[1];

  for (int h = 1; h <= H; ++h) {
    grads->A.noalias() += lambda[h] * zhat[h - 1].transpose();
    grads->B.noalias() += lambda[h] * seg.controls.row(h - 1);
  }

  // Network parameters see the loss through the initial lift and through
  // every lifted target.
  NetGrads acc = embed_backward(model.net, x_norm[0], lambda0).params;
  for (int h = 1; h <= H; ++h) {
    acc.add(embed_backward(model.net, x_norm[h], target_grad[h]).params);
  }
  grads->net.add(acc);
  return loss;
}

}  // namespace

LossBreakdown koopman_loss(const KoopmanModel& model, const Segment& seg,
                           const LossConfig& cfg) {
  return loss_impl(model, seg, cfg, nullptr);
}

LossBreakdown koopman_loss_grad(const KoopmanModel& model, const Segment& seg,
                                const LossConfig& cfg, KoopmanGrads& grads) {
  return loss_impl(model, seg, cfg, &grads);
}

LossBreakdown batch_loss_grad(const KoopmanModel& model,
                              const std::vector<const Segment*>& batch, const LossConfig& cfg,
                              KoopmanGrads& grads, ExecMode mode) {
  if (batch.empty()) throw EmptyDataset("batch_loss_grad: empty batch");
  struct Item {
    LossBreakdown loss;
    KoopmanGrads grads;
  };
  std::vector<Item> items(batch.size());
  parallel_for_index(static_cast<int>(batch.size()), mode, [&](int i) {
    items[i].grads = KoopmanGrads::zeros_like(model);
    items[i].loss = koopman_loss_grad(model, *batch[i], cfg, items[i].grads);
  });
  Item total = tree_reduce(std::move(items), [](Item& a, const Item& b) {
    a.loss.total += b.loss.total;
    a.loss.latent += b.loss.latent;
    a.loss.recon += b.loss.recon;
    a.grads.add(b.grads);
  });
  const double inv = 1.0 / static_cast<double>(batch.size());
  total.loss.total *= inv;
  total.loss.latent *= inv;
  total.loss.recon *= inv;
  total.grads.scale(inv);
  grads = std::move(total.grads);
  return total.loss;
}

EdmdResult edmd_fit(const Eigen::MatrixXd& z_rows, const Eigen::MatrixXd& zplus_rows,
                    double ridge) {
  if (z_rows.rows() != zplus_rows.rows() || z_rows.cols() != zplus_rows.cols()) {
    throw ShapeMismatch("edmd_fit: sample matrices must have identical shapes");
  }
  if (z_rows.rows() == 0) throw EmptyDataset("edmd_fit: no samples");
  if (ridge < 0.0) throw BadDims("edmd_fit: ridge must be >= 0");
  const double m = static_cast<double>(z_rows.rows());
  const Eigen::Index n = z_rows.cols();
  Eigen::MatrixXd gram = (z_rows.transpose() * z_rows) / m;
  const Eigen::MatrixXd cross = (zplus_rows.transpose() * z_rows) / m;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  EdmdResult res;
  res.min_gram_eig = eig.eigenvalues().minCoeff();
  if (ridge == 0.0 && res.min_gram_eig < 1e-12) {
    std::ostringstream os;
    os << "Gram matrix singular (min eigenvalue " << res.min_gram_eig
       << "); supply a positive ridge";
    throw SingularGram(os.str());
  }
  gram += ridge * Eigen::MatrixXd::Identity(n, n);
  // K G = C with G symmetric, solved as G K' = C'.
  res.K = gram.ldlt().solve(cross.transpose()).transpose();
  res.residual = (cross - res.K * gram).norm();
  return res;
}

TrainReport train_koopman(const Dataset& data, int lift_dim, const TrainConfig& cfg) {
  validate_dataset(data);
  if (data.segments.empty()) throw EmptyDataset("train_koopman: dataset has no segments");
  if (lift_dim < data.state_dim) throw BadDims("train_koopman: lift_dim below state dim");
  if (cfg.epochs < 1) throw BadDims("train_koopman: epochs must be >= 1");
  if (cfg.batch_size < 1) throw BadDims("train_koopman: batch_size must be >= 1");

  TrainReport report;
  KoopmanModel& model = report.model;
  model.net = init_net(data.state_dim, lift_dim, cfg.hidden, cfg.blocks, cfg.seed);
  model.A = Eigen::MatrixXd::Zero(lift_dim, lift_dim);
  for (int i = 0; i < lift_dim; ++i) {
    model.A(i, i) = i < data.state_dim ? 1.0 : cfg.tail_diag_init;
  }
  model.B = Eigen::MatrixXd::Zero(lift_dim, data.control_dim);
  model.normalizer = data.normalizer;

  const LossConfig loss_cfg{cfg.gamma, cfg.alpha};
  const Eigen::Index dim = model_params_to_flat(model).size();
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(dim);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  std::mt19937_64 shuffle_rng(mix64(cfg.seed ^ 0x7261696eull));
  std::vector<int> order(data.segments.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr * 0.5 *
                      (1.0 + std::cos(M_PI * static_cast<double>(epoch) /
                                      static_cast<double>(cfg.epochs)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const Segment*> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&data.segments[order[i]]);
      }
      KoopmanGrads grads;
      const LossBreakdown loss = batch_loss_grad(model, batch, loss_cfg, grads, cfg.mode);
      if (!std::isfinite(loss.total)) {
        report.failed = true;
        std::ostringstream os;
        os << "non-finite batch loss at epoch " << epoch;
        report.fail_reason = os.str();
        return report;
      }
      epoch_loss += loss.total;
      ++batches;

      Eigen::VectorXd g = koopman_grads_to_flat(grads);
      Eigen::VectorXd params = model_params_to_flat(model);
      ++step;
      adam_m = beta1 * adam_m + (1.0 - beta1) * g;
      adam_v = beta2 * adam_v + (1.0 - beta2) * g.cwiseProduct(g);
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      params -= (lr / bc1) * adam_m.cwiseQuotient(
                    ((adam_v / bc2).cwiseSqrt().array() + eps).matrix());
      model_params_from_flat(model, params);
    }
    report.epoch_losses.push_back(epoch_loss / std::max(1, batches));
  }

  if (report.epoch_losses.back() > 10.0 * report.epoch_losses.front()) {
    report.failed = true;
    std::ostringstream os;
    os << "loss diverged: final epoch mean " << report.epoch_losses.back()
       << " vs first epoch mean " << report.epoch_losses.front();
    report.fail_reason = os.str();
  }
  return report;
}

Eigen::VectorXd model_params_to_flat(const KoopmanModel& model) {
  const Eigen::VectorXd net_flat = net_to_flat(model.net);
  Eigen::VectorXd flat(net_flat.size() + model.A.size() + model.B.size());
  flat.head(net_flat.size()) = net_flat;
  Eigen::Index pos = net_flat.size();
  flatten_matrix(flat, pos, model.A);
  flatten_matrix(flat, pos, model.B);
  return flat;
}

void model_params_from_flat(KoopmanModel& model, const Eigen::VectorXd& flat) {
  const Eigen::Index net_size = model.net.param_count();
  if (flat.size() != net_size + model.A.size() + model.B.size()) {
    throw ShapeMismatch("model_params_from_flat: size mismatch");
  }
  net_from_flat(model.net, flat.head(net_size));
  Eigen::Index pos = net_size;
  unflatten_matrix(flat, pos, model.A);
  unflatten_matrix(flat, pos, model.B);
}

Eigen::VectorXd koopman_grads_to_flat(const KoopmanGrads& grads) {
  const Eigen::VectorXd net_flat = net_grads_to_flat(grads.net);
  Eigen::VectorXd flat(net_flat.size() + grads.A.size() + grads.B.size());
  flat.head(net_flat.size()) = net_flat;
  Eigen::Index pos = net_flat.size();
  flatten_matrix(flat, pos, grads.A);
  flatten_matrix(flat, pos, grads.B);
  return flat;
}

}  // namespace ikd
