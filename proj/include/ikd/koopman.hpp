#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ikd/dataset.hpp"
#include "ikd/embedding.hpp"
#include "ikd/parallel.hpp"

namespace ikd {

/// Lifted linear model: z = g(x) in normalized state units, z+ = A z + B u,
/// state retrieval x = P z with P = [I 0] (the first state_dim latent
/// coordinates are the normalized state by construction of the lift).
struct KoopmanModel {
  EmbeddingNet net;
  Eigen::MatrixXd A;  ///< lift_dim x lift_dim
  Eigen::MatrixXd B;  ///< lift_dim x control_dim
  Normalizer normalizer;

  int state_dim() const { return net.in_dim; }
  int lift_dim() const { return net.lift_dim; }
  int control_dim() const { return static_cast<int>(B.cols()); }
};

/// Weights of the discounted multi-step training objective.
struct LossConfig {
  double gamma = 0.99;  ///< per-step discount
  double alpha = 0.1;   ///< weight of the state reconstruction term
};

/// total = latent + alpha * recon, where latent and recon are the
/// discount-weighted mean squared latent and state prediction errors.
struct LossBreakdown {
  double total = 0.0;
  double latent = 0.0;
  double recon = 0.0;
};

/// Gradients of the objective with respect to every model parameter.
struct KoopmanGrads {
  NetGrads net;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;

  static KoopmanGrads zeros_like(const KoopmanModel& model);
  void add(const KoopmanGrads& other);
  void scale(double s);
};

struct TrainConfig {
  int epochs = 100;  ///< J
  double lr = 1e-3;  ///< initial Adam step size, cosine-annealed to 0
  int batch_size = 32;
  int hidden = 64;
  int blocks = 2;
  double gamma = 0.99;
  double alpha = 0.1;
  double tail_diag_init = 0.99;  ///< initial A diagonal beyond the state block
  std::uint64_t seed = 0;
  ExecMode mode = ExecMode::Serial;
};

/// Outcome of a training attempt. failed is a recoverable signal consumed by
/// the incremental loop's epoch-halving rule, not an exception.
struct TrainReport {
  bool failed = false;
  std::string fail_reason;
  std::vector<double> epoch_losses;  ///< mean batch loss per epoch
  KoopmanModel model;
};

/// Latent rollout from normalized state x0 under the given control rows:
/// returns steps+1 rows, row h is z_h. Throws NonFinitePrediction if the
/// recursion leaves finite range.
Eigen::MatrixXd latent_rollout(const KoopmanModel& model, const Eigen::VectorXd& x0,
                               const Eigen::MatrixXd& controls);

/// State retrieval of a latent rollout: row h is P z_h, optionally mapped
/// back to plant units through the model normalizer.
Eigen::MatrixXd predict_states(const KoopmanModel& model, const Eigen::VectorXd& x0,
                               const Eigen::MatrixXd& controls, bool denormalize);

/// Discounted multi-step loss of one raw segment (states get normalized
/// through the model normalizer). The horizon is the segment length.
LossBreakdown koopman_loss(const KoopmanModel& model, const Segment& seg, const LossConfig& cfg);

/// Loss plus exact reverse-mode gradients for one segment.
LossBreakdown koopman_loss_grad(const KoopmanModel& model, const Segment& seg,
                                const LossConfig& cfg, KoopmanGrads& grads);

/// Mean loss and mean gradients over a batch of segments. Per-segment work
/// parallelizes; the reduction is a fixed pairwise tree over segment order,
/// so Serial and Parallel modes are bitwise identical.
LossBreakdown batch_loss_grad(const KoopmanModel& model,
                              const std::vector<const Segment*>& batch, const LossConfig& cfg,
                              KoopmanGrads& grads, ExecMode mode);

/// Least-squares fit of z+ ~ K z from sample rows. G = Z'Z/m + ridge I,
/// C = Zplus'Z/m, K = C G^{-1} via a symmetric solve. Throws SingularGram
/// when ridge is zero and the Gram matrix is numerically singular.
struct EdmdResult {
  Eigen::MatrixXd K;
  double min_gram_eig = 0.0;  ///< smallest eigenvalue of the unridged Gram
  double residual = 0.0;      ///< || C - K G ||_F of the fitted system
};
EdmdResult edmd_fit(const Eigen::MatrixXd& z_rows, const Eigen::MatrixXd& zplus_rows,
                    double ridge = 1e-10);

/// Adam training of (net, A, B) on the dataset with the discounted
/// multi-step objective, cosine-annealed learning rate, fresh net init, and
/// A seeded as identity on the state block and tail_diag_init on the rest of
/// the diagonal. Bit-reproducible per cfg.seed.
TrainReport train_koopman(const Dataset& data, int lift_dim, const TrainConfig& cfg);

/// Flattened view of all trainable parameters (net, then A, then B,
/// row-major), used by the optimizer and the finite-difference tests.
Eigen::VectorXd model_params_to_flat(const KoopmanModel& model);
void model_params_from_flat(KoopmanModel& model, const Eigen::VectorXd& flat);
Eigen::VectorXd koopman_grads_to_flat(const KoopmanGrads& grads);

}  // namespace ikd
