#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace ikd {

/// Residual MLP computing the learned part of the lift. The full lift is
/// g(x) = [x; g'(x)] with g' of dimension lift_dim - in_dim, so the first
/// in_dim lifted coordinates are the state itself.
///
/// g'(x): h = W_in x + b_in, then per block h <- relu(h + W2 relu(W1 h + b1) + b2),
/// then g' = W_out h + b_out. With zero blocks g' is affine in x. The relu
/// subgradient at 0 is taken as 0.
struct EmbeddingNet {
  int in_dim = 0;
  int lift_dim = 0;
  int hidden = 0;
  int blocks = 0;
  Eigen::MatrixXd w_in;
  Eigen::VectorXd b_in;
  std::vector<Eigen::MatrixXd> w1;
  std::vector<Eigen::VectorXd> b1;
  std::vector<Eigen::MatrixXd> w2;
  std::vector<Eigen::VectorXd> b2;
  Eigen::MatrixXd w_out;
  Eigen::VectorXd b_out;

  int out_dim() const { return lift_dim - in_dim; }
  /// Total learnable parameter count.
  int param_count() const;
};

/// Gradients with respect to every net tensor, same shapes as the net.
struct NetGrads {
  Eigen::MatrixXd w_in;
  Eigen::VectorXd b_in;
  std::vector<Eigen::MatrixXd> w1;
  std::vector<Eigen::VectorXd> b1;
  std::vector<Eigen::MatrixXd> w2;
  std::vector<Eigen::VectorXd> b2;
  Eigen::MatrixXd w_out;
  Eigen::VectorXd b_out;

  static NetGrads zeros_like(const EmbeddingNet& net);
  void add(const NetGrads& other);
  void scale(double s);
};

/// Parameter gradients plus the gradient with respect to the input point.
struct EmbedBackwardResult {
  NetGrads params;
  Eigen::VectorXd input;
};

/// Fresh net with He-style scaled-uniform weights (|w| <= sqrt(6 / fan_in))
/// and zero biases, deterministic per seed. lift_dim == in_dim yields the
/// degenerate identity lift with an empty output head. Throws BadDims for
/// lift_dim < in_dim or nonpositive hidden/negative blocks.
EmbeddingNet init_net(int in_dim, int lift_dim, int hidden, int blocks, std::uint64_t seed);

/// Lift of a single (normalized) state: [x; g'(x)].
Eigen::VectorXd embed_forward(const EmbeddingNet& net, const Eigen::VectorXd& x);

/// Reverse-mode vector-Jacobian product of the full lift at x for the
/// upstream vector u (dimension lift_dim): parameter gradients of u . g(x)
/// and the input gradient d(u . g(x))/dx.
EmbedBackwardResult embed_backward(const EmbeddingNet& net, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& upstream);

/// Row-major flattening of all net tensors in declaration order
/// (w_in, b_in, then w1, b1, w2, b2 per block, then w_out, b_out).
Eigen::VectorXd net_to_flat(const EmbeddingNet& net);
void net_from_flat(EmbeddingNet& net, const Eigen::VectorXd& flat);
Eigen::VectorXd net_grads_to_flat(const NetGrads& grads);

}  // namespace ikd
