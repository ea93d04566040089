#include "ikd/embedding.hpp"

#include <cmath>

#include "ikd/errors.hpp"
#include "ikd/rng.hpp"

namespace ikd {

namespace {

Eigen::VectorXd relu(const Eigen::VectorXd& v) { return v.cwiseMax(0.0); }

/// Derivative mask with the subgradient at 0 fixed to 0.
Eigen::ArrayXd relu_mask(const Eigen::VectorXd& pre) {
  return (pre.array() > 0.0).cast<double>();
}

Eigen::MatrixXd scaled_uniform(Eigen::Index rows, Eigen::Index cols, int fan_in,
                               std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = dist(rng);
    }
  }
  return m;
}

/// Forward pass that keeps every pre-activation needed by the backward pass.
struct ForwardTrace {
  Eigen::VectorXd h0;                     // W_in x + b_in
  std::vector<Eigen::VectorXd> a;         // W1 h + b1 per block
  std::vector<Eigen::VectorXd> s;         // relu(a)
  std::vector<Eigen::VectorXd> c;         // h + W2 s + b2
  std::vector<Eigen::VectorXd> h;         // block outputs relu(c)
  Eigen::VectorXd out;                    // W_out h_last + b_out
};

ForwardTrace run_forward(const EmbeddingNet& net, const Eigen::VectorXd& x) {
  ForwardTrace t;
  t.h0 = net.w_in * x + net.b_in;
  Eigen::VectorXd h = t.h0;
  t.a.reserve(net.blocks);
  t.s.reserve(net.blocks);
  t.c.reserve(net.blocks);
  t.h.reserve(net.blocks);
  for (int k = 0; k < net.blocks; ++k) {
    t.a.push_back(net.w1[k] * h + net.b1[k]);
    t.s.push_back(relu(t.a.back()));
    t.c.push_back(h + net.w2[k] * t.s.back() + net.b2[k]);
    t.h.push_back(relu(t.c.back()));
    h = t.h.back();
  }
  t.out = net.w_out * h + net.b_out;
  return t;
}

void append_matrix(Eigen::VectorXd& flat, Eigen::Index& pos, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      flat(pos++) = m(r, c);
    }
  }
}

void take_matrix(const Eigen::VectorXd& flat, Eigen::Index& pos, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = flat(pos++);
    }
  }
}

}  // namespace

int EmbeddingNet::param_count() const {
  int n = static_cast<int>(w_in.size() + b_in.size() + w_out.size() + b_out.size());
  for (int k = 0; k < blocks; ++k) {
    n += static_cast<int>(w1[k].size() + b1[k].size() + w2[k].size() + b2[k].size());
  }
  return n;
}

NetGrads NetGrads::zeros_like(const EmbeddingNet& net) {
  NetGrads g;
  g.w_in = Eigen::MatrixXd::Zero(net.w_in.rows(), net.w_in.cols());
  g.b_in = Eigen::VectorXd::Zero(net.b_in.size());
  for (int k = 0; k < net.blocks; ++k) {
    g.w1.push_back(Eigen::MatrixXd::Zero(net.w1[k].rows(), net.w1[k].cols()));
    g.b1.push_back(Eigen::VectorXd::Zero(net.b1[k].size()));
    g.w2.push_back(Eigen::MatrixXd::Zero(net.w2[k].rows(), net.w2[k].cols()));
    g.b2.push_back(Eigen::VectorXd::Zero(net.b2[k].size()));
  }
  g.w_out = Eigen::MatrixXd::Zero(net.w_out.rows(), net.w_out.cols());
  g.b_out = Eigen::VectorXd::Zero(net.b_out.size());
  return g;
}

void NetGrads::add(const NetGrads& other) {
  w_in += other.w_in;
  b_in += other.b_in;
  for (std::size_t k = 0; k < w1.size(); ++k) {
    w1[k] += other.w1[k];
    b1[k] += other.b1[k];
    w2[k] += other.w2[k];
    b2[k] += other.b2[k];
  }
  w_out += other.w_out;
  b_out += other.b_out;
}

void NetGrads::scale(double s) {
  w_in *= s;
  b_in *= s;
  for (std::size_t k = 0; k < w1.size(); ++k) {
    w1[k] *= s;
    b1[k] *= s;
    w2[k] *= s;
    b2[k] *= s;
  }
  w_out *= s;
  b_out *= s;
}

EmbeddingNet init_net(int in_dim, int lift_dim, int hidden, int blocks, std::uint64_t seed) {
  if (in_dim <= 0) throw BadDims("init_net: in_dim must be positive");
  if (lift_dim < in_dim) throw BadDims("init_net: lift_dim must be >= in_dim");
  if (hidden <= 0) throw BadDims("init_net: hidden must be positive");
  if (blocks < 0) throw BadDims("init_net: blocks must be >= 0");
  EmbeddingNet net;
  net.in_dim = in_dim;
  net.lift_dim = lift_dim;
  net.hidden = hidden;
  net.blocks = blocks;
  std::mt19937_64 rng(mix64(seed ^ 0x6e657469ull));
  net.w_in = scaled_uniform(hidden, in_dim, in_dim, rng);
  net.b_in = Eigen::VectorXd::Zero(hidden);
  for (int k = 0; k < blocks; ++k) {
    net.w1.push_back(scaled_uniform(hidden, hidden, hidden, rng));
    net.b1.push_back(Eigen::VectorXd::Zero(hidden));
    net.w2.push_back(scaled_uniform(hidden, hidden, hidden, rng));
    net.b2.push_back(Eigen::VectorXd::Zero(hidden));
  }
  net.w_out = scaled_uniform(lift_dim - in_dim, hidden, hidden, rng);
  net.b_out = Eigen::VectorXd::Zero(lift_dim - in_dim);
  return net;
}

Eigen::VectorXd embed_forward(const EmbeddingNet& net, const Eigen::VectorXd& x) {
  if (x.size() != net.in_dim) throw ShapeMismatch("embed_forward: input dimension mismatch");
  if (!x.allFinite()) throw NonFiniteState("embed_forward: non-finite input");
  Eigen::VectorXd z(net.lift_dim);
  z.head(net.in_dim) = x;
  if (net.out_dim() > 0) {
    z.tail(net.out_dim()) = run_forward(net, x).out;
  }
  return z;
}

EmbedBackwardResult embed_backward(const EmbeddingNet& net, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& upstream) {
  if (x.size() != net.in_dim) throw ShapeMismatch("embed_backward: input dimension mismatch");
  if (upstream.size() != net.lift_dim) {
    throw ShapeMismatch("embed_backward: upstream dimension mismatch");
  }
  EmbedBackwardResult res;
  res.params = NetGrads::zeros_like(net);
  res.input = upstream.head(net.in_dim);
  if (net.out_dim() == 0) return res;

  const ForwardTrace t = run_forward(net, x);
  const Eigen::VectorXd ug = upstream.tail(net.out_dim());

  const Eigen::VectorXd& h_last = net.blocks > 0 ? t.h.back() : t.h0;
  res.params.w_out = ug * h_last.transpose();
  res.params.b_out = ug;
  Eigen::VectorXd dh = net.w_out.transpose() * ug;

  for (int k = net.blocks - 1; k >= 0; --k) {
    const Eigen::VectorXd& h_in = k > 0 ? t.h[k - 1] : t.h0;
    const Eigen::VectorXd dc = (dh.array() * relu_mask(t.c[k])).matrix();
    res.params.b2[k] = dc;
    res.params.w2[k] = dc * t.s[k].transpose();
    const Eigen::VectorXd da =
        ((net.w2[k].transpose() * dc).array() * relu_mask(t.a[k])).matrix();
    res.params.b1[k] = da;
    res.params.w1[k] = da * h_in.transpose();
    dh = dc + net.w1[k].transpose() * da;
  }

  res.params.w_in = dh * x.transpose();
  res.params.b_in = dh;
  res.input += net.w_in.transpose() * dh;
  return res;
}

Eigen::VectorXd net_to_flat(const EmbeddingNet& net) {
  Eigen::VectorXd flat(net.param_count());
  Eigen::Index pos = 0;
  append_matrix(flat, pos, net.w_in);
  flat.segment(pos, net.b_in.size()) = net.b_in;
  pos += net.b_in.size();
  for (int k = 0; k < net.blocks; ++k) {
    append_matrix(flat, pos, net.w1[k]);
    flat.segment(pos, net.b1[k].size()) = net.b1[k];
    pos += net.b1[k].size();
    append_matrix(flat, pos, net.w2[k]);
    flat.segment(pos, net.b2[k].size()) = net.b2[k];
    pos += net.b2[k].size();
  }
  append_matrix(flat, pos, net.w_out);
  flat.segment(pos, net.b_out.size()) = net.b_out;
  pos += net.b_out.size();
  return flat;
}

void net_from_flat(EmbeddingNet& net, const Eigen::VectorXd& flat) {
  if (flat.size() != net.param_count()) throw ShapeMismatch("net_from_flat: size mismatch");
  Eigen::Index pos = 0;
  take_matrix(flat, pos, net.w_in);
  net.b_in = flat.segment(pos, net.b_in.size());
  pos += net.b_in.size();
  for (int k = 0; k < net.blocks; ++k) {
    take_matrix(flat, pos, net.w1[k]);
    net.b1[k] = flat.segment(pos, net.b1[k].size());
    pos += net.b1[k].size();
    take_matrix(flat, pos, net.w2[k]);
    net.b2[k] = flat.segment(pos, net.b2[k].size());
    pos += net.b2[k].size();
  }
  take_matrix(flat, pos, net.w_out);
  net.b_out = flat.segment(pos, net.b_out.size());
  pos += net.b_out.size();
}

Eigen::VectorXd net_grads_to_flat(const NetGrads& grads) {
  Eigen::Index total = grads.w_in.size() + grads.b_in.size() + grads.w_out.size() +
                       grads.b_out.size();
  for (std::size_t k = 0; k < grads.w1.size(); ++k) {
    total += grads.w1[k].size() + grads.b1[k].size() + grads.w2[k].size() + grads.b2[k].size();
  }
  Eigen::VectorXd flat(total);
  Eigen::Index pos = 0;
  append_matrix(flat, pos, grads.w_in);
  flat.segment(pos, grads.b_in.size()) = grads.b_in;
  pos += grads.b_in.size();
  for (std::size_t k = 0; k < grads.w1.size(); ++k) {
    append_matrix(flat, pos, grads.w1[k]);
    flat.segment(pos, grads.b1[k].size()) = grads.b1[k];
    pos += grads.b1[k].size();
    append_matrix(flat, pos, grads.w2[k]);
    flat.segment(pos, grads.b2[k].size()) = grads.b2[k];
    pos += grads.b2[k].size();
  }
  append_matrix(flat, pos, grads.w_out);
  flat.segment(pos, grads.b_out.size()) = grads.b_out;
  pos += grads.b_out.size();
  return flat;
}

}  // namespace ikd
