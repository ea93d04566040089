#include "ikd/mpc.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "ikd/errors.hpp"

namespace ikd {

MpcConfig make_mpc_config(const PlantSpec& spec, int horizon) {
  MpcConfig cfg;
  cfg.horizon = horizon;
  cfg.u_min = spec.u_min;
  cfg.u_max = spec.u_max;
  return cfg;
}

BoxQp build_condensed_qp(const KoopmanModel& model, const MpcConfig& cfg,
                         const Eigen::VectorXd& z0, const Eigen::MatrixXd& ref_rows) {
  const int H = cfg.horizon;
  const int n = model.lift_dim();
  const int np = model.state_dim();
  const int mp = model.control_dim();
  if (H < 1) throw BadDims("build_condensed_qp: horizon must be >= 1");
  if (z0.size() != n) throw ShapeMismatch("build_condensed_qp: latent dimension mismatch");
  if (ref_rows.rows() != H || ref_rows.cols() != np) {
    throw ShapeMismatch("build_condensed_qp: reference must have horizon rows");
  }
  if (cfg.u_min.size() != mp || cfg.u_max.size() != mp) {
    throw ShapeMismatch("build_condensed_qp: control bounds dimension mismatch");
  }

  // Powers of A up to H; pow[k] = A^k.
  std::vector<Eigen::MatrixXd> pow(H + 1);
  pow[0] = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= H; ++k) pow[k] = pow[k - 1] * model.A;

  // Predicted retrieved state over the horizon, as an affine map of the
  // stacked controls: x_pred = free + gain * u_stack, both restricted to the
  // first np latent coordinates.
  Eigen::VectorXd free(H * np);
  Eigen::MatrixXd gain = Eigen::MatrixXd::Zero(H * np, H * mp);
  for (int k = 1; k <= H; ++k) {
    free.segment((k - 1) * np, np) = (pow[k] * z0).head(np);
    for (int j = 0; j < k; ++j) {
      gain.block((k - 1) * np, j * mp, np, mp) = (pow[k - 1 - j] * model.B).topRows(np);
    }
  }

  Eigen::VectorXd weights(H * np);
  for (int k = 1; k <= H; ++k) {
    weights.segment((k - 1) * np, np)
        .setConstant(k == H ? cfg.terminal_weight : cfg.state_weight);
  }

  Eigen::VectorXd target(H * np);
  for (int k = 0; k < H; ++k) target.segment(k * np, np) = ref_rows.row(k).transpose();

  const Eigen::MatrixXd weighted = weights.asDiagonal() * gain;
  BoxQp qp;
  qp.P = 2.0 * (gain.transpose() * weighted +
                cfg.control_weight * Eigen::MatrixXd::Identity(H * mp, H * mp));
  qp.q = 2.0 * (weighted.transpose() * (free - target));
  qp.lo = cfg.u_min.replicate(H, 1);
  qp.hi = cfg.u_max.replicate(H, 1);
  return qp;
}

namespace {

void check_qp(const BoxQp& qp) {
  const Eigen::Index d = qp.q.size();
  if (qp.P.rows() != d || qp.P.cols() != d || qp.lo.size() != d || qp.hi.size() != d) {
    throw ShapeMismatch("box QP pieces have inconsistent dimensions");
  }
  if ((qp.lo.array() > qp.hi.array()).any()) {
    throw BadDims("box QP has an inverted bound pair");
  }
}

}  // namespace

QpResult solve_box_qp(const BoxQp& qp, const AdmmConfig& cfg) {
  check_qp(qp);
  const Eigen::Index d = qp.q.size();
  Eigen::LLT<Eigen::MatrixXd> llt(
      qp.P + cfg.rho * Eigen::MatrixXd::Identity(d, d));
  if (llt.info() != Eigen::Success) {
    throw NotPD("box QP matrix is not positive definite after the rho shift");
  }

  Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  QpResult res;
  res.status = QpStatus::MaxIters;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    u = llt.solve(-qp.q + cfg.rho * (v - w));
    const Eigen::VectorXd v_prev = v;
    v = (u + w).cwiseMax(qp.lo).cwiseMin(qp.hi);
    w += u - v;
    res.iters = it;
    res.r_prim = (u - v).lpNorm<Eigen::Infinity>();
    res.r_dual = cfg.rho * (v - v_prev).lpNorm<Eigen::Infinity>();
    const double eps_prim =
        cfg.eps_abs + cfg.eps_rel * std::max(u.lpNorm<Eigen::Infinity>(),
                                             v.lpNorm<Eigen::Infinity>());
    const double eps_dual = cfg.eps_abs + cfg.eps_rel * cfg.rho * w.lpNorm<Eigen::Infinity>();
    if (res.r_prim < eps_prim && res.r_dual < eps_dual) {
      res.status = QpStatus::Converged;
      break;
    }
  }
  res.u = v;
  return res;
}

Eigen::VectorXd qp_solve_reference(const BoxQp& qp) {
  check_qp(qp);
  const int d = static_cast<int>(qp.q.size());
  if (d > 8) throw DimTooLarge("reference QP solver enumerates 3^d sets, need d <= 8");

  long combos = 1;
  for (int i = 0; i < d; ++i) combos *= 3;

  double best_obj = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best;
  std::vector<int> kind(d);  // 0 free, 1 at lower, 2 at upper
  for (long code = 0; code < combos; ++code) {
    long c = code;
    int n_free = 0;
    for (int i = 0; i < d; ++i) {
      kind[i] = static_cast<int>(c % 3);
      c /= 3;
      if (kind[i] == 0) ++n_free;
    }

    Eigen::VectorXd u(d);
    for (int i = 0; i < d; ++i) {
      if (kind[i] == 1) u(i) = qp.lo(i);
      if (kind[i] == 2) u(i) = qp.hi(i);
    }
    if (n_free > 0) {
      Eigen::MatrixXd pff(n_free, n_free);
      Eigen::VectorXd rhs(n_free);
      std::vector<int> free_idx;
      free_idx.reserve(n_free);
      for (int i = 0; i < d; ++i) {
        if (kind[i] == 0) free_idx.push_back(i);
      }
      for (int a = 0; a < n_free; ++a) {
        rhs(a) = -qp.q(free_idx[a]);
        for (int b = 0; b < n_free; ++b) pff(a, b) = qp.P(free_idx[a], free_idx[b]);
        for (int i = 0; i < d; ++i) {
          if (kind[i] != 0) rhs(a) -= qp.P(free_idx[a], i) * u(i);
        }
      }
      const Eigen::VectorXd uf = pff.ldlt().solve(rhs);
      for (int a = 0; a < n_free; ++a) u(free_idx[a]) = uf(a);
    }

    if (((u - qp.lo).array() < -1e-10).any() || ((u - qp.hi).array() > 1e-10).any()) {
      continue;
    }
    u = u.cwiseMax(qp.lo).cwiseMin(qp.hi);
    const double obj = 0.5 * u.dot(qp.P * u) + qp.q.dot(u);
    if (obj < best_obj) {
      best_obj = obj;
      best = u;
    }
  }
  return best;
}

double kkt_violation(const BoxQp& qp, const Eigen::VectorXd& u, double tol_active) {
  check_qp(qp);
  if (u.size() != qp.q.size()) throw ShapeMismatch("kkt_violation: point dimension mismatch");
  const Eigen::VectorXd grad = qp.P * u + qp.q;
  double viol = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    viol = std::max({viol, qp.lo(i) - u(i), u(i) - qp.hi(i)});
    const bool at_lo = u(i) <= qp.lo(i) + tol_active;
    const bool at_hi = u(i) >= qp.hi(i) - tol_active;
    if (at_lo && at_hi) continue;
    if (at_lo) {
      viol = std::max(viol, -grad(i));
    } else if (at_hi) {
      viol = std::max(viol, grad(i));
    } else {
      viol = std::max(viol, std::abs(grad(i)));
    }
  }
  return viol;
}

Eigen::VectorXd mpc_step(const KoopmanModel& model, const MpcConfig& cfg,
                         const Eigen::VectorXd& x, const Eigen::MatrixXd& window) {
  const Eigen::VectorXd z0 = embed_forward(model.net, model.normalizer.apply(x));
  const BoxQp qp = build_condensed_qp(model, cfg, z0, model.normalizer.apply_rows(window));
  const QpResult res = solve_box_qp(qp, cfg.admm);
  return res.u.head(cfg.u_min.size()).cwiseMax(cfg.u_min).cwiseMin(cfg.u_max);
}

TrackOutcome track_reference(const PlantSpec& spec, const KoopmanModel& model,
                             const MpcConfig& cfg, const Eigen::MatrixXd& ref_plant_rows,
                             const TrackOptions& opts) {
  const int L = static_cast<int>(ref_plant_rows.rows());
  if (L < 1 || ref_plant_rows.cols() != spec.state_dim) {
    throw ShapeMismatch("track_reference: reference shape does not match the plant");
  }
  if (opts.t_max < 1) throw BadDims("track_reference: t_max must be >= 1");
  const RoleSlice jp = role_slice(spec, StateRole::JointPosition);
  if (jp.count == 0) throw BadDims("track_reference: plant reports no joint positions");

  TrackOutcome out;
  out.traj.states.resize(opts.t_max + 1, spec.state_dim);
  out.traj.controls.resize(opts.t_max, spec.control_dim);
  out.traj.modes.reserve(opts.t_max + 1);

  PlantState s;
  s.x = ref_plant_rows.row(0).transpose();
  s.mode = infer_mode(spec, s.x);
  out.traj.states.row(0) = s.x.transpose();
  out.traj.modes.push_back(s.mode);

  const int H = cfg.horizon;
  Eigen::MatrixXd window(H, spec.state_dim);
  int done = 0;
  for (int k = 0; k < opts.t_max; ++k) {
    for (int h = 1; h <= H; ++h) {
      window.row(h - 1) = ref_plant_rows.row(std::min(k + h, L - 1));
    }
    try {
      const Eigen::VectorXd u = mpc_step(model, cfg, s.x, window);
      s = plant_step(spec, s, u);
      out.traj.controls.row(k) = u.transpose();
    } catch (const NonFiniteState&) {
      out.failed = true;
      out.fail_step = k + 1;
      break;
    } catch (const NonFinitePrediction&) {
      out.failed = true;
      out.fail_step = k + 1;
      break;
    }
    out.traj.states.row(k + 1) = s.x.transpose();
    out.traj.modes.push_back(s.mode);
    done = k + 1;

    const Eigen::VectorXd ref = ref_plant_rows.row(std::min(k + 1, L - 1)).transpose();
    const double err = (s.x.segment(jp.first, jp.count) - ref.segment(jp.first, jp.count))
                           .cwiseAbs()
                           .mean();
    if (err > opts.eps_fail) {
      out.failed = true;
      out.fail_step = k + 1;
      break;
    }
  }

  out.traj.states.conservativeResize(done + 1, Eigen::NoChange);
  out.traj.controls.conservativeResize(done, Eigen::NoChange);
  out.traj.steps = done;
  out.traj.failed = out.failed;
  out.t_sur = out.failed ? out.fail_step : opts.t_max;
  return out;
}

}  // namespace ikd
