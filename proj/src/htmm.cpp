#include "htn/htmm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "htn/rng.hpp"

namespace htn {

HtmmParameters::HtmmParameters(std::size_t C, std::size_t L, std::size_t V)
    : C(C),
      L(L),
      V(V),
      lambda_a(C * C * L, 0.0),
      lambda_pi(C, 0.0),
      lambda_b(C * V, 0.0),
      lambda_phi(L, 0.0) {}

HtmmParameters HtmmParameters::zeros(std::size_t C, std::size_t L, std::size_t V) {
  return HtmmParameters(C, L, V);
}

HtmmParameters HtmmParameters::random_init(std::size_t C, std::size_t L,
                                           std::size_t V, std::uint64_t seed,
                                           double stddev) {
  HtmmParameters p(C, L, V);
  Rng rng(seed);
  for (double& x : p.lambda_a) x = stddev * rng.next_gaussian();
  for (double& x : p.lambda_pi) x = stddev * rng.next_gaussian();
  for (double& x : p.lambda_b) x = stddev * rng.next_gaussian();
  for (double& x : p.lambda_phi) x = stddev * rng.next_gaussian();
  return p;
}

void HtmmParameters::add_scaled(const HtmmParameters& other, double factor) {
  for (std::size_t k = 0; k < lambda_a.size(); ++k) lambda_a[k] += factor * other.lambda_a[k];
  for (std::size_t k = 0; k < lambda_pi.size(); ++k) lambda_pi[k] += factor * other.lambda_pi[k];
  for (std::size_t k = 0; k < lambda_b.size(); ++k) lambda_b[k] += factor * other.lambda_b[k];
  for (std::size_t k = 0; k < lambda_phi.size(); ++k) lambda_phi[k] += factor * other.lambda_phi[k];
}

void HtmmParameters::fill(double value) {
  std::fill(lambda_a.begin(), lambda_a.end(), value);
  std::fill(lambda_pi.begin(), lambda_pi.end(), value);
  std::fill(lambda_b.begin(), lambda_b.end(), value);
  std::fill(lambda_phi.begin(), lambda_phi.end(), value);
}

namespace {

// softmax over a strided slice, stabilized by max subtraction
void softmax_slice(const std::vector<double>& in, std::vector<double>& out,
                   std::size_t begin, std::size_t stride, std::size_t count) {
  double mx = in[begin];
  for (std::size_t k = 1; k < count; ++k) mx = std::max(mx, in[begin + k * stride]);
  double sum = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double e = std::exp(in[begin + k * stride] - mx);
    out[begin + k * stride] = e;
    sum += e;
  }
  for (std::size_t k = 0; k < count; ++k) out[begin + k * stride] /= sum;
}

}  // namespace

ProbTables materialize(const HtmmParameters& params) {
  const std::size_t C = params.C, L = params.L, V = params.V;
  ProbTables t;
  t.C = C;
  t.L = L;
  t.V = V;
  t.a.resize(C * C * L);
  t.pi.resize(C);
  t.b.resize(C * V);
  t.phi.resize(L);
  // A: over i for fixed (j, l); index (i*C + j)*L + l, i-stride = C*L
  for (std::size_t j = 0; j < C; ++j)
    for (std::size_t l = 0; l < L; ++l)
      softmax_slice(params.lambda_a, t.a, j * L + l, C * L, C);
  softmax_slice(params.lambda_pi, t.pi, 0, 1, C);
  for (std::size_t i = 0; i < C; ++i) softmax_slice(params.lambda_b, t.b, i * V, 1, V);
  softmax_slice(params.lambda_phi, t.phi, 0, 1, L);
  return t;
}

std::vector<double> ProbTables::phi_present(std::size_t arity) const {
  std::vector<double> p(phi.begin(), phi.begin() + static_cast<std::ptrdiff_t>(arity));
  double sum = 0.0;
  for (double x : p) sum += x;
  for (double& x : p) x /= sum;
  return p;
}

double NodePosteriors::switch_posterior(std::size_t u, std::size_t l) const {
  double s = 0.0;
  for (std::size_t i = 0; i < C; ++i)
    for (std::size_t j = 0; j < C; ++j) s += pair(u, l, i, j);
  return s;
}

namespace {

void check_compatible(const ProbTables& t, const LabeledTree& tree) {
  for (std::size_t u = 0; u < tree.size(); ++u) {
    if (tree.nodes[u].label >= t.V)
      throw std::invalid_argument("tree label " + std::to_string(tree.nodes[u].label) +
                                  " out of range for V=" + std::to_string(t.V));
    if (tree.arity(u) > t.L)
      throw std::invalid_argument("node arity " + std::to_string(tree.arity(u)) +
                                  " exceeds L=" + std::to_string(t.L));
  }
}

// Scaled upward pass. beta[u*C+i] = P(Q_u = i | labels of subtree(u));
// the per-node scaling factors multiply to P(x), accumulated in log space.
// For internal nodes, g[u][l*C+i] = sum_j A(i,j,l) beta[c_l][j] and
// denom[u*C+i] = sum_l phi'_l g[u][l*C+i] are kept for the downward pass.
struct UpwardResult {
  std::vector<double> beta;
  std::vector<std::vector<double>> g;
  std::vector<double> denom;
  double loglik = 0.0;
};

UpwardResult upward_pass(const ProbTables& t, const LabeledTree& tree) {
  check_compatible(t, tree);
  const std::size_t C = t.C;
  const std::size_t U = tree.size();
  UpwardResult r;
  r.beta.assign(U * C, 0.0);
  r.g.resize(U);
  r.denom.assign(U * C, 0.0);

  // pre-order storage: iterating backwards visits children before parents
  for (std::size_t uu = U; uu-- > 0;) {
    const std::size_t u = uu;
    const std::size_t x = tree.nodes[u].label;
    double scale = 0.0;
    if (tree.is_leaf(u)) {
      for (std::size_t i = 0; i < C; ++i) {
        const double m = t.pi[i] * t.B(i, x);
        r.beta[u * C + i] = m;
        scale += m;
      }
    } else {
      const std::size_t a = tree.arity(u);
      const auto phi = t.phi_present(a);
      auto& gu = r.g[u];
      gu.assign(a * C, 0.0);
      for (std::size_t l = 0; l < a; ++l) {
        const std::size_t c = tree.nodes[u].children[l];
        for (std::size_t i = 0; i < C; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < C; ++j) s += t.A(i, j, l) * r.beta[c * C + j];
          gu[l * C + i] = s;
        }
      }
      for (std::size_t i = 0; i < C; ++i) {
        double d = 0.0;
        for (std::size_t l = 0; l < a; ++l) d += phi[l] * gu[l * C + i];
        r.denom[u * C + i] = d;
        const double m = t.B(i, x) * d;
        r.beta[u * C + i] = m;
        scale += m;
      }
    }
    for (std::size_t i = 0; i < C; ++i) r.beta[u * C + i] /= scale;
    r.loglik += std::log(scale);
  }
  return r;
}

}  // namespace

double upward_log_likelihood(const ProbTables& tables, const LabeledTree& tree) {
  return upward_pass(tables, tree).loglik;
}

double upward_log_likelihood(const HtmmParameters& params, const LabeledTree& tree) {
  return upward_log_likelihood(materialize(params), tree);
}

NodePosteriors upward_downward(const ProbTables& t, const LabeledTree& tree) {
  const UpwardResult up = upward_pass(t, tree);
  const std::size_t C = t.C;
  const std::size_t U = tree.size();

  NodePosteriors post;
  post.C = C;
  post.eps_node.assign(U * C, 0.0);
  post.eps_pair.resize(U);
  post.loglik = up.loglik;

  // root posterior is the normalized upward message; pre-order iteration
  // reaches every parent before its children
  for (std::size_t i = 0; i < C; ++i) post.eps_node[i] = up.beta[i];
  for (std::size_t u = 0; u < U; ++u) {
    if (tree.is_leaf(u)) continue;
    const std::size_t a = tree.arity(u);
    const auto phi = t.phi_present(a);
    const auto& gu = up.g[u];
    auto& pair = post.eps_pair[u];
    pair.assign(a * C * C, 0.0);

    // ratio r_i = eps_u(i) / denom_u(i) appears in both child quantities
    std::vector<double> ratio(C);
    for (std::size_t i = 0; i < C; ++i) ratio[i] = post.eps_node[u * C + i] / up.denom[u * C + i];

    for (std::size_t l = 0; l < a; ++l) {
      const std::size_t c = tree.nodes[u].children[l];
      for (std::size_t j = 0; j < C; ++j) {
        const double bc = up.beta[c * C + j];
        double child_marginal = 0.0;
        for (std::size_t i = 0; i < C; ++i) {
          const double joint = ratio[i] * phi[l] * t.A(i, j, l) * bc;
          pair[(l * C + i) * C + j] = joint;
          // switch != l contributions: eps_u(i) minus what switch l explains
          child_marginal += joint + ratio[i] * bc * (up.denom[u * C + i] - phi[l] * gu[l * C + i]);
        }
        post.eps_node[c * C + j] = child_marginal;
      }
    }
  }
  return post;
}

NodePosteriors upward_downward(const HtmmParameters& params, const LabeledTree& tree) {
  return upward_downward(materialize(params), tree);
}

HtmmGradients loglik_gradients(const HtmmParameters& params, const LabeledTree& tree,
                               const NodePosteriors& post, TransitionGradientForm form) {
  const std::size_t C = params.C, L = params.L, V = params.V;
  if (post.C != C || post.eps_node.size() != tree.size() * C)
    throw std::invalid_argument("posteriors do not match (params, tree)");
  const ProbTables t = materialize(params);
  HtmmGradients grad(C, L, V);

  for (std::size_t u = 0; u < tree.size(); ++u) {
    const std::size_t x = tree.nodes[u].label;
    for (std::size_t i = 0; i < C; ++i) {
      const double eps = post.node(u, i);
      // emission: eps_u(i) (tau_v(x_u) - b_i(v)) for every v
      grad.b(i, x) += eps;
      for (std::size_t v = 0; v < V; ++v) grad.b(i, v) -= eps * t.B(i, v);
      if (tree.is_leaf(u)) grad.lambda_pi[i] += eps - t.pi[i];
    }
    if (tree.is_leaf(u)) continue;

    const std::size_t a = tree.arity(u);
    const auto phi = t.phi_present(a);
    for (std::size_t l = 0; l < a; ++l) {
      // switch: posterior mass on position l minus the renormalized prior
      grad.lambda_phi[l] += post.switch_posterior(u, l) - phi[l];
      const std::size_t c = tree.nodes[u].children[l];
      for (std::size_t j = 0; j < C; ++j) {
        double second;
        if (form == TransitionGradientForm::fisher) {
          second = 0.0;  // switch-conditioned child marginal
          for (std::size_t i = 0; i < C; ++i) second += post.pair(u, l, i, j);
        } else {
          second = post.node(c, j);  // full child marginal
        }
        for (std::size_t i = 0; i < C; ++i)
          grad.a(i, j, l) += post.pair(u, l, i, j) - t.A(i, j, l) * second;
      }
    }
  }
  return grad;
}

double total_log_likelihood(const HtmmParameters& params,
                            std::span<const LabeledTree> trees) {
  const ProbTables t = materialize(params);
  double total = 0.0;
  for (const auto& tree : trees) total += upward_log_likelihood(t, tree);
  return total;
}

namespace {

// Expected complete-data objective of the switch group given fixed counts:
//   g(phi) = sum_l n_l log phi_l - sum_a m_a log(sum_{l<a} phi_l)
// where n_l are posterior switch counts and m_a the number of internal
// nodes of arity a. The renormalization over present children makes plain
// count normalization inexact when arities are mixed, so the M-step
// maximizes g directly by minorize-maximize; each iteration has a closed
// form up to a monotone 1-D root find and never decreases g.
struct PhiObjective {
  std::vector<double> n;        // switch counts per position, length L
  std::vector<double> m;        // internal-node count per arity, index a in [1, L]

  double eval(const std::vector<double>& phi) const {
    double g = 0.0;
    for (std::size_t l = 0; l < n.size(); ++l) g += n[l] * std::log(phi[l]);
    double cum = 0.0;
    for (std::size_t a = 1; a <= n.size(); ++a) {
      cum += phi[a - 1];
      if (m[a] > 0.0) g -= m[a] * std::log(cum);
    }
    return g;
  }

  std::vector<double> mm_iterate(std::vector<double> phi, int iters) const {
    const std::size_t L = n.size();
    for (int it = 0; it < iters; ++it) {
      // c_l = sum over arities that include position l of m_a / Phi_a
      std::vector<double> cum(L + 1, 0.0);
      for (std::size_t a = 1; a <= L; ++a) cum[a] = cum[a - 1] + phi[a - 1];
      std::vector<double> c(L, 0.0);
      double tail = 0.0;
      for (std::size_t a = L; a >= 1; --a) {
        tail += m[a] / cum[a];
        c[a - 1] = tail;
      }
      // solve sum_l n_l / (c_l + mu) = 1; LHS is decreasing in mu
      double total_n = 0.0;
      for (double x : n) total_n += x;
      double cmin = c[0];
      for (double x : c) cmin = std::min(cmin, x);
      double lo = -cmin + 1e-300, hi = std::max(total_n, 1.0);
      auto lhs = [&](double mu) {
        double s = 0.0;
        for (std::size_t l = 0; l < L; ++l) s += n[l] / (c[l] + mu);
        return s;
      };
      while (lhs(hi) > 1.0) hi *= 2.0;
      for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (lhs(mid) > 1.0 ? lo : hi) = mid;
      }
      const double mu = 0.5 * (lo + hi);
      double sum = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        phi[l] = n[l] / (c[l] + mu);
        sum += phi[l];
      }
      for (double& x : phi) x /= sum;
    }
    return phi;
  }
};

}  // namespace

HtmmParameters em_step(const HtmmParameters& params, std::span<const LabeledTree> trees,
                       double smoothing) {
  if (trees.empty()) throw std::invalid_argument("em_step: empty tree set");
  const std::size_t C = params.C, L = params.L, V = params.V;
  const ProbTables t = materialize(params);

  std::vector<double> count_a(C * C * L, 0.0);
  std::vector<double> count_pi(C, 0.0);
  std::vector<double> count_b(C * V, 0.0);
  PhiObjective phi_obj;
  phi_obj.n.assign(L, 0.0);
  phi_obj.m.assign(L + 1, 0.0);

  for (const auto& tree : trees) {
    const NodePosteriors post = upward_downward(t, tree);
    for (std::size_t u = 0; u < tree.size(); ++u) {
      const std::size_t x = tree.nodes[u].label;
      for (std::size_t i = 0; i < C; ++i) {
        count_b[i * V + x] += post.node(u, i);
        if (tree.is_leaf(u)) count_pi[i] += post.node(u, i);
      }
      if (tree.is_leaf(u)) continue;
      const std::size_t a = tree.arity(u);
      phi_obj.m[a] += 1.0;
      for (std::size_t l = 0; l < a; ++l) {
        phi_obj.n[l] += post.switch_posterior(u, l);
        for (std::size_t i = 0; i < C; ++i)
          for (std::size_t j = 0; j < C; ++j)
            count_a[(i * C + j) * L + l] += post.pair(u, l, i, j);
      }
    }
  }

  HtmmParameters next(C, L, V);
  auto store_normalized = [smoothing](const std::vector<double>& counts,
                                      std::vector<double>& lambda, std::size_t begin,
                                      std::size_t stride, std::size_t count) {
    double sum = 0.0;
    for (std::size_t k = 0; k < count; ++k) sum += counts[begin + k * stride] + smoothing;
    for (std::size_t k = 0; k < count; ++k)
      lambda[begin + k * stride] = std::log((counts[begin + k * stride] + smoothing) / sum);
  };
  for (std::size_t j = 0; j < C; ++j)
    for (std::size_t l = 0; l < L; ++l)
      store_normalized(count_a, next.lambda_a, j * L + l, C * L, C);
  store_normalized(count_pi, next.lambda_pi, 0, 1, C);
  for (std::size_t i = 0; i < C; ++i) store_normalized(count_b, next.lambda_b, i * V, 1, V);

  if (L == 1) {
    next.lambda_phi[0] = 0.0;
  } else {
    for (double& x : phi_obj.n) x += smoothing;
    // start from the current phi (guaranteed non-decreasing), but accept the
    // plain normalized counts when they score at least as well -- they are
    // the exact maximizer whenever all internal arities are equal
    const std::vector<double> current = t.phi;
    std::vector<double> ascended = phi_obj.mm_iterate(current, 40);
    double total_n = 0.0;
    for (double x : phi_obj.n) total_n += x;
    std::vector<double> naive(L);
    for (std::size_t l = 0; l < L; ++l) naive[l] = phi_obj.n[l] / total_n;
    const std::vector<double>& best =
        phi_obj.eval(naive) >= phi_obj.eval(ascended) ? naive : ascended;
    for (std::size_t l = 0; l < L; ++l) next.lambda_phi[l] = std::log(best[l]);
  }
  return next;
}

}  // namespace htn
