// Ground-truth structural causal models used for validation: the synthetic
// collider / triangle / chain / M-graph families and the semi-synthetic loan
// and adult models.

#include <algorithm>
#include <cmath>
#include <map>

#include "vaca/scm.hpp"

namespace vaca {

namespace {

using Prior = ExogenousPrior;

double ind(bool b) { return b ? 1.0 : 0.0; }
double sgn(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }
double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
// int(.) truncates toward zero
double trunc_int(double v) { return std::trunc(v); }

template <typename F>
StructuralEquation scalar_eq(NodeIndex node, F f) {
  return {node, [f](std::span<const double> pa, std::span<const double> u, std::span<double> out) {
            out[0] = f(pa, u[0]);
          }};
}

StructuralEquation root_eq(NodeIndex node, double offset = 0.0) {
  return scalar_eq(node, [offset](std::span<const double>, double u) { return u + offset; });
}

ScmSpec make(std::string name, std::string sem, CausalGraph graph, std::vector<Prior> priors,
             std::vector<StructuralEquation> eqs) {
  ScmSpec s;
  s.name = std::move(name);
  s.sem = std::move(sem);
  s.graph = std::move(graph);
  for (auto& p : priors) s.priors.push_back({std::move(p)});
  s.equations = std::move(eqs);
  s.validate();
  return s;
}

// exogenous priors shared by the three-node families
std::vector<Prior> three_node_priors(const std::string& sem) {
  if (sem == "LIN") {
    return {Prior::mixture({0.5, 0.5}, {-2.0, 1.5}, {1.5, 1.0}), Prior::normal(0, 1), Prior::normal(0, 1)};
  }
  if (sem == "NLIN") {
    return {Prior::mixture({0.5, 0.5}, {-2.0, 1.5}, {1.5, 1.0}), Prior::normal(0, 0.1), Prior::normal(0, 1)};
  }
  return {Prior::mixture({0.5, 0.5}, {-2.5, 2.5}, {1.0, 1.0}), Prior::normal(0, 0.25),
          Prior::normal(0, 0.0625)};
}

ScmSpec collider(const std::string& sem) {
  auto g = CausalGraph::from_names({"X1", "X2", "X3"}, {{"X1", "X3"}, {"X2", "X3"}});
  StructuralEquation x3;
  if (sem == "LIN") {
    x3 = scalar_eq(2, [](auto pa, double u) { return 0.05 * pa[0] + 0.25 * pa[1] + u; });
  } else if (sem == "NLIN") {
    x3 = scalar_eq(2, [](auto pa, double u) { return 0.05 * pa[0] + 0.25 * pa[1] * pa[1] + u; });
  } else {
    x3 = scalar_eq(2, [](auto pa, double u) {
      return -1.0 + 0.1 * sgn(u) * (pa[0] * pa[0] + pa[1] * pa[1]) * u;
    });
  }
  return make("collider", sem, std::move(g), three_node_priors(sem), {root_eq(0), root_eq(1), x3});
}

StructuralEquation mediator_eq(const std::string& sem) {
  if (sem == "LIN") return scalar_eq(1, [](auto pa, double u) { return -pa[0] + u; });
  if (sem == "NLIN") {
    return scalar_eq(1, [](auto pa, double u) { return -1.0 + 3.0 / (1.0 + std::exp(-2.0 * pa[0])) + u; });
  }
  return scalar_eq(1, [](auto pa, double u) { return 0.25 * sgn(u) * pa[0] * pa[0] * (1.0 + u * u); });
}

ScmSpec triangle(const std::string& sem) {
  auto g = CausalGraph::from_names({"X1", "X2", "X3"}, {{"X1", "X2"}, {"X1", "X3"}, {"X2", "X3"}});
  StructuralEquation x3;
  if (sem == "LIN") {
    x3 = scalar_eq(2, [](auto pa, double u) { return pa[0] + 0.25 * pa[1] + u; });
  } else if (sem == "NLIN") {
    x3 = scalar_eq(2, [](auto pa, double u) { return pa[0] + 0.25 * pa[1] * pa[1] + u; });
  } else {
    x3 = scalar_eq(2, [](auto pa, double u) {
      return -1.0 + 0.1 * sgn(u) * (pa[0] * pa[0] + pa[1] * pa[1]) + u;
    });
  }
  return make("triangle", sem, std::move(g), three_node_priors(sem), {root_eq(0), mediator_eq(sem), x3});
}

ScmSpec chain(const std::string& sem) {
  auto g = CausalGraph::from_names({"X1", "X2", "X3"}, {{"X1", "X2"}, {"X2", "X3"}});
  StructuralEquation x3;
  if (sem == "LIN") {
    x3 = scalar_eq(2, [](auto pa, double u) { return 0.25 * pa[0] + u; });
  } else if (sem == "NLIN") {
    x3 = scalar_eq(2, [](auto pa, double u) { return 0.25 * pa[0] * pa[0] + u; });
  } else {
    x3 = scalar_eq(2, [](auto pa, double u) { return -1.0 + 0.1 * sgn(u) * (pa[0] * pa[0]) + u; });
  }
  return make("chain", sem, std::move(g), three_node_priors(sem), {root_eq(0), mediator_eq(sem), x3});
}

ScmSpec mgraph(const std::string& sem) {
  auto g = CausalGraph::from_names({"X1", "X2", "X3", "X4", "X5"},
                                   {{"X1", "X3"}, {"X1", "X4"}, {"X2", "X4"}, {"X2", "X5"}});
  std::vector<Prior> priors(5, Prior::normal(0, 1));
  std::vector<StructuralEquation> eqs{root_eq(0), root_eq(1)};
  if (sem == "LIN") {
    eqs.push_back(scalar_eq(2, [](auto pa, double u) { return pa[0] + u; }));
    eqs.push_back(scalar_eq(3, [](auto pa, double u) { return -pa[1] + 0.5 * pa[0] + u; }));
    eqs.push_back(scalar_eq(4, [](auto pa, double u) { return -1.5 * pa[0] + u; }));
  } else if (sem == "NLIN") {
    eqs.push_back(scalar_eq(2, [](auto pa, double u) { return pa[0] + 0.5 * pa[0] * pa[0] + u; }));
    eqs.push_back(scalar_eq(3, [](auto pa, double u) { return -pa[1] + 0.5 * pa[0] * pa[0] + u; }));
    eqs.push_back(scalar_eq(4, [](auto pa, double u) { return -1.5 * pa[0] * pa[0] + u; }));
  } else {
    eqs.push_back(scalar_eq(2, [](auto pa, double u) { return pa[0] * u; }));
    eqs.push_back(scalar_eq(3, [](auto pa, double u) { return (-pa[1] + 0.5 * pa[0] * pa[0]) * u; }));
    eqs.push_back(scalar_eq(4, [](auto pa, double u) { return (-1.5 * pa[0] * pa[0]) * u; }));
  }
  return make("mgraph", sem, std::move(g), std::move(priors), std::move(eqs));
}

ScmSpec loan() {
  // G, A, E, L, D, I, S; gender is binary, everything else continuous
  std::vector<NodeInfo> nodes{{"G", {ColumnKind::binary()}},     {"A", {ColumnKind::continuous()}},
                              {"E", {ColumnKind::continuous()}}, {"L", {ColumnKind::continuous()}},
                              {"D", {ColumnKind::continuous()}}, {"I", {ColumnKind::continuous()}},
                              {"S", {ColumnKind::continuous()}}};
  enum { G, A, E, L, D, I, S };
  std::vector<Edge> edges{{G, L}, {G, D}, {G, E}, {G, I}, {A, L}, {A, D},
                          {A, E}, {A, I}, {I, S}, {E, I}, {L, D}};
  CausalGraph g(std::move(nodes), std::move(edges));

  std::vector<StructuralEquation> eqs;
  eqs.push_back(root_eq(G));
  eqs.push_back(root_eq(A, -35.0));
  // parents (G, A)
  eqs.push_back(scalar_eq(E, [](auto pa, double u) {
    const double g = pa[0], a = pa[1];
    return -0.5 + 1.0 / (1.0 + std::exp(1.0 - 0.5 * g - 1.0 / (1.0 + std::exp(-0.1 * a)) - u));
  }));
  // parents (G, A)
  eqs.push_back(scalar_eq(L, [](auto pa, double u) {
    const double g = pa[0], a = pa[1];
    return 1.0 + 0.01 * (a - 5.0) * (5.0 - a) + g + u;
  }));
  // parents (G, A, L)
  eqs.push_back(scalar_eq(D, [](auto pa, double u) {
    const double g = pa[0], a = pa[1], l = pa[2];
    return -1.0 + 0.1 * a + 2.0 * g + l + u;
  }));
  // parents (G, A, E)
  eqs.push_back(scalar_eq(I, [](auto pa, double u) {
    const double g = pa[0], a = pa[1], e = pa[2];
    return -4.0 + 0.1 * (a + 35.0) + 2.0 * g + g * e + u;
  }));
  // parents (I)
  eqs.push_back(scalar_eq(S, [](auto pa, double u) { return -4.0 + 1.5 * ind(pa[0] > 0.0) * pa[0] + u; }));

  std::vector<Prior> priors{Prior::bernoulli(0.5), Prior::gamma(10.0, 3.5), Prior::normal(0, 0.25),
                            Prior::normal(0, 4),   Prior::normal(0, 9),     Prior::normal(0, 4),
                            Prior::normal(0, 25)};
  return make("loan", "", std::move(g), std::move(priors), std::move(eqs));
}

double mode_lowest(std::vector<double> values) {
  std::map<double, int> counts;
  for (double v : values) ++counts[v];
  double best = 0.0;
  int best_count = -1;
  for (const auto& [v, c] : counts) {  // ascending keys, strict > keeps the lowest on ties
    if (c > best_count) {
      best = v;
      best_count = c;
    }
  }
  return best;
}

ScmSpec adult() {
  enum { R, A, N, S, E, H, W, M, O, L, I };
  std::vector<NodeInfo> nodes{
      {"R", {ColumnKind::categorical(3)}}, {"A", {ColumnKind::continuous()}},
      {"N", {ColumnKind::categorical(4)}}, {"S", {ColumnKind::binary()}},
      {"E", {ColumnKind::continuous()}},   {"H", {ColumnKind::continuous()}},
      {"W", {ColumnKind::categorical(4)}}, {"M", {ColumnKind::categorical(4)}},
      {"O", {ColumnKind::categorical(3)}}, {"L", {ColumnKind::categorical(3)}},
      {"I", {ColumnKind::continuous()}}};
  std::vector<Edge> edges{
      {A, I}, {A, E}, {A, H}, {A, W}, {A, M}, {A, O}, {A, L}, {R, I}, {R, E}, {R, H}, {R, M},
      {N, E}, {N, H}, {N, M}, {N, L}, {N, I}, {N, W}, {S, E}, {S, H}, {S, I}, {S, L}, {S, M},
      {S, O}, {E, I}, {E, O}, {E, L}, {E, W}, {E, H}, {H, W}, {H, M}, {H, I}, {W, O}, {W, I},
      {W, M}, {M, O}, {M, I}, {M, L}, {O, I}, {L, I},
      {R, O},  // the occupation equation reads R
  };
  CausalGraph g(std::move(nodes), std::move(edges));

  std::vector<StructuralEquation> eqs;
  eqs.push_back(root_eq(R));
  eqs.push_back(root_eq(A, 17.0));
  eqs.push_back(root_eq(N));
  eqs.push_back(root_eq(S));
  // parents (R, A, N, S)
  eqs.push_back(scalar_eq(E, [](auto pa, double u) {
    const double r = pa[0], a = pa[1], n = pa[2], s = pa[3];
    return std::exp(2.0 * ind(r == 0) + ind(r == 1) + sigmoid(a - 30.0)) +
           (0.5 * ind(s == 0) + ind(s == 1)) * (2.0 * ind(n == 1) + 5.0 * ind(n == 2) + ind(n == 3)) + u;
  }));
  // parents (R, A, N, S, E)
  eqs.push_back(scalar_eq(H, [](auto pa, double u) {
    const double r = pa[0], a = pa[1], n = pa[2], s = pa[3], e = pa[4];
    const double base = 40.0 * ind(n == 0) + 36.0 * ind(n == 1) + 50.0 * ind(n == 2) + 30.0 * ind(n == 3);
    const double race = 0.5 * ind(r == 0) + ind(r == 1) + 1.3 * ind(r == 2);
    return (base * race + 2.0 * std::exp(-(a - 30.0) * (a - 30.0)) + 5.0 * std::abs(std::tanh(e - 2.0)) +
            2.0 * ind(s == 0) + u) *
           ind(a < 70.0);
  }));
  // parents (A, N, E, H)
  eqs.push_back(scalar_eq(W, [](auto pa, double u) {
    const double a = pa[0], n = pa[1], e = pa[2], h = pa[3];
    const double sh = sigmoid(h - 30.0 + u);
    const double w1 = ind(5.0 * std::abs(std::tanh(e - 2.0)) + sh > 0.3) + ind(sh > 0.3) * ind(a + 1.5 * u > 50.0) -
                      ind(n == 0) + ind(n == 2) + 3.0 * ind(n == 3);
    const double w2 = w1 * ind(w1 <= 3.0) + 3.0 * ind(w1 > 3.0);
    return w2 * ind(w2 >= 0.0);
  }));
  // parents (R, A, N, S, H, W)
  eqs.push_back(scalar_eq(M, [](auto pa, double u) {
    const double r = pa[0], a = pa[1], s = pa[3], h = pa[4], w = pa[5];
    const double r1 = trunc_int(r + 0.2 * u) * ind(r >= 0.0 && r <= 2.0) + 2.0 * ind(r > 2.0);
    const double r2 = 2.0 * ind(r1 == 1) + ind(r1 == 2);
    const double g1 = trunc_int(s + 0.5 * u);
    const double g2 = 0.0 * ind(g1 < 0) + ind(g1 > 1) + g1 * ind(g1 >= 0 && g1 <= 1);
    const double g3 = ind(g2 == 0) + 2.0 * ind(g2 == 1);
    const double a1 = a + 2.0 * u;
    const double a2 = 2.0 * ind(a1 > 20 && a1 <= 40) + ind(a1 > 40 && a1 <= 50) + 2.0 * ind(a1 >= 50);
    const double h1 = 3.0 * trunc_int(sigmoid(h - 30.0));
    const double h2 = h1 * ind(h1 <= 2) + 2.0 * ind(h1 > 2);
    return mode_lowest({r2, a2, w, h2, h, g3});
  }));
  // parents (R, A, S, E, W, M)
  eqs.push_back(scalar_eq(O, [](auto pa, double u) {
    const double r = pa[0], a = pa[1], s = pa[2], e = pa[3], w = pa[4], m = pa[5];
    const double ka = 2.0 * std::exp(-(a + u - 20.0) * (a + u - 20.0));
    const double ke = -sigmoid(e * u - 30.0);
    const double k = r + ka + ke + w + 3.0 * m + 4.0 * s;
    return 0.0 * ind(k < 1) + 1.0 * ind(k >= 1 && k <= 4) + 2.0 * ind(k > 4);
  }));
  // parents (A, N, S, E, M); the printed equation draws its noise from U_O,
  // here the node's own exogenous variable plays that role
  eqs.push_back(scalar_eq(L, [](auto pa, double u) {
    const double a = pa[0], n = pa[1], s = pa[2], e = pa[3], m = pa[4];
    const double cn = u * ind(n == 0) - u * ind(n == 1) + 2.0 * u * ind(n == 2) + 2.0 * ind(n == 3);
    const double ce = sigmoid(e - 30.0);
    const double c = cn + ce + 2.0 * ind(a < 20) - 2.0 * ind(s == 0);
    return 0.0 * ind(m == 1 && c < -1) + 1.0 * ind(m == 1 && c >= -1) + 2.0 * ind(m != 1 && c >= -1) +
           1.0 * ind(m != 1 && c < -1);
  }));
  // parents (R, A, N, S, E, H, W, M, O, L). Both race bonuses are kept as printed.
  eqs.push_back(scalar_eq(I, [](auto pa, double u) {
    const double r = pa[0], a = pa[1], n = pa[2], s = pa[3], e = pa[4], h = pa[5], w = pa[6], m = pa[7],
                 o = pa[8];
    return u + 10000 * ind(r > 1.5) + 20000 * ind(r < 1.5) + 3000 * ind(a >= 21 && a < 30) +
           8000 * ind(a >= 30) + 5000 * ind(e < 2) + 10000 * ind(e >= 2 && e < 10) + 30000 * ind(e >= 10) +
           5000 * ind(o == 1) + 15000 * ind(o == 2) + 5000 * ind(w == 0) + 7000 * ind(w == 1) +
           1000 * ind(m == 0) + 4000 * ind(m == 1) - 2000 * ind(m == 2) + 15000 * ind(h > 45) +
           10000 * ind(n >= 2) + 4000 * ind(s == 1) + 3000 * ind(r <= 1);
  }));

  std::vector<Prior> priors{Prior::categorical({0.6, 0.25, 0.15}),
                            Prior::gamma(4.0, 5.0),
                            Prior::categorical({0.55, 0.2, 0.15, 0.1}),
                            Prior::bernoulli(0.5),
                            Prior::normal(0, 1),
                            Prior::normal(0, 4),
                            Prior::normal(0, 1),
                            Prior::normal(0, 1),
                            Prior::normal(0, 1),
                            Prior::normal(0, 1),
                            Prior::normal(0, 4.0e6)};
  return make("adult", "", std::move(g), std::move(priors), std::move(eqs));
}

}  // namespace

std::vector<std::string> builtin_scm_names() { return {"collider", "triangle", "chain", "mgraph", "loan", "adult"}; }

ScmSpec builtin_scm(const std::string& name, const std::string& sem) {
  const bool family = name == "collider" || name == "triangle" || name == "chain" || name == "mgraph";
  if (family) {
    if (sem != "LIN" && sem != "NLIN" && sem != "NADD") {
      throw ScmError("SCM '" + name + "' needs sem LIN, NLIN or NADD (got '" + sem + "')");
    }
    if (name == "collider") return collider(sem);
    if (name == "triangle") return triangle(sem);
    if (name == "chain") return chain(sem);
    return mgraph(sem);
  }
  if (!sem.empty() && sem != "fixed") {
    throw ScmError("SCM '" + name + "' has fixed equations; sem '" + sem + "' does not apply");
  }
  if (name == "loan") return loan();
  if (name == "adult") return adult();
  throw ScmError("unknown SCM '" + name + "'");
}

}  // namespace vaca
