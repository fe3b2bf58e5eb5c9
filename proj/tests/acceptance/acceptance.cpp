// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion pins its tolerances in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ldspin/cluster_engine.hpp"
#include "ldspin/level2.hpp"
#include "unit/helpers.hpp"

using namespace ldspin;
using namespace ldspin::testing;

namespace {

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<bool(std::string&)> run;
};

bool check(bool ok, std::string& detail, const std::string& label) {
  if (!ok && detail.empty()) detail = "failed: " + label;
  return ok;
}

// --- 1. cluster-expansion oracle equivalence ------------------------------
bool criterion_oracle(std::string& detail) {
  bool ok = true;
  double worst = 0;
  const int K = 4;
  {
    const auto model = ising_chain_model();
    ClusterExpansion engine(model);
    for (double t : {-1.0, 0.0, 1.0})
      for (int n : {2, 4, 6}) {
        const auto box = LatticeBox::chain(n);
        const auto mine = engine.finite_volume_coeffs(box, Complex(t, 0), K);
        const auto oracle = taylor_log_oracle(model, box, Complex(t, 0), K);
        for (int k = 0; k < K; ++k)
          worst = std::max(worst, std::abs(mine[k] - oracle[k]));
      }
  }
  {
    const auto model = ising_2d_model();
    ClusterExpansion engine(model);
    for (double t : {-1.0, 0.0, 1.0})
      for (auto box : {LatticeBox::box2d(2, 2), LatticeBox::box2d(2, 3)}) {
        const auto mine = engine.finite_volume_coeffs(box, Complex(t, 0), K);
        const auto oracle = taylor_log_oracle(model, box, Complex(t, 0), K);
        for (int k = 0; k < K; ++k)
          worst = std::max(worst, std::abs(mine[k] - oracle[k]));
      }
  }
  ok = worst <= 1e-10;
  char buf[128];
  std::snprintf(buf, sizeof buf, "max coefficient deviation %.2e", worst);
  detail = buf;
  return ok;
}

// --- 2. KP certification soundness ----------------------------------------
bool criterion_kp(std::string& detail) {
  const auto model = ising_chain_model();
  const auto cert = find_beta0(model.potential, model.x_norm(), {0.1}, 0.0);
  ClusterExpansion engine(model);
  const int K = 6;
  double worst_kp = 0, worst_w = 0;
  for (int ti = -20; ti <= 20; ++ti) {
    const double t = 0.1 * ti;
    const auto kp = engine.kp_weighted_sums_by_degree(cert.a, t, cert.beta0, K);
    const auto w = engine.abs_cluster_sums_by_degree(t, cert.beta0, K);
    for (double v : kp) worst_kp = std::max(worst_kp, v);
    for (double v : w) worst_w = std::max(worst_w, v);
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "beta0 %.5f: max polymer sum %.3e, max cluster sum %.3e, "
                "bound a = %.2f",
                cert.beta0, worst_kp, worst_w, cert.a);
  detail = buf;
  return worst_kp <= cert.a && worst_w <= cert.a;
}

// --- 3. boundary negligibility --------------------------------------------
bool criterion_boundary(std::string& detail) {
  const auto model = ising_chain_model();
  const auto cert = find_beta0(model.potential, model.x_norm(), {0.1}, 0.0);
  ClusterExpansion engine(model);
  const double beta = cert.beta0 / 2;
  const double t = 1.0;
  const int K = 3;
  std::vector<double> per_site, per_boundary;
  for (int n : {4, 8, 16}) {
    const LatticeBox box = LatticeBox::chain(n);
    const LatticeBox outer = LatticeBox::chain(n + 8, -4);
    const double v =
        std::abs(engine.boundary_cluster_sum(box, outer, t, beta, K));
    per_site.push_back(v / n);
    per_boundary.push_back(v / static_cast<double>(box.boundary_sites().size()));
  }
  const double shrink = per_site.front() / per_site.back();
  double spread = 0;
  for (double v : per_boundary)
    spread = std::max(spread, std::abs(v - per_boundary.front()) /
                                  per_boundary.front());
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "per-site shrink x%.2f (need >= 3), per-boundary spread %.1f%% "
                "(need <= 20%%)",
                shrink, 100 * spread);
  detail = buf;
  return shrink >= 3.0 && spread <= 0.20;
}

// --- 4. Golden-Thompson ----------------------------------------------------
bool criterion_golden_thompson(std::string& detail) {
  auto gen = rng(2024);
  double min_gap = 1e300;
  std::uniform_real_distribution<double> tdist(-1.5, 1.5);
  std::uniform_real_distribution<double> bdist(0.1, 1.5);
  for (int rep = 0; rep < 100; ++rep) {
    const bool two_site = rep % 2 == 0;
    const OperatorMatrix x = random_hermitian(2, gen);
    Model model =
        two_site
            ? Model{x, Potential(2, {BaseInteraction{{Site(0), Site(1)},
                                                     random_hermitian(4, gen)}})}
            : Model{x, Potential(2, {BaseInteraction{{Site(0)},
                                                     random_hermitian(2, gen)}})};
    ExactEngine exact(model);
    const auto box = LatticeBox::chain(two_site ? 2 : 1);
    const auto gap = exact.golden_thompson_gap(box, tdist(gen), bdist(gen));
    min_gap = std::min(min_gap, gap.gap);
  }
  if (min_gap < -1e-10) {
    detail = "random gap below -1e-10";
    return false;
  }

  // Commuting instances: diagonal X and diagonal interactions.
  double max_commuting = 0;
  auto diag_gen = rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    OperatorMatrix x = OperatorMatrix::Zero(2, 2);
    x(0, 0) = d(diag_gen);
    x(1, 1) = d(diag_gen);
    OperatorMatrix pair = OperatorMatrix::Zero(4, 4);
    for (int i = 0; i < 4; ++i) pair(i, i) = d(diag_gen);
    Model model{x, Potential(2, {BaseInteraction{{Site(0), Site(1)}, pair}})};
    ExactEngine exact(model);
    const auto gap =
        exact.golden_thompson_gap(LatticeBox::chain(3), d(diag_gen), 1.0);
    max_commuting = std::max(max_commuting, std::abs(gap.gap));
  }

  ExactEngine demo(field_demo_model());
  const auto demo_gap = demo.golden_thompson_gap(LatticeBox::chain(1), 1.0, 1.0);

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "min random gap %.2e, max commuting |gap| %.2e, demo gap %.4f",
                min_gap, max_commuting, demo_gap.gap);
  detail = buf;
  return min_gap >= -1e-10 && max_commuting <= 1e-10 && demo_gap.gap >= 1e-4;
}

// --- 5. rate-function suite -------------------------------------------------
bool criterion_rate(std::string& detail) {
  bool ok = true;
  {
    LevelOne level1(free_qubit_model());
    const auto f = level1.generating_function(default_t_grid(), 0.0, 3);
    const auto rate = legendre(f, {0.0, 0.5, -0.5});
    for (std::size_t i = 0; i < rate.x_grid.size(); ++i)
      ok = check(std::abs(rate.values[i] -
                          binary_entropy_conjugate(rate.x_grid[i])) <= 1e-8,
                 detail, "binary entropy conjugate at x");
  }
  const auto model = ising_chain_model();
  const auto cert = find_beta0(model.potential, model.x_norm(), {0.1}, 0.0);
  LevelOne level1(model, {}, cert);
  const double beta = cert.beta0 / 2;
  const auto f = level1.generating_function(default_t_grid(), beta, 3);
  const double h = 1e-6;
  const double slope = (f.evaluator(h) - f.evaluator(-h)) / (2 * h);
  const auto at_typical = legendre(f, {slope});
  ok = check(at_typical.values[0] <= 1e-8 && at_typical.values[0] >= -1e-10,
             detail, "I(F'(0)) <= 1e-8");

  // Biconjugation recovers F.
  double worst = 0;
  for (double t : {-1.5, -0.6, 0.0, 0.8, 1.5})
    worst = std::max(worst, std::abs(biconjugate(f, t) - f.evaluator(t)));
  ok = check(worst <= 2e-6, detail, "biconjugation within 2e-6");

  // I~ >= I - 1e-8 on a common grid for the noncommuting demo.
  const auto demo = field_demo_model();
  LevelOne demo_level1(demo);
  ExactEngine demo_exact(demo);
  const std::vector<double> a_grid = {-0.6, -0.3, 0.0, 0.3, 0.6};
  const auto tilde = demo_level1.tilde_I(demo_exact, a_grid, 1.0,
                                         {LatticeBox::chain(1)});
  GeneratingFunction pf;
  pf.t_grid = default_t_grid(4.0, 0.05);
  for (double t : pf.t_grid)
    pf.values.push_back(
        std::real(product_state_F(Complex(t, 0), pauli_x(), pauli_z())));
  pf.evaluator = [](double t) {
    return std::real(product_state_F(Complex(t, 0), pauli_x(), pauli_z()));
  };
  const auto demo_rate = legendre(pf, a_grid);
  double min_margin = 1e300;
  for (std::size_t i = 0; i < a_grid.size(); ++i)
    min_margin = std::min(min_margin, tilde.values[i] - demo_rate.values[i]);
  ok = check(min_margin >= -1e-8, detail, "tilde I >= I - 1e-8");

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "I(F'(0)) = %.1e, biconjugation dev %.1e, min (I~ - I) = %.2e",
                at_typical.values[0], worst, min_margin);
  if (detail.empty()) detail = buf;
  return ok;
}

// --- 6. CLT trend ------------------------------------------------------------
bool criterion_clt(std::string& detail) {
  LevelOne free_level1(free_qubit_model());
  ExactEngine free_exact(free_qubit_model());
  std::vector<LatticeBox> volumes;
  for (int n : {4, 6, 8, 10, 12}) volumes.push_back(LatticeBox::chain(n));
  const auto report =
      free_level1.clt_compare(free_exact, volumes, {1.0}, 0.0, 3);
  bool decreasing = true;
  for (std::size_t i = 1; i < report.rows.size(); ++i)
    decreasing = decreasing &&
                 report.rows[i].deviation < report.rows[i - 1].deviation;

  const auto model = ising_chain_model();
  const auto cert = find_beta0(model.potential, model.x_norm(), {0.1}, 0.0);
  LevelOne level1(model, {}, cert);
  const double beta = cert.beta0 / 2;
  const double series = level1.sigma2(beta, 4, Sigma2Method::series);
  const double fd = level1.sigma2(beta, 4, Sigma2Method::finite_diff);

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "deviation strictly decreasing: %s; |series - fd| = %.2e, "
                "sigma2 = %.6f",
                decreasing ? "yes" : "no", std::abs(series - fd), series);
  detail = buf;
  return decreasing && std::abs(series - fd) <= 1e-6 && series > 0;
}

// --- 7. level-2 ---------------------------------------------------------------
bool criterion_level2(std::string& detail) {
  LevelTwo level2(free_qubit_model());
  double worst_rate = 0;
  for (int k = 1; k <= 20; ++k) {
    const double w = static_cast<double>(k) / 21.0;
    SpectralSimplexPoint mu{level2.atoms(), {1.0 - w, w}};
    const double expected =
        (1.0 - w) * std::log(2.0 * (1.0 - w)) + w * std::log(2.0 * w);
    const auto r = level2.rate2(mu, 0.0, 3);
    worst_rate = std::max(worst_rate, std::abs(r.value - expected));
  }

  double worst_contraction = 0;
  for (int i = -4; i <= 4; ++i) {
    const double x = 0.2 * i;
    const auto r = level2.contraction_check(x, 0.0, 3);
    worst_contraction =
        std::max(worst_contraction, std::abs(r.level1 - r.contracted));
  }

  const auto ising = ising_chain_model();
  LevelTwo ising_level2(ising);
  ExactEngine exact(ising);
  const auto box = LatticeBox::chain(4);
  double worst_push = 0;
  for (double beta : {0.0, 0.3}) {
    const auto types =
        ising_level2.empirical_measure_distribution(exact, box, beta);
    const auto pushed = ising_level2.pushforward_mean(types, box);
    const auto direct = exact.empirical_distribution(box, beta);
    if (pushed.atoms.size() != direct.atoms.size()) {
      detail = "pushforward atom mismatch";
      return false;
    }
    for (std::size_t i = 0; i < pushed.atoms.size(); ++i)
      worst_push =
          std::max(worst_push, std::abs(pushed.weights[i] - direct.weights[i]));
  }

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "rate dev %.2e (<=1e-6), contraction dev %.2e (<=1e-4), "
                "pushforward dev %.2e (<=1e-10)",
                worst_rate, worst_contraction, worst_push);
  detail = buf;
  return worst_rate <= 1e-6 && worst_contraction <= 1e-4 &&
         worst_push <= 1e-10;
}

// --- 8. multi-potential generalization ---------------------------------------
bool criterion_generalized(std::string& detail) {
  // n = 2 joint Taylor match to total degree 3 on a 3-site chain.
  const auto ising = ising_pair_potential();
  const Potential field(2, {BaseInteraction{{Site(0)}, pauli_x()}});
  GeneralizedExpansion general(2, {ising, field});
  const int K = 3;
  const auto box = LatticeBox::chain(3);
  const auto coeffs = general.finite_volume_coeffs(box, K);

  const OperatorMatrix h1 = hamiltonian(ising, box);
  const OperatorMatrix h2 = hamiltonian(field, box);
  auto moment = [&](int a, int b) {
    OperatorMatrix m = OperatorMatrix::Identity(8, 8);
    for (int i = 0; i < a; ++i) m = (m * h1).eval();
    for (int i = 0; i < b; ++i) m = (m * h2).eval();
    return m.trace() / 8.0;
  };
  auto fact = [](int n) { double f = 1; for (int i = 2; i <= n; ++i) f *= i; return f; };
  std::map<std::pair<int, int>, Complex> zc;
  for (int a = 0; a <= K; ++a)
    for (int b = 0; a + b <= K; ++b)
      if (a + b > 0) zc[{a, b}] = moment(a, b) / (fact(a) * fact(b));
  std::map<std::pair<int, int>, Complex> log_coeffs = zc;
  for (const auto& [k1, v1] : zc)
    for (const auto& [k2, v2] : zc) {
      const int a = k1.first + k2.first, b = k1.second + k2.second;
      if (a + b <= K) log_coeffs[{a, b}] -= 0.5 * v1 * v2;
    }
  for (const auto& [k1, v1] : zc)
    for (const auto& [k2, v2] : zc)
      for (const auto& [k3, v3] : zc) {
        const int a = k1.first + k2.first + k3.first;
        const int b = k1.second + k2.second + k3.second;
        if (a + b <= K) log_coeffs[{a, b}] += v1 * v2 * v3 / 3.0;
      }
  double worst_joint = 0;
  for (const auto& [key, value] : coeffs) {
    const auto it = log_coeffs.find({key[0], key[1]});
    const Complex expected = it == log_coeffs.end() ? Complex(0, 0) : it->second;
    worst_joint = std::max(worst_joint, std::abs(value - expected));
  }

  // Pair observable at beta = 0 against the transfer-matrix bond density.
  const auto model = ising_chain_model();
  const double z = 0.1;
  const auto pair = local_observable_F(model, {Site(0), Site(1)},
                                       kron(pauli_z(), pauli_z()),
                                       Complex(z, 0), 0.0, 6, std::nullopt,
                                       true);
  const double tm = std::log(std::cosh(z));  // largest transfer eigenvalue
  const double pair_dev = std::abs(std::real(pair.value) - tm);

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "joint-Taylor dev %.2e (<=1e-10), bond-density dev %.2e "
                "(<=1e-8)",
                worst_joint, pair_dev);
  detail = buf;
  return worst_joint <= 1e-10 && pair_dev <= 1e-8;
}

// --- 9. functional-norm proposition ------------------------------------------
bool criterion_psi_norm(std::string& detail) {
  auto gen = rng(99);
  double worst_psd = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const OperatorMatrix x = random_pd(4, gen);
    worst_psd = std::max(worst_psd, std::abs(psi_norm(x) - 1.0));
  }
  double worst_witness = 0;
  int done = 0;
  while (done < 50) {
    OperatorMatrix x = random_complex(4, gen);
    if (std::abs(x.trace()) < 0.5) continue;
    Eigen::JacobiSVD<OperatorMatrix> svd(x);
    if (svd.singularValues().minCoeff() < 1e-6) continue;
    ++done;
    const auto r = psi_norm_full(x);
    const Complex attained = (x * r.witness).trace() / x.trace();
    worst_witness = std::max(worst_witness, std::abs(std::abs(attained) - r.value));
  }
  bool traceless_throws = false;
  try {
    psi_norm(pauli_z());
  } catch (const DomainError&) {
    traceless_throws = true;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "max |norm-1| on PSD %.2e, max witness defect %.2e, "
                "traceless rejected: %s",
                worst_psd, worst_witness, traceless_throws ? "yes" : "no");
  detail = buf;
  return worst_psd <= 1e-9 && worst_witness <= 1e-9 && traceless_throws;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "cluster-expansion oracle equivalence (1D and 2D)", 60,
       criterion_oracle},
      {2, "KP certification soundness (K <= 6, t in [-2,2])", 120,
       criterion_kp},
      {3, "boundary negligibility along growing chains", 60,
       criterion_boundary},
      {4, "Golden-Thompson gap bounds", 30, criterion_golden_thompson},
      {5, "rate-function suite", 60, criterion_rate},
      {6, "CLT trend and variance routes", 120, criterion_clt},
      {7, "level-2 rate, contraction, type classes", 120, criterion_level2},
      {8, "multi-potential generalization", 120, criterion_generalized},
      {9, "functional-norm proposition", 10, criterion_psi_norm},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (seconds > criterion.budget_seconds) {
      ok = false;
      detail += " [over time budget]";
    }
    std::printf("[%s] %d %s: %s [%.1f s / %.0f s]\n", ok ? "PASS" : "FAIL",
                criterion.id, criterion.name.c_str(), detail.c_str(), seconds,
                criterion.budget_seconds);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
