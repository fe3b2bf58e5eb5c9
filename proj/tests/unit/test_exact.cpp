#include <doctest.h>

#include <cmath>

#include "helpers.hpp"

using namespace ldspin;
using namespace ldspin::testing;

TEST_CASE("gibbs state basics") {
  ExactEngine exact(ising_chain_model());
  const auto box = LatticeBox::chain(3);
  const auto flat = exact.gibbs_state(box, 0.0);
  CHECK((flat.rho - OperatorMatrix::Identity(8, 8) / 8.0).norm() < 1e-14);

  // Single site with a field term: diag(e^{-beta}, e^{beta}) normalized.
  ExactEngine field(field_demo_model());
  const auto rho = field.gibbs_state(LatticeBox::chain(1), 1.0).rho;
  const double z = 2.0 * std::cosh(1.0);
  CHECK(std::abs(rho(0, 0) - std::exp(-1.0) / z) < 1e-12);
  CHECK(std::abs(rho(1, 1) - std::exp(1.0) / z) < 1e-12);

  auto gen = rng(31);
  ExactEngine random_engine(
      Model{random_hermitian(2, gen),
            Potential(2, {BaseInteraction{{Site(0), Site(1)},
                                          random_hermitian(4, gen)}})});
  const auto state = random_engine.gibbs_state(LatticeBox::chain(4), 0.7);
  CHECK(std::abs(state.rho.trace() - Complex(1, 0)) < 1e-12);
}

TEST_CASE("empirical distribution at infinite temperature is binomial") {
  ExactEngine exact(free_qubit_model());
  const auto single = exact.empirical_distribution(LatticeBox::chain(1), 0.0);
  REQUIRE(single.atoms.size() == 2);
  CHECK(single.weights[0] == doctest::Approx(0.5));

  const int n = 5;
  const auto d = exact.empirical_distribution(LatticeBox::chain(n), 0.0);
  REQUIRE(d.atoms.size() == n + 1);
  for (int k = 0; k <= n; ++k) {
    const double mean = (2.0 * k - n) / n;
    CHECK(d.atoms[k] == doctest::Approx(mean).epsilon(1e-12));
    const double binom = std::tgamma(n + 1.0) /
                         (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0)) /
                         std::pow(2.0, n);
    CHECK(d.weights[k] == doctest::Approx(binom).epsilon(1e-10));
  }
}

TEST_CASE("empirical distribution mean matches the state expectation") {
  ExactEngine exact(ising_chain_model());
  const auto box = LatticeBox::chain(4);
  const double beta = 0.3;
  const auto d = exact.empirical_distribution(box, beta);
  const auto rho = exact.gibbs_state(box, beta).rho;
  OperatorMatrix avg = OperatorMatrix::Zero(16, 16);
  for (int p = 0; p < 4; ++p)
    add_embedded(avg, pauli_z(), {p}, 2, Complex(0.25, 0));
  const double mean = std::real((rho * avg).trace());
  CHECK(d.mean() == doctest::Approx(mean).epsilon(1e-10));
}

TEST_CASE("finite_F free boundary") {
  ExactEngine exact(ising_chain_model());
  const auto box = LatticeBox::chain(4);
  CHECK(exact.finite_F(box, 0.0, 0.4) == doctest::Approx(0.0).epsilon(1e-12));

  // Infinite temperature factorizes per site.
  for (double t : {-0.7, 0.3, 1.1})
    CHECK(exact.finite_F(box, t, 0.0) ==
          doctest::Approx(std::log(std::cosh(t))).epsilon(1e-12));

  // Commuting Ising chain against the classical transfer-matrix oracle.
  const double beta = 0.35;
  for (int n : {2, 4, 6})
    for (double t : {-0.8, 0.5}) {
      const double oracle = ising_chain_log_ratio(n, t, -beta) / n;
      CHECK(exact.finite_F(LatticeBox::chain(n), t, beta) ==
            doctest::Approx(oracle).epsilon(1e-10));
    }
}

TEST_CASE("finite_F curves are convex with the state mean as slope") {
  ExactEngine exact(ising_chain_model());
  const auto box = LatticeBox::chain(5);
  const double beta = 0.3;
  std::vector<double> grid;
  for (int i = -20; i <= 20; ++i) grid.push_back(0.1 * i);
  const auto curve = exact.finite_F_curve(box, grid, beta);
  for (std::size_t i = 1; i + 1 < curve.values.size(); ++i) {
    const double second =
        curve.values[i + 1] - 2 * curve.values[i] + curve.values[i - 1];
    CHECK(second >= -1e-9);
  }
  // Supporting slope at t = 0 equals the mean of the empirical average.
  const double h = 1e-5;
  const double slope =
      (exact.finite_F(box, h, beta) - exact.finite_F(box, -h, beta)) / (2 * h);
  const double mean = exact.empirical_distribution(box, beta).mean();
  CHECK(slope == doctest::Approx(mean).epsilon(1e-8));
}

TEST_CASE("free and embedded boundary conditions approach each other") {
  // Mixed pair term, so straddling bonds neither vanish nor average out
  // against the tilt.
  const OperatorMatrix id2 = OperatorMatrix::Identity(2, 2);
  const OperatorMatrix pair =
      kron(pauli_z(), pauli_z()) +
      0.4 * (kron(pauli_x(), id2) + kron(id2, pauli_x())).eval();
  ExactEngine exact(
      Model{pauli_z(), Potential(2, {BaseInteraction{{Site(0), Site(1)}, pair}})});
  const double beta = 0.25, t = 0.8;
  double prev_gap = -1;
  for (int n : {2, 4, 6}) {
    const LatticeBox box = LatticeBox::chain(n);
    const LatticeBox outer = LatticeBox::chain(n + 2, -1);
    const double gap = std::abs(exact.finite_F(box, t, beta) -
                                exact.finite_F_embedded(box, outer, t, beta));
    // Boundary cost per site shrinks along the growing chain.
    if (prev_gap >= 0) CHECK(gap < prev_gap);
    prev_gap = gap;
    CHECK(gap <= 8.0 * beta / n);  // O(|boundary|/|volume|)
  }
}

TEST_CASE("tilted pressure basics") {
  ExactEngine exact(ising_chain_model());
  const auto box = LatticeBox::chain(3);
  CHECK(exact.tilted_pressure(box, 0.0, 0.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  for (double h : {-0.9, 0.4})
    CHECK(exact.tilted_pressure(box, h, 0.0) ==
          doctest::Approx(std::log(2.0 * std::cosh(h))).epsilon(1e-12));
  // Convex in h.
  const double beta = 0.5;
  for (double h : {-0.6, 0.0, 0.7}) {
    const double step = 1e-3;
    const double second = exact.tilted_pressure(box, h + step, beta) -
                          2 * exact.tilted_pressure(box, h, beta) +
                          exact.tilted_pressure(box, h - step, beta);
    CHECK(second >= -1e-9);
  }
}

TEST_CASE("solve_tilt inverts the tilted expectation") {
  ExactEngine exact(free_qubit_model());
  const auto box = LatticeBox::chain(3);
  // beta = 0, X = sigma_z: expectation is -tanh(h).
  const double h = exact.solve_tilt(0.5, box, 0.0);
  CHECK(h == doctest::Approx(-std::atanh(0.5)).epsilon(1e-8));

  // The value typical at h = 0 solves to h = 0.
  ExactEngine ising(ising_chain_model());
  const double beta = 0.4;
  const auto d = ising.empirical_distribution(box, beta);
  CHECK(ising.solve_tilt(d.mean(), box, beta) ==
        doctest::Approx(0.0).epsilon(1e-8));

  CHECK_THROWS_AS(exact.solve_tilt(1.0, box, 0.0), DomainError);
  CHECK_THROWS_AS(exact.solve_tilt(-1.2, box, 0.0), DomainError);
}

TEST_CASE("tilde_F matches the tilted-pressure difference and commuting F") {
  ExactEngine exact(ising_chain_model());
  const auto box = LatticeBox::chain(4);
  const double beta = 0.3;
  CHECK(exact.tilde_F(box, 0.0, beta) == doctest::Approx(0.0).epsilon(1e-12));
  // X = sigma_z commutes with the Ising Hamiltonian: F~ = F exactly.
  for (double t : {-0.7, 0.2, 1.0})
    CHECK(exact.tilde_F(box, t, beta) ==
          doctest::Approx(exact.finite_F(box, t, beta)).epsilon(1e-10));

  ExactEngine free(free_qubit_model());
  for (double t : {-0.5, 0.9})
    CHECK(free.tilde_F(box, t, 0.0) ==
          doctest::Approx(std::log(std::cosh(t))).epsilon(1e-12));
}

TEST_CASE("golden-thompson gap on the sigma_x/sigma_z demo") {
  ExactEngine exact(field_demo_model());
  const auto box = LatticeBox::chain(1);
  const auto gap = exact.golden_thompson_gap(box, 1.0, 1.0);
  // F = log(Tr e^{sx} e^{-sz} / Tr e^{-sz}) = log(cosh(1));
  // F~ = log(Tr e^{sx - sz} / Tr e^{-sz}) = log(cosh(sqrt 2)/cosh 1).
  CHECK(gap.f == doctest::Approx(std::log(std::cosh(1.0))).epsilon(1e-12));
  CHECK(gap.tilde_f ==
        doctest::Approx(std::log(std::cosh(std::sqrt(2.0)) / std::cosh(1.0)))
            .epsilon(1e-12));
  CHECK(gap.gap > 1e-4);
}

TEST_CASE("golden-thompson gap is nonnegative on random small models") {
  auto gen = rng(32);
  for (int rep = 0; rep < 20; ++rep) {
    const OperatorMatrix x = random_hermitian(2, gen);
    const OperatorMatrix pair = random_hermitian(4, gen);
    Model model{x, Potential(2, {BaseInteraction{{Site(0), Site(1)}, pair}})};
    ExactEngine exact(model);
    std::uniform_real_distribution<double> tdist(-1.0, 1.0);
    const auto gap = exact.golden_thompson_gap(LatticeBox::chain(2),
                                               tdist(gen), 0.5 + 0.5 * tdist(gen) * tdist(gen));
    CHECK(gap.gap >= -1e-10);
  }
}

TEST_CASE("clt characteristic function") {
  ExactEngine exact(free_qubit_model());
  const auto box = LatticeBox::chain(6);
  CHECK(std::abs(exact.clt_charfn(box, 0.0, 0.0) - Complex(1, 0)) < 1e-12);
  for (double t : {0.5, 1.0, 2.0}) {
    const Complex expected =
        std::pow(std::cos(t / std::sqrt(6.0)), 6);
    CHECK(std::abs(exact.clt_charfn(box, t, 0.0) - expected) < 1e-12);
    CHECK(std::abs(exact.clt_charfn(box, t, 0.0)) <= 1.0 + 1e-12);
  }

  // Interacting case keeps |phi| <= 1 and phi(0) = 1.
  ExactEngine ising(ising_chain_model());
  CHECK(std::abs(ising.clt_charfn(LatticeBox::chain(4), 0.0, 0.4) -
                 Complex(1, 0)) < 1e-12);
  CHECK(std::abs(ising.clt_charfn(LatticeBox::chain(4), 1.3, 0.4)) <=
        1.0 + 1e-12);
}

TEST_CASE("chi2 truncated correlations") {
  ExactEngine free(free_qubit_model());
  CHECK(free.chi2(LatticeBox::chain(5), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // At infinite temperature only the central site contributes: the
  // trace-state variance of X.
  auto gen = rng(33);
  const OperatorMatrix x = random_hermitian(2, gen);
  ExactEngine random_model(
      Model{x, Potential(2, {BaseInteraction{{Site(0), Site(1)},
                                             random_hermitian(4, gen)}})});
  const double tr = std::real(x.trace()) / 2.0;
  const double tr2 = std::real((x * x).trace()) / 2.0;
  CHECK(random_model.chi2(LatticeBox::chain(4), 0.0) ==
        doctest::Approx(tr2 - tr * tr).epsilon(1e-10));

  // Small beta: chi2 approaches F''(0) = (1/n) sum_{ij} cov(X_i, X_j),
  // up to the boundary asymmetry of the center-site covariance sum.
  ExactEngine ising(ising_chain_model());
  const auto box = LatticeBox::chain(8);
  const double beta = 0.02;
  const double h = 1e-3;
  const double second = (ising.finite_F(box, h, beta) -
                         2 * ising.finite_F(box, 0.0, beta) +
                         ising.finite_F(box, -h, beta)) /
                        (h * h);
  CHECK(ising.chi2(box, beta) == doctest::Approx(second).epsilon(1e-2));
}

TEST_CASE("dimension cap is enforced") {
  ExactEngine exact(ising_chain_model(), 256);
  CHECK_THROWS_AS(exact.gibbs_state(LatticeBox::chain(9), 0.5), CapError);
  CHECK_NOTHROW(exact.gibbs_state(LatticeBox::chain(8), 0.5));
}
