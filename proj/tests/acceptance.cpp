// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails. The paper-scale NARMA comparison (criterion 11)
// runs only with --paper-scale.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "nmqrc/nmqrc.hpp"
#include "oracles.hpp"

using namespace nmqrc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ReservoirParams make_params(int n_sys, int n_env, double alpha, double beta, std::uint64_t seed, double h_sys = 0.5) {
  ReservoirParams p;
  p.n_sys = n_sys;
  p.n_env = n_env;
  p.alpha = alpha;
  p.beta = beta;
  p.h_sys = h_sys;
  p.h_env = alpha;
  p.seed = seed;
  return p;
}

ReservoirConfig make_config(double tau, int v, ObservableKind kind = ObservableKind::ZOnly) {
  ReservoirConfig c;
  c.tau = tau;
  c.v = v;
  c.observables = kind;
  return c;
}

const std::vector<std::pair<double, double>> kStmRegimes{{10.0, 0.01}, {0.01, 10.0}, {1.0, 1.0}};

// 1 ---------------------------------------------------------------------------
Outcome physics_invariants() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double worst_trace = 0.0, worst_herm = 0.0, worst_unit = 0.0, min_eig = 1.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n_sys = 1 + static_cast<int>(rng() % 4);
    const int n_env = static_cast<int>(rng() % static_cast<std::uint64_t>(7 - n_sys + 1));
    const auto [alpha, beta] = kStmRegimes[static_cast<std::size_t>(trial % 3)];
    const auto real = realize(make_params(n_sys, n_env, alpha, beta, rng()));
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const double tau = 0.05 + 5.0 * ud(rng);
    const int v = 1 + static_cast<int>(rng() % 10);
    const auto kind = trial % 2 ? ObservableKind::ZAndZZ : ObservableKind::ZOnly;
    const Reservoir res(real, make_config(tau, v, kind));
    const DensityMatrix rho(oracle::random_density(real.dim(), rng));
    DensityMatrix next = rho;
    (void)res.evolve_step(rho, ud(rng), next);
    worst_trace = std::max(worst_trace, next.trace_error());
    worst_herm = std::max(worst_herm, next.hermiticity());
    min_eig = std::min(min_eig, next.min_eigenvalue());
    const ComplexMatrix u = build_propagator(real, tau / v);
    worst_unit = std::max(worst_unit, max_abs(u.adjoint() * u - ComplexMatrix::Identity(real.dim(), real.dim())));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_trace < 1e-9 && worst_herm < 1e-10 && min_eig >= -1e-9 && worst_unit < 1e-9 && secs < 30.0;
  return {ok, "trace err " + fmt(worst_trace) + ", herm err " + fmt(worst_herm) + ", min eig " + fmt(min_eig) +
                  ", unitarity " + fmt(worst_unit) + ", " + fmt(secs) + " s"};
}

// 2 ---------------------------------------------------------------------------
Outcome oracle_equivalence() {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    // Partial trace on two qubits, both orders.
    const ComplexMatrix rho = oracle::random_density(4, rng);
    const DensityMatrix dm(rho);
    worst = std::max(worst, max_abs(partial_trace(dm, {1}).matrix() - oracle::trace_out_tail(rho, 1)));
    worst = std::max(worst, max_abs(partial_trace(dm, {0}).matrix() - oracle::trace_out_head(rho, 1)));

    // Trace norm: 2x2 closed form, and 4x4 with a known spectrum.
    const ComplexMatrix h2 = oracle::random_hermitian(2, rng);
    const auto [l0, l1] = oracle::eig2(h2);
    worst = std::max(worst, std::abs(trace_norm(h2) - (std::abs(l0) + std::abs(l1))));
    const ComplexMatrix w = oracle::expm_minus_i(oracle::random_hermitian(4, rng), 1.0);
    std::normal_distribution<double> nd;
    RealVector d(4);
    for (auto& x : d) x = nd(rng);
    const ComplexMatrix h4 = w * d.cast<Complex>().asDiagonal() * w.adjoint();
    worst = std::max(worst, std::abs(trace_norm(0.5 * (h4 + h4.adjoint())) - d.cwiseAbs().sum()));

    // Injection into qubit 0 of a two-qubit state.
    const double s = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    worst = std::max(worst, max_abs(inject_input(dm, encode_input(s), 0).matrix() -
                                    oracle::kron(oracle::encode(s), oracle::trace_out_head(rho, 1))));

    // Propagators: single-qubit closed form and two-qubit series.
    const double t = 3.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    ComplexMatrix closed = std::cos(t) * oracle::id(2) - Complex{0.0, std::sin(t)} * oracle::pauli_x();
    worst = std::max(worst, max_abs(propagator(hermitian_eig(oracle::pauli_x()), t) - closed));
    const ComplexMatrix h = oracle::random_hermitian(4, rng);
    worst = std::max(worst, max_abs(propagator(hermitian_eig(h), t) - oracle::expm_minus_i(h, t)));
  }
  return {worst < 1e-9, "max deviation " + fmt(worst) + " over 50 random cases"};
}

// 3 ---------------------------------------------------------------------------
Outcome fn_reduction() {
  double worst = 0.0;
  Rng in_rng(derive_seed(3, kInputStream));
  std::vector<double> u(100);
  for (auto& x : u) x = in_rng.uniform01();
  for (auto kind : {ObservableKind::ZOnly, ObservableKind::ZAndZZ}) {
    const auto p = make_params(4, 0, 1.0, 1.0, 3);
    const auto real = realize(p);
    const auto tr = Reservoir(real, make_config(0.5, 10, kind)).run_trajectory(u);
    oracle::ReferenceChain chain;
    chain.n = 4;
    chain.v = 10;
    chain.zz = kind == ObservableKind::ZAndZZ;
    chain.u = oracle::expm_minus_i(oracle::xx_field_hamiltonian(4, real.couplings().j_sys, p.h_sys), 0.05);
    oracle::CMat rho = oracle::CMat::Zero(16, 16);
    rho(0, 0) = 1.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const auto ref = chain.step(rho, u[k]);
      for (std::size_t c = 0; c < ref.size(); ++c)
        worst = std::max(worst, std::abs(ref[c] - tr.features.values(static_cast<Eigen::Index>(k),
                                                                      static_cast<Eigen::Index>(c))));
    }
  }
  return {worst < 1e-10, "max feature deviation " + fmt(worst) + " over 100 steps"};
}

// 4 ---------------------------------------------------------------------------
Outcome beta_zero_decoupling() {
  const auto p = make_params(4, 3, 1.0, 0.0, 5);
  const auto coupled = realize(p);
  auto pf = p;
  pf.n_env = 0;
  const auto bare = build_hamiltonian(pf, CouplingSet{coupled.couplings().j_sys, {}, {}});
  const auto u = gen_uniform_inputs(100, 0.0, 1.0, 5);
  double worst = 0.0;
  for (auto kind : {ObservableKind::ZOnly, ObservableKind::ZAndZZ}) {
    const auto cfg = make_config(0.5, 10, kind);
    const auto a = Reservoir(coupled, cfg).run_trajectory(u);
    const auto b = Reservoir(bare, cfg).run_trajectory(u);
    worst = std::max(worst, (a.features.values - b.features.values).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-8, "max feature deviation " + fmt(worst) + " over 100 steps"};
}

// 5 ---------------------------------------------------------------------------
Outcome narma_generator() {
  double worst_fp = 0.0;
  for (int n = 1; n <= 50; ++n) {
    const auto y = narma_series(std::vector<double>(201, 0.0), n);
    worst_fp = std::max(worst_fp, std::abs(y[200] - 0.144335));
  }
  int diverged = 0;
  double peak = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto u = gen_uniform_inputs(5000, 0.0, 0.5, input_seed(seed));
    for (int n = 1; n <= 50; ++n) {
      try {
        for (double v : narma_series(u, n)) peak = std::max(peak, std::abs(v));
      } catch (const NumericalError&) {
        ++diverged;
      }
    }
  }
  return {worst_fp < 1e-4 && diverged == 0, "fixed-point error at step 200 " + fmt(worst_fp) + ", " +
                                                std::to_string(diverged) + " divergent series, peak |y| " + fmt(peak)};
}

// 6 ---------------------------------------------------------------------------
double penrose_residual(const RealMatrix& a, bool relative) {
  const RealMatrix p = pseudoinverse(a);
  const RealMatrix ap = a * p;
  const RealMatrix pa = p * a;
  const double na = relative ? a.norm() : 1.0;
  const double np = relative ? p.norm() : 1.0;
  const double np_ap = relative ? ap.norm() : 1.0;
  const double np_pa = relative ? pa.norm() : 1.0;
  return std::max({(ap * a - a).norm() / na, (pa * p - p).norm() / np, (ap.transpose() - ap).norm() / np_ap,
                   (pa.transpose() - pa).norm() / np_pa});
}

Outcome readout_exactness() {
  const auto real = realize(make_params(4, 3, 1.0, 1.0, 9));
  const Reservoir res(real, make_config(0.5, 10));
  const auto u = gen_uniform_inputs(600, 0.0, 1.0, 9);
  const RealMatrix x = res.run_trajectory(u).features.values;
  const SplitSpec split{100, 400, 100};
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  RealVector w(x.cols());
  for (auto& v : w) v = nd(rng);
  const RealVector y = x * w;
  const auto d = slice_train_val(x, std::vector<double>(y.data(), y.data() + y.size()), split);
  const auto fit = fit_linear(d.x_train, d.y_train);
  const double c = squared_correlation(d.y_val, predict(d.x_val, fit)).value;

  // Unit-scale random matrices: absolute residuals. Reservoir features are
  // nearly collinear, so their pseudoinverse has entries far above one and
  // each residual is taken relative to the norm of the matrix it reproduces.
  double penrose_abs = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    RealMatrix a(60, 12);
    for (auto& v : a.reshaped()) v = nd(rng);
    if (trial % 2) a.col(11) = a.col(0) - 2.0 * a.col(3);
    penrose_abs = std::max(penrose_abs, penrose_residual(a, false));
  }
  const double penrose_rel = penrose_residual(d.x_train, true);
  // Rounding floor of the identity check itself: eps times the retained
  // condition number. Reported so a failure can be told apart from a bad SVD.
  const Eigen::JacobiSVD<RealMatrix> svd(d.x_train);
  const RealVector& sv = svd.singularValues();
  double s_min = sv(0);
  for (double s : sv)
    if (s > kDefaultRcond * sv(0)) s_min = s;
  const double floor = std::numeric_limits<double>::epsilon() * sv(0) / s_min;
  return {std::abs(c - 1.0) < 1e-10 && penrose_abs < 1e-8 && penrose_rel < 1e-8,
          "C = 1 - " + fmt(1.0 - c) + ", Penrose residual " + fmt(penrose_abs) + " (random), " + fmt(penrose_rel) +
              " relative (reservoir features, rounding floor eps*cond " + fmt(floor) + ")"};
}

// 7 ---------------------------------------------------------------------------
Outcome stm_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.task = Task::Stm;
  cfg.regimes = {*regime_preset(Task::Stm, "markov"), *regime_preset(Task::Stm, "non_markov")};
  cfg.v = 20;
  cfg.split = SplitSpec{500, 1500, 500};
  cfg.seeds = {0, 1, 2, 3, 4};
  cfg.tau_d_max = 20;
  const auto results = run_stm(cfg);
  double markov = 0.0, non_markov = 0.0;
  for (const auto& r : results) {
    if (r.axis < 8 || r.axis > 20) continue;
    (r.regime == "markov" ? markov : non_markov) += r.mean;
  }
  return {non_markov > markov, "sum of mean C over delays 8..20: non-Markov " + fmt(non_markov) + ", Markov " +
                                   fmt(markov) + ", " + fmt(seconds_since(t0)) + " s"};
}

// 8, 9 ------------------------------------------------------------------------
struct EspRun {
  std::vector<EspSummary> markov, non_markov;
  double secs = 0.0;
};

EspRun esp_runs() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.task = Task::Esp;
  cfg.v = 50;
  cfg.split = SplitSpec{1000, 1000, 500};
  cfg.window_from = 1500;
  cfg.window_to = 2500;
  cfg.seeds = {0, 1, 2};
  EspRun run;
  cfg.regimes = {*regime_preset(Task::Esp, "markov")};
  run.markov = run_esp(cfg);
  cfg.regimes = {*regime_preset(Task::Esp, "non_markov")};
  run.non_markov = run_esp(cfg);
  run.secs = seconds_since(t0);
  return run;
}

Outcome esp_window(const EspRun& run) {
  bool ok = true;
  std::ostringstream os;
  for (std::size_t i = 0; i < run.markov.size(); ++i) {
    const double m = run.markov[i].window.mean_sqnorm;
    const double nm = run.non_markov[i].window.mean_sqnorm;
    ok = ok && m < 1e-3 && nm >= 10.0 * m;
    os << (i ? "; " : "") << "seed " << run.markov[i].seed << ": Markov " << fmt(m) << ", non-Markov " << fmt(nm);
  }
  os << ", " << fmt(run.secs) << " s";
  return {ok, os.str()};
}

Outcome backflow_ordering(const EspRun& run) {
  bool ok = true;
  std::ostringstream os;
  for (std::size_t i = 0; i < run.markov.size(); ++i) {
    const int m = run.markov[i].backflow_sys.count;
    const int nm = run.non_markov[i].backflow_sys.count;
    ok = ok && nm > m;
    os << (i ? "; " : "") << "seed " << run.markov[i].seed << ": Markov " << m << ", non-Markov " << nm;
  }
  return {ok, os.str()};
}

// 10 --------------------------------------------------------------------------
Outcome injection_contractivity() {
  double worst_growth = -1.0, worst_drift = 0.0, worst_pipeline = 0.0;
  for (const auto& [alpha, beta] : kStmRegimes) {
    const auto real = realize(make_params(4, 3, alpha, beta, 11));
    const int v = 5;
    const double dt = 0.5 / v;
    const Reservoir res(real, make_config(0.5, v));
    const auto u = gen_uniform_inputs(150, 0.0, 1.0, 11);
    DensityMatrix a = DensityMatrix::maximally_mixed(7);
    DensityMatrix b = DensityMatrix::basis_state(7);
    for (double s : u) {
      const double before = trace_distance(a, b);
      DensityMatrix ia = res.inject(a, s);
      DensityMatrix ib = res.inject(b, s);
      const double injected = trace_distance(ia, ib);
      worst_growth = std::max(worst_growth, injected - before);
      for (int node = 0; node < v; ++node) {
        ia = res.advance(ia, dt);
        ib = res.advance(ib, dt);
        worst_drift = std::max(worst_drift, std::abs(trace_distance(ia, ib) - injected));
      }
      DensityMatrix na = a, nb = b;
      (void)res.evolve_step(a, s, na);
      (void)res.evolve_step(b, s, nb);
      worst_pipeline = std::max({worst_pipeline, max_abs(na.matrix() - ia.matrix()), max_abs(nb.matrix() - ib.matrix())});
      a = std::move(na);
      b = std::move(nb);
    }
  }
  return {worst_growth <= 1e-10 && worst_drift <= 1e-10 && worst_pipeline <= 1e-10,
          "max growth at injection " + fmt(worst_growth) + ", max drift across sub-steps " + fmt(worst_drift) +
              ", evolve_step vs stepwise " + fmt(worst_pipeline)};
}

// 11 --------------------------------------------------------------------------
Outcome narma_paper_scale() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.task = Task::Narma;
  cfg.n_sys = 5;
  cfg.n_env = 2;
  cfg.regimes = default_regimes(Task::Narma);
  cfg.taus = {5.0};
  cfg.v = 20;
  cfg.observables = ObservableKind::ZAndZZ;
  cfg.orders = {20, 30};
  cfg.fn_baseline = false;
  apply_scale(cfg, Scale::Paper);
  const auto results = run_narma(cfg);
  bool ok = true;
  std::ostringstream os;
  for (int order : cfg.orders) {
    double best_other = -1.0, nm = -1.0;
    for (const auto& r : results) {
      if (static_cast<int>(r.axis) != order) continue;
      if (r.regime == "non_markov") nm = r.mean;
      else best_other = std::max(best_other, r.mean);
      os << "n=" << order << " " << r.regime << " " << fmt(r.mean) << "; ";
    }
    ok = ok && nm > best_other;
  }
  os << fmt(seconds_since(t0)) << " s";
  return {ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  bool paper_scale = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--paper-scale") == 0) paper_scale = true;

  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << name << " (" << o.detail << ")"
              << std::endl;
  };

  report(1, "physics invariants", physics_invariants);
  report(2, "oracle equivalence at 1-2 qubits", oracle_equivalence);
  report(3, "environment-free reduction", fn_reduction);
  report(4, "zero-coupling decoupling", beta_zero_decoupling);
  report(5, "NARMA generator", narma_generator);
  report(6, "readout exactness", readout_exactness);
  report(7, "STM ordering", stm_ordering);
  EspRun esp;
  std::string esp_error;
  try {
    esp = esp_runs();
  } catch (const std::exception& e) {
    esp_error = e.what();
  }
  auto esp_guard = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!esp_error.empty()) return {false, "exception: " + esp_error};
      return fn(esp);
    };
  };
  report(8, "echo-state window", esp_guard(esp_window));
  report(9, "backflow ordering", esp_guard(backflow_ordering));
  report(10, "injection contractivity", injection_contractivity);
  if (paper_scale) {
    report(11, "paper-scale NARMA regime ordering", narma_paper_scale);
  } else {
    std::cout << "SKIP  criterion 11: paper-scale NARMA regime ordering (run with --paper-scale)" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
