// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <unistd.h>

#include "oracles/residue_oracle.hpp"
#include "oracles/transfer_matrix.hpp"
#include "tsqed/absorber.hpp"
#include "tsqed/atomic.hpp"
#include "tsqed/propagators.hpp"
#include "tsqed/runner.hpp"
#include "tsqed/transactions.hpp"

using namespace tsqed;
namespace fs = std::filesystem;

namespace
{

struct Outcome
{
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string &what)
  {
    if (!ok)
    {
      pass = false;
    }
    detail += (detail.empty() ? "" : "; ") + what + (ok ? "" : " [x]");
  }
};

std::string fmt(const char *f, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void criterion(int id, const char *name, double budget_s, const std::function<Outcome()> &body)
{
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try
  {
    out = body();
  }
  catch (const std::exception &e)
  {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_s > 0.0)
  {
    out.require(secs < budget_s, "runtime " + fmt("%.2f", secs) + " s < " + fmt("%g", budget_s) + " s");
  }
  std::printf("%s %d %s: %s\n", out.pass ? "PASS" : "FAIL", id, name, out.detail.c_str());
  std::fflush(stdout);
  failures += out.pass ? 0 : 1;
}

using cplx = std::complex<double>;
using propagators::PropagatorKind;

Outcome decomposition()
{
  Outcome out;
  struct G
  {
    double sigma, t0, x0, n;
  };
  const std::vector<G> suite{{1.0, 0.0, 0.0, 1.0},  {0.6, 0.0, 0.0, 1.0},  {1.5, 0.0, 0.0, 1.0},
                             {2.0, 0.5, 0.0, 1.0},  {1.0, -1.2, 0.3, 2.0}, {0.8, 0.0, 1.5, 1.0},
                             {1.2, 2.0, -0.7, 0.5}, {1.0, 0.0, 3.0, 1.0},  {0.7, -0.4, 0.9, 3.0},
                             {1.8, 1.0, 1.0, 1.0}};
  const propagators::EpsilonSchedule schedule(0.1, 0.1, 4);
  double worst = 0.0;
  bool monotone = true;
  for (const auto &g : suite)
  {
    const auto f = propagators::TestFunction::gaussian(g.t0, g.x0, g.sigma, g.n);
    const auto r = propagators::verify_decomposition(f, schedule);
    worst = std::max(worst, r.max_residual());
    monotone = monotone && r.extrapolated_non_increasing();
  }
  out.require(worst < 1e-6, "max fixed-eps residual " + fmt("%.2e", worst) + " < 1e-6 over 10 Gaussians");
  out.require(monotone, "extrapolated residual non-increasing over 5-point schedule");
  return out;
}

Outcome pole_prescriptions()
{
  Outcome out;
  const PropagatorKind kinds[] = {PropagatorKind::Retarded, PropagatorKind::Advanced,
                                  PropagatorKind::TimeSymmetric, PropagatorKind::Feynman};
  const double ks[] = {0.3, 1.0, 2.5, -1.7};
  const double ts[] = {-2.2, -0.6, 0.4, 1.5707963267948966, 3.3};
  const double eps = 1e-2;
  propagators::ContourConfig contour;
  contour.epsilon = eps;
  double worst = 0.0;
  int points = 0;
  for (auto kind : kinds)
  {
    for (double k : ks)
    {
      for (double t : ts)
      {
        const cplx num = propagators::fixed_k_time_propagator(kind, k, t, contour);
        const cplx ref = oracle::residue_fixed_k(kind, k, t, eps);
        // Causal zeros are compared against the natural scale 1/(2|k|).
        const double scale = std::max(std::abs(ref), 0.5 / std::abs(k));
        worst = std::max(worst, std::abs(num - ref) / scale);
        ++points;
      }
    }
  }
  out.require(points == 80, std::to_string(points) + " (kind, k, t) points");
  out.require(worst < 5e-7, "max relative deviation " + fmt("%.2e", worst) + " (6 significant figures)");
  return out;
}

Outcome cancellation()
{
  Outcome out;
  const absorber::Emitter emitter{0.0, 1.0, 1.0};
  const absorber::SlabConfig slab{};
  const auto layout = absorber::mirror_slabs(emitter, slab);
  const auto s = absorber::solve_absorber_response(emitter, layout);
  const auto r = absorber::cancellation_report(s, absorber::default_probe(emitter, slab));

  std::vector<oracle::TmElement> right;
  for (const auto &a : layout)
  {
    if (a.position > emitter.position)
    {
      right.push_back({a.position, a.gamma, 0.0});
    }
  }
  oracle::TransferMatrix tm(emitter.omega, right);
  const double transmission = std::abs(tm.solve_incident());

  out.require(layout.size() == 100, std::to_string(layout.size()) + " absorbers");
  out.require(transmission < 1e-3, "slab transmission (transfer matrix) " + fmt("%.2e", transmission));
  out.require(r.retarded_gain >= 0.99 && r.retarded_gain <= 1.01,
              "retarded_gain " + fmt("%.5f", r.retarded_gain));
  out.require(r.advanced_residual < 1e-2, "advanced_residual " + fmt("%.2e", r.advanced_residual));
  const double balance = r.energy_absorbed / r.energy_emitted;
  const double vs_reference = r.energy_emitted / r.reference_power;
  out.require(std::abs(balance - 1.0) < 0.01, "absorbed/emitted " + fmt("%.5f", balance));
  out.require(std::abs(vs_reference - 1.0) < 0.01, "emitted/retarded power " + fmt("%.5f", vs_reference));

  absorber::SlabConfig sweep = slab;
  const int steps = 10;
  double previous = INFINITY;
  bool monotone = true;
  for (int i = 0; i < steps; ++i)
  {
    sweep.gamma_max = 0.01 * std::pow(28.0, static_cast<double>(i) / (steps - 1));
    const auto sol = absorber::solve_absorber_response(emitter, absorber::mirror_slabs(emitter, sweep));
    const double res = absorber::cancellation_report(sol, absorber::default_probe(emitter, sweep)).advanced_residual;
    monotone = monotone && res <= previous;
    previous = res;
  }
  out.require(monotone, std::to_string(steps) + "-point opacity sweep monotone");
  return out;
}

Outcome free_field()
{
  Outcome out;
  const absorber::Emitter emitter{0.0, 1.0, 1.0};
  const absorber::FieldGrid grid{-12.0, 12.0, 2401};
  const auto bare = absorber::free_field_component(absorber::solve_absorber_response(emitter, {}), grid);
  const auto tight = absorber::free_field_component(
      absorber::solve_absorber_response(emitter, absorber::mirror_slabs(emitter, {})), grid);
  out.require(bare.max_residual < 1e-6, "bare residual " + fmt("%.2e", bare.max_residual) + " over " +
                                            std::to_string(bare.checked_points) + " points");
  out.require(tight.max_residual < 1e-6, "light-tight residual " + fmt("%.2e", tight.max_residual) +
                                             " over " + std::to_string(tight.checked_points) + " points");
  return out;
}

transactions::Scenario weighted_scenario()
{
  transactions::Scenario s;
  s.emitter_id = "A";
  s.offer_energy = 0.375;
  s.alpha = 1.0 / 137.036;
  s.matrix_element_sq = 1.0;
  s.absorbers = {{"B1", 0.375, 0.25}, {"B2", 0.375, 0.5}, {"B3", 0.375, 0.25}};
  return s;
}

Outcome transaction_statistics()
{
  Outcome out;
  const auto s = weighted_scenario();
  const std::uint64_t n = 1000000;
  const auto stats = transactions::run_trials(s, n, 20260101, 4);
  const double p = s.alpha;
  const double z = (static_cast<double>(stats.real_count) - n * p) / std::sqrt(n * p * (1 - p));
  out.require(std::abs(z) < 4.0, "Real fraction z-score " + fmt("%.2f", z));
  out.require(stats.ledger.total_units() == 0, "ledger total " + std::to_string(stats.ledger.total_units()));

  // ~1.4e7 trials give the 1e5 Real outcomes for the selection test.
  const auto big = transactions::run_trials(s, 14000000, 7, 8);
  const double expect[] = {0.25, 0.5, 0.25};
  double chi2 = 0.0;
  for (int j = 0; j < 3; ++j)
  {
    const double e = expect[j] * big.real_count;
    const double d = static_cast<double>(big.per_absorber_counts[j]) - e;
    chi2 += d * d / e;
  }
  const double critical = boost::math::quantile(boost::math::chi_squared(2.0), 0.999);
  out.require(big.real_count >= 100000, std::to_string(big.real_count) + " Real outcomes");
  out.require(chi2 < critical, "chi2 " + fmt("%.3f", chi2) + " < " + fmt("%.3f", critical));
  out.require(big.ledger.total_units() == 0, "ledger conserved over 1.4e7 trials");
  return out;
}

Outcome energy_shift()
{
  Outcome out;
  using atomic::AtomicLevel;
  const std::vector<AtomicLevel> basis{AtomicLevel::parse("1s")};
  const auto level = AtomicLevel::parse("2p");
  const auto golden = atomic::decay_rate_golden_rule(level, basis);
  const auto shift = atomic::self_energy(level, basis);
  const double dev = std::abs(shift.gamma - golden.gamma_au) / golden.gamma_au;
  out.require(dev < 0.01, "Gamma(2p) vs golden rule " + fmt("%.1e", dev));

  const std::vector<AtomicLevel> upper{AtomicLevel::parse("2p"), AtomicLevel::parse("3p")};
  const auto ground = atomic::self_energy(AtomicLevel::parse("1s"), upper);
  out.require(std::abs(ground.gamma) <= 1e-12 * golden.gamma_au, "Gamma(1s) " + fmt("%g", ground.gamma));

  std::vector<double> logs;
  std::vector<double> shifts;
  double gmin = INFINITY;
  double gmax = 0.0;
  for (double cutoff : {1e3, 2e3, 4e3, 1e4})
  {
    atomic::SelfEnergyConfig cfg;
    cfg.cutoff = cutoff;
    const auto r = atomic::self_energy(level, basis, cfg);
    logs.push_back(std::log(cutoff));
    shifts.push_back(r.real_part);
    gmin = std::min(gmin, r.gamma);
    gmax = std::max(gmax, r.gamma);
  }
  out.require((gmax - gmin) / gmax < 1e-3, "Gamma spread over a decade of cutoff " + fmt("%.1e", (gmax - gmin) / gmax));

  // Least-squares a + b ln(cutoff); residual relative to the fitted variation.
  const double n = static_cast<double>(logs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < logs.size(); ++i)
  {
    sx += logs[i];
    sy += shifts[i];
    sxx += logs[i] * logs[i];
    sxy += logs[i] * shifts[i];
  }
  const double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double a = (sy - b * sx) / n;
  double worst = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i)
  {
    worst = std::max(worst, std::abs(shifts[i] - a - b * logs[i]));
  }
  const double rel = worst / std::abs(b * (logs.back() - logs.front()));
  out.require(rel < 0.05, "a + b ln(cutoff) fit residual " + fmt("%.1e", rel));
  return out;
}

Outcome consistency()
{
  Outcome out;
  const std::vector<atomic::AtomicLevel> basis{atomic::AtomicLevel::parse("1s")};
  const auto level = atomic::AtomicLevel::parse("2p");
  atomic::CrosscheckConfig cfg;
  cfg.threads = 8;
  const auto small = atomic::transactional_decay_crosscheck(level, basis, 100000, 1, cfg);
  const auto large = atomic::transactional_decay_crosscheck(level, basis, 1000000, 2, cfg);
  out.require(std::abs(small.relative_deviation) < 0.05,
              "1e5 trials deviation " + fmt("%.2e", small.relative_deviation));
  // The statistical error must scale as 1/sqrt(N) and the 1e6 deviation must
  // sit inside it.
  const double ratio = small.standard_error / large.standard_error;
  out.require(std::abs(ratio / std::sqrt(10.0) - 1.0) < 0.05, "error ratio " + fmt("%.3f", ratio) + " ~ sqrt(10)");
  const double z = (large.fitted_rate - large.gamma_reference) / large.standard_error;
  out.require(std::abs(z) < 4.0, "1e6 trials deviation " + fmt("%.2e", large.relative_deviation) +
                                     " (" + fmt("%.2f", z) + " sigma)");
  out.require(std::abs(large.relative_deviation) < 4.0 * small.standard_error / small.gamma_reference / std::sqrt(10.0),
              "1e6 deviation within 4/sqrt(10) of the 1e5 error");
  return out;
}

Outcome reproducibility()
{
  Outcome out;
  const fs::path dir = fs::temp_directory_path() / ("tsqed_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto scenario = (dir / "scenario.json").string();
  {
    std::FILE *f = std::fopen(scenario.c_str(), "w");
    std::fputs(R"({"emitter": "A", "offer_energy": 0.375, "absorbers": [)"
               R"({"id": "B1", "energy": 0.375, "weight": 0.25},)"
               R"({"id": "B2", "energy": 0.375, "weight": 0.5},)"
               R"({"id": "B3", "energy": 0.375, "weight": 0.25}]})",
               f);
    std::fclose(f);
  }
  auto run = [&](std::vector<std::string> args, const std::string &name) {
    args.push_back("--out");
    args.push_back((dir / name).string());
    return runner::execute(runner::parse_config(args).config);
  };
  const auto t1 = run({"transact", "--trials", "200000", "--seed", "5", "--threads", "1", "--scenario", scenario}, "t1.json");
  const auto t4 = run({"transact", "--trials", "200000", "--seed", "5", "--threads", "4", "--scenario", scenario}, "t4.json");
  const auto t_replay = run({"transact", "--config", (dir / "t4.json").string(), "--threads", "7"}, "t7.json");
  out.require(t1.payload().dump() == t4.payload().dump() && t1.payload().dump() == t_replay.payload().dump(),
              "transact payload identical for 1, 4, 7 threads and replay");
  const auto s1 = run({"survival", "--trials", "50000", "--seed", "3", "--threads", "1"}, "s1.json");
  const auto s4 = run({"survival", "--trials", "50000", "--seed", "3", "--threads", "4"}, "s4.json");
  const auto s_replay = run({"survival", "--config", (dir / "s1.json").string(), "--threads", "3"}, "s3.json");
  out.require(s1.payload().dump() == s4.payload().dump() && s1.payload().dump() == s_replay.payload().dump(),
              "survival payload identical for 1, 4, 3 threads and replay");
  const auto d1 = run({"decay"}, "d1.json");
  const auto d2 = run({"decay", "--config", (dir / "d1.json").string()}, "d2.json");
  out.require(d1.payload().dump() == d2.payload().dump(), "decay payload identical on replay");
  fs::remove_all(dir);
  return out;
}

} // namespace

int main()
{
  criterion(1, "decomposition identity", 30.0, decomposition);
  criterion(2, "pole prescriptions vs residue oracle", 10.0, pole_prescriptions);
  criterion(3, "absorber cancellation", 60.0, cancellation);
  criterion(4, "free-field homogeneity", 0.0, free_field);
  criterion(5, "transaction statistics", 60.0, transaction_statistics);
  criterion(6, "complex energy shift", 60.0, energy_shift);
  criterion(7, "transactional decay vs perturbative rate", 300.0, consistency);
  criterion(8, "reproducibility", 0.0, reproducibility);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
