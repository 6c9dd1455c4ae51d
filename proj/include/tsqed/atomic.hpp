#ifndef TSQED_ATOMIC_HPP
#define TSQED_ATOMIC_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tsqed/constants.hpp"
#include "tsqed/errors.hpp"
#include "tsqed/quadrature.hpp"
#include "tsqed/transactions.hpp"

namespace tsqed::atomic
{

inline constexpr std::string_view kOrbitalLetters = "spdfghik";

// Hydrogen level in atomic units.
struct AtomicLevel
{
  std::string label;
  int n = 1;
  int l = 0;
  double energy = -0.5;

  static AtomicLevel make(int n, int l)
  {
    if (n < 1 || l < 0 || l >= n)
    {
      throw InvalidArgumentError("hydrogen level needs n >= 1 and 0 <= l < n");
    }
    if (static_cast<std::size_t>(l) >= kOrbitalLetters.size())
    {
      throw InvalidArgumentError("orbital quantum number too large");
    }
    return {std::to_string(n) + kOrbitalLetters[static_cast<std::size_t>(l)], n, l,
            -0.5 / (static_cast<double>(n) * n)};
  }

  // "2p", "3d", ...
  static AtomicLevel parse(const std::string &label)
  {
    std::size_t digits = 0;
    while (digits < label.size() && std::isdigit(static_cast<unsigned char>(label[digits])))
    {
      ++digits;
    }
    if (digits == 0 || digits + 1 != label.size() || digits > 3)
    {
      throw InvalidArgumentError("cannot parse level '" + label + "'");
    }
    const auto pos = kOrbitalLetters.find(
        static_cast<char>(std::tolower(static_cast<unsigned char>(label[digits]))));
    if (pos == std::string_view::npos)
    {
      throw InvalidArgumentError("unknown orbital letter in '" + label + "'");
    }
    return make(std::stoi(label.substr(0, digits)), static_cast<int>(pos));
  }

  bool operator==(const AtomicLevel &other) const { return n == other.n && l == other.l; }
};

// Comma-separated level list; empty entries are rejected.
inline std::vector<AtomicLevel> parse_basis(const std::string &list)
{
  std::vector<AtomicLevel> out;
  std::size_t start = 0;
  while (start <= list.size())
  {
    const auto comma = list.find(',', start);
    const auto end = comma == std::string::npos ? list.size() : comma;
    std::string item = list.substr(start, end - start);
    item.erase(std::remove_if(item.begin(), item.end(),
                              [](unsigned char c) { return std::isspace(c); }),
               item.end());
    out.push_back(AtomicLevel::parse(item));
    if (comma == std::string::npos)
    {
      break;
    }
    start = comma + 1;
  }
  return out;
}

// Every level n' < n reachable from `upper` by a dipole transition.
inline std::vector<AtomicLevel> dipole_allowed_lower(const AtomicLevel &upper)
{
  std::vector<AtomicLevel> out;
  for (int n = 1; n < upper.n; ++n)
  {
    for (int l : {upper.l - 1, upper.l + 1})
    {
      if (l >= 0 && l < n)
      {
        out.push_back(AtomicLevel::make(n, l));
      }
    }
  }
  return out;
}

inline double radial_wavefunction(int n, int l, double r)
{
  const double x = 2.0 * r / n;
  const double norm = std::sqrt(std::pow(2.0 / n, 3) * std::tgamma(n - l) /
                                (2.0 * n * std::tgamma(n + l + 1)));
  return norm * std::pow(x, l) * std::exp(-0.5 * x) *
         std::assoc_laguerre(static_cast<unsigned>(n - l - 1), static_cast<unsigned>(2 * l + 1), x);
}

// Radial dipole integral \int_0^inf R_A R_I r^3 dr; zero unless |l_A - l_I| = 1.
inline double dipole_matrix_element(const AtomicLevel &a, const AtomicLevel &i,
                                    const quadrature::QuadratureConfig &config = {1e-15, 1e-13,
                                                                                  2000})
{
  if (std::abs(a.l - i.l) != 1)
  {
    return 0.0;
  }
  auto integrand = [&](double r) {
    return radial_wavefunction(a.n, a.l, r) * radial_wavefunction(i.n, i.l, r) * r * r * r;
  };
  // The wavefunctions have all their nodes and weight within a few n^2.
  const double reach = 4.0 * std::max(a.n * a.n, i.n * i.n) + 20.0;
  std::vector<double> cuts;
  for (int j = 1; j < 8; ++j)
  {
    cuts.push_back(reach * j / 8.0);
  }
  const auto inner = quadrature::integrate(integrand, 0.0, reach, config, cuts);
  const auto tail = quadrature::integrate_to_infinity(integrand, reach, config);
  return inner.value + tail.value;
}

// Fraction of |<A|r|I>|^2 surviving the average over upper-level m and the sum
// over lower-level m: max(l_A, l_I) / (2 l_A + 1).
inline double angular_factor(const AtomicLevel &a, const AtomicLevel &i)
{
  if (std::abs(a.l - i.l) != 1)
  {
    return 0.0;
  }
  return static_cast<double>(std::max(a.l, i.l)) / (2.0 * a.l + 1.0);
}

struct Transition
{
  AtomicLevel upper;
  AtomicLevel lower;
  double omega = 0.0;
  double dipole = 0.0;
  double angular = 0.0;

  // Squared dipole element summed over final and averaged over initial m.
  double dipole_sq() const { return angular * dipole * dipole; }
};

inline Transition make_transition(const AtomicLevel &upper, const AtomicLevel &lower)
{
  return {upper, lower, upper.energy - lower.energy, dipole_matrix_element(upper, lower),
          angular_factor(upper, lower)};
}

struct GoldenRuleRate
{
  double gamma_au = 0.0;
  double gamma_si = 0.0;
  std::vector<Transition> channels;
  std::vector<double> partial_au;
};

// On-shell rate: Gamma = sum_I (4/3) alpha^3 omega_AI^3 |<A|r|I>|^2 over
// lower levels in the basis.
inline GoldenRuleRate decay_rate_golden_rule(const AtomicLevel &level,
                                             std::span<const AtomicLevel> basis,
                                             double alpha = constants::kAlpha)
{
  GoldenRuleRate rate;
  for (const auto &other : basis)
  {
    if (!(other.energy < level.energy) || std::abs(other.l - level.l) != 1)
    {
      continue;
    }
    auto tr = make_transition(level, other);
    const double partial = 4.0 / 3.0 * alpha * alpha * alpha * std::pow(tr.omega, 3) * tr.dipole_sq();
    rate.gamma_au += partial;
    rate.channels.push_back(tr);
    rate.partial_au.push_back(partial);
  }
  rate.gamma_si = rate.gamma_au / constants::kAtomicUnitOfTime;
  return rate;
}

struct SelfEnergyConfig
{
  double cutoff = constants::kDefaultCutoff;
  double epsilon = 1e-3;
  double reduction = 0.5;
  int refinements = 4;
  // Half-width of a window around each on-shell point removed from the
  // principal-value (real) integral; 0 keeps the full range.
  double exclusion_window = 0.0;
  double alpha = constants::kAlpha;
  quadrature::QuadratureConfig quad{0.0, 1e-12, 20000};
};

struct ComplexEnergyShift
{
  double real_part = 0.0;
  double imaginary_part = 0.0;
  double gamma = 0.0;
  double cutoff = 0.0;
  std::vector<double> epsilon_schedule;
  // Per-epsilon samples and the running extrapolations.
  std::vector<double> gamma_samples;
  std::vector<double> real_samples;
  std::vector<double> gamma_estimates;
  std::vector<double> real_estimates;
  std::vector<std::string> warnings;
  double quadrature_error = 0.0;

  bool basis_incomplete() const { return !warnings.empty(); }
};

namespace detail
{

struct ChannelIntegral
{
  double real = 0.0;
  double imag = 0.0;
  double error = 0.0;
};

// \int_0^cutoff c / (delta - omega + i eps) domega, real and imaginary parts
// integrated separately with breakpoints resolving the Lorentzian at delta.
inline ChannelIntegral channel_integral(double c, double delta, double eps, double cutoff,
                                        double window, const quadrature::QuadratureConfig &quad)
{
  std::vector<double> cuts{delta};
  for (double m : {1.0, 10.0, 100.0, 1000.0})
  {
    cuts.push_back(delta - m * eps);
    cuts.push_back(delta + m * eps);
  }
  for (double x = 1.0; x < cutoff; x *= 4.0)
  {
    cuts.push_back(x);
  }
  auto re = [&](double w) {
    const double u = delta - w;
    return c * u / (u * u + eps * eps);
  };
  auto im = [&](double w) {
    const double u = delta - w;
    return -c * eps / (u * u + eps * eps);
  };
  ChannelIntegral out;
  const auto gi = quadrature::integrate(im, 0.0, cutoff, quad, cuts);
  out.imag = gi.value;
  out.error += gi.error;
  if (window > 0.0 && delta > 0.0 && delta < cutoff)
  {
    const double lo = std::max(0.0, delta - window);
    const double hi = std::min(cutoff, delta + window);
    const auto left = quadrature::integrate(re, 0.0, lo, quad, cuts);
    const auto right = quadrature::integrate(re, hi, cutoff, quad, cuts);
    out.real = left.value + right.value;
    out.error += left.error + right.error;
  }
  else
  {
    const auto gr = quadrature::integrate(re, 0.0, cutoff, quad, cuts);
    out.real = gr.value;
    out.error += gr.error;
  }
  return out;
}

} // namespace detail

// Second-order shift sum_I \int_0^cutoff domega C_AI / (E_A - E_I - omega + i eps)
// with the omega-independent dipole density C_AI of the constants table,
// evaluated along an epsilon schedule and extrapolated to eps -> 0.
inline ComplexEnergyShift self_energy(const AtomicLevel &level, std::span<const AtomicLevel> basis,
                                      const SelfEnergyConfig &config = {})
{
  if (!(config.epsilon > 0.0))
  {
    throw InvalidArgumentError("invalid regulator: epsilon must be positive");
  }
  if (!(config.cutoff > 0.0) || !std::isfinite(config.cutoff))
  {
    throw InvalidArgumentError("cutoff must be positive and finite");
  }
  if (!(config.exclusion_window >= 0.0))
  {
    throw InvalidArgumentError("exclusion window must be non-negative");
  }
  const propagators::EpsilonSchedule schedule(config.epsilon, config.reduction,
                                              config.refinements);
  ComplexEnergyShift shift;
  shift.cutoff = config.cutoff;
  shift.epsilon_schedule = schedule.values();

  for (const auto &needed : dipole_allowed_lower(level))
  {
    if (std::find(basis.begin(), basis.end(), needed) == basis.end())
    {
      shift.warnings.push_back("basis incomplete: missing decay channel " + needed.label);
    }
  }

  struct Channel
  {
    double c;
    double delta;
  };
  std::vector<Channel> channels;
  const double prefactor = constants::dipole_density_prefactor(config.alpha);
  for (const auto &other : basis)
  {
    if (other == level || std::abs(other.l - level.l) != 1)
    {
      continue;
    }
    const auto tr = make_transition(level, other);
    const double c = prefactor * tr.dipole_sq() * std::pow(tr.omega, 3);
    if (c != 0.0)
    {
      channels.push_back({c, tr.omega});
      if (tr.omega > config.cutoff)
      {
        shift.warnings.push_back("channel " + other.label + " lies above the cutoff");
      }
    }
  }

  for (double eps : shift.epsilon_schedule)
  {
    double re = 0.0;
    double im = 0.0;
    for (const auto &ch : channels)
    {
      const auto r = detail::channel_integral(ch.c, ch.delta, eps, config.cutoff,
                                              config.exclusion_window, config.quad);
      re += r.real;
      im += r.imag;
      shift.quadrature_error = std::max(shift.quadrature_error, r.error);
    }
    shift.real_samples.push_back(re);
    shift.gamma_samples.push_back(-2.0 * im);
  }
  shift.gamma_estimates = quadrature::extrapolate_to_zero<double>(
      shift.epsilon_schedule, shift.gamma_samples, quadrature::ErrorModel::Polynomial);
  shift.real_estimates = quadrature::extrapolate_to_zero<double>(
      shift.epsilon_schedule, shift.real_samples, quadrature::ErrorModel::Polynomial);
  shift.gamma = channels.empty() ? 0.0 : std::max(0.0, shift.gamma_estimates.back());
  shift.real_part = channels.empty() ? 0.0 : shift.real_estimates.back();
  shift.imaginary_part = -0.5 * shift.gamma;
  return shift;
}

// Occupation probability exp(-Gamma t).
inline std::vector<double> survival_curve(double gamma, std::span<const double> times)
{
  if (!(gamma >= 0.0))
  {
    throw InvalidArgumentError("decay rate must be non-negative");
  }
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times)
  {
    out.push_back(std::exp(-gamma * t));
  }
  return out;
}

struct CrosscheckConfig
{
  // Time step and horizon in units of the lifetime 1 / Gamma.
  double dt_lifetimes = 0.01;
  double horizon_lifetimes = 5.0;
  // Survival samples recorded every this many steps.
  int record_every = 10;
  unsigned threads = 1;
  double alpha = constants::kAlpha;
};

struct CrosscheckReport
{
  double gamma_reference = 0.0;
  double fitted_rate = 0.0;
  double standard_error = 0.0;
  double relative_deviation = 0.0;
  double dt = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t decays = 0;
  std::uint64_t steps = 0;
  // Per-channel decay counts in channel order.
  std::vector<std::string> channel_labels;
  std::vector<std::uint64_t> channel_counts;
  std::vector<double> times;
  std::vector<double> empirical_survival;
  std::vector<double> model_survival;
};

// Monte-Carlo decay through the transaction model. Each time step emits one
// offer per decay channel; the channel's only confirming absorber sits at the
// transition energy and |M|^2 is set so that alpha |M|^2 = Gamma_I dt. Trials
// are censored at the horizon and the rate is the exponential maximum
// likelihood estimate, decays over total exposure.
inline CrosscheckReport transactional_decay_crosscheck(const AtomicLevel &level,
                                                       std::span<const AtomicLevel> basis,
                                                       std::uint64_t trials,
                                                       std::uint64_t master_seed,
                                                       const CrosscheckConfig &config = {})
{
  if (trials < 10000)
  {
    throw ConfigError("crosscheck needs at least 10^4 trials");
  }
  if (!(config.dt_lifetimes > 0.0) || !(config.horizon_lifetimes > config.dt_lifetimes) ||
      config.record_every < 1)
  {
    throw ConfigError("crosscheck needs 0 < dt < horizon and record_every >= 1");
  }
  const auto rate = decay_rate_golden_rule(level, basis, config.alpha);
  CrosscheckReport report;
  report.gamma_reference = rate.gamma_au;
  report.trials = trials;

  // With no channel the level is stable; fall back to a unit time scale.
  const double gamma_scale = rate.gamma_au > 0.0 ? rate.gamma_au : 1.0;
  const double dt = config.dt_lifetimes / gamma_scale;
  const auto steps = static_cast<std::uint64_t>(std::ceil(config.horizon_lifetimes /
                                                          config.dt_lifetimes - 1e-9));
  report.dt = dt;
  report.steps = steps;

  const auto coupling = transactions::Coupling::from_alpha(config.alpha);
  std::vector<transactions::IncipientTransaction> incipients;
  for (std::size_t c = 0; c < rate.channels.size(); ++c)
  {
    const auto &ch = rate.channels[c];
    report.channel_labels.push_back(ch.lower.label);
    const std::vector<transactions::AbsorberCandidate> absorbers{
        {"B:" + ch.lower.label, ch.omega, 1.0}};
    auto offer = transactions::emit_offer(level.label, {ch.omega, ch.omega}, coupling);
    auto confirmations = transactions::gather_confirmations(offer, absorbers);
    const double m2 = rate.partial_au[c] * dt / config.alpha;
    incipients.push_back(
        transactions::make_incipient(std::move(offer), std::move(confirmations), m2, coupling));
  }
  report.channel_counts.assign(incipients.size(), 0);

  const std::size_t n_records = static_cast<std::size_t>(steps / config.record_every) + 1;
  struct Block
  {
    std::uint64_t decays = 0;
    std::uint64_t exposure_steps = 0;
    std::vector<std::uint64_t> channel_counts;
    // alive[r]: trials still excited after r * record_every steps.
    std::vector<std::uint64_t> alive;
  };
  const unsigned threads =
      static_cast<unsigned>(std::min<std::uint64_t>(std::max(1u, config.threads), trials));
  std::vector<Block> blocks(threads);
  auto run_block = [&](unsigned b) {
    Block &block = blocks[b];
    block.channel_counts.assign(incipients.size(), 0);
    block.alive.assign(n_records, 0);
    const std::uint64_t begin = trials * b / threads;
    const std::uint64_t end = trials * (b + 1) / threads;
    for (std::uint64_t i = begin; i < end; ++i)
    {
      auto rng = transactions::trial_rng(master_seed, i);
      std::uint64_t lived = steps;
      bool decayed = false;
      for (std::uint64_t s = 0; s < steps && !decayed; ++s)
      {
        for (std::size_t c = 0; c < incipients.size(); ++c)
        {
          if (transactions::actualize(incipients[c], rng).real)
          {
            lived = s + 1;
            decayed = true;
            ++block.decays;
            ++block.channel_counts[c];
            break;
          }
        }
      }
      block.exposure_steps += lived;
      // Still excited at record r iff the decay step exceeds r * record_every.
      const std::uint64_t survived_records =
          decayed ? (lived - 1) / config.record_every + 1 : n_records;
      for (std::uint64_t r = 0; r < survived_records; ++r)
      {
        ++block.alive[r];
      }
    }
  };
  if (threads == 1)
  {
    run_block(0);
  }
  else
  {
    std::vector<std::thread> pool;
    for (unsigned b = 0; b < threads; ++b)
    {
      pool.emplace_back(run_block, b);
    }
    for (auto &t : pool)
    {
      t.join();
    }
  }

  std::uint64_t exposure = 0;
  std::vector<std::uint64_t> alive(n_records, 0);
  for (const auto &block : blocks)
  {
    report.decays += block.decays;
    exposure += block.exposure_steps;
    for (std::size_t c = 0; c < incipients.size(); ++c)
    {
      report.channel_counts[c] += block.channel_counts[c];
    }
    for (std::size_t r = 0; r < n_records; ++r)
    {
      alive[r] += block.alive[r];
    }
  }
  if (exposure > 0)
  {
    report.fitted_rate = static_cast<double>(report.decays) / (static_cast<double>(exposure) * dt);
  }
  if (report.decays > 0)
  {
    report.standard_error = report.fitted_rate / std::sqrt(static_cast<double>(report.decays));
  }
  if (rate.gamma_au > 0.0)
  {
    report.relative_deviation = (report.fitted_rate - rate.gamma_au) / rate.gamma_au;
  }
  for (std::size_t r = 0; r < n_records; ++r)
  {
    report.times.push_back(static_cast<double>(r * config.record_every) * dt);
    report.empirical_survival.push_back(static_cast<double>(alive[r]) /
                                        static_cast<double>(trials));
  }
  report.model_survival = survival_curve(rate.gamma_au, report.times);
  return report;
}

} // namespace tsqed::atomic

#endif // TSQED_ATOMIC_HPP
