#ifndef TSQED_TRANSACTIONS_HPP
#define TSQED_TRANSACTIONS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tsqed/constants.hpp"
#include "tsqed/errors.hpp"
#include "tsqed/propagators.hpp"

namespace tsqed::transactions
{

using cplx = std::complex<double>;
using propagators::Mode;

struct Coupling
{
  double alpha = constants::kAlpha;
  double sqrt_alpha = std::sqrt(constants::kAlpha);

  static Coupling from_alpha(double alpha)
  {
    if (!(alpha > 0.0 && alpha < 1.0))
    {
      throw InvalidArgumentError("coupling alpha must lie in (0, 1)");
    }
    return {alpha, std::sqrt(alpha)};
  }
};

struct OfferWave
{
  std::string emitter_id;
  Mode mode;
  cplx amplitude;

  // Photon energy h nu (natural units, so the frequency).
  double energy() const { return mode.omega; }
};

inline OfferWave emit_offer(const std::string &emitter_id, const Mode &mode,
                            const Coupling &coupling)
{
  if (!(mode.omega > 0.0) || !std::isfinite(mode.omega))
  {
    throw InvalidArgumentError("invalid mode: offer energy must be positive");
  }
  return {emitter_id, mode, cplx(coupling.sqrt_alpha, 0.0)};
}

// A candidate absorber: one allowed transition energy and the squared
// projection of its responding state onto the offer mode.
struct AbsorberCandidate
{
  std::string id;
  double transition_energy = 0.0;
  double weight = 1.0;
};

struct Confirmation
{
  std::string absorber_id;
  std::size_t candidate_index = 0;
  double weight = 0.0;
};

// Confirmations from every absorber whose transition energy matches h nu to
// the relative tolerance. Absorbers with zero projection weight produce no
// confirmation wave.
inline std::vector<Confirmation> gather_confirmations(const OfferWave &offer,
                                                      std::span<const AbsorberCandidate> absorbers,
                                                      double tolerance = 1e-9)
{
  if (!(tolerance >= 0.0))
  {
    throw InvalidArgumentError("conservation tolerance must be non-negative");
  }
  const double energy = offer.energy();
  std::vector<Confirmation> out;
  for (std::size_t i = 0; i < absorbers.size(); ++i)
  {
    const auto &a = absorbers[i];
    if (!(a.weight >= 0.0 && a.weight <= 1.0))
    {
      throw InvalidArgumentError("confirmation weight for '" + a.id + "' must lie in [0, 1]");
    }
    if (a.weight > 0.0 && std::abs(a.transition_energy - energy) <= tolerance * energy)
    {
      out.push_back({a.id, i, a.weight});
    }
  }
  return out;
}

struct IncipientTransaction
{
  OfferWave offer;
  std::vector<Confirmation> confirmations;
  double matrix_element_sq = 0.0;
  double probability = 0.0;
  bool clamped = false;
};

// p = alpha |M|^2, clamped into [0, 1] with the clamp flag raised when the
// raw value falls outside. Zero without confirmations.
inline IncipientTransaction make_incipient(OfferWave offer, std::vector<Confirmation> confirmations,
                                           double matrix_element_sq, const Coupling &coupling)
{
  if (!(matrix_element_sq >= 0.0) || !std::isfinite(matrix_element_sq))
  {
    throw InvalidArgumentError("|M|^2 must be finite and non-negative");
  }
  IncipientTransaction t{std::move(offer), std::move(confirmations), matrix_element_sq, 0.0, false};
  if (!t.confirmations.empty())
  {
    const double raw = coupling.alpha * matrix_element_sq;
    t.probability = std::clamp(raw, 0.0, 1.0);
    t.clamped = raw != t.probability;
  }
  return t;
}

struct TransactionOutcome
{
  bool real = false;
  std::string absorber_id;
  std::size_t candidate_index = 0;
  double energy = 0.0;

  static TransactionOutcome virtual_outcome() { return {}; }
};

// SplitMix64 (Steele, Lea, Flood 2014).
class SplitMix64
{
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next()
  {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
  std::uint64_t state_;
};

// Independent stream for one trial, derived only from (master seed, index).
inline SplitMix64 trial_rng(std::uint64_t master_seed, std::uint64_t trial_index)
{
  SplitMix64 mixer(master_seed);
  const std::uint64_t base = mixer.next();
  SplitMix64 index_mixer(base ^ (trial_index * 0xD1B54A32D192ED03ULL));
  return SplitMix64(index_mixer.next());
}

inline TransactionOutcome actualize(const IncipientTransaction &incipient, SplitMix64 &rng)
{
  if (incipient.confirmations.empty() || incipient.probability <= 0.0)
  {
    return TransactionOutcome::virtual_outcome();
  }
  if (!(rng.uniform() < incipient.probability))
  {
    return TransactionOutcome::virtual_outcome();
  }
  double total = 0.0;
  for (const auto &c : incipient.confirmations)
  {
    total += c.weight;
  }
  const double v = rng.uniform() * total;
  double cumulative = 0.0;
  const Confirmation *chosen = &incipient.confirmations.back();
  for (const auto &c : incipient.confirmations)
  {
    cumulative += c.weight;
    if (v < cumulative)
    {
      chosen = &c;
      break;
    }
  }
  return {true, chosen->absorber_id, chosen->candidate_index, incipient.offer.energy()};
}

// Fixed-point energy accounts: integer quanta of kLedgerResolution, so
// transfers are exact and the total is conserved bit for bit.
class EnergyLedger
{
public:
  using Units = std::int64_t;

  static Units to_units(double energy)
  {
    const double scaled = std::round(energy / constants::kLedgerResolution);
    if (!(std::abs(scaled) < 9.0e18))
    {
      throw LedgerError("energy out of ledger range");
    }
    return static_cast<Units>(scaled);
  }

  static double to_energy(Units units)
  {
    return static_cast<double>(units) * constants::kLedgerResolution;
  }

  void open_account(const std::string &id, double initial_energy = 0.0)
  {
    if (!accounts_.emplace(id, to_units(initial_energy)).second)
    {
      throw LedgerError("duplicate ledger account '" + id + "'");
    }
  }

  bool has_account(const std::string &id) const { return accounts_.count(id) != 0; }

  Units units(const std::string &id) const { return account(id); }
  double energy(const std::string &id) const { return to_energy(account(id)); }

  Units total_units() const
  {
    Units total = 0;
    for (const auto &[id, u] : accounts_)
    {
      total += u;
    }
    return total;
  }

  void transfer(const std::string &from, const std::string &to, Units amount)
  {
    Units &src = account(from);
    Units &dst = account(to);
    if (&src == &dst)
    {
      return;
    }
    Units new_src = 0;
    Units new_dst = 0;
    if (__builtin_sub_overflow(src, amount, &new_src) ||
        __builtin_add_overflow(dst, amount, &new_dst))
    {
      throw LedgerError("ledger account overflow");
    }
    src = new_src;
    dst = new_dst;
  }

  // Adds another ledger's balances account by account; both must hold the
  // same accounts.
  void merge(const EnergyLedger &other)
  {
    for (const auto &[id, u] : other.accounts_)
    {
      Units &mine = account(id);
      if (__builtin_add_overflow(mine, u, &mine))
      {
        throw LedgerError("ledger account overflow");
      }
    }
  }

  const std::map<std::string, Units> &accounts() const { return accounts_; }

  bool operator==(const EnergyLedger &) const = default;

private:
  Units &account(const std::string &id)
  {
    auto it = accounts_.find(id);
    if (it == accounts_.end())
    {
      throw LedgerError("unknown ledger entity '" + id + "'");
    }
    return it->second;
  }

  const Units &account(const std::string &id) const
  {
    auto it = accounts_.find(id);
    if (it == accounts_.end())
    {
      throw LedgerError("unknown ledger entity '" + id + "'");
    }
    return it->second;
  }

  std::map<std::string, Units> accounts_;
};

inline EnergyLedger &apply_outcome(EnergyLedger &ledger, const TransactionOutcome &outcome,
                                   const std::string &emitter_id)
{
  if (!ledger.has_account(emitter_id))
  {
    throw LedgerError("unknown ledger entity '" + emitter_id + "'");
  }
  if (outcome.real)
  {
    ledger.transfer(emitter_id, outcome.absorber_id, EnergyLedger::to_units(outcome.energy));
  }
  return ledger;
}

struct Scenario
{
  std::string emitter_id = "emitter";
  double offer_energy = 0.375;
  std::vector<AbsorberCandidate> absorbers;
  double alpha = constants::kAlpha;
  double matrix_element_sq = 1.0;
  double tolerance = 1e-9;

  void validate() const
  {
    if (!(alpha > 0.0 && alpha < 1.0))
    {
      throw ConfigError("scenario alpha must lie in (0, 1)");
    }
    if (!(offer_energy > 0.0) || !std::isfinite(offer_energy))
    {
      throw ConfigError("scenario offer energy must be positive");
    }
    if (!(matrix_element_sq >= 0.0) || !std::isfinite(matrix_element_sq))
    {
      throw ConfigError("scenario |M|^2 must be finite and non-negative");
    }
    if (!(tolerance >= 0.0))
    {
      throw ConfigError("scenario tolerance must be non-negative");
    }
    std::set<std::string> ids{emitter_id};
    for (const auto &a : absorbers)
    {
      if (a.id.empty() || !ids.insert(a.id).second)
      {
        throw ConfigError("scenario ids must be non-empty and unique (offending id '" + a.id +
                          "')");
      }
      if (!(a.weight >= 0.0 && a.weight <= 1.0))
      {
        throw ConfigError("scenario weight for '" + a.id + "' must lie in [0, 1]");
      }
      if (!std::isfinite(a.transition_energy))
      {
        throw ConfigError("scenario transition energy for '" + a.id + "' must be finite");
      }
    }
  }

  EnergyLedger empty_ledger() const
  {
    EnergyLedger ledger;
    ledger.open_account(emitter_id);
    for (const auto &a : absorbers)
    {
      ledger.open_account(a.id);
    }
    return ledger;
  }

  IncipientTransaction incipient() const
  {
    const auto coupling = Coupling::from_alpha(alpha);
    auto offer = emit_offer(emitter_id, Mode{offer_energy, offer_energy}, coupling);
    auto confirmations = gather_confirmations(offer, absorbers, tolerance);
    return make_incipient(std::move(offer), std::move(confirmations), matrix_element_sq, coupling);
  }
};

struct TrialStatistics
{
  std::uint64_t trials = 0;
  std::uint64_t virtual_count = 0;
  std::uint64_t real_count = 0;
  // Selection counts in scenario absorber order.
  std::vector<std::uint64_t> per_absorber_counts;
  EnergyLedger ledger;
  bool clamp_flag = false;
  double probability = 0.0;
};

// n independent emit -> confirm -> actualize rounds. Trial i draws only from
// trial_rng(seed, i); threads take contiguous blocks and their integer
// tallies are merged in block order, so the record does not depend on the
// thread count.
inline TrialStatistics run_trials(const Scenario &scenario, std::uint64_t trials,
                                  std::uint64_t master_seed, unsigned threads = 1)
{
  scenario.validate();
  if (trials < 1)
  {
    throw ConfigError("trial count must be at least 1");
  }
  const IncipientTransaction incipient = scenario.incipient();
  const std::size_t n_abs = scenario.absorbers.size();

  struct Block
  {
    std::uint64_t real = 0;
    std::vector<std::uint64_t> counts;
    EnergyLedger ledger;
  };
  threads = std::max(1u, threads);
  if (static_cast<std::uint64_t>(threads) > trials)
  {
    threads = static_cast<unsigned>(trials);
  }
  std::vector<Block> blocks(threads);
  auto run_block = [&](unsigned b) {
    Block &block = blocks[b];
    block.counts.assign(n_abs, 0);
    block.ledger = scenario.empty_ledger();
    const std::uint64_t begin = trials * b / threads;
    const std::uint64_t end = trials * (b + 1) / threads;
    for (std::uint64_t i = begin; i < end; ++i)
    {
      auto rng = trial_rng(master_seed, i);
      const auto outcome = actualize(incipient, rng);
      if (outcome.real)
      {
        ++block.real;
        ++block.counts[outcome.candidate_index];
        apply_outcome(block.ledger, outcome, scenario.emitter_id);
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
    pool.reserve(threads);
    for (unsigned b = 0; b < threads; ++b)
    {
      pool.emplace_back(run_block, b);
    }
    for (auto &t : pool)
    {
      t.join();
    }
  }

  TrialStatistics stats;
  stats.trials = trials;
  stats.per_absorber_counts.assign(n_abs, 0);
  stats.ledger = scenario.empty_ledger();
  stats.clamp_flag = incipient.clamped;
  stats.probability = incipient.probability;
  for (const auto &block : blocks)
  {
    stats.real_count += block.real;
    for (std::size_t j = 0; j < n_abs; ++j)
    {
      stats.per_absorber_counts[j] += block.counts[j];
    }
    stats.ledger.merge(block.ledger);
  }
  stats.virtual_count = trials - stats.real_count;
  return stats;
}

} // namespace tsqed::transactions

#endif // TSQED_TRANSACTIONS_HPP
