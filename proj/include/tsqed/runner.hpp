#ifndef TSQED_RUNNER_HPP
#define TSQED_RUNNER_HPP

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "tsqed/absorber.hpp"
#include "tsqed/atomic.hpp"
#include "tsqed/constants.hpp"
#include "tsqed/errors.hpp"
#include "tsqed/propagators.hpp"
#include "tsqed/transactions.hpp"

namespace tsqed::runner
{

using json = nlohmann::ordered_json;

inline constexpr const char *kOutputDirEnv = "TSQED_OUTPUT_DIR";

enum ExitCode : int
{
  kExitOk = 0,
  kExitOther = 1,
  kExitUsage = 2,
  kExitConvergence = 3,
  kExitSolver = 4,
  kExitIo = 5
};

inline int exit_code_for(ErrorCategory category)
{
  switch (category)
  {
    case ErrorCategory::Usage:
    case ErrorCategory::InvalidArgument:
    case ErrorCategory::Representation:
      return kExitUsage;
    case ErrorCategory::Convergence:
      return kExitConvergence;
    case ErrorCategory::Solver:
      return kExitSolver;
    case ErrorCategory::Io:
      return kExitIo;
    case ErrorCategory::Ledger:
      return kExitOther;
  }
  return kExitOther;
}

enum class ParamType
{
  Real,
  Integer,
  Unsigned,
  Text
};

struct ParamSpec
{
  std::string name;
  ParamType type = ParamType::Real;
  json default_value; // null: required
  std::string help;
};

struct Table
{
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ExperimentResult
{
  json payload;
  std::optional<Table> table;
  // Non-zero when the experiment ran but its check failed (e.g. convergence).
  int exit_code = kExitOk;
};

struct Experiment
{
  std::string name; // "wf run"
  std::string description;
  std::vector<ParamSpec> params;
  std::function<ExperimentResult(const json &)> run;
};

struct Override
{
  std::string key;
  json file_value;
  json flag_value;
};

struct RunConfig
{
  std::string experiment;
  json params = json::object();
  std::filesystem::path output;
  std::string format = "json";
  std::string config_file;
  std::vector<Override> overrides;
};

namespace detail
{

inline std::string format_double(double v)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp)
{
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json complex_json(std::complex<double> z) { return json::array({z.real(), z.imag()}); }

inline json parse_value(const ParamSpec &spec, const std::string &text)
{
  try
  {
    std::size_t used = 0;
    switch (spec.type)
    {
      case ParamType::Real:
      {
        const double v = std::stod(text, &used);
        if (used != text.size())
        {
          break;
        }
        return v;
      }
      case ParamType::Integer:
      {
        const long long v = std::stoll(text, &used);
        if (used != text.size())
        {
          break;
        }
        return v;
      }
      case ParamType::Unsigned:
      {
        if (!text.empty() && text.front() == '-')
        {
          break;
        }
        const unsigned long long v = std::stoull(text, &used, 0);
        if (used != text.size())
        {
          break;
        }
        return static_cast<std::uint64_t>(v);
      }
      case ParamType::Text:
        return text;
    }
  }
  catch (const std::exception &)
  {
  }
  throw UsageError("invalid value '" + text + "' for --" + spec.name);
}

inline json coerce_file_value(const ParamSpec &spec, const json &value)
{
  if (value.is_string())
  {
    return parse_value(spec, value.get<std::string>());
  }
  switch (spec.type)
  {
    case ParamType::Real:
      if (value.is_number())
      {
        return value.get<double>();
      }
      break;
    case ParamType::Integer:
      if (value.is_number_integer())
      {
        return value.get<long long>();
      }
      break;
    case ParamType::Unsigned:
      if (value.is_number_unsigned() || (value.is_number_integer() && value.get<long long>() >= 0))
      {
        return value.get<std::uint64_t>();
      }
      break;
    case ParamType::Text:
      break;
  }
  throw UsageError("config key '" + spec.name + "' has the wrong type");
}

inline std::string default_text(const ParamSpec &spec)
{
  if (spec.default_value.is_null())
  {
    return "required";
  }
  if (spec.default_value.is_number_float())
  {
    return format_double(spec.default_value.get<double>());
  }
  if (spec.default_value.is_string())
  {
    return spec.default_value.get<std::string>();
  }
  return spec.default_value.dump();
}

inline std::string slug(const std::string &name)
{
  std::string out = name;
  for (auto &c : out)
  {
    if (c == ' ')
    {
      c = '-';
    }
  }
  return out;
}

//
// Shared parameter groups and experiment bodies.
//

inline std::vector<ParamSpec> slab_params()
{
  return {
      {"absorbers", ParamType::Integer, 100, "number of absorbers, split into two mirrored slabs"},
      {"gamma", ParamType::Real, 0.8, "largest absorber coupling (end of the taper)"},
      {"spacing", ParamType::Real, constants::kTwoPi / 10.0, "absorber spacing"},
      {"omega", ParamType::Real, 1.0, "emitter angular frequency"},
      {"gap", ParamType::Real, 3.0, "emitter to first absorber distance"},
      {"taper", ParamType::Real, 2.0, "taper exponent of the coupling ramp"},
      {"strength", ParamType::Real, 1.0, "emitter source amplitude"},
      {"min-spacing", ParamType::Real, 0.05, "minimum source separation in wavelengths"},
      {"max-condition", ParamType::Real, 1e10, "largest accepted condition estimate"},
  };
}

struct SlabProblem
{
  absorber::Emitter emitter;
  absorber::SlabConfig slab;
  absorber::SolverConfig solver;
};

inline SlabProblem slab_problem(const json &p)
{
  SlabProblem prob;
  prob.emitter = {0.0, p.at("omega").get<double>(), p.at("strength").get<double>()};
  prob.slab.absorbers = static_cast<int>(p.at("absorbers").get<long long>());
  prob.slab.gamma_max = p.at("gamma").get<double>();
  prob.slab.spacing = p.at("spacing").get<double>();
  prob.slab.gap = p.at("gap").get<double>();
  prob.slab.taper_exponent = p.at("taper").get<double>();
  prob.solver.min_spacing_wavelengths = p.at("min-spacing").get<double>();
  prob.solver.max_condition = p.at("max-condition").get<double>();
  return prob;
}

inline double transmission(const absorber::AbsorberSolution &solution)
{
  const auto far = absorber::detail::far_field(solution);
  const double s = std::abs(solution.emitter.strength);
  return s > 0.0 ? std::max(std::abs(far.right_out), std::abs(far.left_out)) / s : 0.0;
}

inline json report_json(const absorber::CancellationReport &r)
{
  return json{{"retarded_gain", r.retarded_gain},
              {"advanced_residual", r.advanced_residual},
              {"outgoing", complex_json(r.outgoing)},
              {"incoming", complex_json(r.incoming)},
              {"energy_emitted", r.energy_emitted},
              {"energy_absorbed", r.energy_absorbed},
              {"energy_transmitted", r.energy_transmitted},
              {"energy_far_outgoing", r.energy_far_outgoing},
              {"energy_far_incoming", r.energy_far_incoming},
              {"reference_power", r.reference_power},
              {"energy_balance_residual", r.energy_balance_residual()}};
}

inline ExperimentResult run_propagator_verify(const json &p)
{
  const auto f = propagators::TestFunction::gaussian(p.at("t0").get<double>(),
                                                     p.at("x0").get<double>(),
                                                     p.at("sigma").get<double>(),
                                                     p.at("normalization").get<double>());
  const propagators::EpsilonSchedule schedule(p.at("eps").get<double>(),
                                              p.at("reduction").get<double>(),
                                              static_cast<int>(p.at("refine").get<long long>()));
  const auto report = propagators::verify_decomposition(f, schedule);
  const double tolerance = p.at("tolerance").get<double>();

  json payload;
  payload["epsilon"] = report.epsilon;
  payload["residual"] = report.residual;
  payload["residual_bound"] = report.residual_bound;
  payload["extrapolated_residuals"] = report.extrapolated_residuals;
  payload["extrapolated"] = report.extrapolated;
  json pf = json::array();
  json pbar = json::array();
  json p1 = json::array();
  for (std::size_t i = 0; i < report.epsilon.size(); ++i)
  {
    pf.push_back(complex_json(report.feynman[i]));
    pbar.push_back(complex_json(report.time_symmetric[i]));
    p1.push_back(complex_json(report.free_field[i]));
  }
  payload["feynman"] = pf;
  payload["time_symmetric"] = pbar;
  payload["free_field"] = p1;
  payload["extrapolated_feynman"] = complex_json(report.extrapolated_feynman);
  const bool passed = report.max_residual() < tolerance && report.extrapolated_non_increasing();
  payload["passed"] = passed;

  Table table{{"epsilon", "residual", "extrapolated_residual"}, {}};
  for (std::size_t i = 0; i < report.epsilon.size(); ++i)
  {
    table.rows.push_back({report.epsilon[i], report.residual[i], report.extrapolated_residuals[i]});
  }
  return {payload, table, passed ? kExitOk : kExitConvergence};
}

inline ExperimentResult run_wf_run(const json &p)
{
  const auto prob = slab_problem(p);
  const auto layout = absorber::mirror_slabs(prob.emitter, prob.slab);
  const auto solution = absorber::solve_absorber_response(prob.emitter, layout, prob.solver);
  const auto report =
      absorber::cancellation_report(solution, absorber::default_probe(prob.emitter, prob.slab));

  const int half = prob.slab.absorbers / 2;
  const double extent = prob.slab.gap + half * prob.slab.spacing + 2.0;
  const absorber::FieldGrid grid{-extent, extent,
                                 static_cast<int>(p.at("grid-points").get<long long>())};
  const auto free = absorber::free_field_component(solution, grid);

  // Absorber response against +1/2 (retarded - advanced) inside the gap.
  double diff = 0.0;
  double scale = 0.0;
  const auto response = absorber::sample_absorber_response(solution, grid);
  for (std::size_t i = 0; i < response.x.size(); ++i)
  {
    if (std::abs(response.x[i] - prob.emitter.position) < 0.9 * prob.slab.gap)
    {
      const auto expect = 0.5 * (absorber::retarded_source_field(prob.emitter, response.x[i]) -
                                 absorber::advanced_source_field(prob.emitter, response.x[i]));
      diff = std::max(diff, std::abs(response.field[i] - expect));
      scale = std::max(scale, std::abs(expect));
    }
  }

  json payload;
  payload["report"] = report_json(report);
  payload["transmission"] = transmission(solution);
  payload["absorber_count"] = solution.absorbers.size();
  payload["total_opacity"] = absorber::total_opacity(solution.absorbers);
  payload["solver_residual"] = solution.residual;
  payload["condition"] = solution.condition;
  payload["free_field_max_residual"] = free.max_residual;
  payload["response_vs_free_field"] = scale > 0.0 ? diff / scale : 0.0;

  const auto total = absorber::sample_total_field(solution, grid);
  Table table{{"x", "re_field", "im_field"}, {}};
  for (std::size_t i = 0; i < total.x.size(); ++i)
  {
    table.rows.push_back({total.x[i], total.field[i].real(), total.field[i].imag()});
  }
  return {payload, table, kExitOk};
}

inline ExperimentResult run_wf_sweep(const json &p)
{
  auto prob = slab_problem(p);
  const double gmin = p.at("gamma-min").get<double>();
  const double gmax = p.at("gamma-max").get<double>();
  const auto steps = p.at("steps").get<long long>();
  if (!(gmin > 0.0) || !(gmax > gmin) || steps < 2)
  {
    throw ConfigError("sweep needs 0 < gamma-min < gamma-max and steps >= 2");
  }
  Table table{{"opacity", "advanced_residual", "retarded_gain", "energy_balance"}, {}};
  json rows = json::array();
  bool monotone = true;
  double previous = std::numeric_limits<double>::infinity();
  for (long long i = 0; i < steps; ++i)
  {
    prob.slab.gamma_max = gmin * std::pow(gmax / gmin, static_cast<double>(i) / (steps - 1));
    const auto layout = absorber::mirror_slabs(prob.emitter, prob.slab);
    const auto solution = absorber::solve_absorber_response(prob.emitter, layout, prob.solver);
    const auto report =
        absorber::cancellation_report(solution, absorber::default_probe(prob.emitter, prob.slab));
    const double opacity = absorber::total_opacity(layout);
    const double balance =
        report.energy_emitted > 0.0 ? report.energy_absorbed / report.energy_emitted : 0.0;
    table.rows.push_back({opacity, report.advanced_residual, report.retarded_gain, balance});
    rows.push_back(json{{"gamma_max", prob.slab.gamma_max},
                        {"opacity", opacity},
                        {"advanced_residual", report.advanced_residual},
                        {"retarded_gain", report.retarded_gain},
                        {"energy_balance", balance},
                        {"transmission", transmission(solution)}});
    monotone = monotone && report.advanced_residual <= previous * (1.0 + 1e-9);
    previous = report.advanced_residual;
  }
  json payload;
  payload["sweep"] = rows;
  payload["monotone_advanced_residual"] = monotone;
  return {payload, table, kExitOk};
}

inline transactions::Scenario load_scenario(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw IoError("cannot read scenario file '" + path + "'");
  }
  nlohmann::json doc;
  try
  {
    doc = nlohmann::json::parse(in);
  }
  catch (const nlohmann::json::exception &e)
  {
    throw ConfigError("malformed scenario file '" + path + "': " + e.what());
  }
  if (!doc.is_object())
  {
    throw ConfigError("scenario file must hold a JSON object");
  }
  transactions::Scenario s;
  try
  {
    for (const auto &[key, value] : doc.items())
    {
      if (key == "emitter")
      {
        s.emitter_id = value.get<std::string>();
      }
      else if (key == "offer_energy")
      {
        s.offer_energy = value.get<double>();
      }
      else if (key == "tolerance")
      {
        s.tolerance = value.get<double>();
      }
      else if (key == "absorbers")
      {
        for (const auto &a : value)
        {
          transactions::AbsorberCandidate c;
          for (const auto &[akey, avalue] : a.items())
          {
            if (akey == "id")
            {
              c.id = avalue.get<std::string>();
            }
            else if (akey == "energy")
            {
              c.transition_energy = avalue.get<double>();
            }
            else if (akey == "weight")
            {
              c.weight = avalue.get<double>();
            }
            else
            {
              throw ConfigError("unknown scenario absorber key '" + akey + "'");
            }
          }
          s.absorbers.push_back(c);
        }
      }
      else
      {
        throw ConfigError("unknown scenario key '" + key + "'");
      }
    }
  }
  catch (const nlohmann::json::exception &e)
  {
    throw ConfigError(std::string("scenario value has the wrong type: ") + e.what());
  }
  return s;
}

inline ExperimentResult run_transact(const json &p)
{
  auto scenario = load_scenario(p.at("scenario").get<std::string>());
  scenario.alpha = p.at("alpha").get<double>();
  scenario.matrix_element_sq = p.at("m2").get<double>();
  const auto stats = transactions::run_trials(
      scenario, p.at("trials").get<std::uint64_t>(), p.at("seed").get<std::uint64_t>(),
      static_cast<unsigned>(p.at("threads").get<long long>()));

  json payload;
  payload["virtual_count"] = stats.virtual_count;
  payload["real_count"] = stats.real_count;
  json counts = json::object();
  Table table{{"absorber_index", "count"}, {}};
  for (std::size_t j = 0; j < scenario.absorbers.size(); ++j)
  {
    counts[scenario.absorbers[j].id] = stats.per_absorber_counts[j];
    table.rows.push_back({static_cast<double>(j), static_cast<double>(stats.per_absorber_counts[j])});
  }
  payload["per_absorber_counts"] = counts;
  json ledger = json::object();
  for (const auto &[id, units] : stats.ledger.accounts())
  {
    ledger[id] = json{{"units", units}, {"energy", transactions::EnergyLedger::to_energy(units)}};
  }
  payload["ledger"] = ledger;
  payload["ledger_total_units"] = stats.ledger.total_units();
  payload["clamp_flag"] = stats.clamp_flag;
  payload["probability"] = stats.probability;
  return {payload, table, kExitOk};
}

inline std::vector<atomic::AtomicLevel> basis_for(const atomic::AtomicLevel &level,
                                                  const std::string &text)
{
  return text.empty() ? atomic::dipole_allowed_lower(level) : atomic::parse_basis(text);
}

inline json labels(std::span<const atomic::AtomicLevel> levels)
{
  json out = json::array();
  for (const auto &l : levels)
  {
    out.push_back(l.label);
  }
  return out;
}

inline ExperimentResult run_decay(const json &p)
{
  const auto level = atomic::AtomicLevel::parse(p.at("level").get<std::string>());
  const auto basis = basis_for(level, p.at("basis").get<std::string>());
  atomic::SelfEnergyConfig config;
  config.cutoff = p.at("cutoff").get<double>();
  config.epsilon = p.at("eps").get<double>();
  config.reduction = p.at("reduction").get<double>();
  config.refinements = static_cast<int>(p.at("refine").get<long long>());
  config.exclusion_window = p.at("window").get<double>();
  const auto shift = atomic::self_energy(level, basis, config);
  const auto golden = atomic::decay_rate_golden_rule(level, basis);

  json payload;
  payload["level"] = level.label;
  payload["basis"] = labels(basis);
  payload["gamma_au"] = shift.gamma;
  payload["gamma_si"] = shift.gamma / constants::kAtomicUnitOfTime;
  payload["delta_e_au"] = shift.real_part;
  payload["imaginary_part_au"] = shift.imaginary_part;
  payload["epsilon_schedule"] = shift.epsilon_schedule;
  payload["gamma_samples"] = shift.gamma_samples;
  payload["delta_e_samples"] = shift.real_samples;
  payload["cutoff"] = shift.cutoff;
  payload["golden_rule"] = json{{"gamma_au", golden.gamma_au}, {"gamma_si", golden.gamma_si}};
  payload["relative_deviation"] =
      golden.gamma_au > 0.0 ? (shift.gamma - golden.gamma_au) / golden.gamma_au : 0.0;
  payload["warnings"] = shift.warnings;
  for (const auto &w : shift.warnings)
  {
    std::cerr << "warning: " << w << '\n';
  }
  return {payload, std::nullopt, kExitOk};
}

inline ExperimentResult run_survival(const json &p)
{
  const auto level = atomic::AtomicLevel::parse(p.at("level").get<std::string>());
  const auto basis = basis_for(level, p.at("basis").get<std::string>());
  atomic::CrosscheckConfig config;
  config.dt_lifetimes = p.at("dt").get<double>();
  config.horizon_lifetimes = p.at("horizon").get<double>();
  config.record_every = static_cast<int>(p.at("record-every").get<long long>());
  config.threads = static_cast<unsigned>(p.at("threads").get<long long>());
  const auto report = atomic::transactional_decay_crosscheck(
      level, basis, p.at("trials").get<std::uint64_t>(), p.at("seed").get<std::uint64_t>(), config);

  json payload;
  payload["level"] = level.label;
  payload["basis"] = labels(basis);
  payload["gamma_reference_au"] = report.gamma_reference;
  payload["fitted_rate_au"] = report.fitted_rate;
  payload["standard_error_au"] = report.standard_error;
  payload["relative_deviation"] = report.relative_deviation;
  payload["dt_au"] = report.dt;
  payload["steps"] = report.steps;
  payload["trials"] = report.trials;
  payload["decays"] = report.decays;
  json channels = json::object();
  for (std::size_t c = 0; c < report.channel_labels.size(); ++c)
  {
    channels[report.channel_labels[c]] = report.channel_counts[c];
  }
  payload["channel_counts"] = channels;

  Table table{{"t", "empirical_survival", "model_survival"}, {}};
  for (std::size_t i = 0; i < report.times.size(); ++i)
  {
    table.rows.push_back({report.times[i], report.empirical_survival[i], report.model_survival[i]});
  }
  return {payload, table, kExitOk};
}

} // namespace detail

inline const std::vector<Experiment> &registry()
{
  using detail::slab_params;
  static const std::vector<Experiment> experiments = [] {
    std::vector<Experiment> out;
    out.push_back({"propagator verify",
                   "check D_F = D_bar + D_1 on a smeared Gaussian along an epsilon schedule",
                   {{"sigma", ParamType::Real, 1.0, "test function width"},
                    {"t0", ParamType::Real, 0.0, "test function center time"},
                    {"x0", ParamType::Real, 0.0, "test function center offset along z"},
                    {"normalization", ParamType::Real, 1.0, "test function integral"},
                    {"eps", ParamType::Real, 0.1, "initial regulator"},
                    {"reduction", ParamType::Real, 0.1, "regulator reduction factor"},
                    {"refine", ParamType::Integer, 3, "number of refinements"},
                    {"tolerance", ParamType::Real, 1e-6, "largest accepted residual"}},
                   detail::run_propagator_verify});
    auto wf_run = slab_params();
    wf_run.push_back({"grid-points", ParamType::Integer, 801, "field samples written to CSV"});
    out.push_back({"wf run", "solve one emitter + absorber slab configuration", wf_run,
                   detail::run_wf_run});
    auto wf_sweep = slab_params();
    wf_sweep.push_back({"gamma-min", ParamType::Real, 0.01, "smallest gamma_max in the sweep"});
    wf_sweep.push_back({"gamma-max", ParamType::Real, 0.28, "largest gamma_max in the sweep"});
    wf_sweep.push_back({"steps", ParamType::Integer, 10, "number of geometric sweep points"});
    out.push_back({"wf sweep", "cancellation diagnostics across absorber opacity", wf_sweep,
                   detail::run_wf_sweep});
    out.push_back({"transact",
                   "seeded offer/confirmation/actualization trials",
                   {{"trials", ParamType::Unsigned, std::uint64_t{1000000}, "number of trials"},
                    {"alpha", ParamType::Real, constants::kAlpha, "coupling constant"},
                    {"m2", ParamType::Real, 1.0, "squared matrix element |M|^2"},
                    {"seed", ParamType::Unsigned, std::uint64_t{1}, "master seed"},
                    {"scenario", ParamType::Text, nullptr, "scenario JSON file"},
                    {"threads", ParamType::Integer, 1, "worker threads"}},
                   detail::run_transact});
    out.push_back({"decay",
                   "complex energy shift and decay rate of a hydrogen level",
                   {{"level", ParamType::Text, "2p", "level label"},
                    {"basis", ParamType::Text, "",
                     "comma-separated intermediate levels (empty: all dipole-allowed lower)"},
                    {"cutoff", ParamType::Real, constants::kDefaultCutoff, "photon energy cutoff"},
                    {"eps", ParamType::Real, 1e-3, "initial regulator"},
                    {"reduction", ParamType::Real, 0.5, "regulator reduction factor"},
                    {"refine", ParamType::Integer, 4, "number of refinements"},
                    {"window", ParamType::Real, 0.0,
                     "half-width of the on-shell window removed from the real part"}},
                   detail::run_decay});
    out.push_back({"survival",
                   "Monte-Carlo transactional decay of a hydrogen level",
                   {{"level", ParamType::Text, "2p", "level label"},
                    {"basis", ParamType::Text, "",
                     "comma-separated lower levels (empty: all dipole-allowed)"},
                    {"trials", ParamType::Unsigned, std::uint64_t{100000}, "number of trials"},
                    {"dt", ParamType::Real, 0.01, "time step in lifetimes"},
                    {"horizon", ParamType::Real, 5.0, "censoring horizon in lifetimes"},
                    {"record-every", ParamType::Integer, 10, "steps between survival samples"},
                    {"seed", ParamType::Unsigned, std::uint64_t{1}, "master seed"},
                    {"threads", ParamType::Integer, 1, "worker threads"}},
                   detail::run_survival});
    return out;
  }();
  return experiments;
}

inline const Experiment &find_experiment(const std::string &name)
{
  for (const auto &e : registry())
  {
    if (e.name == name)
    {
      return e;
    }
  }
  throw UsageError("unknown experiment '" + name + "'");
}

// Reads a flat key/value config file. A RunRecord is accepted too, in which
// case its embedded config is used, so any record can be replayed.
inline nlohmann::json read_config_file(const std::string &path, const std::string &experiment)
{
  std::ifstream in(path);
  if (!in)
  {
    throw UsageError("cannot read config file '" + path + "'");
  }
  nlohmann::json doc;
  try
  {
    doc = nlohmann::json::parse(in);
  }
  catch (const nlohmann::json::exception &e)
  {
    throw UsageError("malformed config file '" + path + "': " + e.what());
  }
  if (doc.is_object() && doc.contains("config") && doc.contains("experiment"))
  {
    if (doc["experiment"] != experiment)
    {
      throw UsageError("record in '" + path + "' belongs to experiment '" +
                       doc["experiment"].get<std::string>() + "'");
    }
    doc = doc["config"];
  }
  if (!doc.is_object())
  {
    throw UsageError("config file '" + path + "' must hold a flat JSON object");
  }
  return doc;
}

struct ParsedCommand
{
  bool help = false;
  std::string help_text;
  RunConfig config;
};

inline ParsedCommand parse_config(const std::vector<std::string> &args)
{
  CLI::App app{"Time-symmetric QED numerical laboratory", "tsqed"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(constants::kToolVersion));

  struct Leaf
  {
    const Experiment *experiment;
    CLI::App *command;
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option *> options;
    std::string config;
    std::string out;
    std::string format = "json";
  };
  std::vector<Leaf> leaves;
  leaves.reserve(registry().size());
  std::map<std::string, CLI::App *> groups;
  for (const auto &e : registry())
  {
    CLI::App *parent = &app;
    std::string leaf_name = e.name;
    if (const auto space = e.name.find(' '); space != std::string::npos)
    {
      const std::string group = e.name.substr(0, space);
      leaf_name = e.name.substr(space + 1);
      auto &g = groups[group];
      if (g == nullptr)
      {
        g = app.add_subcommand(group, group + " experiments");
        g->require_subcommand(1);
      }
      parent = g;
    }
    leaves.push_back({&e, parent->add_subcommand(leaf_name, e.description), {}, {}, {}, {}, "json"});
  }
  for (auto &leaf : leaves)
  {
    for (const auto &spec : leaf.experiment->params)
    {
      auto *opt = leaf.command->add_option("--" + spec.name, leaf.raw[spec.name], spec.help);
      opt->default_str(detail::default_text(spec));
      opt->type_name(spec.type == ParamType::Real      ? "REAL"
                     : spec.type == ParamType::Integer ? "INT"
                     : spec.type == ParamType::Unsigned ? "UINT"
                                                        : "TEXT");
      leaf.options[spec.name] = opt;
    }
    leaf.command->add_option("--config", leaf.config, "flat JSON config file (or a run record)");
    leaf.command
        ->add_option("--out", leaf.out,
                     std::string("output path (default: $") + kOutputDirEnv +
                         " or the working directory)");
    leaf.command->add_option("--format", leaf.format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}))
        ->default_str("json");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  ParsedCommand parsed;
  try
  {
    app.parse(reversed);
  }
  catch (const CLI::CallForHelp &)
  {
    parsed.help = true;
    // help() follows the selected subcommand chain.
    parsed.help_text = app.help();
    return parsed;
  }
  catch (const CLI::CallForVersion &)
  {
    parsed.help = true;
    parsed.help_text = std::string(constants::kToolVersion) + "\n";
    return parsed;
  }
  catch (const CLI::ParseError &e)
  {
    throw UsageError(e.what());
  }

  const Leaf *chosen = nullptr;
  for (const auto &leaf : leaves)
  {
    if (leaf.command->parsed())
    {
      chosen = &leaf;
    }
  }
  if (chosen == nullptr)
  {
    throw UsageError("no experiment selected");
  }

  RunConfig &config = parsed.config;
  config.experiment = chosen->experiment->name;
  config.format = chosen->format;
  config.config_file = chosen->config;

  nlohmann::json file = nlohmann::json::object();
  if (!chosen->config.empty())
  {
    file = read_config_file(chosen->config, config.experiment);
    for (const auto &[key, value] : file.items())
    {
      const bool known = std::any_of(chosen->experiment->params.begin(),
                                     chosen->experiment->params.end(),
                                     [&](const ParamSpec &s) { return s.name == key; });
      if (!known)
      {
        throw UsageError("unknown config key '" + key + "' for experiment '" + config.experiment +
                         "'");
      }
    }
  }
  for (const auto &spec : chosen->experiment->params)
  {
    const bool from_flag = chosen->options.at(spec.name)->count() > 0;
    json value = spec.default_value;
    if (file.contains(spec.name))
    {
      value = detail::coerce_file_value(spec, file[spec.name]);
    }
    if (from_flag)
    {
      json flag_value = detail::parse_value(spec, chosen->raw.at(spec.name));
      if (file.contains(spec.name) && flag_value != value)
      {
        config.overrides.push_back({spec.name, value, flag_value});
      }
      value = flag_value;
    }
    if (value.is_null())
    {
      throw UsageError("missing required parameter --" + spec.name);
    }
    config.params[spec.name] = value;
  }

  if (!chosen->out.empty())
  {
    config.output = chosen->out;
  }
  else
  {
    const char *dir = std::getenv(kOutputDirEnv);
    config.output = std::filesystem::path(dir != nullptr && *dir != '\0' ? dir : ".") /
                    (detail::slug(config.experiment) + "." + config.format);
  }
  return parsed;
}

// Writes through a temporary file in the same directory and renames it into
// place, so the target is either absent, the old file, or complete.
inline void atomic_write(const std::filesystem::path &path, const std::string &contents)
{
  std::error_code ec;
  const auto parent = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::filesystem::create_directories(parent, ec);
  if (ec)
  {
    throw IoError("cannot create output directory '" + parent.string() + "': " + ec.message());
  }
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
    {
      throw IoError("cannot open '" + tmp.string() + "' for writing");
    }
    out << contents;
    out.flush();
    if (!out)
    {
      std::filesystem::remove(tmp, ec);
      throw IoError("write to '" + tmp.string() + "' failed");
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec)
  {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move result into '" + path.string() + "'");
  }
}

inline json config_echo(const RunConfig &config)
{
  return config.params;
}

inline std::string table_csv(const Table &table, const json &config, const std::string &experiment)
{
  std::ostringstream out;
  out << "# experiment: " << experiment << '\n';
  out << "# config: " << config.dump() << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i)
  {
    out << (i ? "," : "") << table.columns[i];
  }
  out << '\n';
  for (const auto &row : table.rows)
  {
    for (std::size_t i = 0; i < row.size(); ++i)
    {
      out << (i ? "," : "") << detail::format_double(row[i]);
    }
    out << '\n';
  }
  return out.str();
}

struct RunRecord
{
  json document;
  int exit_code = kExitOk;
  std::vector<std::filesystem::path> written;

  const json &payload() const { return document.at("payload"); }
};

inline RunRecord execute(const RunConfig &config)
{
  const auto &experiment = find_experiment(config.experiment);
  const auto started = std::chrono::system_clock::now();
  auto result = experiment.run(config.params);
  const auto finished = std::chrono::system_clock::now();

  RunRecord record;
  record.exit_code = result.exit_code;
  json &doc = record.document;
  doc["tool"] = "tsqed";
  doc["version"] = constants::kToolVersion;
  doc["experiment"] = config.experiment;
  doc["config"] = config_echo(config);
  json overrides = json::array();
  for (const auto &o : config.overrides)
  {
    overrides.push_back(json{{"key", o.key}, {"file_value", o.file_value}, {"flag_value", o.flag_value}});
  }
  doc["overrides"] = overrides;
  if (!config.config_file.empty())
  {
    doc["config_file"] = config.config_file;
  }
  doc["started_at"] = detail::utc_timestamp(started);
  doc["finished_at"] = detail::utc_timestamp(finished);
  doc["provenance"] = json{{"constants_table", constants::kTableVersion},
                           {"oracles",
                            {{"residue", "closed-contour residues, v1"},
                             {"transfer_matrix", "slab transfer matrix, v1"},
                             {"golden_rule", "on-shell dipole rate, v1"}}}};
  doc["payload"] = result.payload;

  const auto csv_path = [&]() {
    auto p = config.output;
    return config.format == "csv" ? p : p.replace_extension(".csv");
  }();
  if (config.format == "json")
  {
    atomic_write(config.output, doc.dump(2) + "\n");
    record.written.push_back(config.output);
    if (result.table)
    {
      atomic_write(csv_path, table_csv(*result.table, doc["config"], config.experiment));
      record.written.push_back(csv_path);
    }
  }
  else
  {
    if (!result.table)
    {
      throw UsageError("experiment '" + config.experiment + "' has no CSV output; use --format json");
    }
    atomic_write(csv_path, table_csv(*result.table, doc["config"], config.experiment));
    record.written.push_back(csv_path);
  }
  return record;
}

inline int main(int argc, char **argv)
{
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i)
  {
    args.emplace_back(argv[i]);
  }
  try
  {
    const auto parsed = parse_config(args);
    if (parsed.help)
    {
      std::cout << parsed.help_text;
      return kExitOk;
    }
    const auto record = execute(parsed.config);
    for (const auto &path : record.written)
    {
      std::cout << path.string() << '\n';
    }
    if (record.exit_code != kExitOk)
    {
      std::cerr << "error: " << parsed.config.experiment << " check failed\n";
    }
    return record.exit_code;
  }
  catch (const Error &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.category());
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
}

} // namespace tsqed::runner

#endif // TSQED_RUNNER_HPP
