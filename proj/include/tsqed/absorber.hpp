#ifndef TSQED_ABSORBER_HPP
#define TSQED_ABSORBER_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tsqed/constants.hpp"
#include "tsqed/errors.hpp"

namespace tsqed::absorber
{

using cplx = std::complex<double>;
using namespace std::complex_literals;

//
// Frequency-domain Wheeler-Feynman simulator in 1+1D. Fields carry the time
// dependence exp(-i omega t) and obey
//   E'' + omega^2 E = 2 i omega sum_s c_s delta(x - x_s),
// for point sources of amplitude c_s. The retarded (outgoing) and advanced
// (incoming) solutions for a unit source are g_out and g_in below.
//

struct Emitter
{
  double position = 0.0;
  double omega = 1.0;
  cplx strength = 1.0;
};

struct Absorber
{
  double position = 0.0;
  double gamma = 0.0;
};

inline cplx outgoing_green(double omega, double dx)
{
  return std::exp(1i * (omega * std::abs(dx)));
}

inline cplx incoming_green(double omega, double dx)
{
  return -std::exp(-1i * (omega * std::abs(dx)));
}

// Half-retarded, half-advanced kernel: i sin(omega |dx|). Vanishes at the
// source, so a time-symmetric source exerts no self force.
inline cplx symmetric_green(double omega, double dx)
{
  return 0.5 * (outgoing_green(omega, dx) + incoming_green(omega, dx));
}

inline cplx time_symmetric_source_field(const Emitter &emitter, double x)
{
  return emitter.strength * symmetric_green(emitter.omega, x - emitter.position);
}

inline cplx retarded_source_field(const Emitter &emitter, double x)
{
  return emitter.strength * outgoing_green(emitter.omega, x - emitter.position);
}

inline cplx advanced_source_field(const Emitter &emitter, double x)
{
  return emitter.strength * incoming_green(emitter.omega, x - emitter.position);
}

struct SolverConfig
{
  // Minimum separation between any two sources, in wavelengths.
  double min_spacing_wavelengths = 1.0 / 20.0;
  double max_condition = 1e10;
};

struct AbsorberSolution
{
  Emitter emitter;
  std::vector<Absorber> absorbers;
  std::vector<cplx> amplitudes;
  double residual = 0.0;
  double condition = 1.0;
};

namespace detail
{

inline void validate(const Emitter &emitter, std::span<const Absorber> absorbers,
                     const SolverConfig &config)
{
  if (!(emitter.omega > 0.0) || !std::isfinite(emitter.omega))
  {
    throw InvalidArgumentError("emitter frequency must be positive");
  }
  if (!std::isfinite(emitter.position))
  {
    throw InvalidArgumentError("emitter position must be finite");
  }
  const double wavelength = constants::kTwoPi / emitter.omega;
  const double min_spacing = config.min_spacing_wavelengths * wavelength;
  std::vector<double> positions{emitter.position};
  for (const auto &a : absorbers)
  {
    if (!(a.gamma >= 0.0) || !std::isfinite(a.gamma) || !std::isfinite(a.position))
    {
      throw InvalidArgumentError("absorber needs a finite position and gamma >= 0");
    }
    positions.push_back(a.position);
  }
  std::sort(positions.begin(), positions.end());
  for (std::size_t i = 1; i < positions.size(); ++i)
  {
    // Small tolerance so layouts built at exactly the minimum spacing pass.
    if (positions[i] - positions[i - 1] < min_spacing * (1.0 - 1e-12))
    {
      throw InvalidArgumentError("sources closer than the minimum spacing of " +
                                 std::to_string(min_spacing));
    }
  }
}

} // namespace detail

// Self-consistent response a_j = -gamma_j * (incident field at x_j), where
// the incident field is the emitter's time-symmetric field plus the
// time-symmetric fields of all other absorbers.
inline AbsorberSolution solve_absorber_response(const Emitter &emitter,
                                                std::vector<Absorber> absorbers,
                                                const SolverConfig &config = {})
{
  detail::validate(emitter, absorbers, config);
  AbsorberSolution solution{emitter, std::move(absorbers), {}, 0.0, 1.0};
  const auto n = static_cast<Eigen::Index>(solution.absorbers.size());
  if (n == 0)
  {
    return solution;
  }
  const double omega = emitter.omega;
  Eigen::MatrixXcd system = Eigen::MatrixXcd::Identity(n, n);
  Eigen::VectorXcd rhs(n);
  for (Eigen::Index j = 0; j < n; ++j)
  {
    const auto &aj = solution.absorbers[static_cast<std::size_t>(j)];
    rhs(j) = -aj.gamma * time_symmetric_source_field(emitter, aj.position);
    for (Eigen::Index i = 0; i < n; ++i)
    {
      if (i != j)
      {
        const auto &ai = solution.absorbers[static_cast<std::size_t>(i)];
        system(j, i) = aj.gamma * symmetric_green(omega, aj.position - ai.position);
      }
    }
  }
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(system);
  const double rcond = lu.rcond();
  solution.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(solution.condition <= config.max_condition))
  {
    throw SolverError("absorber system is singular or ill-conditioned", solution.condition);
  }
  const Eigen::VectorXcd a = lu.solve(rhs);
  const double rhs_norm = rhs.norm();
  solution.residual = rhs_norm > 0.0 ? (system * a - rhs).norm() / rhs_norm : (system * a).norm();
  solution.amplitudes.assign(a.data(), a.data() + n);
  return solution;
}

// Emitter's time-symmetric field plus every absorber's time-symmetric response.
inline cplx total_field(const AbsorberSolution &solution, double x)
{
  cplx field = time_symmetric_source_field(solution.emitter, x);
  const double omega = solution.emitter.omega;
  for (std::size_t j = 0; j < solution.absorbers.size(); ++j)
  {
    field += solution.amplitudes[j] * symmetric_green(omega, x - solution.absorbers[j].position);
  }
  return field;
}

// Total field minus the emitter's own time-symmetric field.
inline cplx absorber_response_field(const AbsorberSolution &solution, double x)
{
  return total_field(solution, x) - time_symmetric_source_field(solution.emitter, x);
}

//
// Diagnostics.
//

struct ProbeRegion
{
  double x1 = 0.0;
  double x2 = 0.0;
};

struct CancellationReport
{
  // Plane-wave amplitudes in the probe region, "outgoing" meaning moving
  // away from the emitter.
  cplx outgoing = 0.0;
  cplx incoming = 0.0;
  // |incoming| and |outgoing| relative to the full retarded amplitude |S|.
  double advanced_residual = 0.0;
  double retarded_gain = 0.0;
  // Power delivered to the field by the emitter, taken out by the absorbers,
  // and carried net outward beyond the outermost sources.
  double energy_emitted = 0.0;
  double energy_absorbed = 0.0;
  double energy_transmitted = 0.0;
  // Net transmitted power split into outgoing power beyond the outermost
  // sources and advanced power arriving from infinity. With time-symmetric
  // sources only, the two are always equal.
  double energy_far_outgoing = 0.0;
  double energy_far_incoming = 0.0;
  // Power radiated by the bare emitter in the retarded theory, 2 |S|^2.
  double reference_power = 0.0;

  double energy_balance_residual() const
  {
    return energy_emitted - energy_absorbed - energy_transmitted;
  }
};

namespace detail
{

// Far-field plane-wave coefficients beyond all sources. On the right the
// field is A exp(i w x) + B exp(-i w x); on the left A exp(-i w x) +
// B exp(i w x), A outgoing in both cases.
struct FarField
{
  cplx right_out = 0.0;
  cplx right_in = 0.0;
  cplx left_out = 0.0;
  cplx left_in = 0.0;
};

inline FarField far_field(const AbsorberSolution &solution)
{
  const double omega = solution.emitter.omega;
  FarField far;
  auto add = [&](cplx c, double xs) {
    // symmetric_green = (exp(i w |x - xs|) - exp(-i w |x - xs|)) / 2
    far.right_out += 0.5 * c * std::exp(-1i * (omega * xs));
    far.right_in -= 0.5 * c * std::exp(1i * (omega * xs));
    far.left_out += 0.5 * c * std::exp(1i * (omega * xs));
    far.left_in -= 0.5 * c * std::exp(-1i * (omega * xs));
  };
  add(solution.emitter.strength, solution.emitter.position);
  for (std::size_t j = 0; j < solution.absorbers.size(); ++j)
  {
    add(solution.amplitudes[j], solution.absorbers[j].position);
  }
  return far;
}

} // namespace detail

// Two-point outgoing/incoming decomposition in a source-free probe interval
// between the emitter and the nearest absorber on that side, plus the power
// balance from the source-power identity P_s = 2 Re(conj(E(x_s)) c_s).
inline CancellationReport cancellation_report(const AbsorberSolution &solution,
                                              const ProbeRegion &probe)
{
  const double omega = solution.emitter.omega;
  const double x0 = solution.emitter.position;
  const double lo = std::min({x0, probe.x1, probe.x2});
  const double hi = std::max({x0, probe.x1, probe.x2});
  if (probe.x1 == probe.x2 || (probe.x1 - x0) * (probe.x2 - x0) <= 0.0)
  {
    throw InvalidArgumentError("invalid probe: points must be distinct and on one side of the "
                               "emitter");
  }
  for (const auto &a : solution.absorbers)
  {
    if (a.position >= lo && a.position <= hi)
    {
      throw InvalidArgumentError("invalid probe: region overlaps the absorber positions");
    }
  }
  const double det_phase = std::sin(omega * (probe.x2 - probe.x1));
  if (std::abs(det_phase) < 1e-6)
  {
    throw InvalidArgumentError("invalid probe: points half a wavelength apart cannot separate "
                               "the two plane waves");
  }

  // Away from the emitter is +x on the right, -x on the left.
  const double dir = probe.x1 > x0 ? 1.0 : -1.0;
  const cplx e1 = total_field(solution, probe.x1);
  const cplx e2 = total_field(solution, probe.x2);
  const cplx p1 = std::exp(1i * (dir * omega * (probe.x1 - x0)));
  const cplx p2 = std::exp(1i * (dir * omega * (probe.x2 - x0)));
  // e = A p + B / p at both points.
  const cplx det = p1 / p2 - p2 / p1;
  const cplx outgoing = (e1 / p2 - e2 / p1) / det;
  const cplx incoming = (p1 * e2 - p2 * e1) / det;

  CancellationReport report;
  report.outgoing = outgoing;
  report.incoming = incoming;
  const double reference = std::abs(solution.emitter.strength);
  if (reference > 0.0)
  {
    report.retarded_gain = std::abs(outgoing) / reference;
    report.advanced_residual = std::abs(incoming) / reference;
  }
  report.reference_power = 2.0 * reference * reference;

  report.energy_emitted =
      2.0 * std::real(std::conj(total_field(solution, x0)) * solution.emitter.strength);
  for (std::size_t j = 0; j < solution.absorbers.size(); ++j)
  {
    const cplx local = total_field(solution, solution.absorbers[j].position);
    report.energy_absorbed += 2.0 * solution.absorbers[j].gamma * std::norm(local);
  }
  const auto far = detail::far_field(solution);
  report.energy_far_outgoing = std::norm(far.right_out) + std::norm(far.left_out);
  report.energy_far_incoming = std::norm(far.right_in) + std::norm(far.left_in);
  report.energy_transmitted = report.energy_far_outgoing - report.energy_far_incoming;
  return report;
}

struct FieldGrid
{
  double x_min = -1.0;
  double x_max = 1.0;
  int points = 201;
};

struct SampledField
{
  std::vector<double> x;
  std::vector<cplx> field;
  // Relative homogeneous-operator residual per point; NaN at the ends and
  // wherever the three-point stencil straddles an absorber.
  std::vector<double> residual;
  double max_residual = 0.0;
  int checked_points = 0;
};

namespace detail
{

// Relative residual of the three-point Helmholtz stencil with the
// dispersion-matched wavenumber k_h^2 = 2 (1 - cos(omega h)) / h^2, which
// annihilates every homogeneous solution sampled on the grid.
inline void apply_homogeneous_stencil(SampledField &sampled, double omega,
                                      std::span<const double> sources)
{
  const auto n = sampled.x.size();
  sampled.residual.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (n < 3)
  {
    return;
  }
  const double h = sampled.x[1] - sampled.x[0];
  const double kh2 = 2.0 * (1.0 - std::cos(omega * h)) / (h * h);
  double scale = 0.0;
  for (const auto &v : sampled.field)
  {
    scale = std::max(scale, std::abs(v));
  }
  for (std::size_t i = 1; i + 1 < n; ++i)
  {
    const double lo = sampled.x[i - 1];
    const double hi = sampled.x[i + 1];
    const bool straddles = std::any_of(sources.begin(), sources.end(),
                                       [&](double s) { return s >= lo && s <= hi; });
    if (straddles)
    {
      continue;
    }
    const cplx lap = (sampled.field[i + 1] - 2.0 * sampled.field[i] + sampled.field[i - 1]) / (h * h);
    const double r = scale > 0.0 ? std::abs(lap + kh2 * sampled.field[i]) / (omega * omega * scale)
                                 : 0.0;
    sampled.residual[i] = r;
    sampled.max_residual = std::max(sampled.max_residual, r);
    ++sampled.checked_points;
  }
}

inline std::vector<double> grid_points(const FieldGrid &grid)
{
  if (grid.points < 3 || !(grid.x_max > grid.x_min))
  {
    throw InvalidArgumentError("field grid needs x_max > x_min and at least 3 points");
  }
  std::vector<double> xs(static_cast<std::size_t>(grid.points));
  const double h = (grid.x_max - grid.x_min) / (grid.points - 1);
  for (int i = 0; i < grid.points; ++i)
  {
    xs[static_cast<std::size_t>(i)] = grid.x_min + h * i;
  }
  return xs;
}

inline std::vector<double> absorber_positions(const AbsorberSolution &solution)
{
  std::vector<double> xs;
  for (const auto &a : solution.absorbers)
  {
    xs.push_back(a.position);
  }
  return xs;
}

} // namespace detail

// Total field minus the emitter's full retarded field. Away from the
// absorbers this remainder is source free: it solves the homogeneous
// equation, which is checked point by point.
inline SampledField free_field_component(const AbsorberSolution &solution, const FieldGrid &grid)
{
  SampledField out;
  out.x = detail::grid_points(grid);
  for (double x : out.x)
  {
    out.field.push_back(total_field(solution, x) - retarded_source_field(solution.emitter, x));
  }
  detail::apply_homogeneous_stencil(out, solution.emitter.omega,
                                    detail::absorber_positions(solution));
  return out;
}

// Same diagnostics for the absorbers' combined response field.
inline SampledField sample_absorber_response(const AbsorberSolution &solution,
                                             const FieldGrid &grid)
{
  SampledField out;
  out.x = detail::grid_points(grid);
  for (double x : out.x)
  {
    out.field.push_back(absorber_response_field(solution, x));
  }
  detail::apply_homogeneous_stencil(out, solution.emitter.omega,
                                    detail::absorber_positions(solution));
  return out;
}

inline SampledField sample_total_field(const AbsorberSolution &solution, const FieldGrid &grid)
{
  SampledField out;
  out.x = detail::grid_points(grid);
  for (double x : out.x)
  {
    out.field.push_back(total_field(solution, x));
  }
  std::vector<double> sources = detail::absorber_positions(solution);
  sources.push_back(solution.emitter.position);
  detail::apply_homogeneous_stencil(out, solution.emitter.omega, sources);
  return out;
}

//
// Slab layouts.
//

// Two mirror-image absorber slabs around the emitter (a 1D light-tight box
// when opaque). gamma ramps from gamma_max/m^p to gamma_max across each slab
// of m absorbers to keep the entry reflection small.
struct SlabConfig
{
  int absorbers = 100;
  double gamma_max = 0.8;
  double spacing = constants::kTwoPi / 10.0;
  double gap = 3.0;
  double taper_exponent = 2.0;
};

inline std::vector<Absorber> mirror_slabs(const Emitter &emitter, const SlabConfig &slab)
{
  if (slab.absorbers < 0 || slab.absorbers % 2 != 0)
  {
    throw InvalidArgumentError("mirror slabs need an even, non-negative absorber count");
  }
  if (!(slab.spacing > 0.0) || !(slab.gap > 0.0) || !(slab.gamma_max >= 0.0) ||
      !(slab.taper_exponent >= 0.0))
  {
    throw InvalidArgumentError("slab spacing and gap must be positive, gamma and taper "
                               "non-negative");
  }
  const int half = slab.absorbers / 2;
  std::vector<Absorber> out;
  out.reserve(static_cast<std::size_t>(slab.absorbers));
  for (int j = 0; j < half; ++j)
  {
    const double ramp = std::pow(static_cast<double>(j + 1) / half, slab.taper_exponent);
    const double gamma = slab.gamma_max * ramp;
    const double offset = slab.gap + j * slab.spacing;
    out.push_back({emitter.position + offset, gamma});
    out.push_back({emitter.position - offset, gamma});
  }
  return out;
}

inline double total_opacity(std::span<const Absorber> absorbers)
{
  double sum = 0.0;
  for (const auto &a : absorbers)
  {
    sum += a.gamma;
  }
  return sum;
}

// Probe interval between the emitter and the first absorber on the right.
inline ProbeRegion default_probe(const Emitter &emitter, const SlabConfig &slab)
{
  return {emitter.position + 0.3 * slab.gap, emitter.position + 0.6 * slab.gap};
}

} // namespace tsqed::absorber

#endif // TSQED_ABSORBER_HPP
