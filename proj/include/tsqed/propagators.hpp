#ifndef TSQED_PROPAGATORS_HPP
#define TSQED_PROPAGATORS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tsqed/constants.hpp"
#include "tsqed/errors.hpp"
#include "tsqed/quadrature.hpp"

namespace tsqed::propagators
{

using cplx = std::complex<double>;
using namespace std::complex_literals;

enum class PropagatorKind
{
  Retarded,
  Advanced,
  TimeSymmetric,
  Feynman,
  PositiveFrequency,
  FreeField
};

inline constexpr std::array<PropagatorKind, 6> kAllKinds = {
    PropagatorKind::Retarded,    PropagatorKind::Advanced,          PropagatorKind::TimeSymmetric,
    PropagatorKind::Feynman,     PropagatorKind::PositiveFrequency, PropagatorKind::FreeField};

inline std::string_view to_string(PropagatorKind kind)
{
  switch (kind)
  {
    case PropagatorKind::Retarded:
      return "retarded";
    case PropagatorKind::Advanced:
      return "advanced";
    case PropagatorKind::TimeSymmetric:
      return "time_symmetric";
    case PropagatorKind::Feynman:
      return "feynman";
    case PropagatorKind::PositiveFrequency:
      return "positive_frequency";
    case PropagatorKind::FreeField:
      return "free_field";
  }
  return "unknown";
}

// Frequency/wavenumber sample in 1+1D (c = hbar = 1).
struct Mode
{
  double omega = 0.0;
  double k = 0.0;

  double invariant() const { return omega * omega - k * k; }
  bool on_shell(double tolerance = 1e-12) const { return std::abs(invariant()) < tolerance; }
};

// Isotropic 3+1D Gaussian smearing function
//   f(t, x) = N / ((2 pi)^2 sigma^4) exp(-((t - t0)^2 + |x - x0 e_z|^2) / (2 sigma^2)),
// which integrates to N over spacetime.
class TestFunction
{
public:
  static TestFunction gaussian(double t0, double x0, double width, double normalization = 1.0)
  {
    if (!(width > 0.0) || !std::isfinite(width))
    {
      throw InvalidArgumentError("test function width must be positive and finite");
    }
    if (!std::isfinite(t0) || !std::isfinite(x0) || !std::isfinite(normalization) ||
        normalization < 0.0)
    {
      throw InvalidArgumentError("test function center and normalization must be finite, "
                                 "normalization non-negative");
    }
    return TestFunction(t0, x0, width, normalization);
  }

  double t0() const { return t0_; }
  double x0() const { return x0_; }
  double width() const { return width_; }
  double normalization() const { return normalization_; }

  // Value at the spacetime point (t, r) where r is the distance from the
  // spatial center.
  double value(double t, double r) const
  {
    const double s2 = width_ * width_;
    const double dt = t - t0_;
    return normalization_ / (constants::kTwoPi * constants::kTwoPi * s2 * s2) *
           std::exp(-(dt * dt + r * r) / (2.0 * s2));
  }

  // Angular average of the spacetime Fourier transform
  //   F(omega, k) = \int d^4x f(x) exp(-i omega t + i k.x)
  // over directions of k with |k| = kappa.
  cplx fourier_radial(double omega, double kappa) const
  {
    const double s2 = width_ * width_;
    const double envelope = normalization_ * std::exp(-0.5 * s2 * (omega * omega + kappa * kappa));
    return envelope * spherical_j0(kappa * x0_) * std::exp(-1i * omega * t0_);
  }

private:
  TestFunction(double t0, double x0, double width, double normalization)
    : t0_(t0), x0_(x0), width_(width), normalization_(normalization)
  {
  }

  static double spherical_j0(double z)
  {
    if (std::abs(z) < 1e-4)
    {
      const double z2 = z * z;
      return 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
    }
    return std::sin(z) / z;
  }

  double t0_;
  double x0_;
  double width_;
  double normalization_;
};

// Geometric sequence of regulators eps_0 > eps_1 > ... (refinements + 1 values).
class EpsilonSchedule
{
public:
  EpsilonSchedule(double initial, double reduction, int refinements)
    : initial_(initial), reduction_(reduction), refinements_(refinements)
  {
    if (!(initial > 0.0) || !std::isfinite(initial))
    {
      throw InvalidArgumentError("epsilon schedule needs a positive initial value");
    }
    if (!(reduction > 0.0 && reduction < 1.0))
    {
      throw InvalidArgumentError("epsilon reduction factor must lie in (0, 1)");
    }
    if (refinements < 1)
    {
      throw InvalidArgumentError("epsilon schedule needs at least one refinement");
    }
  }

  double initial() const { return initial_; }
  double reduction() const { return reduction_; }
  int refinements() const { return refinements_; }

  std::vector<double> values() const
  {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(refinements_) + 1);
    double eps = initial_;
    for (int i = 0; i <= refinements_; ++i)
    {
      out.push_back(eps);
      eps *= reduction_;
    }
    return out;
  }

private:
  double initial_;
  double reduction_;
  int refinements_;
};

//
// Position space (1+1D, wave operator d_t^2 - d_x^2, unit source at the origin).
//

// Closed-form Green's functions; the step function takes the value 1/2 on
// the light cone itself.
inline cplx greens_position(PropagatorKind kind, double t, double x)
{
  if (!std::isfinite(t) || !std::isfinite(x))
  {
    throw InvalidArgumentError("greens_position needs a finite spacetime point");
  }
  auto step = [](double u) { return u > 0.0 ? 1.0 : (u < 0.0 ? 0.0 : 0.5); };
  const double ax = std::abs(x);
  const double retarded = 0.5 * step(t - ax);
  const double advanced = 0.5 * step(-t - ax);
  switch (kind)
  {
    case PropagatorKind::Retarded:
      return retarded;
    case PropagatorKind::Advanced:
      return advanced;
    case PropagatorKind::TimeSymmetric:
      return 0.5 * (retarded + advanced);
    default:
      throw RepresentationError(std::string("propagator kind '") + std::string(to_string(kind)) +
                                "' has no bounded 1+1D position-space form; use the fixed-k "
                                "time representation");
  }
}

//
// Momentum space.
//

namespace detail
{

// Regulated kernel, analytically continued to complex omega so that the
// fixed-k tails can be taken along rotated rays.
inline cplx kernel(PropagatorKind kind, cplx omega, double k, double eps)
{
  const cplx s = omega * omega - k * k;
  switch (kind)
  {
    case PropagatorKind::Retarded:
    {
      const cplx w = omega + 1i * eps;
      return 1.0 / (w * w - k * k);
    }
    case PropagatorKind::Advanced:
    {
      const cplx w = omega - 1i * eps;
      return 1.0 / (w * w - k * k);
    }
    case PropagatorKind::Feynman:
      return 1.0 / (s + 1i * eps);
    case PropagatorKind::TimeSymmetric:
      return s / (s * s + eps * eps);
    case PropagatorKind::FreeField:
      return constants::kFreeFieldSign * 1i * eps / (s * s + eps * eps);
    case PropagatorKind::PositiveFrequency:
    {
      const double re = omega.real();
      const double step = re > 0.0 ? 1.0 : (re < 0.0 ? 0.0 : 0.5);
      return step * 2.0 * eps / (s * s + eps * eps);
    }
  }
  return 0.0;
}

// Real-argument kernel; avoids complex arithmetic on s in the hot loops.
inline cplx kernel_real(PropagatorKind kind, double omega, double k, double eps)
{
  const double s = omega * omega - k * k;
  const double den = s * s + eps * eps;
  switch (kind)
  {
    case PropagatorKind::Feynman:
      return cplx(s / den, -eps / den);
    case PropagatorKind::TimeSymmetric:
      return s / den;
    case PropagatorKind::FreeField:
      return cplx(0.0, constants::kFreeFieldSign * eps / den);
    case PropagatorKind::PositiveFrequency:
      return (omega > 0.0 ? 1.0 : (omega < 0.0 ? 0.0 : 0.5)) * 2.0 * eps / den;
    default:
      return kernel(kind, cplx(omega, 0.0), k, eps);
  }
}

} // namespace detail

// Value of the kind's iε-regulated momentum-space propagator at the mode.
inline cplx propagator_momentum(PropagatorKind kind, const Mode &mode, double epsilon)
{
  if (!(epsilon > 0.0))
  {
    throw InvalidArgumentError("invalid regulator: epsilon must be positive");
  }
  return detail::kernel_real(kind, mode.omega, mode.k, epsilon);
}

//
// Fixed-k time representation.
//

struct ContourConfig
{
  double epsilon = 1e-2;
  // Half-width of the real-axis segment; beyond it the integral runs along
  // rays rotated into the half plane where exp(-i omega t) decays. Zero picks
  // a width that clears every pole.
  double window = 0.0;
  quadrature::QuadratureConfig quad{1e-14, 1e-11, 100000};
};

struct FixedKResult
{
  cplx value;
  double error;
};

inline FixedKResult fixed_k_time_propagator_detailed(PropagatorKind kind, double k, double t,
                                                     const ContourConfig &contour = {})
{
  if (k == 0.0 || !std::isfinite(k) || !std::isfinite(t))
  {
    throw InvalidArgumentError("fixed-k propagator needs finite k != 0 and finite t");
  }
  if (!(contour.epsilon > 0.0))
  {
    throw InvalidArgumentError("invalid regulator: epsilon must be positive");
  }
  if (contour.window < 0.0 || contour.quad.max_intervals <= 0)
  {
    throw InvalidArgumentError("contour resolution parameters must be positive");
  }
  const double eps = contour.epsilon;
  const double ak = std::abs(k);
  const double window =
      contour.window > 0.0 ? contour.window : 2.0 * ak + 8.0 + 4.0 * std::sqrt(eps);
  if (window <= ak + std::sqrt(eps))
  {
    throw InvalidArgumentError("contour window must enclose the poles");
  }
  const bool half_line = (kind == PropagatorKind::PositiveFrequency);

  auto on_axis = [&](double w) {
    return detail::kernel_real(kind, w, k, eps) * std::exp(-1i * (w * t));
  };
  const std::array<double, 3> poles = {-ak, 0.0, ak};
  auto central = quadrature::integrate(on_axis, half_line ? 0.0 : -window, window, contour.quad,
                                       poles);

  cplx tails = 0.0;
  double tail_error = 0.0;
  auto add = [&](const auto &res, cplx factor) {
    tails += factor * res.value;
    tail_error += std::abs(factor) * res.error;
  };
  if (std::abs(t) < 1e-300)
  {
    auto right = [&](double w) { return detail::kernel(kind, cplx(w, 0.0), k, eps); };
    add(quadrature::integrate_to_infinity(right, window, contour.quad), 1.0);
    if (!half_line)
    {
      auto left = [&](double w) { return detail::kernel(kind, cplx(-w, 0.0), k, eps); };
      add(quadrature::integrate_to_infinity(left, window, contour.quad), 1.0);
    }
  }
  else
  {
    // t > 0 rotates into the lower half plane, t < 0 into the upper one.
    const double dir = t > 0.0 ? -1.0 : 1.0;
    const double at = std::abs(t);
    auto right = [&](double s) {
      return detail::kernel(kind, cplx(window, dir * s), k, eps) * std::exp(-s * at);
    };
    add(quadrature::integrate_to_infinity(right, 0.0, contour.quad),
        cplx(0.0, dir) * std::exp(-1i * (window * t)));
    if (!half_line)
    {
      auto left = [&](double s) {
        return detail::kernel(kind, cplx(-window, dir * s), k, eps) * std::exp(-s * at);
      };
      add(quadrature::integrate_to_infinity(left, 0.0, contour.quad),
          cplx(0.0, -dir) * std::exp(1i * (window * t)));
    }
  }
  return {constants::kFixedKMeasure * (central.value + tails),
          constants::kFixedKMeasure * (central.error + tail_error)};
}

// J(k, t) = \int domega / (2 pi) exp(-i omega t) D(omega, k), integrated
// numerically with the kind's pole prescription.
inline cplx fixed_k_time_propagator(PropagatorKind kind, double k, double t,
                                    const ContourConfig &contour = {})
{
  return fixed_k_time_propagator_detailed(kind, k, t, contour).value;
}

//
// Smeared pairings in 3+1D momentum space.
//

struct PairingConfig
{
  quadrature::QuadratureConfig outer{1e-13, 1e-10, 4000};
  quadrature::QuadratureConfig inner{1e-13, 1e-10, 20000};
  // The Gaussian envelope is dropped below this fraction of its peak.
  double envelope_floor = 1e-20;
};

struct Pairing
{
  cplx value;
  double error;
};

namespace detail
{

// Several kernel values carried through one adaptive integration, so their
// pairings share a partition and differ only by the kernels themselves.
template <std::size_t N>
struct KernelSet
{
  std::array<cplx, N> v{};

  KernelSet &operator+=(const KernelSet &o)
  {
    for (std::size_t i = 0; i < N; ++i)
    {
      v[i] += o.v[i];
    }
    return *this;
  }
  friend KernelSet operator+(KernelSet a, const KernelSet &b) { return a += b; }
  friend KernelSet operator-(KernelSet a, const KernelSet &b)
  {
    for (std::size_t i = 0; i < N; ++i)
    {
      a.v[i] -= b.v[i];
    }
    return a;
  }
  friend KernelSet operator*(KernelSet a, double s)
  {
    for (auto &x : a.v)
    {
      x *= s;
    }
    return a;
  }
  friend KernelSet operator*(double s, const KernelSet &a) { return a * s; }
  friend double abs(const KernelSet &a)
  {
    double m = 0.0;
    for (const auto &x : a.v)
    {
      m = std::max(m, std::abs(x));
    }
    return m;
  }
};

// \int d^4k / (2 pi)^4 K(k) F(k) for a kernel K(omega, |k|) returning T, in
// polar coordinates (omega, |k|) = r (cos theta, sin theta) so the light
// cone sits at fixed theta = pi/4, 3 pi/4.
template <typename T, typename Kernel>
std::pair<T, double> pairing_integral(Kernel &&kernel, std::span<const TestFunction> functions,
                                      double epsilon, const PairingConfig &config)
{
  double min_width = std::numeric_limits<double>::infinity();
  for (const auto &f : functions)
  {
    if (f.normalization() != 0.0)
    {
      min_width = std::min(min_width, f.width());
    }
  }
  if (!std::isfinite(min_width))
  {
    return {T{}, 0.0};
  }
  const double r_max = std::sqrt(-2.0 * std::log(config.envelope_floor)) / min_width;
  const double prefactor = constants::kPairingMeasure * 4.0 * constants::kPi;
  const std::array<double, 3> cone = {0.25 * constants::kPi, 0.5 * constants::kPi,
                                      0.75 * constants::kPi};

  double inner_error = 0.0;
  auto shell = [&](double r) -> T {
    if (r == 0.0)
    {
      return T{};
    }
    auto angular = [&](double theta) -> T {
      const double omega = r * std::cos(theta);
      const double kappa = r * std::sin(theta);
      cplx transform = 0.0;
      for (const auto &f : functions)
      {
        transform += f.fourier_radial(omega, kappa);
      }
      return kernel(omega, kappa, transform * (kappa * kappa));
    };
    auto res = quadrature::integrate(angular, 0.0, constants::kPi, config.inner, cone);
    inner_error = std::max(inner_error, res.error * r);
    return res.value * r;
  };
  const std::array<double, 1> knee = {std::sqrt(epsilon)};
  auto radial = quadrature::integrate(shell, 0.0, r_max, config.outer, knee);
  return {prefactor * radial.value, prefactor * (radial.error + inner_error * r_max)};
}

} // namespace detail

// <D_kind, sum_i f_i> = \int d^4k / (2 pi)^4 D_kind(k) F(k).
inline Pairing pairing(PropagatorKind kind, std::span<const TestFunction> functions,
                       double epsilon, const PairingConfig &config = {})
{
  if (!(epsilon > 0.0))
  {
    throw InvalidArgumentError("invalid regulator: epsilon must be positive");
  }
  auto kernel = [&](double omega, double kappa, cplx weight) -> cplx {
    return detail::kernel_real(kind, omega, kappa, epsilon) * weight;
  };
  const auto [value, error] = detail::pairing_integral<cplx>(kernel, functions, epsilon, config);
  return {value, error};
}

// Feynman, time-symmetric and free-field pairings on one shared quadrature
// partition; the error estimate bounds each of the three.
inline std::array<Pairing, 3> decomposition_pairings(const TestFunction &f, double epsilon,
                                                     const PairingConfig &config = {})
{
  if (!(epsilon > 0.0))
  {
    throw InvalidArgumentError("invalid regulator: epsilon must be positive");
  }
  using Set = detail::KernelSet<3>;
  auto kernel = [&](double omega, double kappa, cplx weight) -> Set {
    return Set{{detail::kernel_real(PropagatorKind::Feynman, omega, kappa, epsilon) * weight,
                detail::kernel_real(PropagatorKind::TimeSymmetric, omega, kappa, epsilon) * weight,
                detail::kernel_real(PropagatorKind::FreeField, omega, kappa, epsilon) * weight}};
  };
  const auto [value, error] =
      detail::pairing_integral<Set>(kernel, std::span<const TestFunction>(&f, 1), epsilon, config);
  return {Pairing{value.v[0], error}, Pairing{value.v[1], error}, Pairing{value.v[2], error}};
}

inline Pairing pairing(PropagatorKind kind, const TestFunction &f, double epsilon,
                       const PairingConfig &config = {})
{
  return pairing(kind, std::span<const TestFunction>(&f, 1), epsilon, config);
}

//
// Decomposition D_F = D_bar + D_1 checked on pairings.
//

struct DecompositionReport
{
  std::vector<double> epsilon;
  std::vector<cplx> feynman;
  std::vector<cplx> time_symmetric;
  std::vector<cplx> free_field;
  // |<D_F,f> - <D_bar,f> - <D_1,f>| at each epsilon, and the summed
  // quadrature error estimates of the three pairings.
  std::vector<double> residual;
  std::vector<double> residual_bound;
  // Entry j: residual of the pairings extrapolated to eps -> 0 from schedule
  // samples 0..j, with its propagated quadrature bound.
  std::vector<double> extrapolated_residuals;
  std::vector<double> extrapolated_bounds;
  double extrapolated = 0.0;
  cplx extrapolated_feynman = 0.0;
  std::vector<cplx> feynman_estimates;

  double max_residual() const
  {
    double m = 0.0;
    for (double r : residual)
    {
      m = std::max(m, r);
    }
    return m;
  }

  // True when each residual exceeds its predecessor by no more than its own
  // quadrature bound.
  static bool non_increasing(std::span<const double> values, std::span<const double> bounds)
  {
    for (std::size_t i = 1; i < values.size(); ++i)
    {
      if (values[i] > values[i - 1] + bounds[i])
      {
        return false;
      }
    }
    return true;
  }
  bool residual_non_increasing() const { return non_increasing(residual, residual_bound); }
  bool extrapolated_non_increasing() const
  {
    return non_increasing(extrapolated_residuals, extrapolated_bounds);
  }
};

inline DecompositionReport verify_decomposition(const TestFunction &f,
                                                const EpsilonSchedule &schedule,
                                                const PairingConfig &config = {})
{
  DecompositionReport report;
  report.epsilon = schedule.values();
  std::vector<double> bound_f;
  std::vector<double> bound_bar;
  std::vector<double> bound_1;
  for (double eps : report.epsilon)
  {
    const auto [pf, pbar, p1] = decomposition_pairings(f, eps, config);
    report.feynman.push_back(pf.value);
    report.time_symmetric.push_back(pbar.value);
    report.free_field.push_back(p1.value);
    report.residual.push_back(std::abs(pf.value - pbar.value - p1.value));
    report.residual_bound.push_back(pf.error + pbar.error + p1.error);
    bound_f.push_back(pf.error);
    bound_bar.push_back(pbar.error);
    bound_1.push_back(p1.error);
  }

  constexpr auto model = quadrature::ErrorModel::LogLinear;
  const auto ef = quadrature::extrapolate_to_zero<cplx>(report.epsilon, report.feynman, model);
  const auto ebar =
      quadrature::extrapolate_to_zero<cplx>(report.epsilon, report.time_symmetric, model);
  const auto e1 = quadrature::extrapolate_to_zero<cplx>(report.epsilon, report.free_field, model);
  for (std::size_t j = 0; j < ef.size(); ++j)
  {
    std::span<const double> h(report.epsilon.data(), j + 1);
    double worst = 0.0;
    for (std::size_t i = 0; i <= j; ++i)
    {
      worst = std::max(worst, bound_f[i] + bound_bar[i] + bound_1[i]);
    }
    report.extrapolated_residuals.push_back(std::abs(ef[j] - ebar[j] - e1[j]));
    report.extrapolated_bounds.push_back(quadrature::extrapolation_gain(h, model) * worst);
  }
  report.extrapolated = report.extrapolated_residuals.back();
  report.extrapolated_feynman = ef.back();
  report.feynman_estimates = ef;
  return report;
}

} // namespace tsqed::propagators

#endif // TSQED_PROPAGATORS_HPP
