// Closed-contour residue evaluation of the fixed-k time propagators
//   J(k, t) = \int domega / (2 pi) exp(-i omega t) D(omega, k)
// at finite regulator eps. Independent of the numerical contour code: every
// value here is a sum of residues at the explicit pole locations.
#ifndef TSQED_TESTS_RESIDUE_ORACLE_HPP
#define TSQED_TESTS_RESIDUE_ORACLE_HPP

#include <cmath>
#include <complex>
#include <vector>

#include "tsqed/propagators.hpp"

namespace tsqed::oracle
{

using cplx = std::complex<double>;
using propagators::PropagatorKind;

struct Pole
{
  cplx location;
  cplx residue_factor; // D(omega) ~ residue_factor / (omega - location)
};

// Simple poles of the regulated kernel in the complex omega plane.
inline std::vector<Pole> poles(PropagatorKind kind, double k, double eps)
{
  using namespace std::complex_literals;
  const double ak = std::abs(k);
  // 1 / (omega^2 - a^2) has residue +-1/(2a) at omega = +-a.
  auto pair = [](cplx a, cplx weight) {
    return std::vector<Pole>{{a, weight / (2.0 * a)}, {-a, -weight / (2.0 * a)}};
  };
  switch (kind)
  {
    case PropagatorKind::Retarded:
      return {{ak - 1i * eps, 1.0 / (2.0 * ak)}, {-ak - 1i * eps, -1.0 / (2.0 * ak)}};
    case PropagatorKind::Advanced:
      return {{ak + 1i * eps, 1.0 / (2.0 * ak)}, {-ak + 1i * eps, -1.0 / (2.0 * ak)}};
    case PropagatorKind::Feynman:
      return pair(std::sqrt(cplx(k * k, -eps)), 1.0);
    case PropagatorKind::TimeSymmetric:
    {
      // s / (s^2 + eps^2) = 1/2 [1/(s + i eps) + 1/(s - i eps)]
      auto a = pair(std::sqrt(cplx(k * k, -eps)), 0.5);
      auto b = pair(std::sqrt(cplx(k * k, eps)), 0.5);
      a.insert(a.end(), b.begin(), b.end());
      return a;
    }
    case PropagatorKind::FreeField:
    {
      // -i eps / (s^2 + eps^2) = 1/2 [1/(s + i eps) - 1/(s - i eps)]
      auto a = pair(std::sqrt(cplx(k * k, -eps)), 0.5);
      auto b = pair(std::sqrt(cplx(k * k, eps)), -0.5);
      a.insert(a.end(), b.begin(), b.end());
      return a;
    }
    default:
      return {};
  }
}

// Close below for t > 0 (clockwise, -2 pi i), above for t < 0 (+2 pi i). At
// t = 0 the kernel decays like 1/omega^2 so either closure works; use below.
inline cplx residue_fixed_k(PropagatorKind kind, double k, double t, double eps)
{
  using namespace std::complex_literals;
  cplx sum = 0.0;
  const bool below = t >= 0.0;
  for (const auto &p : poles(kind, k, eps))
  {
    const bool in_lower = p.location.imag() < 0.0;
    if (in_lower == below)
    {
      sum += p.residue_factor * std::exp(-1i * p.location * t);
    }
  }
  // (1 / 2 pi) * (-+ 2 pi i) * sum
  return below ? -1i * sum : 1i * sum;
}

// eps -> 0 closed forms.
inline cplx limit_fixed_k(PropagatorKind kind, double k, double t)
{
  using namespace std::complex_literals;
  const double ak = std::abs(k);
  switch (kind)
  {
    case PropagatorKind::Retarded:
      return t > 0.0 ? -std::sin(ak * t) / ak : 0.0;
    case PropagatorKind::Advanced:
      return t < 0.0 ? std::sin(ak * t) / ak : 0.0;
    case PropagatorKind::TimeSymmetric:
      return -std::sin(ak * std::abs(t)) / (2.0 * ak);
    case PropagatorKind::Feynman:
      return -1i * std::exp(-1i * ak * std::abs(t)) / (2.0 * ak);
    case PropagatorKind::FreeField:
      return -1i * std::cos(ak * t) / (2.0 * ak);
    case PropagatorKind::PositiveFrequency:
      return std::exp(-1i * ak * t) / (2.0 * ak);
  }
  return 0.0;
}

} // namespace tsqed::oracle

#endif // TSQED_TESTS_RESIDUE_ORACLE_HPP
