#ifndef TSQED_CONSTANTS_HPP
#define TSQED_CONSTANTS_HPP

#include <numbers>
#include <string_view>

namespace tsqed::constants
{

//
// Constants table. Every normalization convention used by the propagator,
// absorber and atomic code is fixed here, and the test oracles read the same
// table. Bump kTableVersion whenever a convention changes.
//
inline constexpr std::string_view kTableVersion = "ct-1";
inline constexpr std::string_view kToolVersion = "1.0.0";

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Momentum-space propagators are 1/(omega^2 - k^2) with the kind's regulator.
// Position space uses the wave operator d_t^2 - d_x^2 with a unit source, so
// the fixed-k time representation
//   J(k, t) = \int domega / (2 pi) exp(-i omega t) D(omega, k)
// equals minus the spatial Fourier transform of the position-space Green's
// function: J_ret(k, t) = -theta(t) sin(k t) / k.
inline constexpr double kFixedKMeasure = 1.0 / kTwoPi;

// Pairings are taken in 3+1 dimensions with measure d^4k / (2 pi)^4.
inline constexpr double kPairingMeasure = 1.0 / (kTwoPi * kTwoPi * kTwoPi * kTwoPi);

// The free-field term is the full -i pi delta(k^2), smeared as the odd
// Lorentzian -i eps / (s^2 + eps^2). The principal part is the even
// Lorentzian s / (s^2 + eps^2). Their sum is 1 / (s + i eps) exactly.
inline constexpr double kFreeFieldSign = -1.0;

// Fixed-frequency field Green's functions used by the absorber simulator:
//   g_out(x) =  exp(+i omega |x|)
//   g_in(x)  = -exp(-i omega |x|)
// These are -2 i omega times the temporal Fourier transforms of the 1+1D
// retarded/advanced Green's functions, i.e. the radiated field per unit source
// amplitude, normalized to unit retarded amplitude.
inline constexpr double kFieldGreenScale = -2.0; // times i omega

// Fine-structure constant (CODATA 2018).
inline constexpr double kAlpha = 1.0 / 137.035999084;

// Atomic unit of time in seconds (CODATA 2018).
inline constexpr double kAtomicUnitOfTime = 2.4188843265857e-17;

// Default self-energy cutoff: the electron rest energy m c^2 = 1/alpha^2 in
// atomic units.
inline constexpr double kDefaultCutoff = 1.0 / (kAlpha * kAlpha);

// Dipole spectral density prefactor: rho(omega) |M|^2 = (2 alpha^3 / 3 pi)
// |<A|r|I>|^2 Delta^3, with Delta = E_A - E_I. The density is omega
// independent, which is the mass-subtracted (Bethe) form of the dipole
// coupling; on shell it reproduces Gamma = (4/3) alpha^3 Delta^3 |r|^2.
inline constexpr double dipole_density_prefactor(double alpha)
{
  return 2.0 * alpha * alpha * alpha / (3.0 * kPi);
}

// Energy ledger resolution (energy units per integer quantum).
inline constexpr double kLedgerResolution = 1e-12;

} // namespace tsqed::constants

#endif // TSQED_CONSTANTS_HPP
