// Transfer-matrix solution of E'' + w^2 E = 2 i w sum_s c_s delta(x - x_s)
// for point scatterers (c = -gamma E) and fixed sources, propagating (E, E')
// left to right. Purely outgoing boundary conditions give the retarded
// theory; an incident plane wave gives slab transmission and reflection.
#ifndef TSQED_TESTS_TRANSFER_MATRIX_HPP
#define TSQED_TESTS_TRANSFER_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace tsqed::oracle
{

using cplx = std::complex<double>;

struct TmElement
{
  double x;
  double gamma;   // scatterer coupling, 0 for a source
  cplx strength;  // source amplitude, 0 for a scatterer
};

struct TmState
{
  cplx e;
  cplx de;
};

class TransferMatrix
{
public:
  TransferMatrix(double omega, std::vector<TmElement> elements)
    : omega_(omega), elements_(std::move(elements))
  {
    std::sort(elements_.begin(), elements_.end(),
              [](const TmElement &a, const TmElement &b) { return a.x < b.x; });
  }

  // Retarded theory: outgoing waves only at both ends.
  void solve_outgoing()
  {
    const double x0 = elements_.front().x;
    using namespace std::complex_literals;
    const TmState unit{std::exp(-1i * omega_ * x0), -1i * omega_ * std::exp(-1i * omega_ * x0)};
    const auto u = propagate(unit, x0, last(), false);
    const auto v = propagate({0.0, 0.0}, x0, last(), true);
    const cplx b = -(v.de - 1i * omega_ * v.e) / (u.de - 1i * omega_ * u.e);
    left_ = {b * unit.e, b * unit.de};
    left_x_ = x0;
    with_sources_ = true;
  }

  // Unit plane wave incident from the left, sources switched off. Returns
  // the transmission amplitude; reflection() gives r.
  cplx solve_incident()
  {
    using namespace std::complex_literals;
    const double x0 = elements_.front().x;
    const TmState inc{std::exp(1i * omega_ * x0), 1i * omega_ * std::exp(1i * omega_ * x0)};
    const TmState ref{std::exp(-1i * omega_ * x0), -1i * omega_ * std::exp(-1i * omega_ * x0)};
    const auto u = propagate(inc, x0, last(), false);
    const auto v = propagate(ref, x0, last(), false);
    reflection_ = -(u.de - 1i * omega_ * u.e) / (v.de - 1i * omega_ * v.e);
    left_ = {inc.e + reflection_ * ref.e, inc.de + reflection_ * ref.de};
    left_x_ = x0;
    with_sources_ = false;
    const auto right = propagate(left_, x0, last(), false);
    return right.e * std::exp(-1i * omega_ * last());
  }

  cplx reflection() const { return reflection_; }

  // Field at x after one of the solve calls; x must not coincide with an
  // element.
  cplx field(double x) const
  {
    using namespace std::complex_literals;
    if (x < left_x_)
    {
      // Only the left-going part can exist beyond the first element for the
      // outgoing problem; for the incident problem both are present.
      const cplx out = 0.5 * (left_.e - left_.de / (1i * omega_));
      const cplx in = 0.5 * (left_.e + left_.de / (1i * omega_));
      return out * std::exp(-1i * omega_ * (x - left_x_)) + in * std::exp(1i * omega_ * (x - left_x_));
    }
    return propagate(left_, left_x_, x, with_sources_).e;
  }

private:
  double last() const { return elements_.back().x; }

  TmState free(TmState s, double length) const
  {
    const double c = std::cos(omega_ * length);
    const double sn = std::sin(omega_ * length);
    return {c * s.e + sn / omega_ * s.de, -omega_ * sn * s.e + c * s.de};
  }

  // Carries the state from x_from (just left of any element there) to x_to,
  // applying every jump at elements in [x_from, x_to).
  TmState propagate(TmState s, double x_from, double x_to, bool sources) const
  {
    using namespace std::complex_literals;
    double x = x_from;
    for (const auto &el : elements_)
    {
      if (el.x < x_from || el.x > x_to)
      {
        continue;
      }
      s = free(s, el.x - x);
      x = el.x;
      s.de += -2.0i * omega_ * el.gamma * s.e;
      if (sources)
      {
        s.de += 2.0i * omega_ * el.strength;
      }
    }
    return free(s, x_to - x);
  }

  double omega_;
  std::vector<TmElement> elements_;
  TmState left_{};
  double left_x_ = 0.0;
  bool with_sources_ = false;
  cplx reflection_ = 0.0;
};

} // namespace tsqed::oracle

#endif // TSQED_TESTS_TRANSFER_MATRIX_HPP
