#ifndef TSQED_QUADRATURE_HPP
#define TSQED_QUADRATURE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "tsqed/errors.hpp"

namespace tsqed::quadrature
{

struct QuadratureConfig
{
  double abs_tol = 1e-13;
  double rel_tol = 1e-10;
  int max_intervals = 4000;
};

template <typename T>
struct QuadratureResult
{
  T value{};
  double error = 0.0; // estimated absolute error
  int evaluations = 0;
  int intervals = 0;
};

namespace detail
{

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (QUADPACK qk15).
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// Magnitude through ADL, so small vector-valued integrands can supply abs().
template <typename T>
double norm_of(const T &v)
{
  using std::abs;
  return abs(v);
}

template <typename T>
struct Segment
{
  double a;
  double b;
  T value;
  double error;
  // Kronrod estimate of \int |f|, which sets the roundoff floor.
  double magnitude;

  bool operator<(const Segment &other) const { return error < other.error; }
};

template <typename T, typename F>
Segment<T> kronrod15(F &f, double a, double b)
{
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const T fc = f(center);
  T kronrod = fc * kKronrodWeights[7];
  T gauss = fc * kGaussWeights[3];
  double magnitude = norm_of(fc) * kKronrodWeights[7];
  for (int j = 0; j < 7; ++j)
  {
    const double dx = half * kKronrodNodes[j];
    const T fl = f(center - dx);
    const T fr = f(center + dx);
    const T sum = fl + fr;
    kronrod += sum * kKronrodWeights[j];
    magnitude += (norm_of(fl) + norm_of(fr)) * kKronrodWeights[j];
    if (j % 2 == 1)
    {
      gauss += sum * kGaussWeights[j / 2];
    }
  }
  return {a, b, kronrod * half, norm_of((kronrod - gauss) * half), magnitude * std::abs(half)};
}

} // namespace detail

// Globally adaptive Gauss-Kronrod integration of f over [a, b]. Interior
// breakpoints (e.g. near-singular points) seed the initial partition. Throws
// ConvergenceError carrying the error estimate when the interval budget runs
// out before the tolerance is met.
template <typename F>
auto integrate(F &&f, double a, double b, const QuadratureConfig &config = {},
               std::span<const double> breakpoints = {})
    -> QuadratureResult<std::decay_t<std::invoke_result_t<F &, double>>>
{
  using T = std::decay_t<std::invoke_result_t<F &, double>>;
  QuadratureResult<T> result;
  if (a == b)
  {
    return result;
  }
  const double sign = (b > a) ? 1.0 : -1.0;
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);

  std::vector<double> cuts{lo};
  for (double p : breakpoints)
  {
    if (p > lo && p < hi)
    {
      cuts.push_back(p);
    }
  }
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<detail::Segment<T>> heap;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
  {
    heap.push_back(detail::kronrod15<T>(f, cuts[i], cuts[i + 1]));
  }
  std::make_heap(heap.begin(), heap.end());
  result.evaluations = 15 * static_cast<int>(heap.size());

  T total{};
  double total_error = 0.0;
  double total_magnitude = 0.0;
  // The running sums drift once large early errors are subtracted out, so
  // they are rebuilt from the segments now and then and before giving up.
  auto resum = [&]() {
    total = T{};
    total_error = 0.0;
    for (const auto &s : heap)
    {
      total += s.value;
      total_error += s.error;
      total_magnitude += s.magnitude;
    }
  };
  resum();
  // Below 50 machine epsilons of \int |f| the error estimate is roundoff.
  auto tolerance = [&]() {
    return std::max({config.abs_tol, config.rel_tol * detail::norm_of(total),
                     50.0 * std::numeric_limits<double>::epsilon() * total_magnitude});
  };
  int since_resum = 0;
  while (total_error > tolerance())
  {
    if (static_cast<int>(heap.size()) >= config.max_intervals || ++since_resum == 256)
    {
      resum();
      since_resum = 0;
      if (!(total_error > tolerance()))
      {
        break;
      }
      if (static_cast<int>(heap.size()) >= config.max_intervals)
      {
        throw ConvergenceError("adaptive quadrature did not converge", total_error);
      }
    }
    std::pop_heap(heap.begin(), heap.end());
    const auto worst = heap.back();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b))
    {
      throw ConvergenceError("adaptive quadrature reached machine resolution", total_error);
    }
    heap.pop_back();
    auto left = detail::kronrod15<T>(f, worst.a, mid);
    auto right = detail::kronrod15<T>(f, mid, worst.b);
    total += (left.value + right.value) - worst.value;
    total_error += (left.error + right.error) - worst.error;
    total_magnitude += (left.magnitude + right.magnitude) - worst.magnitude;
    heap.push_back(left);
    std::push_heap(heap.begin(), heap.end());
    heap.push_back(right);
    std::push_heap(heap.begin(), heap.end());
    result.evaluations += 30;
  }

  // Re-sum in a fixed order to reduce drift from the incremental updates.
  std::sort(heap.begin(), heap.end(), [](const auto &x, const auto &y) { return x.a < y.a; });
  T sum{};
  double err = 0.0;
  for (const auto &s : heap)
  {
    sum += s.value;
    err += s.error;
  }
  result.value = sum * sign;
  result.error = err;
  result.intervals = static_cast<int>(heap.size());
  return result;
}

// Integral over [a, inf) through the map x = a + u / (1 - u).
template <typename F>
auto integrate_to_infinity(F &&f, double a, const QuadratureConfig &config = {})
{
  auto mapped = [&](double u) {
    const double w = 1.0 - u;
    return f(a + u / w) * (1.0 / (w * w));
  };
  return integrate(mapped, 0.0, 1.0, config);
}

// Error model assumed by the extrapolation to h = 0.
enum class ErrorModel
{
  // v(h) = v0 + c1 h + c2 h^2 + ...
  Polynomial,
  // v(h) = v0 + c1 h ln h + c2 h + c3 h^2 ln h + c4 h^2 + ..., the expansion
  // of Lorentzian-smeared integrals whose integrand has a |s| kink.
  LogLinear
};

namespace detail
{

inline double basis_function(ErrorModel model, std::size_t m, double h)
{
  if (m == 0)
  {
    return 1.0;
  }
  if (model == ErrorModel::Polynomial)
  {
    return std::pow(h, static_cast<double>(m));
  }
  const double power = std::pow(h, static_cast<double>((m + 1) / 2));
  return (m % 2 == 1) ? power * std::log(h) : power;
}

} // namespace detail

// Weights w such that sum_i w_i v(h_i) is the value at h = 0 of the model
// interpolating all samples.
inline std::vector<double> extrapolation_weights(std::span<const double> h,
                                                 ErrorModel model = ErrorModel::Polynomial)
{
  const auto n = static_cast<Eigen::Index>(h.size());
  if (n == 0)
  {
    throw InvalidArgumentError("extrapolation needs at least one sample");
  }
  for (double x : h)
  {
    if (!(x > 0.0))
    {
      throw InvalidArgumentError("extrapolation step sizes must be positive");
    }
  }
  // Rows are samples, columns basis functions; w solves A^T w = e_0.
  Eigen::MatrixXd design(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
  {
    for (Eigen::Index m = 0; m < n; ++m)
    {
      design(i, m) = detail::basis_function(model, static_cast<std::size_t>(m),
                                            h[static_cast<std::size_t>(i)]);
    }
  }
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
  unit(0) = 1.0;
  const Eigen::VectorXd w = design.transpose().fullPivLu().solve(unit);
  return {w.data(), w.data() + n};
}

// Sum of |weights|: the amplification of sample errors by the extrapolation.
inline double extrapolation_gain(std::span<const double> h,
                                 ErrorModel model = ErrorModel::Polynomial)
{
  double gain = 0.0;
  for (double w : extrapolation_weights(h, model))
  {
    gain += std::abs(w);
  }
  return gain;
}

// Extrapolation of samples v(h_i) to h = 0. Entry j of the returned sequence
// uses samples 0..j, so it shows how the estimate settles as the schedule
// refines.
template <typename T>
std::vector<T> extrapolate_to_zero(std::span<const double> h, std::span<const T> values,
                                   ErrorModel model = ErrorModel::Polynomial)
{
  if (h.size() != values.size() || h.empty())
  {
    throw InvalidArgumentError("extrapolation needs matching, non-empty samples");
  }
  std::vector<T> estimates;
  estimates.reserve(values.size());
  for (std::size_t j = 0; j < values.size(); ++j)
  {
    const auto w = extrapolation_weights(h.first(j + 1), model);
    T sum{};
    for (std::size_t i = 0; i <= j; ++i)
    {
      sum += w[i] * values[i];
    }
    estimates.push_back(sum);
  }
  return estimates;
}

} // namespace tsqed::quadrature

#endif // TSQED_QUADRATURE_HPP
