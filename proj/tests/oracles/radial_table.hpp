// Hydrogen radial dipole integrals \int_0^inf R_{n1 l1} R_{n2 l2} r^3 dr,
// evaluated symbolically (sympy R_nl, exact rational times surd) and frozen.
#ifndef TSQED_TESTS_RADIAL_TABLE_HPP
#define TSQED_TESTS_RADIAL_TABLE_HPP

#include <array>

namespace tsqed::oracle
{

struct RadialEntry
{
  int n1;
  int l1;
  int n2;
  int l2;
  double value;
};

inline constexpr std::array<RadialEntry, 20> kRadialIntegrals = {{
    {2, 1, 1, 0, 1.2902662019598633604},  // 128 sqrt(6) / 243
    {2, 1, 2, 0, -5.1961524227066318805}, // -3 sqrt(3)
    {3, 0, 2, 1, 0.93840423773979196582}, // 10368 sqrt(2) / 15625
    {3, 1, 1, 0, 0.51668924261832663009}, // 27 sqrt(6) / 128
    {3, 1, 2, 0, 3.0648154065705164423},  // 27648 sqrt(3) / 15625
    {3, 1, 3, 0, -12.727922061357855439}, // -9 sqrt(2)
    {3, 2, 2, 1, 4.7479916115390094484},  // 165888 sqrt(5) / 78125
    {3, 2, 3, 1, -10.062305898749053634}, // -9 sqrt(5) / 2
    {4, 0, 2, 1, 0.38230109687699655122}, // 1024 sqrt(6) / 6561
    {4, 0, 3, 1, 2.4435338567561336595},  // 5750784 sqrt(6) / 5764801
    {4, 1, 1, 0, 0.30458380389245912758}, // 6144 sqrt(15) / 78125
    {4, 1, 2, 0, 1.2822768607345452679},  // 512 sqrt(30) / 2187
    {4, 1, 3, 0, 5.4693356796489999600},  // 14100480 sqrt(5) / 5764801
    {4, 1, 3, 2, 1.3022537815127245028},  // 5308416 sqrt(2) / 5764801
    {4, 1, 4, 0, -23.237900077244501400}, // -6 sqrt(15)
    {4, 2, 2, 1, 1.7097024809793936905},  // 2048 sqrt(30) / 6561
    {4, 2, 3, 1, 7.5654108125016211644},  // 7962624 sqrt(30) / 5764801
    {4, 2, 4, 1, -20.784609690826527522}, // -12 sqrt(3)
    {4, 3, 3, 2, 10.230302619127789922},  // 63700992 sqrt(42) / 40353607
    {4, 3, 4, 2, -15.874507866387544150}, // -6 sqrt(7)
}};

} // namespace tsqed::oracle

#endif // TSQED_TESTS_RADIAL_TABLE_HPP
