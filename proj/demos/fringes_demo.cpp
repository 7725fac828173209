// Minimal library walkthrough: build the cell channel, send a NOON state
// through it and print the super-resolving coincidence fringes.

#include <cstdio>

#include "noonprobe/polarimetry.hpp"

int main() {
  using namespace noonprobe;

  ChannelModel channel;  // 75 mm cell at 70 C, probe on the 87Rb F=2 -> F'=1 line
  const TwoPhotonState noon = make_noon_state(0.22, knob_for_fidelity(0.90));

  std::vector<double> grid;
  for (int i = 0; i <= 25; ++i) grid.push_back(0.002 * i);

  const FringeTable table = fringe_scan(noon, channel, grid, 1.0, true);
  std::printf("%6s %8s %8s %8s %8s\n", "B_mT", "P_HH", "P_HV", "P_VV", "P_V");
  for (const FringePoint& p : table.points)
    std::printf("%6.1f %8.4f %8.4f %8.4f %8.4f\n", p.field_T * 1e3, p.pairs.hh,
                p.pairs.hv, p.pairs.vv, p.p_v);
  return 0;
}
