// Small cases built in code, plus paths to the shipped data files.
#ifndef OPFLAB_TESTS_FIXTURES_HPP
#define OPFLAB_TESTS_FIXTURES_HPP

#include "opflab/network.hpp"

#include <limits>
#include <string>
#include <vector>

#ifndef OPFLAB_DATA_DIR
#define OPFLAB_DATA_DIR "data"
#endif

namespace fixtures {

inline std::string data(const std::string& name) { return std::string(OPFLAB_DATA_DIR) + "/" + name; }

inline opflab::NetworkCase fig1() { return opflab::load_case(data("fig1_three_bus.case")); }
inline opflab::NetworkCase discontinuity() { return opflab::load_case(data("discontinuity_three_bus.case")); }
inline opflab::NetworkCase case39() { return opflab::load_case(data("case39.m")); }

// Lossy 3-bus triangle with generators at buses 1 and 2 and mixed limits,
// used where the lossless fixture would hide conductance terms.
inline opflab::NetworkCase lossy_triangle() {
  using namespace opflab;
  std::vector<Bus> buses = {{1, 0.9, 1.1, 230, true, 0.3, 0.1},
                            {2, 0.9, 1.1, 230, false, 0.5, 0.2},
                            {3, 0.9, 1.1, 230, false, 0.8, 0.3}};
  std::vector<Branch> branches = {{1, 2, 1.5, -8.0, 2.0}, {2, 3, 2.0, -10.0, 0.3}, {1, 3, 1.0, -6.0, 1.5}};
  std::vector<Generator> gens = {{1, 0.0, 3.0, -2.0, 2.0, 0.5, 10.0, 1.0}, {2, 0.1, 2.0, -1.0, 1.5, 1.0, 20.0, 0.0}};
  return NetworkCase(100.0, buses, branches, gens);
}

// One generator at the slack bus feeding one load over a lossy line.
inline opflab::NetworkCase two_bus() {
  using namespace opflab;
  std::vector<Bus> buses = {{1, 0.95, 1.05, 230, true, 0.0, 0.0}, {2, 0.9, 1.1, 230, false, 0.5, 0.2}};
  // 1 / (0.02 + 0.1j)
  std::vector<Branch> branches = {{1, 2, 0.02 / 0.0104, -0.1 / 0.0104, std::numeric_limits<double>::infinity()}};
  std::vector<Generator> gens = {{1, 0.0, 2.0, -1.0, 1.0, 0.0, 1.0, 0.0}};
  return NetworkCase(100.0, buses, branches, gens);
}

inline opflab::NetworkCase single_branch(double g, double b, double s_max) {
  using namespace opflab;
  std::vector<Bus> buses = {{1, 0.9, 1.1, 230, true, 0, 0}, {2, 0.9, 1.1, 230, false, 0, 0}};
  std::vector<Branch> branches = {{1, 2, g, b, s_max}};
  std::vector<Generator> gens = {{1, 0, 1, -1, 1, 0, 1, 0}};
  return NetworkCase(100.0, buses, branches, gens);
}

inline opflab::NetworkCase single_bus(double p_load, double q_load) {
  using namespace opflab;
  std::vector<Bus> buses = {{1, 0.9, 1.1, 230, true, p_load, q_load}};
  std::vector<Generator> gens = {{1, 0, 5, -5, 5, 0, 1, 0}};
  return NetworkCase(100.0, buses, {}, gens);
}

}  // namespace fixtures

#endif  // OPFLAB_TESTS_FIXTURES_HPP
