// Bounds of the peak acceleration of a damped oscillator whose stiffness is
// only known to lie in [1715, 3185] kN/m, from a 3-point start.

#include <cstdio>

#include "gpbounds/gpbounds.hpp"

int main() {
  using namespace gpbounds;
  const IntervalBox box({1.715e6}, {3.185e6});
  const BlackBox bb = sdof_blackbox();

  const TrainingSet initial = evaluate_design(bb, box, map_levels(taguchi_array(3, 1), box));
  SolverOptions opts;
  opts.grid = LatticeGrid{301};
  opts.surrogate.standardize_outputs = true;

  StoppingPolicy policy;
  policy.budget = 37;
  const RunReport rep = run_approach_b(bb, box, initial, AcquisitionKind::ei(), policy, 1, opts);

  const BaselineResult ref = subinterval_method(bb, box, 300);
  const auto [el, eu] = compare_to_reference(rep, ref.lower, ref.upper);
  std::printf("evaluations %d (subinterval reference used %llu)\n", rep.evaluations,
              static_cast<unsigned long long>(ref.evaluations));
  std::printf("LB %.4f m/s^2 at k = %.1f kN/m   (reference %.4f, error %+.3f%%)\n", rep.lower.mean,
              rep.lower.location[0] / 1e3, ref.lower, el);
  std::printf("UB %.4f m/s^2 at k = %.1f kN/m   (reference %.4f, error %+.3f%%)\n", rep.upper.mean,
              rep.upper.location[0] / 1e3, ref.upper, eu);
  return 0;
}
