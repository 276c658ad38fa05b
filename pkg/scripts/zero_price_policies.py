#!/usr/bin/env python3
"""Free transmissions: compare the solver's optimum with send-at-once, analytically and by simulation.

Shows that with estimate-dependent penalties (and even with equal ones) the
optimal policy at lambda = 0 may hold back under some estimates.
"""

import warnings

from aoii_smdp.cycle_model import SourceModel, smdp_parameters
from aoii_smdp.errors import BoundaryWarning
from aoii_smdp.experiments import scenario_two
from aoii_smdp.simulator import SimPolicy, simulate
from aoii_smdp.smdp_solver import Policy, policy_evaluate, policy_iteration


def compare(label, source, channel):
    params = smdp_parameters(source, channel, 50)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        best = policy_iteration(params, 0.0).policy
    print(label)
    for pol in dict.fromkeys([best, Policy.uniform(source.n, 1)]):
        gain, _ = policy_evaluate(params, 0.0, pol)
        rep = simulate(source, channel, SimPolicy.multi(pol), 0.0, 2_000_000, 10)
        print(f"  {str(pol):>10}  analytic {gain:.5f}  simulated {rep.avg_cost:.5f} +- {rep.ci_half_width:.5f}")


def main():
    sc = scenario_two()
    compare("scenario2 penalties", sc.source, sc.channel)
    equal = SourceModel(sc.source.q, ((0.5, 1.0),) * 3)
    compare("scenario2 source, equal penalties f(x) = x + 1/2", equal, sc.channel)


if __name__ == "__main__":
    main()
