"""Time full solver runs on the compiled and the plain-numpy backends.

Each case pins dt through dt_max so both backends execute the identical
step sequence; power-kind nonlinearities make the final states bit-identical,
which the script asserts before reporting. The first (untimed) run per
backend absorbs jit compilation.
"""

import argparse
import time

import numpy as np

import blowuplab as bl


def _case_1d(n):
    dom = bl.Domain.interval(0.0, 1.0)
    ps = bl.ProblemSpec(
        domain=dom,
        reaction=bl.ReactionSpec.power(2.0),
        convection=bl.ConvectionSpec.power(0.5, 1.0, 1),
        sigma=bl.SigmaSpec.dynamical(1.0),
        initial=bl.InitialDataSpec.constant(0.5),
    )
    grid = bl.build_grid(dom, n)
    # CFL at h = 1/(n-1) keeps dt well below dt_max, so dt is state-independent
    policy = bl.StepPolicy(t_horizon=1e-3, dt_max=1e-4)
    return ps, grid, policy


def _case_2d(n):
    dom = bl.Domain.rectangle(0.0, 1.0, 0.0, 1.0)
    ps = bl.ProblemSpec(
        domain=dom,
        reaction=bl.ReactionSpec.power(2.0),
        convection=bl.ConvectionSpec.power(0.5, 1.0, 2),
        sigma=bl.SigmaSpec.dynamical(1.0),
        initial=bl.InitialDataSpec.constant(0.5),
    )
    grid = bl.build_grid(dom, (n, n))
    policy = bl.StepPolicy(t_horizon=1e-2, dt_max=1e-4)
    return ps, grid, policy


def _time_backend(name, ps, grid, policy, repeats):
    bl.set_backend(name)
    rr = bl.run(ps, grid, policy)  # warmup; compiles on the numba backend
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        rr = bl.run(ps, grid, policy)
        best = min(best, time.perf_counter() - t0)
    return best, rr


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timed runs per backend; the minimum is reported")
    parser.add_argument("--n1d", type=int, default=1001,
                        help="interval node count")
    parser.add_argument("--n2d", type=int, default=101,
                        help="rectangle nodes per axis")
    args = parser.parse_args(argv)

    backends = list(bl.available_backends())
    cases = [
        (f"interval n={args.n1d}", _case_1d(args.n1d)),
        (f"rectangle {args.n2d}x{args.n2d}", _case_2d(args.n2d)),
    ]

    print(f"backends: {', '.join(backends)}  (min over {args.repeats} repeats)")
    header = f"{'case':24s} {'steps':>7s}" + "".join(f" {b + ' [s]':>12s}" for b in backends)
    if len(backends) > 1:
        header += f" {'speedup':>9s}"
    print(header)

    for label, (ps, grid, policy) in cases:
        times = {}
        finals = {}
        steps = None
        for b in backends:
            times[b], rr = _time_backend(b, ps, grid, policy, args.repeats)
            finals[b] = rr.final.values
            steps = rr.steps
        if len(backends) > 1:
            if not np.array_equal(finals["numpy"], finals["numba"]):
                raise AssertionError(f"{label}: backends disagree on the final state")
        row = f"{label:24s} {steps:7d}" + "".join(f" {times[b]:12.4f}" for b in backends)
        if len(backends) > 1:
            row += f" {times['numpy'] / times['numba']:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
