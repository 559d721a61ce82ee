"""Time the hot kernels under numba and under the numpy fallback.

Each backend runs in its own interpreter because the choice is read from
``IFP_DISABLE_NUMBA`` at import time.  The numba numbers exclude compilation
(one warm-up call first).

    python3 benchmarks/bench_backends.py [--repeat 3] [--paths 20000]
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKER = textwrap.dedent("""
    import json, sys, time
    import numpy as np
    from ifp import _accel, config, dynamics, solver

    repeat, paths = int(sys.argv[1]), int(sys.argv[2])
    spec = config.load_config(config.shipped("benhabib")).spec
    conf = solver.SolverConfig(grid_points=100)
    data = solver.EulerData(spec, conf.quad_nodes)
    grid = solver.default_grid(spec, conf)
    start = solver.Policy(grid, np.column_stack([grid.points] * spec.n_states), gamma=spec.gamma)
    pol, _ = solver.solve(spec, conf)
    sim = dynamics.SimConfig(paths, 200, seed=1)

    def step():
        solver.time_iteration_step(spec, start, conf, data)

    def simulate():
        dynamics.simulate(spec, pol, sim, record=False)

    out = {"backend": _accel.backend_name()}
    for name, fn in (("time_iteration_step", step), ("simulate", simulate)):
        fn()
        times = []
        for _ in range(repeat):
            t = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t)
        out[name] = min(times)
    print(json.dumps(out))
""")


def run(disable, repeat, paths):
    env = dict(os.environ, IFP_DISABLE_NUMBA=disable)
    r = subprocess.run([sys.executable, "-c", WORKER, str(repeat), str(paths)], env=env,
                       capture_output=True, text=True, check=True)
    return json.loads(r.stdout)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--paths", type=int, default=20_000)
    args = p.parse_args()
    fast, slow = run("0", args.repeat, args.paths), run("1", args.repeat, args.paths)
    print(f"{'kernel':<22}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}")
    for k in ("time_iteration_step", "simulate"):
        print(f"{k:<22}{fast[k]:>12.4f}{slow[k]:>12.4f}{slow[k] / fast[k]:>9.1f}x")


if __name__ == "__main__":
    main()
