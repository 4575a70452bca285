"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because the switch
(``PLANTSCHED_DISABLE_NUMBA``) is read at import time. Timings are the
best of ``--repeat`` runs after one warm-up call, so JIT compilation is
excluded.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKER = "--worker"


def _best(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def worker(repeat):
    import numpy as np

    from plantsched import _accel
    from plantsched.forecaster import init_model, loss_and_grad
    from plantsched.harvest import build_harvest_table
    from plantsched.ingest import DailyGduSeries, SyntheticSpec, generate_synthetic_instance, seasonal_gdu
    from plantsched.rio import IoKernelHyper, kernel_matrix
    from plantsched.scheduler import HeuristicConfig, solve_case1_exact, solve_case1_heuristic

    rng = np.random.default_rng(0)
    days = np.arange(730)

    def table_for(n, width, seed):
        spec = SyntheticSpec(population_count=n, window_width_range=(width, width), rng_seed=seed,
                             plant_start_range=(90, 150))
        _, pops = generate_synthetic_instance(spec)
        scen = [DailyGduSeries(0, 0, seasonal_gdu(days, spec, rng.normal(0, 1.5, 730))) for _ in range(3)]
        return build_harvest_table(pops, scen)

    small = table_for(8, 5, 1)
    cap_small = int(small.quantities.sum() * 0.4)
    large = table_for(200, 30, 2)
    cap_large = int(large.quantities.sum() * 0.1)
    G, y = rng.normal(size=(400, 16)), rng.normal(size=400)
    hyper = IoKernelHyper(1.0, 2.0, 0.5, 1.0)
    model = init_model(np.random.default_rng(1))
    Z, yz = rng.normal(size=(256, model.window)), rng.normal(size=256)

    cases = {
        "exact B&B, 8 populations": lambda: solve_case1_exact(small, cap_small),
        "heuristic, 200 populations": lambda: solve_case1_heuristic(large, cap_large, config=HeuristicConfig(restarts=3)),
        "I/O kernel matrix 400x400": lambda: kernel_matrix(G, y, G, y, hyper),
        "LSTM loss+grad, batch 256": lambda: loss_and_grad(model, Z, yz),
    }
    out = {"backend": _accel.backend(), "seconds": {k: _best(f, repeat) for k, f in cases.items()}}
    print(json.dumps(out))


def run(disable, repeat):
    env = dict(os.environ)
    env.pop("PLANTSCHED_DISABLE_NUMBA", None)
    if disable:
        env["PLANTSCHED_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-W", "ignore", __file__, WORKER, "--repeat", str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument(WORKER, action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        worker(args.repeat)
        return
    nb, npy = run(False, args.repeat), run(True, args.repeat)
    print(f"{'kernel':<30}{nb['backend']:>12}{npy['backend']:>12}{'speed-up':>10}")
    for k, t_nb in nb["seconds"].items():
        t_np = npy["seconds"][k]
        print(f"{k:<30}{t_nb:>11.4f}s{t_np:>11.4f}s{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
