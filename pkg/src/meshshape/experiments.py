"""Scripted experiment batches with CSV summaries and per-phase timings.

Experiment 1: unpenalized runs on a coarse disc comparing the Euclidean and
elasticity metrics (Euclidean retraction) against the rank-one metric with
geodesic retraction; the geodesic variant runs on a reduced mesh because the
integration dominates the cost.

Experiment 2: penalized runs for three penalty parameter sets; all variants
should converge to the same minimizer.

Experiment 3: unpenalized runs on finer discs, elasticity versus rank-one
metric, fixed iteration budget.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .fem import model_rhs
from .geodesic import GeodesicConfig
from .mesh import make_disc_mesh
from .optimizer import OptimizerConfig, PhaseTimer, steepest_descent
from .penalty import PenaltyParams

PENALTY_SETS = {
    1: (1.0, 0.5, 0.0, 0.1),
    2: (0.1, 0.01, 0.0, 0.001),
    3: (0.015, 0.005, 0.0, 0.0005),
}
METRIC_ALPHA = (10.0, 1.0, 0.0, 0.01)

SUMMARY_HEADER = "experiment,label,variant,vertices,triangles,iterations,status,Obj,Total,mshQua"
TIMING_HEADER = "label,variant,phase,seconds"


def _run(complex, coords, config, outdir, label):
    from .cli import write_history, write_timing  # avoid import cycle at module load

    rundir = outdir / label
    rundir.mkdir(parents=True, exist_ok=True)
    timer = PhaseTimer()
    result = steepest_descent(complex, coords, model_rhs(), config, timer=timer)
    write_history(rundir / "history.csv", result.history)
    write_timing(rundir / "timing.csv", timer)
    last = result.history[-1]
    return result, timer, last


def _summary_row(exp_id, label, variant, complex, result, last):
    return (
        f"{exp_id},{label},{variant},{complex.num_vertices},{complex.num_triangles},"
        f"{last.iter},{result.status},{last.objective!r},{last.total!r},{last.theta!r}"
    )


def run_experiment(
    exp_id: int,
    outdir: Path,
    max_iter: int | None = None,
    compcomp_cap: int = 15,
    compcomp_rings: int = 1,
    rings: int | None = None,
    geodesic_steps: int = 1024,
    parallel: bool = False,
) -> int:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    zero = PenaltyParams((0.0, 0.0, 0.0, 0.0))
    metric = PenaltyParams(METRIC_ALPHA)
    tasks = []  # (label, variant, complex, coords, config)

    if exp_id == 1:
        cap = max_iter if max_iter is not None else 1000
        complex, coords = make_disc_mesh(rings if rings is not None else 5)
        for variant in ("EucEuc", "ElasEuc"):
            config = OptimizerConfig(
                variant=variant,
                penalty=zero,
                metric_penalty=metric,
                max_iter=cap,
                stop_tol=0.0,
            )
            tasks.append((variant, variant, complex, coords, config))
        # Geodesic retraction on a reduced mesh by default: the integration
        # dominates the cost (compcomp_rings raises it to full scale).
        small_complex, small_coords = make_disc_mesh(compcomp_rings)
        config = OptimizerConfig(
            variant="CompComp",
            penalty=zero,
            metric_penalty=metric,
            max_iter=compcomp_cap,
            stop_tol=0.0,
            geodesic=GeodesicConfig(num_steps=geodesic_steps),
        )
        tasks.append(("CompComp", "CompComp", small_complex, small_coords, config))

    elif exp_id == 2:
        cap = max_iter if max_iter is not None else 1000
        complex, coords = make_disc_mesh(rings if rings is not None else 7)
        for set_id, alpha in PENALTY_SETS.items():
            for variant in ("EucEuc", "ElasEuc", "CompEuc"):
                config = OptimizerConfig(
                    variant=variant,
                    penalty=PenaltyParams(alpha),
                    metric_penalty=metric,
                    max_iter=cap,
                    stop_tol=1e-6,
                )
                tasks.append((f"set{set_id}_{variant}", variant, complex, coords, config))

    elif exp_id == 3:
        cap = max_iter if max_iter is not None else 500
        ring_list = (rings,) if rings is not None else (5, 8, 12)
        for r in ring_list:
            complex, coords = make_disc_mesh(r)
            for variant in ("ElasEuc", "CompEuc"):
                config = OptimizerConfig(
                    variant=variant,
                    penalty=zero,
                    metric_penalty=metric,
                    max_iter=cap,
                    stop_tol=0.0,
                )
                tasks.append((f"rings{r}_{variant}", variant, complex, coords, config))
    else:
        raise ValueError(f"unknown experiment {exp_id}")

    def execute(task):
        label, variant, cx, q, config = task
        try:
            result, timer, last = _run(cx, q, config, outdir, label)
        except Exception as exc:  # keep the batch going, record the failure
            return label, variant, cx, None, None, None, str(exc)
        return label, variant, cx, result, timer, last, None

    if parallel:
        with ThreadPoolExecutor() as pool:
            outcomes = list(pool.map(execute, tasks))
    else:
        outcomes = [execute(task) for task in tasks]

    summary = [SUMMARY_HEADER]
    timing_rows = [TIMING_HEADER]
    for label, variant, cx, result, timer, last, error in outcomes:
        if error is not None:
            summary.append(f"{exp_id},{label},{variant},{cx.num_vertices},{cx.num_triangles},,Error:{error},,,")
            continue
        summary.append(_summary_row(exp_id, label, variant, cx, result, last))
        for phase, seconds in timer.seconds.items():
            timing_rows.append(f"{label},{variant},{phase},{seconds:.6f}")

    (outdir / "summary.csv").write_text("\n".join(summary) + "\n", encoding="utf-8")
    (outdir / "timing_summary.csv").write_text(
        "\n".join(timing_rows) + "\n", encoding="utf-8"
    )
    for line in summary:
        print(line)
    return 0
