"""Command-line front end.

    coagfrag equilibrium --n 10 --out eq10.csv
    coagfrag limits --xmin 0.01 --xmax 20 --points 200 --out profile.csv
    coagfrag simulate --kind sbgw --n 5 --samples 100000 --seed 1 --out sb5
    coagfrag validate --suite all --seed 0 --out report.json

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numeric or
resource error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import continuum as cont
from . import equilibrium as eq
from . import limitlaws as ll
from . import treesim as ts
from .errors import ConfigError, DomainError, NumericError, ResourceError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def _num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) for v in r])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v)}")


def _write(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_suffix(suffix) if out.suffix else out.parent / (out.name + suffix)


def _fan_out(batch, N: int, threads: int, chunk: int = 20_000) -> np.ndarray:
    """Run batch(start, count) over chunks; the result is independent of threads."""
    spans = [(s, min(chunk, N - s)) for s in range(0, N, chunk)]
    if threads <= 1 or len(spans) == 1:
        parts = [batch(s, c) for s, c in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda sc: batch(*sc), spans))
    return np.concatenate(parts) if parts else np.zeros(0)


# ---------------------------------------------------------------------------
# commands


def cmd_equilibrium(n: int, eps_tail: float, out_path: Path | None, fmt: str) -> int:
    state = eq.equilibrium_state(n, eps_tail)
    p = eq.particle_law(state)
    kc = eq.sizebiased_law(state)
    header = {
        "n": n,
        "q_n": state.q_n,
        "fprime": state.fprime_qn,
        "m0": state.m0,
        "m1": state.m1,
        "m2": state.m2,
        "tail_bound": state.tail_mass_bound,
        "K": state.K,
    }
    if fmt == "json":
        doc = dict(header, k=state.k.tolist(), c_k=state.c.tolist(), p_k=p.tolist(), kc_k=kc.tolist())
        _write(out_path, _json_text(doc))
        return EXIT_OK
    _write(out_path, _csv_text(["k", "c_k", "p_k", "kc_k"], zip(state.k, state.c, p, kc)))
    if out_path is not None:
        _write(_sibling(out_path, ".json"), _json_text(header))
    return EXIT_OK


def cmd_limits(xmin: float, xmax: float, points: int, out_path: Path | None) -> int:
    if not (0 < xmin < xmax) or points < 2:
        raise DomainError("need 0 < xmin < xmax and points >= 2")
    x = np.geomspace(xmin, xmax, points)
    c = np.array([ll.profile_c(v) for v in x])
    cdf = ll.profile_cdf(x)
    ell = np.array([ll.ell(v) for v in x])
    _write(out_path, _csv_text(["x", "c", "xc", "cdf", "ell_of_x"], zip(x, c, x * c, cdf, ell)))
    return EXIT_OK


def _simulate_trees(kind, n, samples, seed, threads, k_max):
    if n is None:
        raise DomainError(f"--n is required for kind {kind}")
    sb = kind == "sbgw"
    sampler = ts.PrunedTreeSampler(n, size_biased=sb)
    x = _fan_out(lambda s, c: sampler.batch(seed, s, c), samples, threads)
    emp = ts.empirical_law_from_samples(x, k_max)
    state = eq.equilibrium_state(n)
    exact = eq.sizebiased_law(state) if sb else eq.particle_law(state)
    ex = np.zeros(k_max)
    ex[: min(k_max, exact.size)] = exact[:k_max]
    k = np.arange(1, k_max + 1)
    rows = zip(k, emp.counts, emp.probabilities(), ex)
    good = x[x > 0]
    summary = {
        "kind": kind,
        "n": n,
        "samples": samples,
        "seed": seed,
        "k_max": k_max,
        "tv": ts.tv_distance(emp, exact),
        "censored": emp.censored,
        "overflow": emp.overflow,
        "mean_leaves": float(good.mean()) if good.size else math.nan,
        "exact_mean": (state.m2 / state.m1) if sb else (state.m1 / state.m0),
    }
    return ["k", "count", "empirical", "exact"], rows, summary


def _histogram_rows(values, edges, exact_cdf=None):
    counts, _ = np.histogram(values, bins=edges)
    frac = counts / max(values.size, 1)
    if exact_cdf is None:
        return zip(edges[:-1], edges[1:], counts, frac)
    F = exact_cdf(edges)
    return zip(edges[:-1], edges[1:], counts, frac, np.diff(F))


def _simulate_gamma(samples, seed):
    run = cont.sample_gammas(samples, seed=seed)
    g = run.gamma[np.isfinite(run.gamma)] / 8.0
    edges = np.linspace(0.0, 10.0, 101)
    rows = list(_histogram_rows(g, edges, ll.profile_cdf_fast))
    # exact mass of the first bin starts at 0
    summary = {
        "kind": "gamma",
        "samples": samples,
        "seed": seed,
        "ks": ts.ks_distance(g, ll.profile_cdf_fast) if g.size else math.nan,
        "mean_gamma_over_8": float(g.mean()) if g.size else math.nan,
        "stderr": float(g.std(ddof=1) / math.sqrt(g.size)) if g.size > 1 else math.nan,
        "target_mean": 1.0 / ll.limit_profile().abs_a1p,
        "failures": run.failures,
        "max_doublings": int(run.doublings.max()) if samples else 0,
    }
    return ["bin_lo", "bin_hi", "count", "empirical", "exact"], rows, summary


def _simulate_psiex(samples, seed, threads, m):
    areas = _fan_out(lambda s, c: cont.excursion_areas(c, m, seed, s), samples, threads, chunk=5_000)
    est = {}
    for y in (0.5, 1.0, 2.0):
        e, se = cont.psi_ex_mc(y, areas=areas)
        est[str(y)] = {"estimate": e, "stderr": se, "series": ll.psi_ex(y)}
    edges = np.linspace(0.0, 2.5, 101)
    summary = {
        "kind": "psiex",
        "samples": samples,
        "seed": seed,
        "m": m,
        "mean_area": float(areas.mean()),
        "exact_mean_area": ll.EXCURSION_AREA_MEAN,
        "psi": est,
    }
    return ["bin_lo", "bin_hi", "count", "empirical"], _histogram_rows(areas, edges), summary


def _simulate_diffusion(samples, seed, x, lam, dt):
    alpha = 2.0 ** (1.0 / 3.0)
    est, se, taus = cont.simulate_inverse_local_time(cont.DiffusionConfig(alpha=alpha, dt=dt), lam, x, N=samples, seed=seed, return_times=True)
    target = math.exp(-x * cont.psi_laplace_exponent(alpha, lam))
    finite = taus[np.isfinite(taus)]
    edges = np.linspace(0.0, max(4.0, float(finite.max()) if finite.size else 4.0), 101)
    summary = {
        "kind": "diffusion",
        "samples": samples,
        "seed": seed,
        "alpha": alpha,
        "x": x,
        "lambda": lam,
        "dt": dt,
        "estimate": est,
        "stderr": se,
        "target": target,
        "unfinished": int(taus.size - finite.size),
    }
    return ["bin_lo", "bin_hi", "count", "empirical"], _histogram_rows(finite, edges), summary


def cmd_simulate(args) -> int:
    kind, samples, seed = args.kind, args.samples, args.seed
    if samples < 1:
        raise DomainError("--samples must be positive")
    if kind in ("gw", "sbgw"):
        header, rows, summary = _simulate_trees(kind, args.n, samples, seed, args.threads, args.k_max)
    elif kind == "gamma":
        header, rows, summary = _simulate_gamma(samples, seed)
    elif kind == "psiex":
        header, rows, summary = _simulate_psiex(samples, seed, args.threads, args.m)
    else:
        header, rows, summary = _simulate_diffusion(samples, seed, args.x, args.lam, args.dt)
    out = args.out
    if out is None:
        _write(None, _json_text(summary))
        return EXIT_OK
    _write(_sibling(out, ".csv"), _csv_text(header, rows))
    _write(_sibling(out, ".json"), _json_text(summary))
    return EXIT_OK


def cmd_validate(suite: str, seed: int, out_path: Path | None) -> int:
    from .validation import run_suite

    report = run_suite(suite, seed, progress=lambda c: print(c.line(), file=sys.stderr, flush=True))
    _write(out_path, _json_text(report.to_dict()))
    return EXIT_OK if report.passed else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coagfrag", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1, help="advisory; outputs do not depend on it")
        sp.add_argument("--out", type=Path, default=None)

    e = sub.add_parser("equilibrium", help="exact equilibrium for one n")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--eps-tail", type=float, default=1e-12)
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    common(e)

    lm = sub.add_parser("limits", help="tabulate c(x), x c(x), its CDF and ell(x)")
    lm.add_argument("--xmin", type=float, default=0.01)
    lm.add_argument("--xmax", type=float, default=20.0)
    lm.add_argument("--points", type=int, default=200)
    common(lm)

    s = sub.add_parser("simulate", help="Monte Carlo runs with histogram and summary")
    s.add_argument("--kind", choices=("gw", "sbgw", "gamma", "psiex", "diffusion"), required=True)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--k-max", type=int, default=2000)
    s.add_argument("--m", type=int, default=2**14, help="steps per excursion")
    s.add_argument("--x", type=float, default=0.25, help="local-time level")
    s.add_argument("--lam", type=float, default=1.0)
    s.add_argument("--dt", type=float, default=1e-4)
    common(s)

    v = sub.add_parser("validate", help="run the acceptance checks")
    v.add_argument("--suite", choices=("analytic", "simulation", "all"), default="all")
    common(v)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "equilibrium":
            return cmd_equilibrium(args.n, args.eps_tail, args.out, args.format)
        if args.command == "limits":
            return cmd_limits(args.xmin, args.xmax, args.points, args.out)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_validate(args.suite, args.seed, args.out)
    except (DomainError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, ResourceError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
