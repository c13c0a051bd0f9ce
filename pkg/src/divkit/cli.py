"""Command line harness: named experiments, JSON configuration, CSV export.

    divkit run <name> [--config file.json] [--radii a,b,c] [--seed N] [--out dir]
    divkit list
    divkit verify <report.json>

Every experiment writes its CSVs, a ``report.json`` holding its assertions
and a ``summary.json``; the exit status is 0 iff every assertion passes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .constructions import (
    LeafParam,
    QIMap,
    VerificationReport,
    embed_Y_point,
    equator_index,
    flat_sphere,
    identity_map,
    meridian_lengths,
    nonconvexity_gap,
    perturb_loop,
    polyline_length,
    pulloff_filling,
    pulloff_report,
    round_sphere,
    straighten_report,
    suspend,
    tilted_flat_circle,
    transport_sphere,
    y_path,
    y_sphere_half_length,
)
from .divergence import (
    GrowthSeries,
    OptimizerConfig,
    coarea_report,
    estimate_divergence,
    fit_growth,
    leaf_slice,
)
from .geometry import (
    GeometryError,
    ModelSpace,
    dist,
    dist_to_base,
    radial_project,
    random_isometry,
    sphere_sample,
    tangent_exp,
)
from .simplicial import check_admissible, k_volume, triangulate_ball

USAGE_ERROR = 2


@dataclass
class ExperimentSpec:
    name: str
    space: dict | None = None
    params: dict = field(default_factory=dict)
    output_dir: str = "."

    def __post_init__(self):
        if self.name not in REGISTRY:
            raise KeyError(self.name)


@dataclass
class _Result:
    reports: list = field(default_factory=list)
    files: dict = field(default_factory=dict)  # file name -> text
    growth: dict | None = None  # {"csv": name, "fit": dict}

    def check(self, name: str, measured: float, budget: float, relation: str = "<=") -> None:
        self.reports.append(VerificationReport(name, measured, budget, relation))


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return repr(x) if math.isfinite(x) else "nan"


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _space(spec: ExperimentSpec, default: ModelSpace) -> ModelSpace:
    return ModelSpace.from_json(spec.space) if spec.space else default


def _optimizer(params: dict) -> OptimizerConfig:
    cfg = dict(params.get("optimizer", {}))
    if "seed" in params:
        cfg["rng_seed"] = int(params["seed"])
    return OptimizerConfig.from_json(cfg)


def _growth(res: _Result, series: GrowthSeries, name: str = "growth.csv") -> dict | None:
    res.files[name] = series.to_csv()
    if series.fit is not None:
        res.growth = {"csv": name, "fit": series.fit}
    return series.fit


def _fit_entry(fit: dict, kind: str) -> dict:
    """The regression of the requested kind, whichever one won."""
    if fit.get("leading", fit["kind"]) == kind or fit["kind"] == kind:
        return fit
    return fit["alternative"]


# ---------------------------------------------------------------------------
# experiments


def _div0(spec: ExperimentSpec, res: _Result) -> None:
    p = spec.params
    space = _space(spec, ModelSpace.hyperbolic(2))
    hyperbolic = any(f.hyperbolic for f in space.factors)
    series = estimate_divergence(
        space, 0, p["rho"], p["A"], p["radii"], "antipodal_pair", _optimizer(p)
    )
    oracle_tol = p.get("oracle_tol", 0.1 if hyperbolic else 0.02)
    rows = []
    for r, v, ok, _ in series.rows:
        exact = math.pi * (math.sinh(r) if hyperbolic else r)
        rows.append((r, v, exact, v / exact))
        res.check(f"length_vs_half_circle_r={r:g}", abs(v / exact - 1.0), oracle_tol)
    res.files["oracle.csv"] = _csv(["r", "length", "half_circle", "ratio"], rows)
    fit = _growth(res, series)
    if fit is None:
        res.check("growth_fit_points", len(series.points), 4, ">=")
        return
    if hyperbolic:
        res.check("fit_is_exponential", float(fit["kind"] == "exponential"), 1.0, ">=")
        e = _fit_entry(fit, "exponential")
        res.check("exponential_rate_min", e["parameter"], p.get("rate_min", 0.8), ">=")
        res.check("exponential_rate_max", e["parameter"], p.get("rate_max", 1.1), "<=")
    else:
        e = _fit_entry(fit, "polynomial")
        res.check("polynomial_degree_error", abs(e["parameter"] - 1.0), 0.1)


def _pulloff(spec: ExperimentSpec, res: _Result) -> None:
    p = spec.params
    space = _space(spec, ModelSpace.hyperbolic(2).times(ModelSpace.euclidean(2)))
    A, depth = p["A"], p["depth"]
    rows = []
    for r in p["radii"]:
        gamma = tilted_flat_circle(space, r, depth)
        filling = pulloff_filling(space, gamma, A, r)
        for rep in pulloff_report(filling, A, r):
            rep.bound_name += f"_r={r:g}"
            res.reports.append(rep)
        rows.append((r, k_volume(filling), 35.0 * A * r**3))
    res.files["pulloff.csv"] = _csv(["r", "area", "budget"], rows)
    series = GrowthSeries([(r, a) for r, a, _ in rows], None, [(r, a, True, 0) for r, a, _ in rows])
    series.fit = fit_growth(series.points)
    fit = _growth(res, series)
    res.check("loglog_degree", _fit_entry(fit, "polynomial")["parameter"], p.get("degree_max", 3.3))


def _suspend(spec: ExperimentSpec, res: _Result) -> None:
    p = spec.params
    space = _space(spec, ModelSpace.hyperbolic(2).times(ModelSpace.euclidean(1)))
    X = ModelSpace(space.factors[:-1])
    depth, levels = p["depth"], p.get("levels", 16)
    rows = []
    for r in p["radii"]:
        f = round_sphere(X, 1, r, depth + 2)
        s = suspend(space, f, r, levels)
        rad_err = float(np.max(np.abs(dist_to_base(space, s.images) - r)))
        eq = s.images[equator_index(f.domain.n_vertices, levels), : X.ambient_dim]
        eq_err = float(np.max(np.abs(eq - f.images)))
        mer = meridian_lengths(s, f.domain.n_vertices) / (math.pi * r)
        res.check(f"suspension_radius_error_r={r:g}", rad_err, 1e-6)
        res.check(f"equator_error_r={r:g}", eq_err, 1e-9)
        res.check(f"meridian_ratio_error_r={r:g}", float(np.max(np.abs(mer - 1.0))), 0.01)
        rows.append((r, rad_err, eq_err, float(mer.min()), float(mer.max())))
    res.files["suspension.csv"] = _csv(["r", "radius_error", "equator_error", "meridian_min", "meridian_max"], rows)
    series = estimate_divergence(space, 1, p["rho"], p["A"], p["radii"], "suspended", _optimizer(p), depth)
    fit = _growth(res, series)
    if fit is None:
        res.check("growth_fit_points", len(series.points), 4, ">=")
        return
    res.check("exponential_rate_min", _fit_entry(fit, "exponential")["parameter"], p.get("rate_min", 0.3), ">=")


def _hardfill(spec: ExperimentSpec, res: _Result) -> None:
    p = spec.params
    space = _space(spec, ModelSpace.hyperbolic(2, 2))
    k = len(space.factors)
    kept: dict = {}
    series = estimate_divergence(
        space, k - 1, p["rho"], p["A"], p["radii"], "flat_sphere", _optimizer(p), p["depth"], keep_fillings=kept
    )
    fit = _growth(res, series)
    if fit is None:
        res.check("growth_fit_points", len(series.points), 4, ">=")
    else:
        e = _fit_entry(fit, "exponential")
        poly = _fit_entry(fit, "polynomial")
        res.check("exponential_rate_min", e["parameter"], p.get("rate_min", 0.3), ">=")
        res.check("exponential_minus_polynomial_r_squared", e["r_squared"] - poly["r_squared"], 0.0, ">=")
    rows = []
    vols = {r: v for r, v, ok, _ in series.rows if ok}
    for r, m in sorted(kept.items()):
        sl = leaf_slice(m, LeafParam.zero(k))
        oracle = y_sphere_half_length(r, k)
        res.check(f"leaf_slice_ratio_r={r:g}", sl.length / oracle, p.get("slice_ratio", 0.95), ">=")
        if k == 2:
            rep = coarea_report(m, vols[r], samples=p.get("coarea_samples", 41))
            rep.bound_name += f"_r={r:g}"
            res.reports.append(rep)
        rows.append((r, vols[r], sl.length, oracle))
    res.files["leaf_slices.csv"] = _csv(["r", "area", "slice_length", "leaf_half_circle"], rows)


def _embedding(spec: ExperimentSpec, res: _Result) -> None:
    p = spec.params
    space = _space(spec, ModelSpace.hyperbolic(2, 2))
    k = len(space.factors)
    rng = np.random.default_rng(p["seed"])
    c = 2.0 * math.sqrt(k)
    n_u = space.dim - k
    violations, rows = 0, []
    for i in range(p["pairs"]):
        s = rng.uniform(-2, 2, k)
        s -= s.mean()
        a = embed_Y_point(space, rng.uniform(-4, 4), rng.normal(0, 3, n_u), s)
        b = embed_Y_point(space, rng.uniform(-4, 4), rng.normal(0, 3, n_u), s)
        _, length = y_path(space, a, b)
        d = float(dist(space, a, b))
        ok = d <= length + 1e-9 and length <= c * d + c + 1e-6
        violations += not ok
        rows.append((i, d, length, ok))
    res.files["sandwich.csv"] = _csv(["pair", "dist_x", "y_path_length", "ok"], rows)
    res.check("sandwich_violations", violations, 0)
    gap = nonconvexity_gap(15.0, k)
    res.check("nonconvexity_gap_formula_error", abs(gap - 15.0 * math.sqrt(k - 1) / math.sqrt(k)), 0.0)
    res.check("nonconvexity_gap_l=15", gap, 10.0, ">=")


def _leafsep(spec: ExperimentSpec, res: _Result) -> None:
    p = spec.params
    space = _space(spec, ModelSpace.hyperbolic(2, 2))
    k = len(space.factors)
    rng = np.random.default_rng(p["seed"])
    n_u = space.dim - k
    worst, rows = math.inf, []
    for i in range(p["pairs"]):
        s1, s2 = rng.uniform(-3, 3, k), rng.uniform(-3, 3, k)
        s1 -= s1.mean()
        s2 -= s2.mean()
        a = embed_Y_point(space, rng.uniform(-4, 4), rng.normal(0, 3, n_u), s1)
        b = embed_Y_point(space, rng.uniform(-4, 4), rng.normal(0, 3, n_u), s2)
        d = float(dist(space, a, b))
        sep = float(np.linalg.norm(s1 - s2))
        worst = min(worst, d - sep)
        rows.append((i, d, sep))
    res.files["leaf_separation.csv"] = _csv(["pair", "dist_x", "leaf_separation"], rows)
    res.check("dist_minus_leaf_separation", worst, -1e-9, ">=")


def _random_loop(rng: np.random.Generator, case: str) -> np.ndarray:
    n = int(rng.integers(3, 9))
    th = np.sort(rng.uniform(0, 2 * math.pi, n))
    if case == "inside":
        pts = rng.uniform(0.1, 0.9, n)[:, None] * np.stack([np.cos(th), np.sin(th)], 1)
    elif case == "outside":
        centre = rng.uniform(3.0, 5.0) * np.array([math.cos(th[0]), math.sin(th[0])])
        pts = centre + rng.uniform(0.2, 1.5, n)[:, None] * np.stack([np.cos(th), np.sin(th)], 1)
    else:
        pts = rng.uniform(0.3, 2.5, n)[:, None] * np.stack([np.cos(th), np.sin(th)], 1)
        pts[0] *= 0.5 / np.linalg.norm(pts[0])
        pts[1] *= 1.8 / np.linalg.norm(pts[1])
    return np.vstack([pts, pts[:1]])


def _perturb(spec: ExperimentSpec, res: _Result) -> None:
    p = spec.params
    rng = np.random.default_rng(p["seed"])
    r = p.get("r", 1.0)
    cases = ("outside", "inside", "mixed")
    counts = dict.fromkeys(cases, 0)
    worst = {"min_norm": math.inf, "length": -math.inf, "area": -math.inf}
    rows = []
    for i in range(p["loops"]):
        want = cases[i % 3]
        while True:
            beta = _random_loop(rng, want)
            A = polyline_length(beta) / r
            loop, hom = perturb_loop(beta, A, r)
            if loop.case == want:
                break
        counts[loop.case] += 1
        area = k_volume(hom)
        worst["min_norm"] = min(worst["min_norm"], loop.min_norm() - 1.0)
        worst["length"] = max(worst["length"], loop.length() - math.pi * A * r)
        worst["area"] = max(worst["area"], area - 2 * math.pi * A * r)
        rows.append((i, loop.case, A, loop.length(), loop.min_norm(), area))
    res.files["loops.csv"] = _csv(["loop", "case", "A", "length", "min_norm", "homotopy_area"], rows)
    res.check("min_norm_minus_one", worst["min_norm"], -1e-9, ">=")
    res.check("length_excess", worst["length"], 1e-6)
    res.check("homotopy_area_excess", worst["area"], p.get("area_tol", 1e-9))
    for c in cases:
        res.check(f"branch_count_{c}", counts[c], 1, ">=")


def _straighten(spec: ExperimentSpec, res: _Result) -> None:
    p = spec.params
    space = _space(spec, ModelSpace.hyperbolic(2, 2))
    rng = np.random.default_rng(p["seed"])
    A, r, depth = p["A"], p.get("r", 2.0), p["depth"]
    rot = random_isometry(space, rng, scale=0.0)
    maps = {"identity": identity_map(space), "factor_isometry": QIMap(rot, 1.0, 0.0, 0.0, space, space)}
    f = flat_sphere(space, r, depth)
    base = check_admissible(f, r, 1.0, A, "sphere")
    rows = []
    for name, F in maps.items():
        g = transport_sphere(F, f, r)
        rep = check_admissible(g, r / F.K, 1.0, A * F.K ** (2 * f.dim), "sphere")
        res.check(f"transport_admissible_{name}", float(rep.sphere_admissible and base.sphere_admissible), 1.0, ">=")
        res.check(f"transport_volume_change_{name}", abs(rep.volume - base.volume), 1e-6)
        rows.append((name, base.volume, rep.volume))
    res.files["transport.csv"] = _csv(["map", "volume_before", "volume_after"], rows)
    # radial projection onto S(r) does not increase distances outside B(r)
    n = p.get("pairs", 10000)
    P = sphere_sample(space, r, rng, n)
    Q = sphere_sample(space, r, rng, n)
    grow = rng.uniform(1.0, 3.0, (2, n))
    P = radial_project(space, P, r * grow[0])
    Q = radial_project(space, Q, r * grow[1])
    excess = dist(space, radial_project(space, P, r), radial_project(space, Q, r)) - dist(space, P, Q)
    res.check("radial_projection_lipschitz_excess", float(np.max(excess)), 1e-9)
    # straightening a rotation of a triangulated ball
    ball = triangulate_ball(space.dim, depth=1, layers=2)
    net = _ball_net(space, ball, p.get("net_radius", 1.0))
    for rep in straighten_report(maps["factor_isometry"], ball, net):
        res.reports.append(rep)


def _ball_net(space: ModelSpace, ball, radius: float) -> np.ndarray:
    V = ball.vertices
    if V.shape[1] != space.dim:
        raise GeometryError("ball dimension must match the space")
    base = np.broadcast_to(space.basepoint, (len(V), space.ambient_dim))
    return tangent_exp(space, base, radius * V)


@dataclass(frozen=True)
class _Entry:
    description: str
    defaults: dict
    run: Callable[[ExperimentSpec, _Result], None]


REGISTRY: dict[str, _Entry] = {
    "div0-hyperbolic": _Entry(
        "shortest outside-ball paths between antipodal points of S(r) in H^2",
        {"rho": 1.0, "A": 10.0, "radii": [1, 2, 3, 4, 5], "seed": 0,
         "optimizer": {"layers": 8, "refine_rounds": 2, "max_iters": 300}},
        _div0,
    ),
    "pulloff-cubic": _Entry(
        "explicit fillings of flat circles in H^2 x R^2 (cubic area bound)",
        {"A": 7.0, "radii": [2, 4, 6, 8, 10], "depth": 5, "seed": 0},
        _pulloff,
    ),
    "suspend-exp": _Entry(
        "suspensions in H^2 x R and their optimized fillings",
        {"rho": 1.0, "A": 10.0, "radii": [1, 2, 3, 4, 5], "depth": 4, "seed": 0,
         "optimizer": {"layers": 4, "refine_rounds": 1, "max_iters": 100, "tolerance": 1e-3}},
        _suspend,
    ),
    "product-hardfill": _Entry(
        "optimized fillings of flat circles in H^2 x H^2, leaf slices and co-area",
        {"rho": 1.0, "A": 10.0, "radii": [1, 2, 3, 4, 5, 6], "depth": 4, "seed": 0,
         "optimizer": {"layers": 4, "refine_rounds": 1, "max_iters": 100, "tolerance": 1e-3}},
        _hardfill,
    ),
    "embedding-check": _Entry(
        "leaf paths versus ambient distance in H^2 x H^2",
        {"pairs": 1000, "seed": 0},
        _embedding,
    ),
    "leaf-separation": _Entry(
        "ambient distance between leaves bounds their parameter gap",
        {"pairs": 1000, "seed": 0},
        _leafsep,
    ),
    "perturb-suite": _Entry(
        "pushing planar loops off the unit disc, all three branches",
        {"loops": 100, "seed": 0},
        _perturb,
    ),
    "straighten-demo": _Entry(
        "transport of spheres by isometries, radial projection, straightening",
        {"A": 10.0, "r": 2.0, "depth": 4, "pairs": 10000, "seed": 0},
        _straighten,
    ),
}


# ---------------------------------------------------------------------------
# running and verifying


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run one experiment and write its artifacts into ``spec.output_dir``.

    Returns the summary ``{experiment, pass_count, fail_count, wall_time}``
    (plus ``failed``, the names of failing assertions).
    """
    entry = REGISTRY[spec.name]
    params = json.loads(json.dumps(entry.defaults))
    params.update(spec.params)
    spec = ExperimentSpec(spec.name, spec.space, params, spec.output_dir)
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    res = _Result()
    try:
        entry.run(spec, res)
    except GeometryError as exc:
        res.reports.append(VerificationReport(f"error: {exc}", math.nan, 0.0))
    wall = time.perf_counter() - t0
    for name, text in res.files.items():
        with open(out / name, "w", newline="\n") as fh:
            fh.write(text)
    report = {
        "experiment": spec.name,
        "params": params,
        "space": spec.space,
        "assertions": [r.to_json() for r in res.reports],
        "growth": res.growth,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    failed = [r.bound_name for r in res.reports if not r.passed]
    summary = {
        "experiment": spec.name,
        "pass_count": len(res.reports) - len(failed),
        "fail_count": len(failed),
        "wall_time": wall,
        "failed": failed,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def verify_report(path: str | Path) -> list[str]:
    """Re-check a stored report; returns the list of problems (empty if sound).

    Every assertion is re-evaluated from its stored measurement and budget,
    and a stored growth fit is recomputed from its CSV.
    """
    path = Path(path)
    obj = json.loads(path.read_text())
    problems = []
    for a in obj.get("assertions", []):
        rep = VerificationReport.from_json(a)
        now = rep.recheck()
        if now != bool(a["pass"]):
            problems.append(f"{rep.bound_name}: stored pass={a['pass']} but recheck gives {now}")
        elif not now:
            problems.append(f"{rep.bound_name}: fails ({rep.measured!r} {rep.relation} {rep.budget!r})")
    growth = obj.get("growth")
    if growth:
        with open(path.parent / growth["csv"], newline="") as fh:
            rows = list(csv.DictReader(fh))
        key = "volume" if "volume" in rows[0] else "area"
        pts = [(float(row["r"]), float(row[key])) for row in rows if row.get("admissible", "true") == "true"]
        fit = fit_growth(pts)
        stored = growth["fit"]
        if fit["kind"] != stored["kind"] or not math.isclose(fit["parameter"], stored["parameter"], rel_tol=1e-9):
            problems.append(f"growth fit from {growth['csv']} does not match the stored fit")
    return problems


def _parse_radii(text: str) -> list[float]:
    try:
        radii = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad radius list {text!r}") from None
    if not radii or any(r <= 0 for r in radii):
        raise argparse.ArgumentTypeError("radii must be positive")
    return radii


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="divkit", description="higher divergence experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a named experiment")
    run.add_argument("name")
    run.add_argument("--config", help="JSON file with params (and optionally a space descriptor)")
    run.add_argument("--radii", type=_parse_radii)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", default=None, help="output directory (default: ./out/<name>)")
    sub.add_parser("list", help="list the experiments")
    ver = sub.add_parser("verify", help="re-check a stored report.json")
    ver.add_argument("report")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "list":
        for name, entry in REGISTRY.items():
            print(f"{name:18s} {entry.description}")
        return 0
    if args.command == "verify":
        try:
            problems = verify_report(args.report)
        except (OSError, ValueError, KeyError) as exc:
            print(f"cannot verify {args.report}: {exc}", file=sys.stderr)
            return USAGE_ERROR
        for msg in problems:
            print(msg)
        print("ok" if not problems else f"{len(problems)} problem(s)")
        return 0 if not problems else 1
    if args.name not in REGISTRY:
        print(f"unknown experiment {args.name!r}; try 'divkit list'", file=sys.stderr)
        return USAGE_ERROR
    params, space = {}, None
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            print(f"cannot read config: {exc}", file=sys.stderr)
            return USAGE_ERROR
        space = cfg.pop("space", None)
        params = cfg.get("params", cfg)
    if args.radii is not None:
        params["radii"] = args.radii
    if args.seed is not None:
        params["seed"] = args.seed
    out = args.out or str(Path("out") / args.name)
    summary = run_experiment(ExperimentSpec(args.name, space, params, out))
    print(json.dumps({k: summary[k] for k in ("experiment", "pass_count", "fail_count", "wall_time")}))
    for name in summary["failed"]:
        print(f"FAILED: {name}", file=sys.stderr)
    return 0 if summary["fail_count"] == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
