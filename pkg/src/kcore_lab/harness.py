"""Command line entry point and seeded Monte Carlo replication.

Every run is a pure function of its configuration and master seed: rep ``i``
uses a PCG64 generator seeded with ``seed XOR splitmix64(i)``, and rows are
written in rep order whatever the degree of parallelism.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from kcore_lab import degrees as deg_mod
from kcore_lab import graphgen, peeling, stochastics, theory
from kcore_lab.errors import DomainError, KCoreError, ParseError

CSV_TAG = "# kcore-lab v1"
COLUMNS = [
    "rep", "seed", "n", "k", "v_core", "e_core", "tau", "v_frac", "e_frac",
    "predicted_v_frac", "predicted_e_frac", "simple_tries",
]
MODES = ("theory", "peel", "simulate", "deathproc", "tailbound", "compare")
MODELS = ("poisson", "explicit", "gnm", "gnp", "sequence")
GENERATOR = "numpy PCG64, seed = master XOR splitmix64(rep)"
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_FAIL = 0, 1, 2, 3
_MASK = (1 << 64) - 1


class RunError(KCoreError):
    def __init__(self, rep: int, cause: Exception):
        self.rep = rep
        super().__init__(f"rep {rep}: {cause}")


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def rep_seed(seed: int, rep: int) -> int:
    return (seed ^ splitmix64(rep)) & _MASK


def rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(rep_seed(seed, rep)))


@dataclass
class ExperimentConfig:
    mode: str = "theory"
    k: int = 3
    model: str | None = None
    lam: float | None = None
    n: int | None = None
    m: int | None = None
    reps: int = 1
    seed: int = 0
    dist_file: str | None = None
    seq_file: str | None = None
    graph_file: str | None = None
    record: str = "summary"
    out: str | None = None
    simple: bool = False
    jobs: int = 1
    process: str = "pure"
    gamma: float = 1.0
    d: float = 2.0
    y: int | None = None
    u: float | None = None
    trials: int = 100_000
    results: str | None = None
    tol: float = 0.01
    min_empty: float = 0.95

    def resolved_model(self) -> str:
        if self.model is not None:
            return self.model
        given = [
            name
            for name, flag in (
                ("sequence", self.seq_file),
                ("explicit", self.dist_file),
                ("gnm", self.m),
                ("poisson", self.lam),
            )
            if flag is not None
        ]
        if len(given) != 1:
            raise DomainError("specify exactly one model (use --model to disambiguate)")
        return given[0]

    def validate(self) -> None:
        if self.mode not in MODES:
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.reps < 1:
            raise DomainError("reps must be at least 1")
        if self.k < 2:
            raise DomainError("k must be at least 2")
        if not 0 <= self.seed <= _MASK:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.record not in peeling.RECORD_MODES:
            raise DomainError(f"unknown record mode {self.record!r}")
        if self.model is not None and self.model not in MODELS:
            raise DomainError(f"unknown model {self.model!r}")
        if self.mode in ("theory", "simulate"):
            model = self.resolved_model()
            need = {
                "poisson": ["lam"],
                "explicit": ["dist_file"],
                "gnm": ["n", "m"],
                "gnp": ["n", "lam"],
                "sequence": ["seq_file"],
            }[model]
            if self.mode == "simulate" and model in ("poisson", "explicit"):
                need = need + ["n"]
            missing = [f for f in need if getattr(self, f) is None]
            if missing:
                raise DomainError(f"model {model} needs {', '.join(missing)}")


@dataclass
class RunRecord:
    rep: int
    seed: int
    n: int
    k: int
    v_core: int
    e_core: int
    tau: float
    v_frac: float
    e_frac: float
    predicted_v_frac: float
    predicted_e_frac: float
    simple_tries: int | None = None


# ---------------------------------------------------------------------------
# Model plumbing
# ---------------------------------------------------------------------------


def load_distribution(cfg: ExperimentConfig) -> theory.DegreeDistribution:
    model = cfg.resolved_model()
    if model in ("poisson", "gnp"):
        return theory.DegreeDistribution.poisson(cfg.lam)
    if model == "gnm":
        return theory.DegreeDistribution.poisson(2.0 * cfg.m / cfg.n)
    if model == "explicit":
        with open(cfg.dist_file) as fh:
            return theory.DegreeDistribution.from_json(json.load(fh))
    seq = deg_mod.read_degree_sequence(cfg.seq_file)
    counts = np.bincount(seq.degrees)
    return theory.DegreeDistribution.explicit(counts / seq.n)


def prediction_for(cfg: ExperimentConfig) -> theory.CorePrediction:
    return theory.predict_core(load_distribution(cfg), cfg.k)


def _trajectory_rows(traj: peeling.PeelTrajectory, dist, k: int):
    n = traj.n
    p = np.exp(-traj.t)
    h = theory.h_func(dist, k, p)
    h1 = theory.h1_func(dist, k, p)
    lam = dist.mean_lambda
    for i in range(traj.t.size):
        yield [
            repr(float(traj.t[i])), int(traj.L[i]), int(traj.H[i]), int(traj.H1[i]),
            repr(float(traj.two_m / n * p[i] ** 2)), repr(float(h[i])),
            repr(float(h1[i])), repr(float(lam * p[i] ** 2 - h[i])),
        ]


def _one_rep(cfg: ExperimentConfig, rep: int, pred: theory.CorePrediction, dist, seq):
    seed = rep_seed(cfg.seed, rep)
    rng = np.random.Generator(np.random.PCG64(seed))
    model = cfg.resolved_model()
    tau = math.nan
    tries = None
    traj = None
    if model in ("gnp", "gnm"):
        if model == "gnp":
            g = graphgen.sample_gnp(cfg.n, cfg.lam, rng)
        else:
            g = graphgen.sample_gnm(cfg.n, cfg.m, rng)
        core = peeling.peel_bucket(g, cfg.k)
        n = cfg.n
    else:
        if seq is None:
            seq = deg_mod.sample_degrees(dist, cfg.n, rng)
        n = seq.n
        if cfg.simple:
            g, tries = graphgen.sample_simple(seq, rng)
            core = peeling.peel_bucket(g, cfg.k)
        else:
            core, traj = peeling.peel_halfedge(seq, cfg.k, rng, record=cfg.record)
            tau = traj.tau
    rec = RunRecord(
        rep=rep,
        seed=seed,
        n=n,
        k=cfg.k,
        v_core=core.v_core,
        e_core=core.e_core,
        tau=float(tau),
        v_frac=core.v_core / n,
        e_frac=core.e_core / n,
        predicted_v_frac=float(pred.v_frac),
        predicted_e_frac=float(pred.e_frac),
        simple_tries=tries,
    )
    rows = None
    if traj is not None and cfg.record == "full":
        rows = list(_trajectory_rows(traj, dist, cfg.k))
    return rec, rows


def _rep_worker(args):
    cfg, rep, pred, dist, seq = args
    try:
        return _one_rep(cfg, rep, pred, dist, seq)
    except KCoreError as exc:
        raise RunError(rep, exc) from exc


def _json_safe(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {key: _json_safe(v) for key, v in obj.items()}
    return obj


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def records_to_csv(records: list[RunRecord]) -> str:
    buf = io.StringIO()
    buf.write(CSV_TAG + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
    if records:
        stats = summarize(records)
        for label in ("mean", "sd", "abs_err"):
            row = stats[label]
            w.writerow([label] + [_fmt(row.get(c)) for c in COLUMNS[1:]])
    return buf.getvalue()


def summarize(records: list[RunRecord]) -> dict:
    numeric = ["v_core", "e_core", "tau", "v_frac", "e_frac", "predicted_v_frac", "predicted_e_frac"]
    mean, sd = {}, {}
    for c in numeric:
        vals = np.array([getattr(r, c) for r in records], dtype=float)
        mean[c] = float(np.mean(vals))
        sd[c] = float(np.std(vals, ddof=1)) if vals.size > 1 else math.nan
    gap = {
        "v_frac": abs(mean["v_frac"] - mean["predicted_v_frac"]),
        "e_frac": abs(mean["e_frac"] - mean["predicted_e_frac"]),
    }
    empty = sum(1 for r in records if r.v_core == 0) / len(records)
    return {"mean": mean, "sd": sd, "abs_err": gap, "empty_fraction": empty}


def run(cfg: ExperimentConfig) -> tuple[list[RunRecord], str]:
    """Simulate ``cfg.reps`` independent replicates; returns records and CSV text."""
    cfg.validate()
    dist = load_distribution(cfg)
    pred = theory.predict_core(dist, cfg.k)
    seq = deg_mod.read_degree_sequence(cfg.seq_file) if cfg.resolved_model() == "sequence" else None
    jobs = [(cfg, rep, pred, dist, seq) for rep in range(cfg.reps)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_rep_worker, jobs))
    else:
        results = [_rep_worker(j) for j in jobs]
    records = [r for r, _ in results]
    text = records_to_csv(records)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
        with open(cfg.out + ".json", "w") as fh:
            meta = {"config": asdict(cfg), "generator": GENERATOR, "prediction": asdict(pred)}
            json.dump(meta, fh, indent=2, sort_keys=True, default=float)
        for rec, rows in results:
            if rows is None:
                continue
            with open(f"{cfg.out}.rep{rec.rep}.traj.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["t", "L", "H", "H1", "pred_LH_over_n", "pred_H_over_n",
                            "pred_H1_over_n", "pred_L_over_n"])
                w.writerows(rows)
    return records, text


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    observed: float
    expected: float
    tolerance: float

    @property
    def gap(self) -> float:
        return abs(self.observed - self.expected)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (
            f"{tag} {self.name}: observed={self.observed:.6g} expected={self.expected:.6g} "
            f"gap={self.gap:.3g} tol={self.tolerance:g}"
        )


def read_results(text: str) -> list[RunRecord]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSV_TAG:
        raise ParseError(f"missing {CSV_TAG!r} header", 1)
    reader = csv.reader(lines[1:])
    header = next(reader, None)
    if header != COLUMNS:
        raise ParseError("column schema mismatch", 2)
    out = []
    for no, row in enumerate(reader, 3):
        if len(row) != len(COLUMNS):
            raise ParseError("wrong number of fields", no)
        if not row[0].isdigit():
            continue
        try:
            d = dict(zip(COLUMNS, row))
            out.append(
                RunRecord(
                    rep=int(d["rep"]),
                    seed=int(d["seed"]),
                    n=int(d["n"]),
                    k=int(d["k"]),
                    v_core=int(d["v_core"]),
                    e_core=int(d["e_core"]),
                    tau=float(d["tau"]),
                    v_frac=float(d["v_frac"]),
                    e_frac=float(d["e_frac"]),
                    predicted_v_frac=float(d["predicted_v_frac"]),
                    predicted_e_frac=float(d["predicted_e_frac"]),
                    simple_tries=int(d["simple_tries"]) if d["simple_tries"] else None,
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), no) from None
    if not out:
        raise ParseError("no replicate rows")
    return out


def compare(
    results_csv: str,
    prediction: theory.CorePrediction | None = None,
    tol: float = 0.01,
    min_empty: float = 0.95,
) -> list[CriterionResult]:
    """Pass/fail per criterion for a results CSV (text) against a prediction.

    Without an explicit prediction the predicted columns of the CSV are used.
    When the predicted core is empty and ``k >= 3`` the share of empty cores
    is also checked against ``min_empty``.
    """
    records = read_results(results_csv)
    stats = summarize(records)
    if prediction is None:
        pv = stats["mean"]["predicted_v_frac"]
        pe = stats["mean"]["predicted_e_frac"]
    else:
        pv, pe = prediction.v_frac, prediction.e_frac
    out = [
        CriterionResult("v_frac", abs(stats["mean"]["v_frac"] - pv) <= tol,
                        stats["mean"]["v_frac"], pv, tol),
        CriterionResult("e_frac", abs(stats["mean"]["e_frac"] - pe) <= tol,
                        stats["mean"]["e_frac"], pe, tol),
    ]
    if pv == 0 and records[0].k >= 3:
        frac = stats["empty_fraction"]
        out.append(CriterionResult("empty_fraction", frac >= min_empty, frac, 1.0, 1.0 - min_empty))
    return out


# ---------------------------------------------------------------------------
# Other modes
# ---------------------------------------------------------------------------


def theory_report(cfg: ExperimentConfig) -> dict:
    dist = load_distribution(cfg)
    pred = theory.predict_core(dist, cfg.k)
    report = {"lambda": dist.mean_lambda, **asdict(pred)}
    report["lambda_crit"] = theory.lambda_crit(cfg.k) if dist.is_poisson else None
    if cfg.out:
        p = np.linspace(0.0, 1.0, 1001)
        h = theory.h_func(dist, cfg.k, p)
        h1 = theory.h1_func(dist, cfg.k, p)
        with open(cfg.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["p", "h", "h1", "gap"])
            for row in zip(p, h, h1, dist.mean_lambda * p * p - h):
                w.writerow([repr(float(x)) for x in row])
    return report


def peel_report(cfg: ExperimentConfig) -> dict:
    rng = rep_rng(cfg.seed, 0)
    if cfg.graph_file:
        with open(cfg.graph_file) as fh:
            g = graphgen.read_edge_list(fh.read())
        core = peeling.peel_bucket(g, cfg.k)
        tau = None
    elif cfg.seq_file:
        seq = deg_mod.read_degree_sequence(cfg.seq_file)
        core, traj, g = peeling.peel_halfedge_realized(seq, cfg.k, rng, record=cfg.record)
        tau = None if math.isnan(traj.tau) else traj.tau
    else:
        raise DomainError("peel mode needs --graph-file or --seq-file")
    if cfg.out:
        inside = np.zeros(g.n, dtype=bool)
        inside[core.core_vertices] = True
        e = g.edges()
        keep = e[inside[e[:, 0]] & inside[e[:, 1]]] if e.size else e
        with open(cfg.out, "w") as fh:
            fh.write(f"{g.n} {keep.shape[0]}\n")
            fh.writelines(f"{u} {v}\n" for u, v in keep.tolist())
    return {"v_core": core.v_core, "e_core": core.e_core, "tau": tau}


def deathproc_report(cfg: ExperimentConfig) -> tuple[dict, str]:
    if cfg.n is None:
        raise DomainError("deathproc mode needs --n (initial level)")
    if cfg.process not in ("pure", "jump", "bins"):
        raise DomainError(f"unknown process {cfg.process!r}")
    rows = []
    for rep in range(cfg.reps):
        seed = rep_seed(cfg.seed, rep)
        rng = np.random.Generator(np.random.PCG64(seed))
        if cfg.process == "pure":
            s = stochastics.simulate_pure_death(cfg.n, rng)
            sup = stochastics.pure_death_sup(s)
            curve = lambda t: np.exp(-t)  # noqa: E731
        elif cfg.process == "jump":
            spec = stochastics.JumpProcessSpec(float(cfg.n), cfg.gamma, cfg.d)
            s = stochastics.simulate_jump_death(spec, rng)
            sup = stochastics.jump_death_sup(s, spec)
            rate = cfg.gamma * cfg.d
            curve = lambda t: np.exp(-rate * t)  # noqa: E731
        else:
            dist = theory.DegreeDistribution.poisson(cfg.lam if cfg.lam is not None else 4.0)
            seq = deg_mod.sample_degrees(dist, cfg.n, rng)
            ens = stochastics.simulate_bins(seq, rng=rng)
            sup = stochastics.bins_weighted_sup(ens, dist, cfg.k)
            s = None
        rows.append((rep, seed, sup))
        if s is not None and cfg.record == "full" and cfg.out:
            meta = {"seed": seed, "n": cfg.n, "mode": "deathproc",
                    "params": {"process": cfg.process, "gamma": cfg.gamma, "d": cfg.d,
                               "generator": GENERATOR}}
            stochastics.write_trajectory_csv(f"{cfg.out}.rep{rep}.csv", s, curve, meta)
    buf = io.StringIO()
    buf.write(CSV_TAG + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rep", "seed", "sup_norm"])
    for rep, seed, sup in rows:
        w.writerow([rep, seed, repr(float(sup))])
    sups = np.array([r[2] for r in rows])
    summary = {
        "process": cfg.process,
        "reps": cfg.reps,
        "max_sup": float(sups.max()),
        "mean_sup": float(sups.mean()),
        "pass_fraction": float(np.mean(sups <= cfg.tol)),
        "tol": cfg.tol,
    }
    return summary, buf.getvalue()


def tailbound_report(cfg: ExperimentConfig) -> dict:
    if cfg.m is None or cfg.y is None or cfg.u is None:
        raise DomainError("tailbound mode needs --m, --y and --u")
    stats = stochastics.matching_pair_tail(cfg.m, cfg.y, cfg.u, cfg.trials, rep_rng(cfg.seed, 0))
    return {
        "m": cfg.m,
        "y": cfg.y,
        "u": cfg.u,
        "trials": cfg.trials,
        "empirical_tail": stats.empirical_tail,
        "bound": stats.bound,
        "exact_tail": stats.exact_tail,
        "stderr": stats.stderr,
        "bound_holds": stats.bound_holds,
        "matches_exact": stats.matches_exact,
    }


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kcore-lab", description="k-core theory, peeling and Monte Carlo checks")
    p.add_argument("--config", help="JSON file with the same keys as the flags")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--k", type=int)
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dist-file")
    p.add_argument("--seq-file")
    p.add_argument("--graph-file")
    p.add_argument("--record", choices=peeling.RECORD_MODES)
    p.add_argument("--out")
    p.add_argument("--simple", action="store_true", default=None,
                   help="condition configuration graphs on being simple")
    p.add_argument("--jobs", type=int)
    p.add_argument("--process", choices=("pure", "jump", "bins"))
    p.add_argument("--gamma", type=float)
    p.add_argument("--d", type=float)
    p.add_argument("--y", type=int)
    p.add_argument("--u", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--results", help="results CSV for --mode compare")
    p.add_argument("--tol", type=float)
    p.add_argument("--min-empty", type=float)
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    names = {f.name for f in fields(ExperimentConfig)}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        data = {key.replace("-", "_"): v for key, v in data.items()}
        unknown = set(data) - names
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **data)
    given = {key: v for key, v in vars(args).items() if key in names and v is not None}
    return replace(cfg, **given)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        cfg.validate()
    except (DomainError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"kcore-lab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if cfg.mode == "theory":
            print(json.dumps(theory_report(cfg), indent=2, default=float))
        elif cfg.mode == "peel":
            print(json.dumps(peel_report(cfg), indent=2))
        elif cfg.mode == "simulate":
            records, text = run(cfg)
            if not cfg.out:
                sys.stdout.write(text)
            stats = summarize(records)
            print(json.dumps(_json_safe({"reps": len(records), **stats}), indent=2), file=sys.stderr)
        elif cfg.mode == "deathproc":
            summary, text = deathproc_report(cfg)
            if cfg.out:
                with open(cfg.out, "w", newline="") as fh:
                    fh.write(text)
            print(json.dumps(summary, indent=2))
        elif cfg.mode == "tailbound":
            report = tailbound_report(cfg)
            print(json.dumps(report, indent=2))
            if not report["bound_holds"]:
                return EXIT_FAIL
        elif cfg.mode == "compare":
            if not cfg.results:
                print("kcore-lab: usage error: compare needs --results", file=sys.stderr)
                return EXIT_USAGE
            with open(cfg.results) as fh:
                verdict = compare(fh.read(), tol=cfg.tol, min_empty=cfg.min_empty)
            for c in verdict:
                print(c.line())
            if not all(c.passed for c in verdict):
                return EXIT_FAIL
    except (KCoreError, OSError) as exc:
        print(f"kcore-lab: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
