"""Monte Carlo harness: replicate estimation over an n-grid and summarize error.

A plan names a process (or pair), one functional, one or more estimator
variants, a radius schedule, an n-grid, and a replication count.  ``run``
draws independent replications, evaluates every estimator variant on the same
draws, and aggregates squared errors against the oracle truth into per-n rows
of MSE, squared bias, and variance.

Determinism: replication r at grid index g uses the substream
``SeededStream(seed).child(g, r)``, and aggregation sums replications in
fixed order with exact (compensated) summation, so results are bit-identical
for any worker count and any execution order.  Failures of single
replications are recorded; a run aborts if more than 0.1% of them fail.

Bias is measured against the limit functional, not its radius-smoothed
version: that is the estimand of the convergence statements being verified.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import estimators as est
from . import oracle
from .bandwidth import EpsilonSchedule
from .estimators import AsymptoticVariance, EstimationError
from .processes import SeededStream, generate, paired_generate

CSV_HEADER = "estimator,process,n,d,epsilon,gap,reps,mse,bias2,variance,se_mse,seed"
PLOT_HEADER = "log_n,log_mse,fit_line"

# Replications are dispatched in fixed-size chunks regardless of worker
# count, so the task split never depends on the parallelism level.
_CHUNK_REPS = 250

_FUNCTIONALS = ("q20", "q11", "divergence", "renyi2")
_TWO_SAMPLE = ("q11", "divergence")


@dataclass(frozen=True)
class GapRule:
    """Per-n rule for the index-separation gap of incomplete estimators."""

    kind: str
    value: int = 0

    @classmethod
    def fixed(cls, value: int) -> "GapRule":
        return cls("fixed", int(value))

    @classmethod
    def log(cls) -> "GapRule":
        return cls("log")

    @classmethod
    def sqrt(cls) -> "GapRule":
        return cls("sqrt")

    def __post_init__(self):
        if self.kind not in ("fixed", "log", "sqrt"):
            raise ValueError(f"gap rule must be fixed|log|sqrt, got {self.kind!r}")
        if self.kind == "fixed" and self.value < 0:
            raise ValueError(f"fixed gap must be nonnegative, got {self.value}")

    def at(self, n: int) -> int:
        if self.kind == "log":
            return est.log_gap(n)
        if self.kind == "sqrt":
            return est.sqrt_gap(n)
        return self.value

    @property
    def label(self) -> str:
        return self.kind if self.kind != "fixed" else f"fixed{self.value}"


@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator variant to evaluate: functional, variant, and gap rule."""

    functional: str
    variant: str = "complete"
    gap_rule: GapRule | None = None

    def __post_init__(self):
        if self.functional not in _FUNCTIONALS:
            raise ValueError(f"functional must be one of {_FUNCTIONALS}, got {self.functional!r}")
        if self.variant not in ("complete", "incomplete"):
            raise ValueError(f"variant must be complete|incomplete, got {self.variant!r}")
        if self.variant == "incomplete" and self.gap_rule is None:
            object.__setattr__(self, "gap_rule", GapRule.log())
        if self.variant == "complete" and self.gap_rule is not None:
            raise ValueError("complete variant takes no gap rule")

    @property
    def two_sample(self) -> bool:
        return self.functional in _TWO_SAMPLE

    @property
    def label(self) -> str:
        if self.variant == "complete":
            return f"{self.functional}-complete"
        return f"{self.functional}-incomplete-{self.gap_rule.label}"


@dataclass(frozen=True)
class ExperimentPlan:
    """A full experiment: processes, estimators, schedule, grid, replication."""

    process_x: object
    estimators: tuple[EstimatorSpec, ...]
    schedule: EpsilonSchedule
    ns: tuple[int, ...]
    process_y: object = None
    reps: int = 1000
    seed: int = 0
    truth_override: float | None = None
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "ns", tuple(int(n) for n in self.ns))
        if not self.estimators:
            raise ValueError("plan needs at least one estimator spec")
        functionals = {e.functional for e in self.estimators}
        if len(functionals) != 1:
            raise ValueError(f"plan estimators must share one functional, got {functionals}")
        if any(e.two_sample for e in self.estimators) and self.process_y is None:
            raise ValueError("two-sample functionals require process_y")
        if len(set(e.label for e in self.estimators)) != len(self.estimators):
            raise ValueError("estimator labels must be distinct")
        if not self.ns or any(b <= a for a, b in zip(self.ns, self.ns[1:])):
            raise ValueError(f"n grid must be strictly increasing, got {self.ns}")
        if self.ns[0] < 10:
            raise ValueError(f"smallest grid n must be >= 10, got {self.ns[0]}")
        if self.reps < 2:
            raise ValueError(f"reps must be >= 2, got {self.reps}")
        for e in self.estimators:
            if e.variant == "incomplete":
                for n in self.ns:
                    gap = e.gap_rule.at(n)
                    if gap >= n - 1:
                        raise ValueError(
                            f"gap rule {e.gap_rule.label} gives gap {gap} >= n-1 at n={n}"
                        )

    @property
    def functional(self) -> str:
        return self.estimators[0].functional

    @property
    def process_label(self) -> str:
        if self.label is not None:
            return self.label
        kinds = [self.process_x.kind]
        if self.process_y is not None:
            kinds.append(self.process_y.kind)
        return "+".join(kinds)


@dataclass(frozen=True)
class McRow:
    """Per-(estimator, n) Monte Carlo summary."""

    estimator: str
    n: int
    epsilon: float
    gap: int
    mse: float
    bias2: float
    variance: float
    se_mse: float
    reps: int
    failures: int


@dataclass(frozen=True)
class McResult:
    """All rows of one run plus the run-level identifiers."""

    rows: tuple[McRow, ...]
    process: str
    d: int
    seed: int
    truth: float

    def rows_for(self, estimator: str) -> tuple[McRow, ...]:
        out = tuple(r for r in self.rows if r.estimator == estimator)
        if not out:
            raise ValueError(f"no rows for estimator {estimator!r}")
        return out

    def estimator_labels(self) -> tuple[str, ...]:
        seen: list[str] = []
        for r in self.rows:
            if r.estimator not in seen:
                seen.append(r.estimator)
        return tuple(seen)


@dataclass(frozen=True)
class SlopeFit:
    """Ordinary least squares of log(mse) on log(n)."""

    slope: float
    intercept: float
    residual_rms: float
    n_range: tuple[int, int]
    estimator: str = ""


@dataclass(frozen=True)
class NmseCheck:
    """Comparison of n*mse at the largest grid n against 4*sigma2."""

    ratio: float
    passed: bool
    n: int
    mse: float
    sigma2: float
    band: float
    skipped: bool = False
    note: str = ""


def resolve_truth(plan: ExperimentPlan) -> float:
    """Oracle truth for the plan's functional, or the explicit override."""
    if plan.truth_override is not None:
        return float(plan.truth_override)
    report = oracle.true_q(plan.process_x, plan.process_y)
    return report.value_for(plan.functional)


def _evaluate(spec: EstimatorSpec, x, y, eps: float, gap: int) -> float:
    if spec.functional == "q20":
        if spec.variant == "complete":
            return est.estimate_q20(x, eps).value
        return est.estimate_q20_incomplete(x, eps, gap).value
    if spec.functional == "q11":
        if spec.variant == "complete":
            return est.estimate_q11(x, y, eps).value
        return est.estimate_q11_incomplete(x, y, eps, gap).value
    if spec.functional == "divergence":
        return est.estimate_divergence(
            x, y, eps, spec.variant, gap if spec.variant == "incomplete" else None
        )
    return est.estimate_renyi2(
        x, eps, spec.variant, gap if spec.variant == "incomplete" else None
    )


def _eval_chunk(plan: ExperimentPlan, gi: int, n: int, eps: float, r0: int, r1: int):
    """Evaluate replications r0..r1-1 at grid index gi; NaN marks a failure."""
    gaps = [e.gap_rule.at(n) if e.variant == "incomplete" else 0 for e in plan.estimators]
    out = np.full((len(plan.estimators), r1 - r0), np.nan)
    base = SeededStream(plan.seed)
    for j, r in enumerate(range(r0, r1)):
        stream = base.child(gi, r)
        if plan.process_y is not None:
            x, y = paired_generate(plan.process_x, plan.process_y, n, stream)
        else:
            x, y = generate(plan.process_x, n, stream), None
        for e_i, spec in enumerate(plan.estimators):
            try:
                out[e_i, j] = _evaluate(spec, x, y, eps, gaps[e_i])
            except EstimationError:
                pass
    return out


def _aggregate(label: str, n: int, eps: float, gap: int, values: np.ndarray, truth: float) -> McRow:
    ok = values[~np.isnan(values)]
    failures = values.size - ok.size
    if failures > 0.001 * values.size:
        raise RuntimeError(
            f"{failures} of {values.size} replications failed for {label} at n={n}"
        )
    vals = [float(v) for v in ok]
    k = len(vals)
    mean = math.fsum(vals) / k
    sq_errs = [(v - truth) ** 2 for v in vals]
    mse = math.fsum(sq_errs) / k
    variance = math.fsum((v - mean) ** 2 for v in vals) / k
    bias2 = (mean - truth) ** 2
    if abs(mse - (bias2 + variance)) > 1e-12 * mse + 1e-30:
        raise RuntimeError(f"mse decomposition violated for {label} at n={n}")
    sd_sq = math.sqrt(math.fsum((s - mse) ** 2 for s in sq_errs) / (k - 1))
    return McRow(
        estimator=label,
        n=n,
        epsilon=eps,
        gap=gap,
        mse=mse,
        bias2=bias2,
        variance=variance,
        se_mse=sd_sq / math.sqrt(k),
        reps=k,
        failures=failures,
    )


def run(plan: ExperimentPlan, workers: int = 1) -> McResult:
    """Execute the plan and return per-(estimator, n) summaries.

    ``workers`` > 1 spreads replication chunks over a process pool; the
    result is byte-identical to the single-worker run.
    """
    truth = resolve_truth(plan)
    eps_at = {n: plan.schedule.epsilon_at(n) for n in plan.ns}
    chunks = [
        (gi, n, r0, min(r0 + _CHUNK_REPS, plan.reps))
        for gi, n in enumerate(plan.ns)
        for r0 in range(0, plan.reps, _CHUNK_REPS)
    ]
    parts: dict[tuple[int, int], np.ndarray] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                (gi, r0): pool.submit(_eval_chunk, plan, gi, n, eps_at[n], r0, r1)
                for gi, n, r0, r1 in chunks
            }
            parts = {key: f.result() for key, f in futures.items()}
    else:
        for gi, n, r0, r1 in chunks:
            parts[(gi, r0)] = _eval_chunk(plan, gi, n, eps_at[n], r0, r1)

    rows = []
    for e_i, spec in enumerate(plan.estimators):
        for gi, n in enumerate(plan.ns):
            values = np.concatenate(
                [parts[(gi, r0)][e_i] for r0 in range(0, plan.reps, _CHUNK_REPS)]
            )
            gap = spec.gap_rule.at(n) if spec.variant == "incomplete" else 0
            rows.append(_aggregate(spec.label, n, eps_at[n], gap, values, truth))
    # every built-in process emits scalar observations
    return McResult(
        rows=tuple(rows), process=plan.process_label, d=1, seed=plan.seed, truth=truth
    )


# ---------------------------------------------------------------------------
# Rate fitting and the variance-constant check
# ---------------------------------------------------------------------------


def fit_loglog(ns, mses, estimator: str = "") -> SlopeFit:
    """Least-squares slope of log(mse) against log(n)."""
    ns = [int(n) for n in ns]
    mses = [float(m) for m in mses]
    if len(ns) < 3:
        raise ValueError(f"need at least 3 grid points to fit a slope, got {len(ns)}")
    if any(m <= 0.0 for m in mses):
        raise ValueError("all mse values must be positive for a log-log fit")
    log_n = np.log(np.asarray(ns, dtype=float))
    log_mse = np.log(np.asarray(mses, dtype=float))
    slope, intercept = np.polyfit(log_n, log_mse, 1)
    resid = log_mse - (slope * log_n + intercept)
    return SlopeFit(
        slope=float(slope),
        intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        n_range=(min(ns), max(ns)),
        estimator=estimator,
    )


def _pick_estimator(result: McResult, estimator: str | None) -> str:
    labels = result.estimator_labels()
    if estimator is None:
        if len(labels) != 1:
            raise ValueError(f"result has several estimators {labels}; name one")
        return labels[0]
    return estimator


def fit_slope(result: McResult, estimator: str | None = None) -> SlopeFit:
    """Fit the convergence slope of one estimator's rows."""
    label = _pick_estimator(result, estimator)
    rows = result.rows_for(label)
    return fit_loglog([r.n for r in rows], [r.mse for r in rows], estimator=label)


def nmse_limit_check(
    result: McResult,
    sigma2: AsymptoticVariance | float | None,
    band: float = 0.25,
    estimator: str | None = None,
) -> NmseCheck:
    """Check n*mse against 4*sigma2 at the largest grid n.

    Meaningful for regular-regime schedules, where the mean squared error is
    4*sigma2/n to first order.  With ``sigma2=None`` the check is skipped and
    reported as such rather than failing.
    """
    if sigma2 is None:
        return NmseCheck(
            ratio=float("nan"), passed=False, n=0, mse=float("nan"),
            sigma2=float("nan"), band=band, skipped=True, note="sigma2 unavailable",
        )
    s2 = sigma2.sigma2 if isinstance(sigma2, AsymptoticVariance) else float(sigma2)
    label = _pick_estimator(result, estimator)
    row = max(result.rows_for(label), key=lambda r: r.n)
    ratio = row.n * row.mse / (4.0 * s2)
    return NmseCheck(
        ratio=ratio, passed=abs(ratio - 1.0) <= band, n=row.n, mse=row.mse,
        sigma2=s2, band=band,
    )


# ---------------------------------------------------------------------------
# CSV output (both files use exact, stable headers)
# ---------------------------------------------------------------------------


def csv_text(result: McResult) -> str:
    """Render the result as CSV with the stable column set."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for r in result.rows:
        writer.writerow(
            [
                r.estimator, result.process, r.n, result.d, repr(r.epsilon), r.gap,
                r.reps, repr(r.mse), repr(r.bias2), repr(r.variance), repr(r.se_mse),
                result.seed,
            ]
        )
    return buf.getvalue()


def write_csv(result: McResult, path) -> None:
    Path(path).write_text(csv_text(result), encoding="utf-8")


def plot_data_text(result: McResult, estimator: str | None = None) -> str:
    """Per-n log-log points plus the fitted line, ready for external plotting."""
    label = _pick_estimator(result, estimator)
    fit = fit_slope(result, label)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PLOT_HEADER.split(","))
    for r in result.rows_for(label):
        log_n = math.log(r.n)
        writer.writerow(
            [repr(log_n), repr(math.log(r.mse)), repr(fit.intercept + fit.slope * log_n)]
        )
    return buf.getvalue()


def write_plot_data(result: McResult, path) -> list[Path]:
    """Write one plot-data file per estimator; returns the paths written."""
    base = Path(path)
    labels = result.estimator_labels()
    written = []
    for label in labels:
        if len(labels) == 1:
            target = base
        else:
            target = base.with_name(f"{base.stem}-{label}{base.suffix}")
        target.write_text(plot_data_text(result, label), encoding="utf-8")
        written.append(target)
    return written


def read_csv_rows(path) -> list[dict]:
    """Parse a harness CSV back into typed row dicts (header must match)."""
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty CSV file") from None
    if header != CSV_HEADER.split(","):
        raise ValueError(f"unexpected CSV header {header!r}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        if len(rec) != len(header):
            raise ValueError(f"malformed CSV row {rec!r}")
        rows.append(
            {
                "estimator": rec[0], "process": rec[1], "n": int(rec[2]),
                "d": int(rec[3]), "epsilon": float(rec[4]), "gap": int(rec[5]),
                "reps": int(rec[6]), "mse": float(rec[7]), "bias2": float(rec[8]),
                "variance": float(rec[9]), "se_mse": float(rec[10]), "seed": int(rec[11]),
            }
        )
    return rows
