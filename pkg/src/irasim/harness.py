"""Experiment orchestration: seeded Monte Carlo sweeps over load grids,
packet-loss estimates with confidence intervals, and the analytic floor on
the same grid.

Determinism contract: a sweep with a given config and seed produces a
byte-identical result file regardless of worker count. Batch ``b`` of load
point ``i`` draws from ``SeedSequence(entropy=point_seed, spawn_key=(b,))``
where ``point_seed = SeedSequence(entropy=config.seed, spawn_key=(i,))``
folded to 64 bits, and batch results are reduced strictly in batch order.
"""

from __future__ import annotations

import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errorfloor import CollisionPattern, FloorParams, floor_params, plr_floor
from .model import DegreeDistribution, ModelError, SystemConfig, validate_config
from .receiver import run_sic_kernel
from .traffic import generate_trace

#: Virtual frames of usable span per Monte Carlo batch; the window-length
#: margins added on both sides keep the edge exclusion under a few percent.
BATCH_VF_COUNT = 200

#: Hard floor on simulated users before the lost-event early stop may fire.
MIN_USERS_FOR_EARLY_STOP = 100_000


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig
    distribution: DegreeDistribution
    load_grid: tuple[float, ...]
    min_users_per_point: int = 100_000
    max_lost_events: int = 1_000
    seed: int = 1
    outputs: str = "results/run"

    def __post_init__(self) -> None:
        object.__setattr__(self, "load_grid", tuple(float(g) for g in self.load_grid))
        if not self.load_grid:
            raise ConfigError("load grid is empty")
        if any(g <= 0 for g in self.load_grid):
            raise ConfigError("loads must be strictly positive")
        if list(self.load_grid) != sorted(self.load_grid):
            raise ConfigError("load grid must be sorted ascending")
        if self.min_users_per_point < 10_000:
            raise ConfigError("min_users_per_point must be at least 10000")
        if self.max_lost_events < 1:
            raise ConfigError("max_lost_events must be positive")
        validate_config(self.system, self.distribution)


@dataclass(frozen=True)
class PlrRow:
    load: float
    users: int
    lost: int
    plr_sim: float
    ci_lo: float
    ci_hi: float
    plr_analytic: float


@dataclass(frozen=True)
class PlrCurve:
    rows: tuple[PlrRow, ...]
    params: FloorParams
    analytic_only: bool = False

    CSV_HEADER = "load,users,lost,plr,ci_lo,ci_hi,plr_floor"

    def to_csv(self, stream) -> None:
        stream.write(
            f"# phi={self.params.phi:.6f} n_v={self.params.n_v} n_p={self.params.n_p:g}\n"
        )
        stream.write(self.CSV_HEADER + "\n")
        for r in self.rows:
            if self.analytic_only:
                stream.write(f"{r.load:g},,,,,,{r.plr_analytic:.6e}\n")
            else:
                stream.write(
                    f"{r.load:g},{r.users},{r.lost},{r.plr_sim:.6e},"
                    f"{r.ci_lo:.6e},{r.ci_hi:.6e},{r.plr_analytic:.6e}\n"
                )

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            self.to_csv(fh)


def wilson_interval(lost: int, total: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a loss proportion; robust near zero counts."""
    if total <= 0:
        raise ValueError("interval needs at least one trial")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    phat = lost / total
    z2n = z * z / total
    denom = 1.0 + z2n
    centre = (phat + z2n / 2.0) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / total + z2n / (4.0 * total)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def point_seed(master_seed: int, point_index: int) -> int:
    """Derive the 64-bit seed of one load point from the master seed."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(point_index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class BatchResult:
    batch_index: int
    users: int
    lost: int
    n_trace_users: int
    outcome_rows: tuple[tuple[int, int, str, float], ...] = ()


def _simulate_batch(
    system: SystemConfig,
    dist: DegreeDistribution,
    load: float,
    seed: int,
    batch_index: int,
    collect_outcomes: bool = False,
) -> BatchResult:
    """One independent trace: generate, run the receiver, count interior users.

    Only users whose virtual frame lies fully inside the window-length margins
    are counted, so window warm-up at the trace edges cannot bias the loss
    rate. Edge users still act as interference.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(batch_index,)))
    margin = system.window_length
    horizon = BATCH_VF_COUNT * system.vf_duration + 2.0 * margin
    trace = generate_trace(system, dist, load, horizon, rng)
    decoded, decided_w, _ = run_sic_kernel(trace, system)
    interior = (trace.arrival >= margin) & (trace.arrival + system.vf_duration <= horizon - margin)
    users = int(interior.sum())
    lost = int((interior & ~decoded).sum())
    rows: tuple = ()
    if collect_outcomes:
        rows = tuple(
            (
                int(u),
                int(trace.degree[u]),
                "decoded" if decoded[u] else "lost",
                float(decided_w[u]),
            )
            for u in np.nonzero(interior)[0]
        )
    return BatchResult(
        batch_index=batch_index,
        users=users,
        lost=lost,
        n_trace_users=trace.n_users,
        outcome_rows=rows,
    )


def run_point(
    cfg: ExperimentConfig,
    load: float,
    seed: int,
    *,
    jobs: int = 1,
    outcome_sink=None,
) -> tuple[int, int]:
    """Monte Carlo estimate of one load point.

    Batches run until ``min_users_per_point`` users were counted, or until
    ``max_lost_events`` losses accumulated over at least 10^5 users. The
    result is deterministic in (config, seed) and independent of ``jobs``.
    """
    users = 0
    lost = 0
    id_offset = 0

    def stop() -> bool:
        return users >= cfg.min_users_per_point or (
            lost >= cfg.max_lost_events and users >= MIN_USERS_FOR_EARLY_STOP
        )

    def reduce(result: BatchResult) -> None:
        nonlocal users, lost, id_offset
        users += result.users
        lost += result.lost
        if outcome_sink is not None:
            for uid, deg, outcome, w in result.outcome_rows:
                outcome_sink.write(f"{id_offset + uid},{deg},{outcome},{w:.12g}\n")
        id_offset += result.n_trace_users

    collect = outcome_sink is not None
    if jobs <= 1:
        b = 0
        while not stop():
            reduce(_simulate_batch(cfg.system, cfg.distribution, load, seed, b, collect))
            b += 1
        return users, lost

    next_batch = 0
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        while not stop():
            wave = [
                pool.submit(
                    _simulate_batch, cfg.system, cfg.distribution, load, seed, next_batch + k, collect
                )
                for k in range(jobs)
            ]
            next_batch += jobs
            for fut in wave:  # reduce in submission order, drop the tail once done
                result = fut.result()
                if not stop():
                    reduce(result)
    return users, lost


def sweep(
    cfg: ExperimentConfig,
    *,
    jobs: int = 1,
    catalog: tuple[CollisionPattern, ...] | None = None,
) -> PlrCurve:
    """Simulate every grid load and attach the analytic floor prediction."""
    params = floor_params(cfg.system)
    rows = []
    for i, g in enumerate(cfg.load_grid):
        users, lost = run_point(cfg, g, point_seed(cfg.seed, i), jobs=jobs)
        plr = lost / users
        lo, hi = wilson_interval(lost, users, 0.95)
        analytic = plr_floor(g, cfg.system, cfg.distribution, catalog)
        rows.append(
            PlrRow(load=g, users=users, lost=lost, plr_sim=plr, ci_lo=lo, ci_hi=hi, plr_analytic=analytic)
        )
    return PlrCurve(rows=tuple(rows), params=params)


def predict(
    cfg: ExperimentConfig,
    catalog: tuple[CollisionPattern, ...] | None = None,
) -> PlrCurve:
    """Analytic floor only, one row per grid load."""
    params = floor_params(cfg.system)
    if params.phi == 0.0:
        print(
            "warning: one interferer can never kill a packet at this rate; "
            "the predicted floor is identically zero",
            file=sys.stderr,
        )
    rows = []
    for g in cfg.load_grid:
        analytic = plr_floor(g, cfg.system, cfg.distribution, catalog)
        rows.append(
            PlrRow(load=g, users=0, lost=0, plr_sim=math.nan, ci_lo=math.nan, ci_hi=math.nan, plr_analytic=analytic)
        )
    return PlrCurve(rows=tuple(rows), params=params, analytic_only=True)


# -- flat key/value config files ----------------------------------------------

_REQUIRED_KEYS = ("snr_db", "rate", "vf_span")

_CONFIG_KEYS = {
    "snr_db",
    "rate",
    "vf_span",
    "window_span",
    "window_step",
    "degree",
    "load_grid",
    "min_users_per_point",
    "max_lost_events",
    "seed",
    "outputs",
}


def parse_config_file(path) -> ExperimentConfig:
    """Read an experiment config.

    The format is one ``key = value`` pair per line, ``#`` starts a comment.
    ``degree`` lines repeat, one per distribution entry, as
    ``degree = <d> <probability>``; ``load_grid`` is a space-separated list.
    Unknown keys are rejected.
    """
    scalars: dict[str, str] = {}
    degree_pairs: list[tuple[int, float]] = []
    loads: list[float] = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                if key == "degree":
                    d_s, p_s = value.split()
                    degree_pairs.append((int(d_s), float(p_s)))
                elif key == "load_grid":
                    loads = [float(x) for x in value.replace(",", " ").split()]
                else:
                    scalars[key] = value
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {value!r}") from exc

    for key in _REQUIRED_KEYS:
        if key not in scalars:
            raise ConfigError(f"{path}: missing required key {key!r}")
    if not degree_pairs:
        raise ConfigError(f"{path}: at least one 'degree = <d> <prob>' line is required")

    try:
        system = SystemConfig.from_db(
            snr_db=float(scalars["snr_db"]),
            rate=float(scalars["rate"]),
            vf_span=float(scalars["vf_span"]),
            window_span=float(scalars.get("window_span", 3.0)),
            window_step=float(scalars.get("window_step", 0.1)),
        )
        dist = DegreeDistribution.from_pairs(degree_pairs)
        return ExperimentConfig(
            system=system,
            distribution=dist,
            load_grid=tuple(loads) if loads else (0.1,),
            min_users_per_point=int(scalars.get("min_users_per_point", 100_000)),
            max_lost_events=int(scalars.get("max_lost_events", 1_000)),
            seed=int(scalars.get("seed", 1)),
            outputs=scalars.get("outputs", "results/run"),
        )
    except ModelError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
