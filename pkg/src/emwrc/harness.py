"""Experiment configuration, runners and CSV output.

Users are 0-based internally and 1-based in every emitted record.
Randomness is counter keyed: a block of rounds draws from a generator keyed
by (cell seed, stage, trial, block), so results never depend on how blocks
or trials are spread over worker processes.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import analytics, channel, fountain, oracle
from .channel import ErasureProfile
from .errors import ConfigError, RoundLimitExceeded
from .gf2 import BinaryRow
from .separation import separate
from .strategy import Scheme, apply_schedule, build_matrix, next_schedule

CSV_HEADER = ["scheme", "n_users", "eps_u", "eps_d", "reconstruct", "shuffle",
              "metric", "src", "dst", "value", "stderr"]

CHANNEL_STAGE = 0xC4A7
SOURCE_STAGE = 0x50C5
BLOCK_ROUNDS = 2048      # rounds per channel block in simulate
OVERHEAD_BLOCK = 256     # rounds per channel block in overhead runs
ORACLE_TOL = 1e-9


# ---------------------------------------------------------------- config

@dataclass
class ExperimentConfig:
    schemes: list[Scheme] = field(default_factory=lambda: [Scheme.MPWR])
    users: list[int] = field(default_factory=lambda: [4])
    eps_up: list[float] = field(default_factory=lambda: [0.1])
    eps_down: list[float] = field(default_factory=lambda: [0.1])
    reconstruct: bool = False
    shuffle: bool = False
    rounds: int = 10_000
    trials: int = 10
    packets: int = 1000
    seed: int | None = None
    output: str | None = None
    workers: int = 1
    exact: bool = False
    simulate: bool = False   # sweep only: add Monte Carlo cells
    round_cap: int | None = None

    def validate(self, need_seed: bool = False) -> "ExperimentConfig":
        if not self.schemes:
            raise ConfigError("field 'scheme': no scheme selected")
        for n in self.users:
            if n < 2:
                raise ConfigError(f"field 'users': need at least 2 users, got {n}")
        for name in ("eps_up", "eps_down"):
            vals = getattr(self, name)
            if not vals:
                raise ConfigError(f"field '{name}': empty")
            for v in vals:
                if not 0.0 <= v <= 1.0:
                    raise ConfigError(f"field '{name}': probability {v} outside [0, 1]")
        for name in ("rounds", "trials", "packets", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"field '{name}': must be at least 1")
        if need_seed and self.seed is None:
            raise ConfigError("field 'seed': a seed is required for simulation")
        return self

    def profile(self, n: int) -> ErasureProfile:
        """Profile for ``n`` users: one value means symmetric, N values mean per-user."""
        return ErasureProfile(_expand(self.eps_up, n, "eps_up"), _expand(self.eps_down, n, "eps_down"))


def _expand(vals: Sequence[float], n: int, name: str) -> list[float]:
    if len(vals) == 1:
        return [vals[0]] * n
    if len(vals) == n:
        return list(vals)
    raise ConfigError(f"field '{name}': {len(vals)} values for {n} users (give one value or one per user)")


def parse_users(text) -> list[int]:
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(v) for v in text]
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ConfigError(f"field 'users': empty range {text}")
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"field 'users': cannot parse {text!r} (use N or A..B)") from None


def parse_probs(text, name: str) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",")]
    except ValueError:
        raise ConfigError(f"field '{name}': cannot parse {text!r}") from None


def parse_schemes(text) -> list[Scheme]:
    if isinstance(text, list):
        return [Scheme.parse(t) for t in text]
    if str(text).lower() == "all":
        return list(Scheme)
    try:
        return [Scheme.parse(t) for t in str(text).split(",")]
    except ValueError as exc:
        raise ConfigError(f"field 'scheme': {exc}") from None


def load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


_FIELD_ALIASES = {"scheme": "schemes", "eps-up": "eps_up", "eps-down": "eps_down",
                  "round-cap": "round_cap"}


def config_from_mapping(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    known = {f for f in asdict(cfg)}
    out = {}
    for key, val in values.items():
        name = _FIELD_ALIASES.get(key, key.replace("-", "_"))
        if name not in known:
            raise ConfigError(f"field '{key}': unknown setting")
        if val is None:
            continue
        try:
            if name == "schemes":
                val = parse_schemes(val)
            elif name == "users":
                val = parse_users(val)
            elif name in ("eps_up", "eps_down"):
                val = parse_probs(val, name)
            elif name in ("reconstruct", "shuffle", "exact", "simulate"):
                if not isinstance(val, bool):
                    raise ConfigError(f"field '{key}': expected true/false, got {val!r}")
            elif name in ("rounds", "trials", "packets", "seed", "workers", "round_cap"):
                if isinstance(val, bool) or int(val) != val:
                    raise ConfigError(f"field '{key}': expected an integer, got {val!r}")
                val = int(val)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"field '{key}': {exc}") from None
        out[name] = val
    return replace(cfg, **out)


# ---------------------------------------------------------------- records

@dataclass(frozen=True)
class ResultRecord:
    scheme: str
    n_users: int
    eps_u: str
    eps_d: str
    reconstruct: bool
    shuffle: bool
    metric: str
    value: float
    src: int | None = None
    dst: int | None = None
    stderr: float | None = None

    def row(self) -> list[str]:
        return [self.scheme, str(self.n_users), self.eps_u, self.eps_d,
                _flag(self.reconstruct), _flag(self.shuffle), self.metric,
                "" if self.src is None else str(self.src),
                "" if self.dst is None else str(self.dst),
                fmt_float(self.value),
                "" if self.stderr is None else fmt_float(self.stderr)]


def _flag(b: bool) -> str:
    return "1" if b else "0"


def fmt_float(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return "%.9g" % v


def fmt_probs(vals: Sequence[float]) -> str:
    """Symmetric profiles print one value, asymmetric ones join per-user values with ';'."""
    if len(set(vals)) == 1:
        return fmt_float(vals[0])
    return ";".join(fmt_float(v) for v in vals)


@dataclass(frozen=True)
class Cell:
    scheme: Scheme
    profile: ErasureProfile
    reconstruct: bool
    shuffle: bool

    @property
    def n_users(self) -> int:
        return self.profile.n_users

    def record(self, metric: str, value: float, src=None, dst=None, stderr=None) -> ResultRecord:
        return ResultRecord(self.scheme.value, self.n_users, fmt_probs(self.profile.eps_up),
                            fmt_probs(self.profile.eps_down), self.reconstruct, self.shuffle,
                            metric, float(value), src, dst, stderr)


def write_csv(records: Iterable[ResultRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())


def records_to_csv(records: Iterable[ResultRecord]) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


def cell_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1, dtype=np.uint64)[0])


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *key])))


def _pool_map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def cells_for(cfg: ExperimentConfig) -> list[Cell]:
    cells = []
    for scheme, n in itertools.product(cfg.schemes, cfg.users):
        cells.append(Cell(scheme, cfg.profile(n), cfg.reconstruct, cfg.shuffle and scheme.pairwise))
    return cells


# ---------------------------------------------------------------- analyze

def analyze_cell(cell: Cell, exact: bool = False) -> list[ResultRecord]:
    scheme, profile, n = cell.scheme, cell.profile, cell.n_users
    recon = cell.reconstruct and scheme.pairwise
    if exact:
        mat = oracle.exact_eeer(scheme, profile, recon)
    else:
        mat = analytics.eeer(scheme, profile, recon)
    out = [cell.record("eeer", v, src=i + 1, dst=j + 1) for i, j, v in mat.pairs()]
    out += [cell.record("eeer_max", mat.max), cell.record("eeer_avg", mat.avg),
            cell.record("eeer_min", mat.min)]
    if recon:
        table = (oracle.exact_equivalent_uplink if exact else analytics.equivalent_uplink)(scheme, profile)
        for name in ("before", "within", "pc_before", "pc_within"):
            vals = getattr(table, name)
            for i in range(n):
                if not np.isnan(vals[i]):
                    out.append(cell.record(f"equiv_{name}", vals[i], src=i + 1))
    # shuffled rounds see the average pairwise EEER on every link
    eps_f = mat.avg if cell.shuffle else mat.max
    out.append(cell.record("normalized_rate", analytics.normalized_rate(scheme, eps_f, n)))
    out.append(cell.record("overhead_prediction", analytics.overhead_prediction(eps_f)
                           if eps_f < 1 else math.inf))
    out.append(cell.record("rate_upper_bound", analytics.rate_upper_bound(profile)))
    return out


def cmd_analyze(cfg: ExperimentConfig) -> list[ResultRecord]:
    cfg.validate()
    out = []
    for cell in cells_for(cfg):
        out += analyze_cell(cell, cfg.exact)
    return out


# ---------------------------------------------------------------- oracle check

@dataclass
class OracleReport:
    lines: list[str]
    records: list[ResultRecord]
    adopted_max_dev: float

    @property
    def ok(self) -> bool:
        return self.adopted_max_dev <= ORACLE_TOL


def cmd_oracle_check(cfg: ExperimentConfig) -> OracleReport:
    cfg.validate()
    lines, records = [], []
    worst = 0.0
    for cell in cells_for(cfg):
        scheme, profile = cell.scheme, cell.profile
        exact = oracle.exact_eeer(scheme, profile, False)
        tag = f"{scheme.value} N={cell.n_users} eps_u={fmt_probs(profile.eps_up)} eps_d={fmt_probs(profile.eps_down)}"
        variants = analytics.VARIANTS if scheme.pairwise else ("corrected",)
        for variant in variants:
            mat = analytics.eeer(scheme, profile, False, variant)
            dev = float(np.abs(mat.eps - exact.eps).max())
            if variant == "corrected":
                worst = max(worst, dev)
            lines.append(f"{tag} variant={variant} max|dev|={dev:.3e}")
            records.append(cell.record(f"oracle_dev_{variant}", dev))
        if cell.reconstruct and scheme.pairwise:
            ex_r = oracle.exact_eeer(scheme, profile, True)
            an_r = analytics.eeer(scheme, profile, True)
            dev = float(np.abs(an_r.eps - ex_r.eps).max())
            t_ex = oracle.exact_equivalent_uplink(scheme, profile)
            t_an = analytics.equivalent_uplink(scheme, profile)
            dev_u = float(np.nanmax(np.abs(np.concatenate([t_an.before - t_ex.before,
                                                           t_an.within - t_ex.within]))))
            lines.append(f"{tag} reconstruct eeer max|dev|={dev:.3e} equivalent-uplink max|dev|={dev_u:.3e} (reported only)")
            records.append(cell.record("oracle_dev_reconstruct", dev))
            records.append(cell.record("oracle_dev_equiv_uplink", dev_u))
    lines.append(f"adopted variant (corrected) worst deviation {worst:.3e}; tolerance {ORACLE_TOL:g}")
    return OracleReport(lines, records, worst)


# ---------------------------------------------------------------- round pipeline

class RoundEngine:
    """One relay round given survival and downlink masks, with memoized separation.

    Which packets a user resolves depends only on the coefficient pattern, so
    every distinct pattern is separated once with real payloads and checked.
    """

    def __init__(self, n_users: int, reconstruct: bool):
        self.n = n_users
        self.reconstruct = reconstruct
        self._relay: dict = {}
        self._sep: dict = {}
        self._probe = [1 << i for i in range(n_users)]

    def relay(self, A, x, survived) -> channel.ReceivedMatrix:
        up = channel.uplink_from_survivals(A, x, survived)
        return channel.relay_reconstruct(up, A) if self.reconstruct else channel.relay_forward(up)

    def _relay_coeffs(self, A, survived) -> tuple[int, ...]:
        key = (A.rows, survived)
        hit = self._relay.get(key)
        if hit is None:
            hit = self.relay(A, self._probe, survived).coefficient_rows()
            self._relay[key] = hit
        return hit

    def unresolved(self, A, survived: tuple[int, ...], kept: Sequence[int]) -> list[int]:
        """Per destination, bitset of other users' packets left unresolved."""
        coeffs = self._relay_coeffs(A, survived)
        out = []
        for j, m in enumerate(kept):
            rows = tuple(c if (m >> l) & 1 else 0 for l, c in enumerate(coeffs))
            key = (j, rows)
            lost = self._sep.get(key)
            if lost is None:
                lost = self._separate_probe(j, rows)
                self._sep[key] = lost
            out.append(lost)
        return out

    def _separate_probe(self, j: int, rows: tuple[int, ...]) -> int:
        n = self.n
        x = self._probe
        brs = []
        for c in rows:
            if c == 0:
                brs.append(BinaryRow.erased(n))
                continue
            p = 0
            for i in range(n):
                if (c >> i) & 1:
                    p ^= x[i]
            brs.append(BinaryRow(c, p, n))
        res = separate(channel.ReceivedMatrix(tuple(brs), channel.Origin.USER, j), j, x[j])
        lost = 0
        for i, v in enumerate(res.values):
            if v is None:
                lost |= 1 << i
            elif v != x[i]:
                raise RuntimeError(f"separation at user {j} returned a wrong symbol for user {i}")
        return lost & ~(1 << j)

    def deliver(self, A, x, survived, kept) -> list[list[int | None]]:
        """Full pipeline with real payloads: values[j][i] as resolved at user j."""
        relay = self.relay(A, x, survived)
        out = []
        for j, rx in enumerate(channel.downlink_from_masks(relay, kept)):
            out.append(list(separate(rx, j, x[j]).values))
        return out


def _masks(alive: np.ndarray) -> np.ndarray:
    """Boolean (..., K) -> integer bitsets over the last axis."""
    weights = 1 << np.arange(alive.shape[-1], dtype=np.int64)
    return (alive.astype(np.int64) * weights).sum(axis=-1)


def channel_block(rng: np.random.Generator, A_slots: int, profile: ErasureProfile, size: int):
    """Survival masks (size, L) and downlink keep masks (size, N) for a block of rounds."""
    n = profile.n_users
    up = rng.random((size, A_slots, n)) >= np.asarray(profile.eps_up)[None, None, :]
    down = rng.random((size, n, A_slots)) >= np.asarray(profile.eps_down)[None, :, None]
    return _masks(up), _masks(down)


def _round_matrix(base, seed: int, r: int, shuffle: bool):
    if not shuffle:
        return base
    return apply_schedule(base, next_schedule(seed, r, base.n_users, True))


# ---------------------------------------------------------------- simulate

def _simulate_block(job) -> np.ndarray:
    cell, seed, start, size = job
    base = build_matrix(cell.scheme, cell.n_users)
    n = cell.n_users
    engine = RoundEngine(n, cell.reconstruct and cell.scheme.pairwise)
    rng = _rng(seed, CHANNEL_STAGE, 0, start // BLOCK_ROUNDS)
    surv, kept = channel_block(rng, base.n_slots, cell.profile, size)
    counts = np.zeros((n, n), dtype=np.int64)
    for b in range(size):
        A = _round_matrix(base, seed, start + b, cell.shuffle)
        lost = engine.unresolved(A, tuple(int(v) for v in surv[b]), [int(v) for v in kept[b]])
        for j, m in enumerate(lost):
            while m:
                low = m & -m
                counts[low.bit_length() - 1, j] += 1
                m ^= low
    return counts


def simulate_cell(cell: Cell, seed: int, rounds: int, workers: int = 1) -> list[ResultRecord]:
    jobs = [(cell, seed, s, min(BLOCK_ROUNDS, rounds - s)) for s in range(0, rounds, BLOCK_ROUNDS)]
    counts = sum(_pool_map(_simulate_block, jobs, workers))
    n = cell.n_users
    rates = counts / rounds
    out = []
    off = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            p = rates[i, j]
            off.append(p)
            out.append(cell.record("eeer_sim", p, src=i + 1, dst=j + 1,
                                   stderr=math.sqrt(p * (1 - p) / rounds)))
    hi, lo = max(off), min(off)
    out.append(cell.record("eeer_sim_max", hi, stderr=math.sqrt(hi * (1 - hi) / rounds)))
    out.append(cell.record("eeer_sim_min", lo, stderr=math.sqrt(lo * (1 - lo) / rounds)))
    avg = float(np.mean(off))
    out.append(cell.record("eeer_sim_avg", avg, stderr=math.sqrt(avg * (1 - avg) / (rounds * len(off)))))
    return out


def cmd_simulate(cfg: ExperimentConfig) -> list[ResultRecord]:
    cfg.validate(need_seed=True)
    out = []
    for idx, cell in enumerate(cells_for(cfg)):
        out += simulate_cell(cell, cell_seed(cfg.seed, idx), cfg.rounds, cfg.workers)
    return out


# ---------------------------------------------------------------- overhead

@dataclass(frozen=True)
class OverheadTrial:
    rounds: int            # rounds until every user decoded every other user
    k_prime: np.ndarray    # (src, dst) rounds until that stream decoded
    overhead: float        # max over streams of (K' - K) / K


def run_overhead_trial(cell: Cell, seed: int, trial: int, K: int,
                       dist: fountain.DegreeDistribution | None = None,
                       round_cap: int | None = None) -> OverheadTrial:
    n = cell.n_users
    dist = dist or fountain.default_distribution()
    cap = round_cap if round_cap is not None else 10 * K
    base = build_matrix(cell.scheme, n)
    engine = RoundEngine(n, cell.reconstruct and cell.scheme.pairwise)
    src_rng = _rng(seed, SOURCE_STAGE, trial)
    sources = [[int(v) for v in src_rng.integers(0, 2 ** 32, K)] for _ in range(n)]
    enc_seed = cell_seed(seed, trial)
    decoders = [[fountain.IncrementalDecoder(K) if i != j else None for i in range(n)] for j in range(n)]
    k_prime = np.zeros((n, n), dtype=np.int64)
    pending = n * (n - 1)
    r = 0
    while pending:
        block = r // OVERHEAD_BLOCK
        surv, kept = channel_block(_rng(seed, CHANNEL_STAGE, trial, block), base.n_slots,
                                   cell.profile, OVERHEAD_BLOCK)
        for b in range(OVERHEAD_BLOCK):
            if r >= cap:
                raise RoundLimitExceeded(f"{cell.scheme.value} N={n}: decoding unfinished after {cap} rounds")
            packets = [fountain.encode_next(i, r, K, sources[i], enc_seed, dist) for i in range(n)]
            A = _round_matrix(base, seed, r, cell.shuffle)
            x = [p.payload for p in packets]
            values = engine.deliver(A, x, tuple(int(v) for v in surv[b]), [int(v) for v in kept[b]])
            r += 1
            for j in range(n):
                for i in range(n):
                    dec = decoders[j][i]
                    if dec is None or dec.done or values[j][i] is None:
                        continue
                    dec.add(packets[i].combination, values[j][i])
                    if dec.done:
                        k_prime[i, j] = r
                        pending -= 1
                        if dec.solve() != sources[i]:
                            raise RuntimeError(f"user {j} decoded user {i}'s packets incorrectly")
            if not pending:
                break
    off = k_prime[~np.eye(n, dtype=bool)]
    return OverheadTrial(r, k_prime, fountain.measure_overhead(off, K))


def _overhead_job(job) -> OverheadTrial:
    cell, seed, trial, K, cap = job
    return run_overhead_trial(cell, seed, trial, K, round_cap=cap)


def overhead_cell(cell: Cell, seed: int, trials: int, K: int, workers: int = 1,
                  round_cap: int | None = None) -> list[ResultRecord]:
    jobs = [(cell, seed, t, K, round_cap) for t in range(trials)]
    results = _pool_map(_overhead_job, jobs, workers)
    L = cell.scheme.slots(cell.n_users)
    ov = np.array([t.overhead for t in results])
    norm = ov / L
    spp = np.array([t.rounds * L / K for t in results])
    out = []
    for t, v in enumerate(norm):
        out.append(cell.record(f"trial{t + 1}.overhead_norm", v))

    def se(a):
        return float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else math.nan

    out.append(cell.record("overhead", ov.mean(), stderr=se(ov)))
    out.append(cell.record("overhead_norm", norm.mean(), stderr=se(norm)))
    out.append(cell.record("slots_per_packet", spp.mean(), stderr=se(spp)))
    recon = cell.reconstruct and cell.scheme.pairwise
    mat = analytics.eeer(cell.scheme, cell.profile, recon)
    eps_f = mat.avg if cell.shuffle else mat.max
    pred = analytics.overhead_prediction(eps_f)
    out.append(cell.record("overhead_prediction", pred))
    out.append(cell.record("slots_per_packet_prediction", L / (1.0 - eps_f)))
    return out


def cmd_overhead(cfg: ExperimentConfig) -> list[ResultRecord]:
    cfg.validate(need_seed=True)
    out = []
    for idx, cell in enumerate(cells_for(cfg)):
        out += overhead_cell(cell, cell_seed(cfg.seed, idx), cfg.trials, cfg.packets,
                             cfg.workers, cfg.round_cap)
    return out


# ---------------------------------------------------------------- sweep

def sweep_cells(cfg: ExperimentConfig) -> list[Cell]:
    """Cartesian product; eps lists act as grids of symmetric values here."""
    cells = []
    for scheme, n, eu, ed in itertools.product(cfg.schemes, cfg.users, cfg.eps_up, cfg.eps_down):
        cells.append(Cell(scheme, ErasureProfile.symmetric(n, eu, ed), cfg.reconstruct,
                          cfg.shuffle and scheme.pairwise))
    return cells


def _sweep_job(job) -> list[ResultRecord]:
    cell, exact, sim, seed, rounds = job
    try:
        out = analyze_cell(cell, exact)
        if sim:
            out += simulate_cell(cell, seed, rounds)
        return out
    except Exception as exc:  # a failed cell is flagged and the sweep goes on
        return [cell.record(f"error:{type(exc).__name__}", math.nan)]


def cmd_sweep(cfg: ExperimentConfig) -> list[ResultRecord]:
    cfg.validate(need_seed=cfg.simulate)
    cells = sweep_cells(cfg)
    jobs = [(c, cfg.exact, cfg.simulate, cell_seed(cfg.seed, i) if cfg.simulate else 0, cfg.rounds)
            for i, c in enumerate(cells)]
    out: list[ResultRecord] = []
    for recs in _pool_map(_sweep_job, jobs, cfg.workers):
        out += recs
    return out


def iter_records(records: Iterable[ResultRecord], metric: str) -> Iterator[ResultRecord]:
    return (r for r in records if r.metric == metric)
