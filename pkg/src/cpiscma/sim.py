"""Seeded Monte Carlo Eb/N0 sweeps and CSV reports.

Randomness is derived per work chunk: chunk ``c`` of SNR point ``i`` draws
from ``SeedSequence(seed, spawn_key=(i, c))`` in the order bits, gains,
noise. Chunks have a fixed size and are reduced in chunk order, so results
do not depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .analysis import PatternStats
from .channel import COHERENCE_MODES, draw_gains, noise_variance, superimpose_signals
from .codebook import Codebook, build_factor_graph, load_codebook
from .index_map import IndexLut, build_lut, load_lut
from .mpa import N0_FLOOR, zero_prior
from .mpad import MpadDetector, MpadParams
from .transmitter import LABELINGS, NORMALIZE_MODES, BlockCodec, normalize_policy, render_slots

log = logging.getLogger(__name__)

SYSTEMS = ("cpi-scma", "c-scma")
PRIORS = ("uniform", "occupancy")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    system: str = "cpi-scma"
    J: int = 6
    K: int = 4
    M: int = 4
    n: int = 4
    t: int = 2
    codebook: str | None = None  # None: bundled 6x4x4 codebook
    lut: str | None = None
    iters: int = 6
    normalization: str = "block-energy"
    coherence: str = "chip"
    prior: str = "uniform"
    labeling: str = "natural"
    pml_cap: int = 100_000
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    max_frames: int = 1_000_000
    min_bit_errors: int = 400
    chunk_frames: int = 2000
    seed: int = 0
    noiseless: bool = False  # test hook: no noise added, detector uses the N0 floor
    identity_gains: bool = False  # test hook: every gain is 1

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        if self.system not in SYSTEMS:
            raise ConfigError(f"system must be one of {SYSTEMS}")
        if self.system == "c-scma" and (self.n, self.t) != (1, 1):
            object.__setattr__(self, "n", 1)
            object.__setattr__(self, "t", 1)
        if not 1 <= self.t <= self.n:
            raise ConfigError(f"need 1 <= t <= n, got n={self.n}, t={self.t}")
        if not self.snr_db:
            raise ConfigError("SNR grid is empty")
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise ConfigError("SNR grid must be strictly increasing")
        for name, value, allowed in (
            ("normalization", self.normalization, NORMALIZE_MODES),
            ("coherence", self.coherence, COHERENCE_MODES),
            ("prior", self.prior, PRIORS),
            ("labeling", self.labeling, LABELINGS),
        ):
            if value not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {value!r}")
        for name in ("iters", "pml_cap", "max_frames", "min_bit_errors", "chunk_frames"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("codebook", "lut"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"{name} file {path!r} does not exist")

    @property
    def scale(self) -> float:
        return normalize_policy(self.normalization, self.n, self.t)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["snr_db"] = list(self.snr_db)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config field(s) {sorted(unknown)}")
        return cls(**doc)


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    base = path.parent
    for key in ("codebook", "lut"):
        if doc.get(key) is not None and not Path(doc[key]).is_absolute():
            doc[key] = str(base / doc[key])
    return SimConfig.from_dict(doc)


@dataclass
class System:
    """Resolved objects needed to simulate one configuration."""

    config: SimConfig
    cb: Codebook
    lut: IndexLut
    codec: BlockCodec
    detector: MpadDetector

    @property
    def bits_per_user(self) -> int:
        return self.codec.m

    @property
    def block_energy(self) -> float:
        return self.config.scale**2 * self.lut.t

    def noise_var(self, ebn0_db: float) -> float:
        return noise_variance(ebn0_db, self.bits_per_user, self.block_energy)


@lru_cache(maxsize=8)
def build_system(config: SimConfig) -> System:
    cb = load_codebook(config.codebook)
    if (cb.J, cb.K, cb.M) != (config.J, config.K, config.M):
        raise ConfigError(f"codebook is {cb.J}x{cb.K}x{cb.M}, config asks for {config.J}x{config.K}x{config.M}")
    lut = load_lut(config.lut, config.n, config.t) if config.lut else build_lut(config.n, config.t)
    cpi = config.system == "cpi-scma"
    prior = zero_prior(cb.M, config.n, config.t) if cpi and config.prior == "occupancy" else None
    params = MpadParams(
        scale=config.scale,
        iters=config.iters,
        augment_zero=cpi,
        prior=prior,
        pml_cap=config.pml_cap,
        labeling=config.labeling,
    )
    det = MpadDetector(cb, lut, params, build_factor_graph(cb))
    return System(config, cb, lut, BlockCodec(lut, cb.M, config.labeling), det)


@dataclass
class ChunkResult:
    frames: int = 0
    bit_errors: int = 0
    index_bit_errors: int = 0
    symbol_bit_errors: int = 0
    block_errors: int = 0
    fallbacks: int = 0
    stats: PatternStats | None = None

    def merge(self, other: "ChunkResult") -> "ChunkResult":
        return ChunkResult(
            frames=self.frames + other.frames,
            bit_errors=self.bit_errors + other.bit_errors,
            index_bit_errors=self.index_bit_errors + other.index_bit_errors,
            symbol_bit_errors=self.symbol_bit_errors + other.symbol_bit_errors,
            block_errors=self.block_errors + other.block_errors,
            fallbacks=self.fallbacks + other.fallbacks,
            stats=other.stats if self.stats is None else self.stats.merge(other.stats),
        )


def chunk_rng(seed: int, snr_index: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(snr_index, chunk_index)))


def transmit(system: System, rng: np.random.Generator, frames: int, N0: float):
    """Draw bits and channel, return (bits, gains, received chips)."""
    cfg, cb, lut = system.config, system.cb, system.lut
    bits = rng.integers(0, 2, size=(frames, cb.J, system.codec.m))
    slots = system.codec.encode(bits)
    signals = np.stack(
        [render_slots(slots[:, j], cb, j, cfg.scale).reshape(frames, -1) for j in range(cb.J)], axis=1
    )
    if cfg.identity_gains:
        gains = np.ones((frames, cb.J, lut.n * cb.K), dtype=complex)
    else:
        gains = draw_gains(rng, (frames, cb.J), lut.n, cb.K, cfg.coherence)
    y = superimpose_signals(signals, gains, 0.0 if cfg.noiseless else N0, rng)
    return bits, gains, y


def simulate_chunk(config: SimConfig, snr_index: int, chunk_index: int, frames: int) -> ChunkResult:
    system = build_system(config)
    rng = chunk_rng(config.seed, snr_index, chunk_index)
    N0 = system.noise_var(config.snr_db[snr_index])
    bits, gains, y = transmit(system, rng, frames, N0)
    _, bits_hat, diag = system.detector.detect(y, gains, N0_FLOOR if config.noiseless else N0)
    wrong = bits_hat != bits
    m1 = system.lut.m1
    return ChunkResult(
        frames=frames,
        bit_errors=int(wrong.sum()),
        index_bit_errors=int(wrong[..., :m1].sum()),
        symbol_bit_errors=int(wrong[..., m1:].sum()),
        block_errors=int(np.any(wrong, axis=-1).sum()),
        fallbacks=int(diag.fallback.sum()),
        stats=PatternStats.from_diagnostics(diag, system.lut.n),
    )


@dataclass
class SnrPoint:
    snr_db: float
    frames: int
    bits: int
    bit_errors: int
    index_bit_errors: int
    symbol_bit_errors: int
    block_errors: int
    blocks: int
    delta: list
    reliable_ratio: float
    extra_complexity: float
    fallbacks: int = 0
    seconds: float = 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def bler(self) -> float:
        return self.block_errors / self.blocks if self.blocks else 0.0


@dataclass
class SweepReport:
    config: SimConfig
    points: list = field(default_factory=list)

    @property
    def ber(self) -> list[float]:
        return [p.ber for p in self.points]


def _stop(acc: ChunkResult, config: SimConfig) -> bool:
    return acc.frames >= config.max_frames or acc.bit_errors >= config.min_bit_errors


def run_point(config: SimConfig, snr_index: int, pool: ProcessPoolExecutor | None, workers: int) -> SnrPoint:
    system = build_system(config)
    start = time.perf_counter()
    acc = ChunkResult()
    chunk = 0
    while not _stop(acc, config):
        # speculative wave of chunks; results are reduced strictly in order
        wave = []
        planned = acc.frames
        for _ in range(max(workers, 1)):
            size = min(config.chunk_frames, config.max_frames - planned)
            if size <= 0:
                break
            wave.append((chunk, size))
            chunk += 1
            planned += size
        if pool is None:
            results = (simulate_chunk(config, snr_index, c, s) for c, s in wave)
        else:
            results = pool.map(simulate_chunk, *zip(*[(config, snr_index, c, s) for c, s in wave]))
        for res in results:
            acc = acc.merge(res)
            if _stop(acc, config):
                break
    stats = acc.stats
    point = SnrPoint(
        snr_db=config.snr_db[snr_index],
        frames=acc.frames,
        bits=acc.frames * config.J * system.bits_per_user,
        bit_errors=acc.bit_errors,
        index_bit_errors=acc.index_bit_errors,
        symbol_bit_errors=acc.symbol_bit_errors,
        block_errors=acc.block_errors,
        blocks=acc.frames * config.J,
        delta=stats.delta,
        reliable_ratio=stats.reliable_ratio,
        extra_complexity=stats.extra_complexity,
        fallbacks=acc.fallbacks,
        seconds=time.perf_counter() - start,
    )
    log.info("%s %.1f dB: %d frames, BER %.3e", config.system, point.snr_db, point.frames, point.ber)
    return point


def run_sweep(config: SimConfig, workers: int = 1) -> SweepReport:
    build_system(config)  # validate files before spawning workers
    report = SweepReport(config=config)
    if workers <= 1:
        for i in range(len(config.snr_db)):
            report.points.append(run_point(config, i, None, 1))
        return report
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for i in range(len(config.snr_db)):
            report.points.append(run_point(config, i, pool, workers))
    return report


def csv_header(n: int) -> list[str]:
    return (
        ["snr_db", "frames", "bits", "bit_errors", "ber", "bler"]
        + [f"delta_case{g}" for g in range(n + 1)]
        + ["reliable_ratio", "extra_complexity", "seconds"]
    )


def emit_report(report: SweepReport, path, timing: bool = True) -> Path:
    """Write the CSV report plus a ``.json`` sidecar with config and extra counters.

    ``timing=False`` writes 0 in the seconds column so reruns are byte-identical.
    """
    path = Path(path)
    n = report.config.n
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(csv_header(n))
            for p in report.points:
                writer.writerow(
                    [repr(p.snr_db), p.frames, p.bits, p.bit_errors, repr(p.ber), repr(p.bler)]
                    + [repr(d) for d in p.delta]
                    + [repr(p.reliable_ratio), repr(p.extra_complexity), repr(p.seconds if timing else 0.0)]
                )
        sidecar = {
            "config": report.config.to_dict(),
            "points": [
                {
                    "snr_db": p.snr_db,
                    "index_bit_errors": p.index_bit_errors,
                    "symbol_bit_errors": p.symbol_bit_errors,
                    "block_errors": p.block_errors,
                    "blocks": p.blocks,
                    "fallbacks": p.fallbacks,
                }
                for p in report.points
            ],
        }
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc}") from exc
    return path


def load_report(path) -> SweepReport:
    """Rebuild a SweepReport from a CSV written by :func:`emit_report` and its sidecar."""
    path = Path(path)
    side = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    cfg_doc = side["config"]
    try:
        config = SimConfig.from_dict(cfg_doc)
    except ConfigError:
        # referenced files may have moved since the run; keep the numbers
        config = SimConfig.from_dict({**cfg_doc, "codebook": None, "lut": None})
    extras = {e["snr_db"]: e for e in side["points"]}
    report = SweepReport(config=config)
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            snr = float(row["snr_db"])
            extra = extras[snr]
            ncases = sum(1 for k in row if k.startswith("delta_case"))
            report.points.append(
                SnrPoint(
                    snr_db=snr,
                    frames=int(row["frames"]),
                    bits=int(row["bits"]),
                    bit_errors=int(row["bit_errors"]),
                    index_bit_errors=extra["index_bit_errors"],
                    symbol_bit_errors=extra["symbol_bit_errors"],
                    block_errors=extra["block_errors"],
                    blocks=extra["blocks"],
                    delta=[float(row[f"delta_case{g}"]) for g in range(ncases)],
                    reliable_ratio=float(row["reliable_ratio"]),
                    extra_complexity=float(row["extra_complexity"]),
                    fallbacks=extra["fallbacks"],
                    seconds=float(row["seconds"]),
                )
            )
    return report


def compare_reports(a: SweepReport, b: SweepReport, ignore_timing: bool = True) -> list[str]:
    """Differences between two reports' points, empty when they agree."""
    diffs = []
    if len(a.points) != len(b.points):
        return [f"point count {len(a.points)} != {len(b.points)}"]
    for pa, pb in zip(a.points, b.points):
        da, db = dataclasses.asdict(pa), dataclasses.asdict(pb)
        for key in da:
            if ignore_timing and key == "seconds":
                continue
            if da[key] != db[key]:
                diffs.append(f"{pa.snr_db} dB {key}: {da[key]!r} != {db[key]!r}")
    return diffs
