"""Analog Monte Carlo for transport with path-length dependent cross sections.

Each history is emitted with s = 0, flies a free path drawn from q(Omega, .),
collides, and either scatters (s resets to 0, new direction from P) with
probability c or is absorbed. Histories are advanced together in vectorized
chunks; chunk and batch boundaries never change a history's random numbers.
"""
from __future__ import annotations
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from nct.config import settings
from nct.scattering.phase import PhaseFunction, rotate_directions
from nct.stats.models import CrossSectionModel
from nct.stats.pathlength import sample_free_paths
from nct.transport.rng import HistoryStreams
from nct.transport.source import Source, isotropic_directions
from nct.transport.tallies import ChunkTally, TallyGrid
from nct.utils.errors import ConfigError, ModelError
from nct.utils.grid import SpatialGrid

log = logging.getLogger(__name__)

BOUNDARIES = ("periodic", "vacuum")


@dataclass(frozen=True)
class RunConfig:
    model: CrossSectionModel
    phase: PhaseFunction
    c: float
    source: Source
    grid: SpatialGrid
    histories: int
    seed: int = 0
    boundary: str = "periodic"
    batches: int = 20
    n_mu: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        errors = []
        if not 0.0 <= self.c < 1.0:
            errors.append(("c", f"scattering probability must lie in [0, 1), got {self.c!r}"))
        if self.boundary not in BOUNDARIES:
            errors.append(("mc.boundary", f"must be one of {BOUNDARIES}"))
        if self.batches < settings.min_batches:
            errors.append(("mc.batches", f"at least {settings.min_batches} batches are required"))
        if self.histories < self.batches:
            errors.append(("mc.histories", "need at least one history per batch"))
        if self.n_mu < 0:
            errors.append(("mc.n_mu", "must be >= 0"))
        if self.threads < 1:
            errors.append(("threads", "must be >= 1"))
        lo, hi = self.source.bounds()
        if not (self.grid.contains(np.array(lo)) and self.grid.contains(np.array(hi))):
            errors.append(("source", f"{self.source.kind} source reaches outside the tally box "
                                     f"{list(self.grid.lower)} .. {list(self.grid.upper)}"))
        if errors:
            raise ConfigError(errors)


@dataclass
class _Flight:
    """Vectorized particle states of one chunk: position, cell, direction."""

    pos: np.ndarray
    ijk: np.ndarray
    dirs: np.ndarray

    def keep(self, mask: np.ndarray) -> None:
        self.pos, self.ijk, self.dirs = self.pos[mask], self.ijk[mask], self.dirs[mask]


def _stream(cfg: RunConfig, flight: _Flight, length: np.ndarray, tally: ChunkTally) -> np.ndarray:
    """Move particles ``length`` along their directions, scoring track length per cell.

    Returns the mask of particles that left a vacuum-bounded box.
    """
    grid = cfg.grid
    lower, h = np.array(grid.lower), grid.spacing
    shape = np.array(grid.shape)
    periodic = cfg.boundary == "periodic"
    remaining = length.copy()
    escaped = np.zeros(length.size, dtype=bool)
    mu_bin = None
    if tally.n_mu:
        mu_bin = np.clip(((flight.dirs[:, 2] + 1.0) * 0.5 * tally.n_mu).astype(np.int64), 0, tally.n_mu - 1)
    active = np.flatnonzero(remaining > 0.0)
    while active.size:
        p, d, ijk = flight.pos[active], flight.dirs[active], flight.ijk[active]
        face = lower + (ijk + (d > 0.0)) * h
        with np.errstate(divide="ignore", invalid="ignore"):
            t_face = np.where(d != 0.0, (face - p) / d, np.inf)
        t_face = np.maximum(t_face, 0.0)
        axis = np.argmin(t_face, axis=1)
        t = t_face[np.arange(active.size), axis]
        step = np.minimum(t, remaining[active])

        flat = grid.flat_index(ijk)
        tally.track += np.bincount(flat, weights=step, minlength=tally.n_cells)
        if mu_bin is not None:
            cells = flat * tally.n_mu + mu_bin[active]
            tally.psi_track += np.bincount(cells, weights=step, minlength=tally.psi_track.size).reshape(
                tally.psi_track.shape
            )

        flight.pos[active] = p + d * step[:, None]
        remaining[active] -= step
        crossing = remaining[active] > 0.0
        idx, ax = active[crossing], axis[crossing]
        sign = np.where(flight.dirs[idx, ax] > 0.0, 1, -1)
        flight.ijk[idx, ax] += sign
        out_lo = flight.ijk[idx, ax] < 0
        out_hi = flight.ijk[idx, ax] >= shape[ax]
        out = out_lo | out_hi
        if periodic:
            extent = grid.extent[ax]
            flight.ijk[idx[out_lo], ax[out_lo]] = shape[ax[out_lo]] - 1
            flight.pos[idx[out_lo], ax[out_lo]] += extent[out_lo]
            flight.ijk[idx[out_hi], ax[out_hi]] = 0
            flight.pos[idx[out_hi], ax[out_hi]] -= extent[out_hi]
        else:
            escaped[idx[out]] = True
            remaining[idx[out]] = 0.0
        active = active[remaining[active] > 0.0]
    return escaped


def _simulate(cfg: RunConfig, histories: np.ndarray) -> ChunkTally:
    grid = cfg.grid
    tally = ChunkTally(grid.n_cells, cfg.n_mu, histories=int(histories.size))
    streams = HistoryStreams(cfg.seed, histories)
    u = streams.draws(5)
    pos = cfg.source.sample_positions(u[:3])
    flight = _Flight(pos, grid.locate(pos), isotropic_directions(u[3], u[4]))
    tally.emitted = int(histories.size)

    while len(streams):
        u_path, u_react, u_mu, u_phi = streams.draws(4)
        s = sample_free_paths(cfg.model, flight.dirs, u_path, strict=False)
        overflow = ~np.isfinite(s)
        if overflow.any() and cfg.boundary == "periodic":
            raise ModelError(
                f"free path beyond the optical-depth extrapolation budget in a periodic medium "
                f"(history {int(streams.histories[np.argmax(overflow)])})"
            )
        escaped = _stream(cfg, flight, s, tally)
        tally.leaked += int(escaped.sum())

        collided = ~escaped
        tally.collisions += np.bincount(grid.flat_index(flight.ijk[collided]), minlength=grid.n_cells)
        scatter = collided & (u_react < cfg.c)
        tally.absorbed += int((collided & ~scatter).sum())
        tally.scatters += int(scatter.sum())

        mu0 = cfg.phase.sample_cosine(u_mu)
        flight.dirs = np.where(scatter[:, None], rotate_directions(flight.dirs, mu0, 2.0 * np.pi * u_phi),
                               flight.dirs)
        flight.keep(scatter)
        streams.compress(scatter)
    return tally


def run_history(cfg: RunConfig, history: int) -> ChunkTally:
    """Raw scores of a single history, drawn from its own counter-based stream."""
    return _simulate(cfg, np.array([history], dtype=np.int64))


def _run_batch(cfg: RunConfig, ids: np.ndarray) -> ChunkTally:
    total = ChunkTally(cfg.grid.n_cells, cfg.n_mu)
    for start in range(0, ids.size, settings.mc_chunk_size):
        total.merge(_simulate(cfg, ids[start:start + settings.mc_chunk_size]))
    return total


def run_simulation(cfg: RunConfig, threads: Optional[int] = None) -> TallyGrid:
    """All histories in fixed batches; batches run on a thread pool and merge in order."""
    threads = threads or cfg.threads
    batches = np.array_split(np.arange(cfg.histories, dtype=np.int64), cfg.batches)
    log.info("mc: %d histories in %d batches (%s boundary, %d threads)",
             cfg.histories, cfg.batches, cfg.boundary, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda ids: _run_batch(cfg, ids), batches))
    for b, r in enumerate(results):
        log.debug("batch %d: %d histories, %d collisions, %d leaked", b, r.histories,
                  r.total_collisions, r.leaked)
    tallies = TallyGrid(cfg.grid, cfg.source.rate, cfg.n_mu, results)
    bal = tallies.balance()
    log.info("mc done: %d collisions, %d absorbed, %d leaked", bal["collisions"], bal["absorbed"],
             bal["leaked"])
    return tallies
