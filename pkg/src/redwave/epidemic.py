"""The k-flooding state machine.

Agents are white (non-informed), red (informed-active, with a countdown of
at most k remaining active steps) or black (informed-removed).  A time step
runs a transmission phase and a move phase in configurable order; agents
informed during step t enter the end-of-step snapshot as red(k) and start
transmitting at step t+1.

The engine stores the population in flat numpy arrays for speed; the
:class:`Agent` dataclass is a per-index view for inspection and tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError
from .geometry import Region
from .mobility import (
    MobilityMode,
    RngStream,
    build_supercell_grid,
    cellular_walk_all,
    init_positions,
    walk_all,
)

WHITE, RED, BLACK = 0, 1, 2
_STATE_NAMES = {WHITE: "white", RED: "red", BLACK: "black"}


@dataclass(frozen=True)
class Agent:
    """Read-only view of one agent in a snapshot."""

    position: tuple[float, float]
    state: str  # "white" | "red" | "black"
    remaining: int  # red countdown; 0 unless red
    informed_at: int | None


@dataclass(frozen=True)
class SimParams:
    """The full experiment contract for a single run."""

    region: Region
    n: int
    R: float
    k: int = 1
    mobility: MobilityMode = MobilityMode.standard(0.0)
    phase_order: str = "transmit_then_move"  # or "move_then_transmit"
    transmission_scope: str = "euclidean"  # or "same_supercell"
    sources: object = "random"  # "random" or explicit sequence of points
    seed: int = 0
    max_steps: int = 10_000
    burn_in: int | None = None
    supercell_gamma: float = 0.5

    def __post_init__(self) -> None:
        if self.R <= 0:
            raise ConfigurationError("transmission radius R must be positive")
        if self.n < 1:
            raise ConfigurationError("need at least one agent")
        if self.k < 1:
            raise ConfigurationError("k must be a positive integer")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be at least 1")
        if self.phase_order not in ("transmit_then_move", "move_then_transmit"):
            raise ConfigurationError(f"unknown phase order {self.phase_order!r}")
        if self.transmission_scope not in ("euclidean", "same_supercell"):
            raise ConfigurationError(
                f"unknown transmission scope {self.transmission_scope!r}"
            )
        if self.transmission_scope == "same_supercell" and self.mobility.kind != "cellular":
            raise ConfigurationError("same_supercell scope requires cellular mobility")


@dataclass
class Snapshot:
    """All agent positions and states at the end of a step."""

    step: int
    positions: np.ndarray  # (n, 2) float
    states: np.ndarray  # (n,) int8: 0 white, 1 red, 2 black
    countdown: np.ndarray  # (n,) int32: remaining active steps of red agents
    informed_at: np.ndarray  # (n,) int64, -1 if never informed
    informer: np.ndarray  # (n,) int64 index of informing agent, -1 for sources
    chain_origin: np.ndarray  # (n, 2): start position of the informing chain's source

    @property
    def n(self) -> int:
        return len(self.states)

    def counts(self) -> tuple[int, int, int]:
        """(white, red, black) agent counts."""
        return (
            int(np.count_nonzero(self.states == WHITE)),
            int(np.count_nonzero(self.states == RED)),
            int(np.count_nonzero(self.states == BLACK)),
        )

    def agent(self, i: int) -> Agent:
        informed = int(self.informed_at[i])
        return Agent(
            position=(float(self.positions[i, 0]), float(self.positions[i, 1])),
            state=_STATE_NAMES[int(self.states[i])],
            remaining=int(self.countdown[i]),
            informed_at=None if informed < 0 else informed,
        )

    @property
    def agents(self) -> list[Agent]:
        return [self.agent(i) for i in range(self.n)]

    def copy(self) -> "Snapshot":
        return Snapshot(
            self.step,
            self.positions.copy(),
            self.states.copy(),
            self.countdown.copy(),
            self.informed_at.copy(),
            self.informer.copy(),
            self.chain_origin.copy(),
        )


@dataclass
class StepSeries:
    """Per-step instrumentation carried by a RunRecord."""

    white: list[int] = field(default_factory=list)
    red: list[int] = field(default_factory=list)
    black: list[int] = field(default_factory=list)


@dataclass
class RunRecord:
    """Outcome of one run: exactly one of completion / failure / exhaustion."""

    params: SimParams
    completion_time: int | None = None
    failed_at: int | None = None
    exhausted: bool = False
    series: StepSeries = field(default_factory=StepSeries)
    final: Snapshot | None = None
    snapshots: list[Snapshot] | None = None
    source_indices: tuple[int, ...] = ()
    chain_violations: int = 0
    ecc_sources: float | None = None  # filled by multi-source experiments

    @property
    def completed(self) -> bool:
        return self.completion_time is not None

    def steps_run(self) -> int:
        if self.completion_time is not None:
            return self.completion_time
        if self.failed_at is not None:
            return self.failed_at
        return self.params.max_steps


# ---------------------------------------------------------------------------
# transmission kernel
# ---------------------------------------------------------------------------


def _inform_euclidean(
    positions: np.ndarray, states: np.ndarray, R: float
) -> tuple[np.ndarray, np.ndarray]:
    """Whites within closed distance R of a red, plus their nearest informer.

    Uniform spatial hash with bucket side R: only the 3x3 bucket block around
    a white agent can hold reds within range, so the per-phase cost is
    O(n + pairs examined).
    """
    red_idx = np.flatnonzero(states == RED)
    white_idx = np.flatnonzero(states == WHITE)
    if red_idx.size == 0 or white_idx.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)

    buckets = np.floor(positions / R).astype(np.int64)
    red_buckets: dict[tuple[int, int], list[int]] = {}
    for i in red_idx:
        red_buckets.setdefault((buckets[i, 0], buckets[i, 1]), []).append(int(i))
    red_arrays = {k: np.asarray(v, dtype=np.int64) for k, v in red_buckets.items()}

    wb = buckets[white_idx]
    keys = wb[:, 0] * (1 << 32) + wb[:, 1]
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    starts = np.flatnonzero(np.r_[True, sk[1:] != sk[:-1]])
    bounds = np.r_[starts, len(sk)]

    informed: list[np.ndarray] = []
    informers: list[np.ndarray] = []
    r2 = R * R
    for a, b in zip(bounds[:-1], bounds[1:]):
        grp = white_idx[order[a:b]]
        bc, br = int(wb[order[a], 0]), int(wb[order[a], 1])
        cand_parts = [
            red_arrays[(bc + dc, br + dr)]
            for dc in (-1, 0, 1)
            for dr in (-1, 0, 1)
            if (bc + dc, br + dr) in red_arrays
        ]
        if not cand_parts:
            continue
        cand = np.concatenate(cand_parts)
        diff = positions[grp, None, :] - positions[None, cand, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        within = d2 <= r2 * (1 + 1e-12)
        hit = within.any(axis=1)
        if not hit.any():
            continue
        # nearest red as the recorded informer (deterministic)
        d2 = np.where(within, d2, np.inf)
        informed.append(grp[hit])
        informers.append(cand[np.argmin(d2[hit], axis=1)])
    if not informed:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(informed), np.concatenate(informers)


def _inform_same_supercell(
    positions: np.ndarray, states: np.ndarray, sgrid
) -> tuple[np.ndarray, np.ndarray]:
    """Whites sharing a supercell with a red, with the nearest such red."""
    red_idx = np.flatnonzero(states == RED)
    white_idx = np.flatnonzero(states == WHITE)
    if red_idx.size == 0 or white_idx.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    cells = sgrid.cells_of(positions)
    keys = cells[:, 0] * (1 << 32) + cells[:, 1]
    red_cells: dict[int, list[int]] = {}
    for i in red_idx:
        red_cells.setdefault(int(keys[i]), []).append(int(i))

    informed: list[int] = []
    informers: list[int] = []
    for w in white_idx:
        reds = red_cells.get(int(keys[w]))
        if reds is None:
            continue
        r = np.asarray(reds)
        diff = positions[r] - positions[w]
        d2 = np.einsum("ij,ij->i", diff, diff)
        informed.append(int(w))
        informers.append(int(r[np.argmin(d2)]))
    return np.asarray(informed, dtype=np.int64), np.asarray(informers, dtype=np.int64)


# ---------------------------------------------------------------------------
# phases and stepping
# ---------------------------------------------------------------------------


class Engine:
    """Sequential, deterministic single-run engine."""

    def __init__(self, params: SimParams, initial_positions: np.ndarray | None = None):
        self.params = params
        self.region = params.region
        self.gen = RngStream(params.seed).generator()
        self.sgrid = None
        if params.mobility.kind == "cellular":
            self.sgrid = build_supercell_grid(
                self.region, params.mobility.rho, gamma=params.supercell_gamma
            )
        if initial_positions is not None:
            pos = np.array(initial_positions, dtype=float)
            if pos.shape != (params.n, 2):
                raise ConfigurationError("initial positions must have shape (n, 2)")
            if not np.all(self.region.contains(pos)):
                raise ConfigurationError("initial positions must lie inside the region")
        else:
            pos = init_positions(
                params.n,
                self.region,
                params.mobility,
                self.gen,
                burn_in=params.burn_in,
                sgrid=self.sgrid,
            )
        n = params.n
        self.snapshot = Snapshot(
            step=0,
            positions=pos,
            states=np.full(n, WHITE, dtype=np.int8),
            countdown=np.zeros(n, dtype=np.int32),
            informed_at=np.full(n, -1, dtype=np.int64),
            informer=np.full(n, -1, dtype=np.int64),
            chain_origin=pos.copy(),
        )
        self.source_indices = self._pick_sources()
        s = self.snapshot
        s.states[list(self.source_indices)] = RED
        s.countdown[list(self.source_indices)] = params.k
        s.informed_at[list(self.source_indices)] = 0
        self.chain_violations = 0

    def _pick_sources(self) -> tuple[int, ...]:
        params = self.params
        if isinstance(params.sources, str):
            if params.sources != "random":
                raise ConfigurationError(f"unknown source spec {params.sources!r}")
            return (int(self.gen.integers(params.n)),)
        pts = np.atleast_2d(np.asarray(params.sources, dtype=float))
        if pts.size == 0:
            raise ConfigurationError("explicit source set is empty")
        if not np.all(self.region.contains(pts, tol=1e-9)):
            raise ConfigurationError("source points must lie inside the region")
        # sources materialize as the nearest agents to the requested points
        chosen: list[int] = []
        pos = self.snapshot.positions
        for p in pts:
            d = np.hypot(pos[:, 0] - p[0], pos[:, 1] - p[1])
            order = np.argsort(d, kind="stable")
            pick = next(int(i) for i in order if int(i) not in chosen)
            chosen.append(pick)
        return tuple(chosen)

    def _transmission(self, t: int) -> None:
        s = self.snapshot
        params = self.params
        if params.transmission_scope == "same_supercell":
            newly, informers = _inform_same_supercell(s.positions, s.states, self.sgrid)
        else:
            newly, informers = _inform_euclidean(s.positions, s.states, params.R)
        # countdown of agents red at phase start; expired reds turn black
        was_red = s.states == RED
        s.countdown[was_red] -= 1
        s.states[was_red & (s.countdown == 0)] = BLACK
        if newly.size:
            s.states[newly] = RED
            s.countdown[newly] = params.k
            s.informed_at[newly] = t
            s.informer[newly] = informers
            s.chain_origin[newly] = s.chain_origin[informers]
            # maximum information speed: per step, one move plus one
            # transmission hop.  Euclidean scope: R + rho.  Supercell scope:
            # a move spans at most the 3x3 supercell block (2 sqrt(2) rho)
            # and a hop at most the supercell diagonal (sqrt(2) rho).
            d = np.hypot(
                s.positions[newly, 0] - s.chain_origin[newly, 0],
                s.positions[newly, 1] - s.chain_origin[newly, 1],
            )
            if params.transmission_scope == "same_supercell":
                speed = 3 * math.sqrt(2) * params.mobility.rho
            else:
                speed = params.R + params.mobility.rho
            limit = t * speed
            self.chain_violations += int(np.count_nonzero(d > limit * (1 + 1e-9)))

    def _move(self) -> None:
        s = self.snapshot
        if self.params.mobility.kind == "cellular":
            s.positions = cellular_walk_all(s.positions, self.sgrid, self.region, self.gen)
        elif self.params.mobility.rho > 0:
            s.positions = walk_all(
                s.positions, self.params.mobility.rho, self.region, self.gen
            )

    def step(self) -> Snapshot:
        """Advance one time step and return the end-of-step snapshot."""
        t = self.snapshot.step + 1
        if self.params.phase_order == "transmit_then_move":
            self._transmission(t)
            self._move()
        else:
            self._move()
            self._transmission(t)
        self.snapshot.step = t
        return self.snapshot


def transmission_phase(snapshot: Snapshot, params: SimParams, grid=None) -> Snapshot:
    """Standalone transmission phase on a snapshot copy (for tests/audits)."""
    eng = Engine.__new__(Engine)
    eng.params = params
    eng.region = params.region
    eng.sgrid = grid
    eng.chain_violations = 0
    eng.snapshot = snapshot.copy()
    eng._transmission(snapshot.step + 1)
    eng.snapshot.step = snapshot.step + 1
    return eng.snapshot


def move_phase(snapshot: Snapshot, params: SimParams, rng) -> Snapshot:
    """Standalone move phase: every agent steps independently, states unchanged."""
    from .mobility import as_generator

    out = snapshot.copy()
    gen = as_generator(rng)
    if params.mobility.kind == "cellular":
        sgrid = build_supercell_grid(
            params.region, params.mobility.rho, gamma=params.supercell_gamma
        )
        out.positions = cellular_walk_all(out.positions, sgrid, params.region, gen)
    elif params.mobility.rho > 0:
        out.positions = walk_all(out.positions, params.mobility.rho, params.region, gen)
    return out


def run(
    params: SimParams,
    initial_positions: np.ndarray | None = None,
    record_snapshots: bool = False,
) -> RunRecord:
    """Run the process to completion, failure, or max_steps exhaustion."""
    eng = Engine(params, initial_positions=initial_positions)
    rec = RunRecord(params=params, source_indices=eng.source_indices)
    if record_snapshots:
        rec.snapshots = [eng.snapshot.copy()]
    w, r, b = eng.snapshot.counts()
    rec.series.white.append(w)
    rec.series.red.append(r)
    rec.series.black.append(b)
    for _ in range(params.max_steps):
        snap = eng.step()
        w, r, b = snap.counts()
        rec.series.white.append(w)
        rec.series.red.append(r)
        rec.series.black.append(b)
        if record_snapshots:
            rec.snapshots.append(snap.copy())
        if r == 0:
            if w == 0:
                rec.completion_time = snap.step
            else:
                rec.failed_at = snap.step
            break
    else:
        rec.exhausted = True
    rec.final = eng.snapshot.copy()
    rec.chain_violations = eng.chain_violations
    return rec
