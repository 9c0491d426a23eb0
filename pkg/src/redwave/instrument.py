"""Runtime checkers for the analytical apparatus: cell/supercell state
classification, regularity predicates, density audits, wave-front distances,
and the supercell state-ladder constants.

Everything here is a pure function of a snapshot plus a grid, so audits can
run inline during a simulation or post-hoc on recorded snapshot series.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .epidemic import BLACK, RED, WHITE, Snapshot
from .errors import ConfigurationError
from .geometry import _ADJ8, CellGrid, CellIndex


class CellState(Enum):
    WHITE = "white"  # only white agents
    RED = "red"  # at least one red agent
    BLACK = "black"  # black agents only
    GREY = "grey"  # any other nonempty mixture
    EMPTY = "empty"  # no agents at all (artifact extension)


# Default calibration: the analysis treats these as unspecified positive
# constants; these defaults make the density audit pass at mean density 1
# and are overridable from configs.
DEFAULT_ETA1 = 0.5
DEFAULT_ETA2 = 2.0
DEFAULT_C0 = 1.0
DEFAULT_ALPHA = 1.0


@dataclass(frozen=True)
class StateConstants:
    """Constants of the supercell state ladder.

    ``a[h]``, ``b[h]``, ``c[h]`` (1-indexed via ``state_constants``) bound
    the red/white agent counts of intermediate state h.
    """

    eta1: float = DEFAULT_ETA1
    eta2: float = DEFAULT_ETA2
    c0: float = DEFAULT_C0
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self) -> None:
        if self.eta1 <= 0 or self.eta2 <= 0 or self.c0 <= 0 or self.alpha <= 0:
            raise ConfigurationError("state constants must be positive")


def state_constants(h: int, eta1: float, eta2: float) -> tuple[float, float, float]:
    """(a_h, b_h, c_h) for intermediate state h >= 1.

    a_h = eta1^h / (2 * 2160^(h-1) * 20^((h-1)(h-2)/2))
    b_h = 15 * 68^(h-1) * eta2^h
    c_h = eta1 / (2 * 20^(h-1))
    """
    if h < 1:
        raise ConfigurationError("state index h must be >= 1")
    a = eta1**h / (2.0 * 2160.0 ** (h - 1) * 20.0 ** ((h - 1) * (h - 2) / 2))
    b = 15.0 * 68.0 ** (h - 1) * eta2**h
    c = eta1 / (2.0 * 20.0 ** (h - 1))
    return a, b, c


def h_hat(R: float, rho: float, n, c0: float = DEFAULT_C0) -> int:
    """Number of the Red State: ceil(log base R^2 of (c0 (rho/R)^2 ln n)).

    Natural log throughout; requires R^2 > 1 and a positive log argument.
    """
    if R <= 1:
        raise ConfigurationError("h_hat requires R > 1")
    arg = c0 * (rho**2 / R**2) * math.log(n)
    if arg <= 0:
        raise ConfigurationError("h_hat log argument must be positive")
    value = math.log(arg) / math.log(R**2)
    ceil = math.ceil(value - 1e-12)
    return max(1, ceil)


# ---------------------------------------------------------------------------
# cell-level classification and regularity
# ---------------------------------------------------------------------------


def _presence_arrays(snapshot: Snapshot, grid: CellGrid):
    """(has_white, has_red, has_black) boolean arrays over the cover's index
    bounding box, plus the (col, row) offsets of index (0, 0)."""
    mask, c0, r0 = grid._mask
    cells = grid.cells_of(snapshot.positions)
    ci = cells[:, 0] - c0
    ri = cells[:, 1] - r0
    inside = (ci >= 0) & (ci < mask.shape[0]) & (ri >= 0) & (ri < mask.shape[1])
    if not inside.all():
        bad = cells[~inside][0]
        raise ConfigurationError(f"agent found in uncovered cell {(int(bad[0]), int(bad[1]))}")
    covered = mask[ci, ri]
    if not covered.all():
        bad = cells[~covered][0]
        raise ConfigurationError(f"agent found in uncovered cell {(int(bad[0]), int(bad[1]))}")
    out = []
    for state in (WHITE, RED, BLACK):
        has = np.zeros(mask.shape, dtype=bool)
        sel = snapshot.states == state
        has[ci[sel], ri[sel]] = True
        out.append(has)
    return out[0], out[1], out[2], c0, r0


def classify_cells(snapshot: Snapshot, grid: CellGrid) -> dict[CellIndex, CellState]:
    """Per covered cell: red if it holds a red agent, white if only whites,
    black if only blacks, grey for any other mixture, empty if agent-free."""
    has_w, has_r, has_b, c0, r0 = _presence_arrays(snapshot, grid)
    out: dict[CellIndex, CellState] = {}
    for c, r in grid.cover:
        ci, ri = c - c0, r - r0
        if has_r[ci, ri]:
            out[(c, r)] = CellState.RED
        elif has_w[ci, ri] and not has_b[ci, ri]:
            out[(c, r)] = CellState.WHITE
        elif has_b[ci, ri] and not has_w[ci, ri]:
            out[(c, r)] = CellState.BLACK
        elif has_b[ci, ri] or has_w[ci, ri]:
            out[(c, r)] = CellState.GREY
        else:
            out[(c, r)] = CellState.EMPTY
    return out


@dataclass
class RegularityReport:
    regular: bool
    violations: list[tuple[str, CellIndex]] = field(default_factory=list)
    empty_cells: list[CellIndex] = field(default_factory=list)


def is_regular(cellstates: dict[CellIndex, CellState], grid: CellGrid) -> RegularityReport:
    """Check the three regularity properties of a configuration.

    (a) no grey cell; (b) every white component is adjacent to a red cell;
    (c) no white cell is adjacent to a black cell.

    Empty cells are reported separately as density violations and are
    transparent to the adjacency checks: at desk scale a handful of cells
    are empty in nearly every step, so making them fatal would void the
    verdict everywhere.
    """
    violations: list[tuple[str, CellIndex]] = []
    empties = [c for c, s in cellstates.items() if s is CellState.EMPTY]

    for c, s in cellstates.items():
        if s is CellState.GREY:
            violations.append(("a", c))

    whites = {c for c, s in cellstates.items() if s is CellState.WHITE}
    blacks = {c for c, s in cellstates.items() if s is CellState.BLACK}
    reds = {c for c, s in cellstates.items() if s is CellState.RED}

    # (c): white 8-adjacent to black
    for c in sorted(whites):
        for dc, dr in _ADJ8:
            if (c[0] + dc, c[1] + dr) in blacks:
                violations.append(("c", c))
                break

    # (b): flood-fill white components, check adjacency to a red cell
    seen: set[CellIndex] = set()
    for start in sorted(whites):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        queue = deque([start])
        touches_red = False
        while queue:
            cur = queue.popleft()
            for dc, dr in _ADJ8:
                nb = (cur[0] + dc, cur[1] + dr)
                if nb in reds:
                    touches_red = True
                if nb in whites and nb not in seen:
                    seen.add(nb)
                    comp.append(nb)
                    queue.append(nb)
        if not touches_red and reds:
            violations.append(("b", comp[0]))
        elif not reds and not touches_red:
            # no red cell anywhere: property (b) is unsatisfiable
            violations.append(("b", comp[0]))

    return RegularityReport(regular=not violations, violations=violations, empty_cells=empties)


def red_close_cells(
    cellstates: dict[CellIndex, CellState], grid: CellGrid
) -> set[CellIndex]:
    """White cells 8-adjacent to at least one red cell."""
    reds = {c for c, s in cellstates.items() if s is CellState.RED}
    out: set[CellIndex] = set()
    for c, s in cellstates.items():
        if s is not CellState.WHITE:
            continue
        for dc, dr in _ADJ8:
            if (c[0] + dc, c[1] + dr) in reds:
                out.add(c)
                break
    return out


def rho_close(a: CellIndex, b: CellIndex, grid: CellGrid, rho: float) -> bool:
    """Whether the geometric centers of two cells are within distance rho."""
    ax, ay = grid.cell_center(a)
    bx, by = grid.cell_center(b)
    return math.hypot(ax - bx, ay - by) <= rho * (1 + 1e-12)


def _chessboard_distances(sources: np.ndarray, cover: np.ndarray) -> np.ndarray:
    """Multi-source BFS distances under 8-adjacency, on a masked index grid.

    Implemented as an iterative min-plus dilation (each sweep relaxes all 8
    neighbor shifts at once), which converges in at most the cover diameter
    sweeps and is equivalent to BFS because all edge weights are 1.
    """
    dist = np.full(cover.shape, np.inf)
    dist[sources & cover] = 0.0
    if not (sources & cover).any():
        return dist
    padded = np.full((cover.shape[0] + 2, cover.shape[1] + 2), np.inf)
    while True:
        padded[1:-1, 1:-1] = dist
        best = dist
        for dc in (-1, 0, 1):
            for dr in (-1, 0, 1):
                if dc == 0 and dr == 0:
                    continue
                shifted = padded[1 + dc : padded.shape[0] - 1 + dc, 1 + dr : padded.shape[1] - 1 + dr]
                best = np.minimum(best, shifted + 1.0)
        best = np.where(cover, best, np.inf)
        if np.array_equal(best, dist):
            return dist
        dist = best


def _mask_of(cells, grid: CellGrid) -> np.ndarray:
    mask, c0, r0 = grid._mask
    out = np.zeros(mask.shape, dtype=bool)
    for c, r in cells:
        out[c - c0, r - r0] = True
    return out


def _dist_dict(dist: np.ndarray, grid: CellGrid) -> dict[CellIndex, float]:
    _, c0, r0 = grid._mask
    return {(c, r): float(dist[c - c0, r - r0]) for c, r in grid.cover}


def wavefront_distances(
    cellstates: dict[CellIndex, CellState], grid: CellGrid
) -> dict[CellIndex, float]:
    """Cell-distance from every covered cell to the red cell set.

    Red cells map to 0; with no red cell everything maps to infinity.
    """
    mask, _, _ = grid._mask
    reds = _mask_of((c for c, s in cellstates.items() if s is CellState.RED), grid)
    return _dist_dict(_chessboard_distances(reds, mask), grid)


def distances_to_set(
    targets: set[CellIndex], grid: CellGrid
) -> dict[CellIndex, float]:
    """Cell-distance from every covered cell to an arbitrary target set."""
    mask, _, _ = grid._mask
    return _dist_dict(_chessboard_distances(_mask_of(targets, grid), mask), grid)


def density_check(
    snapshot: Snapshot, grid: CellGrid, eta1: float = DEFAULT_ETA1, eta2: float = DEFAULT_ETA2
) -> list[tuple[CellIndex, int]]:
    """Cells whose agent count falls outside [eta1*l^2, eta2*l^2]."""
    mask, c0, r0 = grid._mask
    cells = grid.cells_of(snapshot.positions)
    ci = cells[:, 0] - c0
    ri = cells[:, 1] - r0
    inside = (ci >= 0) & (ci < mask.shape[0]) & (ri >= 0) & (ri < mask.shape[1])
    tot = np.zeros(mask.shape, dtype=np.int64)
    np.add.at(tot, (ci[inside], ri[inside]), 1)
    lo = eta1 * grid.side**2
    hi = eta2 * grid.side**2
    out = []
    for c, r in sorted(grid.cover):
        k = int(tot[c - c0, r - r0])
        if k < lo or k > hi:
            out.append(((c, r), k))
    return out


# ---------------------------------------------------------------------------
# supercell-level classification (cellular random-walk analysis)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SupercellClassifier:
    """Binds (R, rho, n) and the state constants to the state ladder.

    States: 0 = White State, 1..h_hat-1 intermediate, h_hat = Red State,
    h_hat + 1 = Black State.  The last three states can overlap, so
    classification returns the set of all states whose conditions hold.
    """

    R: float
    rho: float
    n: int
    constants: StateConstants = StateConstants()

    @property
    def h_hat(self) -> int:
        return h_hat(self.R, self.rho, self.n, self.constants.c0)

    @property
    def red_threshold(self) -> float:
        return 90.0 * (self.rho**2 / self.R**2) * math.log(self.n)

    def classify(self, n_white: int, n_red: int, n_black: int) -> set[int]:
        hh = self.h_hat
        states: set[int] = set()
        if n_red == 0 and n_black == 0:
            states.add(0)
        for h in range(1, hh):
            a, b, c = state_constants(h, self.constants.eta1, self.constants.eta2)
            if a * self.R ** (2 * h) <= n_red <= b * self.R ** (2 * h) and n_white >= c * self.rho**2:
                states.add(h)
        if n_red >= self.red_threshold:
            states.add(hh)
        if n_white == 0:
            states.add(hh + 1)
        return states


def supercell_counts(
    snapshot: Snapshot, sgrid: CellGrid
) -> dict[CellIndex, tuple[int, int, int]]:
    """(white, red, black) agent counts per covered supercell."""
    mask, c0, r0 = sgrid._mask
    cells = sgrid.cells_of(snapshot.positions)
    ci = cells[:, 0] - c0
    ri = cells[:, 1] - r0
    if not ((ci >= 0) & (ci < mask.shape[0]) & (ri >= 0) & (ri < mask.shape[1])).all():
        raise ConfigurationError("agent found outside the supercell cover")
    tot = np.zeros((3,) + mask.shape, dtype=np.int64)
    np.add.at(tot, (snapshot.states, ci, ri), 1)
    return {
        (c, r): (
            int(tot[WHITE, c - c0, r - r0]),
            int(tot[RED, c - c0, r - r0]),
            int(tot[BLACK, c - c0, r - r0]),
        )
        for c, r in sgrid.cover
    }


def classify_supercells(
    snapshot: Snapshot, sgrid: CellGrid, classifier: SupercellClassifier
) -> dict[CellIndex, set[int]]:
    """State sets of every covered supercell; empty set = unclassifiable."""
    return {
        c: classifier.classify(w, r, b)
        for c, (w, r, b) in supercell_counts(snapshot, sgrid).items()
    }


@dataclass
class SupercellRegularityReport:
    regular: bool
    unclassifiable: list[CellIndex] = field(default_factory=list)
    black_neighbor_violations: list[tuple[CellIndex, CellIndex]] = field(default_factory=list)


def supercell_regularity(
    snapshot: Snapshot, sgrid: CellGrid, classifier: SupercellClassifier
) -> SupercellRegularityReport:
    """Condition 1: every supercell classifiable.  Condition 2: neighbors of
    a Black-State supercell are in the Red or Black State."""
    states = classify_supercells(snapshot, sgrid, classifier)
    hh = classifier.h_hat
    report = SupercellRegularityReport(regular=True)
    for c, st in sorted(states.items()):
        if not st:
            report.unclassifiable.append(c)
    for c, st in sorted(states.items()):
        if (hh + 1) not in st:
            continue
        for dc, dr in _ADJ8:
            nb = (c[0] + dc, c[1] + dr)
            nb_states = states.get(nb)
            if nb_states is None:
                continue
            if not (hh in nb_states or (hh + 1) in nb_states):
                report.black_neighbor_violations.append((c, nb))
    report.regular = not report.unclassifiable and not report.black_neighbor_violations
    return report


# ---------------------------------------------------------------------------
# state-ladder transition audit
# ---------------------------------------------------------------------------

_IMPLICATIONS = ("a", "b", "c", "d", "e")


@dataclass
class TransitionTally:
    agreements: int = 0
    violations: int = 0

    @property
    def observed(self) -> int:
        return self.agreements + self.violations

    def agreement_rate(self) -> float:
        return self.agreements / self.observed if self.observed else math.nan


@dataclass
class TransitionAudit:
    tallies: dict[str, TransitionTally]
    skipped_unclassifiable: int = 0
    skipped_irregular: int = 0


def _map_regular(states: dict[CellIndex, set[int]], sgrid: CellGrid, hh: int) -> bool:
    """Regularity of a classified map: every supercell classifiable, and the
    neighbors of a Black-State supercell all in the Red or Black State."""
    if any(not st for st in states.values()):
        return False
    for (c, r), st in states.items():
        if (hh + 1) not in st:
            continue
        for dc, dr in _ADJ8:
            nb = states.get((c + dc, r + dr))
            if nb is not None and hh not in nb and (hh + 1) not in nb:
                return False
    return True


def transition_audit(
    state_maps: list[dict[CellIndex, set[int]]],
    sgrid: CellGrid,
    hh: int,
    require_regular: bool = False,
) -> TransitionAudit:
    """Match observed supercell transitions against the state-ladder rules.

    The local evolution law is stated for regular configurations; with
    ``require_regular`` only pairs whose source map is regular are judged
    and irregular steps are counted in ``skipped_irregular``.  m^t(C) is
    the max state over N(C) (states overlap only at the top of the ladder,
    so the max is the natural representative; the same convention is used
    for the observed next state).  Pairs where C or any neighbor is
    unclassifiable are skipped and counted, not judged.

    Rules: (a) m=0 keeps C in state 0; (b) an intermediate m pushes C to
    m+1; (c) m = Red with C below Red makes C Red; (d) m = Red with C Red
    makes C Black; (e) m = Black keeps/makes C Black.
    """
    audit = TransitionAudit(tallies={k: TransitionTally() for k in _IMPLICATIONS})
    neighborhoods = {
        c: [
            (c[0] + dc, c[1] + dr)
            for dc, dr in [(0, 0)] + _ADJ8
            if (c[0] + dc, c[1] + dr) in sgrid.cover
        ]
        for c in sgrid.cover
    }
    for cur, nxt in zip(state_maps[:-1], state_maps[1:]):
        if require_regular and not _map_regular(cur, sgrid, hh):
            audit.skipped_irregular += len(neighborhoods)
            continue
        for c, nbs in neighborhoods.items():
            if any(not cur[nb] for nb in nbs) or not nxt[c]:
                audit.skipped_unclassifiable += 1
                continue
            m = max(max(cur[nb]) for nb in nbs)
            h_now = max(cur[c])
            h_next = nxt[c]
            if m == 0:
                key, expected = "a", 0
            elif 1 <= m <= hh - 1:
                key, expected = "b", m + 1
            elif m == hh and h_now < hh:
                key, expected = "c", hh
            elif m == hh and h_now >= hh:
                key, expected = "d", hh + 1
            else:  # m == hh + 1
                key, expected = "e", hh + 1
            if expected in h_next:
                audit.tallies[key].agreements += 1
            else:
                audit.tallies[key].violations += 1
    return audit


# ---------------------------------------------------------------------------
# wave-speed audits
# ---------------------------------------------------------------------------


@dataclass
class SpeedAudit:
    ok_pairs: int = 0
    violations: int = 0

    @property
    def total(self) -> int:
        return self.ok_pairs + self.violations

    def violation_rate(self) -> float:
        return self.violations / self.total if self.total else 0.0

    def merge(self, other: "SpeedAudit") -> "SpeedAudit":
        return SpeedAudit(self.ok_pairs + other.ok_pairs, self.violations + other.violations)


def wavefront_speed_audit(
    cellstate_maps: list[dict[CellIndex, CellState]],
    grid: CellGrid,
    min_decrease: int = 1,
    target: str = "red",
) -> SpeedAudit:
    """Per-step wave-front advance over (white cell, step) pairs.

    For every cell white at t+1 with a finite distance d_t to the target set
    (red cells, or red-close cells for the high-mobility audit), require
    d_{t+1} <= max(d_t - min_decrease, 0).
    """
    audit = SpeedAudit()
    mask, _, _ = grid._mask

    def target_mask(states: dict[CellIndex, CellState]) -> np.ndarray:
        if target == "red":
            return _mask_of((c for c, s in states.items() if s is CellState.RED), grid)
        if target == "red_close":
            return _mask_of(red_close_cells(states, grid), grid)
        raise ConfigurationError(f"unknown audit target {target!r}")

    dists = [_chessboard_distances(target_mask(m), mask) for m in cellstate_maps]
    whites = [
        _mask_of((c for c, s in m.items() if s is CellState.WHITE), grid)
        for m in cellstate_maps
    ]
    for cur_d, nxt_d, nxt_white in zip(dists[:-1], dists[1:], whites[1:]):
        sel = nxt_white & np.isfinite(cur_d)
        if not sel.any():
            continue
        bound = np.maximum(cur_d[sel] - min_decrease, 0)
        ok = nxt_d[sel] <= bound
        audit.ok_pairs += int(np.count_nonzero(ok))
        audit.violations += int(np.count_nonzero(~ok))
    return audit


def supercell_speed_audit(
    state_maps: list[dict[CellIndex, set[int]]],
    sgrid: CellGrid,
) -> SpeedAudit:
    """Supercell wave advance: distance from White-State supercells to the
    informed set (state >= 1) drops by at least 1 per step."""
    audit = SpeedAudit()

    def informed(states: dict[CellIndex, set[int]]) -> set[CellIndex]:
        return {c for c, st in states.items() if st and max(st) >= 1}

    for cur, nxt in zip(state_maps[:-1], state_maps[1:]):
        cur_d = distances_to_set(informed(cur), sgrid)
        nxt_d = distances_to_set(informed(nxt), sgrid)
        for c, st in nxt.items():
            if st != {0}:
                continue
            d_t = cur_d[c]
            if not math.isfinite(d_t) or d_t == 0:
                continue
            if nxt_d[c] <= d_t - 1:
                audit.ok_pairs += 1
            else:
                audit.violations += 1
    return audit


# ---------------------------------------------------------------------------
# appendix spread-lemma audits
# ---------------------------------------------------------------------------


@dataclass
class LemmaTally:
    """How often a lemma's hypothesis held, and its conclusion with it."""

    hypothesis_met: int = 0
    holds: int = 0

    def agreement_rate(self) -> float:
        return self.holds / self.hypothesis_met if self.hypothesis_met else math.nan


@dataclass
class SpreadAudit:
    pairs: int = 0
    white_spread: LemmaTally = field(default_factory=LemmaTally)
    red_spread: LemmaTally = field(default_factory=LemmaTally)
    red_saturation: LemmaTally = field(default_factory=LemmaTally)
    red_upper: LemmaTally = field(default_factory=LemmaTally)


def _supercell_of_cell(c: CellIndex, ratio: int) -> CellIndex:
    return (c[0] // ratio, c[1] // ratio)


def spread_audit(
    snapshots: list[Snapshot],
    sgrid: CellGrid,
    grid: CellGrid,
    R: float,
    constants: StateConstants = StateConstants(),
) -> SpreadAudit:
    """Audit the one-step agent-spread bounds behind the supercell ladder.

    The bounds speak about the configuration immediately after the move
    phase, before the transmission phase.  With the move-first phase order
    that mid-step configuration is reconstructed exactly from consecutive
    end-of-step snapshots: positions from step t+1, states from step t.

    Per (supercell, step) pair with the stated hypothesis:
      - white spread: #W(N(C), t) = lambda rho^2 with lambda >= 720/c0^2
        implies every cell of C holds >= (lambda/36) R^2 whites mid-step.
      - red spread: #R(C, t) = lambda R^2 with lambda >= 1800/c0^2 implies
        every C' in N(C) has >= min((lambda/30) R^2, rho^2/(2R^2)) red-hit
        cells mid-step.
      - red saturation: C in the Red State implies every cell of every
        C' in N(C) is hit by a red mid-step.
      - red upper bound: #R(C, t+1) <= 68 eta2 M R^2 where M is the max
        red count over N(C) at t (hypothesis always applicable).
    """
    rho = sgrid.side
    ratio = rho / grid.side
    if abs(ratio - round(ratio)) > 1e-9:
        raise ConfigurationError("supercell side must be a multiple of the cell side")
    ratio = int(round(ratio))
    if len(snapshots) < 2:
        raise ConfigurationError("spread audit needs at least two snapshots")
    n = snapshots[0].n
    classifier = SupercellClassifier(R=R, rho=rho, n=n, constants=constants)
    hh = classifier.h_hat
    lam_w_min = 720.0 / constants.c0**2
    lam_r_min = 1800.0 / constants.c0**2

    cover = sorted(sgrid.cover)
    nbhd = {
        C: [
            (C[0] + dc, C[1] + dr)
            for dc, dr in [(0, 0)] + _ADJ8
            if (C[0] + dc, C[1] + dr) in sgrid.cover
        ]
        for C in cover
    }
    cells_by_super: dict[CellIndex, list[CellIndex]] = {C: [] for C in cover}
    for c in grid.cover:
        sc = _supercell_of_cell(c, ratio)
        if sc in cells_by_super:
            cells_by_super[sc].append(c)

    audit = SpreadAudit()
    counts = [supercell_counts(s, sgrid) for s in snapshots]
    for t in range(len(snapshots) - 1):
        cur, nxt = snapshots[t], snapshots[t + 1]
        # mid-step configuration of step t+1: moved positions, pre-transmission states
        mid_cells = grid.cells_of(nxt.positions)
        white_per_cell: dict[CellIndex, int] = {}
        red_hit: set[CellIndex] = set()
        for (cc, rr), st in zip(mid_cells, cur.states):
            key = (int(cc), int(rr))
            if st == WHITE:
                white_per_cell[key] = white_per_cell.get(key, 0) + 1
            elif st == RED:
                red_hit.add(key)
        for C in cover:
            audit.pairs += 1
            w_n = sum(counts[t][Cp][0] for Cp in nbhd[C])
            lam_w = w_n / rho**2
            if lam_w >= lam_w_min:
                audit.white_spread.hypothesis_met += 1
                need = (lam_w / 36.0) * R**2
                if all(white_per_cell.get(c, 0) >= need for c in cells_by_super[C]):
                    audit.white_spread.holds += 1
            lam_r = counts[t][C][1] / R**2
            if lam_r >= lam_r_min:
                audit.red_spread.hypothesis_met += 1
                need = min((lam_r / 30.0) * R**2, rho**2 / (2.0 * R**2))
                if all(
                    sum(1 for c in cells_by_super[Cp] if c in red_hit) >= need
                    for Cp in nbhd[C]
                ):
                    audit.red_spread.holds += 1
            w, r, b = counts[t][C]
            if hh in classifier.classify(w, r, b):
                audit.red_saturation.hypothesis_met += 1
                if all(
                    all(c in red_hit for c in cells_by_super[Cp]) for Cp in nbhd[C]
                ):
                    audit.red_saturation.holds += 1
            m_red = max(counts[t][Cp][1] for Cp in nbhd[C])
            audit.red_upper.hypothesis_met += 1
            if counts[t + 1][C][1] <= 68.0 * constants.eta2 * max(m_red, 0) * R**2:
                audit.red_upper.holds += 1
    return audit
