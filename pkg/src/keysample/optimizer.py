"""Sliding-window keyframe optimizer.

Streams keyframes into a fixed-capacity window; whenever the window fills,
the feasible subsets of the (possibly neighbor-extended) window are
enumerated under pose-gap constraints, the objective is minimized over
them, the chosen keyframes are committed to the store, and the window
slides adaptively so discarded tail keyframes get re-evaluated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    Keyframe,
    KeyframeStore,
    KeyframeWindow,
    MIN_ARC_STEP,
    ValidationError,
    pose_distance,
)
from .terms import (
    ObjectiveParams,
    eigendecompose,
    numerical_jacobian,
    transform_descriptors,
)

# Hard cap on how many neighbors may enlarge a window beyond its capacity.
EXTENSION_CAP_EXTRA = 5


@dataclass(frozen=True)
class WindowConfig:
    """Window size, pose-gap limits and objective weights."""

    window_size: int = 10
    delta_lower: float = 1.0
    delta_upper: float = 5.0
    params: ObjectiveParams = field(default_factory=ObjectiveParams)

    def __post_init__(self):
        if self.window_size < 2:
            raise ValidationError("window size must be at least 2")
        if not (0 < self.delta_lower <= self.delta_upper):
            raise ValidationError("need 0 < delta_lower <= delta_upper")


@dataclass(frozen=True)
class SubsetSelection:
    """Chosen indices into the (extended) window plus their objective value.

    `relaxed` marks selections produced by the fallback that drops the
    pose-gap constraints when no feasible subset exists.
    """

    indices: tuple[int, ...]
    objective_value: float
    relaxed: bool = False


@dataclass
class OptimizerState:
    """Everything the streaming optimizer carries between frames."""

    store: KeyframeStore
    window: KeyframeWindow
    deferred: list[Keyframe] = field(default_factory=list)
    step: int = 0
    last_id: int = -1
    selections: list[SubsetSelection] = field(default_factory=list)
    cycle_times: list[float] = field(default_factory=list)


def new_state(config: WindowConfig) -> OptimizerState:
    return OptimizerState(
        store=KeyframeStore(), window=KeyframeWindow(config.window_size)
    )


def enumerate_feasible_subsets(
    keyframes: list[Keyframe], config: WindowConfig
) -> list[tuple[int, ...]]:
    """All index subsets containing 0, size >= 2, with every consecutive
    selected pose gap inside [delta_lower, delta_upper].

    Depth-first search over feasible extensions; a partial chain is never
    grown through an infeasible gap, which is equivalent to filtering the
    full power set because feasibility only constrains consecutive
    selected pairs.
    """
    n = len(keyframes)
    if n < 2:
        raise ValidationError("need at least two keyframes")
    positions = np.array([k.pose.position for k in keyframes])
    diff = positions[:, None, :] - positions[None, :, :]
    gaps = np.sqrt(np.sum(diff * diff, axis=2))
    feasible = (gaps >= config.delta_lower) & (gaps <= config.delta_upper)

    out: list[tuple[int, ...]] = []
    chain = [0]

    def grow(last: int) -> None:
        for j in range(last + 1, n):
            if feasible[last, j]:
                chain.append(j)
                out.append(tuple(chain))
                grow(j)
                chain.pop()

    grow(0)
    return out


def _enumerate_relaxed(n: int) -> list[tuple[int, ...]]:
    """All index subsets containing 0 with size >= 2, no gap constraints."""
    out: list[tuple[int, ...]] = []
    chain = [0]

    def grow(last: int) -> None:
        for j in range(last + 1, n):
            chain.append(j)
            out.append(tuple(chain))
            grow(j)
            chain.pop()

    grow(0)
    return out


class _WindowEvaluator:
    """Evaluates the objective over subsets of one fixed window.

    Pairwise similarities and pose gaps are precomputed once; the
    preservation pipeline (Jacobian -> covariance -> eigendecomposition ->
    transform) runs per subset on descriptor slices.
    """

    def __init__(self, keyframes: list[Keyframe], params: ObjectiveParams):
        self.params = params
        self.descriptors = np.array([k.descriptor for k in keyframes])
        positions = np.array([k.pose.position for k in keyframes])
        diff = positions[:, None, :] - positions[None, :, :]
        self.pose_gaps = np.sqrt(np.sum(diff * diff, axis=2))
        ddiff = self.descriptors[:, None, :] - self.descriptors[None, :, :]
        self.similarity = 1.0 / (
            1.0 + np.sqrt(np.sum(ddiff * ddiff, axis=2))
        )

    def objective(self, indices: tuple[int, ...]) -> float:
        idx = np.asarray(indices)
        sims = self.similarity[idx[:-1], idx[1:]]
        rho = float(np.mean(sims))
        steps = np.maximum(self.pose_gaps[idx[:-1], idx[1:]], MIN_ARC_STEP)
        arclength = np.concatenate(([0.0], np.cumsum(steps)))
        d_sub = self.descriptors[idx]
        jac = numerical_jacobian(d_sub, arclength)
        eig = eigendecompose(jac.T @ jac)
        transformed = transform_descriptors(d_sub, eig)
        pi = -float(
            np.mean(np.linalg.norm(np.diff(transformed, axis=0), axis=1))
        )
        return (rho + self.params.alpha) / (pi - self.params.beta)


def optimize_window(
    keyframes: list[Keyframe], config: WindowConfig
) -> SubsetSelection:
    """Feasible subset minimizing the objective.

    Ties break toward the smaller subset, then the lexicographically
    smaller index sequence. When no subset satisfies the gap constraints,
    the search reruns without them and the selection is flagged relaxed.
    """
    if len(keyframes) < 2:
        raise ValidationError("cannot optimize a window of fewer than two")
    candidates = enumerate_feasible_subsets(keyframes, config)
    relaxed = False
    if not candidates:
        candidates = _enumerate_relaxed(len(keyframes))
        relaxed = True
    evaluator = _WindowEvaluator(keyframes, config.params)
    best: tuple[float, int, tuple[int, ...]] | None = None
    for indices in candidates:
        key = (evaluator.objective(indices), len(indices), indices)
        if best is None or key < best:
            best = key
    value, _, indices = best
    return SubsetSelection(indices, value, relaxed)


def slide_amount(last_selected_index: int, config: WindowConfig) -> int:
    """Number of fresh keyframes admitted next step: N - (i_n - 1).

    `last_selected_index` is 1-based, matching the window numbering used
    throughout the docs.
    """
    n = config.window_size
    if not (1 <= last_selected_index <= n):
        raise ValidationError(
            f"last selected index {last_selected_index} outside 1..{n}"
        )
    return n - (last_selected_index - 1)


def extend_with_neighbors(
    state: OptimizerState, config: WindowConfig
) -> tuple[list[Keyframe], list[bool]]:
    """Merge stored revisit neighbors into the current window.

    Every stored keyframe within delta_upper of any window keyframe (and
    not already in the window) is inserted next to the window keyframe it
    is nearest to, so consecutive-pair terms reflect spatial adjacency.
    If the extended set would exceed capacity + 5, window tail keyframes
    are deferred to the next window first; when the anchor alone remains
    and neighbors still overflow, the neighbors farthest from the
    remaining window are dropped (ties toward the higher id), keeping the
    extended set hard-capped. Returns the extended ordering plus a
    per-entry neighbor flag.
    """
    window = state.window
    entries = list(window.entries)
    window_ids = {k.id for k in entries}
    neighbor_ids: set[int] = set()
    for kf in entries:
        for nid in state.store.radius_query(kf.pose, config.delta_upper):
            if nid not in window_ids:
                neighbor_ids.add(nid)
    neighbors = [k for k in state.store if k.id in neighbor_ids]

    cap = config.window_size + EXTENSION_CAP_EXTRA
    overflow = len(entries) + len(neighbors) - cap
    # Keep at least one frame besides the anchor so every cycle evaluates
    # (and disposes of) real window content; overflowing neighbors are
    # trimmed below instead.
    while overflow > 0 and len(entries) > 2:
        popped = entries.pop()
        # Deferral exists to give unevaluated frames a later chance of
        # being stored; a frame already in the store gains nothing from
        # re-evaluation and would clog subsequent windows.
        if popped.id not in state.store:
            state.deferred.append(popped)
        overflow -= 1
    room = cap - len(entries)
    if len(neighbors) > room:
        neighbors = sorted(
            neighbors,
            key=lambda nb: (
                min(pose_distance(nb.pose, wk.pose) for wk in entries),
                nb.id,
            ),
        )[: max(room, 0)]

    # Attach each neighbor immediately before the window keyframe it is
    # nearest to (ties toward the lower-id window keyframe), so that the
    # consecutive-pair terms reflect spatial adjacency. The anchor must
    # stay first, so its neighbors land immediately after it instead.
    before: dict[int, list[Keyframe]] = {i: [] for i in range(len(entries))}
    after_anchor: list[Keyframe] = []
    for nb in sorted(neighbors, key=lambda k: k.id):
        dists = [pose_distance(nb.pose, wk.pose) for wk in entries]
        nearest = int(np.argmin(dists))
        if nearest == 0:
            after_anchor.append(nb)
        else:
            before[nearest].append(nb)

    extended: list[Keyframe] = []
    flags: list[bool] = []
    for i, wk in enumerate(entries):
        if i == 0:
            extended.append(wk)
            flags.append(False)
            extended.extend(after_anchor)
            flags.extend([True] * len(after_anchor))
            continue
        extended.extend(before[i])
        flags.extend([True] * len(before[i]))
        extended.append(wk)
        flags.append(False)
    window.extension = neighbors
    return extended, flags


def _run_cycle(state: OptimizerState, config: WindowConfig) -> None:
    import time

    t0 = time.perf_counter()
    extended, flags = extend_with_neighbors(state, config)
    selection = optimize_window(extended, config)
    state.selections.append(selection)

    for i in selection.indices:
        kf = extended[i]
        if kf.id not in state.store:
            state.store.append(kf)

    # Adaptive slide: the last selected *window* keyframe anchors the next
    # window; the unselected window tail after it is re-evaluated there.
    window_selected = [i for i in selection.indices if not flags[i]]
    last = max(window_selected)
    anchor = extended[last]
    # Slide over the window entries that actually took part in this cycle;
    # tail entries deferred by the extension cap re-enter via `deferred`.
    window_entries = [kf for kf, fl in zip(extended, flags) if not fl]
    entry_pos = window_entries.index(anchor)
    if entry_pos == 0:
        # Only the carried anchor was re-selected, which can happen when
        # revisit neighbors dominate the selection. The evaluated and
        # rejected tail is discarded; the anchor stays so the next window
        # is still linked to an already-selected keyframe.
        new_entries = [anchor]
    else:
        # Already-stored tail frames cannot be stored again; carrying
        # them would only crowd out fresh arrivals, so they are dropped.
        new_entries = [anchor] + [
            kf
            for kf in window_entries[entry_pos + 1 :]
            if kf.id not in state.store
        ]
    new_entries.extend(state.deferred)
    state.deferred = []
    state.window = KeyframeWindow(config.window_size, new_entries)
    state.step += 1
    state.cycle_times.append(time.perf_counter() - t0)


def process_frame(
    state: OptimizerState, frame: Keyframe, config: WindowConfig
) -> OptimizerState:
    """Feed one keyframe; runs optimization cycles whenever the window fills."""
    if frame.id <= state.last_id:
        raise ValidationError(
            f"frame id {frame.id} not greater than last seen {state.last_id}"
        )
    state.last_id = frame.id
    state.window.entries.append(frame)
    while state.window.is_full():
        _run_cycle(state, config)
    return state


def finalize(state: OptimizerState, config: WindowConfig) -> KeyframeStore:
    """Flush a partially filled last window and return the store.

    Two or more buffered keyframes get one last optimization cycle; a
    single leftover keyframe is appended verbatim.
    """
    entries = state.window.entries
    if len(entries) >= 2:
        selection = optimize_window(entries, config)
        state.selections.append(selection)
        for i in selection.indices:
            kf = entries[i]
            if kf.id not in state.store:
                state.store.append(kf)
    elif len(entries) == 1 and entries[0].id not in state.store:
        state.store.append(entries[0])
    state.window = KeyframeWindow(config.window_size)
    return state.store


def run(
    frames: list[Keyframe], config: WindowConfig | None = None
) -> OptimizerState:
    """Drive the optimizer over a whole frame sequence."""
    config = config or WindowConfig()
    state = new_state(config)
    for frame in frames:
        process_frame(state, frame, config)
    finalize(state, config)
    return state
