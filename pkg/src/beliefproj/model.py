"""POMDP over binary state variables, beliefs, and exact Bayesian monitoring.

State indexing convention used everywhere in this package: with variables
(x0, .., x{n-1}) declared in order, joint state ``s`` is the integer whose
bit ``i`` is 1 iff variable ``i`` is true, so there are ``2**n`` states and
state 0 is the all-false instantiation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ZeroProbabilityObservation

ROW_SUM_TOL = 1e-9
CPT_ROW_TOL = 1e-6
ZERO_OBS_TOL = 1e-12

MAX_VARIABLES = 20


def num_states(n_vars: int) -> int:
    return 1 << n_vars


def state_bit(states, var: int):
    """Truth value (0/1) of variable ``var`` in each state index."""
    return (np.asarray(states) >> var) & 1


def as_belief(probs, dim: int | None = None) -> np.ndarray:
    """Validate and return a belief vector (entries >= 0, sum 1 within 1e-9)."""
    b = np.asarray(probs, dtype=float)
    if b.ndim != 1:
        raise InputError(f"belief must be a vector, got shape {b.shape}")
    if dim is not None and b.shape[0] != dim:
        raise InputError(f"belief has dimension {b.shape[0]}, expected {dim}")
    if np.any(b < -1e-12):
        raise InputError("belief has negative entries")
    total = float(b.sum())
    if abs(total - 1.0) > ROW_SUM_TOL:
        raise InputError(f"belief sums to {total}, expected 1")
    return b


def _check_stochastic(table: np.ndarray, what: str) -> None:
    if np.any(table < -1e-12) or np.any(table > 1 + 1e-12):
        raise InputError(f"{what} has entries outside [0, 1]")
    sums = table.sum(axis=-1)
    bad = np.abs(sums - 1.0) > ROW_SUM_TOL
    if np.any(bad):
        row = int(np.argwhere(bad)[0][-1])
        raise InputError(f"{what} row {row} sums to {sums.flat[int(np.flatnonzero(bad)[0])]}, expected 1")


@dataclass(frozen=True)
class Pomdp:
    """Dense finite POMDP. ``transition[a][s][s']`` is P(s'|s,a),
    ``observation_fn[a][s'][z]`` is P(z|s',a), ``reward[s]`` is R(s)."""

    variables: tuple[str, ...]
    actions: tuple[str, ...]
    observations: tuple[str, ...]
    transition: np.ndarray
    observation_fn: np.ndarray
    reward: np.ndarray
    discount: float

    def __post_init__(self):
        n = len(self.variables)
        if n < 1:
            raise InputError("at least one state variable is required")
        if n > MAX_VARIABLES:
            raise InputError(f"{n} variables exceeds the {MAX_VARIABLES}-variable limit")
        if len(set(self.variables)) != n:
            raise InputError("duplicate variable names")
        if not self.actions or not self.observations:
            raise InputError("actions and observations must be nonempty")
        s = num_states(n)
        a, z = len(self.actions), len(self.observations)
        if self.transition.shape != (a, s, s):
            raise InputError(f"transition shape {self.transition.shape} != {(a, s, s)}")
        if self.observation_fn.shape != (a, s, z):
            raise InputError(f"observation shape {self.observation_fn.shape} != {(a, s, z)}")
        if self.reward.shape != (s,):
            raise InputError(f"reward shape {self.reward.shape} != {(s,)}")
        if not (0.0 < self.discount <= 1.0):
            raise InputError(f"discount {self.discount} not in (0, 1]")
        _check_stochastic(self.transition, "transition table")
        _check_stochastic(self.observation_fn, "observation table")
        for arr in (self.transition, self.observation_fn, self.reward):
            arr.setflags(write=False)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_states(self) -> int:
        return num_states(self.n_vars)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    def action_index(self, name: str) -> int:
        try:
            return self.actions.index(name)
        except ValueError:
            raise InputError(f"unknown action {name!r}") from None

    def observation_index(self, name: str) -> int:
        try:
            return self.observations.index(name)
        except ValueError:
            raise InputError(f"unknown observation {name!r}") from None


def _cpt_truth_probs(var: str, cpt: dict, variables: tuple[str, ...], n: int) -> np.ndarray:
    """Per-state probability that ``var`` is true next step, from a CPT entry."""
    parents = cpt.get("parents", [])
    for p in parents:
        if p not in variables:
            raise InputError(f"cpt for {var!r} references undeclared parent {p!r}")
    rows = cpt.get("rows")
    if rows is None:
        raise InputError(f"cpt for {var!r} has no rows")
    rows = np.asarray(rows, dtype=float)
    expected = 1 << len(parents)
    if rows.shape != (expected, 2):
        raise InputError(
            f"cpt for {var!r} must have {expected} rows of [p_true, p_false], got shape {rows.shape}")
    if np.any(np.abs(rows.sum(axis=1) - 1.0) > CPT_ROW_TOL):
        raise InputError(f"cpt row for {var!r} does not sum to 1")
    if np.any(rows < -1e-12):
        raise InputError(f"cpt for {var!r} has negative entries")
    states = np.arange(num_states(n))
    # row index packs parent truth values, bit j of the row <-> parents[j]
    keys = np.zeros(num_states(n), dtype=np.int64)
    for j, p in enumerate(parents):
        keys |= state_bit(states, variables.index(p)) << j
    return rows[keys, 0]


def _transition_from_cpts(cpts: dict, variables: tuple[str, ...]) -> np.ndarray:
    n = len(variables)
    s = num_states(n)
    missing = [v for v in variables if v not in cpts]
    if missing:
        raise InputError(f"cpts missing for variables {missing}")
    extra = [v for v in cpts if v not in variables]
    if extra:
        raise InputError(f"cpts given for undeclared variables {extra}")
    table = np.ones((s, s))
    next_states = np.arange(s)
    for i, var in enumerate(variables):
        p_true = _cpt_truth_probs(var, cpts[var], variables, n)  # indexed by source state
        bit = state_bit(next_states, i)[np.newaxis, :]
        table *= np.where(bit == 1, p_true[:, np.newaxis], 1.0 - p_true[:, np.newaxis])
    return table


def compile_model(spec: dict) -> Pomdp:
    """Compile a factored model description (parsed JSON document) to dense tables.

    Expected keys: ``variables``, ``actions``, ``observations``, ``transitions``
    (per action either ``{"flat": [[...]]}`` or ``{"cpts": {var: {"parents": [...],
    "rows": [[p_true, p_false], ...]}}}``), ``observation`` (per action, 2^n x |Z|
    rows over arrival states), ``reward`` (length 2^n), ``discount``.
    """
    for key in ("variables", "actions", "observations", "transitions",
                "observation", "reward", "discount"):
        if key not in spec:
            raise InputError(f"model document missing key {key!r}")
    variables = tuple(spec["variables"])
    if len(set(variables)) != len(variables):
        raise InputError("duplicate variable names")
    if len(variables) > MAX_VARIABLES:
        raise InputError(f"{len(variables)} variables exceeds the {MAX_VARIABLES}-variable limit")
    actions = tuple(spec["actions"])
    observations = tuple(spec["observations"])
    n = len(variables)
    s = num_states(n)

    trans = np.empty((len(actions), s, s))
    for ai, a in enumerate(actions):
        entry = spec["transitions"].get(a)
        if entry is None:
            raise InputError(f"transitions missing action {a!r}")
        if "flat" in entry:
            table = np.asarray(entry["flat"], dtype=float)
            if table.shape != (s, s):
                raise InputError(f"flat transition for {a!r} has shape {table.shape}, expected {(s, s)}")
        elif "cpts" in entry:
            table = _transition_from_cpts(entry["cpts"], variables)
        else:
            raise InputError(f"transitions for {a!r} need either 'flat' or 'cpts'")
        trans[ai] = table

    obs = np.empty((len(actions), s, len(observations)))
    for ai, a in enumerate(actions):
        table = spec["observation"].get(a)
        if table is None:
            raise InputError(f"observation missing action {a!r}")
        table = np.asarray(table, dtype=float)
        if table.shape != (s, len(observations)):
            raise InputError(
                f"observation table for {a!r} has shape {table.shape}, expected {(s, len(observations))}")
        obs[ai] = table

    reward = np.asarray(spec["reward"], dtype=float)
    return Pomdp(variables, actions, observations, trans, obs, reward, float(spec["discount"]))


def model_to_spec(model: Pomdp) -> dict:
    """Dense JSON document for a model (flat transition tables)."""
    return {
        "variables": list(model.variables),
        "actions": list(model.actions),
        "observations": list(model.observations),
        "transitions": {a: {"flat": model.transition[ai].tolist()}
                        for ai, a in enumerate(model.actions)},
        "observation": {a: model.observation_fn[ai].tolist()
                        for ai, a in enumerate(model.actions)},
        "reward": model.reward.tolist(),
        "discount": model.discount,
    }


def predicted_belief(model: Pomdp, b: np.ndarray, a: int) -> np.ndarray:
    """One-step predicted belief sum_s P(s'|s,a) b(s)."""
    return model.transition[a].T @ b


def observation_probabilities(model: Pomdp, b: np.ndarray, a: int) -> np.ndarray:
    """P(z|b,a) for every observation z."""
    return model.observation_fn[a].T @ predicted_belief(model, b, a)


def belief_update(model: Pomdp, b: np.ndarray, a: int, z: int) -> np.ndarray:
    """Bayes posterior after doing ``a`` and observing ``z``.

    Raises ZeroProbabilityObservation when P(z|b,a) < 1e-12.
    """
    post = model.observation_fn[a][:, z] * predicted_belief(model, b, a)
    norm = float(post.sum())
    if norm < ZERO_OBS_TOL:
        raise ZeroProbabilityObservation(
            f"observation {z} has probability {norm} under action {a}")
    return post / norm


def value_of(b: np.ndarray, alpha_set) -> tuple[float, int]:
    """Max dot product over an alpha-vector set and the index attaining it.

    Ties break toward the lowest index. ``alpha_set`` may be anything with a
    ``matrix`` attribute (rows = vectors) or a plain 2-D array.
    """
    mat = getattr(alpha_set, "matrix", alpha_set)
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] == 0:
        raise InputError("alpha set must be a nonempty collection of vectors")
    if mat.shape[1] != b.shape[0]:
        raise InputError(f"vector dimension {mat.shape[1]} != belief dimension {b.shape[0]}")
    vals = mat @ b
    idx = int(np.argmax(vals))
    return float(vals[idx]), idx
