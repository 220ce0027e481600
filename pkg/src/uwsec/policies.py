"""Action selection for the three power-allocation schemes.

``opa`` looks the action up in a policy-iteration table, ``ga`` maximizes
the immediate reward over feasible powers (lowest power on ties) and
``na`` spends as much of the battery as the discrete power set allows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import InfeasibleActionError
from .mdp import MdpModel, greedy, policy_iteration

SCHEMES = ("opa", "ga", "na")


@dataclass(frozen=True, eq=False)
class Scheme:
    kind: str
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown scheme {self.kind!r}; expected one of {SCHEMES}")
        if (self.kind == "opa") != (self.table is not None):
            raise ValueError("an OPA scheme needs a policy table; GA/NA take none")

    @classmethod
    def opa(cls, table) -> "Scheme":
        return cls("opa", np.asarray(table, dtype=np.int64))

    def check(self, model: MdpModel) -> None:
        if self.table is None:
            return
        if self.table.shape != (model.n_states,):
            raise ValueError(f"OPA table covers {self.table.shape[0]} states, model has {model.n_states}")
        rows = np.arange(model.n_states)
        bad = ~model.feasible[rows, self.table]
        if bad.any():
            s = int(np.flatnonzero(bad)[0])
            raise InfeasibleActionError(f"OPA table action {self.table[s]} infeasible in state {s}")


def make_scheme(kind: str, model: MdpModel, epsilon: float = 1e-6) -> Scheme:
    """Build a scheme; OPA solves the model by policy iteration."""
    if kind == "opa":
        return Scheme.opa(policy_iteration(model, epsilon).policy)
    return Scheme(kind)


def greedy_actions(model: MdpModel) -> np.ndarray:
    return greedy(np.where(model.feasible, model.reward, -np.inf))


def naive_actions(model: MdpModel) -> np.ndarray:
    batt = model.states[:, 2]
    return np.searchsorted(model.action_units, batt, side="right") - 1


def select_action(scheme: Scheme, state, model: MdpModel) -> int:
    """Action index for ``state`` (flat index or (gain_rd, gain_re, battery) tuple)."""
    s = model.index(*state) if isinstance(state, tuple) else int(state)
    if scheme.kind == "opa":
        if scheme.table is None or not 0 <= s < scheme.table.shape[0]:
            raise KeyError(f"state {s} missing from the OPA table")
        a = int(scheme.table[s])
    elif scheme.kind == "ga":
        q = np.where(model.feasible[s], model.reward[s], -np.inf)
        a = int(np.argmax(q))
    else:
        a = int(np.searchsorted(model.action_units, model.states[s, 2], side="right") - 1)
    if not model.feasible[s, a]:
        raise InfeasibleActionError(f"{scheme.kind} chose infeasible action {a} in state {s}")
    return a
