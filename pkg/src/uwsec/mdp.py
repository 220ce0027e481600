"""Finite MDP for relay power allocation, solved by policy iteration.

States are (gain index RD, gain index RE, battery level) flattened as
``s = (i_d * L_e + i_e) * (B_max + 1) + b``. Actions index ``power_levels``.
Transitions are stored sparsely as fixed-width successor lists per (s, a).
Value iteration is provided as an independent check on policy iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acoustic import AcousticLinkParams, broadband_snr, snr_per_unit
from .config import SystemConfig
from .energy import InfeasibleActionError

LN2 = math.log(2.0)


@dataclass
class OpCounter:
    """Operation counts used for complexity checks."""

    improvement_passes: int = 0
    evaluation_sweeps: int = 0
    vi_sweeps: int = 0

    def as_dict(self) -> dict[str, int]:
        return dict(self.__dict__)


@dataclass(eq=False)
class MdpModel:
    states: np.ndarray           # (N_S, 3) int: gain idx RD, gain idx RE, battery
    actions: np.ndarray          # (N_A,) power levels in W
    action_units: np.ndarray     # (N_A,) energy units per slot
    feasible: np.ndarray         # (N_S, N_A) bool
    secrecy: np.ndarray          # (N_S, N_A) C_Sa in bps, before thresholding
    reward: np.ndarray           # (N_S, N_A) thresholded reward, 0 where infeasible
    next_state: np.ndarray       # (N_S, N_A, W) int, padded with 0
    next_prob: np.ndarray        # (N_S, N_A, W) float, padded with 0
    n_next: np.ndarray           # (N_S, N_A) int
    discount: float
    shape: tuple[int, int, int]  # (L_d, L_e, B_max + 1)

    @classmethod
    def from_dense(cls, P, R, discount: float, feasible=None) -> "MdpModel":
        """Generic model from a dense (N_A, N_S, N_S) tensor and (N_S, N_A) rewards.

        States are labelled (0, 0, s); useful for hand-built test problems.
        """
        P = np.asarray(P, dtype=float)
        R = np.asarray(R, dtype=float)
        n_a, n_s, _ = P.shape
        feas = np.ones((n_s, n_a), dtype=bool) if feasible is None else np.asarray(feasible, dtype=bool)
        nxt = np.zeros((n_s, n_a, n_s), dtype=np.int64)
        prob = np.zeros((n_s, n_a, n_s))
        cnt = np.zeros((n_s, n_a), dtype=np.int64)
        for s in range(n_s):
            for a in range(n_a):
                if not feas[s, a]:
                    continue
                idx = np.flatnonzero(P[a, s])
                cnt[s, a] = idx.size
                nxt[s, a, :idx.size] = idx
                prob[s, a, :idx.size] = P[a, s, idx]
        states = np.stack([np.zeros(n_s, int), np.zeros(n_s, int), np.arange(n_s)], axis=1)
        return cls(states, np.arange(n_a, dtype=float), np.zeros(n_a, dtype=np.int64), feas,
                   R.copy(), np.where(feas, R, 0.0), nxt, prob, cnt, float(discount), (1, 1, n_s))

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def n_actions(self) -> int:
        return self.actions.shape[0]

    def index(self, i_d: int, i_e: int, b: int) -> int:
        _, L_e, nb = self.shape
        return (i_d * L_e + i_e) * nb + b

    def transitions(self, s: int, a: int) -> list[tuple[int, float]]:
        n = self.n_next[s, a]
        return [(int(self.next_state[s, a, j]), float(self.next_prob[s, a, j])) for j in range(n)]

    def dense(self) -> np.ndarray:
        """(N_A, N_S, N_S) transition tensor; rows of infeasible pairs are zero."""
        P = np.zeros((self.n_actions, self.n_states, self.n_states))
        for s in range(self.n_states):
            for a in range(self.n_actions):
                for j in range(self.n_next[s, a]):
                    P[a, s, self.next_state[s, a, j]] += self.next_prob[s, a, j]
        return P

    @property
    def r_max(self) -> float:
        return float(self.reward.max()) if self.reward.size else 0.0

    def with_rewards(self, reward: np.ndarray, discount: float | None = None) -> "MdpModel":
        """Same dynamics with a different reward table (and optionally discount)."""
        reward = np.where(self.feasible, reward, 0.0)
        return MdpModel(self.states, self.actions, self.action_units, self.feasible,
                        self.secrecy, reward, self.next_state, self.next_prob, self.n_next,
                        self.discount if discount is None else float(discount), self.shape)


def acoustic_secrecy_rate(gain_rd, gain_re, power_w, link_d: AcousticLinkParams,
                          link_e: AcousticLinkParams, bandwidth_hz: float):
    """B * max(log2((1 + snr_D) / (1 + snr_E)), 0) in bps."""
    g_d = broadband_snr(power_w, gain_rd, link_d)
    g_e = broadband_snr(power_w, gain_re, link_e)
    return bandwidth_hz * np.maximum((np.log1p(g_d) - np.log1p(g_e)) / LN2, 0.0)


def threshold(c_sa, r_th: float):
    """Rate counts only when it meets the QoS threshold."""
    return np.where(np.asarray(c_sa) >= r_th, c_sa, 0.0)


def reward(model: MdpModel, s: int, a: int) -> float:
    if not model.feasible[s, a]:
        raise InfeasibleActionError(f"action {a} infeasible in state {s}")
    return float(model.reward[s, a])


def _enumerate_states(L_d: int, L_e: int, nb: int) -> np.ndarray:
    i, j, b = np.meshgrid(np.arange(L_d), np.arange(L_e), np.arange(nb), indexing="ij")
    return np.stack([i.ravel(), j.ravel(), b.ravel()], axis=1).astype(np.int64)


def build_transitions(cfg: SystemConfig):
    """Sparse successor lists: (next_state, next_prob, n_next, feasible)."""
    Pd = cfg.gain_chain_rd.transition
    Pe = cfg.gain_chain_re.transition
    L_d, L_e = Pd.shape[0], Pe.shape[0]
    cap = cfg.battery.capacity_units
    nb = cap + 1
    units = cfg.action_units
    p = cfg.harvest.probability
    e_r = cfg.harvest.quantum_units
    N_S, N_A = L_d * L_e * nb, len(units)
    W = 2 * L_d * L_e
    nxt = np.zeros((N_S, N_A, W), dtype=np.int64)
    prob = np.zeros((N_S, N_A, W))
    cnt = np.zeros((N_S, N_A), dtype=np.int64)
    feas = np.zeros((N_S, N_A), dtype=bool)
    for s, (i, j, b) in enumerate(_enumerate_states(L_d, L_e, nb)):
        for a, u in enumerate(units):
            if u > b:
                continue
            feas[s, a] = True
            # battery successor -> probability; harvest and no-harvest may coincide at the clamp
            batt: dict[int, float] = {}
            for level, pr in ((min(b - u + e_r, cap), p), (b - u, 1.0 - p)):
                if pr > 0:
                    batt[level] = batt.get(level, 0.0) + pr
            k = 0
            for i2 in range(L_d):
                if Pd[i, i2] == 0:
                    continue
                for j2 in range(L_e):
                    if Pe[j, j2] == 0:
                        continue
                    for b2, pb in sorted(batt.items()):
                        nxt[s, a, k] = (i2 * L_e + j2) * nb + b2
                        prob[s, a, k] = Pd[i, i2] * Pe[j, j2] * pb
                        k += 1
            cnt[s, a] = k
    return nxt, prob, cnt, feas


def build_model(cfg: SystemConfig) -> MdpModel:
    L_d, L_e = cfg.gain_chain_rd.size, cfg.gain_chain_re.size
    nb = cfg.battery.capacity_units + 1
    states = _enumerate_states(L_d, L_e, nb)
    powers = np.asarray(cfg.power_levels, dtype=float)
    units = np.asarray(cfg.action_units, dtype=np.int64)
    nxt, prob, cnt, feas = build_transitions(cfg)
    g_d = np.asarray(cfg.gain_chain_rd.levels)[states[:, 0]]
    g_e = np.asarray(cfg.gain_chain_re.levels)[states[:, 1]]
    c_sa = acoustic_secrecy_rate(g_d[:, None], g_e[:, None], powers[None, :],
                                 cfg.acoustic_d, cfg.acoustic_e, cfg.bandwidth_hz)
    r = np.where(feas, threshold(c_sa, cfg.r_th), 0.0)
    return MdpModel(states, powers, units, feas, c_sa, r, nxt, prob, cnt,
                    float(cfg.gamma), (L_d, L_e, nb))


def snr_tables(cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per (gain level, action) broadband SNR at D and at E."""
    powers = np.asarray(cfg.power_levels)
    kd = snr_per_unit(cfg.acoustic_d)
    ke = snr_per_unit(cfg.acoustic_e)
    sd = powers[None, :] * np.asarray(cfg.gain_chain_rd.levels)[:, None] * kd
    se = powers[None, :] * np.asarray(cfg.gain_chain_re.levels)[:, None] * ke
    return sd, se


# --- solvers -----------------------------------------------------------------

def expected_next(model: MdpModel, value: np.ndarray) -> np.ndarray:
    """(N_S, N_A) table of sum_s' P(s'|s,a) V(s')."""
    return (model.next_prob * value[model.next_state]).sum(axis=2)


def q_values(model: MdpModel, value: np.ndarray) -> np.ndarray:
    q = model.reward + model.discount * expected_next(model, value)
    return np.where(model.feasible, q, -np.inf)


def greedy(q: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum: ties go to the lowest power
    return np.argmax(q, axis=1)


def policy_evaluation(model: MdpModel, policy: np.ndarray, epsilon: float,
                      value: np.ndarray | None = None, counter: OpCounter | None = None,
                      max_sweeps: int = 1_000_000) -> np.ndarray:
    """Iterate V <- R_d + gamma P_d V (Jacobi sweeps) until the sup-norm change is below epsilon."""
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    policy = np.asarray(policy)
    rows = np.arange(model.n_states)
    if not model.feasible[rows, policy].all():
        bad = int(np.flatnonzero(~model.feasible[rows, policy])[0])
        raise InfeasibleActionError(f"policy action {policy[bad]} infeasible in state {bad}")
    r_d = model.reward[rows, policy]
    nxt = model.next_state[rows, policy]
    pr = model.next_prob[rows, policy]
    v = np.zeros(model.n_states) if value is None else np.array(value, dtype=float)
    for _ in range(max_sweeps):
        new = r_d + model.discount * (pr * v[nxt]).sum(axis=1)
        if counter is not None:
            counter.evaluation_sweeps += 1
        delta = np.max(np.abs(new - v))
        v = new
        if delta < epsilon:
            return v
    raise RuntimeError("policy evaluation did not converge")


def policy_improvement(model: MdpModel, value: np.ndarray, policy: np.ndarray,
                       counter: OpCounter | None = None) -> tuple[np.ndarray, bool]:
    if not np.all(np.isfinite(value)):
        raise ValueError("value function must be finite")
    new = greedy(q_values(model, value))
    if counter is not None:
        counter.improvement_passes += 1
    return new, bool(np.array_equal(new, policy))


@dataclass
class SolveResult:
    policy: np.ndarray
    value: np.ndarray
    iterations: int
    counter: OpCounter = field(default_factory=OpCounter)


def policy_iteration(model: MdpModel, epsilon: float = 1e-6, max_iterations: int = 1000) -> SolveResult:
    """Alternate evaluation and improvement from the all-zero-power policy until stable."""
    if not 0 <= model.discount < 1:
        raise ValueError("discount must be in [0, 1)")
    counter = OpCounter()
    policy = np.zeros(model.n_states, dtype=np.int64)
    value = np.zeros(model.n_states)
    for it in range(1, max_iterations + 1):
        value = policy_evaluation(model, policy, epsilon, value, counter)
        policy_new, stable = policy_improvement(model, value, policy, counter)
        if stable:
            return SolveResult(policy, value, it, counter)
        policy = policy_new
    raise RuntimeError(f"policy iteration not stable after {max_iterations} iterations")


def value_iteration(model: MdpModel, epsilon: float = 1e-6, max_sweeps: int = 1_000_000) -> SolveResult:
    """Bellman optimality sweeps until the sup-norm change is below epsilon."""
    if not 0 <= model.discount < 1:
        raise ValueError("discount must be in [0, 1)")
    counter = OpCounter()
    v = np.zeros(model.n_states)
    for _ in range(max_sweeps):
        new = q_values(model, v).max(axis=1)
        counter.vi_sweeps += 1
        delta = np.max(np.abs(new - v))
        v = new
        if delta < epsilon:
            return SolveResult(greedy(q_values(model, v)), v, counter.vi_sweeps, counter)
    raise RuntimeError("value iteration did not converge")


def exact_policy_value(model: MdpModel, policy: np.ndarray) -> np.ndarray:
    """Direct solve of (I - gamma P_d) V = R_d."""
    rows = np.arange(model.n_states)
    P = np.zeros((model.n_states, model.n_states))
    for s in rows:
        a = policy[s]
        np.add.at(P[s], model.next_state[s, a, :model.n_next[s, a]],
                  model.next_prob[s, a, :model.n_next[s, a]])
    return np.linalg.solve(np.eye(model.n_states) - model.discount * P, model.reward[rows, policy])


# --- lookup-table serialization ----------------------------------------------

TABLE_COLUMNS = ("state", "gain_rd", "gain_re", "battery", "action", "power_w", "value")


def write_policy_table(path: str | Path, model: MdpModel, policy: np.ndarray, value: np.ndarray,
                       meta: dict | None = None) -> None:
    """Tab-separated lookup table; ``meta`` lines go first as ``# key=value`` comments."""
    lines = [f"# {k}={meta[k]}" for k in sorted(meta or {})]
    lines.append("\t".join(TABLE_COLUMNS))
    for s in range(model.n_states):
        i, j, b = model.states[s]
        a = int(policy[s])
        lines.append(f"{s}\t{i}\t{j}\t{b}\t{a}\t{float(model.actions[a])!r}\t{float(value[s])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_policy_table(path: str | Path, model: MdpModel) -> tuple[np.ndarray, np.ndarray, dict]:
    """Parse a lookup table and check it covers every state of ``model`` with feasible actions."""
    meta: dict[str, str] = {}
    policy = np.full(model.n_states, -1, dtype=np.int64)
    value = np.full(model.n_states, np.nan)
    header = None
    for ln in Path(path).read_text().splitlines():
        if not ln.strip():
            continue
        if ln.startswith("#"):
            k, _, v = ln[1:].strip().partition("=")
            meta[k] = v
            continue
        if header is None:
            header = tuple(ln.split("\t"))
            if header != TABLE_COLUMNS:
                raise ValueError(f"unexpected policy table header {header}")
            continue
        f = ln.split("\t")
        s, i, j, b, a = (int(x) for x in f[:5])
        if not 0 <= s < model.n_states or tuple(model.states[s]) != (i, j, b):
            raise ValueError(f"policy table row for state {(i, j, b)} does not match the model")
        if not 0 <= a < model.n_actions or not model.feasible[s, a]:
            raise InfeasibleActionError(f"policy table action {a} infeasible in state {(i, j, b)}")
        policy[s] = a
        value[s] = float(f[6])
    missing = np.flatnonzero(policy < 0)
    if missing.size:
        raise ValueError(f"policy table missing state {tuple(model.states[missing[0]])}")
    return policy, value, meta
