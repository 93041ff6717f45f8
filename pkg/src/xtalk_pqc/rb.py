"""Randomized benchmarking: IRB/SRB sequences, decay fits and closed-loop crosstalk characterization."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.stats import chi2
from scipy.stats import f as f_dist

from .circuit import Circuit, GateInstance, barrier, cx
from .clifford import CliffordElement, identity_element, random_clifford, realize, tableau_of_gate
from .device import CrosstalkTable, DeviceModel, Edge, norm_edge, one_hop_pairs
from .simulator import NoiseSpec, run_noisy

log = logging.getLogger(__name__)

DEFAULT_LENGTHS = (1, 5, 10, 20, 40)


class FitError(RuntimeError):
    """Decay fit failed or hit a parameter bound."""


class CharacterizationError(RuntimeError):
    def __init__(self, what, cause):
        super().__init__(f"{what}: {cause}")
        self.what = what
        self.cause = cause


# -- sequences ---------------------------------------------------------------

@dataclass
class RbSequenceSet:
    lengths: tuple[int, ...]
    k: int
    interleaved_gate: Edge | None
    edges: tuple[Edge, ...]
    # (m, sample index) -> circuit
    circuits: dict[tuple[int, int], Circuit] = field(default_factory=dict)

    def items(self):
        return sorted(self.circuits.items())


def _sequence_rng(seed: int, edge: Edge, m: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(edge[0]), int(edge[1]), int(m), int(index)])


def _edge_cliffords(seed: int, edge: Edge, m: int, index: int, interleave: bool):
    """Random Cliffords C_1..C_m and the inverting C_{m+1} for one edge."""
    rng = _sequence_rng(seed, edge, m, index)
    cliffords = [random_clifford(2, rng) for _ in range(m)]
    total = identity_element(2).tableau
    cx_tab = tableau_of_gate(cx(0, 1), 2)
    for c in cliffords:
        total = total.then(c.tableau)
        if interleave:
            total = total.then(cx_tab)
    return cliffords, realize(total.inverse())


def _shift(ops: Iterable[GateInstance], offset: int) -> list[GateInstance]:
    return [GateInstance(op.name, tuple(q + offset for q in op.qubits), op.param) for op in ops]


def _build_parallel(edges: Sequence[Edge], m: int, index: int, interleave: bool, seed: int) -> Circuit:
    """One RB circuit running the same-length sequence on every edge in lockstep."""
    nq = 2 * len(edges)
    everything = tuple(range(nq))
    per_edge = [_edge_cliffords(seed, e, m, index, interleave) for e in edges]
    ops: list[GateInstance] = []
    for step in range(m):
        for j, (cliffords, _) in enumerate(per_edge):
            ops += _shift(cliffords[step].ops, 2 * j)
        ops.append(barrier(*everything))
        if interleave:
            ops += [cx(2 * j, 2 * j + 1) for j in range(len(edges))]
            ops.append(barrier(*everything))
    for j, (_, inverse) in enumerate(per_edge):
        ops += _shift(inverse.ops, 2 * j)
    layout = tuple(q for e in edges for q in e)
    return Circuit.from_ops(nq, ops, layout=layout, interleaved_cx=m if interleave else 0)


def build_irb(
    edge: Edge,
    lengths: Sequence[int] = DEFAULT_LENGTHS,
    k: int = 10,
    interleave: bool = True,
    seed: int = 0,
) -> RbSequenceSet:
    """Isolated two-qubit RB on ``edge``; with ``interleave`` a cx follows every Clifford.

    The reference and interleaved sets share their random Cliffords for a given
    (seed, edge, m, index), which keeps the ratio of their decays low-variance.
    """
    if not lengths or k < 1:
        raise ValueError("need at least one length and k >= 1")
    edge = tuple(edge)
    out = RbSequenceSet(tuple(lengths), k, edge if interleave else None, (edge,))
    for m in lengths:
        for i in range(k):
            out.circuits[(m, i)] = _build_parallel([edge], m, i, interleave, seed)
    return out


def build_srb(
    edges: Sequence[Edge],
    lengths: Sequence[int] = DEFAULT_LENGTHS,
    k: int = 10,
    interleave: bool = True,
    seed: int = 0,
) -> RbSequenceSet:
    """Simultaneous RB on several disjoint edges with aligned sequence lengths.

    Barriers after every Clifford step force the interleaved cx gates of all
    edges into one DAG layer, which is where crosstalk multipliers apply.
    """
    edges = tuple(tuple(e) for e in edges)
    used = [q for e in edges for q in e]
    if len(set(used)) != len(used):
        raise ValueError(f"SRB edges must be disjoint: {edges}")
    out = RbSequenceSet(tuple(lengths), k, edges[0] if interleave else None, edges)
    for m in lengths:
        for i in range(k):
            out.circuits[(m, i)] = _build_parallel(edges, m, i, interleave, seed)
    return out


# -- fitting -----------------------------------------------------------------

def epc_from_alpha(alpha: float, n: int) -> float:
    """Error per Clifford from the depolarizing parameter."""
    return 1 - alpha - (1 - alpha) / 2**n


def irb_gate_epc(alpha_ref: float, alpha_int: float, n: int = 2) -> float:
    """Interleaved gate error (d-1)/d * (1 - alpha_int/alpha_ref)."""
    d = 2**n
    return (d - 1) / d * (1 - alpha_int / alpha_ref)


@dataclass
class DecayCurve:
    points: list[tuple[float, float]]
    A0: float
    alpha: float
    B0: float
    epc: float
    n: int
    rms: float
    alpha_stderr: float = math.nan
    fixed_asymptote: bool = False

    def model(self, m):
        return self.A0 * self.alpha ** np.asarray(m, dtype=float) + self.B0


def _decay(m, a, alpha, b):
    return a * alpha**m + b


def fit_decay(points: Iterable[Sequence[float]], n: int = 2, fix_asymptote: bool | None = None) -> DecayCurve:
    """Least-squares fit of A0 * alpha**m + B0 to (m, survival[, stderr]) points.

    Shallow decays leave A0, B0 and alpha nearly degenerate and a free fit then
    trades alpha against B0. With ``fix_asymptote=None`` both the free and the
    B0 = 1/2**n models are fitted and the free asymptote is kept only when it
    lowers the residual significantly (p < 0.001): a chi-square test when every
    point carries a standard error, a nested F test otherwise.
    ``True``/``False`` force either model.
    """
    raw = sorted(tuple(float(v) for v in p) for p in points)
    m = np.array([p[0] for p in raw])
    y = np.array([p[1] for p in raw])
    se = np.array([p[2] for p in raw]) if raw and all(len(p) > 2 for p in raw) else None
    if se is not None and not np.all(se > 0):
        se = None
    if len(np.unique(m)) < 3:
        raise FitError("need at least 3 distinct sequence lengths")
    if np.any((y < 0) | (y > 1)):
        raise FitError("survival probabilities must lie in [0, 1]")
    b0 = 1.0 / 2**n
    a0 = float(np.clip(y[0] - b0, 1e-3, 1.0))
    above = y - b0 > 1e-6
    if above.sum() >= 2:
        slope = np.polyfit(m[above], np.log(y[above] - b0), 1)[0]
        alpha0 = float(np.clip(math.exp(slope), 1e-3, 1 - 1e-9))
    else:
        alpha0 = 0.5

    def fit(f, p0, lo, hi):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            return curve_fit(f, m, y, p0=p0, sigma=se, absolute_sigma=se is not None, bounds=(lo, hi), maxfev=20000)

    def free_fit():
        return fit(_decay, [a0, alpha0, b0], [0, 0, 0], [1, 1, 1])

    def pinned_fit():
        popt, pcov = fit(lambda mm, a, al: _decay(mm, a, al, b0), [a0, alpha0], [0, 0], [1, 1])
        full = np.zeros((3, 3))
        full[:2, :2] = pcov
        return np.array([popt[0], popt[1], b0]), full

    def rss(p):
        r = y - _decay(m, *p)
        return float(np.sum((r if se is None else r / se) ** 2))

    try:
        if fix_asymptote:
            (popt, pcov), fixed = pinned_fit(), True
        elif fix_asymptote is False:
            (popt, pcov), fixed = free_fit(), False
        else:
            free, free_cov = free_fit()
            popt, pcov = pinned_fit()
            fixed = True
            gain = rss(popt) - rss(free)
            if se is not None:
                p_value = chi2.sf(gain, 1)
            elif len(m) > 3:
                dof = len(m) - 3
                p_value = f_dist.sf(gain / max(rss(free) / dof, 1e-300), 1, dof)
            else:
                p_value = 1.0
            if p_value < 1e-3:
                popt, pcov, fixed = free, free_cov, False
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"decay fit did not converge: {exc}") from None

    A, alpha, B = (float(v) for v in popt)
    if alpha >= 1 - 1e-9 or alpha <= 1e-9:
        raise FitError(f"alpha={alpha:.6g} pinned at a bound")
    resid = y - _decay(m, A, alpha, B)
    stderr = math.sqrt(pcov[1, 1]) if np.isfinite(pcov[1, 1]) and pcov[1, 1] >= 0 else math.nan
    return DecayCurve(
        [(p[0], p[1]) for p in raw], A, alpha, B, epc_from_alpha(alpha, n), n, float(np.sqrt(np.mean(resid**2))), stderr, fixed
    )


# -- execution ---------------------------------------------------------------

def _marginal_zero(counts: dict[str, int], qubits: Sequence[int]) -> int:
    return sum(v for k, v in counts.items() if all(k[q] == "0" for q in qubits))


def survival_points(
    seqs: RbSequenceSet, spec: NoiseSpec, shots: int, seed: int = 0
) -> dict[Edge, list[tuple[int, float, float]]]:
    """(m, mean ground-state survival, standard error) per length, one list per edge.

    The standard error is the spread across the k sequences, floored at the
    binomial shot noise of the mean.
    """
    vals = {e: {m: [] for m in seqs.lengths} for e in seqs.edges}
    for (m, i), circ in seqs.items():
        res = run_noisy(circ, None, spec, shots, seed=[int(seed), int(m), int(i), *circ.layout])
        for j, e in enumerate(seqs.edges):
            vals[e][m].append(_marginal_zero(res.counts, (2 * j, 2 * j + 1)) / shots)
    out = {}
    for e in seqs.edges:
        rows = []
        for m in seqs.lengths:
            v = np.array(vals[e][m])
            mean = float(v.mean())
            spread = float(v.var(ddof=1)) if v.size > 1 else 0.0
            shot_var = max(mean * (1 - mean), 1.0 / shots) / shots
            rows.append((m, mean, math.sqrt(max(spread, shot_var) / v.size)))
        out[e] = rows
    return out


@dataclass
class IrbResult:
    edges: tuple[Edge, ...]
    reference: dict[Edge, DecayCurve]
    interleaved: dict[Edge, DecayCurve]
    gate_epc: dict[Edge, float]


def run_irb(
    edges: Sequence[Edge],
    spec: NoiseSpec,
    lengths: Sequence[int] = DEFAULT_LENGTHS,
    k: int = 10,
    shots: int = 10_000,
    seed: int = 0,
) -> IrbResult:
    """Reference + interleaved RB on one edge (isolated) or several (simultaneous)."""
    edges = tuple(tuple(e) for e in edges)
    ref = build_srb(edges, lengths, k, interleave=False, seed=seed)
    inter = build_srb(edges, lengths, k, interleave=True, seed=seed)
    ref_pts = survival_points(ref, spec, shots, seed)
    int_pts = survival_points(inter, spec, shots, seed + 1)
    r_curves, i_curves, gate = {}, {}, {}
    for e in edges:
        r_curves[e] = fit_decay(ref_pts[e], 2)
        i_curves[e] = fit_decay(int_pts[e], 2)
        gate[e] = irb_gate_epc(r_curves[e].alpha, i_curves[e].alpha, 2)
    return IrbResult(edges, r_curves, i_curves, gate)


@dataclass
class Characterization:
    table: CrosstalkTable
    independent: dict[Edge, float]
    ratios: dict[tuple[Edge, Edge], float]
    rows: list[tuple[Edge, Edge | None, str, int, float]]
    failures: dict[str, str] = field(default_factory=dict)

    def worst(self) -> tuple[tuple[Edge, Edge], float] | None:
        if not self.ratios:
            return None
        key = max(self.ratios, key=self.ratios.get)
        return key, self.ratios[key]


def characterize_crosstalk(
    device: DeviceModel,
    spec: NoiseSpec,
    lengths: Sequence[int] = DEFAULT_LENGTHS,
    k: int = 10,
    shots: int = 10_000,
    seed: int = 0,
    edges: Iterable[Edge] | None = None,
    pairs: Iterable[tuple[Edge, Edge]] | None = None,
    allow_partial: bool = False,
) -> Characterization:
    """Independent EPC per edge by isolated IRB, conditional EPC per one-hop pair by SRB.

    ``spec`` supplies the execution backend (normally ``xtalk_enabled`` on a
    device carrying the ground-truth table). ``edges`` restricts the edges
    measured; ``pairs`` restricts the simultaneous experiments (unordered pairs,
    both directions are measured at once).
    """
    all_pairs = {tuple(sorted(p)) for p in one_hop_pairs(device.coupling)}
    keep = None if edges is None else {norm_edge(e) for e in edges}
    for e in keep or ():
        device.cx_cal(e)
    if pairs is None:
        todo = sorted(p for p in all_pairs if keep is None or p[0] in keep or p[1] in keep)
    else:
        todo = sorted({tuple(sorted((norm_edge(a), norm_edge(b)))) for a, b in pairs})
        for a, b in todo:
            if (a, b) not in all_pairs:
                raise ValueError(f"{a}|{b} is not a one-hop pair")
    if keep is None:
        keep = set(device.coupling.edges) if pairs is None else {e for p in todo for e in p}
    needed = sorted(keep | {e for p in todo for e in p})

    rows = []
    failures: dict[str, str] = {}
    independent: dict[Edge, float] = {}

    def record(res: IrbResult, partner: dict[Edge, Edge | None]):
        for e in res.edges:
            for kind, curve in (("reference", res.reference[e]), ("interleaved", res.interleaved[e])):
                for m, y in curve.points:
                    rows.append((e, partner[e], kind, int(m), y))

    for e in needed:
        try:
            res = run_irb([e], spec, lengths, k, shots, seed)
        except FitError as exc:
            failures[f"edge {e}"] = str(exc)
            if not allow_partial:
                raise CharacterizationError(f"edge {e}", exc) from exc
            continue
        independent[e] = res.gate_epc[e]
        record(res, {e: None})

    conditional: dict[tuple[Edge, Edge], float] = {}
    ratios: dict[tuple[Edge, Edge], float] = {}
    for a, b in todo:
        if a not in independent or b not in independent:
            continue
        try:
            res = run_irb([a, b], spec, lengths, k, shots, seed)
        except FitError as exc:
            failures[f"pair {a}|{b}"] = str(exc)
            if not allow_partial:
                raise CharacterizationError(f"pair {a}|{b}", exc) from exc
            continue
        record(res, {a: b, b: a})
        for g1, g2 in ((a, b), (b, a)):
            if g1 not in keep:
                continue
            conditional[(g1, g2)] = res.gate_epc[g1]
            ratios[(g1, g2)] = res.gate_epc[g1] / independent[g1]
    table = CrosstalkTable(conditional, independent)
    return Characterization(table, independent, ratios, rows, failures)
