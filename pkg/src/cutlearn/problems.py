"""Two-stage problem construction: facility location, network design,
demand scenario sampling, instance parsing, and the extensive-form MIP.

Both problem families keep the second stage feasible for every first-stage
choice by pricing unmet demand (lost sales for facility location, a penalty
arc-free slack for network design), so only optimality cuts ever arise.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .solver_core import EQ, GE, LE, InputError, LpInstance, MipInstance, lp_from_arrays


class ParseError(ValueError):
    """Malformed instance file; message carries a line number."""


@dataclass
class CflpData:
    """Capacitated facility location data.

    transport_costs[i, j] is the unit cost of serving customer j from
    facility i; penalties[j] is the per-unit lost-sale cost.
    """

    capacities: np.ndarray
    setup_costs: np.ndarray
    demands: np.ndarray          # nominal customer demand
    penalties: np.ndarray
    transport_costs: np.ndarray  # (n_facilities, n_customers)

    def __post_init__(self):
        self.capacities = np.asarray(self.capacities, dtype=float)
        self.setup_costs = np.asarray(self.setup_costs, dtype=float)
        self.demands = np.asarray(self.demands, dtype=float)
        self.penalties = np.asarray(self.penalties, dtype=float)
        self.transport_costs = np.asarray(self.transport_costs, dtype=float)
        nf, nc = self.n_facilities, self.n_customers
        if self.setup_costs.shape != (nf,):
            raise InputError("setup_costs shape mismatch")
        if self.penalties.shape != (nc,):
            raise InputError("penalties shape mismatch")
        if self.transport_costs.shape != (nf, nc):
            raise InputError(
                f"transport_costs must be {nf}x{nc}, got {self.transport_costs.shape}")
        for name, arr in [("capacities", self.capacities),
                          ("setup_costs", self.setup_costs),
                          ("demands", self.demands),
                          ("penalties", self.penalties),
                          ("transport_costs", self.transport_costs)]:
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise InputError(f"{name} must be finite and nonnegative")

    @property
    def n_facilities(self):
        return self.capacities.size

    @property
    def n_customers(self):
        return self.demands.size


@dataclass
class CmndData:
    """Fixed-charge multicommodity network design data.

    Arcs are (tail, head) node pairs; each commodity routes its demand from
    an origin to a destination.  unit_costs[a, k] is the routing cost of
    commodity k on arc a.  penalty is the per-unit cost of unmet demand.
    """

    n_nodes: int
    tails: np.ndarray
    heads: np.ndarray
    capacities: np.ndarray
    fixed_costs: np.ndarray
    origins: np.ndarray
    destinations: np.ndarray
    demands: np.ndarray          # nominal commodity demand
    unit_costs: np.ndarray       # (n_arcs, n_commodities)
    penalty: float

    def __post_init__(self):
        self.tails = np.asarray(self.tails, dtype=int)
        self.heads = np.asarray(self.heads, dtype=int)
        self.capacities = np.asarray(self.capacities, dtype=float)
        self.fixed_costs = np.asarray(self.fixed_costs, dtype=float)
        self.origins = np.asarray(self.origins, dtype=int)
        self.destinations = np.asarray(self.destinations, dtype=int)
        self.demands = np.asarray(self.demands, dtype=float)
        self.unit_costs = np.asarray(self.unit_costs, dtype=float)
        na, nk = self.n_arcs, self.n_commodities
        for name, arr in [("tails", self.tails), ("heads", self.heads)]:
            if np.any(arr < 0) or np.any(arr >= self.n_nodes):
                raise InputError(f"{name}: arc endpoint out of range")
        for name, arr in [("origins", self.origins), ("destinations", self.destinations)]:
            if np.any(arr < 0) or np.any(arr >= self.n_nodes):
                raise InputError(f"{name}: node index out of range")
        if np.any(self.origins == self.destinations):
            raise InputError("commodity origin equals destination")
        if self.unit_costs.shape != (na, nk):
            raise InputError(f"unit_costs must be {na}x{nk}")
        if self.penalty <= 0:
            raise InputError("penalty must be positive")
        for name, arr in [("capacities", self.capacities),
                          ("fixed_costs", self.fixed_costs),
                          ("demands", self.demands),
                          ("unit_costs", self.unit_costs)]:
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise InputError(f"{name} must be finite and nonnegative")

    @property
    def n_arcs(self):
        return self.tails.size

    @property
    def n_commodities(self):
        return self.demands.size


def default_cmnd_penalty(unit_costs):
    """1e4 times the largest arc unit cost (floor of 1.0 for all-zero costs)."""
    top = float(np.max(unit_costs, initial=0.0))
    return 1e4 * max(top, 1e-4)


@dataclass
class ScenarioSet:
    """Sampled demand realizations with occurrence probabilities."""

    demands: np.ndarray        # (n_scenarios, dim)
    probabilities: np.ndarray
    seed: int | None = None
    sigma_ratio: float | None = None

    def __post_init__(self):
        self.demands = np.atleast_2d(np.asarray(self.demands, dtype=float))
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.probabilities.shape != (self.demands.shape[0],):
            raise InputError("one probability per scenario required")
        if abs(self.probabilities.sum() - 1.0) > 1e-12:
            raise InputError("probabilities must sum to 1")
        if np.any(self.demands < 0) or np.any(self.probabilities < 0):
            raise InputError("demands and probabilities must be nonnegative")

    @property
    def n_scenarios(self):
        return self.demands.shape[0]

    def to_csv(self, fh):
        writer = csv.writer(fh)
        writer.writerow([f"d{j}" for j in range(self.demands.shape[1])]
                        + ["probability"])
        for row, p in zip(self.demands, self.probabilities):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(p))])

    @classmethod
    def from_csv(cls, fh):
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-1] != "probability":
            raise ParseError("scenario CSV needs a header ending in 'probability'")
        demands, probs = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
            demands.append(values[:-1])
            probs.append(values[-1])
        if not demands:
            raise ParseError("scenario CSV contains no scenarios")
        return cls(np.array(demands), np.array(probs))


def sample_scenarios(nominal, sigma_ratio, count, seed):
    """Independent Normal(nominal, sigma_ratio*nominal) draws per component,
    clamped at zero, with uniform probabilities."""
    nominal = np.asarray(nominal, dtype=float)
    if sigma_ratio < 0:
        raise InputError("sigma_ratio must be nonnegative")
    if count <= 0:
        raise InputError("scenario count must be positive")
    rng = np.random.default_rng(seed)
    draws = rng.normal(loc=nominal, scale=sigma_ratio * nominal,
                       size=(count, nominal.size))
    draws = np.maximum(draws, 0.0)
    probs = np.full(count, 1.0 / count)
    return ScenarioSet(draws, probs, seed=seed, sigma_ratio=sigma_ratio)


# ---------------------------------------------------------------------------
# generic two-stage container
# ---------------------------------------------------------------------------

@dataclass
class ScenarioRecourse:
    """One scenario's second stage: min q y  s.t.  W y (rel) h - T x, y >= 0."""

    q: np.ndarray
    W: np.ndarray
    T: np.ndarray
    h: np.ndarray
    relations: list
    probability: float


@dataclass
class TwoStageProblem:
    first_stage_costs: np.ndarray
    scenarios: list
    theta_lower_bounds: np.ndarray = None
    complete_recourse: bool = True

    def __post_init__(self):
        self.first_stage_costs = np.asarray(self.first_stage_costs, dtype=float)
        n1 = self.n_binary
        m2, n2 = self.scenarios[0].W.shape
        for s in self.scenarios:
            if s.W.shape != (m2, n2) or s.T.shape != (m2, n1) or s.h.shape != (m2,):
                raise InputError("scenario recourse dimensions are inconsistent")
            if s.q.shape != (n2,):
                raise InputError("recourse cost dimension mismatch")
        total_p = sum(s.probability for s in self.scenarios)
        if abs(total_p - 1.0) > 1e-9:
            raise InputError("scenario probabilities must sum to 1")
        if self.theta_lower_bounds is None:
            self.theta_lower_bounds = np.zeros(len(self.scenarios))
        else:
            self.theta_lower_bounds = np.asarray(self.theta_lower_bounds, dtype=float)
        if self.theta_lower_bounds.shape != (len(self.scenarios),):
            raise InputError("one theta lower bound per scenario required")

    @property
    def n_binary(self):
        return self.first_stage_costs.size

    @property
    def n_scenarios(self):
        return len(self.scenarios)

    @property
    def probabilities(self):
        return np.array([s.probability for s in self.scenarios])

    def recourse_lp(self, scenario_index, x):
        """The scenario's second-stage LP at a fixed first-stage vector."""
        s = self.scenarios[scenario_index]
        rhs = s.h - s.T @ np.asarray(x, dtype=float)
        if not hasattr(s, "_y_lower"):
            s._y_lower = np.zeros(s.q.size)
            s._y_upper = np.full(s.q.size, np.inf)
        return lp_from_arrays(s.q, s.W, s.relations, rhs, s._y_lower, s._y_upper)


def build_cflp(data: CflpData, scenarios: ScenarioSet) -> TwoStageProblem:
    """Two-stage facility location.

    Second-stage variables are shipments y[i, j] (flattened row-major) then
    lost-sale slacks per customer.  Rows: per-facility capacity
    (sum_j y_ij - u_i x_i <= 0), then per-customer demand
    (sum_i y_ij + alpha_j >= d_j).
    """
    nf, nc = data.n_facilities, data.n_customers
    if scenarios.demands.shape[1] != nc:
        raise InputError(
            f"scenario demand dimension {scenarios.demands.shape[1]} != {nc} customers")
    n2 = nf * nc + nc
    m2 = nf + nc
    W = np.zeros((m2, n2))
    T = np.zeros((m2, nf))
    relations = []
    for i in range(nf):
        W[i, i * nc:(i + 1) * nc] = 1.0
        T[i, i] = -data.capacities[i]     # h - Tx puts +u_i x_i on the rhs
        relations.append(LE)
    for j in range(nc):
        W[nf + j, j:nf * nc:nc] = 1.0
        W[nf + j, nf * nc + j] = 1.0
        relations.append(GE)
    q = np.concatenate([data.transport_costs.ravel(), data.penalties])
    scenario_list = []
    for w in range(scenarios.n_scenarios):
        h = np.concatenate([np.zeros(nf), scenarios.demands[w]])
        scenario_list.append(ScenarioRecourse(
            q=q, W=W, T=T, h=h, relations=relations,
            probability=float(scenarios.probabilities[w])))
    return TwoStageProblem(data.setup_costs.copy(), scenario_list)


def build_cmnd(data: CmndData, scenarios: ScenarioSet) -> TwoStageProblem:
    """Two-stage multicommodity network design.

    Second-stage variables are flows y[a, k] (flattened arc-major) then
    unmet-demand slacks per (node, commodity).  Flow rows use the
    convention (outflow - inflow) + slack >= supply, with supply +v at the
    commodity's origin and -v at its destination; slacks are charged the
    penalty cost, so every first-stage choice keeps the stage feasible.
    Capacity rows: sum_k y_ak - u_a x_a <= 0.
    """
    na, nk, nn = data.n_arcs, data.n_commodities, data.n_nodes
    if scenarios.demands.shape[1] != nk:
        raise InputError(
            f"scenario demand dimension {scenarios.demands.shape[1]} != {nk} commodities")
    n2 = na * nk + nn * nk
    m2 = nn * nk + na
    W = np.zeros((m2, n2))
    T = np.zeros((m2, na))
    relations = []
    relations.extend([GE] * (nn * nk))
    for a in range(na):
        t, hd = data.tails[a], data.heads[a]
        for k in range(nk):
            col = a * nk + k
            W[t * nk + k, col] += 1.0    # outflow at the tail
            W[hd * nk + k, col] -= 1.0   # inflow at the head
    for i in range(nn):
        for k in range(nk):
            W[i * nk + k, na * nk + i * nk + k] = 1.0
    for a in range(na):
        r = nn * nk + a
        W[r, a * nk:(a + 1) * nk] = 1.0
        T[r, a] = -data.capacities[a]
        relations.append(LE)
    q = np.concatenate([data.unit_costs.ravel(),
                        np.full(nn * nk, data.penalty)])
    scenario_list = []
    for w in range(scenarios.n_scenarios):
        supply = np.zeros(nn * nk)
        for k in range(nk):
            v = scenarios.demands[w, k]
            supply[data.origins[k] * nk + k] += v
            supply[data.destinations[k] * nk + k] -= v
        h = np.concatenate([supply, np.zeros(na)])
        scenario_list.append(ScenarioRecourse(
            q=q, W=W, T=T, h=h, relations=relations,
            probability=float(scenarios.probabilities[w])))
    return TwoStageProblem(data.fixed_costs.copy(), scenario_list)


def extensive_form(problem: TwoStageProblem) -> MipInstance:
    """The monolithic MIP over all scenarios; the testing ground truth."""
    n1 = problem.n_binary
    sizes = [s.q.size for s in problem.scenarios]
    n_total = n1 + sum(sizes)
    objective = np.concatenate(
        [problem.first_stage_costs]
        + [s.probability * s.q for s in problem.scenarios])
    rows = []
    offset = n1
    for s in problem.scenarios:
        m2 = s.W.shape[0]
        for i in range(m2):
            coeffs = np.zeros(n_total)
            coeffs[:n1] = s.T[i]
            coeffs[offset:offset + s.q.size] = s.W[i]
            rows.append((coeffs, s.relations[i], s.h[i]))
        offset += s.q.size
    bounds = [(0.0, 1.0)] * n1 + [(0.0, None)] * (n_total - n1)
    lp = LpInstance(objective, rows, bounds)
    return MipInstance(lp, list(range(n1)))


# ---------------------------------------------------------------------------
# instance ingestion
# ---------------------------------------------------------------------------

class _TokenStream:
    def __init__(self, text):
        self.tokens = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                self.tokens.append((tok, lineno))
        self.pos = 0
        self.last_line = 0

    def next_float(self, what):
        if self.pos >= len(self.tokens):
            raise ParseError(
                f"line {self.last_line}: unexpected end of file while reading {what}")
        tok, lineno = self.tokens[self.pos]
        self.pos += 1
        self.last_line = lineno
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric token {tok!r} for {what}") from None

    def next_int(self, what):
        v = self.next_float(what)
        if v != int(v):
            raise ParseError(f"line {self.last_line}: expected integer for {what}")
        return int(v)


def parse_orlib_cap(text, penalty_factor=10.0) -> CflpData:
    """OR-Library `cap` warehouse-location format.

    Whitespace-separated tokens: `m n`, then m (capacity, fixed cost)
    pairs, then per customer its demand followed by m allocation costs
    (the cost of serving the customer's whole demand), which are converted
    to unit costs by dividing by the demand (0/0 maps to 0).  Lost-sale
    penalties are not part of the format; they default to penalty_factor
    times each customer's largest unit cost.
    """
    if hasattr(text, "read"):
        text = text.read()
    ts = _TokenStream(text)
    m = ts.next_int("facility count")
    n = ts.next_int("customer count")
    if m <= 0 or n <= 0:
        raise ParseError(f"line {ts.last_line}: facility/customer counts must be positive")
    capacities = np.empty(m)
    setups = np.empty(m)
    for i in range(m):
        capacities[i] = ts.next_float(f"capacity of facility {i}")
        setups[i] = ts.next_float(f"fixed cost of facility {i}")
    demands = np.empty(n)
    unit = np.empty((m, n))
    for j in range(n):
        demands[j] = ts.next_float(f"demand of customer {j}")
        for i in range(m):
            alloc = ts.next_float(f"allocation cost ({i}, {j})")
            if demands[j] > 0:
                unit[i, j] = alloc / demands[j]
            elif alloc == 0:
                unit[i, j] = 0.0
            else:
                raise ParseError(
                    f"line {ts.last_line}: customer {j} has zero demand "
                    f"but nonzero allocation cost")
    penalties = penalty_factor * unit.max(axis=0)
    return CflpData(capacities, setups, demands, penalties, unit)


def load_cmnd(source) -> CmndData:
    """Network-design instances from the documented JSON layout:

    {"nodes": int,
     "arcs": [{"tail", "head", "capacity", "fixed_cost"}, ...],
     "commodities": [{"origin", "destination", "demand"}, ...],
     "unit_costs": scalar | per-arc list | per-arc-per-commodity table,
     "penalty_B": optional positive number}
    """
    if hasattr(source, "read"):
        source = source.read()
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}: {exc.msg}") from None
    try:
        n_nodes = int(doc["nodes"])
        arcs = doc["arcs"]
        commodities = doc["commodities"]
        tails = [a["tail"] for a in arcs]
        heads = [a["head"] for a in arcs]
        capacities = [a["capacity"] for a in arcs]
        fixed = [a["fixed_cost"] for a in arcs]
        origins = [k["origin"] for k in commodities]
        destinations = [k["destination"] for k in commodities]
        demands = [k["demand"] for k in commodities]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing or malformed field: {exc}") from None
    na, nk = len(arcs), len(commodities)
    raw = doc.get("unit_costs", 0.0)
    if np.isscalar(raw):
        unit = np.full((na, nk), float(raw))
    else:
        arr = np.asarray(raw, dtype=float)
        if arr.ndim == 1 and arr.size == na:
            unit = np.repeat(arr[:, None], nk, axis=1)
        elif arr.shape == (na, nk):
            unit = arr
        else:
            raise ParseError("unit_costs must be a scalar, a per-arc list, "
                             "or a per-arc-per-commodity table")
    penalty = doc.get("penalty_B")
    if penalty is None:
        penalty = default_cmnd_penalty(unit)
    return CmndData(n_nodes, tails, heads, capacities, fixed,
                    origins, destinations, demands, unit, float(penalty))


def save_cflp(data: CflpData, fh):
    doc = {
        "capacities": data.capacities.tolist(),
        "setup_costs": data.setup_costs.tolist(),
        "demands": data.demands.tolist(),
        "penalties": data.penalties.tolist(),
        "transport_costs": data.transport_costs.tolist(),
    }
    json.dump(doc, fh, indent=2)


def load_cflp(source) -> CflpData:
    """Facility-location instances from the JSON layout written by
    save_cflp (a convenience beside the OR-Library cap format)."""
    if hasattr(source, "read"):
        source = source.read()
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}: {exc.msg}") from None
    try:
        return CflpData(doc["capacities"], doc["setup_costs"], doc["demands"],
                        doc["penalties"], doc["transport_costs"])
    except KeyError as exc:
        raise ParseError(f"missing field: {exc}") from None


def save_cmnd(data: CmndData, fh):
    doc = {
        "nodes": int(data.n_nodes),
        "arcs": [{"tail": int(t), "head": int(h), "capacity": float(u),
                  "fixed_cost": float(f)}
                 for t, h, u, f in zip(data.tails, data.heads,
                                       data.capacities, data.fixed_costs)],
        "commodities": [{"origin": int(o), "destination": int(d),
                         "demand": float(v)}
                        for o, d, v in zip(data.origins, data.destinations,
                                           data.demands)],
        "unit_costs": data.unit_costs.tolist(),
        "penalty_B": float(data.penalty),
    }
    json.dump(doc, fh, indent=2)


# ---------------------------------------------------------------------------
# synthetic instance generators (cap-style data at chosen sizes)
# ---------------------------------------------------------------------------

def generate_cflp(n_facilities, n_customers, seed, capacity=5000.0,
                  setup_range=(7500.0, 12500.0), demand_range=(500.0, 1500.0),
                  cost_range=(4.0, 12.0), penalty_factor=10.0) -> CflpData:
    """Random facility-location data shaped like the OR-Library cap sets:
    equal capacities, uniform setup costs, uniform unit transport costs."""
    rng = np.random.default_rng(seed)
    capacities = np.full(n_facilities, float(capacity))
    setups = rng.uniform(*setup_range, n_facilities).round(2)
    demands = rng.uniform(*demand_range, n_customers).round(1)
    unit = rng.uniform(*cost_range, (n_facilities, n_customers)).round(3)
    penalties = penalty_factor * unit.max(axis=0)
    return CflpData(capacities, setups, demands, penalties, unit)


def generate_cmnd(n_nodes, n_arcs, n_commodities, seed, capacity_range=(20.0, 60.0),
                  fixed_range=(50.0, 200.0), demand_range=(5.0, 15.0),
                  cost_range=(1.0, 8.0), penalty=None) -> CmndData:
    """Random strongly-connected network-design data: a directed cycle
    through all nodes plus random extra arcs, commodities on distinct
    origin/destination pairs."""
    rng = np.random.default_rng(seed)
    n_arcs = min(n_arcs, n_nodes * (n_nodes - 1))  # simple directed graph cap
    arcs = set()
    order = rng.permutation(n_nodes)
    for i in range(n_nodes):
        arcs.add((int(order[i]), int(order[(i + 1) % n_nodes])))
    while len(arcs) < n_arcs:
        t, h = rng.integers(0, n_nodes, 2)
        if t != h:
            arcs.add((int(t), int(h)))
    arcs = sorted(arcs)
    na = len(arcs)
    tails = [a[0] for a in arcs]
    heads = [a[1] for a in arcs]
    capacities = rng.uniform(*capacity_range, na).round(1)
    fixed = rng.uniform(*fixed_range, na).round(2)
    origins, destinations = [], []
    for _ in range(n_commodities):
        o, d = rng.choice(n_nodes, size=2, replace=False)
        origins.append(int(o))
        destinations.append(int(d))
    demands = rng.uniform(*demand_range, n_commodities).round(1)
    unit = rng.uniform(*cost_range, (na, n_commodities)).round(3)
    if penalty is None:
        penalty = default_cmnd_penalty(unit)
    return CmndData(n_nodes, tails, heads, capacities, fixed,
                    origins, destinations, demands, unit, float(penalty))
