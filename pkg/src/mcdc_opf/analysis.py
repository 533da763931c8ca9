"""Solve, compare and sweep studies built on the model and the oracle."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

from .formulation import (VariableMap, build_balanced, build_mcdc, build_single_conductor,
                          extract_solution, flat_start)
from .formulation.solution import Solution
from .network import Configuration, DcTerminal, Network, with_load
from .nlp.ipm import SolveResult, SolverOptions, solve
from .oracle import AuditReport, audit, equal_split_embedding

BUILDERS = {"mcdc": build_mcdc, "balanced": build_balanced,
            "single-conductor": build_single_conductor}

# a neutral voltage within this distance of its limit counts as binding
BINDING_TOL = 1e-6


def solver_options(case_options: dict | None = None, **overrides) -> SolverOptions:
    """:class:`SolverOptions` from a case file's ``options`` plus overrides.

    Unknown keys (such as ``sweep``) are ignored; ``None`` overrides are
    dropped.
    """
    names = {f.name for f in fields(SolverOptions)}
    kw = {k: v for k, v in (case_options or {}).items() if k in names}
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return SolverOptions(**kw)


@dataclass
class SolveOutcome:
    network: Network
    vmap: VariableMap
    result: SolveResult
    solution: Solution

    @property
    def ok(self) -> bool:
        return self.result.ok


def solve_network(network: Network, model: str = "mcdc",
                  options: SolverOptions | None = None) -> SolveOutcome:
    """Build the chosen model, solve from a flat start and extract the result.

    ``model`` is ``"mcdc"``, ``"balanced"`` (raises NotBalanceable for an
    unbalanced network) or ``"single-conductor"`` (no balance check).
    """
    prob, vmap = BUILDERS[model](network)
    x0, _ = flat_start(vmap)
    res = solve(prob, x0, options)
    sol = extract_solution(vmap, res.x, res.lam, status=res.status.value,
                           objective=res.objective, kkt=res.kkt, iterations=res.iterations,
                           wall_time=res.wall_time)
    return SolveOutcome(vmap.network, vmap, res, sol)


# ---------------------------------------------------------------------------
# balanced comparison


@dataclass
class Comparison:
    mcdc: SolveOutcome
    balanced: SolveOutcome
    objective_gap: float        # relative
    max_dispatch_delta: float
    max_neutral_voltage: float
    max_pole_split_error: float
    max_dc_voltage_delta: float

    @property
    def converged(self) -> bool:
        return self.mcdc.ok and self.balanced.ok

    def to_dict(self) -> dict:
        return {"objective_mcdc": self.mcdc.solution.objective,
                "objective_balanced": self.balanced.solution.objective,
                "objective_gap_rel": self.objective_gap,
                "max_dispatch_delta": self.max_dispatch_delta,
                "max_neutral_voltage": self.max_neutral_voltage,
                "max_pole_split_error": self.max_pole_split_error,
                "max_dc_voltage_delta": self.max_dc_voltage_delta,
                "status_mcdc": self.mcdc.result.status.value,
                "status_balanced": self.balanced.result.status.value}


def compare_balanced(network: Network, options: SolverOptions | None = None) -> Comparison:
    """Solve a balanced network with both models and measure the differences.

    The pole-split error is the largest deviation of a pole's AC or DC power
    from half of the lumped station power.
    """
    bal = solve_network(network, "balanced", options)
    mc = solve_network(network, "mcdc", options)
    a, b = mc.solution, bal.solution
    gap = abs(a.objective - b.objective) / max(abs(b.objective), 1e-12)
    dispatch = max((abs(a.generators[g]["p"] - b.generators[g]["p"]) for g in a.generators),
                   default=0.0)
    neutral = max((abs(v) for v in a.neutral_voltages().values()), default=0.0)
    split = 0.0
    for cid, entry in a.converters.items():
        lump = b.converters[cid]["poles"]["positive"]
        n = len(entry["poles"])
        for p in entry["poles"].values():
            for f in ("p_ac", "q_ac", "p_dc"):
                split = max(split, abs(p[f] - lump[f] / n))
    dv = 0.0
    for bus, ts in a.dc_terminals.items():
        u = b.dc_terminals[bus]["positive"]
        dv = max(dv, abs(ts.get("positive", u) - u), abs(ts.get("negative", -u) + u))
    return Comparison(mc, bal, gap, dispatch, neutral, split, dv)


@dataclass
class EmbeddingStudy:
    mcdc: SolveOutcome
    single: SolveOutcome
    embedded: Solution
    embedded_audit: AuditReport
    mcdc_audit: AuditReport

    def tapped_kcl(self) -> dict[tuple[str, str], float]:
        return {k: v for k, v in self.embedded_audit.kcl().items()
                if abs(v) > self.embedded_audit.tol}


def embedding_study(network: Network, options: SolverOptions | None = None,
                    balanced_source: Network | None = None, tol: float = 1e-6) -> EmbeddingStudy:
    """Solve ``network`` with the multi-conductor model and audit the point a
    single-wire tool would propose.

    The single-wire solution comes from ``balanced_source`` (a balanced
    counterpart) when given, otherwise from the single-conductor view of
    ``network`` itself.
    """
    mc = solve_network(network, "mcdc", options)
    if balanced_source is None:
        single = solve_network(network, "single-conductor", options)
    else:
        single = solve_network(balanced_source, "balanced", options)
    emb = equal_split_embedding(single.solution, network)
    mc_audit = audit(network, mc.solution, tol)
    return EmbeddingStudy(mc, single, emb, audit(network, emb, tol), mc_audit)


# ---------------------------------------------------------------------------
# load sweep


@dataclass
class SweepRow:
    step: int
    load: float
    status: str
    objective: float | None
    neutral: dict[str, float]
    binding: list[str]
    generators: dict[str, float]
    iterations: int
    wall_time: float
    audit_max: float | None = None

    @property
    def ok(self) -> bool:
        return self.status == "Optimal"


@dataclass
class SweepResult:
    case: str
    load_id: str
    generator: str | None
    rows: list[SweepRow] = field(default_factory=list)
    base_mva: float = 100.0

    def increments(self, generator: str | None = None) -> list[float | None]:
        """Per-step change of a generator's output (``None`` for the first
        row and around failed steps)."""
        g = generator or self.generator
        out: list[float | None] = [None]
        for a, b in zip(self.rows, self.rows[1:]):
            out.append(b.generators[g] - a.generators[g] if a.ok and b.ok else None)
        return out

    def first_binding_step(self, count: int = 1) -> int | None:
        """Index of the first row at which at least ``count`` distinct
        neutral terminals are binding."""
        for k, r in enumerate(self.rows):
            if r.ok and len(r.binding) >= count:
                return k
        return None


def sweep_points(start: float, stop: float, step: float) -> list[float]:
    if step <= 0:
        raise ValueError("step must be positive")
    if stop < start:
        raise ValueError("the sweep end lies below its start")
    n = int((stop - start) / step + 1e-9)
    return [round(start + k * step, 12) for k in range(n + 1)]


def default_workers() -> int:
    """Sweep concurrency: MCDC_OPF_THREADS if set, else 1."""
    raw = os.environ.get("MCDC_OPF_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"MCDC_OPF_THREADS must be an integer, got {raw!r}") from None


def _binding(net: Network, sol: Solution) -> list[str]:
    out = []
    for bus in net.dc_buses:
        if DcTerminal.NEUTRAL in bus.terminals:
            u = sol.dc_terminals[bus.id]["neutral"]
            if abs(u) >= bus.vmax_neutral - BINDING_TOL:
                out.append(bus.id)
    return out


def sweep(network: Network, load_id: str, start: float, stop: float, step: float, *,
          generator: str | None = None, options: SolverOptions | None = None,
          workers: int | None = None, audit_tol: float | None = 1e-6) -> SweepResult:
    """Solve the multi-conductor model at each load level.

    Failed steps are recorded with their status and the sweep carries on.
    Rows are ordered by step whatever the completion order.
    """
    if load_id not in network.load_map:
        raise KeyError(f"unknown load {load_id!r}")
    if generator is not None and generator not in network.generator_map:
        raise KeyError(f"unknown generator {generator!r}")
    pts = sweep_points(start, stop, step)

    def run(k: int) -> SweepRow:
        net = with_load(network, load_id, pts[k])
        try:
            out = solve_network(net, "mcdc", options)
        except Exception as exc:  # a malformed step must not end the sweep
            return SweepRow(k, pts[k], f"Error: {exc}", None, {}, [], {}, 0, 0.0)
        sol = out.solution
        amax = None
        if audit_tol is not None and out.ok:
            amax = audit(net, sol, audit_tol).max_residual
        return SweepRow(k, pts[k], out.result.status.value, sol.objective,
                        sol.neutral_voltages(), _binding(net, sol), sol.dispatch(),
                        out.result.iterations, out.result.wall_time, amax)

    n = min(workers or default_workers(), len(pts))
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            rows = list(ex.map(run, range(len(pts))))
    else:
        rows = [run(k) for k in range(len(pts))]
    return SweepResult(network.name, load_id, generator, sorted(rows, key=lambda r: r.step),
                       network.base_mva)


def loop_flow_converters(sol: Solution) -> list[str]:
    """Stations whose two poles exchange AC power with opposite signs."""
    out = []
    for cid, entry in sol.converters.items():
        p = [v["p_ac"] for v in entry["poles"].values()]
        if len(p) == 2 and p[0] * p[1] < 0:
            out.append(cid)
    return out


def bipolar_ids(network: Network) -> list[str]:
    return [c.id for c in network.converters if c.configuration is Configuration.BIPOLAR]
