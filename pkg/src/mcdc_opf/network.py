"""Per-unit data model of a hybrid AC/DC grid with explicit DC conductors.

Every DC bus owns up to three terminals (positive, negative, neutral) and
every DC branch up to three conductors.  Converter stations own one or two
poles, each with its own transformer, filter, phase reactor and loss curve.

All quantities are per unit on a single system base (``base_mva``) with the
DC voltage base equal to the AC voltage base (``base_kv``).  Negative
terminal voltages are signed, i.e. a negative pole at nominal voltage sits at
``-1.0``.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property


class DcTerminal(enum.IntEnum):
    """DC terminal / conductor index (1 = positive, 2 = negative, 0 = neutral)."""

    NEUTRAL = 0
    POSITIVE = 1
    NEGATIVE = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: str | int | DcTerminal) -> DcTerminal:
        if isinstance(value, DcTerminal):
            return value
        if isinstance(value, int):
            return cls(value)
        return cls[value.upper()]


class Pole(enum.IntEnum):
    """Converter pole index (1 = positive, 2 = negative)."""

    POSITIVE = 1
    NEGATIVE = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @property
    def terminal(self) -> DcTerminal:
        return DcTerminal(int(self))

    @classmethod
    def parse(cls, value: str | int | Pole) -> Pole:
        if isinstance(value, Pole):
            return value
        if isinstance(value, int):
            return cls(value)
        return cls[value.upper()]


class Configuration(str, enum.Enum):
    BIPOLAR = "bipolar"
    ASYM_MONOPOLE_POSITIVE = "asym_monopole_positive"
    ASYM_MONOPOLE_NEGATIVE = "asym_monopole_negative"
    SYM_MONOPOLE = "sym_monopole"

    @property
    def poles(self) -> frozenset[Pole]:
        return _CONFIG_POLES[self]

    @property
    def terminals(self) -> frozenset[DcTerminal]:
        """DC terminals the configuration connects to."""
        return _CONFIG_TERMINALS[self]

    @property
    def has_neutral(self) -> bool:
        return DcTerminal.NEUTRAL in self.terminals


_CONFIG_POLES = {
    Configuration.BIPOLAR: frozenset({Pole.POSITIVE, Pole.NEGATIVE}),
    Configuration.ASYM_MONOPOLE_POSITIVE: frozenset({Pole.POSITIVE}),
    Configuration.ASYM_MONOPOLE_NEGATIVE: frozenset({Pole.NEGATIVE}),
    Configuration.SYM_MONOPOLE: frozenset({Pole.POSITIVE, Pole.NEGATIVE}),
}

_CONFIG_TERMINALS = {
    Configuration.BIPOLAR: frozenset(DcTerminal),
    Configuration.ASYM_MONOPOLE_POSITIVE: frozenset({DcTerminal.POSITIVE, DcTerminal.NEUTRAL}),
    Configuration.ASYM_MONOPOLE_NEGATIVE: frozenset({DcTerminal.NEGATIVE, DcTerminal.NEUTRAL}),
    Configuration.SYM_MONOPOLE: frozenset({DcTerminal.POSITIVE, DcTerminal.NEGATIVE}),
}


class Grounding(str, enum.Enum):
    NONE = "none"
    RIGID = "rigid"
    RESISTIVE = "resistive"


@dataclass(frozen=True)
class AcBus:
    id: str
    vmin: float = 0.9
    vmax: float = 1.1
    gshunt: float = 0.0
    bshunt: float = 0.0
    is_reference: bool = False


@dataclass(frozen=True)
class AcBranch:
    """Series admittance ``g + j b`` between two AC buses."""

    id: str
    from_bus: str
    to_bus: str
    g: float
    b: float
    rating: float

    @classmethod
    def from_impedance(cls, id: str, from_bus: str, to_bus: str, r: float, x: float,
                       rating: float) -> AcBranch:
        y = 1.0 / complex(r, x)
        return cls(id, from_bus, to_bus, y.real, y.imag, rating)


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    pmin: float
    pmax: float
    qmin: float
    qmax: float
    cost_a: float = 0.0
    cost_b: float = 0.0
    cost_c: float = 0.0

    def cost(self, p: float) -> float:
        return self.cost_a + self.cost_b * p + self.cost_c * p * p


@dataclass(frozen=True)
class Load:
    """Fixed demand at an AC bus, or at a pole terminal of a DC bus.

    A DC load draws ``p`` between its terminal and the bus neutral (ground
    when the bus has no neutral terminal).
    """

    id: str
    p: float
    q: float = 0.0
    ac_bus: str | None = None
    dc_bus: str | None = None
    terminal: DcTerminal | None = None

    @property
    def is_dc(self) -> bool:
        return self.dc_bus is not None


@dataclass(frozen=True)
class DcBus:
    id: str
    terminals: frozenset[DcTerminal] = frozenset(DcTerminal)
    vmin_pole: float = 0.9
    vmax_pole: float = 1.1
    vmax_neutral: float = 0.1

    def terminal_bounds(self, terminal: DcTerminal) -> tuple[float, float]:
        if terminal is DcTerminal.POSITIVE:
            return self.vmin_pole, self.vmax_pole
        if terminal is DcTerminal.NEGATIVE:
            return -self.vmax_pole, -self.vmin_pole
        return -self.vmax_neutral, self.vmax_neutral


@dataclass(frozen=True)
class Conductor:
    r: float
    rating: float


@dataclass(frozen=True)
class DcBranch:
    id: str
    from_bus: str
    to_bus: str
    conductors: dict[DcTerminal, Conductor]

    def __hash__(self) -> int:
        return hash((self.id, self.from_bus, self.to_bus))


@dataclass(frozen=True)
class Transformer:
    g: float
    b: float
    tap: float = 1.0


@dataclass(frozen=True)
class Reactor:
    g: float
    b: float


@dataclass(frozen=True)
class ConverterPole:
    pole: Pole
    smax: float
    pmin_ac: float
    pmax_ac: float
    qmin_ac: float
    qmax_ac: float
    pmin_dc: float
    pmax_dc: float
    imax_ac: float
    imin_dc: float
    imax_dc: float
    vmin_cv: float
    vmax_cv: float
    loss_a: float
    loss_b: float
    loss_c: float
    transformer: Transformer
    filter_b: float
    reactor: Reactor

    def same_parameters(self, other: ConverterPole) -> bool:
        a = dataclasses.asdict(self)
        b = dataclasses.asdict(other)
        a.pop("pole")
        b.pop("pole")
        return a == b


@dataclass(frozen=True)
class ConverterStation:
    id: str
    ac_bus: str
    dc_bus: str
    configuration: Configuration
    poles: tuple[ConverterPole, ...]
    grounding: Grounding = Grounding.NONE
    r_ground: float | None = None

    def pole(self, pole: Pole) -> ConverterPole:
        for p in self.poles:
            if p.pole is pole:
                return p
        raise KeyError(f"converter {self.id} has no {pole.label} pole")

    @property
    def has_neutral(self) -> bool:
        return self.configuration.has_neutral


@dataclass(frozen=True)
class Network:
    """Immutable per-unit network.

    ``single_conductor`` marks the aggregate view produced by
    :func:`derive_balanced_equivalent`: every DC bus then has a single
    (positive) terminal and every converter a single lumped pole.
    """

    base_mva: float = 100.0
    base_kv: float = 345.0
    ac_buses: tuple[AcBus, ...] = ()
    ac_branches: tuple[AcBranch, ...] = ()
    generators: tuple[Generator, ...] = ()
    loads: tuple[Load, ...] = ()
    dc_buses: tuple[DcBus, ...] = ()
    dc_branches: tuple[DcBranch, ...] = ()
    converters: tuple[ConverterStation, ...] = ()
    name: str = ""
    single_conductor: bool = False
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __hash__(self) -> int:
        return hash((self.base_mva, self.base_kv, self.ac_buses, self.ac_branches,
                     self.generators, self.loads, self.dc_buses, self.dc_branches,
                     self.converters, self.name, self.single_conductor))

    @cached_property
    def ac_bus_index(self) -> dict[str, int]:
        return {b.id: k for k, b in enumerate(self.ac_buses)}

    @cached_property
    def dc_bus_index(self) -> dict[str, int]:
        return {b.id: k for k, b in enumerate(self.dc_buses)}

    @cached_property
    def ac_bus_map(self) -> dict[str, AcBus]:
        return {b.id: b for b in self.ac_buses}

    @cached_property
    def dc_bus_map(self) -> dict[str, DcBus]:
        return {b.id: b for b in self.dc_buses}

    @cached_property
    def generator_map(self) -> dict[str, Generator]:
        return {g.id: g for g in self.generators}

    @cached_property
    def load_map(self) -> dict[str, Load]:
        return {m.id: m for m in self.loads}

    @cached_property
    def converter_map(self) -> dict[str, ConverterStation]:
        return {c.id: c for c in self.converters}

    @cached_property
    def dc_branch_map(self) -> dict[str, DcBranch]:
        return {d.id: d for d in self.dc_branches}

    @cached_property
    def ac_branch_map(self) -> dict[str, AcBranch]:
        return {l.id: l for l in self.ac_branches}

    @cached_property
    def gens_at(self) -> dict[str, list[Generator]]:
        out: dict[str, list[Generator]] = defaultdict(list)
        for g in self.generators:
            out[g.bus].append(g)
        return out

    @cached_property
    def ac_loads_at(self) -> dict[str, list[Load]]:
        out: dict[str, list[Load]] = defaultdict(list)
        for m in self.loads:
            if not m.is_dc:
                out[m.ac_bus].append(m)
        return out

    @property
    def dc_loads(self) -> list[Load]:
        return [m for m in self.loads if m.is_dc]

    def dc_terminals(self) -> list[tuple[str, DcTerminal]]:
        """All (bus id, terminal) pairs in a stable order."""
        return [(b.id, t) for b in self.dc_buses for t in sorted(b.terminals)]

    def replace(self, **changes) -> Network:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str

    def __str__(self) -> str:
        return f"{self.entity}: {self.rule}"


class NetworkError(ValueError):
    """Raised when a network fails validation."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        lines = "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(f"{len(self.violations)} network violation(s):\n{lines}")


class NotBalanceable(ValueError):
    """Raised when a network has no balanced single-conductor equivalent."""

    def __init__(self, entity: str, reason: str):
        self.entity = entity
        self.reason = reason
        super().__init__(f"{entity}: {reason}")


def _finite(*values: float) -> bool:
    return all(isinstance(v, (int, float)) and math.isfinite(v) for v in values)


def _components(nodes, edges) -> list[set]:
    parent = {n: n for n in nodes}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        if a in parent and b in parent:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict = defaultdict(set)
    for n in nodes:
        groups[find(n)].add(n)
    return [groups[k] for k in sorted(groups)]


def _duplicates(ids) -> list[str]:
    seen, dup = set(), []
    for i in ids:
        if i in seen and i not in dup:
            dup.append(i)
        seen.add(i)
    return dup


def validate(network: Network) -> list[Violation]:
    """Check type invariants and referential integrity.

    Returns an empty list for a well-formed network; otherwise one
    :class:`Violation` per broken rule.
    """
    out: list[Violation] = []

    def bad(entity: str, rule: str) -> None:
        out.append(Violation(entity, rule))

    if not (_finite(network.base_mva, network.base_kv) and network.base_mva > 0
            and network.base_kv > 0):
        bad("network", "base_mva and base_kv must be positive")
    for label, coll in (("ac_bus", network.ac_buses), ("ac_branch", network.ac_branches),
                        ("generator", network.generators), ("load", network.loads),
                        ("dc_bus", network.dc_buses), ("dc_branch", network.dc_branches),
                        ("converter", network.converters)):
        for d in _duplicates(x.id for x in coll):
            bad(f"{label} {d}", "duplicate id")
    if not network.generators:
        bad("network", "at least one generator is required")

    ac = network.ac_bus_map
    dc = network.dc_bus_map

    for bus in network.ac_buses:
        if not (_finite(bus.vmin, bus.vmax) and 0 < bus.vmin <= bus.vmax):
            bad(f"ac_bus {bus.id}", "requires 0 < vmin <= vmax")
        if not _finite(bus.gshunt, bus.bshunt):
            bad(f"ac_bus {bus.id}", "shunt admittance must be finite")

    for br in network.ac_branches:
        ent = f"ac_branch {br.id}"
        for end in (br.from_bus, br.to_bus):
            if end not in ac:
                bad(ent, f"unknown ac bus {end!r}")
        if br.from_bus == br.to_bus:
            bad(ent, "from_bus equals to_bus")
        if not (_finite(br.rating) and br.rating > 0):
            bad(ent, "rating must be positive")
        if not _finite(br.g, br.b) or (br.g == 0 and br.b == 0):
            bad(ent, "series admittance must be finite and nonzero")

    areas = _components(list(ac), [(br.from_bus, br.to_bus) for br in network.ac_branches])
    for area in areas:
        refs = [b for b in area if ac[b].is_reference]
        if len(refs) != 1:
            name = min(area)
            bad(f"ac_bus {name}",
                f"synchronous area containing {name!r} has {len(refs)} reference buses, expected 1")

    for g in network.generators:
        ent = f"generator {g.id}"
        if g.bus not in ac:
            bad(ent, f"unknown ac bus {g.bus!r}")
        if not _finite(g.pmin, g.pmax, g.qmin, g.qmax, g.cost_a, g.cost_b, g.cost_c):
            bad(ent, "non-finite parameter")
            continue
        if g.pmin > g.pmax:
            bad(ent, "pmin > pmax")
        if g.qmin > g.qmax:
            bad(ent, "qmin > qmax")
        if g.cost_c < 0:
            bad(ent, "cost_c must be nonnegative")

    for m in network.loads:
        ent = f"load {m.id}"
        if not _finite(m.p, m.q):
            bad(ent, "non-finite demand")
        if m.is_dc:
            if m.ac_bus is not None:
                bad(ent, "load attached to both an AC and a DC bus")
            if m.dc_bus not in dc:
                bad(ent, f"unknown dc bus {m.dc_bus!r}")
            elif m.terminal is None or m.terminal not in dc[m.dc_bus].terminals:
                bad(ent, f"terminal {m.terminal} missing at dc bus {m.dc_bus!r}")
            if m.terminal is DcTerminal.NEUTRAL:
                bad(ent, "DC loads attach to a pole terminal, not the neutral")
            if m.q != 0:
                bad(ent, "DC-attached loads must have q = 0")
        elif m.ac_bus not in ac:
            bad(ent, f"unknown ac bus {m.ac_bus!r}")

    for bus in network.dc_buses:
        ent = f"dc_bus {bus.id}"
        if not bus.terminals:
            bad(ent, "no terminals")
        if not (_finite(bus.vmin_pole, bus.vmax_pole, bus.vmax_neutral)
                and 0 < bus.vmin_pole <= bus.vmax_pole and bus.vmax_neutral >= 0):
            bad(ent, "requires 0 < vmin_pole <= vmax_pole and vmax_neutral >= 0")
        if network.single_conductor and bus.terminals != {DcTerminal.POSITIVE}:
            bad(ent, "single-conductor view requires exactly the positive terminal")

    for br in network.dc_branches:
        ent = f"dc_branch {br.id}"
        ends = [e for e in (br.from_bus, br.to_bus)]
        for end in ends:
            if end not in dc:
                bad(ent, f"unknown dc bus {end!r}")
        if br.from_bus == br.to_bus:
            bad(ent, "from_bus equals to_bus")
        if not br.conductors:
            bad(ent, "no conductors")
        for term, cond in br.conductors.items():
            if not (_finite(cond.r, cond.rating) and cond.r > 0 and cond.rating > 0):
                bad(ent, f"{term.label} conductor requires r > 0 and rating > 0")
            for end in ends:
                if end in dc and term not in dc[end].terminals:
                    bad(ent, f"{term.label} conductor but dc bus {end!r} lacks a {term.label} terminal")
        if network.single_conductor and set(br.conductors) != {DcTerminal.POSITIVE}:
            bad(ent, "single-conductor view requires exactly one positive conductor")

    for cs in network.converters:
        ent = f"converter {cs.id}"
        if cs.ac_bus not in ac:
            bad(ent, f"unknown ac bus {cs.ac_bus!r}")
        if cs.dc_bus not in dc:
            bad(ent, f"unknown dc bus {cs.dc_bus!r}")
        poles = [p.pole for p in cs.poles]
        if len(set(poles)) != len(poles):
            bad(ent, "duplicate pole")
        if network.single_conductor:
            if poles != [Pole.POSITIVE]:
                bad(ent, "single-conductor view requires one lumped positive pole")
            if cs.grounding is not Grounding.NONE:
                bad(ent, "single-conductor view has no grounding")
        else:
            if set(poles) != cs.configuration.poles:
                bad(ent, f"configuration {cs.configuration.value} requires poles "
                         f"{sorted(p.label for p in cs.configuration.poles)}")
            if cs.dc_bus in dc:
                missing = cs.configuration.terminals - dc[cs.dc_bus].terminals
                if missing:
                    bad(ent, f"configuration {cs.configuration.value} needs terminals "
                             f"{sorted(t.label for t in missing)} at dc bus {cs.dc_bus!r}")
            if cs.grounding is not Grounding.NONE and not cs.has_neutral:
                bad(ent, "grounding requires a neutral connection")
        if cs.grounding is Grounding.RESISTIVE:
            if not (cs.r_ground is not None and _finite(cs.r_ground) and cs.r_ground > 0):
                bad(ent, "resistive grounding requires r_ground > 0")
        for p in cs.poles:
            pent = f"{ent} pole {p.pole.label}"
            vals = [v for k, v in dataclasses.asdict(p).items()
                    if k not in ("pole", "transformer", "reactor")]
            vals += [p.transformer.g, p.transformer.b, p.transformer.tap, p.reactor.g, p.reactor.b]
            if not _finite(*vals):
                bad(pent, "non-finite parameter")
                continue
            if p.smax <= 0:
                bad(pent, "smax must be positive")
            if p.loss_a < 0 or p.loss_c < 0:
                bad(pent, "loss_a and loss_c must be nonnegative")
            if p.transformer.tap <= 0:
                bad(pent, "transformer tap must be positive")
            for lo, hi, what in ((p.pmin_ac, p.pmax_ac, "p_ac"), (p.qmin_ac, p.qmax_ac, "q_ac"),
                                 (p.pmin_dc, p.pmax_dc, "p_dc"), (p.imin_dc, p.imax_dc, "i_dc"),
                                 (p.vmin_cv, p.vmax_cv, "v_cv")):
                if lo > hi:
                    bad(pent, f"{what} lower bound exceeds upper bound")
            if p.vmin_cv <= 0:
                bad(pent, "vmin_cv must be positive")
            if p.imax_ac <= 0:
                bad(pent, "imax_ac must be positive")

    if not network.single_conductor:
        # every neutral sub-network needs a ground reference
        neutral_buses = [b.id for b in network.dc_buses if DcTerminal.NEUTRAL in b.terminals]
        edges = [(br.from_bus, br.to_bus) for br in network.dc_branches
                 if DcTerminal.NEUTRAL in br.conductors]
        grounded = {cs.dc_bus for cs in network.converters if cs.grounding is not Grounding.NONE}
        for comp in _components(neutral_buses, edges):
            if not comp & grounded:
                bad(f"dc_bus {min(comp)}",
                    "neutral sub-network has no grounded converter (floating neutral)")
    return out


def check(network: Network) -> Network:
    """Return ``network`` unchanged or raise :class:`NetworkError`."""
    violations = validate(network)
    if violations:
        raise NetworkError(violations)
    return network


def _lump_poles(cs: ConverterStation) -> ConverterPole:
    """Parallel aggregate of a station's poles into one lumped pole."""
    ps = cs.poles
    if len(ps) == 1:
        return dataclasses.replace(ps[0], pole=Pole.POSITIVE)
    a, b = ps
    # two poles in parallel: ratings add; with I_tot = 2 I the loss polynomial
    # a + b I + c I^2 per pole becomes 2a + b I_tot + (c/2) I_tot^2 in total
    return ConverterPole(
        pole=Pole.POSITIVE,
        smax=a.smax + b.smax,
        pmin_ac=a.pmin_ac + b.pmin_ac, pmax_ac=a.pmax_ac + b.pmax_ac,
        qmin_ac=a.qmin_ac + b.qmin_ac, qmax_ac=a.qmax_ac + b.qmax_ac,
        pmin_dc=a.pmin_dc + b.pmin_dc, pmax_dc=a.pmax_dc + b.pmax_dc,
        imax_ac=a.imax_ac + b.imax_ac,
        imin_dc=a.imin_dc + b.imin_dc, imax_dc=a.imax_dc + b.imax_dc,
        vmin_cv=max(a.vmin_cv, b.vmin_cv), vmax_cv=min(a.vmax_cv, b.vmax_cv),
        loss_a=a.loss_a + b.loss_a, loss_b=0.5 * (a.loss_b + b.loss_b),
        loss_c=0.25 * (a.loss_c + b.loss_c),
        transformer=Transformer(a.transformer.g + b.transformer.g,
                                a.transformer.b + b.transformer.b, a.transformer.tap),
        filter_b=a.filter_b + b.filter_b,
        reactor=Reactor(a.reactor.g + b.reactor.g, a.reactor.b + b.reactor.b),
    )


def single_conductor_view(network: Network) -> Network:
    """Collapse the DC side to one conductor per branch and one pole per station.

    No balance check is made: this is the view a single-wire tool would take
    of an arbitrary (possibly unbalanced) network.  Pole-pair conductors are
    combined in parallel; a lone pole conductor keeps its resistance.
    """
    if network.single_conductor:
        return network
    pos = DcTerminal.POSITIVE
    buses = tuple(dataclasses.replace(b, terminals=frozenset({pos})) for b in network.dc_buses)
    branches = []
    for br in network.dc_branches:
        poles = [br.conductors[t] for t in (DcTerminal.POSITIVE, DcTerminal.NEGATIVE)
                 if t in br.conductors]
        if not poles:
            # neutral-only branches carry no current in the single-wire picture
            continue
        if len(poles) == 2:
            r = 1.0 / (1.0 / poles[0].r + 1.0 / poles[1].r)
            rating = 2.0 * min(poles[0].rating, poles[1].rating)
        else:
            r, rating = poles[0].r, poles[0].rating
        branches.append(DcBranch(br.id, br.from_bus, br.to_bus, {pos: Conductor(r, rating)}))
    convs = tuple(
        ConverterStation(cs.id, cs.ac_bus, cs.dc_bus, Configuration.ASYM_MONOPOLE_POSITIVE,
                         (_lump_poles(cs),), Grounding.NONE, None)
        for cs in network.converters)
    loads = []
    by_bus: dict[str, list[Load]] = defaultdict(list)
    for m in network.loads:
        if m.is_dc:
            by_bus[m.dc_bus].append(m)
        else:
            loads.append(m)
    for bus_id, ms in by_bus.items():
        loads.append(Load(f"dcload@{bus_id}", sum(m.p for m in ms), 0.0, None, bus_id, pos))
    meta = dict(network.meta)
    meta["aggregate_of"] = network.name
    return dataclasses.replace(network, dc_buses=buses, dc_branches=tuple(branches),
                               converters=convs, loads=tuple(loads), single_conductor=True,
                               name=f"{network.name}[single-conductor]", meta=meta)


def derive_balanced_equivalent(network: Network) -> Network:
    """Single-conductor equivalent of a balanced bipolar network.

    Preconditions: every converter is bipolar with identical poles, every DC
    branch has positive and negative conductors of equal resistance, and DC
    loads come in equal positive/negative pairs.  Raises
    :class:`NotBalanceable` naming the first offending entity.  Applying it
    to an already aggregated network returns that network unchanged.
    """
    if network.single_conductor:
        return network
    for cs in network.converters:
        if cs.configuration is not Configuration.BIPOLAR:
            raise NotBalanceable(f"converter {cs.id}",
                                 f"configuration {cs.configuration.value} is not bipolar")
        p, n = cs.pole(Pole.POSITIVE), cs.pole(Pole.NEGATIVE)
        if not p.same_parameters(n):
            raise NotBalanceable(f"converter {cs.id}", "pole parameters differ")
    for br in network.dc_branches:
        c = br.conductors
        if DcTerminal.POSITIVE not in c or DcTerminal.NEGATIVE not in c:
            raise NotBalanceable(f"dc_branch {br.id}", "missing a pole conductor")
        if c[DcTerminal.POSITIVE].r != c[DcTerminal.NEGATIVE].r:
            raise NotBalanceable(f"dc_branch {br.id}", "pole conductor resistances differ")
    for bus in network.dc_buses:
        if not {DcTerminal.POSITIVE, DcTerminal.NEGATIVE} <= bus.terminals:
            raise NotBalanceable(f"dc_bus {bus.id}", "missing a pole terminal")
    pairs: dict[str, dict[DcTerminal, float]] = defaultdict(lambda: defaultdict(float))
    for m in network.dc_loads:
        pairs[m.dc_bus][m.terminal] += m.p
    for bus_id, by_term in pairs.items():
        if by_term[DcTerminal.POSITIVE] != by_term[DcTerminal.NEGATIVE]:
            raise NotBalanceable(f"dc_bus {bus_id}", "unequal pole loads")
    return single_conductor_view(network)


def pole_outage(network: Network, converter_id: str, pole: Pole | str) -> Network:
    """Network with one pole of a bipolar station out of service.

    The station continues as an asymmetric monopole on the remaining pole.
    """
    pole = Pole.parse(pole)
    convs = []
    for cs in network.converters:
        if cs.id == converter_id:
            if cs.configuration is not Configuration.BIPOLAR:
                raise ValueError(f"converter {cs.id} is not bipolar")
            keep = tuple(p for p in cs.poles if p.pole is not pole)
            cfg = (Configuration.ASYM_MONOPOLE_NEGATIVE if pole is Pole.POSITIVE
                   else Configuration.ASYM_MONOPOLE_POSITIVE)
            cs = dataclasses.replace(cs, configuration=cfg, poles=keep)
        convs.append(cs)
    if converter_id not in network.converter_map:
        raise KeyError(converter_id)
    return dataclasses.replace(network, converters=tuple(convs),
                               name=f"{network.name}[{converter_id} {pole.label} out]")


def conductor_outage(network: Network, branch_id: str, terminal: DcTerminal | str) -> Network:
    """Network with one conductor of a DC branch out of service."""
    terminal = DcTerminal.parse(terminal)
    branches = []
    for br in network.dc_branches:
        if br.id == branch_id:
            conds = {t: c for t, c in br.conductors.items() if t is not terminal}
            br = dataclasses.replace(br, conductors=conds)
        branches.append(br)
    if branch_id not in network.dc_branch_map:
        raise KeyError(branch_id)
    return dataclasses.replace(network, dc_branches=tuple(branches),
                               name=f"{network.name}[{branch_id} {terminal.label} out]")


def with_load(network: Network, load_id: str, p: float, q: float | None = None) -> Network:
    """Copy of ``network`` with one load's demand replaced."""
    if load_id not in network.load_map:
        raise KeyError(load_id)
    loads = tuple(dataclasses.replace(m, p=p, q=m.q if q is None else q) if m.id == load_id else m
                  for m in network.loads)
    return dataclasses.replace(network, loads=loads)
