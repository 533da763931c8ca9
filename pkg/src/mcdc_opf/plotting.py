"""Figures for solve and sweep reports.

Figures are drawn on an Agg canvas directly (no pyplot state), so they can
be produced from worker threads and on machines without a display.
"""

from __future__ import annotations

from pathlib import Path

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

GOLDEN = 0.618


def _figure(width: float = 6.4):
    fig = Figure(figsize=(width, width * GOLDEN))
    FigureCanvasAgg(fig)
    return fig


def _save(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, dpi=120, metadata={"Software": None})
    return path


def plot_pole_powers(sol, path: str | Path) -> Path:
    """Grouped bars of per-pole AC power (MW) for every converter station."""
    fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    ids = list(sol.converters)
    width = 0.38
    for k, (pole, colour) in enumerate((("positive", "tab:red"), ("negative", "tab:blue"))):
        xs, ys = [], []
        for i, cid in enumerate(ids):
            poles = sol.converters[cid]["poles"]
            if pole in poles:
                xs.append(i + (k - 0.5) * width)
                ys.append(poles[pole]["p_ac"] * sol.base_mva)
        ax.bar(xs, ys, width, label=f"{pole} pole", color=colour)
    ax.axhline(0.0, color="black", lw=0.6)
    ax.set_xticks(range(len(ids)))
    ax.set_xticklabels(ids)
    ax.set_ylabel("P AC into converter [MW]")
    ax.set_title(f"{sol.case}: pole powers")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_dc_voltages(sol, path: str | Path) -> Path:
    """DC terminal voltages per bus, one marker series per terminal."""
    fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    buses = list(sol.dc_terminals)
    styles = {"positive": ("tab:red", "^"), "negative": ("tab:blue", "v"),
              "neutral": ("tab:gray", "o")}
    for label, (colour, marker) in styles.items():
        xs = [i for i, b in enumerate(buses) if label in sol.dc_terminals[b]]
        ys = [sol.dc_terminals[buses[i]][label] for i in xs]
        if xs:
            ax.plot(xs, ys, ls="none", marker=marker, color=colour, label=label)
    ax.set_xticks(range(len(buses)))
    ax.set_xticklabels(buses)
    ax.set_xlabel("DC bus")
    ax.set_ylabel("voltage [pu]")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_sweep(result, path: str | Path, neutral_limit: float = 0.1) -> Path:
    """Neutral voltages and generator output against the swept load."""
    fig = _figure(7.0)
    ax_u = fig.add_subplot(2, 1, 1)
    ax_g = fig.add_subplot(2, 1, 2, sharex=ax_u)
    rows = [r for r in result.rows if r.ok]
    loads = [r.load for r in rows]
    buses = sorted({b for r in rows for b in r.neutral})
    for b in buses:
        ax_u.plot(loads, [r.neutral.get(b, float("nan")) for r in rows], marker="o", ms=3,
                  label=f"DC bus {b}")
    for lim in (-neutral_limit, neutral_limit):
        ax_u.axhline(lim, color="black", ls="--", lw=0.7)
    ax_u.set_ylabel("neutral voltage [pu]")
    ax_u.legend(frameon=False, fontsize="small", ncol=2)
    gens = [result.generator] if result.generator else sorted(rows[0].generators) if rows else []
    for g in gens:
        ax_g.plot(loads, [r.generators[g] for r in rows], marker="s", ms=3, label=g)
    ax_g.set_xlabel(f"{result.load_id} [pu]")
    ax_g.set_ylabel("generator output [pu]")
    ax_g.legend(frameon=False, fontsize="small")
    failed = [r.load for r in result.rows if not r.ok]
    for x in failed:
        ax_g.axvline(x, color="tab:red", lw=0.6, alpha=0.5)
    return _save(fig, path)
