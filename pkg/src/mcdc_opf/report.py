"""Human-readable tables and file outputs for the command line."""

from __future__ import annotations

from pathlib import Path

from . import _jsonfmt
from .case_io import table_csv, write_solution_csv
from .plotting import plot_dc_voltages, plot_pole_powers, plot_sweep


def aligned(header: list[str], rows: list[list], *, floatfmt: str = ".4f") -> str:
    """Left-aligned text columns; floats with ``floatfmt``, None as '-'."""
    def cell(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return format(v, floatfmt)
        return str(v)

    body = [[cell(v) for v in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines)


def solution_summary(sol) -> str:
    """Objective, dispatch (MW), converter poles (MW) and DC voltages (pu)."""
    mva = sol.base_mva
    parts = [f"case {sol.case}  model {sol.model}  status {sol.status}",
             f"objective {sol.objective:.6f}  iterations {sol.iterations}  "
             f"time {sol.wall_time:.3f} s", ""]
    parts.append(aligned(["generator", "P [MW]", "Q [MVAr]"],
                         [[g, v["p"] * mva, v["q"] * mva] for g, v in sol.generators.items()],
                         floatfmt=".2f"))
    parts.append("")
    rows = []
    for cid, entry in sol.converters.items():
        for pole, p in entry["poles"].items():
            rows.append([cid, pole, p["p_ac"] * mva, p["q_ac"] * mva, p["p_dc"] * mva,
                         p["i_dc"], p["loss"] * mva])
    parts.append(aligned(["converter", "pole", "Pac [MW]", "Qac [MVAr]", "Pdc [MW]",
                          "Idc [pu]", "loss [MW]"], rows, floatfmt=".2f"))
    parts.append("")
    terms = sorted({t for ts in sol.dc_terminals.values() for t in ts},
                   key=["positive", "negative", "neutral"].index)
    parts.append(aligned(["DC bus"] + [f"U {t} [pu]" for t in terms],
                         [[b] + [ts.get(t) for t in terms] for b, ts in sol.dc_terminals.items()]))
    return "\n".join(parts)


def solution_json(sol) -> dict:
    return {"case": sol.case, "model": sol.model, "status": sol.status,
            "objective": sol.objective, "iterations": sol.iterations,
            "wall_time": sol.wall_time, "kkt": sol.kkt}


def write_solve_outputs(sol, out_dir: str | Path, *, figures: bool = True) -> list[Path]:
    """Solution JSON, per-entity CSV tables and figures into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "solution.json"]
    paths[0].write_text(sol.to_json(), encoding="utf-8")
    paths += write_solution_csv(sol, out)
    if figures:
        paths.append(plot_pole_powers(sol, out / "pole_powers.png"))
        paths.append(plot_dc_voltages(sol, out / "dc_voltages.png"))
    return paths


def comparison_table(cmp) -> str:
    d = cmp.to_dict()
    rows = [["objective (mcdc)", d["objective_mcdc"]],
            ["objective (balanced)", d["objective_balanced"]],
            ["relative objective gap", d["objective_gap_rel"]],
            ["max dispatch delta [pu]", d["max_dispatch_delta"]],
            ["max |neutral voltage| [pu]", d["max_neutral_voltage"]],
            ["max pole split error [pu]", d["max_pole_split_error"]],
            ["max DC voltage delta [pu]", d["max_dc_voltage_delta"]]]
    return aligned(["quantity", "value"], rows, floatfmt=".3e")


# ---------------------------------------------------------------------------
# sweep


def sweep_header(result) -> list[str]:
    buses = sorted({b for r in result.rows for b in r.neutral})
    gens = sorted({g for r in result.rows for g in r.generators})
    return (["step", "load", "status", "objective"] + [f"u0_{b}" for b in buses]
            + ["binding"] + [f"p_{g}" for g in gens] + ["iterations"])


def sweep_rows(result) -> list[list]:
    header = sweep_header(result)
    buses = [h[3:] for h in header if h.startswith("u0_")]
    gens = [h[2:] for h in header if h.startswith("p_")]
    return [[r.step, r.load, r.status, r.objective] + [r.neutral.get(b) for b in buses]
            + [" ".join(r.binding)] + [r.generators.get(g) for g in gens] + [r.iterations]
            for r in result.rows]


def sweep_table(result) -> str:
    g = result.generator
    incs = result.increments() if g else [None] * len(result.rows)
    buses = sorted({b for r in result.rows for b in r.neutral})
    header = ["load [pu]", "status", "objective"] + [f"U0 {b}" for b in buses] + ["binding"]
    if g:
        header += [f"{g} [MW]", "step [MW]"]
    rows = []
    for r, inc in zip(result.rows, incs):
        row = [r.load, r.status, r.objective] + [r.neutral.get(b) for b in buses]
        row.append(",".join(r.binding) or "-")
        if g:
            p = r.generators.get(g)
            mva = result.base_mva
            row += [None if p is None else p * mva, None if inc is None else inc * mva]
        rows.append(row)
    return aligned(header, rows)


def write_sweep_outputs(result, out_dir: str | Path, *, figures: bool = True) -> list[Path]:
    """sweep.csv, gnuplot-ready sweep.dat and the sweep figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header, rows = sweep_header(result), sweep_rows(result)
    csv_path = out / "sweep.csv"
    csv_path.write_bytes(table_csv(header, rows))
    dat = out / "sweep.dat"
    lines = ["# " + " ".join(h for h in header if h not in ("status", "binding"))]
    keep = [i for i, h in enumerate(header) if h not in ("status", "binding")]
    for r in rows:
        lines.append(" ".join("nan" if r[i] is None else
                              (_jsonfmt._num(r[i], "") if isinstance(r[i], float) else str(r[i]))
                              for i in keep))
    dat.write_text("\n".join(lines) + "\n", encoding="utf-8")
    paths = [csv_path, dat]
    if figures:
        paths.append(plot_sweep(result, out / "sweep.png"))
    return paths


def sweep_json(result) -> dict:
    return {"case": result.case, "load": result.load_id, "generator": result.generator,
            "rows": [{"step": r.step, "load": r.load, "status": r.status,
                      "objective": r.objective, "neutral": r.neutral, "binding": r.binding,
                      "generators": r.generators, "iterations": r.iterations}
                     for r in result.rows]}
