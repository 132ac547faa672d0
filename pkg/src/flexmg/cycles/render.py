"""Graphviz rendering of a cycle: one node per step, x = step index, y = level."""
from __future__ import annotations

from flexmg.cycles.program import (
    Ascend,
    BaseV,
    CoarseSolve,
    CycleProgram,
    Descend,
    NoOp,
    Smooth,
    SmootherKind,
    level_trace,
)

COLORS = {
    SmootherKind.GS_FORWARD: "yellow",
    SmootherKind.GS_BACKWARD: "red",
    SmootherKind.JACOBI: "purple",
}
X_SPACING = 0.8
Y_SPACING = 1.0


def _node_attrs(st):
    if isinstance(st, Smooth):
        font = "white" if st.kind is SmootherKind.JACOBI else "black"
        return {"shape": "circle", "style": "filled", "fillcolor": COLORS[st.kind],
                "fontcolor": font, "label": f"{st.weight:.2f}"}
    if isinstance(st, CoarseSolve):
        return {"shape": "circle", "style": "filled", "fillcolor": "black", "label": ""}
    if isinstance(st, NoOp):
        return {"shape": "circle", "style": "filled", "fillcolor": "white", "label": ""}
    if isinstance(st, BaseV):
        return {"shape": "doublecircle", "style": "dashed", "fillcolor": "white", "label": f"{st.weight:.2f}"}
    return {"shape": "point", "width": "0.08", "label": ""}


def _fmt(attrs):
    return ", ".join(f'{k}="{v}"' for k, v in attrs.items())


def to_dot(program, name="cycle"):
    steps = program.steps if isinstance(program, CycleProgram) else tuple(program)
    levels = level_trace(steps)
    lines = [f"digraph {name} {{", '  graph [splines="line"];', '  node [fixedsize="true", width="0.45"];']
    for i, (st, lvl) in enumerate(zip(steps, levels)):
        attrs = _node_attrs(st)
        attrs["pos"] = f"{i * X_SPACING:.2f},{-lvl * Y_SPACING:.2f}!"
        lines.append(f"  n{i} [{_fmt(attrs)}];")
    for i in range(1, len(steps)):
        st = steps[i]
        edge = {}
        if isinstance(st, Ascend):
            edge["label"] = f"{st.weight:.2f}"
        if isinstance(steps[i - 1], BaseV):
            edge["style"] = "dotted"
        lines.append(f"  n{i - 1} -> n{i}" + (f" [{_fmt(edge)}]" if edge else "") + ";")
    lines.append("}")
    return "\n".join(lines) + "\n"
