"""Error measures between high-fidelity, projected, and predicted solutions.

Per node: E_rb = ||u_rb - u_h|| (order-reduction error), E_p = ||u_p - u_h||
(prediction error), E_gpr = E_p - E_rb (signed regression contribution).
Per solution: AE = mean over nodes, ME = max over nodes. Aggregates compare
against imaging-resolution thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

#: imaging modality resolution thresholds [mm]
DEFAULT_THRESHOLDS = (0.15, 0.2, 0.4, 0.6)  # 3DRA, DSA, CTA-low, MRA-low


def _per_node(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float).ravel()
    if u.size % 3:
        raise DataError("displacement vector length must be a multiple of 3")
    return u.reshape(-1, 3)


def nodal_errors(u_h, u_rb, u_p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-node (E_rb, E_p, E_gpr) between the three solutions."""
    h, rb, p = _per_node(u_h), _per_node(u_rb), _per_node(u_p)
    if not (h.shape == rb.shape == p.shape):
        raise DataError("solution vectors have mismatched lengths")
    E_rb = np.linalg.norm(rb - h, axis=1)
    E_p = np.linalg.norm(p - h, axis=1)
    return E_rb, E_p, E_p - E_rb


@dataclass
class SolutionReport:
    """Per-solution error summary."""

    AE_rb: float
    ME_rb: float
    AE_p: float
    ME_p: float
    mean_E_gpr: float
    mean_abs_E_gpr: float
    E_rb: np.ndarray = field(repr=False)
    E_p: np.ndarray = field(repr=False)
    E_gpr: np.ndarray = field(repr=False)

    @classmethod
    def from_solutions(cls, u_h, u_rb, u_p) -> "SolutionReport":
        E_rb, E_p, E_gpr = nodal_errors(u_h, u_rb, u_p)
        return cls(
            AE_rb=float(E_rb.mean()),
            ME_rb=float(E_rb.max()),
            AE_p=float(E_p.mean()),
            ME_p=float(E_p.max()),
            mean_E_gpr=float(E_gpr.mean()),
            mean_abs_E_gpr=float(np.abs(E_gpr).mean()),
            E_rb=E_rb,
            E_p=E_p,
            E_gpr=E_gpr,
        )


def aggregate(reports: list[SolutionReport], thresholds=DEFAULT_THRESHOLDS) -> dict:
    """Dataset-level mean/SD of AE/ME plus threshold exceedance counts."""
    if not reports:
        raise DataError("no solution reports to aggregate")
    out = {"n_solutions": len(reports), "thresholds": {}}
    for name in ("AE_rb", "ME_rb", "AE_p", "ME_p", "mean_E_gpr", "mean_abs_E_gpr"):
        vals = np.array([getattr(r, name) for r in reports])
        out[name] = {"mean": float(vals.mean()), "sd": float(vals.std())}
    ae = np.array([r.AE_p for r in reports])
    me = np.array([r.ME_p for r in reports])
    for thr in thresholds:
        out["thresholds"][f"{thr:g}"] = {
            "AE_p_exceed": int(np.sum(ae > thr)),
            "ME_p_exceed": int(np.sum(me > thr)),
        }
    return out


def summary_table(agg: dict) -> str:
    """Plain-text rendering of an aggregate report."""
    lines = [f"solutions: {agg['n_solutions']}"]
    for name in ("AE_rb", "ME_rb", "AE_p", "ME_p"):
        lines.append(f"{name:>6}: {agg[name]['mean']:.4f} ± {agg[name]['sd']:.4f} mm")
    lines.append("threshold exceedance (AE_p / ME_p):")
    for thr, counts in agg["thresholds"].items():
        lines.append(f"  {thr} mm: {counts['AE_p_exceed']} / {counts['ME_p_exceed']}")
    return "\n".join(lines)
