"""
Condition checker service
Sample-based Caratheodory, Filippov, one-sided Lipschitz and transport-theory checks
"""

from typing import Dict, List, Literal, Optional, Tuple

import numpy as np

from nsflow.core.exceptions import InvalidArgumentError
from nsflow.core.logging import log
from nsflow.core.numerics_config import numerics
from nsflow.models.coefficient import Coefficient
from nsflow.schemas.problem import SamplingPlan
from nsflow.schemas.reports import ConditionReport, Witness

JUMP_TOL = 1e-9


class ConditionChecker:
    """
    Runs condition checks for one coefficient on a random sampling plan

    Surfaces contribute exact one-sided limits; everything else is sampled.
    """

    def __init__(self, coefficient: Coefficient, plan: Optional[SamplingPlan] = None):
        self.coefficient = coefficient
        self.plan = plan or SamplingPlan()
        self.constants = numerics("rhsmodel")
        self.rng = np.random.default_rng(self.plan.seed)
        self._points: Optional[Tuple[np.ndarray, np.ndarray]] = None
        self._surface_points: Optional[Dict[int, Tuple[np.ndarray, np.ndarray]]] = None

    # Sampling

    def _uniform(self, count: int) -> Tuple[np.ndarray, np.ndarray]:
        c = self.coefficient
        t = self.rng.uniform(*c.t_range, size=count)
        X = self.rng.uniform(c.x_box[:, 0], c.x_box[:, 1], size=(count, c.dim))
        return t, X

    def sample_points(self) -> Tuple[np.ndarray, np.ndarray]:
        if self._points is None:
            self._points = self._uniform(self.plan.points)
        return self._points

    def _project(self, surface_id: int, t: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Newton projection of points onto g_j(t, .) = 0"""
        surface = self.coefficient.surfaces[surface_id]
        X = X.copy()
        for _ in range(40):
            g = surface.g(t, *X.T)
            grad = np.column_stack([d(t, *X.T) for d in surface.grad])
            norm2 = np.sum(grad**2, axis=1)
            step = np.where(norm2 > 0, g / np.where(norm2 > 0, norm2, 1.0), 0.0)
            X -= step[:, None] * grad
            if np.all(np.abs(g) < 1e-13):
                break
        return X

    def surface_points(self) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
        """Sampled points on each x-surface inside the domain box"""
        if self._surface_points is None:
            c = self.coefficient
            per_surface = max(20, self.plan.points // (4 * max(1, len(c.x_surface_ids))))
            self._surface_points = {}
            for j in c.x_surface_ids:
                t, X = self._uniform(per_surface)
                X = self._project(j, t, X)
                g = c.surfaces[j].g(t, *X.T)
                inside = np.all((X >= c.x_box[:, 0]) & (X <= c.x_box[:, 1]), axis=1) & (np.abs(g) < 1e-10)
                self._surface_points[j] = (t[inside], X[inside])
        return self._surface_points

    def coverage(self) -> float:
        """Fraction of pieces hit by the sample cloud"""
        t, X = self.sample_points()
        index = self.coefficient.piece_index(t, X)
        hit = {int(i) for i in index if i >= 0}
        return len(hit) / len(self.coefficient.pieces)

    def _finish(self, theory: str, witnesses: List[Witness], constants: Dict, notes: List[str]) -> ConditionReport:
        if witnesses:
            verdict = "fail"
        elif self.coverage() < float(self.constants["coverage_min"]):
            verdict = "inconclusive"
            notes.append(f"sampling covered {self.coverage():.0%} of the regions")
            log.warning(f"{theory} check inconclusive: region coverage {self.coverage():.0%}")
        else:
            verdict = "pass"
        return ConditionReport(
            theory=theory, verdict=verdict, witnesses=witnesses[:10], constants=constants, notes=notes
        )

    # Shared pieces

    def _bound_witnesses(self) -> Tuple[List[Witness], Dict[str, float]]:
        c = self.coefficient
        witnesses: List[Witness] = []
        t0, t1 = c.t_range
        try:
            integral = c.bound_integral(t0, t1)
        except Exception as e:  # quadrature of a non-integrable majorant
            integral = float("inf")
            log.debug(f"bound integral failed: {e}")
        if not np.isfinite(integral):
            grid = np.linspace(t0, t1, 1001)
            values = np.asarray(c.bound(grid), dtype=float)
            worst = int(np.argmax(np.where(np.isfinite(values), values, np.inf)))
            witnesses.append(Witness(t=float(grid[worst]), x=[], note="bound is not integrable on the time domain"))

        t, X = self.sample_points()
        keep = c.piece_index(t, X) >= 0
        values = np.linalg.norm(c(t[keep], X[keep]), axis=1)
        beta = np.asarray(c.bound(t[keep]), dtype=float)
        bad = np.flatnonzero(~np.isfinite(values) | (values > beta * (1.0 + 1e-9) + 1e-12))
        for m in bad[:5]:
            witnesses.append(
                Witness(
                    t=float(t[keep][m]), x=X[keep][m].tolist(), value=float(values[m]), note="|a| exceeds the bound"
                )
            )
        return witnesses, {"bound_integral": float(integral), "sup_norm": float(np.max(values)) if values.size else 0.0}

    def _jump_witnesses(self) -> List[Witness]:
        c = self.coefficient
        witnesses = []
        for j, (t, X) in self.surface_points().items():
            for tm, xm in zip(t, X):
                limits = np.vstack(c.limits(float(tm), xm))
                spread = float(np.max(np.linalg.norm(limits[:, None, :] - limits[None, :, :], axis=2)))
                if spread > JUMP_TOL:
                    note = f"jump across {c.surfaces[j].expr} = 0"
                    witnesses.append(Witness(t=float(tm), x=xm.tolist(), value=spread, note=note))
                    break
        return witnesses

    # Checks

    def check_caratheodory(self) -> ConditionReport:
        """Continuity in x across every declared surface and an integrable bound"""
        witnesses, constants = self._bound_witnesses()
        jumps = self._jump_witnesses()
        witnesses = jumps + witnesses
        notes = []
        if self.coefficient.t_surface_ids:
            notes.append("jumps in t only are allowed")
        return self._finish("CC", witnesses, constants, notes)

    def check_filippov(self) -> ConditionReport:
        """Integrable bound and bounded hull; upper semi-continuity holds by construction"""
        witnesses, constants = self._bound_witnesses()
        c = self.coefficient
        for j, (t, X) in self.surface_points().items():
            for tm, xm in zip(t[:50], X[:50]):
                limits = np.vstack(c.limits(float(tm), xm))
                size = float(np.max(np.linalg.norm(limits, axis=1)))
                if not np.isfinite(size) or size > float(c.bound(tm)) * (1.0 + 1e-9) + 1e-12:
                    witnesses.append(Witness(t=float(tm), x=xm.tolist(), value=size, note="hull exceeds the bound"))
                    break
        return self._finish("FC", witnesses, constants, ["hull upper semi-continuous by construction"])

    def _near_pairs(self, count: int) -> List[Tuple[float, np.ndarray, np.ndarray, np.ndarray, float]]:
        """Pairs straddling surfaces: (t, x, y, normal, scale)"""
        c = self.coefficient
        pairs = []
        surface_points = self.surface_points()
        ids = [j for j in surface_points if surface_points[j][0].size]
        if not ids:
            return pairs
        scales = [float(s) for s in self.plan.scales]
        for k in range(count):
            j = ids[k % len(ids)]
            t, X = surface_points[j]
            m = int(self.rng.integers(t.size))
            tm, p = float(t[m]), X[m]
            normal = c.surfaces[j].normal(tm, p)
            h = scales[k % len(scales)]
            u1, u2 = self.rng.uniform(0.1, 1.0, size=2)
            pairs.append((tm, p - h * u1 * normal, p + h * u2 * normal, normal, h))
        return pairs

    def check_one_sided_lipschitz(self, direction: Literal["forward", "backward"] = "forward") -> ConditionReport:
        """
        Fit alpha in <x - y, a(x) - a(y)> <= alpha |x - y|^2

        The check fails when the quotient grows without bound as pairs shrink
        across a surface (a downward jump forward, an upward jump backward).
        """
        c = self.coefficient
        sign = 1.0 if direction == "forward" else -1.0
        near_count = int(self.plan.pairs * self.plan.near_fraction) if c.x_surface_ids else 0
        far_count = self.plan.pairs - near_count

        t, X = self._uniform(far_count)
        _, Y = self._uniform(far_count)
        keep = (c.piece_index(t, X) >= 0) & (c.piece_index(t, Y) >= 0)
        t, X, Y = t[keep], X[keep], Y[keep]
        diff = X - Y
        q_far = sign * np.sum(diff * (c(t, X) - c(t, Y)), axis=1) / np.maximum(np.sum(diff**2, axis=1), 1e-300)

        near = self._near_pairs(near_count)
        by_scale: Dict[float, List[Tuple[float, int]]] = {}
        near_q = []
        for k, (tm, x, y, _, h) in enumerate(near):
            ax, ay = c(tm, x[None, :])[0], c(tm, y[None, :])[0]
            q = sign * float(np.dot(x - y, ax - ay)) / float(np.dot(x - y, x - y))
            near_q.append(q)
            by_scale.setdefault(h, []).append((q, k))

        witnesses: List[Witness] = []
        constants: Dict[str, object] = {}
        if by_scale:
            scales = sorted(by_scale)
            q_small = max(q for q, _ in by_scale[scales[0]])
            q_large = max(q for q, _ in by_scale[scales[-1]])
            constants["scale_maxima"] = {f"{h:g}": max(q for q, _ in by_scale[h]) for h in scales}
            ratio = float(self.constants["divergence_ratio"])
            log.debug(f"{direction}-OSL quotients: smallest scale {q_small:.3e}, largest {q_large:.3e}")
            if q_small > 0 and q_small > ratio * max(q_large, 1.0):
                worst = max(by_scale[scales[0]])[1]
                tm, x, y, _, _ = near[worst]
                witnesses.append(
                    Witness(
                        t=tm,
                        x=x.tolist(),
                        y=y.tolist(),
                        value=near_q[worst],
                        note="quotient diverges across the surface",
                    )
                )

        all_q = np.concatenate([q_far, np.asarray(near_q)]) if near_q else q_far
        alpha = float(np.max(all_q)) if all_q.size else 0.0
        constants["alpha"] = alpha if not witnesses else float("inf")
        constants["alpha_by_time"] = self._binned_alpha(np.concatenate([t, [p[0] for p in near]]), all_q)
        theory = "forward-OSL" if direction == "forward" else "backward-OSL"
        return self._finish(theory, witnesses, constants, [])

    def _binned_alpha(self, times: np.ndarray, quotients: np.ndarray) -> List[List[float]]:
        bins = int(self.constants["time_bins"])
        edges = np.linspace(*self.coefficient.t_range, bins + 1)
        out = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            mask = (times >= lo) & (times <= hi)
            if mask.any():
                out.append([float(lo), float(hi), float(np.max(quotients[mask]))])
        return out

    def _coordinate_quotients(self) -> Tuple[Dict[float, float], Optional[Witness]]:
        """Smallest (a_k(x + h e_k) - a_k(x)) / h per scale across surfaces"""
        c = self.coefficient
        minima: Dict[float, Tuple[float, Witness]] = {}
        for tm, x, y, normal, h in self._near_pairs(max(40, self.plan.pairs // 10)):
            k = int(np.argmax(np.abs(normal)))
            p = 0.5 * (x + y)
            lo, hi = p.copy(), p.copy()
            lo[k] -= h
            hi[k] += h
            q = float(c(tm, hi[None, :])[0, k] - c(tm, lo[None, :])[0, k]) / (2.0 * h)
            if h not in minima or q < minima[h][0]:
                witness = Witness(t=tm, x=lo.tolist(), y=hi.tolist(), value=q, note=f"coordinate {k + 1} quotient")
                minima[h] = (q, witness)
        if not minima:
            return {}, None
        scales = sorted(minima)
        q_small, q_large = minima[scales[0]][0], minima[scales[-1]][0]
        ratio = float(self.constants["divergence_ratio"])
        witness = minima[scales[0]][1] if q_small < 0 and -q_small > ratio * max(-q_large, 1.0) else None
        return {h: minima[h][0] for h in scales}, witness

    def classify_theories(
        self, reaction: Optional[Coefficient] = None, p: float = float("inf")
    ) -> List[ConditionReport]:
        """Applicability of the Hurd-Sattinger and DiPerna-Lions existence theories"""
        if p < 1:
            raise InvalidArgumentError("exponent p must satisfy 1 <= p <= inf", p=p)
        c = self.coefficient
        t, X = self.sample_points()
        keep = c.piece_index(t, X) >= 0
        t, X = t[keep], X[keep]
        a_values = c(t, X)
        c_values = np.zeros(t.size) if reaction is None else reaction(t, X)[:, 0]

        # Hurd-Sattinger
        hs_witnesses: List[Witness] = []
        sup_a = float(np.max(np.abs(a_values))) if a_values.size else 0.0
        if not np.isfinite(sup_a):
            hs_witnesses.append(Witness(t=None, x=[], value=sup_a, note="a is not bounded"))
        if not np.all(np.isfinite(c_values)):
            bad = int(np.flatnonzero(~np.isfinite(c_values))[0])
            hs_witnesses.append(Witness(t=float(t[bad]), x=X[bad].tolist(), note="c is not bounded"))
        quotients, witness = self._coordinate_quotients()
        if witness is not None:
            hs_witnesses.append(witness)
        hs = self._finish(
            "HS",
            hs_witnesses,
            {
                "c1": sup_a,
                "mu": {f"{h:g}": max(0.0, -q) for h, q in quotients.items()},
                "c_min": float(np.min(c_values, initial=0.0)),
            },
            [],
        )

        # DiPerna-Lions
        dl_witnesses = self._jump_witnesses()
        if dl_witnesses:
            dl_witnesses = [w.model_copy(update={"note": "div a carries a surface delta"}) for w in dl_witnesses]
        div = c.divergence(t, X)
        if p == 1:
            checked = {"div_a": div, "c": c_values}
        else:
            weight = 0.0 if np.isinf(p) else 1.0 / p
            checked = {"div_a_over_p_minus_c": weight * div - c_values}
        constants = {}
        for name, values in checked.items():
            constants[name] = float(np.max(np.abs(values))) if values.size else 0.0
            if not np.all(np.isfinite(values)):
                bad = int(np.flatnonzero(~np.isfinite(values))[0])
                dl_witnesses.append(Witness(t=float(t[bad]), x=X[bad].tolist(), note=f"{name} is not bounded"))
        if not np.isfinite(sup_a):
            dl_witnesses.append(Witness(t=None, x=[], value=sup_a, note="a is not bounded"))
        dl = self._finish("DiPernaLions", dl_witnesses, constants, [f"p = {p:g}"])
        return [hs, dl]


def check_caratheodory(coefficient: Coefficient, plan: Optional[SamplingPlan] = None) -> ConditionReport:
    return ConditionChecker(coefficient, plan).check_caratheodory()


def check_filippov(coefficient: Coefficient, plan: Optional[SamplingPlan] = None) -> ConditionReport:
    return ConditionChecker(coefficient, plan).check_filippov()


def check_one_sided_lipschitz(
    coefficient: Coefficient, direction: Literal["forward", "backward"] = "forward", plan: Optional[SamplingPlan] = None
) -> ConditionReport:
    return ConditionChecker(coefficient, plan).check_one_sided_lipschitz(direction)


def classify_theories(
    coefficient: Coefficient,
    reaction: Optional[Coefficient] = None,
    p: float = float("inf"),
    plan: Optional[SamplingPlan] = None,
) -> List[ConditionReport]:
    return ConditionChecker(coefficient, plan).classify_theories(reaction, p)


def essential_support(coefficient: Coefficient, t: float, x, w) -> float:
    """H_a(t, x, w) at one point and one direction"""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    w = w / np.linalg.norm(w)
    return float(coefficient.essential_support(t, np.atleast_1d(np.asarray(x, dtype=float))[None, :], w[None, :])[0, 0])
