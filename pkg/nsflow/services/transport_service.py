"""
Transport service
Measure solutions of d_t u + d_x(a u) = 0: flow pushforward, coefficient-measure
products, weak residuals and the resolvent of the transport generator
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad_vec, solve_ivp
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicHermiteSpline, interp1d

from nsflow.core.config import settings
from nsflow.core.exceptions import InvalidArgumentError, NumericalFailureError, RefusedError
from nsflow.core.logging import log
from nsflow.core.numerics_config import numerics
from nsflow.models.coefficient import Coefficient
from nsflow.models.measure import MeasurePath, MeasureState, ProductKind, TestFunction, TestFunctionBank, merge_atoms
from nsflow.models.trajectory import FlowMap
from nsflow.schemas.reports import PairingRow, PairingTable, ResidualReport, ResolventReport
from nsflow.services.flow_service import is_autonomous
from nsflow.utils.quadrature import panel_rule, split_breaks

ComplexFunction = Callable[[np.ndarray], np.ndarray]
SpaceTimeIntegrand = Callable[[TestFunction, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _time_rule(lo: float, hi: float, cuts: Sequence[float] = ()) -> Tuple[np.ndarray, np.ndarray]:
    constants = numerics("transport")
    width = (hi - lo) / int(constants["time_panels"])
    return panel_rule(split_breaks(lo, hi, cuts, width), int(constants["gauss_nodes"]))


def coefficient_pairing(coefficient: Coefficient, phi: TestFunction) -> float:
    """int int a(t, x) phi(t, x) dx dt over the support of phi"""
    constants = numerics("transport")
    (t_lo, t_hi), (x_lo, x_hi) = phi.support
    nodes, weights = _time_rule(t_lo, t_hi, coefficient.time_breaks(t_lo, t_hi))
    total = 0.0
    for t, w in zip(nodes, weights):
        cuts = coefficient.surface_positions(t, x_lo, x_hi) if coefficient.has_x_surfaces else []
        breaks = split_breaks(x_lo, x_hi, cuts, float(constants["pairing_width"]))
        x, wx = panel_rule(breaks, int(constants["gauss_nodes"]))
        total += w * float(np.sum(wx * coefficient(t, x[:, None])[:, 0] * phi(t, x)))
    return total


class MeasureTransport:
    """
    Measure solutions along a forward Filippov flow of a scalar coefficient

    The image measure u(t) = chi(t, .)_# u0 is built cell by cell on a start
    grid: cells whose image has length below collapse_tol become atoms, and
    cells next to a collapse are split by bisection at the collapse edge.
    Surviving cells carry u0(x) / d_x chi(t, x) as a polynomial in y = chi(t, x).
    """

    def __init__(self, coefficient: Optional[Coefficient], flow: FlowMap, grid: Optional[int] = None):
        if coefficient is not None and coefficient.dim != 1:
            raise InvalidArgumentError("measure transport is one-dimensional", dim=coefficient.dim)
        if flow.direction != "forward":
            raise InvalidArgumentError("measure transport needs a forward flow")
        report = flow.reports.get("osl")
        if report is not None and report.verdict == "fail":
            raise RefusedError("flow lacks forward uniqueness", theory=report.theory)
        constants = numerics("transport")
        self.coefficient = coefficient
        self.flow = flow
        self.grid = int(constants["flow_grid"]) if grid is None else int(grid)
        self.collapse_tol = float(constants["collapse_tol"])
        self.merge_tol = float(constants["atom_merge_tol"])
        self.steps = int(constants["bisection_steps"])
        self.order = int(constants["density_order"])

    def _image(self, t: float, x: float) -> float:
        return float(self.flow.eval(t, [x])[0])

    def _slides(self, t: float, x: float) -> bool:
        trajectory = self.flow.trajectory([x])
        return any(e.kind == "sliding-start" and e.time <= t + 1e-12 for e in trajectory.events)

    def _cuts(self, lo: float, hi: float) -> List[float]:
        """Surface positions at the anchor time"""
        if self.coefficient is None or not self.coefficient.has_x_surfaces:
            return []
        return self.coefficient.surface_positions(self.flow.anchor, lo, hi)

    def _starts(self, lo: float, hi: float) -> np.ndarray:
        inner = self._cuts(lo, hi)
        return np.unique(np.concatenate([np.linspace(lo, hi, self.grid), inner]))

    def _stretch(self, t: float, x: float, nodes: np.ndarray, weights: np.ndarray) -> Optional[float]:
        """d_x chi(t, x) = exp(int div a along the path); None once the path meets a surface"""
        c = self.coefficient
        trajectory = self.flow.trajectory([x])
        if c is None or any(e.time <= t for e in trajectory.events):
            return None
        states = trajectory.at(nodes)
        if c.x_surface_ids:
            values = c.surface_values(nodes, states)[c.x_surface_ids]
            if np.any(values[:, :-1] * values[:, 1:] <= 0):
                return None
        divergence = c.divergence(nodes, states)
        if not np.all(np.isfinite(divergence)):
            return None
        return float(np.exp(np.sum(weights * divergence)))

    def _cell_density(
        self, u0: MeasureState, x_ends: Tuple[float, float], y_ends: Tuple[float, float], stretches
    ) -> np.ndarray:
        """
        Ascending powers of (y - ya) fitting u0(x) / d_x chi on the image of [xa, xb]

        chi is the cubic Hermite interpolant of the end images and stretches;
        missing stretches fall back to the secant slope. The fit is scaled to
        the exact u0 mass of the cell.
        """
        (xa, xb), (ya, yb) = x_ends, y_ends
        mass = u0.density_mass(xa, xb)
        if yb - ya < 1e3 * self.collapse_tol:
            return np.array([mass / (yb - ya)])
        secant = (yb - ya) / (xb - xa)
        slopes = [secant if s is None else s for s in stretches]
        x, _ = panel_rule([xa, xb], self.order)
        chi = CubicHermiteSpline([xa, xb], [ya, yb], slopes)
        y, stretch = chi(x), chi.derivative()(x)
        if np.any(stretch <= 0):
            y, stretch = ya + secant * (x - xa), np.full(x.size, secant)
        coef = np.polynomial.polynomial.polyfit(y - ya, u0.density_at(x) / stretch, self.order - 1)
        fitted = float(Polynomial(coef).integ()(yb - ya))
        if fitted != 0.0:
            coef = coef * (mass / fitted)
        return coef

    def _edge(self, t: float, lo: float, hi: float, target: float, upper: bool) -> float:
        """
        Collapse edge inside [lo, hi] by bisection

        upper=False: last x with chi(t, x) <= target + tol.
        upper=True: first x with chi(t, x) >= target - tol.
        """
        tol = self.collapse_tol
        for _ in range(self.steps):
            mid = 0.5 * (lo + hi)
            value = self._image(t, mid)
            if upper:
                lo, hi = (mid, hi) if value < target - tol else (lo, mid)
            else:
                lo, hi = (mid, hi) if value <= target + tol else (lo, mid)
        return hi if upper else lo

    def pushforward(self, u0: MeasureState, t: float) -> MeasureState:
        """
        u(t)(B) = u0({x : chi(t, x) in B})

        Raises:
            NumericalFailureError: chi(t, .) decreases somewhere on the start grid
        """
        t = float(t)
        if t == self.flow.anchor:
            return u0
        atoms = [(self._image(t, p), m) for p, m in u0.atoms]
        pieces: List[Tuple[float, float, np.ndarray]] = []
        if u0.has_density:
            lo, hi = float(u0.breaks[0]), float(u0.breaks[-1])
            starts = np.union1d(self._starts(lo, hi), u0.breaks)
            images = np.array([self._image(t, x) for x in starts])
            steps = np.diff(images)
            if np.any(steps < -self.collapse_tol):
                k = int(np.argmin(steps))
                raise NumericalFailureError(
                    "flow is not monotone on the start grid", t=t, x=[float(starts[k]), float(starts[k + 1])]
                )
            collapsed = steps <= self.collapse_tol
            time_cuts = [] if self.coefficient is None else self.coefficient.time_breaks(self.flow.anchor, t)
            nodes, weights = panel_rule(np.union1d(np.linspace(self.flow.anchor, t, 17), time_cuts), 4)
            stretches = [self._stretch(t, float(x), nodes, weights) for x in starts]
            min_part = 1e3 * self.collapse_tol
            for i in range(steps.size):
                xa, xb, ya, yb = float(starts[i]), float(starts[i + 1]), float(images[i]), float(images[i + 1])
                if collapsed[i]:
                    atoms.append((0.5 * (ya + yb), u0.density_mass(xa, xb)))
                    continue
                near_collapse = (i > 0 and collapsed[i - 1]) or (i + 1 < steps.size and collapsed[i + 1])
                if near_collapse or self._slides(t, xa) or self._slides(t, xb):
                    left = self._edge(t, xa, xb, ya, upper=False)
                    right = self._edge(t, left, xb, yb, upper=True)
                    if left - xa > min_part:
                        atoms.append((ya, u0.density_mass(xa, left)))
                        xa = left
                    if xb - right > min_part:
                        atoms.append((yb, u0.density_mass(right, xb)))
                        xb = right
                ends = (stretches[i], stretches[i + 1])
                if xa != float(starts[i]) or xb != float(starts[i + 1]):
                    ends = (None, None)
                pieces.append((ya, yb, self._cell_density(u0, (xa, xb), (ya, yb), ends)))

        merged = merge_atoms(atoms, self.merge_tol)
        log.debug(f"pushforward to t={t:g}: {merged.shape[0]} atoms, {len(pieces)} density cells")
        if not pieces:
            return MeasureState(atoms=merged)
        breaks = [pieces[0][0]]
        coeffs = []
        for ya, yb, coef in pieces:
            if ya > breaks[-1] + self.collapse_tol:
                coeffs.append([0.0])
                breaks.append(ya)
            breaks.append(max(yb, breaks[-1] + self.collapse_tol))
            coeffs.append(coef)
        return MeasureState(atoms=merged, breaks=breaks, coeffs=coeffs, total_mass_window=u0.total_mass)

    def path(self, u0: MeasureState) -> MeasurePath:
        return MeasurePath(lambda t: self.pushforward(u0, t), name="pushforward")

    def flow_integrals(self, u0: MeasureState, bank: TestFunctionBank, integrand: SpaceTimeIntegrand) -> np.ndarray:
        """
        <u0, int integrand(phi, t, chi(t, x), d_t chi(t, x)) dt> for every bank member

        The time rule splits at the event times of each trajectory.
        """
        t_lo, t_hi = bank.t_window
        if t_lo < self.flow.anchor or t_hi > self.flow.horizon:
            raise InvalidArgumentError(
                "test supports leave the flow window", window=[self.flow.anchor, self.flow.horizon]
            )
        lo, hi = u0.window
        nodes, weights = u0.quadrature(self._cuts(lo - 1.0, hi + 1.0))

        def row(x: float) -> np.ndarray:
            trajectory = self.flow.trajectory([x])
            times, wt = _time_rule(t_lo, t_hi, [e.time for e in trajectory.events])
            states = trajectory.at(times)[:, 0]
            speeds = trajectory.velocity(times)[:, 0]
            return np.array([np.sum(wt * integrand(phi, times, states, speeds)) for phi in bank])

        with ThreadPoolExecutor(max_workers=max(1, settings.threads)) as pool:
            rows = list(pool.map(row, nodes))
        if not rows:
            return np.zeros(len(bank))
        return np.column_stack(rows) @ weights

    def poupaud_rascle(
        self, u0: MeasureState, bank: TestFunctionBank, reference: Optional[Coefficient] = None
    ) -> PairingTable:
        """<a . u, phi> = <u0, int d_t chi(t, x) phi(t, chi(t, x)) dt>"""
        log.info(f"Poupaud-Rascle pairings over {len(bank)} test functions")
        values = self.flow_integrals(u0, bank, lambda phi, t, s, v: v * phi(t, s))
        rows = []
        for k, (phi, value) in enumerate(zip(bank, values)):
            ref = coefficient_pairing(reference, phi) if reference is not None else None
            rows.append(
                PairingRow(
                    index=k,
                    product=float(value),
                    reference=ref,
                    difference=None if ref is None else float(value) - ref,
                )
            )
        return PairingTable(product=ProductKind.POUPAUD_RASCLE.value, rows=rows)

    def residual(self, u0: MeasureState, bank: TestFunctionBank) -> ResidualReport:
        """-int <u(t), d_t phi> + <a . u, d_x phi> dt along the flow"""
        values = -self.flow_integrals(u0, bank, lambda phi, t, s, v: phi.dt(t, s) + v * phi.dx(t, s))
        return ResidualReport(
            product=ProductKind.POUPAUD_RASCLE.value,
            pairings=values.tolist(),
            max_residual=float(np.max(np.abs(values))),
        )


def pushforward(
    u0: MeasureState, flow: FlowMap, t: float, coefficient: Optional[Coefficient] = None, grid: Optional[int] = None
) -> MeasureState:
    """Image measure of u0 under chi(t, .); the coefficient adds its surface positions to the start grid"""
    return MeasureTransport(coefficient, flow, grid).pushforward(u0, t)


def poupaud_rascle_product(
    a: Coefficient, u0: MeasureState, flow: FlowMap, bank: TestFunctionBank, reference: Optional[Coefficient] = None
) -> PairingTable:
    return MeasureTransport(a, flow).poupaud_rascle(u0, bank, reference)


# Pointwise products


def product_state(a: Coefficient, state: MeasureState, t: float, kind: Union[ProductKind, str]) -> MeasureState:
    """
    a o u(t) for the Bouchut-James or model product

    The density is multiplied pointwise with cuts at the surface positions.
    An atom off the surfaces takes a(t, p). On a surface it takes the
    declared Borel value (Bouchut-James) or the mean of the one-sided limits
    (model product).

    Raises:
        InvalidArgumentError: Bouchut-James atom on a surface without a declared value
    """
    kind = ProductKind(kind)
    if kind is ProductKind.POUPAUD_RASCLE:
        raise InvalidArgumentError("the Poupaud-Rascle product is defined through the flow only")
    if a.dim != 1:
        raise InvalidArgumentError("pointwise products are one-dimensional", dim=a.dim)
    lo, hi = state.window
    cuts = a.surface_positions(t, lo - 1.0, hi + 1.0) if a.has_x_surfaces else []
    values = []
    for p, _ in state.atoms:
        point = np.array([p])
        if a.active_surfaces(t, point):
            if kind is ProductKind.BOUCHUT_JAMES:
                value = a.declared_value(t, point)
                if value is None:
                    raise InvalidArgumentError(
                        "atom on a discontinuity curve without a declared value", t=t, position=float(p)
                    )
            else:
                value = a.model_value(t, point)
        else:
            value = a(t, point[:, None])[0]
        values.append(float(value[0]))
    return state.multiplied(lambda x: a(t, x[:, None])[:, 0], values, cuts)


def bouchut_james_product(a_tilde: Coefficient, u: MeasurePath) -> MeasurePath:
    """t -> a_tilde (diamond) u(t)"""
    return MeasurePath(lambda t: product_state(a_tilde, u.at(t), t, ProductKind.BOUCHUT_JAMES), name="bouchut-james")


def weak_residual(
    u_path: MeasurePath,
    a: Coefficient,
    product: Union[ProductKind, str],
    bank: TestFunctionBank,
    flow: Optional[FlowMap] = None,
    u0: Optional[MeasureState] = None,
) -> ResidualReport:
    """
    <d_t u + d_x(a o u), phi> = -int <u(t), d_t phi> + <a o u(t), d_x phi> dt per bank member

    The Poupaud-Rascle product only exists along a flow, so it needs the
    flow and u0; the pointwise products slice the path in time.
    """
    kind = ProductKind(product)
    if kind is ProductKind.POUPAUD_RASCLE:
        if flow is None or u0 is None:
            raise InvalidArgumentError("the Poupaud-Rascle residual needs the flow and u0")
        return MeasureTransport(a, flow).residual(u0, bank)

    t_lo, t_hi = bank.t_window
    times, wt = _time_rule(t_lo, t_hi, a.time_breaks(t_lo, t_hi))
    slices = []
    for t in times:
        state = u_path.at(t)
        prod = product_state(a, state, t, kind)
        slices.append((state.quadrature(), prod.quadrature()))

    def pairing(phi: TestFunction) -> float:
        total = 0.0
        for t, w, ((xu, wu), (xp, wp)) in zip(times, wt, slices):
            total += w * (np.sum(wu * phi.dt(t, xu)) + np.sum(wp * phi.dx(t, xp)))
        return -float(total)

    with ThreadPoolExecutor(max_workers=max(1, settings.threads)) as pool:
        values = list(pool.map(pairing, bank))
    log.debug(f"{kind.value} residual over {len(bank)} test functions: max {max(abs(v) for v in values):.3e}")
    return ResidualReport(product=kind.value, pairings=values, max_residual=float(max(abs(v) for v in values)))


# Resolvent


class Resolvent:
    """
    R(mu) f(x) = int_0^inf exp(-mu z) f(chi(-z, x)) dz for autonomous scalar a >= c0 > 0

    All characteristics of a sample grid are integrated together as one
    vector ODE y' = -a(y); the Laplace integral of the stacked real and
    imaginary parts uses quad_vec, truncated where exp(-Re mu z) sup|f|
    drops below the cutoff.
    """

    def __init__(
        self,
        coefficient: Coefficient,
        mu: complex,
        flow: Optional[FlowMap] = None,
        bounds: Optional[Tuple[float, float]] = None,
    ):
        mu = complex(mu)
        if mu.real <= 0:
            raise InvalidArgumentError("resolvent needs Re(mu) > 0", mu=[mu.real, mu.imag])
        if coefficient.dim != 1 or not is_autonomous(coefficient):
            raise InvalidArgumentError("resolvent needs an autonomous scalar coefficient")
        if flow is not None and flow.direction != "backward":
            raise InvalidArgumentError("resolvent characteristics need a backward flow")
        constants = numerics("transport")
        self.coefficient = coefficient
        self.mu = mu
        self.flow = flow
        self.cutoff = float(constants["resolvent_cutoff"])
        self.stencil = float(constants["resolvent_stencil"])
        self.spacing = float(constants["resolvent_spacing"])
        self.c0, self.c1 = self._bounds() if bounds is None else (float(bounds[0]), float(bounds[1]))
        if self.c0 <= 0:
            raise InvalidArgumentError("coefficient must stay above a positive constant", c0=self.c0)

    def _bounds(self) -> Tuple[float, float]:
        lo, hi = self.coefficient.x_box[0]
        values = self.coefficient(0.0, np.linspace(lo, hi, 4001)[:, None])[:, 0]
        return float(values.min()), float(values.max())

    def _speed(self, y: np.ndarray) -> np.ndarray:
        return self.coefficient(0.0, y[:, None])[:, 0]

    def horizon(self, sup_f: float) -> float:
        """z* with exp(-Re mu z*) sup|f| = cutoff"""
        ratio = max(sup_f, self.cutoff) / self.cutoff
        return max(float(np.log(ratio)), 1.0) / self.mu.real

    def _sup(self, f: ComplexFunction, xs: np.ndarray) -> float:
        reach = self.c1 * np.log(1.0 / self.cutoff) / self.mu.real
        probe = np.linspace(xs.min() - reach, xs.max(), 4001)
        return float(np.max(np.abs(f(probe))))

    def _characteristics(self, xs: np.ndarray, z_star: float) -> Callable[[float], np.ndarray]:
        if self.flow is not None:
            if self.flow.anchor - z_star < self.flow.horizon - 1e-12:
                raise InvalidArgumentError("backward flow is too short", needed=z_star, anchor=self.flow.anchor)
            trajectories = [self.flow.trajectory([x]) for x in xs]
            anchor = self.flow.anchor
            return lambda z: np.array([tr.at(anchor - z)[0, 0] for tr in trajectories])
        sol = solve_ivp(
            lambda z, y: -self._speed(y),
            (0.0, z_star),
            xs,
            method="DOP853",
            rtol=1e-12,
            atol=1e-12,
            dense_output=True,
        )
        if sol.status < 0:
            raise NumericalFailureError("characteristic integration failed", message=sol.message)
        return sol.sol

    def apply(self, f: ComplexFunction, xs, sup_f: Optional[float] = None) -> np.ndarray:
        """R(mu) f at the points xs"""
        xs = np.atleast_1d(np.asarray(xs, dtype=float)).ravel()
        sup_f = self._sup(f, xs) if sup_f is None else sup_f
        z_star = self.horizon(sup_f)
        path = self._characteristics(xs, z_star)
        n, mu = xs.size, self.mu

        def integrand(z: float) -> np.ndarray:
            values = np.exp(-mu * z) * np.asarray(f(path(z)), dtype=complex)
            return np.concatenate([values.real, values.imag])

        result, error = quad_vec(integrand, 0.0, z_star, epsabs=1e-13, epsrel=1e-12, norm="max")
        log.debug(f"resolvent mu={mu}: z*={z_star:.2f}, quadrature error {error:.1e} on {n} points")
        return result[:n] + 1j * result[n:]

    def residual(self, f: ComplexFunction, xs) -> float:
        """max |a v' + mu v - f| with a five-point stencil away from the surfaces"""
        xs = np.atleast_1d(np.asarray(xs, dtype=float)).ravel()
        h = self.stencil
        if self.coefficient.has_x_surfaces:
            walls = np.asarray(self.coefficient.surface_positions(0.0, xs.min() - 1.0, xs.max() + 1.0))
            if walls.size:
                xs = xs[np.min(np.abs(xs[:, None] - walls[None, :]), axis=1) > 3.0 * h]
        offsets = h * np.arange(-2, 3)
        v = self.apply(f, (xs[:, None] + offsets[None, :]).ravel()).reshape(xs.size, 5)
        dv = (v[:, 0] - 8.0 * v[:, 1] + 8.0 * v[:, 3] - v[:, 4]) / (12.0 * h)
        r = self._speed(xs) * dv + self.mu * v[:, 2] - f(xs)
        return float(np.max(np.abs(r)))

    def powers(
        self, f: ComplexFunction, window: Tuple[float, float], k_max: int
    ) -> Tuple[np.ndarray, List[np.ndarray]]:
        """
        Grid values of f, R f, ..., R^k_max f

        The grid extends to the right of the window far enough for the
        transported tails; intermediate powers are cubic interpolants.
        """
        sup_f = self._sup(f, np.asarray(window, dtype=float))
        tail = self.c1 * self.horizon(sup_f) * 1.5
        grid = np.arange(window[0], window[1] + tail + self.spacing, self.spacing)
        values = [np.asarray(f(grid), dtype=complex)]
        current: ComplexFunction = f
        for k in range(1, k_max + 1):
            values.append(self.apply(current, grid, sup_f=float(np.max(np.abs(values[-1])))))
            real = interp1d(grid, values[-1].real, kind="cubic", bounds_error=False, fill_value=0.0)
            imag = interp1d(grid, values[-1].imag, kind="cubic", bounds_error=False, fill_value=0.0)
            current = lambda x, real=real, imag=imag: real(x) + 1j * imag(x)
        return grid, values

    def report(
        self,
        f: ComplexFunction,
        window: Tuple[float, float] = (-8.0, 8.0),
        k_max: int = 4,
        check_points: Optional[np.ndarray] = None,
    ) -> ResolventReport:
        """Residual contract plus the norm ratios ||R^k f|| / ||f|| against sqrt(c1/c0) / Re(mu)^k"""
        check_points = np.linspace(window[0] / 2.0, window[1] / 2.0, 21) if check_points is None else check_points
        residual = self.residual(f, check_points)
        grid, values = self.powers(f, window, k_max)
        norms = [float(np.sqrt(np.sum(np.abs(v) ** 2) * self.spacing)) for v in values]
        if norms[0] == 0.0:
            raise InvalidArgumentError("f vanishes on the window")
        ratios = [n / norms[0] for n in norms[1:]]
        bounds = [float(np.sqrt(self.c1 / self.c0) / self.mu.real**k) for k in range(1, k_max + 1)]
        log.info(f"resolvent mu={self.mu}: residual {residual:.2e}, ratios {[f'{r:.3g}' for r in ratios]}")
        return ResolventReport(
            mu=(self.mu.real, self.mu.imag), residual=residual, c0=self.c0, c1=self.c1, ratios=ratios, bounds=bounds
        )


def resolvent_apply(a: Coefficient, mu: complex, f: ComplexFunction, xs, flow: Optional[FlowMap] = None) -> np.ndarray:
    return Resolvent(a, mu, flow).apply(f, xs)


def resolvent_report(
    a: Coefficient,
    mu: complex,
    f: ComplexFunction,
    window: Tuple[float, float] = (-8.0, 8.0),
    k_max: int = 4,
    bounds: Optional[Tuple[float, float]] = None,
) -> ResolventReport:
    return Resolvent(a, mu, bounds=bounds).report(f, window, k_max)
