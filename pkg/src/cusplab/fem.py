"""P1 finite elements for the transmission problem on fitted meshes.

The discrete problem is: find u_h matching the Dirichlet data on the outer
rectangle with

    int_Omega kappa grad(u_h) . grad(phi) dx
        = int_Omega f phi dx + int_S Q phi da     for all interior P1 hats.

Sign conventions, fixed once: the interface normal nu points into the upper
region (region 2), jumps are (trace from region 2) - (trace from region 1),
and Q = [[-kappa grad u]] . nu.  Integrating by parts region-wise then shows
the interface source enters the load with a plus sign, which is what the
manufactured cases and the discrete flux-jump diagnostics assume.

Derivative recovery is patch averaging: nodal gradients are area-weighted
means of the incident element gradients, and the element Hessian is the
(constant) gradient of the P1 interpolant of the nodal gradient field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg as _cg
from scipy.sparse.linalg import splu

from .errors import AssemblyError, DomainError
from .geometry import GeometryCtx, nu_S, tau_field
from .mesh import Mesh, build_graded_mesh
from .profiles import ProfileSpec, eval_profile

_GAUSS2 = (-1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0))

# degree-4 Dunavant rule on the reference triangle (6 points)
_D4_BARY = np.array([
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
])
_D4_W = np.array([0.223381589678011, 0.223381589678011, 0.223381589678011,
                  0.109951743655322, 0.109951743655322, 0.109951743655322])


def _as_matrix(kappa) -> np.ndarray:
    k = np.asarray(kappa, dtype=float)
    if k.ndim == 0:
        return np.array([[float(k), 0.0], [0.0, float(k)]])
    if k.shape == (2, 2):
        return k
    raise DomainError("kappa must be a scalar or a 2x2 matrix")


@dataclass
class FemProblem:
    """Transmission problem data on a fitted mesh."""

    mesh: Mesh
    profile: ProfileSpec
    kappa1: object = 1.0
    kappa2: object = 1.0
    f: Optional[Callable] = None          # f(x, region) -> float
    Q: Optional[Callable] = None          # Q(x) -> float on the interface
    dirichlet: Optional[Callable] = None  # boundary values, default 0

    def kappa_matrix(self, region: int) -> np.ndarray:
        return _as_matrix(self.kappa1 if region == 1 else self.kappa2)

    def ellipticity(self) -> Tuple[float, float]:
        eigs = []
        for region in (1, 2):
            eigs.extend(np.linalg.eigvalsh(self.kappa_matrix(region)))
        k0, k1 = float(np.min(eigs)), float(np.max(eigs))
        if k0 <= 0.0:
            raise AssemblyError("kappa must be positive definite")
        return k0, k1


@dataclass
class FemSolution:
    mesh: Mesh
    nodal_values: np.ndarray              # (N,)
    element_gradients: np.ndarray         # (M, 2)
    residual_rel: float
    load_norm: float
    recovered_gradient: Optional[np.ndarray] = None   # (N, 2)
    recovered_hessian: Optional[np.ndarray] = None    # (M, 2, 2)
    v1: Optional[np.ndarray] = None                   # (N,), NaN at the tip

    def value_at(self, x) -> float:
        """Evaluate the P1 field at a point (linear search; test helper)."""
        x = np.asarray(x, dtype=float)
        tris = self.mesh.triangles
        pts = self.mesh.nodes
        for tri in tris:
            a, b, c = pts[tri]
            T = np.column_stack([b - a, c - a])
            try:
                lam = np.linalg.solve(T, x - a)
            except np.linalg.LinAlgError:
                continue
            l1, l2 = lam
            l0 = 1.0 - l1 - l2
            if min(l0, l1, l2) >= -1e-12:
                vals = self.nodal_values[tri]
                return float(l0 * vals[0] + l1 * vals[1] + l2 * vals[2])
        raise DomainError("point outside the mesh")


def _element_geometry(mesh: Mesh):
    """Areas and barycentric gradients for every triangle."""
    p = mesh.nodes[mesh.triangles]           # (M, 3, 2)
    v1 = p[:, 1] - p[:, 0]
    v2 = p[:, 2] - p[:, 0]
    area2 = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    if np.any(area2 <= 0):
        raise AssemblyError("mesh contains non-positive triangles")
    grads = np.empty((len(p), 3, 2))
    for k in range(3):
        opp = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
        grads[:, k, 0] = -opp[:, 1] / area2
        grads[:, k, 1] = opp[:, 0] / area2
    return 0.5 * area2, grads


def assemble_system(problem: FemProblem):
    """Assemble the stiffness matrix and load vector (no boundary handling)."""
    mesh = problem.mesh
    n = len(mesh.nodes)
    areas, grads = _element_geometry(mesh)
    kmats = np.stack([problem.kappa_matrix(int(r)) for r in mesh.regions])

    # K_T[i, j] = area * (kappa grad_i) . grad_j, scattered into COO triplets
    kg = np.einsum("tab,tib->tia", kmats, grads)
    ke = np.einsum("tia,tja->tij", kg, grads) * areas[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).reshape(-1)
    cols = np.tile(mesh.triangles, (1, 3)).reshape(-1)
    K = sparse.coo_matrix((ke.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()

    b = np.zeros(n)
    if problem.f is not None:
        p = mesh.nodes[mesh.triangles]
        mids = 0.5 * (p[:, [1, 2, 0]] + p[:, [2, 0, 1]])   # mid of edge opposite k
        for t in range(len(mesh.triangles)):
            region = int(mesh.regions[t])
            fm = [problem.f(mids[t, k], region) for k in range(3)]
            for k in range(3):
                # hat_k vanishes on the opposite edge midpoint
                contrib = (areas[t] / 3.0) * 0.5 * (fm[(k + 1) % 3] + fm[(k + 2) % 3])
                b[mesh.triangles[t, k]] += contrib
    if problem.Q is not None:
        for a, c in problem.mesh.interface_edges:
            xa, xc = mesh.nodes[a], mesh.nodes[c]
            ell = float(np.linalg.norm(xc - xa))
            for g in _GAUSS2:
                s = 0.5 * (1.0 + g)
                x = xa + s * (xc - xa)
                qv = float(problem.Q(x)) * 0.5 * ell
                b[a] += qv * (1.0 - s)
                b[c] += qv * s
    return K, b


def assemble_and_solve(problem: FemProblem, tol: float = 1e-10,
                       method: str = "direct") -> FemSolution:
    """Solve the discrete transmission problem.

    Dirichlet rows are eliminated; the solve is either a sparse LU or CG with
    a relative-residual target of ``tol``.  A factorization failure or a
    residual above tolerance signals an assembly error.
    """
    if not (0.0 < tol <= 1e-4):
        raise DomainError("tol must lie in (0, 1e-4]")
    problem.ellipticity()
    mesh = problem.mesh
    K, b = assemble_system(problem)
    n = len(mesh.nodes)

    bdry = np.asarray(mesh.boundary_nodes, dtype=np.int64)
    is_bdry = np.zeros(n, dtype=bool)
    is_bdry[bdry] = True
    interior = np.where(~is_bdry)[0]

    u = np.zeros(n)
    if problem.dirichlet is not None:
        u[bdry] = [problem.dirichlet(mesh.nodes[i]) for i in bdry]

    Kii = K[interior][:, interior].tocsc()
    rhs = b[interior] - K[interior][:, bdry] @ u[bdry]

    try:
        if method == "direct":
            lu = splu(Kii)
            ui = lu.solve(rhs)
        elif method == "cg":
            diag = Kii.diagonal()
            M = sparse.diags(1.0 / np.where(diag > 0, diag, 1.0))
            ui, info = _cg(Kii, rhs, rtol=tol * 1e-2, maxiter=20 * len(rhs), M=M)
            if info != 0:
                raise AssemblyError(f"cg failed to converge (info={info})")
        else:
            raise DomainError(f"unknown method {method!r}")
    except RuntimeError as exc:
        raise AssemblyError(f"sparse solve failed: {exc}") from exc

    u[interior] = ui
    load_norm = float(np.linalg.norm(b[interior])) if len(interior) else 0.0
    resid = float(np.linalg.norm(Kii @ ui - rhs))
    resid_rel = resid / max(load_norm, np.linalg.norm(rhs), 1e-300)
    if not np.all(np.isfinite(u)):
        raise AssemblyError("solution contains non-finite values")
    if resid_rel > max(tol, 1e-12) * 100:
        raise AssemblyError(f"relative residual {resid_rel:.2e} above tolerance")

    areas, grads = _element_geometry(mesh)
    egrad = np.einsum("tk,tka->ta", u[mesh.triangles], grads)
    return FemSolution(mesh=mesh, nodal_values=u, element_gradients=egrad,
                       residual_rel=resid_rel, load_norm=load_norm)


# ------------------------------------------------------------- manufactured

def _poly_bump(u: float) -> float:
    return (1.0 - u * u) ** 3 if abs(u) < 1.0 else 0.0


def manufactured_case(name: str, profile: Optional[ProfileSpec] = None,
                      h0: float = 0.15, beta: float = 0.5, levels: int = 4,
                      kappa1: float = 1.0, kappa2: float = 2.0,
                      mesh: Optional[Mesh] = None):
    """Return (FemProblem, u_exact, grad_exact) for a named validation case.

    smooth_bulk     u = |x|^2 globally with a kappa contrast; the interface
                    source Q = -(kappa2-kappa1) * grad(u) . nu keeps the
                    globally smooth field an exact solution.
    interface_flux  pure interface source: f = 0, Q a polynomial bump on the
                    branches away from the tip; no closed form (u_exact None).
    cone_reference  the same quadratic on the cone with kappa1 = kappa2 = 1.
    """
    if name == "cone_reference":
        profile = ProfileSpec(kind="power", R0=1.0, theta=1.0)
        kappa1 = kappa2 = 1.0
    if profile is None:
        profile = ProfileSpec(kind="power", R0=1.0, theta=1.0)
    if mesh is None:
        mesh = build_graded_mesh(profile, h0=h0, beta=beta, levels=levels)

    if name in ("smooth_bulk", "cone_reference"):
        u_exact = lambda x: float(x[0] ** 2 + x[1] ** 2)
        grad_exact = lambda x: np.array([2.0 * x[0], 2.0 * x[1]])
        k1m, k2m = _as_matrix(kappa1), _as_matrix(kappa2)

        def f(x, region):
            km = k1m if region == 1 else k2m
            return -2.0 * float(np.trace(km))

        dk = k2m - k1m

        def Q(x):
            if abs(x[0]) < 1e-14:
                return 0.0
            nu = nu_S(profile, x)
            return -float(nu @ (dk @ grad_exact(x)))

        problem = FemProblem(mesh=mesh, profile=profile, kappa1=kappa1,
                             kappa2=kappa2, f=f, Q=Q, dirichlet=u_exact)
        return problem, u_exact, grad_exact

    if name == "interface_flux":
        R0 = profile.R0

        def Q(x):
            return _poly_bump((abs(x[0]) - 0.55 * R0) / (0.25 * R0))

        problem = FemProblem(mesh=mesh, profile=profile, kappa1=kappa1,
                             kappa2=kappa2, f=None, Q=Q, dirichlet=None)
        return problem, None, None

    raise DomainError(f"unknown manufactured case {name!r}")


# ------------------------------------------------------------------ error norms

def error_norms(sol: FemSolution, u_exact, grad_exact) -> Tuple[float, float]:
    """(L2, H1-seminorm) errors by degree-4 element quadrature."""
    mesh = sol.mesh
    areas, _ = _element_geometry(mesh)
    p = mesh.nodes[mesh.triangles]
    uv = sol.nodal_values[mesh.triangles]
    l2 = 0.0
    h1 = 0.0
    for t in range(len(mesh.triangles)):
        for bary, w in zip(_D4_BARY, _D4_W):
            x = bary @ p[t]
            uh = float(bary @ uv[t])
            du = uh - u_exact(x)
            l2 += w * areas[t] * du * du
            ge = np.asarray(grad_exact(x), dtype=float)
            dg = sol.element_gradients[t] - ge
            h1 += w * areas[t] * float(dg @ dg)
    return math.sqrt(l2), math.sqrt(h1)


# ------------------------------------------------------------------- recovery

def recover_derivatives(sol: FemSolution, ctx: Optional[GeometryCtx] = None):
    """Patch-averaged nodal gradients, element Hessians and the tangential
    derivative field v1 = tau . grad(u) (NaN at the tip node).

    Returns (recovered_hessian, v1) and stores both on the solution.
    """
    mesh = sol.mesh
    areas, grads = _element_geometry(mesh)
    n = len(mesh.nodes)
    gsum = np.zeros((n, 2))
    wsum = np.zeros(n)
    for k in range(3):
        np.add.at(gsum, mesh.triangles[:, k], sol.element_gradients * areas[:, None])
        np.add.at(wsum, mesh.triangles[:, k], areas)
    gnod = gsum / np.maximum(wsum, 1e-300)[:, None]
    sol.recovered_gradient = gnod

    hess = np.einsum("tka,tkb->tab", grads, gnod[mesh.triangles])
    sol.recovered_hessian = hess

    v1 = np.full(n, np.nan)
    if ctx is not None:
        for i in range(n):
            if i == mesh.tip_node:
                continue
            x = mesh.nodes[i]
            if np.hypot(x[0], x[1]) <= 1e-14:
                continue
            if abs(x[1]) >= ctx.sigma_R0:
                continue
            tau = tau_field(ctx, np.array([x[0], x[1]]))[0]
            v1[i] = float(tau @ gnod[i])
        sol.v1 = v1
    return hess, v1


# ------------------------------------------------------------------ diagnostics

def galerkin_residual(problem: FemProblem, sol: FemSolution) -> float:
    """Residual of the solved system against all interior hat functions,
    relative to the load norm."""
    K, b = assemble_system(problem)
    r = K @ sol.nodal_values - b
    is_bdry = np.zeros(len(sol.nodal_values), dtype=bool)
    is_bdry[problem.mesh.boundary_nodes] = True
    rn = float(np.linalg.norm(r[~is_bdry]))
    return rn / max(float(np.linalg.norm(b[~is_bdry])), 1e-300)


def energy_identity_gap(problem: FemProblem, sol: FemSolution) -> float:
    """k0*|grad u_h|^2 - (int f u_h + int_S Q u_h), nonpositive up to roundoff
    for homogeneous Dirichlet data (discrete coercivity)."""
    mesh = problem.mesh
    areas, _ = _element_geometry(mesh)
    k0, _ = problem.ellipticity()
    grad_sq = float(np.sum(areas * np.sum(sol.element_gradients ** 2, axis=1)))
    _, b = assemble_system(problem)
    work = float(b @ sol.nodal_values)
    return k0 * grad_sq - work


def interface_flux_jump(problem: FemProblem, sol: FemSolution):
    """Edge-wise discrete flux jump [[-kappa grad u_h]] . nu on the interface.

    Returns (midpoints, jump values, exact Q values) with the jump computed
    from the two elements adjacent to each interface edge.
    """
    mesh = problem.mesh
    inc = mesh.edge_incidence()
    mids, jumps, qvals = [], [], []
    for a, c in mesh.interface_edges:
        key = (min(int(a), int(c)), max(int(a), int(c)))
        tris = inc.get(key, [])
        if len(tris) != 2:
            continue
        t1 = next((t for t in tris if mesh.regions[t] == 1), None)
        t2 = next((t for t in tris if mesh.regions[t] == 2), None)
        if t1 is None or t2 is None:
            continue
        mid = 0.5 * (mesh.nodes[a] + mesh.nodes[c])
        if abs(mid[0]) < 1e-14:
            continue
        nu = nu_S(problem.profile, mid)
        flux1 = problem.kappa_matrix(1) @ sol.element_gradients[t1]
        flux2 = problem.kappa_matrix(2) @ sol.element_gradients[t2]
        jumps.append(float(nu @ (flux1 - flux2)))
        qvals.append(float(problem.Q(mid)) if problem.Q is not None else 0.0)
        mids.append(mid)
    return np.array(mids), np.array(jumps), np.array(qvals)
