"""Discrete quad layout immersion data and the Q1-Q4 validators.

A SeamlessParam stores one UV coordinate per face corner plus a rigid
quarter-turn transition per cut halfedge.  The transition stored on a
halfedge h maps UV coordinates from the chart of twin(h)'s face onto the
chart of h's face.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .cutgraph import CompletionMesh, CutGraph, cut_mesh, make_cut_graph
from .errors import NonQuantizedCone, ZeroAreaFace
from .mesh import TopologyInfo, TriMesh, topology_info

# quarter-turn rotation matrices, ROTS[j] = counterclockwise by j*pi/2
ROTS = [
    np.array([[1.0, 0.0], [0.0, 1.0]]),
    np.array([[0.0, -1.0], [1.0, 0.0]]),
    np.array([[-1.0, 0.0], [0.0, -1.0]]),
    np.array([[0.0, 1.0], [-1.0, 0.0]]),
]

ANGLE_TOL = 1e-6  # Q2 quantization tolerance (radians)
CONE_DETECT_TOL = 1e-2  # angle deviation below which a vertex counts as regular
GB_TOL = 1e-9
REL_TOL = 1e-7  # UV tolerances, relative to the UV bounding-box diagonal


@dataclass(frozen=True)
class SeamTransition:
    rotation: int  # j in {0,1,2,3}, counterclockwise multiples of pi/2
    translation: tuple  # (tu, tv)

    def __post_init__(self):
        object.__setattr__(self, "rotation", int(self.rotation) % 4)
        t = tuple(float(x) for x in self.translation)
        if len(t) != 2:
            raise ValueError("translation must be a 2-vector")
        object.__setattr__(self, "translation", t)

    def apply(self, p):
        p = np.asarray(p, dtype=float)
        return p @ ROTS[self.rotation].T + np.asarray(self.translation)

    def apply_vector(self, v):
        return np.asarray(v, dtype=float) @ ROTS[self.rotation].T

    def inverse(self):
        j = (4 - self.rotation) % 4
        t = -(ROTS[j] @ np.asarray(self.translation))
        return SeamTransition(j, tuple(t))

    def compose(self, other):
        """self after other: x -> self(other(x))."""
        j = (self.rotation + other.rotation) % 4
        t = ROTS[self.rotation] @ np.asarray(other.translation) + np.asarray(
            self.translation
        )
        return SeamTransition(j, tuple(t))

    def is_identity(self, tol=0.0):
        return self.rotation == 0 and max(map(abs, self.translation)) <= tol


IDENTITY = SeamTransition(0, (0.0, 0.0))


@dataclass(frozen=True)
class ConeRecord:
    vertex: int
    location: str  # "interior" | "boundary"
    m: int
    angle: float  # theta = total parametric angle
    defect: float  # 2*pi - theta (interior) or pi - theta (boundary)


@dataclass
class PropertyResult:
    passed: bool = True
    violations: list = field(default_factory=list)

    def fail(self, **kw):
        self.passed = False
        self.violations.append(kw)


@dataclass
class ValidationReport:
    q1: PropertyResult
    q2: PropertyResult
    q3: PropertyResult
    q4: PropertyResult
    gauss_bonnet: PropertyResult
    holonomy: PropertyResult
    jacobian_min: float
    jacobian_max: float
    cones: list

    @property
    def passed(self):
        return all(
            r.passed
            for r in (self.q1, self.q2, self.q3, self.q4, self.gauss_bonnet, self.holonomy)
        )

    def failed_properties(self):
        names = ("q1", "q2", "q3", "q4", "gauss_bonnet", "holonomy")
        return [n for n in names if not getattr(self, n).passed]


class SeamlessParam:
    """Per-corner UV coordinates with seam transitions (the map on the
    completion of the cut surface)."""

    def __init__(self, mesh: TriMesh, uv, seams, declared_cones=None):
        self.mesh = mesh
        self.uv = np.ascontiguousarray(uv, dtype=float)
        if self.uv.shape != (len(mesh.faces), 3, 2):
            raise ValueError(f"uv must have shape ({len(mesh.faces)}, 3, 2)")
        self.seams = dict(seams)
        for h, t in self.seams.items():
            if not isinstance(t, SeamTransition):
                raise ValueError("seam values must be SeamTransition")
            if h < 0 or h >= mesh.n_halfedges or mesh.twin[h] == -1:
                raise ValueError(f"seam halfedge {h} is not an interior halfedge")
            if int(mesh.twin[h]) not in self.seams:
                raise ValueError(f"seam halfedge {h} lacks its opposite record")
        self.declared_cones = list(declared_cones) if declared_cones else None
        self.cut_edges = frozenset(int(mesh.edge_id[h]) for h in self.seams)
        self._completion = None
        self._cut_graph = None
        self._cone_scan = None

    @property
    def completion(self) -> CompletionMesh:
        if self._completion is None:
            self._completion = cut_mesh(self.mesh, self.cut_edges)
        return self._completion

    @property
    def cut_graph(self) -> CutGraph:
        if self._cut_graph is None:
            cones = {c.vertex for c in self.cone_scan()[0]}
            self._cut_graph = make_cut_graph(self.mesh, self.cut_edges, cones)
        return self._cut_graph

    def uv_scale(self):
        """UV bounding-box diagonal (0 for an empty mesh)."""
        flat = self.uv.reshape(-1, 2)
        if not len(flat):
            return 0.0
        span = flat.max(axis=0) - flat.min(axis=0)
        return float(np.hypot(*span))

    def corner_uv(self, h):
        return self.uv[h // 3, h % 3]

    # -- cone scan ---------------------------------------------------------

    def completion_vertex_corners(self, cv):
        """Corner halfedges (h = 3*f + i) of a completion vertex, fan order."""
        return self.completion.mesh.vertex_fan(cv)

    def cone_scan(self, masked=frozenset()):
        """(records, violations): cone records for all non-regular vertices
        plus Q2 quantization violations.  Vertices whose fan touches a face
        in `masked` (orientation-reversed faces already reported under Q1)
        are skipped so one bad face does not cascade into Q2."""
        if not masked and self._cone_scan is not None:
            return self._cone_scan
        comp = self.completion
        mesh = self.mesh
        records = []
        violations = []
        for v in range(len(mesh.vertices)):
            if masked and any(
                (h // 3) in masked for h in mesh.vertex_fan(v)
            ):
                continue
            phi = 0.0
            for cv in comp.vertex_copies[v]:
                phi += parametric_angle(self, cv)
            boundary = bool(mesh.is_boundary_vertex[v])
            regular = math.pi if boundary else 2.0 * math.pi
            if abs(phi - regular) <= CONE_DETECT_TOL:
                continue
            m = int(round(phi / (math.pi / 2.0)))
            err = abs(phi - m * math.pi / 2.0)
            if err > CONE_DETECT_TOL or m < 1:
                violations.append(
                    {
                        "vertex": v,
                        "measured": phi,
                        "expected": m * math.pi / 2.0,
                        "reason": "non-quantized cone angle" if m >= 1 else "polar cone",
                    }
                )
                continue
            records.append(
                ConeRecord(
                    vertex=v,
                    location="boundary" if boundary else "interior",
                    m=m,
                    angle=m * math.pi / 2.0,
                    defect=regular - m * math.pi / 2.0,
                )
            )
        if not masked:
            self._cone_scan = (records, violations)
        return records, violations

    def cone_vertices(self):
        return {c.vertex for c in self.cone_scan()[0]}


def parametric_angle(param: SeamlessParam, completion_vertex: int) -> float:
    """Sum of the (unsigned) UV wedge angles of the copy's face corners."""
    scale = max(param.uv_scale(), 1e-30)
    total = 0.0
    for h in param.completion_vertex_corners(completion_vertex):
        f, i = h // 3, h % 3
        a = param.uv[f, (i + 1) % 3] - param.uv[f, i]
        b = param.uv[f, (i + 2) % 3] - param.uv[f, i]
        cross = a[0] * b[1] - a[1] * b[0]
        if abs(cross) < 1e-16 * scale * scale:
            raise ZeroAreaFace(f"face {f} has (near) zero UV area")
        total += math.atan2(abs(cross), float(np.dot(a, b)))
    return total


def detect_cones(param: SeamlessParam):
    """Cone records for every non-regular vertex; raises on non-quantized
    angles (a Q2 violation)."""
    records, violations = param.cone_scan()
    if violations:
        v = violations[0]
        raise NonQuantizedCone(
            f"vertex {v['vertex']}: angle {v['measured']:.9f} is not a "
            f"multiple of pi/2"
        )
    return list(records)


def check_gauss_bonnet(cones, topo: TopologyInfo) -> float:
    """Residual of sum of cone defects minus 2*pi*chi."""
    total = sum(c.defect for c in cones)
    return float(total - 2.0 * math.pi * topo.euler)


def seam_transition_fit(param: SeamlessParam, arc, deviations=None) -> SeamTransition:
    """The unique quarter-turn rigid map carrying the twin-side UVs of the
    arc's first halfedge onto its face side, verified constant along the arc.
    """
    from .errors import InconsistentAlongArc, NoRigidQuarterTurnFit

    mesh = param.mesh
    tol = REL_TOL * max(param.uv_scale(), 1.0)
    fit = None
    for idx, h in enumerate(arc.halfedges):
        th = int(mesh.twin[h])
        if th == -1:
            raise NoRigidQuarterTurnFit(f"halfedge {h} is a boundary edge")
        f, i = h // 3, h % 3
        p_a = param.uv[f, i]  # at src(h)
        p_b = param.uv[f, (i + 1) % 3]  # at dst(h)
        tf, ti = th // 3, th % 3
        q_a = param.uv[tf, (ti + 1) % 3]  # at src(h), twin side
        q_b = param.uv[tf, ti]  # at dst(h), twin side
        if fit is None:
            vp = p_b - p_a
            vq = q_b - q_a
            best, best_err = None, np.inf
            for j in range(4):
                err = float(np.linalg.norm(ROTS[j] @ vq - vp))
                if err < best_err:
                    best, best_err = j, err
            if best_err > tol:
                raise NoRigidQuarterTurnFit(
                    f"no quarter-turn rotation matches halfedge {h} "
                    f"(best residual {best_err:.3e})"
                )
            t = p_a - ROTS[best] @ q_a
            fit = SeamTransition(best, tuple(t))
        err = max(
            float(np.linalg.norm(fit.apply(q_a) - p_a)),
            float(np.linalg.norm(fit.apply(q_b) - p_b)),
        )
        if deviations is not None:
            deviations.append({"halfedge": int(h), "deviation": err})
        if err > tol:
            raise InconsistentAlongArc(
                f"transition varies along arc at halfedge {h} "
                f"(deviation {err:.3e})"
            )
    return fit


def vertex_holonomy(param: SeamlessParam, vertex: int) -> int:
    """Mod-4 sum of seam rotations around an interior vertex's fan."""
    mesh = param.mesh
    if mesh.is_boundary_vertex[vertex]:
        raise ValueError(f"vertex {vertex} lies on the surface boundary")
    fan = mesh.vertex_fan(vertex)
    total = 0
    k = len(fan)
    for idx in range(k):
        # crossing from face(fan[idx-1]) into face(fan[idx]); the shared
        # edge's halfedge on the entered side is fan[idx] itself
        g = fan[idx]
        if int(mesh.edge_id[g]) in param.cut_edges:
            total += param.seams[g].rotation
    return total % 4


def expected_holonomy(m: int) -> int:
    """Holonomy residue consistent with a cone of angle m*pi/2."""
    return (4 - m) % 4


def validate_immersion(param: SeamlessParam) -> ValidationReport:
    mesh = param.mesh
    uv = param.uv
    scale = max(param.uv_scale(), 1.0)
    uv_tol = REL_TOL * scale

    # ---- Q1: orientation and local injectivity --------------------------
    q1 = PropertyResult()
    e1 = uv[:, 1] - uv[:, 0]
    e2 = uv[:, 2] - uv[:, 0]
    dets = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    masked = set()
    for f in np.nonzero(dets <= 0)[0]:
        q1.fail(face=int(f), measured=float(dets[f]), expected="positive UV area")
        masked.add(int(f))

    jmin, jmax = _jacobian_bounds(param, masked)

    comp = param.completion
    cone_vs = param.cone_vertices()
    node_vs = _cut_node_vertices(param)
    for cv in range(len(comp.mesh.vertices)):
        ov = int(comp.vertex_map[cv])
        if ov in cone_vs or ov in node_vs:
            continue
        corners = param.completion_vertex_corners(cv)
        if not corners or any((h // 3) in masked for h in corners):
            continue
        try:
            theta = parametric_angle(param, cv)
        except ZeroAreaFace:
            continue  # already reported as a Q1 determinant failure
        if comp.mesh.is_boundary_vertex[cv]:
            if theta >= 2.0 * math.pi - ANGLE_TOL:
                q1.fail(
                    completion_vertex=int(cv),
                    measured=theta,
                    expected="copy angle < 2*pi (locally injective)",
                )
        else:
            if abs(theta - 2.0 * math.pi) > ANGLE_TOL:
                q1.fail(
                    completion_vertex=int(cv),
                    measured=theta,
                    expected=2.0 * math.pi,
                )

    # ---- Q2: quantized cones and chart consistency ----------------------
    q2 = PropertyResult()
    records, cone_violations = param.cone_scan(masked=frozenset(masked))
    for v in cone_violations:
        q2.fail(**v)
    # single-chart agreement across non-cut interior edges
    for e in range(mesh.n_edges):
        h = int(mesh.edge_halfedge[e])
        th = int(mesh.twin[h])
        if th == -1 or e in param.cut_edges:
            continue
        if (h // 3) in masked or (th // 3) in masked:
            continue
        f, i = h // 3, h % 3
        tf, ti = th // 3, th % 3
        d1 = float(np.linalg.norm(uv[f, i] - uv[tf, (ti + 1) % 3]))
        d2 = float(np.linalg.norm(uv[f, (i + 1) % 3] - uv[tf, ti]))
        if max(d1, d2) > uv_tol:
            q2.fail(
                edge=int(e),
                measured=max(d1, d2),
                expected="matching corner UVs across a non-seam edge",
            )
    if param.declared_cones is not None:
        declared = {(c.vertex, c.location, c.m) for c in param.declared_cones}
        detected = {(c.vertex, c.location, c.m) for c in records}
        for item in sorted(declared ^ detected):
            q2.fail(
                vertex=item[0],
                measured="declared" if item in declared else "detected",
                expected="declared and detected cones to agree",
            )

    # ---- Q3: constant quarter-turn transitions per arc -------------------
    q3 = PropertyResult()
    from .errors import InconsistentAlongArc, NoRigidQuarterTurnFit

    for aidx, arc in enumerate(param.cut_graph.arcs):
        try:
            fit = seam_transition_fit(param, arc)
        except (NoRigidQuarterTurnFit, InconsistentAlongArc) as err:
            q3.fail(arc=aidx, measured=str(err), expected="constant rigid quarter-turn map")
            continue
        for h in arc.halfedges:
            stored = param.seams[h]
            dev = _transition_distance(stored, fit)
            if dev > uv_tol:
                q3.fail(
                    arc=aidx,
                    halfedge=int(h),
                    measured=(stored.rotation, stored.translation),
                    expected=(fit.rotation, fit.translation),
                )
    for h, t in param.seams.items():
        back = param.seams[int(mesh.twin[h])]
        dev = _transition_distance(back, t.inverse())
        if dev > uv_tol:
            q3.fail(
                halfedge=int(h),
                measured=(back.rotation, back.translation),
                expected="inverse of the opposite transition",
            )

    # ---- Q4: boundary segments on constant u or v ------------------------
    q4 = PropertyResult()
    for seg in _boundary_segments(param):
        pts = np.array(seg["uvs"])
        spread = pts.max(axis=0) - pts.min(axis=0)
        if min(spread) > uv_tol:
            q4.fail(
                start_vertex=seg["start_vertex"],
                measured=(float(spread[0]), float(spread[1])),
                expected="constant u or constant v along the boundary segment",
            )

    # ---- Gauss-Bonnet ----------------------------------------------------
    gb = PropertyResult()
    topo = topology_info(mesh)
    residual = check_gauss_bonnet(records, topo)
    if abs(residual) > GB_TOL:
        gb.fail(measured=residual, expected=0.0)

    # ---- holonomy ---------------------------------------------------------
    hol = PropertyResult()
    m_by_vertex = {c.vertex: c.m for c in records}
    for v in range(len(mesh.vertices)):
        if mesh.is_boundary_vertex[v]:
            continue
        if not any(
            int(mesh.edge_id[h]) in param.cut_edges for h in mesh.vertex_fan(v)
        ):
            continue  # single chart, trivially zero
        r = vertex_holonomy(param, v)
        want = expected_holonomy(m_by_vertex.get(v, 4))
        if r != want:
            hol.fail(vertex=int(v), measured=r, expected=want)

    return ValidationReport(
        q1=q1,
        q2=q2,
        q3=q3,
        q4=q4,
        gauss_bonnet=gb,
        holonomy=hol,
        jacobian_min=jmin,
        jacobian_max=jmax,
        cones=records,
    )


def _transition_distance(a: SeamTransition, b: SeamTransition) -> float:
    if a.rotation != b.rotation:
        return np.inf
    return float(
        np.linalg.norm(np.asarray(a.translation) - np.asarray(b.translation))
    )


def _jacobian_bounds(param, masked):
    """Min/max singular value of the tangent-plane-to-UV map (diagnostics)."""
    mesh = param.mesh
    jmin, jmax = np.inf, 0.0
    for f in range(len(mesh.faces)):
        if f in masked:
            continue
        p = mesh.vertices[mesh.faces[f]]
        a = p[1] - p[0]
        b = p[2] - p[0]
        # orthonormal basis in the face plane
        u1 = a / np.linalg.norm(a)
        n = np.cross(a, b)
        nn = np.linalg.norm(n)
        if nn == 0:
            continue
        u2 = np.cross(n / nn, u1)
        E = np.array([[a @ u1, b @ u1], [a @ u2, b @ u2]])
        U = np.column_stack(
            [param.uv[f, 1] - param.uv[f, 0], param.uv[f, 2] - param.uv[f, 0]]
        )
        try:
            J = U @ np.linalg.inv(E)
        except np.linalg.LinAlgError:
            continue
        s = np.linalg.svd(J, compute_uv=False)
        jmin = min(jmin, float(s[-1]))
        jmax = max(jmax, float(s[0]))
    if not np.isfinite(jmin):
        jmin = 0.0
    return jmin, jmax


def _cut_node_vertices(param):
    """Vertices where the cut graph branches, ends, or meets the boundary."""
    counts = {}
    mesh = param.mesh
    for e in param.cut_edges:
        for v in mesh.edges[e]:
            counts[int(v)] = counts.get(int(v), 0) + 1
    return {
        v
        for v, k in counts.items()
        if k != 2 or mesh.is_boundary_vertex[v]
    }


def _boundary_segments(param):
    """Maximal runs of original-boundary halfedges in one completion chart,
    broken at boundary cones."""
    mesh = param.mesh
    comp = param.completion
    cones = param.cone_vertices()
    segments = []
    for loop in comp.mesh.boundary_loops:
        orig = [h for h in loop]
        n = len(orig)
        # keep only halfedges that are boundary in the original mesh
        keep = [mesh.twin[h] == -1 for h in orig]
        if not any(keep):
            continue
        # break points: cut-side edges (not kept) and boundary cones
        breaks = set()
        for idx in range(n):
            if not keep[idx]:
                breaks.add(idx)  # this position interrupts any run
        runs = []
        if not breaks:
            # whole loop is original boundary; break at cones only
            cone_pos = [
                idx
                for idx in range(n)
                if int(comp.vertex_map[comp.mesh.src(orig[idx])]) in cones
            ]
            if not cone_pos:
                runs.append(list(range(n)))
            else:
                for a, b in zip(cone_pos, cone_pos[1:] + [cone_pos[0] + n]):
                    runs.append([(a + j) % n for j in range(b - a)])
        else:
            cur = []
            order = sorted(breaks)
            start = order[0]
            for step in range(1, n + 1):
                idx = (start + step) % n
                if idx in breaks:
                    if cur:
                        runs.append(cur)
                        cur = []
                    continue
                # also break at a cone vertex at the run's interior
                if cur:
                    vsrc = int(comp.vertex_map[comp.mesh.src(orig[idx])])
                    if vsrc in cones:
                        runs.append(cur)
                        cur = []
                cur.append(idx)
            if cur:
                runs.append(cur)
        # same for the no-breaks case is handled above
        for run in runs:
            uvs = []
            for idx in run:
                h = orig[idx]
                f, i = h // 3, h % 3
                uvs.append(tuple(param.uv[f, i]))
                uvs.append(tuple(param.uv[f, (i + 1) % 3]))
            segments.append(
                {
                    "start_vertex": int(comp.vertex_map[comp.mesh.src(orig[run[0]])]),
                    "uvs": uvs,
                }
            )
    return segments


def cones_on_integer_grid(param: SeamlessParam, tol=1e-6) -> bool:
    """True when every cone copy's UV lies in Z^2 (integer grid map test)."""
    comp = param.completion
    for cone in param.cone_scan()[0]:
        for cv in comp.vertex_copies[cone.vertex]:
            for h in param.completion_vertex_corners(cv):
                p = param.corner_uv(h)
                if max(abs(p[0] - round(p[0])), abs(p[1] - round(p[1]))) > tol:
                    return False
    return True


def apply_global_motion(param: SeamlessParam, j: int, t=(0.0, 0.0)) -> SeamlessParam:
    """Re-root the chart: rotate all UVs by j*pi/2 and translate by t,
    conjugating every seam transition."""
    g = SeamTransition(j, tuple(t))
    ginv = g.inverse()
    uv = param.uv @ ROTS[g.rotation].T + np.asarray(g.translation)
    seams = {h: g.compose(s.compose(ginv)) for h, s in param.seams.items()}
    return SeamlessParam(param.mesh, uv, seams, declared_cones=param.declared_cones)
