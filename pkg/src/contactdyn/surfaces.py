"""Queryable contact geometry: nearest point, outward normal, and surface
velocity for static scenes and object-attached (moving) surfaces.

Shapes are defined in a local frame and positioned by an attachment:
static (fixed pose), trajectory (per-frame poses of the owning object), or
instant (pose plus rigid velocity, used inside the simulator).  Mesh
queries use angle-weighted pseudo-normals so the sign of (p - x) . n is a
correct inside/outside test for watertight meshes.
"""

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptySurfaceError, MissingPoseError, NormError
from .rotations import exp_so3, left_jacobian


@dataclass
class Pose:
    rotation: np.ndarray
    translation: np.ndarray

    @staticmethod
    def identity():
        return Pose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_vector(pose6):
        pose6 = np.asarray(pose6, dtype=float)
        return Pose(exp_so3(pose6[:3]), pose6[3:6].copy())

    def apply(self, p):
        return self.rotation @ p + self.translation

    def invert_point(self, p):
        return self.rotation.T @ (p - self.translation)

    def rotate(self, v):
        return self.rotation @ v


@dataclass
class SurfaceQuery:
    """Nearest surface point, outward unit normal, signed distance
    (positive outside), and the surface point's world velocity."""

    x: np.ndarray
    n: np.ndarray
    signed_distance: float
    x_velocity: np.ndarray


class StaticAttachment:
    def __init__(self, pose=None):
        self.pose_value = pose if pose is not None else Pose.identity()

    def pose(self, t):
        return self.pose_value

    def velocity(self, t):
        return np.zeros(3), np.zeros(3)


class TrajectoryAttachment:
    """Pose per frame; rigid velocity from central differences of the
    pose parameters (one-sided at the ends)."""

    def __init__(self, poses, dt):
        poses = np.asarray(poses, dtype=float)
        if poses.ndim != 2 or poses.shape[1] != 6:
            raise DomainError("pose trajectory must be T x 6 [rot, trans]")
        self.poses = poses
        self.dt = float(dt)

    def _require(self, t):
        if t is None:
            raise MissingPoseError("dynamic surface needs a frame index")
        if not (0 <= t < self.poses.shape[0]):
            raise MissingPoseError(f"no pose at frame {t}")
        return int(t)

    def pose(self, t):
        t = self._require(t)
        return Pose.from_vector(self.poses[t])

    def velocity(self, t):
        t = self._require(t)
        T = self.poses.shape[0]
        if T < 2:
            return np.zeros(3), np.zeros(3)
        lo, hi = max(t - 1, 0), min(t + 1, T - 1)
        rate = (self.poses[hi] - self.poses[lo]) / ((hi - lo) * self.dt)
        omega = left_jacobian(self.poses[t, :3]) @ rate[:3]
        return rate[3:], omega


class InstantAttachment:
    """Single pose with known rigid velocity (simulator-internal)."""

    def __init__(self, pose, linear_velocity=None, angular_velocity=None):
        self.pose_value = pose
        self.v = np.zeros(3) if linear_velocity is None else np.asarray(linear_velocity, float)
        self.w = np.zeros(3) if angular_velocity is None else np.asarray(angular_velocity, float)

    def pose(self, t):
        return self.pose_value

    def velocity(self, t):
        return self.v, self.w


class _Shape:
    def local_nearest(self, p):
        raise NotImplementedError


class PlaneShape(_Shape):
    """Half-space boundary through `point` with outward unit `normal`."""

    def __init__(self, point, normal):
        self.point = np.asarray(point, dtype=float)
        n = np.asarray(normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise NormError("plane normal must be unit length")
        self.normal = n

    def local_nearest(self, p):
        d = float((p - self.point) @ self.normal)
        return p - d * self.normal, self.normal.copy(), d


class SphereShape(_Shape):
    def __init__(self, center, radius):
        if radius <= 0.0:
            raise DomainError("sphere radius must be positive")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def local_nearest(self, p):
        rel = p - self.center
        dist = float(np.linalg.norm(rel))
        if dist < 1e-15:
            n = np.array([0.0, 0.0, 1.0])
        else:
            n = rel / dist
        return self.center + self.radius * n, n, dist - self.radius


class BoxShape(_Shape):
    """Axis-aligned solid box centered at the local origin."""

    def __init__(self, half_extents):
        h = np.asarray(half_extents, dtype=float)
        if h.shape != (3,) or np.any(h <= 0.0):
            raise DomainError("box half_extents must be 3 positive values")
        self.half = h

    def local_nearest(self, p):
        clamped = np.clip(p, -self.half, self.half)
        if np.any(clamped != p):
            delta = p - clamped
            d = float(np.linalg.norm(delta))
            return clamped, delta / d, d
        # Inside: push out through the closest face.
        gaps = self.half - np.abs(p)
        axis = int(np.argmin(gaps))
        sign = 1.0 if p[axis] >= 0.0 else -1.0
        x = p.copy()
        x[axis] = sign * self.half[axis]
        n = np.zeros(3)
        n[axis] = sign
        return x, n, -float(gaps[axis])


class MeshShape(_Shape):
    """Triangle mesh with consistent outward orientation.

    Nearest-point queries are exact brute force below `bvh_threshold`
    triangles and go through an AABB tree above it; both paths return
    identical results.
    """

    bvh_threshold = 10_000

    def __init__(self, vertices, faces, use_bvh=None):
        V = np.asarray(vertices, dtype=float)
        F = np.asarray(faces, dtype=int)
        if V.ndim != 2 or V.shape[1] != 3 or F.ndim != 2 or F.shape[1] != 3:
            raise DomainError("mesh needs V x 3 vertices and F x 3 triangles")
        if F.shape[0] == 0:
            raise EmptySurfaceError("mesh has no triangles")
        self.V, self.F = V, F
        self.A = V[F[:, 0]]
        self.ab = V[F[:, 1]] - self.A
        self.ac = V[F[:, 2]] - self.A
        raw = np.cross(self.ab, self.ac)
        areas = np.linalg.norm(raw, axis=1)
        if np.any(areas < 1e-12):
            raise DomainError("mesh contains degenerate (zero-area) triangles")
        self.face_normals = raw / areas[:, None]
        self._build_pseudonormals()
        self._bvh = None
        self.use_bvh = (F.shape[0] > self.bvh_threshold) if use_bvh is None else use_bvh

    def _build_pseudonormals(self):
        V, F, fn = self.V, self.F, self.face_normals
        vertex_n = np.zeros_like(V)
        edge_n = {}
        for f in range(F.shape[0]):
            tri = F[f]
            pts = V[tri]
            for k in range(3):
                a, b, c = pts[k], pts[(k + 1) % 3], pts[(k + 2) % 3]
                u, v = b - a, c - a
                cosang = np.clip(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)), -1.0, 1.0)
                vertex_n[tri[k]] += np.arccos(cosang) * fn[f]
            for k in range(3):
                e = (min(tri[k], tri[(k + 1) % 3]), max(tri[k], tri[(k + 1) % 3]))
                edge_n[e] = edge_n.get(e, np.zeros(3)) + fn[f]
        norms = np.linalg.norm(vertex_n, axis=1)
        norms[norms < 1e-15] = 1.0
        self.vertex_normals = vertex_n / norms[:, None]
        self.edge_normals = {
            e: n / max(np.linalg.norm(n), 1e-15) for e, n in edge_n.items()
        }

    def _closest_on_triangles(self, p, idx):
        """Vectorized closest point on a subset of triangles (Ericson)."""
        A, ab, ac = self.A[idx], self.ab[idx], self.ac[idx]
        ap = p - A
        bp = p - (A + ab)
        cp = p - (A + ac)
        d1 = np.einsum("ij,ij->i", ab, ap)
        d2 = np.einsum("ij,ij->i", ac, ap)
        d3 = np.einsum("ij,ij->i", ab, bp)
        d4 = np.einsum("ij,ij->i", ac, bp)
        d5 = np.einsum("ij,ij->i", ab, cp)
        d6 = np.einsum("ij,ij->i", ac, cp)
        va = d3 * d6 - d5 * d4
        vb = d5 * d2 - d1 * d6
        vc = d1 * d4 - d3 * d2

        v = np.zeros(len(idx))
        w = np.zeros(len(idx))
        # Face region by default.
        denom = va + vb + vc
        safe = np.where(np.abs(denom) < 1e-300, 1.0, denom)
        v[:] = vb / safe
        w[:] = vc / safe
        # Edge BC.
        m = (va <= 0.0) & (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0)
        t = (d4 - d3) / np.where(m, (d4 - d3) + (d5 - d6), 1.0)
        v[m] = 1.0 - t[m]
        w[m] = t[m]
        # Edge AC.
        m = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
        t = d2 / np.where(m, d2 - d6, 1.0)
        v[m] = 0.0
        w[m] = t[m]
        # Edge AB.
        m = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
        t = d1 / np.where(m, d1 - d3, 1.0)
        v[m] = t[m]
        w[m] = 0.0
        # Vertices.
        m = (d1 <= 0.0) & (d2 <= 0.0)
        v[m] = 0.0
        w[m] = 0.0
        m = (d3 >= 0.0) & (d4 <= d3)
        v[m] = 1.0
        w[m] = 0.0
        m = (d6 >= 0.0) & (d5 <= d6)
        v[m] = 0.0
        w[m] = 1.0

        x = A + v[:, None] * ab + w[:, None] * ac
        dist2 = np.einsum("ij,ij->i", x - p, x - p)
        return x, v, w, dist2

    def _feature_normal(self, face, v, w):
        u = 1.0 - v - w
        tol = 1e-9
        tri = self.F[face]
        zero = [u < tol, v < tol, w < tol]
        if sum(zero) >= 2:
            corner = tri[int(np.argmax([u, v, w]))]
            return self.vertex_normals[corner]
        if zero[2]:
            e = (min(tri[0], tri[1]), max(tri[0], tri[1]))
            return self.edge_normals[e]
        if zero[1]:
            e = (min(tri[0], tri[2]), max(tri[0], tri[2]))
            return self.edge_normals[e]
        if zero[0]:
            e = (min(tri[1], tri[2]), max(tri[1], tri[2]))
            return self.edge_normals[e]
        return self.face_normals[face]

    def _ensure_bvh(self):
        if self._bvh is None:
            self._bvh = _AabbTree(self.V, self.F)
        return self._bvh

    def local_nearest(self, p):
        if self.use_bvh:
            idx = self._ensure_bvh().candidates(p)
        else:
            idx = np.arange(self.F.shape[0])
        x, v, w, dist2 = self._closest_on_triangles(p, idx)
        best = int(np.argmin(dist2))
        face = int(idx[best])
        xb = x[best]
        n = self._feature_normal(face, float(v[best]), float(w[best]))
        dist = float(np.sqrt(dist2[best]))
        sign = 1.0 if (p - xb) @ n >= 0.0 else -1.0
        return xb, n.copy(), sign * dist


class _AabbTree:
    """Static AABB tree over triangles; median split on the longest axis."""

    leaf_size = 16

    def __init__(self, V, F):
        tri = V[F]
        self.lo = tri.min(axis=1)
        self.hi = tri.max(axis=1)
        cent = 0.5 * (self.lo + self.hi)
        self.nodes = []
        self._build(np.arange(F.shape[0]), cent)

    def _build(self, idx, cent):
        node = {
            "lo": self.lo[idx].min(axis=0),
            "hi": self.hi[idx].max(axis=0),
            "tris": None, "left": -1, "right": -1,
        }
        self.nodes.append(node)
        me = len(self.nodes) - 1
        if len(idx) <= self.leaf_size:
            node["tris"] = idx
            return me
        axis = int(np.argmax(node["hi"] - node["lo"]))
        order = np.argsort(cent[idx, axis])
        half = len(idx) // 2
        node["left"] = self._build(idx[order[:half]], cent)
        node["right"] = self._build(idx[order[half:]], cent)
        return me

    @staticmethod
    def _box_dist2(node, p):
        d = np.maximum(np.maximum(node["lo"] - p, 0.0), p - node["hi"])
        return float(d @ d)

    def candidates(self, p):
        """Triangles that can contain the nearest point.

        Best-first traversal; the pruning bound is the smallest
        farthest-corner distance of any visited triangle's AABB, which is
        a true upper bound on the nearest distance, so the returned set
        always contains the exact minimizer.
        """
        best_ub = np.inf
        out = []
        heap = [(self._box_dist2(self.nodes[0], p), 0)]
        while heap:
            lb, ni = heapq.heappop(heap)
            if lb > best_ub:
                continue
            node = self.nodes[ni]
            if node["tris"] is not None:
                out.append(node["tris"])
                far = np.maximum(np.abs(p - self.lo[node["tris"]]),
                                 np.abs(p - self.hi[node["tris"]]))
                best_ub = min(best_ub, float((far * far).sum(axis=1).min()))
            else:
                for child in (node["left"], node["right"]):
                    lb_c = self._box_dist2(self.nodes[child], p)
                    if lb_c <= best_ub:
                        heapq.heappush(heap, (lb_c, child))
        return np.sort(np.concatenate(out))


class Surface:
    """A shape plus its attachment; all queries in world frame."""

    def __init__(self, shape, attachment=None, name=""):
        self.shape = shape
        self.attachment = attachment if attachment is not None else StaticAttachment()
        self.name = name

    @property
    def is_dynamic(self):
        return not isinstance(self.attachment, StaticAttachment)

    def bind(self, pose, linear_velocity=None, angular_velocity=None):
        """Same shape pinned to an explicit pose and rigid velocity."""
        return Surface(self.shape, InstantAttachment(pose, linear_velocity, angular_velocity),
                       name=self.name)

    def nearest(self, p, t=None):
        p = np.asarray(p, dtype=float)
        pose = self.attachment.pose(t)
        x_l, n_l, d = self.shape.local_nearest(pose.invert_point(p))
        x = pose.apply(x_l)
        n = pose.rotate(n_l)
        return SurfaceQuery(
            x=x, n=n, signed_distance=d, x_velocity=self.velocity_at(x, t, pose=pose),
        )

    def velocity_at(self, x_world, t=None, pose=None):
        v, w = self.attachment.velocity(t)
        if pose is None:
            pose = self.attachment.pose(t)
        return v + np.cross(w, x_world - pose.translation)


def nearest(surface, p, t=None):
    """World-frame nearest-point query; see SurfaceQuery."""
    return surface.nearest(p, t)


def surface_velocity(surface, x_world, t=None):
    """World velocity of the surface material point at x_world."""
    return surface.velocity_at(np.asarray(x_world, dtype=float), t)


def nearest_among(surfaces, p, t=None):
    """Query several surfaces, keep the closest by |signed distance|."""
    if not surfaces:
        raise EmptySurfaceError("no surfaces to query")
    best = None
    for s in surfaces:
        q = s.nearest(p, t)
        if best is None or abs(q.signed_distance) < abs(best.signed_distance):
            best = q
    return best


def make_box_mesh(half_extents, center=(0.0, 0.0, 0.0)):
    """12-triangle axis-aligned box mesh with outward orientation."""
    h = np.asarray(half_extents, dtype=float)
    c = np.asarray(center, dtype=float)
    sgn = np.array([
        [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
        [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
    ], dtype=float)
    V = c + sgn * h
    F = np.array([
        [0, 2, 1], [0, 3, 2],          # -z
        [4, 5, 6], [4, 6, 7],          # +z
        [0, 1, 5], [0, 5, 4],          # -y
        [3, 7, 6], [3, 6, 2],          # +y
        [0, 4, 7], [0, 7, 3],          # -x
        [1, 2, 6], [1, 6, 5],          # +x
    ], dtype=int)
    return V, F


def voxels_to_mesh(occupancy, cell_size, origin=(0.0, 0.0, 0.0)):
    """Triangle mesh of the boundary of occupied voxel cells.

    Each face between an occupied cell and empty space (or the grid edge)
    becomes two outward-oriented triangles; contact math always runs on
    the resulting mesh, never on the raw voxels.
    """
    occ = np.asarray(occupancy, dtype=bool)
    if occ.ndim != 3:
        raise DomainError("occupancy must be a 3-D array")
    if not occ.any():
        raise EmptySurfaceError("voxel grid has no occupied cells")
    cs = float(cell_size)
    origin = np.asarray(origin, dtype=float)

    verts = {}
    faces = []

    def vid(i, j, k):
        key = (i, j, k)
        if key not in verts:
            verts[key] = len(verts)
        return verts[key]

    # Corner offsets of the exposed face per direction, outward winding.
    face_tables = {
        (1, 0, 0): [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
        (-1, 0, 0): [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],
        (0, 1, 0): [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
        (0, -1, 0): [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
        (0, 0, 1): [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
        (0, 0, -1): [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],
    }

    nx, ny, nz = occ.shape
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if not occ[i, j, k]:
                    continue
                for d, corners in face_tables.items():
                    ni, nj, nk = i + d[0], j + d[1], k + d[2]
                    inside = 0 <= ni < nx and 0 <= nj < ny and 0 <= nk < nz
                    if inside and occ[ni, nj, nk]:
                        continue
                    ids = [vid(i + ci, j + cj, k + ck) for ci, cj, ck in corners]
                    faces.append([ids[0], ids[1], ids[2]])
                    faces.append([ids[0], ids[2], ids[3]])

    V = np.empty((len(verts), 3))
    for (i, j, k), n in verts.items():
        V[n] = origin + cs * np.array([i, j, k], dtype=float)
    return V, np.asarray(faces, dtype=int)
