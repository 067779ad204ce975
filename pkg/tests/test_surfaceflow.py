import numpy as np
import pytest

from flowfield import (
    MotionParams,
    NumericError,
    TriMesh,
    ValidationError,
    build_bvh,
    evaluate_mesh,
    flow_batch,
    surface_field,
    surface_flows,
)

from conftest import zero_params
from oracles import brute_force_surface_field, rotation_y


@pytest.fixture(scope="module")
def head(mini2):
    mesh = evaluate_mesh(mini2, zero_params(mini2))
    return mesh, build_bvh(mesh)


def sample_points(mesh, n, spread=1.0, seed=0):
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    mid, span = (lo + hi) / 2, (hi - lo) * spread
    rng = np.random.default_rng(seed)
    return rng.uniform(mid - span, mid + span, size=(n, 3))


def surface_points(mesh, n, seed=1):
    rng = np.random.default_rng(seed)
    fi = rng.integers(0, mesh.num_faces, n)
    w = rng.dirichlet(np.ones(3), n)
    return np.einsum("nk,nkj->nj", w, mesh.vertices[mesh.faces[fi]])


def test_identity_for_all_points(head):
    mesh, bvh = head
    pts = sample_points(mesh, 3000)
    p_src, flow = surface_flows(pts, mesh, mesh, bvh)
    assert np.max(np.abs(p_src - pts)) <= 1e-9
    assert np.max(np.abs(flow)) <= 1e-9


def test_pure_translation(head):
    mesh, bvh = head
    t = np.array([0.1, 0.0, 0.0])
    moved = mesh.translated(t)
    pts = sample_points(mesh, 1000, seed=2)
    p_src, flow = surface_flows(pts, mesh, moved, bvh)
    assert np.max(np.abs(p_src - (pts + t))) <= 1e-9
    # Cross-check the matched-face reconstruction against the exhaustive
    # nearest-face oracle.
    oracle = brute_force_surface_field(mesh, moved, pts)
    assert np.max(np.abs(p_src - oracle)) <= 1e-12


def test_rigid_equivariance_near_surface(head):
    mesh, bvh = head
    rot = rotation_y(np.deg2rad(25.0))
    t = np.array([0.1, 0.0, 0.0])
    moved = mesh.transformed(rot, t)
    rng = np.random.default_rng(3)
    base = surface_points(mesh, 2000, seed=3)
    pts = base + rng.normal(size=base.shape) * 0.02
    p_src, _ = surface_flows(pts, mesh, moved, bvh)
    assert np.max(np.abs(p_src - (pts @ rot.T + t))) <= 1e-9


def test_vertex_maps_to_same_vertex(head):
    mesh, bvh = head
    rng = np.random.default_rng(4)
    other = TriMesh(mesh.vertices * 1.2 + [0.0, 0.01, 0.0], mesh.faces)
    idx = rng.integers(0, mesh.num_vertices, 200)
    p_src, _ = surface_flows(mesh.vertices[idx], mesh, other, bvh)
    assert np.max(np.abs(p_src - other.vertices[idx])) <= 1e-9


def test_totality_far_points(head):
    mesh, bvh = head
    pts = sample_points(mesh, 200, spread=10.0, seed=5)
    p_src, flow = surface_flows(pts, mesh, mesh, bvh)
    assert np.all(np.isfinite(p_src))
    assert np.max(np.abs(flow)) <= 1e-9  # identity holds even far away


def test_offset_switch_projects_onto_source_plane(head):
    mesh, bvh = head
    t = np.array([0.0, 0.0, 0.2])
    moved = mesh.translated(t)
    pts = surface_points(mesh, 300, seed=6) + 0.01 * np.array([1.0, 0.0, 0.0])
    from flowfield.geometry import closest_point_batch

    faces, _, _, _ = closest_point_batch(mesh, bvh, pts)
    p_on = surface_flows(pts, mesh, moved, bvh, offset=True)[0]
    p_off = surface_flows(pts, mesh, moved, bvh, offset=False)[0]
    anchors = moved.vertices[moved.faces[faces, 0]]
    heights = np.einsum("ij,ij->i", moved.face_normals[faces], p_off - anchors)
    assert np.max(np.abs(heights)) <= 1e-12
    gap = p_on - p_off
    assert np.max(np.abs(np.linalg.norm(gap, axis=1))) > 0.0


def test_topology_mismatch_rejected(head):
    mesh, _ = head
    other = TriMesh(mesh.vertices, mesh.faces[:-1])
    with pytest.raises(ValidationError):
        surface_flows(np.zeros((1, 3)), mesh, other)


def test_degenerate_source_face_rejected():
    verts_tgt = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    verts_src = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float)  # collapsed
    faces = np.array([[0, 1, 2]], dtype=np.int32)
    tgt = TriMesh(verts_tgt, faces)
    src = TriMesh(verts_src, faces)
    with pytest.raises(NumericError):
        surface_field(np.array([0.2, 0.2, 0.5]), tgt, src)


def test_flow_batch_wraps_arrays(head):
    mesh, bvh = head
    pts = sample_points(mesh, 10, seed=7)
    samples = flow_batch(pts, mesh, mesh, bvh)
    assert len(samples) == 10
    for i, s in enumerate(samples):
        assert np.array_equal(s.p_tgt, pts[i])
        assert np.array_equal(s.flow, s.p_src - s.p_tgt)
    single = surface_field(pts[3], mesh, mesh, bvh)
    assert np.array_equal(samples[3].p_src, single)


def test_flow_batch_rigid_displacement(head):
    mesh, bvh = head
    rot = rotation_y(0.3)
    t = np.array([0.02, -0.01, 0.05])
    moved = mesh.transformed(rot, t)
    pts = surface_points(mesh, 500, seed=8)
    samples = flow_batch(pts, mesh, moved, bvh)
    flows = np.stack([s.flow for s in samples])
    expected = pts @ rot.T + t - pts
    assert np.max(np.abs(flows - expected)) <= 1e-6
