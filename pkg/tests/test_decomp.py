import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distobs import (
    Plant,
    apply_given_transformation,
    decomposition_from_transform,
    jordan_grouped,
    jordan_system,
    multisensor_decompose,
    node_local_split,
)
from distobs import numkit as nk
from distobs.errors import (
    IllConditionedJordan,
    InvalidTransform,
    ShapeError,
)
from conftest import structured_plant

STAIR_A = np.array([
    [1.0, 2.0, -2.0, -15.0],
    [0.0, 2.0, 4.0, -16.0],
    [0.0, 0.0, 3.0, -3.0],
    [0.0, 0.0, 0.0, 0.0],
])
STAIR_C = (
    np.array([[7.0, -14.0, 35.0, 14.0]]),
    np.array([[0.0, 2.0, -8.0, -4.0]]),
    np.array([[0.0, 0.0, 5.0, -5.0]]),
)


def test_plant_validation():
    with pytest.raises(ShapeError):
        Plant(np.zeros((2, 3)), (np.zeros((1, 2)),))
    with pytest.raises(ShapeError):
        Plant(np.eye(2), (np.zeros((1, 3)),))
    p = Plant(np.eye(2), (np.zeros((0, 2)), np.eye(2)))
    assert p.n == 2 and p.n_nodes == 2


def test_multisensor_decompose_staircase():
    p = Plant(STAIR_A, STAIR_C)
    d = multisensor_decompose(p)
    assert d.o == (1, 1, 1)
    assert d.u_dim == 1
    # round trip and block structure
    np.testing.assert_allclose(
        d.T @ d.Abar @ np.linalg.inv(d.T), p.A, atol=1e-8)
    for j in range(1, 4):
        sl = d.block_slice(j)
        assert sl.stop - sl.start == 1
        # each sub-state pair is observable from its source node's output
        src = d.source_node(j)
        assert nk.is_observable(d.A_sub(j), d.C_block(src, j))
    # later blocks are invisible to earlier sensors
    for i in range(1, 4):
        pos = d.step_of_node[i]
        for j in range(pos + 1, 4):
            np.testing.assert_allclose(d.C_block(i, j), 0.0, atol=1e-9)
        np.testing.assert_allclose(
            d.Cbar[i - 1][:, d.unobs_slice], 0.0, atol=1e-9)


def test_multisensor_order_invariance_of_totals():
    p = Plant(STAIR_A, STAIR_C)
    base = multisensor_decompose(p)
    for order in ((2, 3, 1), (3, 1, 2), (3, 2, 1)):
        d = multisensor_decompose(p, order=order)
        assert sum(d.o) == sum(base.o)
        assert d.u_dim == base.u_dim
        np.testing.assert_allclose(
            sorted(np.linalg.eigvals(d.A_unobs).real), [0.0], atol=1e-8)


def test_apply_given_transformation_literal():
    p = Plant(np.array([[2.0, 1.0], [0.0, 0.5]]),
              (np.array([[1.0, 0.0]]),))
    T = np.array([[1.0, 1.0], [0.0, 1.0]])
    Abar, Cbars = apply_given_transformation(p, T)
    np.testing.assert_allclose(Abar, np.linalg.solve(T, p.A @ T))
    np.testing.assert_allclose(Cbars[0], p.C[0] @ T)


def test_apply_given_transformation_rejects_singular():
    p = Plant(np.eye(2), (np.eye(2),))
    with pytest.raises(InvalidTransform):
        apply_given_transformation(p, np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_decomposition_from_transform_cleans_structure():
    # an exact transform carrying printed-precision dust in the structural
    # zero positions: cleaning snaps those to exactly zero
    p = Plant(STAIR_A, STAIR_C)
    ref = multisensor_decompose(p)
    T = ref.T + 1e-4 * np.eye(4)
    d = decomposition_from_transform(p, T, ref.o, order=ref.order,
                                     structure_tol=1e-2)
    for i in range(1, 4):
        pos = d.step_of_node[i]
        for j in range(pos + 1, 4):
            assert np.all(d.C_block(i, j) == 0.0)
    # but a grossly wrong transform is refused
    with pytest.raises(InvalidTransform):
        decomposition_from_transform(
            p, np.eye(4), (1, 1, 1), structure_tol=1e-6)


def test_decomposition_from_transform_dimension_checks():
    p = Plant(STAIR_A, STAIR_C)
    with pytest.raises(ShapeError):
        decomposition_from_transform(p, np.eye(4), (1, 1))
    with pytest.raises(ShapeError):
        decomposition_from_transform(p, np.eye(4), (2, 2, 2))


def test_jordan_grouped_diagonalizable():
    A = np.diag([2.0, 2.0, 0.5])
    T, classes = jordan_grouped(A)
    assert [c.dim for c in classes] == [2, 1]
    assert classes[0].rep == 2.0 and classes[1].rep == 0.5
    np.testing.assert_allclose(
        np.linalg.solve(T, A @ T),
        np.diag([2.0, 2.0, 0.5]), atol=1e-9)


def test_jordan_grouped_defective_and_complex():
    A = np.array([[2.0, 1.0], [0.0, 2.0]])
    T, classes = jordan_grouped(A)
    assert classes[0].dim == 2
    np.testing.assert_allclose(
        np.linalg.solve(T, A @ T), [[2.0, 1.0], [0.0, 2.0]], atol=1e-8)

    R = 1.3 * np.array([[np.cos(0.7), -np.sin(0.7)],
                        [np.sin(0.7), np.cos(0.7)]])
    T, classes = jordan_grouped(R)
    assert classes[0].complex_pair and classes[0].dim == 2
    assert abs(classes[0].rep) == pytest.approx(1.3)


def test_jordan_grouped_uncertifiable():
    # two eigenvalues too close to separate yet individually resolvable at
    # the iterated-kernel scale: no consistent chain structure exists
    A = np.diag([2.0, 2.0 + 1e-9])
    with pytest.raises(IllConditionedJordan) as exc:
        jordan_grouped(A)
    assert abs(exc.value.eigenvalue - 2.0) < 1e-6


def test_node_local_split_two_sensor_plant():
    A = np.diag([2.0, 2.0])
    T, classes = jordan_grouped(A)
    # node seeing only the first coordinate cannot detect the double mode
    sp = node_local_split(T, classes, 1, np.array([[1.0, 0.0]]))
    assert sp.undetectable == (0,)
    assert sp.det_dim == 0
    # a node with full measurements detects it
    sp3 = node_local_split(T, classes, 3, np.eye(2))
    assert sp3.detectable == (0,)
    assert sp3.det_dim == 2
    assert sp3.aug_dim == 0


def test_jordan_system_assembles_per_node():
    p = Plant(np.diag([2.0, 2.0]),
              (np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), np.eye(2)))
    jsys = jordan_system(p)
    assert len(jsys.per_node) == 3
    assert jsys.class_slice(0) == slice(0, 2)
    np.testing.assert_allclose(jsys.T @ jsys.T_inv, np.eye(2), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_decomposition_planted_oracle(seed):
    rng = np.random.default_rng(seed)
    p, oracle = structured_plant(rng)
    d = multisensor_decompose(p)
    n = oracle["n"]
    assert sum(d.o) + d.u_dim == n
    assert d.u_dim == oracle["u_dim"]
    normA = np.linalg.norm(p.A) or 1.0
    assert np.linalg.norm(
        d.T @ d.Abar @ np.linalg.inv(d.T) - p.A) <= 1e-7 * normA
    if d.u_dim:
        got = sorted(
            (complex(v) for v in np.linalg.eigvals(d.A_unobs)),
            key=lambda z: (z.real, z.imag))
        for a, b in zip(got, oracle["unobs_spectrum"]):
            assert abs(a - b) < 1e-6
