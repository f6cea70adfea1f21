import numpy as np
import pytest

from perclab.lattice import FREE, PERIODIC, GeometryError, LatticeGeometry


def test_basic_properties():
    g = LatticeGeometry((3, 4, 5), boundary="free")
    assert g.d == 3
    assert g.site_count == 60
    assert g.sides == (3, 4, 5)
    assert not g.periodic
    assert list(g.strides) == [20, 5, 1]


def test_sides_coerced_to_int_tuple():
    g = LatticeGeometry([np.int64(4), 6])
    assert g.sides == (4, 6)
    assert all(isinstance(s, int) for s in g.sides)


def test_validation_errors():
    with pytest.raises(GeometryError):
        LatticeGeometry(())
    with pytest.raises(GeometryError):
        LatticeGeometry((4, 0))
    with pytest.raises(GeometryError):
        LatticeGeometry((4, -2))
    with pytest.raises(GeometryError):
        LatticeGeometry((4, 4), boundary="twisted")
    # periodic minimum-image displacement needs side >= 3
    with pytest.raises(GeometryError):
        LatticeGeometry((2, 4), boundary="periodic")
    with pytest.raises(GeometryError):
        LatticeGeometry((3,) * 63, boundary="free")
    with pytest.raises(GeometryError):
        LatticeGeometry((2**31, 2**31, 4), boundary="free")


def test_boundary_constants():
    assert LatticeGeometry((3, 3)).boundary == FREE
    assert LatticeGeometry((3, 3), boundary=PERIODIC).boundary == PERIODIC


def test_immutable():
    g = LatticeGeometry((3, 3))
    with pytest.raises(AttributeError):
        g.sides = (4, 4)
    assert not g.sides_array.flags.writeable


def test_index_coords_round_trip():
    g = LatticeGeometry((3, 4, 5), boundary="free")
    for i in range(g.site_count):
        c = g.index_to_coords(i)
        assert g.coords_to_index(c) == i
    all_coords = g.coords_of(np.arange(g.site_count))
    assert all_coords.shape == (60, 3)
    for i in range(g.site_count):
        assert tuple(all_coords[i]) == g.index_to_coords(i)


def test_row_major_order():
    g = LatticeGeometry((3, 4, 5), boundary="free")
    assert g.index_to_coords(0) == (0, 0, 0)
    assert g.index_to_coords(1) == (0, 0, 1)
    assert g.index_to_coords(5) == (0, 1, 0)
    assert g.index_to_coords(20) == (1, 0, 0)


def test_neighbors_free_axis_major():
    g = LatticeGeometry((4, 4), boundary="free")
    # corner keeps only the plus directions; order is axis-major, minus first
    assert list(g.neighbors(0)) == [4, 1]
    # interior site (1, 1) = index 5
    assert list(g.neighbors(5)) == [1, 9, 4, 6]
    # corner (3, 3) = index 15 keeps only minus directions
    assert list(g.neighbors(15)) == [11, 14]


def test_neighbors_periodic_wrap():
    g = LatticeGeometry((4, 4), boundary="periodic")
    assert list(g.neighbors(0)) == [12, 4, 3, 1]
    for i in range(16):
        assert len(g.neighbors(i)) == 4


def test_neighbor_symmetry():
    for boundary in ("free", "periodic"):
        g = LatticeGeometry((3, 4), boundary=boundary)
        for i in range(g.site_count):
            for j in g.neighbors(i):
                assert i in g.neighbors(j)


def test_displacement_minimum_image():
    g = LatticeGeometry((4, 4), boundary="periodic")
    assert tuple(g.displacement(0, 15)) == (-1, -1)  # (0,0) -> (3,3)
    assert tuple(g.displacement(0, 5)) == (1, 1)  # (0,0) -> (1,1)
    assert tuple(g.displacement(0, 6)) == (1, -2)  # (0,0) -> (1,2), +2 ties to -2
    # side 4: +2 and -2 are the same distance; convention picks -2
    assert tuple(g.displacement(0, 8)) == (-2, 0)  # (0,0) -> (2,0)
    gf = LatticeGeometry((4, 4), boundary="free")
    assert tuple(gf.displacement(0, 15)) == (3, 3)


def test_spanning_axes_mask_skips_side_one():
    assert LatticeGeometry((1, 5), boundary="free").spanning_axes_mask == 0b10
    assert LatticeGeometry((5, 1), boundary="free").spanning_axes_mask == 0b01
    assert LatticeGeometry((3, 3), boundary="free").spanning_axes_mask == 0b11
    assert LatticeGeometry((1, 1), boundary="free").spanning_axes_mask == 0


def test_manifest_fields():
    g = LatticeGeometry((3, 5), boundary="free")
    assert g.manifest_fields() == {"d": 2, "sides": [3, 5], "boundary": "free"}
