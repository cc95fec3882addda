import numpy as np
import pytest

from ccmsynth.config import shipped
from ccmsynth.deck import MAX_LINE, deck_for, export_deck, validate_deck
from ccmsynth.errors import DeckError
from ccmsynth.pipeline import material_for, prepare

from _util import grid_mesh


def boundary_sides(nx, ny):
    # (element, side) pairs on the rectangle boundary of a grid_mesh
    sides = []
    for i in range(nx):
        sides.append((i * ny, 1))
        sides.append((i * ny + ny - 1, 3))
    for j in range(ny):
        sides.append((j, 4))
        sides.append(((nx - 1) * ny + j, 2))
    return sides


def test_single_element_round_trip():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    text = export_deck(nodes, [[0, 1, 2, 3]], fixed_nodes=[0, 3], load_node=2, load=(0.0, -1.0))
    s = validate_deck(text)
    assert (s.n_nodes, s.n_elements, s.n_steps) == (4, 1, 1)
    assert text.splitlines()[0].startswith("**")


def test_paper_scale_counts_survive_round_trip():
    nodes, els = grid_mesh(2095.0, 8.0, 419, 8)
    assert len(els) == 3352 and len(nodes) == 3780
    # extra unconnected nodes stand in for junction centres and bring the count to the published total
    extra = np.column_stack([np.linspace(0, 2000, 310), np.full(310, 50.0)])
    nodes = np.vstack([nodes, extra])
    text = export_deck(nodes, els, loops=[("OUTER", boundary_sides(419, 8))], fixed_nodes=range(9))
    s = validate_deck(text)
    assert (s.n_nodes, s.n_elements) == (4090, 3352)


def test_ten_thousand_node_line_scan():
    nodes, els = grid_mesh(123456.789, 98765.4321, 99, 99)
    nodes = nodes * np.pi + 1e-7
    assert len(nodes) == 10_000
    rigid = [("KEY0", np.column_stack([np.cos(np.linspace(0, 6, 64)), np.sin(np.linspace(0, 6, 64))]) * 1e5 / 3)]
    loops = [("OUTER", boundary_sides(99, 99))]
    text = export_deck(nodes, els, loops=loops, rigid=rigid, pairs=[("OUTER", "KEY0"), ("OUTER", "OUTER")],
                       fixed_nodes=range(100), load_node=9_999, load=(1 / 3, -2 / 7), output_node=5000,
                       title="x" * 1000)
    assert max(len(ln) for ln in text.splitlines()) <= MAX_LINE
    s = validate_deck(text)
    assert (s.n_nodes, s.n_elements) == (10_000, 99 * 99)
    assert s.pairs == [("OUTER", "KEY0"), ("OUTER", "OUTER")]


def test_shipped_mechanism_deck():
    cfg = shipped("test_mechanism")
    prep = prepare(cfg.domain(), cfg.design_vector(), cfg.settings)
    text = deck_for(prep, material_for(prep, cfg.E, cfg.nu), cfg.settings)
    s = validate_deck(text)
    assert s.n_nodes == prep.mesh.n_nodes and s.n_elements == prep.mesh.n_elements
    assert any(t.startswith("KEY") for _, t in s.pairs)
    assert all(len(ln) <= MAX_LINE for ln in text.splitlines())


def _good():
    nodes, els = grid_mesh(4.0, 2.0, 2, 1)
    return export_deck(nodes, els, loops=[("L", boundary_sides(2, 1))], pairs=[("L", "L")],
                       fixed_nodes=[0, 1], load_node=5)


@pytest.mark.parametrize("mutate,msg", [
    (lambda t: t.replace("*HEADING", "*HEADING, NOTE=" + "y" * 300), "exceeds"),
    (lambda t: t.replace("\n1, 1, 3, 4, 2\n", "\n1, 1, 3, 4, 99\n"), "missing node"),
    (lambda t: t.replace("\nL, L\n", "\nL, GHOST\n"), "undefined surface"),
    (lambda t: "1, 2, 3\n" + t, "before the first keyword"),
    (lambda t: t.replace("*END STEP\n", ""), "unterminated"),
    (lambda t: t.replace("*STATIC", "*DYNAMIC"), "unknown keyword"),
    (lambda t: t.replace("*ELSET, ELSET=L_S1\n1,", "*ELSET, ELSET=L_S1\n77,"), "missing elements"),
    (lambda t: t.replace("*CLOAD\n6,", "*CLOAD\n60,"), "missing node"),
    (lambda t: t.replace("\n2, 0.0, 1.0\n", "\n2, 0.0, 1.0\n2, 5.0, 5.0\n"), "duplicate node"),
])
def test_validator_rejects_defects(mutate, msg):
    text = _good()
    validate_deck(text)
    bad = mutate(text)
    assert bad != text
    with pytest.raises(DeckError) as err:
        validate_deck(bad)
    assert msg in str(err.value)


def test_exporter_refuses_overlong_names_and_bad_pairs():
    nodes, els = grid_mesh(4.0, 2.0, 2, 1)
    with pytest.raises(DeckError):
        export_deck(nodes, els, loops=[("N" * 300, boundary_sides(2, 1))])
    with pytest.raises(DeckError):
        export_deck(nodes, els, loops=[("A", [(0, 1)])], pairs=[("A", "B")])
    with pytest.raises(DeckError):
        export_deck(nodes, els, loops=[("A", [(0, 1)]), ("A", [(1, 1)])])
