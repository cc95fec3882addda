"""Small builders shared by the test modules."""
import numpy as np

from ccmsynth.domain import KIND_FLAG, KIND_SHAPE, build_grid_domain, variable_table


def grid_mesh(L, H, nx, ny, y0=None):
    """Structured rectangle mesh [0, L] x [y0, y0 + H], counter-clockwise quads."""
    y0 = -H / 2 if y0 is None else y0
    xs = np.linspace(0, L, nx + 1)
    ys = np.linspace(y0, y0 + H, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def idx(i, j):
        return i * (ny + 1) + j

    els = np.array([[idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]
                    for i in range(nx) for j in range(ny)])
    return nodes, els


def blank_vector(dom):
    """All flags off, shapes 1, continuous genes mid-range, zero slopes and offsets."""
    lo, hi, kind = variable_table(dom)
    v = 0.5 * (lo + hi)
    v[kind == KIND_FLAG] = 0
    v[kind == KIND_SHAPE] = 1
    lay = dom.layout
    v[lay.offsets] = 0.0
    for m in range(lay.n_members):
        s = lay.member(m)
        v[s.start + 1:s.start + 3] = 0.0
    return v


def beam_domain():
    """Three-block strip with a three-member cantilever along its bottom edge."""
    dom = build_grid_domain(3, 1, 5.0, 2, 1, {0}, n_surfaces=1)
    v = blank_vector(dom)
    for a, b in [(0, 1), (1, 2), (2, 3)]:
        m = dom.members.index((a, b))
        v[dom.layout.member(m)] = [1, 0, 0, 6.0]
    v[dom.layout.force] = 1.0
    return dom, v
