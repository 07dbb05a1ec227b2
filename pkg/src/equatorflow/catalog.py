"""Ready-made profiles used by the examples, the CLI and the test-suite."""

from __future__ import annotations

from .profile import CoriolisProfile, make_segment


def linear(slope: float = 1.0, extent: float = 30.0) -> CoriolisProfile:
    """The beta-plane profile f(y) = slope * y."""
    seg = make_segment("linear", -5.0, 5.0, slope=slope, intercept=0.0)
    return CoriolisProfile([seg], tail_slope=slope, extent=extent, name=f"linear({slope:g})")


def tanh_ramp(amplitude: float = 1.0, scale: float = 1.0, width: float = 4.0) -> CoriolisProfile:
    seg = make_segment("tanh", -width, width, amplitude=amplitude, scale=scale)
    return CoriolisProfile([seg], name="tanh")


def constant(value: float, extent: float = 30.0) -> CoriolisProfile:
    """Constant f on [-extent+1, extent-1] with steep tails.

    Only useful on truncated grids with ``L`` well inside the plateau; the
    tails exist so that the object is a valid profile.
    """
    w = extent - 1.0
    seg = make_segment("constant", -w, w, value=value)
    return CoriolisProfile([seg], tail_slope=2.0 * (abs(value) + 10.0), extent=extent, name=f"constant({value:g})")


def sign(plateau: float = 3.0) -> CoriolisProfile:
    """f = sgn(y) on |y| < plateau, continued by linear tails of slope 1."""
    segs = [
        make_segment("constant", -plateau, 0.0, value=-1.0),
        make_segment("constant", 0.0, plateau, value=1.0),
    ]
    return CoriolisProfile(segs, name="sign")


def linear_with_jump() -> CoriolisProfile:
    """f(y) = y except for a +2 jump at y = 0 (plateaus on (-1, 0) and (0, 1))."""
    segs = [
        make_segment("linear", -5.0, -1.0, slope=1.0),
        make_segment("constant", -1.0, 0.0, value=-1.0),
        make_segment("constant", 0.0, 1.0, value=1.0),
        make_segment("linear", 1.0, 5.0, slope=1.0),
    ]
    return CoriolisProfile(segs, name="linear_with_jump")


def three_jumps() -> CoriolisProfile:
    """Jumps +2 at y=-3, -3/2 at y=2 and +1 at y=5 on a slope-1 background.

    f has a single sign change (at y=-1).
    """
    segs = [
        make_segment("linear", -6.0, -4.0, slope=1.0, intercept=1.0),
        make_segment("constant", -4.0, -3.0, value=-3.0),
        make_segment("constant", -3.0, -2.0, value=-1.0),
        make_segment("linear", -2.0, 1.0, slope=1.0, intercept=1.0),
        make_segment("constant", 1.0, 2.0, value=2.0),
        make_segment("constant", 2.0, 3.0, value=0.5),
        make_segment("linear", 3.0, 4.0, slope=1.0, intercept=-2.5),
        make_segment("constant", 4.0, 5.0, value=1.5),
        make_segment("constant", 5.0, 6.0, value=2.5),
    ]
    return CoriolisProfile(segs, name="three_jumps")


def two_negative_jumps() -> CoriolisProfile:
    """Two -2 jumps (at y=-4 and y=4) on a slope-1 background; single zero at y=0."""
    segs = [
        make_segment("constant", -5.0, -4.0, value=-1.0),
        make_segment("constant", -4.0, -3.0, value=-3.0),
        make_segment("linear", -3.0, 3.0, slope=1.0),
        make_segment("constant", 3.0, 4.0, value=3.0),
        make_segment("constant", 4.0, 5.0, value=1.0),
    ]
    return CoriolisProfile(segs, name="two_negative_jumps")


def oscillatory(amplitude: float = 3.0, wavenumber: float = 1.0, width: float = 6.0) -> CoriolisProfile:
    """Smooth f(y) = y + amplitude * sin(wavenumber * y) on |y| < width; f' changes sign."""
    seg = make_segment(
        "oscillatory", -width, width, slope=1.0, amplitude=amplitude, wavenumber=wavenumber
    )
    return CoriolisProfile([seg], name="oscillatory")


CATALOG = {
    "linear": linear,
    "sign": sign,
    "linear_with_jump": linear_with_jump,
    "three_jumps": three_jumps,
    "two_negative_jumps": two_negative_jumps,
    "oscillatory": oscillatory,
    "tanh": tanh_ramp,
}
