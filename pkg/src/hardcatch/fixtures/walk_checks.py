"""Checks for the latent-walk fixture."""

REQUIRES = {
    "window_sum": ["mathutil:window_sum"],
    "clamp": ["mathutil:clamp"],
}


def window_sum():
    from mathutil import window_sum

    assert window_sum([1, 2, 3, 4], 2) == [3, 5, 7]


def clamp():
    from mathutil import clamp

    assert clamp(5, 0, 3) == 3
    assert clamp(-1, 0, 3) == 0
    assert clamp(2, 0, 3) == 2
